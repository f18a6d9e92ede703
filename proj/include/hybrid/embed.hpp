#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hybrid/matrix.hpp"

namespace hybrid {

using Token = std::int32_t;
using Sequence = std::vector<Token>;

enum class TokenKind { number, word, bit, marker };

std::string to_string(TokenKind kind);

struct TokenInfo {
  TokenKind kind = TokenKind::word;
  /// Lookback value for numbers, bit value for bits, word index otherwise.
  int value = 0;
  std::string name;
};

/// Dense token universe 0..V-1, each token carrying exactly one partition tag.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<TokenInfo> tokens);

  /// Number token #k gets id k; `word_count` words fill the remaining ids
  /// from 0 upward. Requires every value to be >= 1.
  static Vocabulary selective_copy(std::span<const int> number_values, int word_count);
  /// Words 0..2^bit_width-1 (id = binary value), then bit 0, then bit 1.
  static Vocabulary ard(int bit_width);
  /// `size` plain words.
  static Vocabulary plain(int size);
  /// `size` words followed by the needle marker and the query marker.
  static Vocabulary needle(int size);

  std::size_t size() const { return tokens_.size(); }
  bool contains(Token t) const { return t >= 0 && static_cast<std::size_t>(t) < tokens_.size(); }
  const TokenInfo& info(Token t) const;
  TokenKind kind(Token t) const { return info(t).kind; }
  int value(Token t) const { return info(t).value; }
  const std::string& name(Token t) const { return info(t).name; }
  bool is(Token t, TokenKind k) const { return kind(t) == k; }

  std::vector<Token> tokens_of(TokenKind kind) const;
  /// Token whose number value is k, if any.
  std::optional<Token> number(int k) const;
  Token bit(int b) const;
  Token marker(int index) const;
  /// Largest number value present (0 when there are no numbers).
  int max_number() const;

  /// ceil(log2 V), at least 1.
  int code_width() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b);

  const std::vector<TokenInfo>& entries() const { return tokens_; }

 private:
  std::vector<TokenInfo> tokens_;
};

/// ceil(log2 n) for n >= 1, floored at 1.
int ceil_log2(std::uint64_t n);

/// ±1 code of `index`, most significant bit first (bit 1 -> +1, bit 0 -> -1).
std::vector<double> binary_code(std::uint64_t index, int width);
/// Sign-decodes a code produced by binary_code. Entries must be nonzero.
std::uint64_t decode_binary(std::span<const double> code);

/// Width of a position code for sequences of length L: ceil(log2(L+1)).
int position_width(std::size_t length);
/// reversed: binary_code(L+1-i); otherwise binary_code(i). Positions are 1-based.
std::vector<double> pos_encode(std::size_t i, std::size_t length, bool reversed);

enum class FlagRule { numbers, bits };

struct Block {
  std::string name;
  std::size_t offset = 0;
  std::size_t width = 0;
  friend bool operator==(const Block&, const Block&) = default;
};

/// Named row blocks of an embedded column. Blocks are contiguous, disjoint
/// and cover rows 0..d-1.
class BlockLayout {
 public:
  BlockLayout() = default;
  BlockLayout(std::vector<std::pair<std::string, std::size_t>> blocks, FlagRule flag_rule);

  /// code | flag | state | out | pos
  static BlockLayout selective_copy(int code_width, int pos_width);
  /// code | prev | flag | state | out | pos
  static BlockLayout ard(int code_width, int pos_width);

  std::size_t dim() const { return dim_; }
  const Block& block(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<Block>& blocks() const { return blocks_; }
  FlagRule flag_rule() const { return flag_rule_; }

  friend bool operator==(const BlockLayout&, const BlockLayout&) = default;

 private:
  std::vector<Block> blocks_;
  std::size_t dim_ = 0;
  FlagRule flag_rule_ = FlagRule::numbers;
};

struct EmbeddedContext {
  Matrix matrix;  // d x L
  BlockLayout layout;
  std::size_t length = 0;
};

/// Embedding column for `tok` with zero scratch and zero position rows.
std::vector<double> embed_token(Token tok, const Vocabulary& vocab, const BlockLayout& layout);

EmbeddedContext assemble_context(std::span<const Token> seq, const Vocabulary& vocab,
                                 const BlockLayout& layout, bool reversed);

/// Inverse of the code block of a column: sign-decode and look the id up.
Token decode_code(std::span<const double> code, const Vocabulary& vocab);

}  // namespace hybrid

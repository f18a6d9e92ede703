#include "hybrid/embed.hpp"

#include <algorithm>
#include <set>

namespace hybrid {

std::string to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::number: return "number";
    case TokenKind::word: return "word";
    case TokenKind::bit: return "bit";
    case TokenKind::marker: return "marker";
  }
  return "?";
}

Vocabulary::Vocabulary(std::vector<TokenInfo> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw SpecError("Vocabulary: empty token set");
}

Vocabulary Vocabulary::selective_copy(std::span<const int> number_values, int word_count) {
  const std::set<int> values(number_values.begin(), number_values.end());
  if (values.size() != number_values.size()) throw SpecError("selective copy: duplicate number value");
  if (word_count < 0) throw SpecError("selective copy: negative word count");
  const std::size_t v = values.size() + static_cast<std::size_t>(word_count);
  if (v == 0) throw SpecError("selective copy: empty vocabulary");
  std::vector<TokenInfo> tokens(v);
  std::vector<bool> taken(v, false);
  for (int k : values) {
    if (k < 1) throw SpecError("selective copy: number values must be >= 1");
    if (static_cast<std::size_t>(k) >= v) {
      throw ConstructionError("selective copy: number #" + std::to_string(k) +
                              " needs id " + std::to_string(k) + " but V = " + std::to_string(v));
    }
    tokens[k] = {TokenKind::number, k, "#" + std::to_string(k)};
    taken[k] = true;
  }
  int w = 0;
  for (std::size_t id = 0; id < v; ++id) {
    if (taken[id]) continue;
    tokens[id] = {TokenKind::word, w, "w" + std::to_string(w)};
    ++w;
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::ard(int bit_width) {
  if (bit_width < 1 || bit_width > 20) throw SpecError("ard: bit width must be in [1, 20]");
  const int words = 1 << bit_width;
  std::vector<TokenInfo> tokens;
  tokens.reserve(words + 2);
  for (int i = 0; i < words; ++i) tokens.push_back({TokenKind::word, i, "w" + std::to_string(i)});
  tokens.push_back({TokenKind::bit, 0, "0"});
  tokens.push_back({TokenKind::bit, 1, "1"});
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::plain(int size) {
  if (size < 1) throw SpecError("plain vocabulary: size must be positive");
  std::vector<TokenInfo> tokens;
  for (int i = 0; i < size; ++i) tokens.push_back({TokenKind::word, i, "w" + std::to_string(i)});
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::needle(int size) {
  Vocabulary v = plain(size);
  v.tokens_.push_back({TokenKind::marker, 0, "M"});
  v.tokens_.push_back({TokenKind::marker, 1, "Q"});
  return v;
}

const TokenInfo& Vocabulary::info(Token t) const {
  if (!contains(t)) throw LookupError("unknown token id " + std::to_string(t));
  return tokens_[static_cast<std::size_t>(t)];
}

std::vector<Token> Vocabulary::tokens_of(TokenKind kind) const {
  std::vector<Token> out;
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (tokens_[i].kind == kind) out.push_back(static_cast<Token>(i));
  return out;
}

std::optional<Token> Vocabulary::number(int k) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (tokens_[i].kind == TokenKind::number && tokens_[i].value == k) return static_cast<Token>(i);
  return std::nullopt;
}

Token Vocabulary::bit(int b) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (tokens_[i].kind == TokenKind::bit && tokens_[i].value == b) return static_cast<Token>(i);
  throw LookupError("vocabulary has no bit token " + std::to_string(b));
}

Token Vocabulary::marker(int index) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (tokens_[i].kind == TokenKind::marker && tokens_[i].value == index) return static_cast<Token>(i);
  throw LookupError("vocabulary has no marker " + std::to_string(index));
}

int Vocabulary::max_number() const {
  int m = 0;
  for (const auto& t : tokens_)
    if (t.kind == TokenKind::number) m = std::max(m, t.value);
  return m;
}

int Vocabulary::code_width() const { return ceil_log2(tokens_.size()); }

bool operator==(const Vocabulary& a, const Vocabulary& b) {
  if (a.tokens_.size() != b.tokens_.size()) return false;
  for (std::size_t i = 0; i < a.tokens_.size(); ++i) {
    const auto& x = a.tokens_[i];
    const auto& y = b.tokens_[i];
    if (x.kind != y.kind || x.value != y.value || x.name != y.name) return false;
  }
  return true;
}

int ceil_log2(std::uint64_t n) {
  int w = 0;
  while (w < 63 && (std::uint64_t{1} << w) < n) ++w;
  return std::max(w, 1);
}

std::vector<double> binary_code(std::uint64_t index, int width) {
  if (width < 1 || width > 63) throw RangeError("binary_code: width must be in [1, 63]");
  if (index >= (std::uint64_t{1} << width)) {
    throw RangeError("binary_code: index " + std::to_string(index) + " does not fit in " +
                     std::to_string(width) + " bits");
  }
  std::vector<double> code(static_cast<std::size_t>(width));
  for (int b = 0; b < width; ++b) {
    const bool set = (index >> (width - 1 - b)) & 1U;
    code[static_cast<std::size_t>(b)] = set ? 1.0 : -1.0;
  }
  return code;
}

std::uint64_t decode_binary(std::span<const double> code) {
  std::uint64_t index = 0;
  for (double c : code) {
    if (c == 0.0) throw DecodeError("decode_binary: zero entry has no sign");
    index = (index << 1) | (c > 0.0 ? 1U : 0U);
  }
  return index;
}

int position_width(std::size_t length) { return ceil_log2(static_cast<std::uint64_t>(length) + 1); }

std::vector<double> pos_encode(std::size_t i, std::size_t length, bool reversed) {
  if (i < 1 || i > length) {
    throw RangeError("pos_encode: position " + std::to_string(i) + " outside [1, " +
                     std::to_string(length) + "]");
  }
  return binary_code(reversed ? length + 1 - i : i, position_width(length));
}

BlockLayout::BlockLayout(std::vector<std::pair<std::string, std::size_t>> blocks, FlagRule flag_rule)
    : flag_rule_(flag_rule) {
  std::set<std::string> seen;
  for (auto& [name, width] : blocks) {
    if (!seen.insert(name).second) throw SpecError("BlockLayout: duplicate block " + name);
    if (width == 0) throw SpecError("BlockLayout: zero-width block " + name);
    blocks_.push_back({name, dim_, width});
    dim_ += width;
  }
}

BlockLayout BlockLayout::selective_copy(int code_width, int pos_width) {
  const auto cw = static_cast<std::size_t>(code_width);
  const auto pw = static_cast<std::size_t>(pos_width);
  return BlockLayout({{"code", cw}, {"flag", cw}, {"state", pw}, {"out", cw}, {"pos", pw}},
                     FlagRule::numbers);
}

BlockLayout BlockLayout::ard(int code_width, int pos_width) {
  const auto cw = static_cast<std::size_t>(code_width);
  const auto pw = static_cast<std::size_t>(pos_width);
  return BlockLayout(
      {{"code", cw}, {"prev", cw}, {"flag", cw}, {"state", cw}, {"out", cw}, {"pos", pw}},
      FlagRule::bits);
}

const Block& BlockLayout::block(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw LookupError("layout has no block '" + name + "'");
}

bool BlockLayout::has(const std::string& name) const {
  return std::any_of(blocks_.begin(), blocks_.end(), [&](const Block& b) { return b.name == name; });
}

namespace {

bool carries_flag(Token tok, const Vocabulary& vocab, FlagRule rule) {
  switch (rule) {
    case FlagRule::numbers: return vocab.is(tok, TokenKind::number);
    case FlagRule::bits: return vocab.is(tok, TokenKind::bit);
  }
  return false;
}

}  // namespace

std::vector<double> embed_token(Token tok, const Vocabulary& vocab, const BlockLayout& layout) {
  if (!vocab.contains(tok)) throw LookupError("embed_token: unknown token id " + std::to_string(tok));
  const Block& code = layout.block("code");
  const Block& flag = layout.block("flag");
  if (code.width != static_cast<std::size_t>(vocab.code_width()) || flag.width != code.width) {
    throw DimensionError("embed_token: layout code width " + std::to_string(code.width) +
                         " does not match vocabulary code width " +
                         std::to_string(vocab.code_width()));
  }
  std::vector<double> col(layout.dim(), 0.0);
  const auto psi = binary_code(static_cast<std::uint64_t>(tok), static_cast<int>(code.width));
  std::copy(psi.begin(), psi.end(), col.begin() + static_cast<std::ptrdiff_t>(code.offset));
  if (carries_flag(tok, vocab, layout.flag_rule())) {
    std::copy(psi.begin(), psi.end(), col.begin() + static_cast<std::ptrdiff_t>(flag.offset));
  }
  return col;
}

EmbeddedContext assemble_context(std::span<const Token> seq, const Vocabulary& vocab,
                                 const BlockLayout& layout, bool reversed) {
  const std::size_t length = seq.size();
  const Block& pos = layout.block("pos");
  if (length > 0 && position_width(length) > static_cast<int>(pos.width)) {
    throw RangeError("assemble_context: length " + std::to_string(length) +
                     " does not fit a position block of width " + std::to_string(pos.width));
  }
  EmbeddedContext ctx{Matrix(layout.dim(), length), layout, length};
  for (std::size_t i = 0; i < length; ++i) {
    auto col = embed_token(seq[i], vocab, layout);
    const std::size_t position = i + 1;
    const auto phi = binary_code(reversed ? length + 1 - position : position,
                                 static_cast<int>(pos.width));
    std::copy(phi.begin(), phi.end(), col.begin() + static_cast<std::ptrdiff_t>(pos.offset));
    ctx.matrix.set_column(i, col);
  }
  return ctx;
}

Token decode_code(std::span<const double> code, const Vocabulary& vocab) {
  const auto index = decode_binary(code);
  if (index >= vocab.size()) {
    throw DecodeError("decoded id " + std::to_string(index) + " is not in the vocabulary");
  }
  return static_cast<Token>(index);
}

}  // namespace hybrid

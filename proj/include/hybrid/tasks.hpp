#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hybrid/constructions.hpp"
#include "hybrid/embed.hpp"
#include "hybrid/rng.hpp"

namespace hybrid {

enum class Variant { uniform, ds, dt, mixture };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);

/// Bound on rejection-sampling retries per instance.
inline constexpr int kMaxRetries = 1000;

struct DistributionSpec {
  TaskKind task = TaskKind::selective_copy;
  Variant variant = Variant::uniform;
  std::size_t length = 100;

  // selective copy: numbers #number_min..#number_max plus word_count words
  int number_min = 5;
  int number_max = 10;
  int word_count = 26;
  /// D_S draws its final number token among values >= this.
  int ds_number_min = 2;

  // ard
  int bit_width = 5;

  // mkar
  int key_length = 2;
  int vocab_size = 8;

  // nh
  int haystack_size = 100;

  /// Full-size defaults for each task.
  static DistributionSpec defaults(TaskKind task);

  /// Throws SpecError when the parameters cannot produce an instance.
  void validate() const;
  Vocabulary vocabulary() const;

  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

nlohmann::json to_json(const DistributionSpec& spec);
DistributionSpec distribution_from_json(const nlohmann::json& j);

struct TaskInstance {
  Sequence tokens;
  Token target = 0;
  TaskKind task = TaskKind::selective_copy;
  Variant dist = Variant::uniform;
  /// Mixture draws record which half they came from; otherwise equals dist.
  Variant component = Variant::uniform;
  std::uint64_t seed = 0;
  std::uint64_t index = 0;

  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

// Oracles. Each scans the sequence directly.

/// x_{L+1-k} where #k is the last number token.
Token oracle_selective_copy(std::span<const Token> seq, const Vocabulary& vocab);
/// Successor of the last occurrence of the word spelled by the bit tokens.
Token oracle_ard(std::span<const Token> seq, const Vocabulary& vocab, int bit_width);
/// Continuation of the last earlier occurrence of the trailing k-gram.
Token oracle_mkar(std::span<const Token> seq, int k);
/// Token after the unique needle marker.
Token oracle_nh(std::span<const Token> seq, const Vocabulary& vocab);

/// Draws instances of one distribution; the vocabulary is built once.
class TaskSampler {
 public:
  explicit TaskSampler(DistributionSpec spec);

  const DistributionSpec& spec() const { return spec_; }
  const Vocabulary& vocab() const { return vocab_; }

  TaskInstance draw(Rng& rng) const;
  /// Target for `seq` under this task.
  Token oracle(std::span<const Token> seq) const;

 private:
  Sequence draw_selective_copy(Rng& rng, Variant v) const;
  Sequence draw_ard(Rng& rng, Variant v) const;
  Sequence draw_mkar(Rng& rng) const;
  Sequence draw_nh(Rng& rng) const;
  Token uniform_token(Rng& rng) const;
  Token pick(Rng& rng, const std::vector<Token>& from) const;

  DistributionSpec spec_;
  Vocabulary vocab_;
  std::vector<Token> numbers_;
  std::vector<Token> ds_numbers_;
  std::vector<Token> words_;
};

/// Instance i is drawn from Rng::substream(seed, i), so the dataset does not
/// depend on how the work is split.
std::vector<TaskInstance> generate_dataset(const DistributionSpec& spec, std::size_t n, std::uint64_t seed,
                                           unsigned threads = 0);

nlohmann::json to_json(const TaskInstance& inst);
TaskInstance instance_from_json(const nlohmann::json& j);

void write_jsonl(std::ostream& out, std::span<const TaskInstance> data);
std::vector<TaskInstance> read_jsonl(std::istream& in);

}  // namespace hybrid

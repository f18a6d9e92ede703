#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hybrid/attention.hpp"
#include "hybrid/embed.hpp"

namespace hybrid {

enum class TaskKind { selective_copy, ard, mkar, nh };

std::string to_string(TaskKind task);
TaskKind task_from_string(const std::string& name);

/// Sign-rounded entries must sit at least this far from zero.
inline constexpr double kDecodeMargin = 0.5;

/// A layer stack with exact weights plus everything needed to embed an input
/// sequence and read a token back out of the final layer.
struct HybridModel {
  TaskKind task = TaskKind::selective_copy;
  Vocabulary vocab;
  BlockLayout layout;
  LayerStack stack;
  /// Longest sequence the position block can address.
  std::size_t max_length = 0;
  bool reversed_positions = true;
  std::string decode_block = "out";
  double sharpness = 0.0;
  double recency_bias = 0.0;

  EmbeddedContext embed(std::span<const Token> seq) const;
  /// Final-layer matrix; `intermediates` receives every layer's output.
  Matrix forward(std::span<const Token> seq, std::vector<Matrix>* intermediates = nullptr) const;
  /// Decoded token at the last position.
  Token predict(std::span<const Token> seq) const;

  /// Largest attention window in each attention layer, in stack order.
  std::vector<std::size_t> attention_windows() const;

  friend bool operator==(const HybridModel&, const HybridModel&) = default;
};

struct SelectiveCopyOptions {
  std::size_t length = 100;
  /// Defaults to 2 * N_max.
  std::optional<std::size_t> window;
  /// Defaults to 40 * position width.
  std::optional<double> sharpness;
};

/// Mamba (last number token -> its lookback code) then combine MLP then one
/// sliding-window attention head that copies the token that many positions back.
HybridModel build_selective_copy_hybrid(const Vocabulary& vocab, const SelectiveCopyOptions& opts);

struct ArdOptions {
  int bit_width = 5;
  std::size_t length = 512;
  /// Defaults to ard_default_window(bit_width).
  std::optional<std::size_t> window;
  /// Logit bonus per position of recency in the recall layer.
  double recency_bias = 16.0;
  /// Defaults to max(40 * code width, ((window - 1) * recency_bias + 32) / 2).
  std::optional<double> sharpness;
};

/// ceil(|M| (ln|M| + ln 100)) + bit_width + 1 with |M| = 2^bit_width: the
/// span over which every word shows up with probability about 0.99 under
/// uniform draws, plus room for the bit suffix.
std::size_t ard_default_window(int bit_width);

/// Mamba (bit shift register) then combine MLP, then a previous-token /
/// identity attention layer, then a recall layer keyed on the previous token.
HybridModel build_ard_hybrid(const ArdOptions& opts);
/// Same, checking that `vocab` is 2^bit_width words followed by the two bits.
HybridModel build_ard_hybrid(const Vocabulary& vocab, const ArdOptions& opts);

/// Sign-round `column`'s decode block and look the code up.
Token decode(std::span<const double> column, const HybridModel& model);

nlohmann::json to_json(const HybridModel& model);
HybridModel model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Vocabulary& vocab);
Vocabulary vocabulary_from_json(const nlohmann::json& j);

}  // namespace hybrid

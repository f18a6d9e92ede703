#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hybrid/constructions.hpp"
#include "hybrid/gssm.hpp"
#include "hybrid/tasks.hpp"

namespace hybrid {

struct LayerMemory {
  std::string label;
  std::string kind;
  std::size_t params = 0;
  double state_bits = 0.0;
  std::size_t window = 0;
};

/// Input-independent memory is the parameter count; input-dependent memory
/// is the SSM state bits plus the attention windows.
struct MemoryReport {
  std::size_t params = 0;
  double state_bits = 0.0;
  std::size_t window_sum = 0;
  std::size_t embedding_dim = 0;
  std::vector<LayerMemory> layers;

  double input_dependent() const { return state_bits + static_cast<double>(window_sum); }
};

/// Unbounded attention heads count as `max_length`.
MemoryReport memory_report(const LayerStack& stack, std::size_t embedding_dim, std::size_t max_length);
MemoryReport memory_report(const HybridModel& model);
/// Finite machines run as stacked layers: table entries and log2 |S| each.
MemoryReport memory_report(std::span<const StateMachine> layers);

nlohmann::json to_json(const MemoryReport& m);

using Predictor = std::function<Token(std::span<const Token>)>;

struct EvalOptions {
  unsigned threads = 0;
  /// Also score every prefix whose oracle answer is defined (causal,
  /// unreversed-position models only).
  bool all_positions = false;
};

struct EvalReport {
  TaskKind task = TaskKind::selective_copy;
  Variant dist = Variant::uniform;
  std::size_t n = 0;
  std::vector<std::uint8_t> correct;
  std::size_t num_correct = 0;
  std::size_t decode_errors = 0;
  double accuracy = 0.0;
  std::uint64_t seed = 0;
  std::size_t length = 0;
  std::optional<MemoryReport> memory;
  std::size_t positions_scored = 0;
  std::size_t positions_correct = 0;
};

/// Scores predictor(x) against each instance's target. Decode errors count
/// as wrong and are also tallied on their own.
EvalReport evaluate(const Predictor& predict, std::span<const TaskInstance> data, const EvalOptions& opts = {});
EvalReport evaluate(const HybridModel& model, std::span<const TaskInstance> data, const EvalOptions& opts = {});

/// Writes the embedded input and every layer's output under `dir` as
/// NN_label.csv and NN_label.pgm. Returns the files written.
std::vector<std::filesystem::path> dump_trace(const HybridModel& model, std::span<const Token> seq,
                                              const std::filesystem::path& dir, int cell = 8);

/// One row per matrix row: index, block name, then the L column values.
void write_matrix_csv(std::ostream& out, const Matrix& m, const BlockLayout* layout);
/// Binary greyscale: -1 -> 0, 0 -> 128, +1 -> 255, clamped outside [-1, 1].
void write_matrix_pgm(std::ostream& out, const Matrix& m, int cell);
std::uint8_t grey_level(double v);

enum class OutputFormat { csv, json, table };
OutputFormat output_format_from_string(const std::string& s);

nlohmann::json to_json(const EvalReport& r);
void write_report(std::ostream& out, const EvalReport& r, OutputFormat fmt);
void write_memory(std::ostream& out, const MemoryReport& m, OutputFormat fmt);

/// Shortest decimal that round-trips.
std::string format_double(double v);

}  // namespace hybrid

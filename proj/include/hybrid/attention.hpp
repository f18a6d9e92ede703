#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hybrid/embed.hpp"
#include "hybrid/mamba.hpp"
#include "hybrid/matrix.hpp"

namespace hybrid {

/// Stand-in for a -inf bias entry. Added before the softmax; exp() of the
/// shifted logit underflows to exactly zero.
inline constexpr double kMaskedBias = -1e9;

/// One softmax attention head.
///
/// Query j attends to keys i in [j-W+1, j] (causal) or |i-j| < W (not causal),
/// clipped to the sequence; `window` unset means unbounded. `offset_bias[o]`
/// is added to the logit of the key at causal offset o = j - i; offsets past
/// the end of the table get no bias. With `null_key`, a zero column x_0 sits
/// at position 0 and competes like any other key in the window.
struct AttentionParams {
  Matrix w_q;  // d_qk x d
  Matrix w_k;  // d_qk x d
  Matrix w_v;  // d_v x d
  std::optional<std::size_t> window;
  bool causal = true;
  bool null_key = false;
  std::vector<double> offset_bias;

  void validate(std::size_t input_dim) const;

  friend bool operator==(const AttentionParams&, const AttentionParams&) = default;
};

struct AttentionWeights {
  /// weights[j] lists (key position, alpha) pairs; position 0 is the null key
  /// when present, real columns are 1-based.
  std::vector<std::vector<std::pair<std::size_t, double>>> weights;
};

Matrix attention_head(const AttentionParams& p, const Matrix& x, AttentionWeights* weights = nullptr);

struct AttentionLayer {
  std::vector<AttentionParams> heads;
  Matrix w_o;  // d_out x sum(d_v)

  friend bool operator==(const AttentionLayer&, const AttentionLayer&) = default;
};

/// W_o applied to the stacked head outputs.
Matrix attention_layer(const AttentionLayer& layer, const Matrix& x);

enum class Activation { relu, identity };

struct MlpParams {
  Matrix u1;  // hidden x d
  Matrix u2;  // d_out x hidden
  Activation activation = Activation::relu;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

Matrix mlp(const MlpParams& p, const Matrix& x);

/// ReLU MLP that copies blocks of a d-dimensional column. Each (src, dst)
/// pair copies rows [src, src+width) to [dst, dst+width); rows not written by
/// any move come out as zero. x = relu(x) - relu(-x) keeps signed values.
struct BlockMove {
  std::size_t src = 0;
  std::size_t dst = 0;
  std::size_t width = 0;
};
MlpParams block_relocation_mlp(std::size_t dim, const std::vector<BlockMove>& moves);

struct Layer {
  std::variant<MambaParams, AttentionLayer, MlpParams> op;
  /// When set the layer's output is added to its input.
  bool residual = false;
  std::string label;

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct LayerStack {
  std::vector<Layer> layers;

  friend bool operator==(const LayerStack&, const LayerStack&) = default;
};

/// Applies the layers in order. When `intermediates` is given it receives
/// one matrix per layer (that layer's output).
Matrix stack_forward(const LayerStack& stack, const Matrix& x, std::vector<Matrix>* intermediates = nullptr);

/// Applies a single layer, residual included.
Matrix layer_forward(const Layer& layer, const Matrix& x);

nlohmann::json to_json(const LayerStack& stack);
LayerStack stack_from_json(const nlohmann::json& j);

}  // namespace hybrid

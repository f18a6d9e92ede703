#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hybrid/matrix.hpp"

namespace hybrid {

/// Step size Δ(x_t) as a function of the embedded column.
///
/// `indicator` fires (Δ = 1) when any of `rows` is nonzero, which is how the
/// flag block marks tokens in a distinguished subset; `constant` ignores the
/// input.
struct DeltaGate {
  enum class Kind { constant, indicator };
  Kind kind = Kind::constant;
  double value = 0.0;
  std::vector<std::size_t> rows;

  static DeltaGate constant(double v) { return {Kind::constant, v, {}}; }
  static DeltaGate indicator(std::vector<std::size_t> rows) { return {Kind::indicator, 1.0, std::move(rows)}; }

  double operator()(std::span<const double> column) const;

  friend bool operator==(const DeltaGate&, const DeltaGate&) = default;
};

/// First-order selective SSM layer:
///   H_t = (I - Δ(x_t) W_A) H_{t-1} + Δ(x_t) W_B x_t,   y_t = W_C H_t
struct MambaParams {
  Matrix w_a;  // d_s x d_s
  Matrix w_b;  // d_s x d
  Matrix w_c;  // d_out x d_s
  DeltaGate delta;
  std::vector<double> h0;  // empty means zero
  /// Number of distinct states the layer can reach, when the builder knows it.
  std::optional<std::size_t> reachable_states;

  std::size_t state_dim() const { return w_a.rows(); }
  std::size_t input_dim() const { return w_b.cols(); }
  std::size_t output_dim() const { return w_c.rows(); }

  void validate() const;

  friend bool operator==(const MambaParams&, const MambaParams&) = default;
};

struct MambaTrace {
  Matrix output;  // d_out x L, column t = y_t
  Matrix states;  // d_s x L, column t = H_t
};

MambaTrace mamba_forward(const MambaParams& p, const Matrix& x);

nlohmann::json to_json(const MambaParams& p);
MambaParams mamba_from_json(const nlohmann::json& j);

}  // namespace hybrid

#include "hybrid/mamba.hpp"

#include <nlohmann/json.hpp>

#include "hybrid/serialize.hpp"

namespace hybrid {

double DeltaGate::operator()(std::span<const double> column) const {
  if (kind == Kind::constant) return value;
  for (std::size_t r : rows) {
    if (r >= column.size()) throw DimensionError("delta gate row outside the column");
    if (column[r] != 0.0) return value;
  }
  return 0.0;
}

void MambaParams::validate() const {
  const std::size_t ds = w_a.rows();
  if (w_a.cols() != ds) throw DimensionError("mamba: W_A must be square");
  if (w_b.rows() != ds) throw DimensionError("mamba: W_B must have d_s rows");
  if (w_c.cols() != ds) throw DimensionError("mamba: W_C must have d_s columns");
  if (!h0.empty() && h0.size() != ds) throw DimensionError("mamba: H0 must have d_s entries");
}

MambaTrace mamba_forward(const MambaParams& p, const Matrix& x) {
  p.validate();
  if (x.rows() != p.input_dim()) {
    throw DimensionError("mamba_forward: input has " + std::to_string(x.rows()) + " rows, W_B expects " +
                         std::to_string(p.input_dim()));
  }
  const std::size_t ds = p.state_dim();
  const std::size_t length = x.cols();
  std::vector<double> h = p.h0.empty() ? std::vector<double>(ds, 0.0) : p.h0;
  std::vector<double> decay(ds);
  MambaTrace trace{Matrix(p.output_dim(), length), Matrix(ds, length)};
  for (std::size_t t = 0; t < length; ++t) {
    const auto col = x.column(t);
    const double delta = p.delta(col);
    if (delta != 0.0) {
      // h <- h - Δ W_A h + Δ W_B x
      std::fill(decay.begin(), decay.end(), 0.0);
      matvec_acc(p.w_a, h, decay);
      std::vector<double> drive(ds, 0.0);
      matvec_acc(p.w_b, col, drive);
      for (std::size_t i = 0; i < ds; ++i) h[i] = h[i] - delta * decay[i] + delta * drive[i];
    }
    trace.states.set_column(t, h);
    trace.output.set_column(t, matvec(p.w_c, h));
  }
  return trace;
}

nlohmann::json to_json(const MambaParams& p) {
  nlohmann::json delta = {{"kind", p.delta.kind == DeltaGate::Kind::constant ? "constant" : "indicator"},
                          {"value", p.delta.value}};
  if (p.delta.kind == DeltaGate::Kind::indicator) delta["rows"] = p.delta.rows;
  nlohmann::json j = {{"W_A", to_json(p.w_a)}, {"W_B", to_json(p.w_b)}, {"W_C", to_json(p.w_c)},
                      {"delta", delta},        {"H0", p.h0}};
  if (p.reachable_states) j["reachable_states"] = *p.reachable_states;
  return j;
}

MambaParams mamba_from_json(const nlohmann::json& j) {
  MambaParams p;
  p.w_a = matrix_from_json(j.at("W_A"));
  p.w_b = matrix_from_json(j.at("W_B"));
  p.w_c = matrix_from_json(j.at("W_C"));
  const auto& d = j.at("delta");
  const auto kind = d.at("kind").get<std::string>();
  if (kind == "constant") {
    p.delta = DeltaGate::constant(d.at("value").get<double>());
  } else if (kind == "indicator") {
    p.delta = DeltaGate::indicator(d.at("rows").get<std::vector<std::size_t>>());
    p.delta.value = d.value("value", 1.0);
  } else {
    throw FormatError("mamba: unknown delta kind '" + kind + "'");
  }
  p.h0 = j.value("H0", std::vector<double>{});
  if (j.contains("reachable_states")) p.reachable_states = j.at("reachable_states").get<std::size_t>();
  p.validate();
  return p;
}

}  // namespace hybrid

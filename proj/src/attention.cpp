#include "hybrid/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "hybrid/serialize.hpp"

namespace hybrid {

void AttentionParams::validate(std::size_t input_dim) const {
  if (w_q.cols() != input_dim || w_k.cols() != input_dim || w_v.cols() != input_dim) {
    throw DimensionError("attention head: W_q/W_k/W_v must read " + std::to_string(input_dim) + " rows");
  }
  if (w_q.rows() != w_k.rows()) throw DimensionError("attention head: W_q and W_k must share their output width");
  if (window && *window == 0) throw SpecError("attention head: window must be >= 1");
}

Matrix attention_head(const AttentionParams& p, const Matrix& x, AttentionWeights* weights) {
  p.validate(x.rows());
  const std::size_t length = x.cols();
  const Matrix q = p.w_q * x;
  const Matrix k = p.w_k * x;
  const Matrix v = p.w_v * x;
  Matrix out(p.w_v.rows(), length);
  if (weights) weights->weights.assign(length, {});

  const std::size_t dqk = q.rows();
  // position-major copies so each logit is a contiguous dot product
  std::vector<double> qt(length * dqk), kt(length * dqk);
  for (std::size_t r = 0; r < dqk; ++r) {
    for (std::size_t c = 0; c < length; ++c) {
      qt[c * dqk + r] = q(r, c);
      kt[c * dqk + r] = k(r, c);
    }
  }
  std::vector<double> logits;  // logits[n] belongs to key position lo + n (0 = null key)
  for (std::size_t jj = 0; jj < length; ++jj) {
    const std::size_t j = jj + 1;
    const std::size_t w = p.window.value_or(length + 1);
    std::size_t lo = j >= w ? j - w + 1 : 0;  // position 0 is the null key slot
    if (lo == 0 && !p.null_key) lo = 1;
    const std::size_t hi = p.causal ? j : std::min(length, j + w - 1);
    logits.assign(hi - lo + 1, 0.0);
    const double* qj = qt.data() + jj * dqk;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = lo; i <= hi; ++i) {
      double logit = 0.0;
      if (i > 0) {
        const double* ki = kt.data() + (i - 1) * dqk;
        for (std::size_t r = 0; r < dqk; ++r) logit += qj[r] * ki[r];
      }
      if (i <= j && j - i < p.offset_bias.size()) logit += p.offset_bias[j - i];
      logits[i - lo] = logit;
      peak = std::max(peak, logit);
    }
    if (!(peak > kMaskedBias / 2)) {
      throw MaskError("attention head: query at position " + std::to_string(j) + " has no unmasked key");
    }
    double total = 0.0;
    for (double& l : logits) {
      // exp underflows to exactly 0 below -745
      l = l - peak < -746.0 ? 0.0 : std::exp(l - peak);
      total += l;
    }
    if (weights) weights->weights[jj].reserve(logits.size());
    for (std::size_t n = 0; n < logits.size(); ++n) {
      const std::size_t i = lo + n;
      const double alpha = logits[n] == 0.0 ? 0.0 : logits[n] / total;
      if (weights) weights->weights[jj].emplace_back(i, alpha);
      if (i == 0 || alpha == 0.0) continue;
      for (std::size_t r = 0; r < out.rows(); ++r) out(r, jj) += alpha * v(r, i - 1);
    }
  }
  return out;
}

Matrix attention_layer(const AttentionLayer& layer, const Matrix& x) {
  if (layer.heads.empty()) throw DimensionError("attention layer: no heads");
  std::vector<Matrix> outs;
  outs.reserve(layer.heads.size());
  for (const auto& h : layer.heads) outs.push_back(attention_head(h, x));
  const Matrix stacked = vstack(outs);
  if (layer.w_o.cols() != stacked.rows()) {
    throw DimensionError("attention layer: W_o expects " + std::to_string(layer.w_o.cols()) +
                         " stacked head rows, heads produce " + std::to_string(stacked.rows()));
  }
  return layer.w_o * stacked;
}

Matrix mlp(const MlpParams& p, const Matrix& x) {
  if (p.u1.cols() != x.rows()) throw DimensionError("mlp: U1 does not match input rows");
  if (p.u2.cols() != p.u1.rows()) throw DimensionError("mlp: U2 does not match hidden width");
  Matrix hidden = p.u1 * x;
  if (p.activation == Activation::relu) {
    for (std::size_t r = 0; r < hidden.rows(); ++r)
      for (auto& h : hidden.row(r)) h = std::max(h, 0.0);
  }
  return p.u2 * hidden;
}

MlpParams block_relocation_mlp(std::size_t dim, const std::vector<BlockMove>& moves) {
  std::size_t hidden = 0;
  for (const auto& m : moves) {
    if (m.src + m.width > dim || m.dst + m.width > dim) throw DimensionError("block move exceeds dimension");
    hidden += 2 * m.width;
  }
  MlpParams p{Matrix(hidden, dim), Matrix(dim, hidden), Activation::relu};
  std::size_t h = 0;
  for (const auto& m : moves) {
    for (std::size_t r = 0; r < m.width; ++r) {
      p.u1(h, m.src + r) = 1.0;
      p.u1(h + 1, m.src + r) = -1.0;
      p.u2(m.dst + r, h) = 1.0;
      p.u2(m.dst + r, h + 1) = -1.0;
      h += 2;
    }
  }
  return p;
}

Matrix layer_forward(const Layer& layer, const Matrix& x) {
  Matrix y = std::visit(
      [&](const auto& op) -> Matrix {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, MambaParams>) {
          return mamba_forward(op, x).output;
        } else if constexpr (std::is_same_v<T, AttentionLayer>) {
          return attention_layer(op, x);
        } else {
          return mlp(op, x);
        }
      },
      layer.op);
  if (!layer.residual) return y;
  return x + y;
}

Matrix stack_forward(const LayerStack& stack, const Matrix& x, std::vector<Matrix>* intermediates) {
  if (intermediates) intermediates->clear();
  Matrix h = x;
  for (const auto& layer : stack.layers) {
    h = layer_forward(layer, h);
    if (intermediates) intermediates->push_back(h);
  }
  return h;
}

namespace {

nlohmann::json head_to_json(const AttentionParams& h) {
  nlohmann::json j = {{"W_q", to_json(h.w_q)},   {"W_k", to_json(h.w_k)},       {"W_v", to_json(h.w_v)},
                      {"causal", h.causal},      {"null_key", h.null_key},      {"offset_bias", h.offset_bias}};
  j["window"] = h.window ? nlohmann::json(*h.window) : nlohmann::json(nullptr);
  return j;
}

AttentionParams head_from_json(const nlohmann::json& j) {
  AttentionParams h;
  h.w_q = matrix_from_json(j.at("W_q"));
  h.w_k = matrix_from_json(j.at("W_k"));
  h.w_v = matrix_from_json(j.at("W_v"));
  if (!j.at("window").is_null()) h.window = j.at("window").get<std::size_t>();
  h.causal = j.value("causal", true);
  h.null_key = j.value("null_key", false);
  h.offset_bias = j.value("offset_bias", std::vector<double>{});
  return h;
}

}  // namespace

nlohmann::json to_json(const LayerStack& stack) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : stack.layers) {
    nlohmann::json j;
    std::visit(
        [&](const auto& op) {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, MambaParams>) {
            j = to_json(op);
            j["type"] = "mamba";
          } else if constexpr (std::is_same_v<T, AttentionLayer>) {
            nlohmann::json heads = nlohmann::json::array();
            for (const auto& h : op.heads) heads.push_back(head_to_json(h));
            j = {{"type", "attention"}, {"heads", heads}, {"W_o", to_json(op.w_o)}};
          } else {
            j = {{"type", "mlp"},
                 {"U1", to_json(op.u1)},
                 {"U2", to_json(op.u2)},
                 {"activation", op.activation == Activation::relu ? "relu" : "identity"}};
          }
        },
        layer.op);
    j["residual"] = layer.residual;
    j["label"] = layer.label;
    layers.push_back(std::move(j));
  }
  return {{"format", "layer-stack/1"}, {"layers", layers}};
}

LayerStack stack_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "layer-stack/1") throw FormatError("layer stack: unknown format");
    LayerStack stack;
    for (const auto& lj : j.at("layers")) {
      Layer layer;
      layer.residual = lj.value("residual", false);
      layer.label = lj.value("label", std::string{});
      const auto type = lj.at("type").get<std::string>();
      if (type == "mamba") {
        layer.op = mamba_from_json(lj);
      } else if (type == "attention") {
        AttentionLayer at;
        for (const auto& hj : lj.at("heads")) at.heads.push_back(head_from_json(hj));
        at.w_o = matrix_from_json(lj.at("W_o"));
        layer.op = std::move(at);
      } else if (type == "mlp") {
        MlpParams m;
        m.u1 = matrix_from_json(lj.at("U1"));
        m.u2 = matrix_from_json(lj.at("U2"));
        const auto act = lj.value("activation", std::string("relu"));
        if (act == "relu") {
          m.activation = Activation::relu;
        } else if (act == "identity") {
          m.activation = Activation::identity;
        } else {
          throw FormatError("mlp: unknown activation '" + act + "'");
        }
        layer.op = std::move(m);
      } else {
        throw FormatError("layer stack: unknown layer type '" + type + "'");
      }
      stack.layers.push_back(std::move(layer));
    }
    return stack;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("layer stack JSON: ") + e.what());
  }
}

}  // namespace hybrid

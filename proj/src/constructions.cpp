#include "hybrid/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

namespace hybrid {

std::string to_string(TaskKind task) {
  switch (task) {
    case TaskKind::selective_copy: return "selective-copy";
    case TaskKind::ard: return "ard";
    case TaskKind::mkar: return "mkar";
    case TaskKind::nh: return "nh";
  }
  return "?";
}

TaskKind task_from_string(const std::string& name) {
  if (name == "selective-copy") return TaskKind::selective_copy;
  if (name == "ard") return TaskKind::ard;
  if (name == "mkar") return TaskKind::mkar;
  if (name == "nh") return TaskKind::nh;
  throw SpecError("unknown task '" + name + "'");
}

EmbeddedContext HybridModel::embed(std::span<const Token> seq) const {
  if (seq.size() > max_length) {
    throw RangeError("sequence of length " + std::to_string(seq.size()) + " exceeds model capacity " +
                     std::to_string(max_length));
  }
  return assemble_context(seq, vocab, layout, reversed_positions);
}

Matrix HybridModel::forward(std::span<const Token> seq, std::vector<Matrix>* intermediates) const {
  return stack_forward(stack, embed(seq).matrix, intermediates);
}

Token HybridModel::predict(std::span<const Token> seq) const {
  if (seq.empty()) throw RangeError("predict: empty sequence");
  const Matrix out = forward(seq);
  return decode(out.column(out.cols() - 1), *this);
}

std::vector<std::size_t> HybridModel::attention_windows() const {
  std::vector<std::size_t> windows;
  for (const auto& layer : stack.layers) {
    if (const auto* at = std::get_if<AttentionLayer>(&layer.op)) {
      std::size_t w = 0;
      for (const auto& h : at->heads) w = std::max(w, h.window.value_or(max_length));
      windows.push_back(w);
    }
  }
  return windows;
}

namespace {

Layer pass_through_mlp(const BlockLayout& layout, std::initializer_list<const char*> keep) {
  std::vector<BlockMove> moves;
  for (const char* name : keep) {
    const Block& b = layout.block(name);
    moves.push_back({b.offset, b.offset, b.width});
  }
  return {block_relocation_mlp(layout.dim(), moves), false, "combine-mlp"};
}

void copy_rows(Matrix& m, std::size_t dst_row, std::size_t src_col, std::size_t width, double scale = 1.0) {
  for (std::size_t r = 0; r < width; ++r) m(dst_row + r, src_col + r) = scale;
}

std::vector<std::size_t> block_rows(const Block& b) {
  std::vector<std::size_t> rows(b.width);
  for (std::size_t r = 0; r < b.width; ++r) rows[r] = b.offset + r;
  return rows;
}

}  // namespace

HybridModel build_selective_copy_hybrid(const Vocabulary& vocab, const SelectiveCopyOptions& opts) {
  const std::size_t length = opts.length;
  if (length == 0) throw ConstructionError("selective copy: length must be positive");
  const auto numbers = vocab.tokens_of(TokenKind::number);
  if (numbers.empty()) throw ConstructionError("selective copy: vocabulary has no number tokens");
  for (Token t : numbers) {
    const int k = vocab.value(t);
    if (k < 1 || static_cast<std::size_t>(k) > length) {
      throw ConstructionError("selective copy: number #" + std::to_string(k) + " exceeds L = " +
                              std::to_string(length));
    }
    if (t != k) {
      throw ConstructionError("selective copy: number #" + std::to_string(k) + " must have token id " +
                              std::to_string(k));
    }
  }
  const auto n_max = static_cast<std::size_t>(vocab.max_number());
  const std::size_t window = opts.window.value_or(2 * n_max);
  if (window < n_max) throw ConstructionError("selective copy: window must cover the largest lookback");

  const int code_w = vocab.code_width();
  const int pos_w = position_width(length);
  const double sharp = opts.sharpness.value_or(40.0 * pos_w);

  HybridModel model;
  model.task = TaskKind::selective_copy;
  model.vocab = vocab;
  model.layout = BlockLayout::selective_copy(code_w, pos_w);
  model.max_length = length;
  model.reversed_positions = true;
  model.sharpness = sharp;
  const auto& layout = model.layout;
  const std::size_t d = layout.dim();
  const Block& code = layout.block("code");
  const Block& flag = layout.block("flag");
  const Block& state = layout.block("state");
  const Block& out = layout.block("out");
  const Block& pos = layout.block("pos");

  // State: pos_w register components (the lookback code, MSB first) and a
  // trailing constant component pinned at -1.
  const auto pw = static_cast<std::size_t>(pos_w);
  const auto cw = static_cast<std::size_t>(code_w);
  const std::size_t ds = pw + 1;
  MambaParams mamba;
  mamba.w_a = Matrix(ds, ds);
  for (std::size_t r = 0; r < pw; ++r) mamba.w_a(r, r) = 1.0;
  mamba.w_b = Matrix(ds, d);
  mamba.w_c = Matrix(d, ds);
  for (std::size_t j = 0; j < pw; ++j) {
    const std::size_t bit = pw - 1 - j;  // bit position counted from the LSB
    if (bit < cw) {
      mamba.w_b(j, flag.offset + (cw - 1 - bit)) = 1.0;
      mamba.w_c(state.offset + j, j) = 1.0;
    } else {
      // #k has id k < 2^code_w, so every bit above the code width is 0.
      mamba.w_c(state.offset + j, pw) = 1.0;
    }
  }
  mamba.h0.assign(ds, 0.0);
  mamba.h0[pw] = -1.0;
  mamba.delta = DeltaGate::indicator(block_rows(flag));
  mamba.reachable_states = numbers.size() + 1;
  model.stack.layers.push_back({std::move(mamba), true, "mamba"});

  model.stack.layers.push_back(pass_through_mlp(layout, {"code", "flag", "state", "pos"}));

  AttentionParams head;
  head.w_q = Matrix(pw, d);
  copy_rows(head.w_q, 0, state.offset, pw, sharp);
  head.w_k = Matrix(pw, d);
  copy_rows(head.w_k, 0, pos.offset, pw);
  head.w_v = Matrix(d, d);
  copy_rows(head.w_v, out.offset, code.offset, cw);
  head.window = window;
  head.causal = true;
  model.stack.layers.push_back({AttentionLayer{{head}, Matrix::identity(d)}, true, "copy-attention"});
  return model;
}

std::size_t ard_default_window(int bit_width) {
  const double words = std::ldexp(1.0, bit_width);
  return static_cast<std::size_t>(std::ceil(words * (std::log(words) + std::log(100.0)))) +
         static_cast<std::size_t>(bit_width) + 1;
}

HybridModel build_ard_hybrid(const ArdOptions& opts) { return build_ard_hybrid(Vocabulary::ard(opts.bit_width), opts); }

HybridModel build_ard_hybrid(const Vocabulary& vocab, const ArdOptions& opts) {
  const int bw = opts.bit_width;
  if (bw < 1 || bw > 20) throw ConstructionError("ard: bit_width must be in 1..20");
  const auto words = vocab.tokens_of(TokenKind::word);
  const auto bits = vocab.tokens_of(TokenKind::bit);
  if (words.size() != (std::size_t{1} << bw)) {
    throw ConstructionError("ard: |M| = " + std::to_string(words.size()) + " but 2^bit_width = " +
                            std::to_string(std::size_t{1} << bw));
  }
  if (vocab != Vocabulary::ard(bw) || bits.size() != 2) {
    throw ConstructionError("ard: vocabulary must be the words 0..2^bw-1 followed by bit 0 and bit 1");
  }
  const int code_w = vocab.code_width();
  if (opts.length < static_cast<std::size_t>(bw) + 2) throw ConstructionError("ard: length too short for the key bits");
  const std::size_t window = opts.window.value_or(ard_default_window(bw));
  if (window < 2) throw ConstructionError("ard: recall window must be at least 2");
  const int pos_w = position_width(opts.length);
  const double delta = opts.recency_bias;
  const double sharp =
      opts.sharpness.value_or(std::max(40.0 * code_w, (static_cast<double>(window - 1) * delta + 32.0) / 2.0));

  HybridModel model;
  model.task = TaskKind::ard;
  model.vocab = vocab;
  model.layout = BlockLayout::ard(code_w, pos_w);
  model.max_length = opts.length;
  model.reversed_positions = false;
  model.sharpness = sharp;
  model.recency_bias = delta;
  const auto& layout = model.layout;
  const std::size_t d = layout.dim();
  const auto cw = static_cast<std::size_t>(code_w);
  const Block& code = layout.block("code");
  const Block& prev = layout.block("prev");
  const Block& flag = layout.block("flag");
  const Block& state = layout.block("state");
  const Block& out = layout.block("out");

  // State: component 0 is a constant -1 (the MSB every word code shares),
  // components 1..bw form the shift register, oldest bit first.
  const auto ubw = static_cast<std::size_t>(bw);
  const std::size_t ds = ubw + 1;
  MambaParams mamba;
  mamba.w_a = Matrix(ds, ds);
  for (std::size_t a = 1; a <= ubw; ++a) {
    mamba.w_a(a, a) = 1.0;
    if (a < ubw) mamba.w_a(a, a + 1) = -1.0;  // I - S, S z = (z_2, ..., z_bw, 0)
  }
  mamba.w_b = Matrix(ds, d);
  mamba.w_b(ubw, flag.offset + cw - 1) = 1.0;  // bit 1 has odd id, bit 0 even
  mamba.w_c = Matrix(d, ds);
  copy_rows(mamba.w_c, state.offset, 0, ds);
  mamba.h0.assign(ds, 0.0);
  mamba.h0[0] = -1.0;
  mamba.delta = DeltaGate::indicator(block_rows(flag));
  mamba.reachable_states = (std::size_t{1} << (ubw + 1)) - 1;
  model.stack.layers.push_back({std::move(mamba), true, "mamba"});

  model.stack.layers.push_back(pass_through_mlp(layout, {"code", "flag", "state", "pos"}));

  // Previous-token selector and identity head, summed by W_o.
  AttentionParams previous;
  previous.w_q = Matrix(1, d);
  previous.w_k = Matrix(1, d);
  previous.w_v = Matrix(d, d);
  copy_rows(previous.w_v, prev.offset, code.offset, cw);
  previous.window = 2;
  previous.null_key = true;
  previous.offset_bias = {kMaskedBias, 0.0};
  AttentionParams identity;
  identity.w_q = Matrix(1, d);
  identity.w_k = Matrix(1, d);
  identity.w_v = Matrix::identity(d);
  identity.window = 1;
  Matrix w_o(d, 2 * d);
  w_o.set_block(0, 0, Matrix::identity(d));
  w_o.set_block(0, d, Matrix::identity(d));
  model.stack.layers.push_back({AttentionLayer{{previous, identity}, w_o}, false, "shift-attention"});

  AttentionParams recall;
  recall.w_q = Matrix(cw, d);
  copy_rows(recall.w_q, 0, state.offset, cw, sharp);
  recall.w_k = Matrix(cw, d);
  copy_rows(recall.w_k, 0, prev.offset, cw);
  recall.w_v = Matrix(d, d);
  copy_rows(recall.w_v, out.offset, code.offset, cw);
  recall.window = window;
  recall.offset_bias.resize(window);
  for (std::size_t o = 0; o < window; ++o) recall.offset_bias[o] = -delta * static_cast<double>(o);
  model.stack.layers.push_back({AttentionLayer{{recall}, Matrix::identity(d)}, true, "recall-attention"});
  return model;
}

Token decode(std::span<const double> column, const HybridModel& model) {
  const Block& b = model.layout.block(model.decode_block);
  if (column.size() != model.layout.dim()) throw DimensionError("decode: column does not match layout");
  const auto code = column.subspan(b.offset, b.width);
  for (double v : code) {
    if (!(std::abs(v) >= kDecodeMargin)) {
      throw LowConfidenceError("decode: entry " + std::to_string(v) + " inside the margin");
    }
  }
  return decode_code(code, model.vocab);
}

nlohmann::json to_json(const Vocabulary& vocab) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& t : vocab.entries()) {
    tokens.push_back({{"kind", to_string(t.kind)}, {"value", t.value}, {"name", t.name}});
  }
  return tokens;
}

Vocabulary vocabulary_from_json(const nlohmann::json& j) {
  std::vector<TokenInfo> tokens;
  for (const auto& t : j) {
    const auto kind = t.at("kind").get<std::string>();
    TokenKind k;
    if (kind == "number") {
      k = TokenKind::number;
    } else if (kind == "word") {
      k = TokenKind::word;
    } else if (kind == "bit") {
      k = TokenKind::bit;
    } else if (kind == "marker") {
      k = TokenKind::marker;
    } else {
      throw FormatError("vocabulary: unknown token kind '" + kind + "'");
    }
    tokens.push_back({k, t.at("value").get<int>(), t.at("name").get<std::string>()});
  }
  return Vocabulary(std::move(tokens));
}

nlohmann::json to_json(const HybridModel& model) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : model.layout.blocks()) blocks.push_back({b.name, b.width});
  return {{"format", "hybrid-model/1"},
          {"task", to_string(model.task)},
          {"max_length", model.max_length},
          {"reversed_positions", model.reversed_positions},
          {"decode_block", model.decode_block},
          {"sharpness", model.sharpness},
          {"recency_bias", model.recency_bias},
          {"vocab", to_json(model.vocab)},
          {"layout",
           {{"flag_rule", model.layout.flag_rule() == FlagRule::numbers ? "numbers" : "bits"},
            {"blocks", blocks}}},
          {"stack", to_json(model.stack)}};
}

HybridModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "hybrid-model/1") throw FormatError("model: unknown format");
    HybridModel m;
    m.task = task_from_string(j.at("task").get<std::string>());
    m.max_length = j.at("max_length").get<std::size_t>();
    m.reversed_positions = j.at("reversed_positions").get<bool>();
    m.decode_block = j.at("decode_block").get<std::string>();
    m.sharpness = j.at("sharpness").get<double>();
    m.recency_bias = j.at("recency_bias").get<double>();
    m.vocab = vocabulary_from_json(j.at("vocab"));
    std::vector<std::pair<std::string, std::size_t>> blocks;
    for (const auto& b : j.at("layout").at("blocks")) blocks.emplace_back(b[0].get<std::string>(), b[1].get<std::size_t>());
    const auto rule = j.at("layout").at("flag_rule").get<std::string>();
    m.layout = BlockLayout(std::move(blocks), rule == "bits" ? FlagRule::bits : FlagRule::numbers);
    m.stack = stack_from_json(j.at("stack"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model JSON: ") + e.what());
  }
}

}  // namespace hybrid

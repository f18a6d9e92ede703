#include "hybrid/harness.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "hybrid/parallel.hpp"

namespace hybrid {

namespace {

std::size_t entries(const Matrix& m) { return m.rows() * m.cols(); }

}  // namespace

MemoryReport memory_report(const LayerStack& stack, std::size_t embedding_dim, std::size_t max_length) {
  MemoryReport rep;
  rep.embedding_dim = embedding_dim;
  for (const auto& layer : stack.layers) {
    LayerMemory lm;
    lm.label = layer.label;
    if (const auto* mb = std::get_if<MambaParams>(&layer.op)) {
      lm.kind = "mamba";
      lm.params = entries(mb->w_a) + entries(mb->w_b) + entries(mb->w_c) + mb->h0.size();
      lm.state_bits = mb->reachable_states ? std::log2(static_cast<double>(*mb->reachable_states))
                                           : static_cast<double>(mb->state_dim() * 64);
    } else if (const auto* at = std::get_if<AttentionLayer>(&layer.op)) {
      lm.kind = "attention";
      lm.params = entries(at->w_o);
      for (const auto& h : at->heads) {
        lm.params += entries(h.w_q) + entries(h.w_k) + entries(h.w_v) + h.offset_bias.size();
        lm.window = std::max(lm.window, h.window.value_or(max_length));
      }
    } else {
      const auto& ml = std::get<MlpParams>(layer.op);
      lm.kind = "mlp";
      lm.params = entries(ml.u1) + entries(ml.u2);
    }
    rep.params += lm.params;
    rep.state_bits += lm.state_bits;
    rep.window_sum += lm.window;
    rep.layers.push_back(std::move(lm));
  }
  return rep;
}

MemoryReport memory_report(const HybridModel& model) {
  return memory_report(model.stack, model.layout.dim(), model.max_length);
}

MemoryReport memory_report(std::span<const StateMachine> layers) {
  MemoryReport rep;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    LayerMemory lm;
    lm.label = "gssm-" + std::to_string(i);
    lm.kind = "gssm";
    lm.params = layers[i].update_table().size() + layers[i].readout_table().size();
    lm.state_bits = mem_bits(layers[i]);
    rep.params += lm.params;
    rep.state_bits += lm.state_bits;
    rep.layers.push_back(std::move(lm));
  }
  return rep;
}

nlohmann::json to_json(const MemoryReport& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : m.layers) {
    layers.push_back(
        {{"label", l.label}, {"kind", l.kind}, {"params", l.params}, {"state_bits", l.state_bits}, {"window", l.window}});
  }
  return {{"params", m.params},
          {"state_bits", m.state_bits},
          {"window_sum", m.window_sum},
          {"input_dependent", m.input_dependent()},
          {"embedding_dim", m.embedding_dim},
          {"layers", layers}};
}

EvalReport evaluate(const Predictor& predict, std::span<const TaskInstance> data, const EvalOptions& opts) {
  EvalReport rep;
  rep.n = data.size();
  if (!data.empty()) {
    rep.task = data.front().task;
    rep.dist = data.front().dist;
    rep.seed = data.front().seed;
    rep.length = data.front().tokens.size();
  }
  rep.correct.assign(data.size(), 0);
  std::vector<std::uint8_t> decode_failed(data.size(), 0);
  parallel_for(data.size(), opts.threads, [&](std::size_t i) {
    try {
      rep.correct[i] = predict(data[i].tokens) == data[i].target;
    } catch (const DecodeError&) {
      decode_failed[i] = 1;
    }
  });
  for (std::size_t i = 0; i < data.size(); ++i) {
    rep.num_correct += rep.correct[i];
    rep.decode_errors += decode_failed[i];
  }
  rep.accuracy = data.empty() ? 0.0 : static_cast<double>(rep.num_correct) / static_cast<double>(data.size());
  return rep;
}

EvalReport evaluate(const HybridModel& model, std::span<const TaskInstance> data, const EvalOptions& opts) {
  if (opts.all_positions && model.reversed_positions) {
    throw SpecError("all-positions scoring needs a model whose columns do not depend on L");
  }
  EvalReport rep = evaluate([&model](std::span<const Token> x) { return model.predict(x); }, data, opts);
  rep.memory = memory_report(model);
  if (!opts.all_positions) return rep;

  const Vocabulary& vocab = model.vocab;
  std::vector<std::size_t> scored(data.size(), 0);
  std::vector<std::size_t> hit(data.size(), 0);
  parallel_for(data.size(), opts.threads, [&](std::size_t i) {
    const auto& x = data[i].tokens;
    const Matrix out = model.forward(x);
    for (std::size_t t = 1; t <= x.size(); ++t) {
      const std::span<const Token> prefix(x.data(), t);
      Token want;
      try {
        switch (data[i].task) {
          case TaskKind::selective_copy: want = oracle_selective_copy(prefix, vocab); break;
          case TaskKind::ard: want = oracle_ard(prefix, vocab, vocab.code_width() - 1); break;
          default: throw SpecError("no construction for this task");
        }
      } catch (const UndefinedInputError&) {
        continue;
      } catch (const RangeError&) {
        continue;
      }
      ++scored[i];
      try {
        hit[i] += decode(out.column(t - 1), model) == want;
      } catch (const DecodeError&) {
      }
    }
  });
  for (std::size_t i = 0; i < data.size(); ++i) {
    rep.positions_scored += scored[i];
    rep.positions_correct += hit[i];
  }
  return rep;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::uint8_t grey_level(double v) {
  if (std::isnan(v)) return 128;
  v = std::clamp(v, -1.0, 1.0);
  return static_cast<std::uint8_t>(std::lround((v + 1.0) * 127.5));
}

void write_matrix_csv(std::ostream& out, const Matrix& m, const BlockLayout* layout) {
  out << "row,block";
  for (std::size_t c = 0; c < m.cols(); ++c) out << ",x" << c + 1;
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::string block = "-";
    if (layout && layout->dim() == m.rows()) {
      for (const auto& b : layout->blocks()) {
        if (r >= b.offset && r < b.offset + b.width) block = b.name + ":" + std::to_string(r - b.offset);
      }
    }
    out << r << ',' << block;
    for (std::size_t c = 0; c < m.cols(); ++c) out << ',' << format_double(m(r, c));
    out << '\n';
  }
}

void write_matrix_pgm(std::ostream& out, const Matrix& m, int cell) {
  if (cell < 1) throw RangeError("pgm cell size must be positive");
  const auto uc = static_cast<std::size_t>(cell);
  const std::size_t w = m.cols() * uc;
  const std::size_t h = m.rows() * uc;
  out << "P5\n" << w << ' ' << h << "\n255\n";
  std::string line(w, '\0');
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const char g = static_cast<char>(grey_level(m(r, c)));
      std::fill_n(line.begin() + static_cast<std::ptrdiff_t>(c * uc), uc, g);
    }
    for (std::size_t k = 0; k < uc; ++k) out.write(line.data(), static_cast<std::streamsize>(w));
  }
}

std::vector<std::filesystem::path> dump_trace(const HybridModel& model, std::span<const Token> seq,
                                              const std::filesystem::path& dir, int cell) {
  if (dir.empty()) throw IoError("dump: empty output path");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("dump: cannot create " + dir.string() + ": " + ec.message());

  const EmbeddedContext ctx = model.embed(seq);
  std::vector<Matrix> stages;
  stack_forward(model.stack, ctx.matrix, &stages);
  std::vector<std::pair<std::string, const Matrix*>> named{{"input", &ctx.matrix}};
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& label = model.stack.layers[i].label;
    named.emplace_back(label.empty() ? "layer" : label, &stages[i]);
  }

  std::vector<std::filesystem::path> written;
  for (std::size_t i = 0; i < named.size(); ++i) {
    std::ostringstream stem;
    stem << std::setw(2) << std::setfill('0') << i << '_' << named[i].first;
    const auto csv = dir / (stem.str() + ".csv");
    const auto pgm = dir / (stem.str() + ".pgm");
    std::ofstream c(csv);
    write_matrix_csv(c, *named[i].second, &model.layout);
    std::ofstream p(pgm, std::ios::binary);
    write_matrix_pgm(p, *named[i].second, cell);
    if (!c || !p) throw IoError("dump: failed writing " + stem.str());
    written.push_back(csv);
    written.push_back(pgm);
  }
  return written;
}

OutputFormat output_format_from_string(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  if (s == "table") return OutputFormat::table;
  throw SpecError("unknown format '" + s + "'");
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j = {{"task", to_string(r.task)},
                      {"dist", to_string(r.dist)},
                      {"n", r.n},
                      {"correct", r.num_correct},
                      {"accuracy", r.accuracy},
                      {"decode_errors", r.decode_errors},
                      {"seed", r.seed},
                      {"length", r.length},
                      {"positions_scored", r.positions_scored},
                      {"positions_correct", r.positions_correct}};
  if (r.memory) j["memory"] = to_json(*r.memory);
  return j;
}

namespace {

const char* kReportHeader =
    "task,dist,n,correct,accuracy,decode_errors,seed,length,params,state_bits,window_sum,positions_scored,"
    "positions_correct";

}  // namespace

void write_report(std::ostream& out, const EvalReport& r, OutputFormat fmt) {
  const MemoryReport mem = r.memory.value_or(MemoryReport{});
  switch (fmt) {
    case OutputFormat::csv:
      out << kReportHeader << '\n'
          << to_string(r.task) << ',' << to_string(r.dist) << ',' << r.n << ',' << r.num_correct << ','
          << format_double(r.accuracy) << ',' << r.decode_errors << ',' << r.seed << ',' << r.length << ','
          << mem.params << ',' << format_double(mem.state_bits) << ',' << mem.window_sum << ','
          << r.positions_scored << ',' << r.positions_correct << '\n';
      break;
    case OutputFormat::json: out << to_json(r).dump(2) << '\n'; break;
    case OutputFormat::table: {
      auto row = [&](const char* k, const std::string& v) { out << std::left << std::setw(18) << k << v << '\n'; };
      row("task", to_string(r.task));
      row("dist", to_string(r.dist));
      row("n", std::to_string(r.n));
      row("correct", std::to_string(r.num_correct));
      row("accuracy", format_double(r.accuracy));
      row("decode_errors", std::to_string(r.decode_errors));
      row("seed", std::to_string(r.seed));
      row("length", std::to_string(r.length));
      row("params", std::to_string(mem.params));
      row("state_bits", format_double(mem.state_bits));
      row("window_sum", std::to_string(mem.window_sum));
      if (r.positions_scored) {
        row("positions_scored", std::to_string(r.positions_scored));
        row("positions_correct", std::to_string(r.positions_correct));
      }
      break;
    }
  }
}

void write_memory(std::ostream& out, const MemoryReport& m, OutputFormat fmt) {
  switch (fmt) {
    case OutputFormat::csv:
      out << "layer,label,kind,params,state_bits,window\n";
      for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const auto& l = m.layers[i];
        out << i << ',' << l.label << ',' << l.kind << ',' << l.params << ',' << format_double(l.state_bits) << ','
            << l.window << '\n';
      }
      out << "total,,," << m.params << ',' << format_double(m.state_bits) << ',' << m.window_sum << '\n';
      break;
    case OutputFormat::json: out << to_json(m).dump(2) << '\n'; break;
    case OutputFormat::table:
      out << std::left << std::setw(6) << "layer" << std::setw(20) << "label" << std::setw(11) << "kind"
          << std::setw(10) << "params" << std::setw(20) << "state_bits" << "window\n";
      for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const auto& l = m.layers[i];
        out << std::left << std::setw(6) << i << std::setw(20) << l.label << std::setw(11) << l.kind << std::setw(10)
            << l.params << std::setw(20) << format_double(l.state_bits) << l.window << '\n';
      }
      out << "input-independent " << m.params << " params; input-dependent " << format_double(m.state_bits)
          << " state bits + " << m.window_sum << " window (d = " << m.embedding_dim << ")\n";
      break;
  }
}

}  // namespace hybrid

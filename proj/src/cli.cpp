#include "hybrid/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "hybrid/harness.hpp"
#include "hybrid/parallel.hpp"
#include "hybrid/probes.hpp"

namespace hybrid {

namespace {

/// Reads --config files written as JSON. Nested objects address subcommands:
/// {"seed": 7, "construct-eval": {"L": 100, "n": 500}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::json j = nlohmann::json::object();
    fill(app, default_also, j);
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(input);
    } catch (const nlohmann::json::parse_error& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    walk(j, {}, items);
    return items;
  }

 private:
  static void fill(const CLI::App* app, bool default_also, nlohmann::json& j) {
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const auto& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto& res = opt->results();
        j[name] = res.size() == 1 ? nlohmann::json(res.front()) : nlohmann::json(res);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      nlohmann::json child = nlohmann::json::object();
      fill(sub, default_also, child);
      if (!child.empty()) j[sub->get_name()] = child;
    }
  }

  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void walk(const nlohmann::json& j, std::vector<std::string> parents, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto next = parents;
        next.push_back(key);
        walk(value, next, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

struct GlobalArgs {
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
};

struct TaskArgs {
  std::string task = "selective-copy";
  std::string dist = "uniform";
  std::optional<std::size_t> length;
  std::optional<int> number_min;
  std::optional<int> number_max;
  std::optional<int> word_count;
  std::optional<int> ds_number_min;
  std::optional<int> bit_width;
  std::optional<int> key_length;
  std::optional<int> vocab_size;
  std::optional<int> haystack_size;

  void attach(CLI::App* cmd) {
    cmd->add_option("--task", task, "selective-copy | ard | mkar | nh")->capture_default_str();
    cmd->add_option("--dist", dist, "uniform | ds | dt | mixture")->capture_default_str();
    cmd->add_option("-L,--L,--length", length, "sequence length");
    cmd->add_option("--number-min", number_min, "smallest number token value");
    cmd->add_option("--number-max", number_max, "largest number token value");
    cmd->add_option("--words", word_count, "selective-copy word count");
    cmd->add_option("--ds-number-min", ds_number_min, "smallest number value D_S puts last");
    cmd->add_option("--bit-width", bit_width, "ARD key bits");
    cmd->add_option("--key-length", key_length, "MKAR query length");
    cmd->add_option("--vocab-size", vocab_size, "MKAR vocabulary size");
    cmd->add_option("--haystack-size", haystack_size, "NH word count");
  }

  DistributionSpec spec() const {
    auto s = DistributionSpec::defaults(task_from_string(task));
    s.variant = variant_from_string(dist);
    if (length) s.length = *length;
    if (number_min) s.number_min = *number_min;
    if (number_max) s.number_max = *number_max;
    if (word_count) s.word_count = *word_count;
    if (ds_number_min) s.ds_number_min = *ds_number_min;
    if (bit_width) s.bit_width = *bit_width;
    if (key_length) s.key_length = *key_length;
    if (vocab_size) s.vocab_size = *vocab_size;
    if (haystack_size) s.haystack_size = *haystack_size;
    s.validate();
    return s;
  }
};

struct ModelArgs {
  std::optional<std::size_t> window;
  std::optional<double> sharpness;
  double recency_bias = 16.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--window", window, "recall attention window");
    cmd->add_option("--sharpness", sharpness, "query scale M");
    cmd->add_option("--recency-bias", recency_bias, "ARD per-position recency bonus")->capture_default_str();
  }

  HybridModel build(const DistributionSpec& spec) const {
    switch (spec.task) {
      case TaskKind::selective_copy: {
        SelectiveCopyOptions o;
        o.length = spec.length;
        o.window = window;
        o.sharpness = sharpness;
        return build_selective_copy_hybrid(spec.vocabulary(), o);
      }
      case TaskKind::ard: {
        ArdOptions o;
        o.bit_width = spec.bit_width;
        o.length = spec.length;
        o.window = window;
        o.recency_bias = recency_bias;
        o.sharpness = sharpness;
        return build_ard_hybrid(o);
      }
      default: throw SpecError("no hybrid construction exists for task '" + to_string(spec.task) + "'");
    }
  }
};

/// Output sink: the --out file when given, otherwise the caller's stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw IoError("cannot open " + path + " for writing");
      stream_ = file_.get();
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

void write_checks(std::ostream& out, const std::vector<Check>& checks, OutputFormat fmt) {
  switch (fmt) {
    case OutputFormat::csv:
      out << "check,status,detail\n";
      for (const auto& c : checks) out << c.name << ',' << (c.passed ? "PASS" : "FAIL") << ",\"" << c.detail << "\"\n";
      break;
    case OutputFormat::json: {
      nlohmann::json j = nlohmann::json::array();
      for (const auto& c : checks) j.push_back({{"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
      out << j.dump(2) << '\n';
      break;
    }
    case OutputFormat::table:
      for (const auto& c : checks) out << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << '\n';
      break;
  }
}

std::vector<Check> verification_suite(std::size_t n, std::uint64_t seed, unsigned threads) {
  std::vector<Check> checks;

  {
    // every length-8 sequence over {w0, w1, w2, #2, #3} with a number token
    const std::vector<int> values{2, 3};
    const Vocabulary vocab = Vocabulary::selective_copy(values, 3);
    const HybridModel model = build_selective_copy_hybrid(vocab, {.length = 8});
    const std::size_t v = vocab.size();
    std::size_t total = 1;
    for (int i = 0; i < 8; ++i) total *= v;
    std::vector<std::uint8_t> status(total, 2);  // 2 = skipped
    parallel_for(total, threads, [&](std::size_t idx) {
      Sequence x(8);
      std::size_t r = idx;
      for (std::size_t i = 8; i-- > 0;) {
        x[i] = static_cast<Token>(r % v);
        r /= v;
      }
      Token want;
      try {
        want = oracle_selective_copy(x, vocab);
      } catch (const UndefinedInputError&) {
        return;
      }
      try {
        status[idx] = model.predict(x) == want;
      } catch (const DecodeError&) {
        status[idx] = 0;
      }
    });
    std::size_t scored = 0, ok = 0;
    for (auto s : status) {
      if (s == 2) continue;
      ++scored;
      ok += s;
    }
    checks.push_back({"selective-copy-exhaustive", ok == scored,
                      std::to_string(ok) + "/" + std::to_string(scored) + " sequences (L=8)"});
  }

  for (Variant dist : {Variant::uniform, Variant::mixture}) {
    auto spec = DistributionSpec::defaults(TaskKind::selective_copy);
    spec.variant = dist;
    const HybridModel model = build_selective_copy_hybrid(spec.vocabulary(), {.length = spec.length});
    const auto data = generate_dataset(spec, n, seed, threads);
    const auto rep = evaluate(model, data, {.threads = threads});
    checks.push_back({"selective-copy-" + to_string(dist), rep.accuracy == 1.0,
                      "accuracy " + format_double(rep.accuracy) + " over " + std::to_string(n)});
  }

  {
    const auto spec = DistributionSpec::defaults(TaskKind::ard);
    const HybridModel model = build_ard_hybrid({.bit_width = spec.bit_width, .length = spec.length});
    const auto data = generate_dataset(spec, n, seed, threads);
    const auto rep = evaluate(model, data, {.threads = threads});
    checks.push_back({"ard-uniform", rep.accuracy >= 0.99,
                      "accuracy " + format_double(rep.accuracy) + " over " + std::to_string(n)});
  }

  {
    Rng rng(seed);
    const std::vector<Token> alphabet{0, 1, 2};
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<StateMachine> layers;
      const int k = 2 + trial % 2;
      for (int l = 0; l < k; ++l) layers.push_back(random_machine(1 + rng.below(8), alphabet, alphabet, rng));
      const StateMachine c = collapse(layers);
      const StateMachine m = merge(layers[0], layers[1]);
      for (int s = 0; s < 100; ++s) {
        Sequence x(30);
        for (auto& t : x) t = alphabet[rng.below(alphabet.size())];
        Sequence cur = x;
        for (const auto& layer : layers) cur = gssm_run(layer, cur).outputs();
        if (gssm_run(c, x).outputs() != cur) ++mismatches;
        const auto rows = gssm_run(m, x).rows;
        if (rows[0] != gssm_run(layers[0], x).outputs() || rows[1] != gssm_run(layers[1], x).outputs()) ++mismatches;
      }
    }
    checks.push_back({"gssm-collapse-merge", mismatches == 0, std::to_string(mismatches) + " mismatching runs"});
  }
  return checks;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact hybrid SSM/attention constructions, task oracles and lower-bound probes", "hybridctl"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values");
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--out", g.out, "output file (directory for dump)");
  app.add_option("--format", g.format, "csv | json | table")
      ->check(CLI::IsMember({"csv", "json", "table"}))
      ->capture_default_str();

  // construct-eval
  auto* eval_cmd = app.add_subcommand("construct-eval", "build a construction and score it against the oracle");
  TaskArgs eval_task;
  ModelArgs eval_model;
  std::size_t eval_n = 1000;
  std::optional<double> min_accuracy;
  bool all_positions = false;
  unsigned threads = 0;
  std::string data_path;
  eval_task.attach(eval_cmd);
  eval_model.attach(eval_cmd);
  eval_cmd->add_option("--n", eval_n, "instances to draw")->capture_default_str();
  eval_cmd->add_option("--min-accuracy", min_accuracy, "exit 1 when accuracy falls below this");
  eval_cmd->add_flag("--all-positions", all_positions, "also score every valid prefix (ARD)");
  eval_cmd->add_option("--threads", threads, "worker threads (0 = all cores)");
  eval_cmd->add_option("--data", data_path, "evaluate a JSONL dataset instead of sampling");

  // gen-data
  auto* gen_cmd = app.add_subcommand("gen-data", "write a JSONL dataset");
  TaskArgs gen_task;
  std::size_t gen_n = 1000;
  gen_task.attach(gen_cmd);
  gen_cmd->add_option("--n", gen_n, "instances")->capture_default_str();
  gen_cmd->add_option("--threads", threads, "worker threads (0 = all cores)");

  // probe
  auto* probe_cmd = app.add_subcommand("probe", "emit a lower-bound certificate");
  probe_cmd->require_subcommand(0, 1);
  std::string kind;
  TaskArgs probe_task;
  std::optional<std::size_t> probe_r;
  std::optional<std::size_t> probe_w;
  std::size_t budget = 100;
  std::size_t groups = 20;
  std::size_t per_group = 500;
  std::size_t samples = 10'000;
  bool literal = false;
  std::size_t m = 2;
  int alphabet = 4;
  std::string machine_path;
  std::optional<std::size_t> random_states;
  bool sample_mode = false;
  double bits_m = 3, bits_q = 3, bits_v = 4, bits_y = 4;
  probe_cmd->add_option("--kind", kind, "collision | suffix-pair | accuracy-bound | bits-bound")
      ->check(CLI::IsMember({"collision", "suffix-pair", "accuracy-bound", "bits-bound"}));
  probe_task.attach(probe_cmd);
  probe_cmd->add_option("--R", probe_r, "suffix length kept (default L/2)");
  probe_cmd->add_option("--W", probe_w, "window (default L/2)");
  probe_cmd->add_option("--budget", budget, "resample / sample budget")->capture_default_str();
  probe_cmd->add_option("--groups", groups, "suffix groups")->capture_default_str();
  probe_cmd->add_option("--per-group", per_group, "prefixes per suffix group")->capture_default_str();
  probe_cmd->add_option("--samples", samples, "i.i.d. draws for --literal")->capture_default_str();
  probe_cmd->add_flag("--literal", literal, "group i.i.d. draws by exact suffix");
  probe_cmd->add_option("--m", m, "prefix length")->capture_default_str();
  probe_cmd->add_option("--alphabet", alphabet, "prefix symbols")->capture_default_str();
  probe_cmd->add_option("--machine", machine_path, "state machine JSON");
  probe_cmd->add_option("--states", random_states, "random machine with this many states");
  probe_cmd->add_flag("--sample", sample_mode, "sample prefixes instead of enumerating");
  probe_cmd->add_option("--bits-m", bits_m, "m for bits-bound")->capture_default_str();
  probe_cmd->add_option("--bits-q", bits_q, "q for bits-bound")->capture_default_str();
  probe_cmd->add_option("--bits-V", bits_v, "|V| for bits-bound")->capture_default_str();
  probe_cmd->add_option("--bits-Y", bits_y, "|Y| for bits-bound")->capture_default_str();
  auto* probe_verify_cmd = probe_cmd->add_subcommand("verify", "re-check a certificate file");
  std::string cert_path;
  probe_verify_cmd->add_option("file", cert_path, "certificate JSON")->required();

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "check the constructions and machines against brute force");
  std::size_t verify_n = 1000;
  verify_cmd->add_option("--n", verify_n, "sampled instances per check")->capture_default_str();
  verify_cmd->add_option("--threads", threads, "worker threads (0 = all cores)");

  // dump
  auto* dump_cmd = app.add_subcommand("dump", "write per-layer matrices as CSV and PGM");
  TaskArgs dump_task;
  ModelArgs dump_model;
  std::vector<Token> dump_tokens;
  int cell = 8;
  dump_task.attach(dump_cmd);
  dump_model.attach(dump_cmd);
  dump_cmd->add_option("--tokens", dump_tokens, "explicit token ids")->delimiter(',');
  dump_cmd->add_option("--cell", cell, "PGM pixels per matrix entry")->capture_default_str();

  // report
  auto* report_cmd = app.add_subcommand("report", "memory budget of a construction, manifest or machines");
  TaskArgs report_task;
  ModelArgs report_model;
  std::string model_path;
  std::vector<std::string> machine_paths;
  report_task.attach(report_cmd);
  report_model.attach(report_cmd);
  report_cmd->add_option("--model", model_path, "model manifest JSON");
  report_cmd->add_option("--machines", machine_paths, "state machine JSON files, bottom layer first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    err << app.help();
    return kExitUsage;
  }

  try {
    const OutputFormat fmt = output_format_from_string(g.format);

    if (eval_cmd->parsed()) {
      const DistributionSpec spec = eval_task.spec();
      const HybridModel model = eval_model.build(spec);
      std::vector<TaskInstance> data;
      if (!data_path.empty()) {
        std::ifstream in(data_path);
        if (!in) throw IoError("cannot open " + data_path);
        data = read_jsonl(in);
      } else {
        data = generate_dataset(spec, eval_n, g.seed, threads);
      }
      const EvalReport rep = evaluate(model, data, {.threads = threads, .all_positions = all_positions});
      Sink sink(g.out, out);
      write_report(sink.get(), rep, fmt);
      if (min_accuracy && rep.accuracy < *min_accuracy) {
        err << "accuracy " << format_double(rep.accuracy) << " below " << format_double(*min_accuracy) << '\n';
        return kExitBelowThreshold;
      }
      return kExitOk;
    }

    if (gen_cmd->parsed()) {
      const auto data = generate_dataset(gen_task.spec(), gen_n, g.seed, threads);
      Sink sink(g.out, out);
      write_jsonl(sink.get(), data);
      return kExitOk;
    }

    if (probe_cmd->parsed()) {
      if (probe_verify_cmd->parsed()) {
        const Certificate c = certificate_from_json(read_json_file(cert_path));
        const VerifyResult r = verify_certificate(c);
        out << (r.ok ? "VERIFIED " : "REJECTED ") << to_string(c.kind) << " (" << to_string(c.outcome) << "): "
            << r.message << '\n';
        return r.ok ? kExitOk : kExitBelowThreshold;
      }
      if (kind.empty()) throw CLI::RequiredError("--kind");
      Certificate cert;
      if (kind == "collision") {
        const QueryFamily family = QueryFamily::selective_copy(alphabet, m);
        std::vector<Token> others;
        for (const auto& q : family.queries) others.insert(others.end(), q.begin(), q.end());
        StateMachine sm;
        if (!machine_path.empty()) {
          sm = state_machine_from_json(read_json_file(machine_path));
        } else if (random_states) {
          Rng rng(g.seed);
          std::vector<Token> all = family.alphabet;
          all.insert(all.end(), others.begin(), others.end());
          sm = random_machine(*random_states, all, family.alphabet, rng);
        } else {
          sm = shift_register_machine(family.alphabet, m, others);
        }
        cert = collision_witness(sm, family, {.sample = sample_mode, .budget = budget, .seed = g.seed});
      } else if (kind == "suffix-pair") {
        const auto spec = probe_task.spec();
        cert = suffix_pair_witness(spec, probe_r.value_or(spec.length / 2), budget, g.seed);
      } else if (kind == "accuracy-bound") {
        const auto spec = probe_task.spec();
        cert = accuracy_bound_certificate(
            spec, probe_w.value_or(spec.length / 2),
            {.grouped = !literal, .groups = groups, .per_group = per_group, .samples = samples, .seed = g.seed});
      } else {
        cert = bits_bound_certificate(bits_m, bits_q, bits_v, bits_y);
      }
      const VerifyResult r = verify_certificate(cert);
      cert.verified = r.ok;
      Sink sink(g.out, out);
      sink.get() << to_json(cert).dump(2) << '\n';
      return kExitOk;
    }

    if (verify_cmd->parsed()) {
      const auto checks = verification_suite(verify_n, g.seed, threads);
      Sink sink(g.out, out);
      write_checks(sink.get(), checks, fmt);
      for (const auto& c : checks) {
        if (!c.passed) return kExitBelowThreshold;
      }
      return kExitOk;
    }

    if (dump_cmd->parsed()) {
      if (g.out.empty()) throw IoError("dump needs --out <directory>");
      const DistributionSpec spec = dump_task.spec();
      const HybridModel model = dump_model.build(spec);
      TaskInstance inst;
      if (!dump_tokens.empty()) {
        inst.tokens = dump_tokens;
        inst.task = spec.task;
        inst.target = TaskSampler(spec).oracle(inst.tokens);
      } else {
        inst = generate_dataset(spec, 1, g.seed, 1).front();
      }
      const auto files = dump_trace(model, inst.tokens, g.out, cell);
      const std::filesystem::path dir(g.out);
      std::ofstream(dir / "manifest.json") << to_json(model).dump(1) << '\n';
      std::ofstream(dir / "instance.json") << to_json(inst).dump() << '\n';
      for (const auto& f : files) out << f.string() << '\n';
      out << (dir / "manifest.json").string() << '\n' << (dir / "instance.json").string() << '\n';
      return kExitOk;
    }

    if (report_cmd->parsed()) {
      MemoryReport rep;
      if (!machine_paths.empty()) {
        std::vector<StateMachine> layers;
        for (const auto& p : machine_paths) layers.push_back(state_machine_from_json(read_json_file(p)));
        rep = memory_report(layers);
      } else if (!model_path.empty()) {
        rep = memory_report(model_from_json(read_json_file(model_path)));
      } else {
        rep = memory_report(report_model.build(report_task.spec()));
      }
      Sink sink(g.out, out);
      write_memory(sink.get(), rep, fmt);
      return kExitOk;
    }
  } catch (const CLI::Error& e) {
    err << "hybridctl: " << e.what() << '\n' << app.help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "hybridctl: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace hybrid

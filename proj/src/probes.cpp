#include "hybrid/probes.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "hybrid/parallel.hpp"

namespace hybrid {

QueryFamily QueryFamily::selective_copy(int alphabet_size, std::size_t m) {
  if (alphabet_size < 1 || m < 1) throw SpecError("query family: alphabet and m must be positive");
  std::vector<int> values(m);
  for (std::size_t i = 0; i < m; ++i) values[i] = static_cast<int>(i) + 2;
  QueryFamily f;
  f.task = "selective-copy";
  f.vocab = Vocabulary::selective_copy(values, alphabet_size);
  f.alphabet = f.vocab.tokens_of(TokenKind::word);
  f.m = m;
  for (int k : values) f.queries.push_back({*f.vocab.number(k)});
  return f;
}

Token QueryFamily::answer(std::span<const Token> prefix, std::size_t query) const {
  Sequence seq(prefix.begin(), prefix.end());
  const auto& q = queries.at(query);
  seq.insert(seq.end(), q.begin(), q.end());
  if (task == "selective-copy") return oracle_selective_copy(seq, vocab);
  throw SpecError("query family: unsupported task '" + task + "'");
}

std::vector<Token> QueryFamily::g(std::span<const Token> prefix) const {
  std::vector<Token> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = answer(prefix, i);
  return out;
}

Sequence QueryFamily::prefix(std::uint64_t index) const {
  Sequence u(m);
  const std::uint64_t a = alphabet.size();
  for (std::size_t i = m; i-- > 0;) {
    u[i] = alphabet[index % a];
    index /= a;
  }
  return u;
}

std::uint64_t QueryFamily::prefix_count() const {
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < m; ++i) {
    if (n > std::numeric_limits<std::uint64_t>::max() / alphabet.size()) return std::numeric_limits<std::uint64_t>::max();
    n *= alphabet.size();
  }
  return n;
}

nlohmann::json to_json(const QueryFamily& f) {
  return {{"task", f.task}, {"vocab", to_json(f.vocab)}, {"alphabet", f.alphabet}, {"m", f.m}, {"queries", f.queries}};
}

QueryFamily query_family_from_json(const nlohmann::json& j) {
  try {
    QueryFamily f;
    f.task = j.at("task").get<std::string>();
    f.vocab = vocabulary_from_json(j.at("vocab"));
    f.alphabet = j.at("alphabet").get<std::vector<Token>>();
    f.m = j.at("m").get<std::size_t>();
    f.queries = j.at("queries").get<std::vector<Sequence>>();
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("query family JSON: ") + e.what());
  }
}

std::string to_string(CertificateKind k) {
  switch (k) {
    case CertificateKind::state_collision: return "state-collision";
    case CertificateKind::suffix_pair: return "suffix-pair";
    case CertificateKind::accuracy_bound: return "accuracy-bound";
    case CertificateKind::bits_bound: return "bits-bound";
  }
  return "?";
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::witness: return "witness";
    case Outcome::none_exists: return "none-exists";
    case Outcome::inconclusive: return "inconclusive";
  }
  return "?";
}

CertificateKind certificate_kind_from_string(const std::string& s) {
  if (s == "state-collision") return CertificateKind::state_collision;
  if (s == "suffix-pair") return CertificateKind::suffix_pair;
  if (s == "accuracy-bound") return CertificateKind::accuracy_bound;
  if (s == "bits-bound") return CertificateKind::bits_bound;
  throw FormatError("unknown certificate kind '" + s + "'");
}

Outcome outcome_from_string(const std::string& s) {
  if (s == "witness") return Outcome::witness;
  if (s == "none-exists") return Outcome::none_exists;
  if (s == "inconclusive") return Outcome::inconclusive;
  throw FormatError("unknown outcome '" + s + "'");
}

nlohmann::json to_json(const Certificate& c) {
  return {{"format", "certificate/1"},
          {"kind", to_string(c.kind)},
          {"outcome", to_string(c.outcome)},
          {"verified", c.verified},
          {"note", c.note},
          {"witness", c.witness}};
}

Certificate certificate_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "certificate/1") throw FormatError("certificate: unknown format");
    Certificate c;
    c.kind = certificate_kind_from_string(j.at("kind").get<std::string>());
    c.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    c.verified = j.value("verified", false);
    c.note = j.value("note", std::string{});
    c.witness = j.at("witness");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("certificate JSON: ") + e.what());
  }
}

namespace {

StateId run_prefix(const StateMachine& sm, std::span<const Token> u) {
  StateId s = sm.initial();
  for (Token t : u) s = sm.step(s, t);
  return s;
}

Token final_readout(const StateMachine& sm, std::span<const Token> u, std::span<const Token> v) {
  StateId s = run_prefix(sm, u);
  for (Token t : v) s = sm.step(s, t);
  return sm.read(s);
}

Certificate collision_found(const StateMachine& sm, const QueryFamily& family, const Sequence& u, const Sequence& u2,
                            const std::string& mode) {
  const auto gu = family.g(u);
  const auto gu2 = family.g(u2);
  std::size_t qi = 0;
  while (gu[qi] == gu2[qi]) ++qi;
  const Token out = final_readout(sm, u, family.queries[qi]);
  std::string wrong = "both";
  if (out == gu[qi]) wrong = "second";
  if (out == gu2[qi]) wrong = "first";
  Certificate c;
  c.kind = CertificateKind::state_collision;
  c.outcome = Outcome::witness;
  c.note = mode;
  c.witness = {{"machine", to_json(sm)},
               {"family", to_json(family)},
               {"first", u},
               {"second", u2},
               {"state", run_prefix(sm, u)},
               {"query_index", qi},
               {"query", family.queries[qi]},
               {"g_first", gu},
               {"g_second", gu2},
               {"machine_output", out},
               {"wrong_on", wrong}};
  return c;
}

}  // namespace

Certificate collision_witness(const StateMachine& sm, const QueryFamily& family, const CollisionOptions& opts) {
  if (family.alphabet.empty() || family.queries.empty()) throw SpecError("collision: empty query family");
  const std::uint64_t total = family.prefix_count();
  if (!opts.sample && total <= kExhaustiveLimit) {
    std::vector<StateId> states(total);
    parallel_for(total, opts.threads, [&](std::size_t i) { states[i] = run_prefix(sm, family.prefix(i)); });
    std::unordered_map<StateId, std::uint64_t> first;
    for (std::uint64_t i = 0; i < total; ++i) {
      auto [it, fresh] = first.emplace(states[i], i);
      if (fresh) continue;
      const Sequence u = family.prefix(it->second);
      const Sequence u2 = family.prefix(i);
      if (family.g(u) != family.g(u2)) return collision_found(sm, family, u, u2, "exhaustive");
    }
    Certificate c;
    c.kind = CertificateKind::state_collision;
    c.outcome = Outcome::none_exists;
    c.note = "exhaustive";
    c.witness = {{"machine", to_json(sm)},
                 {"family", to_json(family)},
                 {"prefixes", total},
                 {"distinct_states", first.size()}};
    return c;
  }
  Rng rng(opts.seed);
  std::unordered_map<StateId, Sequence> first;
  Sequence u(family.m);
  for (std::size_t n = 0; n < opts.budget; ++n) {
    for (auto& t : u) t = family.alphabet[rng.below(family.alphabet.size())];
    auto [it, fresh] = first.emplace(run_prefix(sm, u), u);
    if (fresh || it->second == u) continue;
    if (family.g(it->second) != family.g(u)) return collision_found(sm, family, it->second, u, "sampled");
  }
  Certificate c;
  c.kind = CertificateKind::state_collision;
  c.outcome = Outcome::inconclusive;
  c.note = "sampled";
  c.witness = {{"machine", to_json(sm)}, {"family", to_json(family)}, {"budget", opts.budget}, {"seed", opts.seed}};
  return c;
}

namespace {

Sequence splice(std::span<const Token> prefix_source, std::span<const Token> suffix_source, std::size_t r) {
  const std::size_t L = suffix_source.size();
  Sequence out(prefix_source.begin(), prefix_source.begin() + static_cast<std::ptrdiff_t>(L - r));
  out.insert(out.end(), suffix_source.end() - static_cast<std::ptrdiff_t>(r), suffix_source.end());
  return out;
}

std::optional<Token> try_oracle(const TaskSampler& sampler, std::span<const Token> seq) {
  try {
    return sampler.oracle(seq);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

Certificate suffix_pair_witness(const DistributionSpec& spec, std::size_t r, std::size_t budget, std::uint64_t seed) {
  const TaskSampler sampler(spec);
  Certificate c;
  c.kind = CertificateKind::suffix_pair;
  c.outcome = Outcome::inconclusive;
  c.witness = {{"spec", to_json(spec)}, {"R", r}, {"budget", budget}, {"seed", seed}};
  if (r >= spec.length) {
    c.note = "suffix covers the whole sequence";
    return c;
  }
  Rng rng(seed);
  for (std::size_t n = 1; n <= budget; ++n) {
    // a fresh base each time: a suffix that already fixes the label stays stuck
    const TaskInstance base = sampler.draw(rng);
    const TaskInstance other = sampler.draw(rng);
    const Sequence x2 = splice(other.tokens, base.tokens, r);
    const auto label = try_oracle(sampler, x2);
    if (!label || *label == base.target) continue;
    c.outcome = Outcome::witness;
    c.note = "found after " + std::to_string(n) + " resamples";
    c.witness["x"] = base.tokens;
    c.witness["x_prime"] = x2;
    c.witness["target_x"] = base.target;
    c.witness["target_x_prime"] = *label;
    c.witness["resamples"] = n;
    return c;
  }
  c.note = "budget exhausted";
  return c;
}

namespace {

double majority_fraction(const std::map<Sequence, std::map<Token, std::size_t>>& groups) {
  std::size_t total = 0;
  std::size_t best = 0;
  for (const auto& [suffix, labels] : groups) {
    std::size_t top = 0;
    for (const auto& [label, count] : labels) {
      total += count;
      top = std::max(top, count);
    }
    best += top;
  }
  return total ? static_cast<double>(best) / static_cast<double>(total) : 1.0;
}

}  // namespace

double window_accuracy_bound(const DistributionSpec& spec, std::size_t w, std::size_t samples, std::uint64_t seed) {
  const auto data = generate_dataset(spec, samples, seed);
  const std::size_t keep = std::min(w, spec.length);
  std::map<Sequence, std::map<Token, std::size_t>> groups;
  for (const auto& inst : data) {
    Sequence suffix(inst.tokens.end() - static_cast<std::ptrdiff_t>(keep), inst.tokens.end());
    ++groups[suffix][inst.target];
  }
  return majority_fraction(groups);
}

double grouped_window_accuracy_bound(const DistributionSpec& spec, std::size_t w, std::size_t groups,
                                     std::size_t per_group, std::uint64_t seed) {
  const TaskSampler sampler(spec);
  const std::size_t keep = std::min(w, spec.length);
  std::vector<std::map<Token, std::size_t>> counts(groups);
  parallel_for(groups, 0, [&](std::size_t g) {
    Rng rng = Rng::substream(seed, g);
    const TaskInstance base = sampler.draw(rng);
    for (std::size_t n = 0; n < per_group; ++n) {
      const TaskInstance other = sampler.draw(rng);
      if (const auto label = try_oracle(sampler, splice(other.tokens, base.tokens, keep))) ++counts[g][*label];
    }
  });
  std::size_t total = 0;
  std::size_t best = 0;
  for (const auto& labels : counts) {
    std::size_t top = 0;
    for (const auto& [label, count] : labels) {
      total += count;
      top = std::max(top, count);
    }
    best += top;
  }
  return total ? static_cast<double>(best) / static_cast<double>(total) : 1.0;
}

Certificate accuracy_bound_certificate(const DistributionSpec& spec, std::size_t w, const AccuracyBoundOptions& opts) {
  Certificate c;
  c.kind = CertificateKind::accuracy_bound;
  c.outcome = Outcome::witness;
  nlohmann::json wit = {{"spec", to_json(spec)}, {"W", w}, {"seed", opts.seed}, {"grouped", opts.grouped}};
  double bound;
  if (opts.grouped) {
    bound = grouped_window_accuracy_bound(spec, w, opts.groups, opts.per_group, opts.seed);
    wit["groups"] = opts.groups;
    wit["per_group"] = opts.per_group;
  } else {
    bound = window_accuracy_bound(spec, w, opts.samples, opts.seed);
    wit["samples"] = opts.samples;
  }
  wit["bound"] = bound;
  c.witness = std::move(wit);
  c.note = opts.grouped ? "suffix-grouped resampling" : "i.i.d. suffix grouping";
  return c;
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double ssm_bits_bound(double m, double q, double v, double y) {
  const double bits = m * std::log2(v) - q * (binary_entropy(1.0 / 8.0) + std::log2(y) / 8.0);
  return std::max(0.0, bits);
}

Certificate bits_bound_certificate(double m, double q, double v, double y) {
  Certificate c;
  c.kind = CertificateKind::bits_bound;
  c.outcome = Outcome::witness;
  c.witness = {{"m", m}, {"q", q}, {"V", v}, {"Y", y}, {"bits", ssm_bits_bound(m, q, v, y)}};
  c.note = "lower bound on log2 |S| for 7/8 success";
  return c;
}

}  // namespace hybrid

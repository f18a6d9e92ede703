#include <cmath>
#include <map>

#include "hybrid/probes.hpp"

namespace hybrid {

namespace {

VerifyResult pass(std::string msg) { return {true, std::move(msg)}; }
VerifyResult fail(std::string msg) { return {false, std::move(msg)}; }

// Selective-copy answer by direct indexing, without the task oracle.
Token lookback_answer(const QueryFamily& f, const Sequence& u, const Sequence& v) {
  Sequence x = u;
  x.insert(x.end(), v.begin(), v.end());
  for (std::size_t i = x.size(); i > 0; --i) {
    const TokenInfo& info = f.vocab.info(x[i - 1]);
    if (info.kind != TokenKind::number) continue;
    const std::size_t back = static_cast<std::size_t>(info.value);
    if (back == 0 || back > x.size()) throw RangeError("verify: lookback out of range");
    return x[x.size() - back];
  }
  throw UndefinedInputError("verify: query has no number token");
}

std::vector<Token> g_of(const QueryFamily& f, const Sequence& u) {
  if (f.task != "selective-copy") throw SpecError("verify: unsupported family task '" + f.task + "'");
  std::vector<Token> out;
  for (const auto& v : f.queries) out.push_back(lookback_answer(f, u, v));
  return out;
}

StateId replay(const StateMachine& sm, const Sequence& x) {
  StateId s = sm.initial();
  for (Token t : x) s = sm.step(s, t);
  return s;
}

VerifyResult verify_collision(const Certificate& c) {
  const auto& w = c.witness;
  const StateMachine sm = state_machine_from_json(w.at("machine"));
  const QueryFamily f = query_family_from_json(w.at("family"));
  if (c.outcome == Outcome::inconclusive) return pass("inconclusive: nothing to check");
  if (c.outcome == Outcome::none_exists) {
    // Depth-first walk of the prefix trie; every leaf's state must map to one G.
    std::map<StateId, std::vector<Token>> seen;
    std::uint64_t leaves = 0;
    Sequence u;
    bool clash = false;
    auto walk = [&](auto&& self, StateId s) -> void {
      if (clash) return;
      if (u.size() == f.m) {
        ++leaves;
        auto g = g_of(f, u);
        auto [it, fresh] = seen.emplace(s, g);
        if (!fresh && it->second != g) clash = true;
        return;
      }
      for (Token a : f.alphabet) {
        u.push_back(a);
        self(self, sm.step(s, a));
        u.pop_back();
      }
    };
    walk(walk, sm.initial());
    if (clash) return fail("a collision exists");
    if (leaves != w.at("prefixes").get<std::uint64_t>()) return fail("prefix count mismatch");
    return pass("no collision among " + std::to_string(leaves) + " prefixes");
  }
  const auto u = w.at("first").get<Sequence>();
  const auto u2 = w.at("second").get<Sequence>();
  if (u == u2) return fail("prefixes are identical");
  if (u.size() != f.m || u2.size() != f.m) return fail("prefix length differs from m");
  const StateId s1 = replay(sm, u);
  const StateId s2 = replay(sm, u2);
  if (s1 != s2) return fail("prefixes reach different states");
  if (s1 != w.at("state").get<StateId>()) return fail("recorded state does not match replay");
  const auto qi = w.at("query_index").get<std::size_t>();
  const auto v = w.at("query").get<Sequence>();
  if (qi >= f.queries.size() || f.queries[qi] != v) return fail("query is not in the family");
  const Token a1 = lookback_answer(f, u, v);
  const Token a2 = lookback_answer(f, u2, v);
  if (a1 == a2) return fail("named query does not separate the prefixes");
  Sequence x1 = u;
  x1.insert(x1.end(), v.begin(), v.end());
  Sequence x2 = u2;
  x2.insert(x2.end(), v.begin(), v.end());
  const Token o1 = sm.read(replay(sm, x1));
  const Token o2 = sm.read(replay(sm, x2));
  if (o1 != o2) return fail("machine outputs differ after equal states");
  if (o1 != w.at("machine_output").get<Token>()) return fail("recorded machine output does not match");
  return pass("machine answers " + std::to_string(o1) + " for both; correct answers are " + std::to_string(a1) +
              " and " + std::to_string(a2));
}

VerifyResult verify_suffix_pair(const Certificate& c) {
  if (c.outcome != Outcome::witness) return pass("inconclusive: nothing to check");
  const auto& w = c.witness;
  const DistributionSpec spec = distribution_from_json(w.at("spec"));
  const auto r = w.at("R").get<std::size_t>();
  const auto x = w.at("x").get<Sequence>();
  const auto x2 = w.at("x_prime").get<Sequence>();
  if (x.size() != spec.length || x2.size() != spec.length) return fail("sequence length differs from L");
  if (r >= x.size()) return fail("suffix covers the whole sequence");
  for (std::size_t i = x.size() - r; i < x.size(); ++i) {
    if (x[i] != x2[i]) return fail("suffixes differ at position " + std::to_string(i + 1));
  }
  const TaskSampler sampler(spec);
  const Token t1 = sampler.oracle(x);
  const Token t2 = sampler.oracle(x2);
  if (t1 == t2) return fail("oracle labels agree");
  if (t1 != w.at("target_x").get<Token>() || t2 != w.at("target_x_prime").get<Token>()) {
    return fail("recorded labels do not match the oracle");
  }
  return pass("last " + std::to_string(r) + " tokens agree, labels " + std::to_string(t1) + " vs " + std::to_string(t2));
}

VerifyResult verify_accuracy_bound(const Certificate& c) {
  const auto& w = c.witness;
  const DistributionSpec spec = distribution_from_json(w.at("spec"));
  AccuracyBoundOptions opts;
  opts.grouped = w.at("grouped").get<bool>();
  opts.seed = w.at("seed").get<std::uint64_t>();
  if (opts.grouped) {
    opts.groups = w.at("groups").get<std::size_t>();
    opts.per_group = w.at("per_group").get<std::size_t>();
  } else {
    opts.samples = w.at("samples").get<std::size_t>();
  }
  const Certificate again = accuracy_bound_certificate(spec, w.at("W").get<std::size_t>(), opts);
  const double want = w.at("bound").get<double>();
  const double got = again.witness.at("bound").get<double>();
  if (std::abs(want - got) > 1e-12) return fail("recomputed bound " + std::to_string(got) + " differs");
  return pass("bound " + std::to_string(got) + " reproduced");
}

VerifyResult verify_bits_bound(const Certificate& c) {
  const auto& w = c.witness;
  const double m = w.at("m").get<double>();
  const double q = w.at("q").get<double>();
  const double v = w.at("V").get<double>();
  const double y = w.at("Y").get<double>();
  // H2(1/8) = 3/8 + (7/8) log2(8/7)
  const double h = 3.0 / 8.0 + 7.0 / 8.0 * (std::log(8.0 / 7.0) / std::log(2.0));
  double expect = (m * std::log(v) - q * std::log(y) / 8.0) / std::log(2.0) - q * h;
  if (expect < 0) expect = 0;
  const double got = w.at("bits").get<double>();
  if (std::abs(expect - got) > 1e-9) return fail("bits bound mismatch: expected " + std::to_string(expect));
  return pass("bits bound " + std::to_string(expect) + " reproduced");
}

}  // namespace

VerifyResult verify_certificate(const Certificate& c) {
  try {
    switch (c.kind) {
      case CertificateKind::state_collision: return verify_collision(c);
      case CertificateKind::suffix_pair: return verify_suffix_pair(c);
      case CertificateKind::accuracy_bound: return verify_accuracy_bound(c);
      case CertificateKind::bits_bound: return verify_bits_bound(c);
    }
  } catch (const nlohmann::json::exception& e) {
    return fail(std::string("malformed witness: ") + e.what());
  } catch (const Error& e) {
    return fail(e.what());
  }
  return fail("unknown certificate kind");
}

}  // namespace hybrid

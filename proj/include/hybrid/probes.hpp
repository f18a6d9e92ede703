#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hybrid/gssm.hpp"
#include "hybrid/tasks.hpp"

namespace hybrid {

/// Prefixes of length m over `alphabet`, each followed by one of the query
/// suffixes. G(u) = (F(u ++ v_1), ..., F(u ++ v_q)) under the task oracle.
struct QueryFamily {
  std::string task = "selective-copy";
  Vocabulary vocab;
  std::vector<Token> alphabet;
  std::size_t m = 0;
  std::vector<Sequence> queries;

  /// Words w_0..w_{a-1} as the prefix alphabet, queries #2..#(m+1): the
  /// answers read the prefix back in reverse, so G is injective.
  static QueryFamily selective_copy(int alphabet_size, std::size_t m);

  Token answer(std::span<const Token> prefix, std::size_t query) const;
  std::vector<Token> g(std::span<const Token> prefix) const;
  /// Prefix number `index` in lexicographic order (first symbol most significant).
  Sequence prefix(std::uint64_t index) const;
  /// |alphabet|^m, saturating at UINT64_MAX.
  std::uint64_t prefix_count() const;
};

nlohmann::json to_json(const QueryFamily& f);
QueryFamily query_family_from_json(const nlohmann::json& j);

enum class CertificateKind { state_collision, suffix_pair, accuracy_bound, bits_bound };
enum class Outcome { witness, none_exists, inconclusive };

std::string to_string(CertificateKind k);
std::string to_string(Outcome o);
CertificateKind certificate_kind_from_string(const std::string& s);
Outcome outcome_from_string(const std::string& s);

struct Certificate {
  CertificateKind kind = CertificateKind::state_collision;
  Outcome outcome = Outcome::inconclusive;
  /// Everything needed to re-check the claim without the producer's state.
  nlohmann::json witness;
  bool verified = false;
  std::string note;
};

nlohmann::json to_json(const Certificate& c);
Certificate certificate_from_json(const nlohmann::json& j);

/// Prefix spaces up to this size are searched exhaustively.
inline constexpr std::uint64_t kExhaustiveLimit = 1'000'000;

struct CollisionOptions {
  /// Force sampling even when the prefix space is small.
  bool sample = false;
  std::size_t budget = 100'000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

/// Two prefixes driving `sm` into the same state while G differs. Exhaustive
/// search returns the collision whose later prefix is lexicographically
/// smallest, independent of thread count.
Certificate collision_witness(const StateMachine& sm, const QueryFamily& family, const CollisionOptions& opts = {});

/// Splices fresh prefixes onto a drawn instance's last-R tokens until the
/// oracle labels differ. R >= L is inconclusive by construction.
Certificate suffix_pair_witness(const DistributionSpec& spec, std::size_t r, std::size_t budget, std::uint64_t seed);

/// Groups i.i.d. draws by their exact last-W tokens and sums the majority
/// label count of each group over the total.
double window_accuracy_bound(const DistributionSpec& spec, std::size_t w, std::size_t samples, std::uint64_t seed);

/// Same estimator, but each group shares one drawn suffix and gets
/// `per_group` freshly drawn prefixes spliced in front of it.
double grouped_window_accuracy_bound(const DistributionSpec& spec, std::size_t w, std::size_t groups,
                                     std::size_t per_group, std::uint64_t seed);

struct AccuracyBoundOptions {
  bool grouped = true;
  std::size_t groups = 20;
  std::size_t per_group = 500;
  std::size_t samples = 10'000;
  std::uint64_t seed = 0;
};

Certificate accuracy_bound_certificate(const DistributionSpec& spec, std::size_t w, const AccuracyBoundOptions& opts);

/// Binary entropy in bits.
double binary_entropy(double p);

/// max(0, m log2 V - q (H2(1/8) + log2(Y)/8))
double ssm_bits_bound(double m, double q, double v, double y);

Certificate bits_bound_certificate(double m, double q, double v, double y);

struct VerifyResult {
  bool ok = false;
  std::string message;
};

/// Re-checks a certificate from its witness data alone.
VerifyResult verify_certificate(const Certificate& c);

}  // namespace hybrid

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include "ragshield/fragmenter.hpp"

namespace ragshield {

using BigInt = boost::multiprecision::cpp_int;

struct TheoryParams {
  std::int64_t N = 5;
  std::int64_t k = 3;
  /// Poisoned fragments per adversarial document.
  std::int64_t n_p = 2;
  /// Adversarial documents.
  std::int64_t n_a = 1;
  std::int64_t p = 1;

  /// Throws UsageError unless 1 <= k <= N, 0 <= n_p <= N, n_a >= 0, p >= 1.
  void validate() const;
};

/// Mixes of one adversarial document that count as poisoned.
///   naive:   C(N,k) - C(N-n_p,k)                  (any poisoned fragment)
///   ragpart: C(N,k) - C(N-n_p,k) - n_p*C(N-n_p,k-1)  (at least two)
std::uint64_t poisoned_mix_count(CombineMethod method, std::int64_t N, std::int64_t k,
                                 std::int64_t n_p);

/// poisoned_mix_count(...) * (n_a + 1) < C(N, k), evaluated in integers.
bool robustness_holds(CombineMethod method, const TheoryParams& params);

enum class Cell { holds, fails, not_applicable };

struct ConditionTable {
  CombineMethod method = CombineMethod::ragpart;
  std::int64_t n_p = 2;
  std::int64_t n_a = 1;
  std::vector<std::int64_t> Ns;
  std::vector<std::int64_t> ks;
  /// cells[row for N][column for k]
  std::vector<std::vector<Cell>> cells;

  Cell at(std::int64_t N, std::int64_t k) const;
  std::string to_text() const;
  nlohmann::json to_json() const;
};

/// Grid over N in [N_lo, N_hi] and k in [k_lo, k_hi]; k > N is N/A.
ConditionTable condition_table(CombineMethod method, std::int64_t n_p, std::int64_t n_a,
                               std::int64_t N_lo = 3, std::int64_t N_hi = 15,
                               std::int64_t k_lo = 3, std::int64_t k_hi = 15);

struct CostParams {
  /// Corpus size.
  BigInt D = 0;
  /// FLOPs of one embedder call on a fragment-sized input.
  BigInt R = 0;
  BigInt n_e = 512;
  /// Longest document, in tokens.
  BigInt l = 0;
  BigInt m = 10;
  double alpha = 2.0;
  BigInt p = 10;
};

enum class CostMethod { naive, ragpart_embed, ragpart_similarity, ragmask };

std::string_view cost_method_name(CostMethod m) noexcept;
CostMethod parse_cost_method(std::string_view s);

///   naive:              D * C(N,k) * k * R
///   ragpart_embed:      D * N * R + D * C(N,k) * k * n_e
///   ragpart_similarity: 2 * n_e * D * C(N,k)
///   ragmask:            R * ceil(l/m) * min(ceil(alpha*p), D)   per query
BigInt flops(const CostParams& cost, CostMethod method, std::int64_t N, std::int64_t k);

/// Parses a nonnegative integer written plainly or in scientific notation
/// ("1e9", "1.536e10"). Throws UsageError when the value is not an integer.
BigInt parse_big(std::string_view text);

/// Shortest mantissa form, e.g. 30000000000000000 -> "3e16".
std::string scientific(const BigInt& v);

struct SimulationResult {
  std::uint64_t trials = 0;
  std::uint64_t adversary_hits = 0;
  double adversary_retrieved_rate = 0.0;
};

/// Synthesizes C(N,k) top-p lists under the worst case of the counting
/// argument and runs aggregate_majority on each trial.
///
/// Every list holds p clean documents. Each adversary takes rank 0 in
/// poisoned_mix_count lists, using disjoint columns while they last, and
/// pushes the designated weakest clean document out of those lists.
/// Column assignment and the clean order within lists are drawn per trial.
/// Adversary ids sort before clean ids, so count ties resolve against the
/// defense.
SimulationResult worst_case_simulation(CombineMethod method, const TheoryParams& params,
                                       std::uint64_t trials, std::uint64_t seed);

}  // namespace ragshield

#include "ragshield/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ragshield/error.hpp"
#include "ragshield/ragpart.hpp"
#include "ragshield/rng.hpp"

namespace ragshield {

void TheoryParams::validate() const {
  if (k < 1 || k > N) throw UsageError("theory: need 1 <= k <= N");
  if (n_p < 0 || n_p > N) throw UsageError("theory: need 0 <= n_p <= N");
  if (n_a < 0) throw UsageError("theory: need n_a >= 0");
  if (p < 1) throw UsageError("theory: need p >= 1");
}

std::uint64_t poisoned_mix_count(CombineMethod method, std::int64_t N, std::int64_t k,
                                 std::int64_t n_p) {
  TheoryParams{N, k, n_p, 0, 1}.validate();
  const std::uint64_t total = binomial(N, k);
  const std::uint64_t clean = binomial(N - n_p, k);
  if (method == CombineMethod::naive) return total - clean;
  const auto single = static_cast<std::uint64_t>(n_p) * binomial(N - n_p, k - 1);
  return total - clean - single;
}

bool robustness_holds(CombineMethod method, const TheoryParams& params) {
  params.validate();
  const BigInt x = poisoned_mix_count(method, params.N, params.k, params.n_p);
  return x * (params.n_a + 1) < BigInt(binomial(params.N, params.k));
}

Cell ConditionTable::at(std::int64_t N, std::int64_t k) const {
  auto r = std::find(Ns.begin(), Ns.end(), N);
  auto c = std::find(ks.begin(), ks.end(), k);
  if (r == Ns.end() || c == ks.end()) throw UsageError("condition table: cell out of range");
  return cells[static_cast<std::size_t>(r - Ns.begin())][static_cast<std::size_t>(c - ks.begin())];
}

namespace {

const char* cell_glyph(Cell c) {
  switch (c) {
    case Cell::holds: return "✓";
    case Cell::fails: return "✗";
    case Cell::not_applicable: return "-";
  }
  return "-";
}

const char* cell_word(Cell c) {
  switch (c) {
    case Cell::holds: return "holds";
    case Cell::fails: return "fails";
    case Cell::not_applicable: return "n/a";
  }
  return "n/a";
}

}  // namespace

std::string ConditionTable::to_text() const {
  std::ostringstream out;
  out << method_name(method) << "  n_p=" << n_p << "  n_a=" << n_a << "\n";
  out << "N\\k";
  for (auto k : ks) out << (k < 10 ? "  " : " ") << k;
  out << "\n";
  for (std::size_t r = 0; r < Ns.size(); ++r) {
    out << (Ns[r] < 10 ? "  " : " ") << Ns[r];
    for (Cell c : cells[r]) out << "  " << cell_glyph(c);
    out << "\n";
  }
  return out.str();
}

nlohmann::json ConditionTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < Ns.size(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Cell c : cells[r]) row.push_back(cell_word(c));
    rows.push_back(row);
  }
  return {{"method", method_name(method)}, {"n_p", n_p}, {"n_a", n_a},
          {"N", Ns}, {"k", ks}, {"cells", rows}};
}

ConditionTable condition_table(CombineMethod method, std::int64_t n_p, std::int64_t n_a,
                               std::int64_t N_lo, std::int64_t N_hi, std::int64_t k_lo,
                               std::int64_t k_hi) {
  if (N_lo > N_hi || k_lo > k_hi || N_lo < 1 || k_lo < 1) {
    throw UsageError("condition table: empty range");
  }
  ConditionTable t;
  t.method = method;
  t.n_p = n_p;
  t.n_a = n_a;
  for (auto N = N_lo; N <= N_hi; ++N) t.Ns.push_back(N);
  for (auto k = k_lo; k <= k_hi; ++k) t.ks.push_back(k);
  for (auto N : t.Ns) {
    auto& row = t.cells.emplace_back();
    for (auto k : t.ks) {
      if (k > N || n_p > N) {
        row.push_back(Cell::not_applicable);
      } else {
        row.push_back(robustness_holds(method, {N, k, n_p, n_a, 1}) ? Cell::holds : Cell::fails);
      }
    }
  }
  return t;
}

std::string_view cost_method_name(CostMethod m) noexcept {
  switch (m) {
    case CostMethod::naive: return "naive";
    case CostMethod::ragpart_embed: return "ragpart_embed";
    case CostMethod::ragpart_similarity: return "ragpart_similarity";
    case CostMethod::ragmask: return "ragmask";
  }
  return "naive";
}

CostMethod parse_cost_method(std::string_view s) {
  for (auto m : {CostMethod::naive, CostMethod::ragpart_embed, CostMethod::ragpart_similarity,
                 CostMethod::ragmask}) {
    if (s == cost_method_name(m)) return m;
  }
  throw UsageError("unknown cost method '" + std::string(s) + "'");
}

BigInt flops(const CostParams& cost, CostMethod method, std::int64_t N, std::int64_t k) {
  TheoryParams{N, k, 0, 0, 1}.validate();
  if (cost.D < 0 || cost.R < 0 || cost.n_e < 0 || cost.l < 0 || cost.p < 0) {
    throw UsageError("flops: negative cost parameter");
  }
  const BigInt C = binomial(N, k);
  switch (method) {
    case CostMethod::naive:
      return cost.D * C * k * cost.R;
    case CostMethod::ragpart_embed:
      return cost.D * N * cost.R + cost.D * C * k * cost.n_e;
    case CostMethod::ragpart_similarity:
      return 2 * cost.n_e * cost.D * C;
    case CostMethod::ragmask: {
      if (cost.m <= 0) throw UsageError("flops: m must be positive");
      if (!(cost.alpha > 0.0)) throw UsageError("flops: alpha must be positive");
      const BigInt segments = (cost.l + cost.m - 1) / cost.m;
      const auto pool = static_cast<std::uint64_t>(
          std::ceil(cost.alpha * static_cast<double>(cost.p.convert_to<std::uint64_t>())));
      const BigInt candidates = std::min(BigInt(pool), cost.D);
      return cost.R * segments * candidates;
    }
  }
  throw UsageError("flops: unknown method");
}

BigInt parse_big(std::string_view text) {
  const std::string s(text);
  auto bad = [&]() { return UsageError("not a nonnegative integer: '" + s + "'"); };
  std::size_t e = s.find_first_of("eE");
  std::string mant = s.substr(0, e);
  long long exp10 = 0;
  if (e != std::string::npos) {
    const std::string ex = s.substr(e + 1);
    if (ex.empty()) throw bad();
    std::size_t used = 0;
    try {
      exp10 = std::stoll(ex, &used);
    } catch (const std::logic_error&) {
      throw bad();
    }
    if (used != ex.size()) throw bad();
  }
  if (!mant.empty() && mant[0] == '+') mant.erase(0, 1);
  std::string digits;
  std::size_t dot = mant.find('.');
  if (dot != std::string::npos) {
    exp10 -= static_cast<long long>(mant.size() - dot - 1);
    digits = mant.substr(0, dot) + mant.substr(dot + 1);
  } else {
    digits = mant;
  }
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) {
        return c >= '0' && c <= '9';
      })) {
    throw bad();
  }
  if (exp10 > 10000) throw bad();
  while (exp10 < 0 && digits.size() > 1 && digits.back() == '0') {
    digits.pop_back();
    ++exp10;
  }
  if (exp10 < 0) {
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c == '0'; })) return 0;
    throw bad();
  }
  BigInt v(digits);
  for (long long i = 0; i < exp10; ++i) v *= 10;
  return v;
}

std::string scientific(const BigInt& v) {
  if (v == 0) return "0";
  std::string d = v.str();
  const std::size_t exp10 = d.size() - 1;
  while (d.size() > 1 && d.back() == '0') d.pop_back();
  std::string out = d.substr(0, 1);
  if (d.size() > 1) out += "." + d.substr(1);
  if (exp10 > 0) out += "e" + std::to_string(exp10);
  return out;
}

SimulationResult worst_case_simulation(CombineMethod method, const TheoryParams& params,
                                       std::uint64_t trials, std::uint64_t seed) {
  params.validate();
  if (trials == 0) throw UsageError("simulation needs trials >= 1");
  const std::size_t C = binomial(params.N, params.k);
  const std::size_t p = static_cast<std::size_t>(params.p);
  const std::size_t n_a = static_cast<std::size_t>(params.n_a);
  const std::size_t x = poisoned_mix_count(method, params.N, params.k, params.n_p);

  // Zero-padded so lexical order matches numeric order; "adv_" < "doc_".
  auto pad = [](std::size_t i) {
    std::string s = std::to_string(i);
    return std::string(s.size() < 6 ? 6 - s.size() : 0, '0') + s;
  };
  std::vector<std::string> clean(p), adv(n_a);
  for (std::size_t i = 0; i < p; ++i) clean[i] = "doc_" + pad(i);
  for (std::size_t j = 0; j < n_a; ++j) adv[j] = "adv_" + pad(j);

  Rng rng(seed);
  SimulationResult res;
  res.trials = trials;
  std::vector<std::size_t> columns(C);
  std::vector<std::vector<std::size_t>> advs_in(C);
  std::vector<RankedList> lists(C);
  std::vector<std::size_t> order(p);
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::iota(columns.begin(), columns.end(), 0);
    rng.shuffle(columns);
    for (auto& a : advs_in) a.clear();
    // Consecutive chunks of the shuffled columns; wraps around once disjoint
    // columns run out.
    std::size_t cursor = 0;
    for (std::size_t j = 0; j < n_a; ++j) {
      for (std::size_t i = 0; i < x; ++i) advs_in[columns[cursor++ % C]].push_back(j);
    }
    const std::size_t weakest = static_cast<std::size_t>(rng.below(p));

    for (std::size_t c = 0; c < C; ++c) {
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      // The weakest clean doc sits last so it is the first pushed out.
      const auto w = std::find(order.begin(), order.end(), weakest);
      std::rotate(w, w + 1, order.end());
      auto& entries = lists[c].entries;
      entries.clear();
      for (std::size_t j : advs_in[c]) {
        if (entries.size() < p) entries.push_back({adv[j], 0.0f});
      }
      for (std::size_t i : order) {
        if (entries.size() < p) entries.push_back({clean[i], 0.0f});
      }
      for (std::size_t r = 0; r < entries.size(); ++r) {
        entries[r].score = static_cast<float>(p - r);
      }
    }
    DefenseResult out = aggregate_majority(std::move(lists), p);
    const bool hit = std::any_of(out.final_docs.begin(), out.final_docs.end(),
                                 [](const std::string& d) { return d.rfind("adv_", 0) == 0; });
    if (hit) ++res.adversary_hits;
    lists = std::move(out.per_combo_lists);  // reuse the allocations
  }
  res.adversary_retrieved_rate =
      static_cast<double>(res.adversary_hits) / static_cast<double>(res.trials);
  return res;
}

}  // namespace ragshield

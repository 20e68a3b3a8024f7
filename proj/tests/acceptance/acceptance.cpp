// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "ragshield/attacks.hpp"
#include "ragshield/embedder.hpp"
#include "ragshield/experiment.hpp"
#include "ragshield/kernels.hpp"
#include "ragshield/rng.hpp"
#include "ragshield/theory.hpp"
#include "ragshield/vector_index.hpp"

using namespace ragshield;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s criterion %d (%s): %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", id, name,
              o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

// Rows N = 3..15, columns k = 3..15. Y holds, x fails, - not applicable.
struct Expected {
  CombineMethod method;
  int n_p;
  const char* rows[13];
};

const Expected kTables[] = {
    {CombineMethod::naive, 2,
     {"x------------", "xx-----------", "xxx----------", "xxxx---------", "xxxxx--------",
      "xxxxxx-------", "xxxxxxx------", "xxxxxxxx-----", "Yxxxxxxxx----", "Yxxxxxxxxx---",
      "Yxxxxxxxxxx--", "Yxxxxxxxxxxx-", "YYxxxxxxxxxxx"}},
    {CombineMethod::ragpart, 2,
     {"x------------", "xx-----------", "Yxx----------", "YYxx---------", "YYYxx--------",
      "YYYxxx-------", "YYYYxxx------", "YYYYYxxx-----", "YYYYYxxxx----", "YYYYYYxxxx---",
      "YYYYYYYxxxx--", "YYYYYYYYxxxx-", "YYYYYYYYxxxxx"}},
    {CombineMethod::naive, 3,
     {"x------------", "xx-----------", "xxx----------", "xxxx---------", "xxxxx--------",
      "xxxxxx-------", "xxxxxxx------", "xxxxxxxx-----", "xxxxxxxxx----", "xxxxxxxxxx---",
      "xxxxxxxxxxx--", "xxxxxxxxxxxx-", "xxxxxxxxxxxxx"}},
    {CombineMethod::ragpart, 3,
     {"x------------", "xx-----------", "xxx----------", "xxxx---------", "Yxxxx--------",
      "Yxxxxx-------", "YYxxxxx------", "YYxxxxxx-----", "YYYxxxxxx----", "YYYxxxxxxx---",
      "YYYYxxxxxxx--", "YYYYxxxxxxxx-", "YYYYYxxxxxxxx"}},
};

Outcome tables() {
  const auto t0 = Clock::now();
  std::size_t compared = 0, mismatches = 0;
  bool anchors = true;
  for (const auto& e : kTables) {
    const ConditionTable t = condition_table(e.method, e.n_p, 1);
    for (std::int64_t N = 3; N <= 15; ++N) {
      for (std::int64_t k = 3; k <= 15; ++k) {
        const char want = e.rows[N - 3][k - 3];
        const Cell c = t.at(N, k);
        const char got = c == Cell::holds ? 'Y' : c == Cell::fails ? 'x' : '-';
        if (want != '-') ++compared;
        if (want != got) ++mismatches;
      }
    }
  }
  const auto naive2 = condition_table(CombineMethod::naive, 2, 1);
  const auto part2 = condition_table(CombineMethod::ragpart, 2, 1);
  const auto part3 = condition_table(CombineMethod::ragpart, 3, 1);
  for (std::int64_t N = 3; N < 11; ++N) anchors &= naive2.at(N, 3) == Cell::fails;
  anchors &= naive2.at(11, 3) == Cell::holds;
  anchors &= part2.at(5, 3) == Cell::holds && part2.at(5, 4) == Cell::fails;
  anchors &= part3.at(7, 3) == Cell::holds;
  const double elapsed = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu applicable cells over 4 tables, %zu mismatches, anchors %s, %.3fs",
                compared, mismatches, anchors ? "ok" : "wrong", elapsed);
  return {mismatches == 0 && anchors && compared == 4 * 91 && elapsed < 1.0, buf};
}

Outcome flop_example() {
  CostParams c;
  c.D = parse_big("1e6");
  c.R = parse_big("1e9");
  c.n_e = 512;
  const BigInt naive = flops(c, CostMethod::naive, 5, 3);
  const BigInt part = flops(c, CostMethod::ragpart_embed, 5, 3);
  const bool ok = naive == parse_big("3e16") && part == parse_big("5e15") + parse_big("1.536e10");
  return {ok, "naive " + scientific(naive) + ", ragpart_embed " + scientific(part)};
}

Outcome simulation_equivalence() {
  const auto t0 = Clock::now();
  struct Point {
    CombineMethod method;
    TheoryParams params;
    bool holds = false;
    double rate = 0.0;
  };
  std::vector<Point> points;
  for (CombineMethod method : {CombineMethod::naive, CombineMethod::ragpart}) {
    for (std::int64_t N = 1; N <= 12; ++N) {
      for (std::int64_t k = 1; k <= N; ++k) {
        for (std::int64_t n_p = 0; n_p <= std::min<std::int64_t>(3, N); ++n_p) {
          for (std::int64_t n_a = 0; n_a <= 2; ++n_a) points.push_back({method, {N, k, n_p, n_a, 1}});
        }
      }
    }
  }
  // Each point has its own seed, so the split across threads changes nothing.
  parallel_for(points.size(), std::max(1u, std::thread::hardware_concurrency()), [&](std::size_t i) {
    Point& pt = points[i];
    pt.holds = robustness_holds(pt.method, pt.params);
    pt.rate = worst_case_simulation(pt.method, pt.params, 1000, i + 1).adversary_retrieved_rate;
  });
  std::size_t holds = 0, hold_violations = 0, fails = 0, fails_at_one = 0;
  for (const Point& pt : points) {
    if (pt.holds) {
      ++holds;
      hold_violations += pt.rate != 0.0;
    } else {
      ++fails;
      fails_at_one += pt.rate == 1.0;
    }
  }
  const double elapsed = seconds_since(t0);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "%zu holding points, %zu with nonzero rate; %zu failing points, %zu at rate 1.0; %.1fs",
                holds, hold_violations, fails, fails_at_one, elapsed);
  return {hold_violations == 0 && fails_at_one >= 10 && elapsed < 30.0, buf};
}

ExperimentConfig trend_config(DefenseKind defense) {
  ExperimentConfig c;
  c.embedder.dim = 512;
  c.embedder.ngram_orders = {1};
  c.synthetic = SynthConfig{};
  c.synthetic->n_docs = 1000;
  c.synthetic->n_queries = 64;
  c.attack.type = AttackType::query_as_poison;
  c.attack.bases_per_query = 3;
  c.defense = defense;
  c.p = 10;
  c.N = {5};
  c.k = {3};
  c.aggregation = AggregationStrategy::majority_vote;
  c.m = {10};
  c.alpha = {2.0};
  c.delta = {std::string("auto")};
  return c;
}

struct TrendRuns {
  std::string part_dump, part_jsonl, mask_dump, mask_jsonl;
};
TrendRuns trend_runs;

Outcome defense_trend() {
  const auto t0 = Clock::now();
  const auto part = run_experiment(trend_config(DefenseKind::ragpart));
  const auto mask = run_experiment(trend_config(DefenseKind::ragmask));
  const double elapsed = seconds_since(t0);
  trend_runs = {part.dump(), part.results_jsonl(), mask.dump(), mask.results_jsonl()};

  const json& d = part.summary["data"];
  const json& pp = part.summary["points"][0];
  const json& mp = mask.summary["points"][0];
  if (pp["status"] != "ok" || mp["status"] != "ok") return {false, "a grid point failed"};
  const double base_asr = pp["baseline"]["asr"], base_sr = pp["baseline"]["sr"];
  const double part_asr = pp["asr"], part_sr = pp["sr"];
  const double mask_asr = mp["asr"], mask_sr = mp["sr"];
  const bool shape = d["documents"] == 1000 && d["queries"] == 64 && d["judged_queries"] == 64 &&
                     d["attacked_queries"] == 64;
  const bool consistent = pp["accounting"]["consistent"].get<bool>() &&
                          mp["accounting"]["consistent"].get<bool>();
  const bool ok = shape && consistent && base_asr >= 0.90 && part_asr <= 0.10 &&
                  base_sr - part_sr <= 0.25 && mask_asr <= 0.15 && base_sr - mask_sr <= 0.10 &&
                  elapsed < 300.0;
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "baseline ASR %.4f SR %.4f; RAGPart ASR %.4f SR %.4f; RAGMask (delta %.4f) ASR %.4f "
                "SR %.4f; accounting %s; %.1fs",
                base_asr, base_sr, part_asr, part_sr, mp["params"]["delta_calibrated"].get<double>(),
                mask_asr, mask_sr, consistent ? "consistent" : "INCONSISTENT", elapsed);
  return {ok, buf};
}

Outcome mask_noop() {
  std::size_t identical = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ExperimentConfig none = trend_config(DefenseKind::none);
    none.rng_seed = seed;
    none.synthetic->seed = seed;
    ExperimentConfig mask = none;
    mask.defense = DefenseKind::ragmask;
    mask.delta = {1e6};
    const json a = run_experiment(none).summary["points"][0];
    const json b = run_experiment(mask).summary["points"][0];
    const bool same = a["per_query"].dump() == b["per_query"].dump() && a["asr"].dump() == b["asr"].dump() &&
                      a["sr"].dump() == b["sr"].dump();
    identical += same;
  }
  return {identical == 10, std::to_string(identical) + "/10 seeds byte-identical to no defense"};
}

// (a) top_p against a full sort.
std::string oracle_top_p() {
  Rng rng(2024);
  std::size_t checked = 0;
  const kernels::Isa before = kernels::active().isa;
  for (int t = 0; t < 100; ++t) {
    const std::size_t dim = 1 + rng.below(64);
    const std::size_t n = 1 + rng.below(10000);
    const bool coarse = rng.below(2) == 0;
    std::vector<IndexEntry> entries;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<float> v(dim);
      for (auto& x : v) x = coarse ? static_cast<float>(rng.between(-1, 1)) : static_cast<float>(rng.uniform() * 2 - 1);
      char id[16];
      std::snprintf(id, sizeof id, "doc%06zu", i);
      entries.push_back({id, 0, Embedding(std::move(v))});
    }
    std::vector<float> qv(dim);
    for (auto& x : qv) x = static_cast<float>(rng.uniform() * 2 - 1);
    const Embedding q(qv);
    const std::size_t p = 1 + rng.below(50);

    std::vector<RankedDoc> all;
    for (const auto& e : entries) {
      float s = 0.0f;
      for (std::size_t j = 0; j < dim; ++j) s = s + e.vector[j] * q[j];
      all.push_back({e.doc_id, s});
    }
    std::sort(all.begin(), all.end(), [](const RankedDoc& a, const RankedDoc& b) {
      return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
    });
    all.resize(std::min(p, all.size()));

    const Index idx = Index::build(entries, {});
    for (kernels::Isa isa : kernels::available_isas()) {
      kernels::set_active(isa);
      if (idx.top_p(0, q, p).entries != all) {
        kernels::set_active(before);
        return "top_p mismatch on index " + std::to_string(t) + " with " + std::string(kernels::isa_name(isa));
      }
    }
    ++checked;
  }
  kernels::set_active(before);
  return checked == 100 ? "" : "not all indexes checked";
}

std::vector<std::string> random_words(Rng& rng, const std::vector<std::string>& vocab, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(vocab[rng.below(vocab.size())]);
  return out;
}

std::vector<std::string> vocab_of(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("tok" + std::to_string(i));
  return v;
}

// (b) unigram additivity, bit for bit.
std::string oracle_additivity() {
  EmbedderConfig cfg;
  cfg.dim = 512;
  cfg.ngram_orders = {1};
  ReferenceEmbedder emb(cfg);
  Rng rng(77);
  const auto vocab = vocab_of(5000);
  for (int t = 0; t < 1000; ++t) {
    TokenSeq a{random_words(rng, vocab, rng.below(200)), "a"};
    TokenSeq b{random_words(rng, vocab, rng.below(200)), "b"};
    const Embedding ea = emb.embed(a), eb = emb.embed(b), eab = emb.embed(concat(a, b));
    for (std::size_t j = 0; j < cfg.dim; ++j) {
      if (std::bit_cast<std::uint32_t>(eab[j]) != std::bit_cast<std::uint32_t>(ea[j] + eb[j])) {
        return "additivity broken on pair " + std::to_string(t);
      }
    }
  }
  return "";
}

// (c) greedy against exhaustive search. The unigram objective ignores token
// order, so enumerating the multisets of 4 tokens from the 20-token
// vocabulary covers every distinct objective value of the 20^4 fillings.
std::string oracle_greedy(double& worst_ratio) {
  EmbedderConfig cfg;
  cfg.dim = 512;
  cfg.ngram_orders = {1};
  ReferenceEmbedder emb(cfg);
  Rng rng(4242);
  const auto background = vocab_of(3000);
  worst_ratio = 1e9;
  for (int t = 0; t < 50; ++t) {
    const std::size_t qlen = 3 + rng.below(4);
    std::vector<std::string> vocab;
    for (std::size_t i = 0; i < qlen; ++i) vocab.push_back("query" + std::to_string(t) + "_" + std::to_string(i));
    const TokenSeq query{vocab, "q"};
    while (vocab.size() < 20) vocab.push_back("other" + std::to_string(t) + "_" + std::to_string(vocab.size()));
    const TokenSeq base{random_words(rng, background, 20 + rng.below(30)), "base"};
    const AttackObjective obj{&emb, emb.embed(query), false};
    const AttackBudget budget{4, 30, 30, rng.next()};

    const PoisonRecord g = greedy_flip(base, vocab, budget, SlotMode::concentrated, obj);
    const float base_score = obj.score(base);

    TokenSeq trial = g.poisoned_tokens;
    const std::size_t s0 = g.injected_spans.front().position;
    float best = -1e30f;
    for (std::size_t a = 0; a < 20; ++a) {
      for (std::size_t b = a; b < 20; ++b) {
        for (std::size_t c = b; c < 20; ++c) {
          for (std::size_t d = c; d < 20; ++d) {
            trial.tokens[s0] = vocab[a];
            trial.tokens[s0 + 1] = vocab[b];
            trial.tokens[s0 + 2] = vocab[c];
            trial.tokens[s0 + 3] = vocab[d];
            best = std::max(best, obj.score(trial));
          }
        }
      }
    }
    const double opt_gain = static_cast<double>(best) - base_score;
    const double gain = static_cast<double>(g.achieved_similarity) - base_score;
    if (!(opt_gain > 0.0)) return "trial " + std::to_string(t) + " has no positive optimum gain";
    worst_ratio = std::min(worst_ratio, gain / opt_gain);
  }
  return worst_ratio >= 0.9 ? "" : "greedy below 90% of the optimum gain";
}

// (d) C(N,k) = clean + one-poison + poisoned mixes, by walking subsets.
std::string oracle_identity() {
  for (int N = 1; N <= 12; ++N) {
    for (int k = 1; k <= N; ++k) {
      for (int n_p = 0; n_p <= N; ++n_p) {
        std::uint64_t zero = 0, one = 0, total = 0;
        const std::uint32_t pmask = (1u << n_p) - 1;
        for (std::uint32_t s = 0; s < (1u << N); ++s) {
          if (std::popcount(s) != k) continue;
          ++total;
          const int hit = std::popcount(s & pmask);
          zero += hit == 0;
          one += hit == 1;
        }
        const bool ok = total == binomial(N, k) &&
                        zero == binomial(N - n_p, k) &&
                        one == static_cast<std::uint64_t>(n_p) * binomial(N - n_p, k - 1) &&
                        poisoned_mix_count(CombineMethod::naive, N, k, n_p) == total - zero &&
                        poisoned_mix_count(CombineMethod::ragpart, N, k, n_p) == total - zero - one;
        if (!ok) return "identity fails at N=" + std::to_string(N) + " k=" + std::to_string(k);
      }
    }
  }
  return "";
}

Outcome oracles() {
  double ratio = 0.0;
  const std::string a = oracle_top_p();
  const std::string b = oracle_additivity();
  const std::string c = oracle_greedy(ratio);
  const std::string d = oracle_identity();
  std::string detail;
  detail += "(a) " + (a.empty() ? std::string("ok") : a);
  detail += "; (b) " + (b.empty() ? std::string("ok") : b);
  char buf[64];
  std::snprintf(buf, sizeof buf, "worst gain ratio %.4f", ratio);
  detail += "; (c) " + (c.empty() ? std::string(buf) : c + " (" + buf + ")");
  detail += "; (d) " + (d.empty() ? std::string("ok") : d);
  return {a.empty() && b.empty() && c.empty() && d.empty(), detail};
}

Outcome determinism() {
  if (trend_runs.part_dump.empty()) return {false, "criterion 4 produced no reports"};
  std::size_t same = 0;
  for (std::size_t workers : {1, 4}) {
    for (DefenseKind defense : {DefenseKind::ragpart, DefenseKind::ragmask}) {
      ExperimentConfig c = trend_config(defense);
      c.workers = workers;
      const auto rep = run_experiment(c);
      const bool part = defense == DefenseKind::ragpart;
      same += rep.dump() == (part ? trend_runs.part_dump : trend_runs.mask_dump) &&
              rep.results_jsonl() == (part ? trend_runs.part_jsonl : trend_runs.mask_jsonl);
    }
  }
  return {same == 4, std::to_string(same) + "/4 reruns (workers 1 and 4) byte-identical"};
}

}  // namespace

int main() {
  report(1, "condition tables", tables);
  report(2, "FLOP example", flop_example);
  report(3, "condition vs simulation", simulation_equivalence);
  report(4, "defense trend", defense_trend);
  report(5, "RAGMask no-op limit", mask_noop);
  report(6, "oracle suites", oracles);
  report(7, "determinism", determinism);
  std::printf("%s: %d criteria failed\n", failures == 0 ? "OK" : "FAILED", failures);
  return failures == 0 ? 0 : 1;
}

#include "ragshield/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

#include "ragshield/error.hpp"
#include "ragshield/fragmenter.hpp"
#include "ragshield/metrics.hpp"
#include "ragshield/ragmask.hpp"
#include "ragshield/rng.hpp"
#include "ragshield/tokenizer.hpp"
#include "ragshield/vector_index.hpp"

namespace ragshield {

using nlohmann::json;

std::string_view defense_name(DefenseKind d) noexcept {
  switch (d) {
    case DefenseKind::none: return "none";
    case DefenseKind::ragpart: return "ragpart";
    case DefenseKind::naive_combo: return "naive_combo";
    case DefenseKind::ragmask: return "ragmask";
  }
  return "none";
}

DefenseKind parse_defense(std::string_view s) {
  if (s == "none") return DefenseKind::none;
  if (s == "ragpart") return DefenseKind::ragpart;
  if (s == "naive_combo" || s == "naive") return DefenseKind::naive_combo;
  if (s == "ragmask") return DefenseKind::ragmask;
  throw UsageError("unknown defense '" + std::string(s) + "'");
}

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void ExperimentConfig::validate() const {
  embedder.validate();
  if (p == 0) throw UsageError("experiment: p must be >= 1");
  if (workers == 0) throw UsageError("experiment: workers must be >= 1");
  if (N.empty() || k.empty() || m.empty() || delta.empty() || alpha.empty()) {
    throw UsageError("experiment: sweep axes must be nonempty");
  }
  for (const auto& d : delta) {
    if (const auto* s = std::get_if<std::string>(&d); s && *s != "auto") {
      throw UsageError("experiment: delta must be a number or \"auto\"");
    }
  }
  if (!(delta_quantile >= 0.0 && delta_quantile <= 1.0)) {
    throw UsageError("experiment: delta_quantile must lie in [0, 1]");
  }
  if (synthetic) {
    synthetic->validate();
  } else {
    for (const auto* path : {&corpus_path, &queries_path, &qrels_path}) {
      if (path->empty()) throw UsageError("experiment: corpus, queries and qrels are required");
      if (!std::filesystem::exists(*path)) throw UsageError("experiment: missing file " + *path);
    }
  }
  if (!attack.manifest.empty() && !std::filesystem::exists(attack.manifest)) {
    throw UsageError("experiment: missing manifest " + attack.manifest);
  }
  if (attack.type && *attack.type == AttackType::external && attack.manifest.empty()) {
    throw UsageError("experiment: external attacks need a manifest");
  }
}

namespace {

json delta_json(const DeltaValue& d) {
  if (const auto* v = std::get_if<double>(&d)) return *v;
  return std::get<std::string>(d);
}

std::string position_name(InsertPosition p) {
  switch (p) {
    case InsertPosition::prepend: return "prepend";
    case InsertPosition::append: return "append";
    case InsertPosition::middle: return "middle";
  }
  return "prepend";
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw UsageError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw UsageError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace

void to_json(json& j, const ExperimentConfig& c) {
  j = json::object();
  j["embedder"] = c.embedder;
  if (c.synthetic) {
    j["synthetic"] = *c.synthetic;
  } else {
    j["corpus"] = c.corpus_path;
    j["queries"] = c.queries_path;
    j["qrels"] = c.qrels_path;
  }
  json a = json::object();
  if (!c.attack.manifest.empty()) {
    a["manifest"] = c.attack.manifest;
  } else {
    a["type"] = c.attack.type ? json(attack_name(*c.attack.type)) : json("none");
    a["position"] = position_name(c.attack.position);
    a["bases_per_query"] = c.attack.bases_per_query;
    a["budget"] = {{"n_tokens", c.attack.budget.n_tokens},
                   {"iterations", c.attack.budget.iterations},
                   {"candidates", c.attack.budget.candidates}};
    a["vocab_sample"] = c.attack.vocab_sample;
  }
  j["attack"] = a;
  j["defense"] = defense_name(c.defense);
  j["aggregation"] = strategy_name(c.aggregation);
  j["p"] = c.p;
  j["rng_seed"] = c.rng_seed;
  json deltas = json::array();
  for (const auto& d : c.delta) deltas.push_back(delta_json(d));
  j["sweep"] = {{"N", c.N}, {"k", c.k}, {"m", c.m}, {"delta", deltas}, {"alpha", c.alpha}};
  j["delta_quantile"] = c.delta_quantile;
  // workers and record_timing are execution knobs; leaving them out keeps the
  // echo identical across machines.
}

ExperimentConfig experiment_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"embedder", "corpus", "queries", "qrels", "synthetic", "attack", "defense",
                 "aggregation", "p", "rng_seed", "sweep", "delta_quantile", "workers",
                 "record_timing"},
             "experiment");
  ExperimentConfig c;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    return path.string();
  };
  try {
    if (j.contains("embedder")) c.embedder = j.at("embedder").get<EmbedderConfig>();
    if (j.contains("synthetic")) c.synthetic = j.at("synthetic").get<SynthConfig>();
    if (j.contains("corpus")) c.corpus_path = resolve(j.at("corpus").get<std::string>());
    if (j.contains("queries")) c.queries_path = resolve(j.at("queries").get<std::string>());
    if (j.contains("qrels")) c.qrels_path = resolve(j.at("qrels").get<std::string>());
    if (j.contains("attack")) {
      const json& a = j.at("attack");
      check_keys(a, {"manifest", "type", "position", "bases_per_query", "budget", "vocab_sample"},
                 "attack");
      if (a.contains("manifest")) c.attack.manifest = resolve(a.at("manifest").get<std::string>());
      if (a.contains("type")) {
        const auto t = a.at("type").get<std::string>();
        c.attack.type = t == "none" ? std::nullopt : std::optional(parse_attack(t));
      }
      if (a.contains("position")) c.attack.position = parse_position(a.at("position").get<std::string>());
      if (a.contains("bases_per_query")) a.at("bases_per_query").get_to(c.attack.bases_per_query);
      if (a.contains("vocab_sample")) a.at("vocab_sample").get_to(c.attack.vocab_sample);
      if (a.contains("budget")) {
        const json& b = a.at("budget");
        check_keys(b, {"n_tokens", "iterations", "candidates"}, "attack.budget");
        if (b.contains("n_tokens")) b.at("n_tokens").get_to(c.attack.budget.n_tokens);
        if (b.contains("iterations")) b.at("iterations").get_to(c.attack.budget.iterations);
        if (b.contains("candidates")) b.at("candidates").get_to(c.attack.budget.candidates);
      }
    }
    if (j.contains("defense")) c.defense = parse_defense(j.at("defense").get<std::string>());
    if (j.contains("aggregation")) {
      c.aggregation = parse_strategy(j.at("aggregation").get<std::string>());
    }
    if (j.contains("p")) j.at("p").get_to(c.p);
    if (j.contains("rng_seed")) j.at("rng_seed").get_to(c.rng_seed);
    if (j.contains("delta_quantile")) j.at("delta_quantile").get_to(c.delta_quantile);
    if (j.contains("workers")) j.at("workers").get_to(c.workers);
    if (j.contains("record_timing")) j.at("record_timing").get_to(c.record_timing);
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      check_keys(s, {"N", "k", "m", "delta", "alpha"}, "sweep");
      if (s.contains("N")) s.at("N").get_to(c.N);
      if (s.contains("k")) s.at("k").get_to(c.k);
      if (s.contains("m")) s.at("m").get_to(c.m);
      if (s.contains("alpha")) s.at("alpha").get_to(c.alpha);
      if (s.contains("delta")) {
        c.delta.clear();
        for (const json& d : s.at("delta")) {
          if (d.is_number()) {
            c.delta.emplace_back(d.get<double>());
          } else if (d.is_string()) {
            c.delta.emplace_back(d.get<std::string>());
          } else {
            throw UsageError("sweep.delta: expected numbers or \"auto\"");
          }
        }
      }
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("experiment config: ") + e.what());
  }
  c.embedder.apply_env();
  c.validate();
  return c;
}

std::string ExperimentReport::dump() const { return summary.dump(2) + "\n"; }

std::string ExperimentReport::results_jsonl() const {
  std::string out;
  for (std::size_t pt = 0; pt < outcomes.size(); ++pt) {
    for (const auto& q : outcomes[pt]) {
      out += json{{"point", pt},
                  {"query_id", q.query_id},
                  {"retrieved", q.retrieved},
                  {"attacked", q.attacked},
                  {"judged", q.judged},
                  {"poison_hit", q.poison_hit},
                  {"golden_hit", q.golden_hit}}
                 .dump();
      out += '\n';
    }
  }
  return out;
}

double calibrate_delta(const std::vector<TokenSeq>& docs, const std::vector<Embedding>& queries,
                       std::size_t m, std::size_t pool, double quantile, Embedder& embedder) {
  if (docs.empty() || queries.empty()) throw UsageError("calibrate_delta: no data");
  const Index index = build_combination_index(docs, 1, 1, CombineMethod::ragpart, embedder);
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < docs.size(); ++i) pos.emplace(docs[i].source_id, i);
  std::vector<double> drops;
  for (const auto& q : queries) {
    for (const auto& cand : index.top_p(0, q, pool).entries) {
      const TokenSeq& doc = docs[pos.at(cand.doc_id)];
      for (const auto& seg : segment(doc, m)) {
        const double v_masked = similarity(embedder.embed_prepared(without_segment(doc, seg)), q);
        drops.push_back(static_cast<double>(cand.score) - v_masked);
      }
    }
  }
  if (drops.empty()) return 0.0;
  std::sort(drops.begin(), drops.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(quantile * static_cast<double>(drops.size())));
  return drops[rank == 0 ? 0 : rank - 1];
}

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json drop_json(const std::optional<double>& base, const std::optional<double>& defended) {
  if (!base || !defended) return nullptr;
  return *base - *defended;
}

struct Workspace {
  const ExperimentConfig& config;
  Embedder& embedder;
  Corpus clean;
  std::vector<Query> queries;
  Qrels qrels;
  std::vector<TokenSeq> query_tokens;
  std::vector<Embedding> query_embs;
  std::vector<PoisonManifestEntry> manifest;
  Corpus poisoned;
  std::vector<TokenSeq> docs;
  std::unordered_map<std::string, std::size_t> doc_pos;
  std::map<std::string, std::set<std::string>> targeting;
  std::vector<std::string> warnings;
};

std::vector<std::string> unjudged_ids(const Corpus& corpus, const Qrels& qrels) {
  std::set<std::string> judged;
  for (const auto& [_, docs] : qrels.golden) judged.insert(docs.begin(), docs.end());
  std::vector<std::string> out;
  for (const auto& d : corpus.docs()) {
    if (judged.count(d.id) == 0) out.push_back(d.id);
  }
  return out;
}

std::vector<PoisonRecord> generate_poisons(Workspace& ws,
                                           const std::map<std::string, std::vector<std::string>>& bases) {
  const AttackSpec& spec = ws.config.attack;
  std::vector<PoisonRecord> all;
  if (!spec.type) return all;

  std::vector<std::string> corpus_vocab;
  if (*spec.type != AttackType::query_as_poison && spec.vocab_sample > 0) {
    std::set<std::string> seen;
    for (const auto& d : ws.clean.docs()) {
      for (auto& t : document_tokens(d).tokens) seen.insert(std::move(t));
    }
    std::vector<std::string> pool(seen.begin(), seen.end());
    Rng rng(derive_seed(ws.config.rng_seed, "attack-vocab"));
    for (std::size_t i : rng.sample(pool.size(), std::min(spec.vocab_sample, pool.size()))) {
      corpus_vocab.push_back(pool[i]);
    }
  }

  std::vector<std::vector<PoisonRecord>> per_query(ws.queries.size());
  parallel_for(ws.queries.size(), ws.config.workers, [&](std::size_t qi) {
    const Query& q = ws.queries[qi];
    auto it = bases.find(q.id);
    if (it == bases.end() || ws.query_tokens[qi].empty()) return;
    AttackObjective objective{&ws.embedder, ws.embedder.embed(ws.query_tokens[qi]), false};
    std::vector<std::string> vocab;
    if (*spec.type != AttackType::query_as_poison) {
      objective.normalize_doc = ws.embedder.config().normalize_fragments;
      std::set<std::string> v(ws.query_tokens[qi].tokens.begin(), ws.query_tokens[qi].tokens.end());
      v.insert(corpus_vocab.begin(), corpus_vocab.end());
      vocab.assign(v.begin(), v.end());
    }
    for (std::size_t j = 0; j < it->second.size(); ++j) {
      const TokenSeq base = document_tokens(ws.clean.get(it->second[j]));
      const std::string id = "poison-" + q.id + "-" + std::to_string(j);
      PoisonRecord rec;
      switch (*spec.type) {
        case AttackType::query_as_poison:
          rec = query_as_poison(ws.query_tokens[qi], base, spec.position, objective);
          break;
        case AttackType::greedy:
        case AttackType::greedy_spread: {
          AttackBudget budget = spec.budget;
          budget.rng_seed = derive_seed(ws.config.rng_seed, id);
          rec = greedy_flip(base, vocab, budget,
                            *spec.type == AttackType::greedy ? SlotMode::concentrated : SlotMode::spread,
                            objective);
          break;
        }
        case AttackType::external:
          throw UsageError("external attacks are read from a manifest");
      }
      rec.poison_id = id;
      rec.target_query_id = q.id;
      per_query[qi].push_back(std::move(rec));
    }
  });
  for (auto& v : per_query) {
    for (auto& r : v) all.push_back(std::move(r));
  }
  return all;
}

void prepare(Workspace& ws) {
  const ExperimentConfig& c = ws.config;
  std::map<std::string, std::vector<std::string>> bases;
  if (c.synthetic) {
    SynthData data = generate_synthetic(*c.synthetic);
    ws.clean = std::move(data.corpus);
    ws.queries = std::move(data.queries);
    ws.qrels = std::move(data.qrels);
    for (auto& [qid, ids] : data.bases) {
      if (ids.size() > c.attack.bases_per_query) ids.resize(c.attack.bases_per_query);
    }
    bases = std::move(data.bases);
  } else {
    ws.clean = load_corpus(c.corpus_path);
    ws.queries = load_queries(c.queries_path);
    ws.qrels = load_qrels(c.qrels_path, &ws.clean);
    ws.warnings = ws.qrels.warnings;
  }
  if (c.attack.manifest.empty() && c.attack.type) {
    if (!c.synthetic || c.attack.bases_per_query > c.synthetic->bases_per_query) {
      const auto pool = unjudged_ids(ws.clean, ws.qrels);
      if (pool.size() < c.attack.bases_per_query) {
        throw UsageError("not enough unjudged documents to poison");
      }
      bases.clear();
      for (const auto& q : ws.queries) {
        Rng rng(derive_seed(c.rng_seed, "bases:" + q.id));
        for (std::size_t i : rng.sample(pool.size(), c.attack.bases_per_query)) {
          bases[q.id].push_back(pool[i]);
        }
      }
    }
  }

  for (const auto& q : ws.queries) ws.query_tokens.push_back(tokenize(q.text, q.id));

  if (!c.attack.manifest.empty()) {
    ws.manifest = load_manifest(c.attack.manifest);
    ws.poisoned = ws.clean;
    for (const auto& e : ws.manifest) {
      if (ws.poisoned.contains(e.poison_id)) {
        throw UsageError("poison id '" + e.poison_id + "' collides with an existing document");
      }
      ws.poisoned.add({e.poison_id, "", e.text});
    }
  } else {
    auto inj = inject(ws.clean, generate_poisons(ws, bases));
    ws.poisoned = std::move(inj.corpus);
    ws.manifest = std::move(inj.manifest);
  }
  for (const auto& e : ws.manifest) ws.targeting[e.target_query_id].insert(e.poison_id);

  ws.docs.reserve(ws.poisoned.size());
  for (const auto& d : ws.poisoned.docs()) {
    ws.doc_pos.emplace(d.id, ws.docs.size());
    ws.docs.push_back(document_tokens(d));
  }
  ws.query_embs.resize(ws.queries.size());
  parallel_for(ws.queries.size(), c.workers, [&](std::size_t i) {
    ws.query_embs[i] = ws.embedder.embed_prepared(ws.query_tokens[i]);
  });
}

struct PointSpec {
  json params;
  std::size_t N = 1, k = 1, m = 10;
  double delta = 0.0;
  double alpha = 2.0;
};

std::vector<QueryOutcome> outcomes_for(const Workspace& ws,
                                       const std::vector<std::vector<std::string>>& retrieved) {
  std::vector<QueryOutcome> out(ws.queries.size());
  for (std::size_t i = 0; i < ws.queries.size(); ++i) {
    QueryOutcome& o = out[i];
    o.query_id = ws.queries[i].id;
    o.retrieved = retrieved[i];
    auto t = ws.targeting.find(o.query_id);
    o.attacked = t != ws.targeting.end();
    const auto* golden = ws.qrels.find(o.query_id);
    o.judged = golden != nullptr && !golden->empty();
    for (const auto& d : o.retrieved) {
      if (o.attacked && t->second.count(d) != 0) o.poison_hit = true;
      if (o.judged && golden->count(d) != 0) o.golden_hit = true;
    }
  }
  return out;
}

RetrievalResults as_results(const std::vector<QueryOutcome>& outcomes) {
  RetrievalResults r;
  for (const auto& o : outcomes) r[o.query_id] = o.retrieved;
  return r;
}

json run_point(Workspace& ws, const PointSpec& pt, std::vector<QueryOutcome>& outcomes_out) {
  const ExperimentConfig& c = ws.config;
  Embedder& emb = ws.embedder;
  const std::size_t Q = ws.queries.size();
  const std::uint64_t D = ws.docs.size();
  json acct = json::object();
  bool acct_ok = true;

  // Baseline, rebuilt for every point.
  emb.reset_calls();
  const Index full = build_combination_index(ws.docs, 1, 1, CombineMethod::ragpart, emb);
  acct["baseline_index_embed_calls"] = emb.calls();
  acct["baseline_index_embed_calls_expected"] = D;
  acct_ok = acct_ok && emb.calls() == D;
  std::vector<std::vector<std::string>> base(Q);
  for (std::size_t i = 0; i < Q; ++i) {
    for (const auto& e : full.top_p(0, ws.query_embs[i], c.p).entries) base[i].push_back(e.doc_id);
  }
  const auto base_outcomes = outcomes_for(ws, base);
  const auto base_results = as_results(base_outcomes);
  const auto base_asr = asr(base_results, ws.manifest);
  const auto base_sr = sr(base_results, ws.qrels);

  std::vector<std::vector<std::string>> defended(Q);
  json mask_decisions = json::array();
  switch (c.defense) {
    case DefenseKind::none:
      defended = base;
      break;
    case DefenseKind::ragpart:
    case DefenseKind::naive_combo: {
      const CombineMethod method =
          c.defense == DefenseKind::ragpart ? CombineMethod::ragpart : CombineMethod::naive;
      PoolingStats stats;
      emb.reset_calls();
      const Index idx = build_combination_index(ws.docs, pt.N, pt.k, method, emb, &stats);
      const std::uint64_t C = binomial(static_cast<std::int64_t>(pt.N), static_cast<std::int64_t>(pt.k));
      const std::uint64_t want_calls = method == CombineMethod::ragpart ? D * pt.N : D * C;
      const std::uint64_t want_pools = method == CombineMethod::ragpart ? D * C : 0;
      acct["index_embed_calls"] = emb.calls();
      acct["index_embed_calls_expected"] = want_calls;
      acct["pool_ops"] = stats.pool_ops;
      acct["pool_ops_expected"] = want_pools;
      acct_ok = acct_ok && emb.calls() == want_calls && stats.pool_ops == want_pools;
      parallel_for(Q, c.workers, [&](std::size_t i) {
        AggregationConfig agg{c.aggregation, c.p, derive_seed(c.rng_seed, "agg:" + ws.queries[i].id)};
        defended[i] = ragpart_retrieve(idx, ws.query_embs[i], agg).final_docs;
      });
      break;
    }
    case DefenseKind::ragmask: {
      MaskConfig mc{pt.m, pt.delta, pt.alpha, c.p};
      mc.validate();
      const DocLookup lookup = [&](const std::string& id) -> const TokenSeq& {
        return ws.docs[ws.doc_pos.at(id)];
      };
      std::vector<std::uint64_t> expected(Q, 0);
      std::vector<std::uint64_t> discarded_per_query(Q, 0);
      emb.reset_calls();
      parallel_for(Q, c.workers, [&](std::size_t i) {
        DefenseResult r = ragmask_retrieve(full, ws.query_embs[i], lookup, mc, emb);
        defended[i] = r.final_docs;
        std::size_t discarded = 0;
        for (const auto& s : r.mask_decisions) {
          expected[i] += ceil_div(ws.docs[ws.doc_pos.at(s.doc_id)].size(), pt.m) + 1;
          discarded += static_cast<std::size_t>(
              std::count(s.kept_segments.begin(), s.kept_segments.end(), false));
        }
        discarded_per_query[i] = discarded;
      });
      std::uint64_t want = 0;
      std::uint64_t discarded_total = 0;
      for (std::size_t i = 0; i < Q; ++i) {
        want += expected[i];
        discarded_total += discarded_per_query[i];
      }
      std::size_t longest = 0;
      for (const auto& d : ws.docs) longest = std::max(longest, d.size());
      const std::uint64_t pool = std::min<std::uint64_t>(mc.pool_size(), D);
      acct["mask_embed_calls"] = emb.calls();
      acct["mask_embed_calls_expected"] = want;
      acct["mask_embed_calls_upper_bound"] = Q * pool * (ceil_div(longest, pt.m) + 1);
      acct["segments_discarded"] = discarded_total;
      acct_ok = acct_ok && emb.calls() == want;
      break;
    }
  }
  acct["consistent"] = acct_ok;

  outcomes_out = outcomes_for(ws, defended);
  const auto results = as_results(outcomes_out);
  const auto d_asr = asr(results, ws.manifest);
  const auto d_sr = sr(results, ws.qrels);

  json per_query = json::array();
  for (const auto& o : outcomes_out) {
    per_query.push_back({{"query_id", o.query_id},
                         {"retrieved", o.retrieved},
                         {"poison_hit", o.poison_hit},
                         {"golden_hit", o.golden_hit}});
  }
  return {{"params", pt.params},
          {"status", "ok"},
          {"asr", optional_json(d_asr)},
          {"sr", optional_json(d_sr)},
          {"baseline", {{"asr", optional_json(base_asr)}, {"sr", optional_json(base_sr)}}},
          {"asr_drop", drop_json(base_asr, d_asr)},
          {"sr_drop", drop_json(base_sr, d_sr)},
          {"accounting", acct},
          {"per_query", per_query}};
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  auto embedder = make_embedder(config.embedder);
  Workspace ws{config, *embedder, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
  prepare(ws);
  const double setup_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // Grid points.
  std::vector<PointSpec> points;
  json calibration = json::object();
  switch (config.defense) {
    case DefenseKind::none:
      points.push_back({json::object()});
      break;
    case DefenseKind::ragpart:
    case DefenseKind::naive_combo:
      for (auto N : config.N) {
        for (auto k : config.k) {
          PointSpec pt;
          pt.N = N;
          pt.k = k;
          pt.params = {{"N", N}, {"k", k}};
          points.push_back(pt);
        }
      }
      break;
    case DefenseKind::ragmask: {
      std::map<std::pair<std::size_t, std::size_t>, double> calibrated;
      for (auto m : config.m) {
        for (const auto& d : config.delta) {
          for (auto alpha : config.alpha) {
            PointSpec pt;
            pt.m = m;
            pt.alpha = alpha;
            pt.params = {{"m", m}, {"alpha", alpha}, {"delta", delta_json(d)}};
            if (const auto* v = std::get_if<double>(&d)) {
              pt.delta = *v;
            } else {
              const std::size_t pool = MaskConfig{m, 0.0, alpha, config.p}.pool_size();
              auto key = std::make_pair(m, pool);
              auto it = calibrated.find(key);
              if (it == calibrated.end()) {
                std::vector<TokenSeq> clean_docs;
                for (const auto& doc : ws.clean.docs()) clean_docs.push_back(document_tokens(doc));
                const double value = m == 0 ? 0.0
                    : calibrate_delta(clean_docs, ws.query_embs, m, pool, config.delta_quantile, *embedder);
                it = calibrated.emplace(key, value).first;
                calibration["m=" + std::to_string(m) + ",pool=" + std::to_string(pool)] = value;
              }
              pt.delta = it->second;
              pt.params["delta_calibrated"] = pt.delta;
            }
            points.push_back(pt);
          }
        }
      }
      break;
    }
  }

  ExperimentReport report;
  json point_json = json::array();
  json timing = json::array();
  for (const auto& pt : points) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<QueryOutcome> outcomes;
    try {
      point_json.push_back(run_point(ws, pt, outcomes));
    } catch (const Error& e) {
      ++report.failed_points;
      point_json.push_back({{"params", pt.params}, {"status", "error"}, {"error", e.what()}});
      outcomes.clear();
    }
    report.outcomes.push_back(std::move(outcomes));
    timing.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }

  std::size_t attacked = 0, judged = 0;
  for (const auto& q : ws.queries) {
    attacked += ws.targeting.count(q.id);
    const auto* g = ws.qrels.find(q.id);
    judged += g != nullptr && !g->empty();
  }
  json cfg;
  to_json(cfg, config);
  json& s = report.summary;
  s["config"] = cfg;
  s["embedder_fingerprint"] = config.embedder.fingerprint();
  s["data"] = {{"documents", ws.clean.size()},
               {"poisons", ws.manifest.size()},
               {"queries", ws.queries.size()},
               {"attacked_queries", attacked},
               {"judged_queries", judged}};
  s["points"] = point_json;
  s["status"] = report.partial() ? "partial" : "ok";
  s["warnings"] = ws.warnings;
  if (!calibration.empty()) s["delta_calibration"] = calibration;
  if (config.record_timing) {
    s["timing"] = {{"setup_seconds", setup_seconds}, {"point_seconds", timing}};
  }
  return report;
}

}  // namespace ragshield

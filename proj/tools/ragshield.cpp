// ragshield command line: index building, defended retrieval, poison
// generation, the counting theory and experiment runs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ragshield/attacks.hpp"
#include "ragshield/corpus.hpp"
#include "ragshield/error.hpp"
#include "ragshield/experiment.hpp"
#include "ragshield/fragmenter.hpp"
#include "ragshield/ragmask.hpp"
#include "ragshield/ragpart.hpp"
#include "ragshield/rng.hpp"
#include "ragshield/synthetic.hpp"
#include "ragshield/theory.hpp"
#include "ragshield/tokenizer.hpp"
#include "ragshield/vector_index.hpp"

using namespace ragshield;
using nlohmann::json;

namespace {

struct EmbedderFlags {
  std::string config_path;
  std::size_t dim = 0;
  std::vector<int> ngrams;
  bool no_normalize = false;

  void attach(CLI::App* app) {
    app->add_option("--embedder-config", config_path, "JSON embedder configuration");
    app->add_option("--dim", dim, "Embedding dimension");
    app->add_option("--ngram", ngrams, "Reference embedder n-gram orders")->delimiter(',');
    app->add_flag("--no-normalize", no_normalize, "Skip fragment normalization");
  }

  EmbedderConfig resolve() const {
    EmbedderConfig c;
    if (!config_path.empty()) c = json::parse(read_file(config_path)).get<EmbedderConfig>();
    c.apply_env();
    if (dim != 0) c.dim = dim;
    if (!ngrams.empty()) c.ngram_orders = ngrams;
    if (no_normalize) c.normalize_fragments = false;
    c.validate();
    return c;
  }
};

std::vector<TokenSeq> corpus_tokens(const Corpus& corpus) {
  std::vector<TokenSeq> docs;
  docs.reserve(corpus.size());
  for (const auto& d : corpus.docs()) docs.push_back(document_tokens(d));
  return docs;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval defenses against corpus poisoning"};
  app.require_subcommand(1);

  // embed
  auto* embed = app.add_subcommand("embed", "Build a combination index from a corpus");
  std::string e_corpus, e_out, e_method = "ragpart";
  std::size_t e_n = 1, e_k = 1;
  EmbedderFlags e_flags;
  embed->add_option("--corpus", e_corpus, "Corpus JSONL")->required();
  embed->add_option("--out", e_out, "Index file")->required();
  embed->add_option("--n", e_n, "Fragments per document");
  embed->add_option("--k", e_k, "Fragments per combination");
  embed->add_option("--method", e_method, "ragpart or naive");
  e_flags.attach(embed);

  // retrieve
  auto* retrieve = app.add_subcommand("retrieve", "Defended top-p retrieval");
  std::string r_index, r_defense = "ragpart", r_agg = "vote", r_queries, r_out, r_corpus;
  std::size_t r_p = 10, r_mask_len = 10;
  std::uint64_t r_seed = 0;
  double r_alpha = 2.0, r_delta = 0.01;
  EmbedderFlags r_flags;
  retrieve->add_option("--index", r_index, "Index file")->required();
  retrieve->add_option("--defense", r_defense, "none, ragpart or ragmask");
  retrieve->add_option("--agg", r_agg, "vote or intersect");
  retrieve->add_option("--p", r_p, "Documents returned");
  retrieve->add_option("--seed", r_seed, "Seed for the intersection fallback");
  retrieve->add_option("--queries", r_queries, "Queries JSONL")->required();
  retrieve->add_option("--corpus", r_corpus, "Corpus JSONL (ragmask)");
  retrieve->add_option("--alpha", r_alpha, "Candidate pool multiplier (ragmask)");
  retrieve->add_option("--mask-len", r_mask_len, "Mask length m (ragmask)");
  retrieve->add_option("--delta", r_delta, "Keep threshold (ragmask)");
  retrieve->add_option("--out", r_out, "Results JSONL (default stdout)");
  r_flags.attach(retrieve);

  // attack
  auto* attack = app.add_subcommand("attack", "Generate poisoned documents");
  std::string a_type = "query", a_queries, a_bases, a_out, a_position = "prepend", a_corpus,
              a_poisoned;
  AttackBudget a_budget;
  std::size_t a_per_query = 3;
  std::uint64_t a_seed = 0;
  EmbedderFlags a_flags;
  attack->add_option("--type", a_type, "query, greedy or greedy-spread");
  attack->add_option("--queries", a_queries, "Queries JSONL")->required();
  attack->add_option("--bases", a_bases, "Base documents JSONL (corpus format)")->required();
  attack->add_option("--budget", a_budget.n_tokens, "Adversarial tokens per poison");
  attack->add_option("--iters", a_budget.iterations, "Greedy rounds");
  attack->add_option("--cands", a_budget.candidates, "Candidates per round");
  attack->add_option("--seed", a_seed, "Seed");
  attack->add_option("--per-query", a_per_query, "Poisons per query");
  attack->add_option("--position", a_position, "prepend, append or middle (query)");
  attack->add_option("--corpus", a_corpus, "Corpus to inject the poisons into");
  attack->add_option("--poisoned-corpus", a_poisoned, "Where to write the injected corpus");
  attack->add_option("--out", a_out, "Manifest JSONL")->required();
  a_flags.attach(attack);

  // theory
  auto* theory = app.add_subcommand("theory", "Robustness conditions and cost models");
  theory->require_subcommand(1);
  auto* table = theory->add_subcommand("table", "Condition grid over N and k");
  std::string t_method = "ragpart";
  std::int64_t t_np = 2, t_na = 1, t_nlo = 3, t_nhi = 15, t_klo = 3, t_khi = 15;
  bool t_json = false;
  table->add_option("--method", t_method, "ragpart or naive");
  table->add_option("--np", t_np, "Poisoned fragments per document");
  table->add_option("--na", t_na, "Adversarial documents");
  table->add_option("--N-min", t_nlo);
  table->add_option("--N-max", t_nhi);
  table->add_option("--k-min", t_klo);
  table->add_option("--k-max", t_khi);
  table->add_flag("--json", t_json, "Machine-readable output");

  auto* fl = theory->add_subcommand("flops", "FLOP cost models");
  std::string f_R = "1e9", f_D = "1e6", f_ne = "512", f_l = "0", f_m = "10", f_p = "10";
  double f_alpha = 2.0;
  std::int64_t f_N = 5, f_k = 3;
  bool f_json = false;
  fl->add_option("--R", f_R, "FLOPs per embedder call");
  fl->add_option("--D", f_D, "Corpus size");
  fl->add_option("--N", f_N);
  fl->add_option("--k", f_k);
  fl->add_option("--ne", f_ne, "Embedding dimension");
  fl->add_option("--l", f_l, "Longest document in tokens (ragmask)");
  fl->add_option("--m", f_m, "Mask length (ragmask)");
  fl->add_option("--alpha", f_alpha, "Pool multiplier (ragmask)");
  fl->add_option("--p", f_p, "Documents returned (ragmask)");
  fl->add_flag("--json", f_json);

  auto* sim = theory->add_subcommand("simulate", "Worst-case majority-vote simulation");
  std::string s_method = "ragpart";
  TheoryParams s_params;
  std::uint64_t s_trials = 1000, s_seed = 7;
  sim->add_option("--method", s_method);
  sim->add_option("--np", s_params.n_p);
  sim->add_option("--na", s_params.n_a);
  sim->add_option("--N", s_params.N);
  sim->add_option("--k", s_params.k);
  sim->add_option("--p", s_params.p);
  sim->add_option("--trials", s_trials);
  sim->add_option("--seed", s_seed);

  // eval
  auto* eval = app.add_subcommand("eval", "Run an experiment configuration");
  std::string v_config, v_out, v_results;
  int v_workers = 0;
  eval->add_option("--config", v_config, "Experiment JSON")->required();
  eval->add_option("--out", v_out, "Report JSON (default stdout)");
  eval->add_option("--results", v_results, "Per-query results JSONL");
  eval->add_option("--workers", v_workers, "Override the worker count");

  // synth
  auto* synth = app.add_subcommand("synth", "Write the synthetic benchmark to a directory");
  std::string y_dir;
  SynthConfig y_cfg;
  synth->add_option("--out-dir", y_dir)->required();
  synth->add_option("--docs", y_cfg.n_docs);
  synth->add_option("--queries", y_cfg.n_queries);
  synth->add_option("--seed", y_cfg.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*embed) {
      const EmbedderConfig cfg = e_flags.resolve();
      auto embedder = make_embedder(cfg);
      const Corpus corpus = load_corpus(e_corpus);
      PoolingStats stats;
      const Index index = build_combination_index(corpus_tokens(corpus), e_n, e_k,
                                                  parse_method(e_method), *embedder, &stats);
      index.save(e_out);
      std::cerr << "indexed " << index.doc_count() << " documents, " << index.size()
                << " entries, embedder calls " << embedder->calls() << ", fingerprint "
                << hex64(cfg.fingerprint()) << "\n";
      return 0;
    }

    if (*retrieve) {
      const EmbedderConfig cfg = r_flags.resolve();
      auto embedder = make_embedder(cfg);
      const Index index = Index::load(r_index);
      std::vector<std::string> warnings;
      if (index.meta().embedder_fingerprint != cfg.fingerprint()) {
        warnings.push_back("index fingerprint " + hex64(index.meta().embedder_fingerprint) +
                           " differs from the query embedder " + hex64(cfg.fingerprint()));
        std::cerr << "warning: " << warnings.back() << "\n";
      }
      const DefenseKind defense = parse_defense(r_defense);
      std::vector<TokenSeq> docs;
      std::unordered_map<std::string, std::size_t> pos;
      if (defense == DefenseKind::ragmask) {
        if (r_corpus.empty()) throw UsageError("ragmask needs --corpus");
        docs = corpus_tokens(load_corpus(r_corpus));
        for (std::size_t i = 0; i < docs.size(); ++i) pos.emplace(docs[i].source_id, i);
      }
      const DocLookup lookup = [&](const std::string& id) -> const TokenSeq& {
        auto it = pos.find(id);
        if (it == pos.end()) throw DataError("document '" + id + "' is not in the corpus");
        return docs[it->second];
      };
      std::string out;
      for (const Query& q : load_queries(r_queries)) {
        const Embedding qe = embedder->embed_prepared(tokenize(q.text, q.id));
        json row{{"query_id", q.id}};
        DefenseResult res;
        switch (defense) {
          case DefenseKind::none: {
            for (const auto& e : index.top_p(0, qe, r_p).entries) res.final_docs.push_back(e.doc_id);
            break;
          }
          case DefenseKind::ragpart:
          case DefenseKind::naive_combo:
            res = ragpart_retrieve(index, qe, {parse_strategy(r_agg), r_p, derive_seed(r_seed, q.id)});
            row["vote_counts"] = res.vote_counts;
            if (res.fallback_seed) row["fallback_seed"] = *res.fallback_seed;
            break;
          case DefenseKind::ragmask: {
            res = ragmask_retrieve(index, qe, lookup, {r_mask_len, r_delta, r_alpha, r_p}, *embedder);
            json decisions = json::array();
            for (const auto& s : res.mask_decisions) {
              decisions.push_back({{"doc_id", s.doc_id},
                                   {"kept_segments", s.kept_segments},
                                   {"original_score", s.original_score},
                                   {"sanitized_score", s.sanitized_score},
                                   {"sanitized_text", s.sanitized_tokens.text()}});
            }
            row["mask_decisions"] = decisions;
            break;
          }
        }
        row["retrieved"] = res.final_docs;
        if (!warnings.empty()) row["warnings"] = warnings;
        out += row.dump() + "\n";
      }
      write_text(r_out, out);
      return 0;
    }

    if (*attack) {
      const EmbedderConfig cfg = a_flags.resolve();
      auto embedder = make_embedder(cfg);
      const auto queries = load_queries(a_queries);
      const Corpus bases = load_corpus(a_bases);
      if (bases.empty()) throw UsageError("no base documents");
      const AttackType type = parse_attack(a_type);
      if (type == AttackType::external) throw UsageError("external poisons are ingested, not generated");

      // Greedy vocabulary: every base token plus the query's own.
      std::set<std::string> base_vocab;
      for (const auto& d : bases.docs()) {
        for (auto& t : document_tokens(d).tokens) base_vocab.insert(std::move(t));
      }
      std::vector<PoisonRecord> poisons;
      for (const Query& q : queries) {
        const TokenSeq qt = tokenize(q.text, q.id);
        if (qt.empty()) continue;
        AttackObjective objective{embedder.get(), embedder->embed(qt), type != AttackType::query_as_poison &&
                                                                           cfg.normalize_fragments};
        std::set<std::string> v(base_vocab);
        v.insert(qt.tokens.begin(), qt.tokens.end());
        const std::vector<std::string> vocab(v.begin(), v.end());
        Rng rng(derive_seed(a_seed, q.id));
        const auto picks = rng.sample(bases.size(), std::min(a_per_query, bases.size()));
        for (std::size_t j = 0; j < picks.size(); ++j) {
          const TokenSeq base = document_tokens(bases.at(picks[j]));
          const std::string id = "poison-" + q.id + "-" + std::to_string(j);
          PoisonRecord rec;
          if (type == AttackType::query_as_poison) {
            rec = query_as_poison(qt, base, parse_position(a_position), objective);
          } else {
            AttackBudget b = a_budget;
            b.rng_seed = derive_seed(a_seed, id);
            rec = greedy_flip(base, vocab, b,
                              type == AttackType::greedy ? SlotMode::concentrated : SlotMode::spread,
                              objective);
          }
          rec.poison_id = id;
          rec.target_query_id = q.id;
          poisons.push_back(std::move(rec));
        }
      }
      std::vector<PoisonManifestEntry> manifest;
      if (!a_corpus.empty()) {
        auto inj = inject(load_corpus(a_corpus), poisons);
        if (!a_poisoned.empty()) write_corpus(inj.corpus, a_poisoned);
        manifest = std::move(inj.manifest);
      } else {
        for (const auto& p : poisons) manifest.push_back(manifest_entry(p));
      }
      write_manifest(manifest, a_out);
      std::cerr << "wrote " << manifest.size() << " poisons\n";
      return 0;
    }

    if (*table) {
      const auto t = condition_table(parse_method(t_method), t_np, t_na, t_nlo, t_nhi, t_klo, t_khi);
      std::cout << (t_json ? t.to_json().dump(2) + "\n" : t.to_text());
      return 0;
    }

    if (*fl) {
      CostParams cost;
      cost.R = parse_big(f_R);
      cost.D = parse_big(f_D);
      cost.n_e = parse_big(f_ne);
      cost.l = parse_big(f_l);
      cost.m = parse_big(f_m);
      cost.p = parse_big(f_p);
      cost.alpha = f_alpha;
      json j = json::object();
      for (auto m : {CostMethod::naive, CostMethod::ragpart_embed, CostMethod::ragpart_similarity,
                     CostMethod::ragmask}) {
        const BigInt v = flops(cost, m, f_N, f_k);
        j[std::string(cost_method_name(m))] = {{"flops", v.str()}, {"scientific", scientific(v)}};
      }
      if (f_json) {
        std::cout << j.dump(2) << "\n";
      } else {
        for (const auto& [name, v] : j.items()) {
          std::cout << name << "\t" << v["flops"].get<std::string>() << "\t"
                    << v["scientific"].get<std::string>() << "\n";
        }
      }
      return 0;
    }

    if (*sim) {
      const auto method = parse_method(s_method);
      const auto r = worst_case_simulation(method, s_params, s_trials, s_seed);
      json j{{"method", method_name(method)},
             {"N", s_params.N}, {"k", s_params.k}, {"n_p", s_params.n_p},
             {"n_a", s_params.n_a}, {"p", s_params.p},
             {"trials", r.trials}, {"adversary_hits", r.adversary_hits},
             {"adversary_retrieved_rate", r.adversary_retrieved_rate},
             {"robustness_holds", robustness_holds(method, s_params)}};
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (*eval) {
      const std::filesystem::path cfg_path(v_config);
      json j = json::parse(read_file(cfg_path));
      if (v_workers > 0) j["workers"] = v_workers;
      const ExperimentConfig cfg = experiment_config_from_json(j, cfg_path.parent_path());
      const ExperimentReport report = run_experiment(cfg);
      write_text(v_out, report.dump());
      if (!v_results.empty()) write_file(v_results, report.results_jsonl());
      return report.partial() ? 2 : 0;
    }

    if (*synth) {
      const SynthData data = generate_synthetic(y_cfg);
      const std::filesystem::path dir(y_dir);
      std::filesystem::create_directories(dir);
      write_corpus(data.corpus, dir / "corpus.jsonl");
      write_queries(data.queries, dir / "queries.jsonl");
      write_qrels(data.qrels, dir / "qrels.tsv");
      Corpus bases;
      std::set<std::string> seen;
      for (const auto& [_, ids] : data.bases) {
        for (const auto& id : ids) {
          if (seen.insert(id).second) bases.add(data.corpus.get(id));
        }
      }
      write_corpus(bases, dir / "bases.jsonl");
      return 0;
    }
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

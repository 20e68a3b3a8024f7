#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragshield/attacks.hpp"
#include "ragshield/corpus.hpp"
#include "ragshield/embedder.hpp"
#include "ragshield/ragpart.hpp"
#include "ragshield/synthetic.hpp"

namespace ragshield {

enum class DefenseKind { none, ragpart, naive_combo, ragmask };

std::string_view defense_name(DefenseKind d) noexcept;
DefenseKind parse_defense(std::string_view s);

struct AttackSpec {
  /// When set, poisons are read from this manifest instead of generated.
  std::string manifest;
  /// Generated attack; ignored with a manifest. nullopt means no attack.
  std::optional<AttackType> type = AttackType::query_as_poison;
  InsertPosition position = InsertPosition::prepend;
  std::size_t bases_per_query = 3;
  AttackBudget budget;
  /// Extra corpus tokens offered to the greedy search next to the query's.
  std::size_t vocab_sample = 100;
};

/// A sweep value for delta: a number, or "auto" for calibration.
using DeltaValue = std::variant<double, std::string>;

struct ExperimentConfig {
  EmbedderConfig embedder;
  /// Either files or a synthetic benchmark.
  std::string corpus_path;
  std::string queries_path;
  std::string qrels_path;
  std::optional<SynthConfig> synthetic;

  AttackSpec attack;
  DefenseKind defense = DefenseKind::none;
  AggregationStrategy aggregation = AggregationStrategy::majority_vote;
  std::size_t p = 10;
  std::uint64_t rng_seed = 7;

  std::vector<std::size_t> N{5};
  std::vector<std::size_t> k{3};
  std::vector<std::size_t> m{10};
  std::vector<DeltaValue> delta{0.01};
  std::vector<double> alpha{2.0};
  /// Quantile of benign per-segment similarity drops used for delta "auto".
  double delta_quantile = 0.95;

  std::size_t workers = 1;
  /// Adds wall-clock seconds to the report, which then stops being
  /// reproducible byte for byte.
  bool record_timing = false;

  /// Throws UsageError (bad values) and checks referenced files exist.
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Resolves relative paths against base_dir.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir = {});

struct QueryOutcome {
  std::string query_id;
  std::vector<std::string> retrieved;
  bool attacked = false;
  bool judged = false;
  bool poison_hit = false;
  bool golden_hit = false;
};

struct ExperimentReport {
  /// Summary with sorted keys.
  nlohmann::json summary;
  /// One entry per grid point, in grid order.
  std::vector<std::vector<QueryOutcome>> outcomes;
  std::size_t failed_points = 0;

  bool partial() const noexcept { return failed_points > 0; }
  /// summary.dump(2) plus a trailing newline.
  std::string dump() const;
  /// One JSON line per (point, query).
  std::string results_jsonl() const;
};

/// Runs the no-defense baseline and the configured defense for every grid
/// point on the same poisoned corpus. A failing point is recorded and the
/// remaining points still run; input and setup failures throw.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Benign per-segment drops v - v' over the candidate pools of an unpoisoned
/// corpus, at the given quantile (nearest rank). Used for delta "auto".
double calibrate_delta(const std::vector<TokenSeq>& docs, const std::vector<Embedding>& queries,
                       std::size_t m, std::size_t pool, double quantile, Embedder& embedder);

/// Calls fn(i) for i in [0, n) on up to `workers` threads. The lowest-index
/// exception is rethrown after all threads finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace ragshield

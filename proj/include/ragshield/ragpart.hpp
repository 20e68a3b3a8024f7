#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ragshield/vector_index.hpp"

namespace ragshield {

enum class AggregationStrategy { majority_vote, intersection };

std::string_view strategy_name(AggregationStrategy s) noexcept;
AggregationStrategy parse_strategy(std::string_view s);

struct AggregationConfig {
  AggregationStrategy strategy = AggregationStrategy::majority_vote;
  std::size_t p = 10;
  /// Seed for the intersection fallback draw.
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Per-document verdict of the mask-and-rescore sanitizer.
struct SanitizedDoc {
  std::string doc_id;
  std::vector<bool> kept_segments;
  TokenSeq sanitized_tokens;
  float original_score = 0.0f;
  float sanitized_score = 0.0f;
};

struct DefenseResult {
  std::vector<std::string> final_docs;
  std::vector<RankedList> per_combo_lists;
  std::map<std::string, std::uint32_t> vote_counts;
  /// Set when intersection aggregation found no common document and drew
  /// from the union instead; holds the seed used.
  std::optional<std::uint64_t> fallback_seed;
  /// Filled by the RAGMask path, in candidate-pool order.
  std::vector<SanitizedDoc> mask_decisions;
};

/// top_p on every combination database, in combo_id order.
std::vector<RankedList> retrieve_per_combination(const Index& index, const Embedding& query,
                                                 std::size_t p);

/// The p most frequent documents across lists. Ties: best (lowest) rank
/// achieved in any list, then ascending doc_id. Output is in that order.
DefenseResult aggregate_majority(std::vector<RankedList> lists, std::size_t p);

/// Documents present in every list, by descending mean score (ties by
/// doc_id). When none is common, p documents are drawn uniformly from the
/// union with Rng(config.rng_seed).
DefenseResult aggregate_intersection(std::vector<RankedList> lists,
                                     const AggregationConfig& config);

DefenseResult aggregate(std::vector<RankedList> lists, const AggregationConfig& config);

/// retrieve_per_combination followed by aggregate.
DefenseResult ragpart_retrieve(const Index& index, const Embedding& query,
                               const AggregationConfig& config);

}  // namespace ragshield

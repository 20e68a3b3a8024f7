#include "ragshield/ragpart.hpp"

#include <algorithm>
#include <unordered_map>

#include "ragshield/error.hpp"
#include "ragshield/rng.hpp"

namespace ragshield {

std::string_view strategy_name(AggregationStrategy s) noexcept {
  return s == AggregationStrategy::majority_vote ? "vote" : "intersect";
}

AggregationStrategy parse_strategy(std::string_view s) {
  if (s == "vote" || s == "majority" || s == "majority_vote") return AggregationStrategy::majority_vote;
  if (s == "intersect" || s == "intersection") return AggregationStrategy::intersection;
  throw UsageError("unknown aggregation strategy '" + std::string(s) + "'");
}

void AggregationConfig::validate() const {
  if (p < 1) throw UsageError("aggregation: p must be >= 1");
}

std::vector<RankedList> retrieve_per_combination(const Index& index, const Embedding& query,
                                                 std::size_t p) {
  const std::uint64_t n = index.combo_count();
  std::vector<RankedList> out;
  out.reserve(n);
  for (std::uint64_t c = 0; c < n; ++c) {
    out.push_back(index.top_p(static_cast<std::uint32_t>(c), query, p));
  }
  return out;
}

namespace {

struct Tally {
  std::uint32_t count = 0;
  std::size_t best_rank = SIZE_MAX;
  double score_sum = 0.0;
};

std::unordered_map<std::string_view, Tally> tally(const std::vector<RankedList>& lists) {
  std::unordered_map<std::string_view, Tally> t;
  for (const auto& list : lists) {
    for (std::size_t r = 0; r < list.entries.size(); ++r) {
      auto& e = t[list.entries[r].doc_id];
      ++e.count;
      e.best_rank = std::min(e.best_rank, r);
      e.score_sum += list.entries[r].score;
    }
  }
  return t;
}

std::map<std::string, std::uint32_t> counts_of(
    const std::unordered_map<std::string_view, Tally>& t) {
  std::map<std::string, std::uint32_t> out;
  for (const auto& [id, e] : t) out.emplace(std::string(id), e.count);
  return out;
}

}  // namespace

DefenseResult aggregate_majority(std::vector<RankedList> lists, std::size_t p) {
  if (p < 1) throw UsageError("aggregate_majority: p must be >= 1");
  const auto t = tally(lists);
  std::vector<std::pair<std::string_view, Tally>> ranked(t.begin(), t.end());
  const std::size_t take = std::min(p, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take),
                    ranked.end(), [](const auto& a, const auto& b) {
                      if (a.second.count != b.second.count) return a.second.count > b.second.count;
                      if (a.second.best_rank != b.second.best_rank) {
                        return a.second.best_rank < b.second.best_rank;
                      }
                      return a.first < b.first;
                    });
  DefenseResult out;
  out.final_docs.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.final_docs.emplace_back(ranked[i].first);
  out.vote_counts = counts_of(t);
  out.per_combo_lists = std::move(lists);
  return out;
}

DefenseResult aggregate_intersection(std::vector<RankedList> lists,
                                     const AggregationConfig& config) {
  config.validate();
  const auto t = tally(lists);
  std::vector<std::pair<std::string_view, double>> common;
  for (const auto& [id, e] : t) {
    if (e.count == lists.size()) common.emplace_back(id, e.score_sum / static_cast<double>(e.count));
  }
  DefenseResult out;
  if (!common.empty()) {
    std::sort(common.begin(), common.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    for (std::size_t i = 0; i < std::min(config.p, common.size()); ++i) {
      out.final_docs.emplace_back(common[i].first);
    }
  } else if (!t.empty()) {
    std::vector<std::string_view> pool;
    pool.reserve(t.size());
    for (const auto& [id, e] : t) pool.push_back(id);
    std::sort(pool.begin(), pool.end());
    Rng rng(config.rng_seed);
    for (std::size_t i : rng.sample(pool.size(), std::min(config.p, pool.size()))) {
      out.final_docs.emplace_back(pool[i]);
    }
    out.fallback_seed = config.rng_seed;
  }
  out.vote_counts = counts_of(t);
  out.per_combo_lists = std::move(lists);
  return out;
}

DefenseResult aggregate(std::vector<RankedList> lists, const AggregationConfig& config) {
  if (config.strategy == AggregationStrategy::majority_vote) {
    return aggregate_majority(std::move(lists), config.p);
  }
  return aggregate_intersection(std::move(lists), config);
}

DefenseResult ragpart_retrieve(const Index& index, const Embedding& query,
                               const AggregationConfig& config) {
  config.validate();
  return aggregate(retrieve_per_combination(index, query, config.p), config);
}

}  // namespace ragshield

#include "ragshield/metrics.hpp"

#include <set>

namespace ragshield {

namespace {

std::optional<double> fraction(std::size_t hits, std::size_t total) {
  if (total == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

std::optional<double> asr(const RetrievalResults& results,
                          const std::vector<PoisonManifestEntry>& manifest) {
  std::map<std::string, std::set<std::string>> targeting;
  for (const auto& e : manifest) targeting[e.target_query_id].insert(e.poison_id);
  std::size_t attacked = 0, hits = 0;
  for (const auto& [qid, docs] : results) {
    auto it = targeting.find(qid);
    if (it == targeting.end()) continue;
    ++attacked;
    for (const auto& d : docs) {
      if (it->second.count(d) != 0) {
        ++hits;
        break;
      }
    }
  }
  return fraction(hits, attacked);
}

std::optional<double> sr(const RetrievalResults& results, const Qrels& qrels) {
  std::size_t judged = 0, hits = 0;
  for (const auto& [qid, docs] : results) {
    const auto* golden = qrels.find(qid);
    if (golden == nullptr || golden->empty()) continue;
    ++judged;
    for (const auto& d : docs) {
      if (golden->count(d) != 0) {
        ++hits;
        break;
      }
    }
  }
  return fraction(hits, judged);
}

}  // namespace ragshield

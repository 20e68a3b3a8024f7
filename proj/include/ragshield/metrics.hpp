#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ragshield/attacks.hpp"
#include "ragshield/corpus.hpp"

namespace ragshield {

/// query_id -> final retrieved doc ids.
using RetrievalResults = std::map<std::string, std::vector<std::string>>;

/// Fraction of attacked queries (at least one manifest poison targets them)
/// whose retrieved set contains a poison targeting that query. Queries with
/// no targeting poison are skipped; nullopt when none is attacked.
std::optional<double> asr(const RetrievalResults& results,
                          const std::vector<PoisonManifestEntry>& manifest);

/// Fraction of judged queries (nonempty qrels) whose retrieved set contains a
/// golden document. nullopt when no query is judged.
std::optional<double> sr(const RetrievalResults& results, const Qrels& qrels);

}  // namespace ragshield

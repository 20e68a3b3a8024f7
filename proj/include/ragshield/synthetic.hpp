#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragshield/corpus.hpp"

namespace ragshield {

/// Generator for a small topical retrieval benchmark.
///
/// Each query is a string of distinct topic words. Its golden passages are
/// built from short "sentences": a contiguous 2-3 word phrase of the query,
/// a few words from a small per-topic vocabulary, and sometimes one
/// background word. The rest of the corpus is background filler drawn from a
/// large vocabulary; those documents are judged for no query and serve as
/// base documents for poisoning.
struct SynthConfig {
  std::size_t n_docs = 1000;
  std::size_t n_queries = 64;
  std::size_t golden_per_query = 12;
  std::size_t query_len = 6;
  std::size_t sentences = 5;
  std::size_t phrase_min = 2;
  std::size_t phrase_max = 3;
  std::size_t topic_vocab = 4;
  std::size_t topic_words_per_sentence = 3;
  double background_word_prob = 0.5;
  std::size_t background_vocab = 4000;
  std::size_t filler_min = 10;
  std::size_t filler_max = 20;
  std::size_t bases_per_query = 3;
  std::uint64_t seed = 7;

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

struct SynthData {
  Corpus corpus;
  std::vector<Query> queries;
  Qrels qrels;
  /// query_id -> disjoint background doc ids to poison.
  std::map<std::string, std::vector<std::string>> bases;
};

SynthData generate_synthetic(const SynthConfig& config);

/// Deterministic pronounceable word for an integer; distinct for distinct i.
std::string pseudo_word(std::size_t i);

}  // namespace ragshield

#pragma once

#include <string>
#include <vector>

#include "ragshield/embedder.hpp"
#include "ragshield/rng.hpp"

namespace ragshield::testing {

inline std::vector<std::string> word_list(std::size_t n, const std::string& prefix = "w") {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i));
  return v;
}

inline TokenSeq random_tokens(Rng& rng, const std::vector<std::string>& vocab, std::size_t len,
                              std::string id = {}) {
  TokenSeq t;
  t.source_id = std::move(id);
  for (std::size_t i = 0; i < len; ++i) t.tokens.push_back(vocab[rng.below(vocab.size())]);
  return t;
}

inline TokenSeq toks(std::initializer_list<const char*> words, std::string id = {}) {
  TokenSeq t;
  t.source_id = std::move(id);
  for (const char* w : words) t.tokens.emplace_back(w);
  return t;
}

inline EmbedderConfig unigram_config(std::size_t dim = 512) {
  EmbedderConfig c;
  c.dim = dim;
  c.ngram_orders = {1};
  return c;
}

inline Embedding basis(std::size_t dim, std::size_t i, float v = 1.0f) {
  std::vector<float> x(dim, 0.0f);
  x[i] = v;
  return Embedding(std::move(x));
}

}  // namespace ragshield::testing

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ragshield/embedder.hpp"
#include "ragshield/embedding.hpp"

namespace ragshield {

/// Exact binomial coefficient; 0 when k < 0 or k > n. Throws UsageError on
/// u64 overflow.
std::uint64_t binomial(std::int64_t n, std::int64_t k);

/// N contiguous fragments. fragments[i] concatenated in order reproduce the
/// source tokens; sizes differ by at most one, larger ones first.
struct FragmentSet {
  std::string doc_id;
  std::vector<TokenSeq> fragments;

  std::size_t count() const noexcept { return fragments.size(); }
};

/// Split into N contiguous spans: with L tokens, the first L mod N spans get
/// ceil(L/N) tokens and the rest floor(L/N); when L < N the trailing N - L
/// spans are empty. Throws UsageError when N == 0.
FragmentSet partition(const TokenSeq& tokens, std::size_t n_fragments);

/// A k-subset of fragment indices, strictly increasing.
class Combination {
 public:
  /// Sorts and validates; throws UsageError on duplicates, out-of-range
  /// indices or an empty set.
  Combination(std::vector<std::uint32_t> indices, std::size_t n_fragments);

  std::span<const std::uint32_t> indices() const noexcept { return indices_; }
  std::size_t k() const noexcept { return indices_.size(); }
  bool contains(std::uint32_t i) const noexcept;

  /// Position in colexicographic order: sum over j of C(indices[j], j + 1).
  /// Independent of N.
  std::uint64_t rank() const noexcept;
  static Combination unrank(std::uint64_t rank, std::size_t k, std::size_t n_fragments);

  friend bool operator==(const Combination&, const Combination&) = default;

 private:
  std::vector<std::uint32_t> indices_;
};

/// All C(N, k) subsets in colex order, so element i has rank() == i.
/// Throws UsageError unless 1 <= k <= N.
std::vector<Combination> enumerate_combinations(std::size_t n_fragments, std::size_t k);

enum class CombineMethod : std::uint8_t { ragpart = 0, naive = 1 };

std::string_view method_name(CombineMethod m) noexcept;
CombineMethod parse_method(std::string_view s);

struct ComboEmbedding {
  std::string doc_id;
  std::uint32_t combo_id;
  Embedding vector;
  CombineMethod method;
};

/// Mean of the selected fragment embeddings, each unit-normalized first when
/// normalize_fragments (zeros pass through). Summed in ascending fragment
/// order, then divided by k.
Embedding ragpart_embedding(std::span<const Embedding> fragment_embeddings,
                            const Combination& combo, bool normalize_fragments);

/// Overload for fragments that are already prepared (normalized or not).
Embedding mean_pool(std::span<const Embedding> prepared, const Combination& combo);

/// Selected fragments concatenated in ascending order and embedded once.
Embedding naive_embedding(const FragmentSet& fragments, const Combination& combo,
                          Embedder& embedder);

struct PoolingStats {
  std::uint64_t embed_calls = 0;
  std::uint64_t pool_ops = 0;
};

/// Every combination embedding of one document, in combo_id order. RAGPart
/// embeds N fragments and pools C(N, k) times; naive embeds C(N, k) texts.
/// The naive vectors are passed through Embedder::prepare so both methods
/// are scored on the same scale.
std::vector<ComboEmbedding> combination_embeddings(const TokenSeq& doc, std::size_t n_fragments,
                                                   std::size_t k, CombineMethod method,
                                                   Embedder& embedder,
                                                   PoolingStats* stats = nullptr);

}  // namespace ragshield

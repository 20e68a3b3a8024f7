#include "ragshield/fragmenter.hpp"

#include <algorithm>

#include "ragshield/error.hpp"
#include "ragshield/kernels.hpp"

namespace ragshield {

std::uint64_t binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 acc = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    // acc * (n - k + i) / i is exact at every step.
    acc = acc * static_cast<unsigned __int128>(n - k + i) / static_cast<unsigned __int128>(i);
    if (acc > UINT64_MAX) throw UsageError("binomial: C(n,k) overflows 64 bits");
  }
  return static_cast<std::uint64_t>(acc);
}

FragmentSet partition(const TokenSeq& tokens, std::size_t n_fragments) {
  if (n_fragments == 0) throw UsageError("partition: N must be >= 1");
  FragmentSet out;
  out.doc_id = tokens.source_id;
  out.fragments.resize(n_fragments);
  const std::size_t len = tokens.size();
  const std::size_t base = len / n_fragments;
  const std::size_t extra = len % n_fragments;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n_fragments; ++i) {
    const std::size_t size = base + (i < extra ? 1 : 0);
    auto& frag = out.fragments[i];
    frag.source_id = tokens.source_id;
    frag.tokens.assign(tokens.tokens.begin() + static_cast<std::ptrdiff_t>(pos),
                       tokens.tokens.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return out;
}

Combination::Combination(std::vector<std::uint32_t> indices, std::size_t n_fragments)
    : indices_(std::move(indices)) {
  if (indices_.empty()) throw UsageError("combination: k must be >= 1");
  std::sort(indices_.begin(), indices_.end());
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] >= n_fragments) {
      throw UsageError("combination: index " + std::to_string(indices_[i]) + " out of range for N=" +
                       std::to_string(n_fragments));
    }
    if (i != 0 && indices_[i] == indices_[i - 1]) {
      throw UsageError("combination: duplicate index " + std::to_string(indices_[i]));
    }
  }
}

bool Combination::contains(std::uint32_t i) const noexcept {
  return std::binary_search(indices_.begin(), indices_.end(), i);
}

std::uint64_t Combination::rank() const noexcept {
  std::uint64_t r = 0;
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    r += binomial(indices_[j], static_cast<std::int64_t>(j + 1));
  }
  return r;
}

Combination Combination::unrank(std::uint64_t rank, std::size_t k, std::size_t n_fragments) {
  if (k == 0 || k > n_fragments) throw UsageError("combination: need 1 <= k <= N");
  if (rank >= binomial(static_cast<std::int64_t>(n_fragments), static_cast<std::int64_t>(k))) {
    throw UsageError("combination: rank out of range");
  }
  std::vector<std::uint32_t> idx(k);
  // Greedy decoding of the combinatorial number system, largest element first.
  std::int64_t c = static_cast<std::int64_t>(n_fragments) - 1;
  for (std::size_t j = k; j > 0; --j) {
    while (binomial(c, static_cast<std::int64_t>(j)) > rank) --c;
    idx[j - 1] = static_cast<std::uint32_t>(c);
    rank -= binomial(c, static_cast<std::int64_t>(j));
    --c;
  }
  return Combination(std::move(idx), n_fragments);
}

std::vector<Combination> enumerate_combinations(std::size_t n_fragments, std::size_t k) {
  if (k == 0 || k > n_fragments) {
    throw UsageError("enumerate_combinations: need 1 <= k <= N (got N=" +
                     std::to_string(n_fragments) + ", k=" + std::to_string(k) + ")");
  }
  std::vector<Combination> out;
  out.reserve(binomial(static_cast<std::int64_t>(n_fragments), static_cast<std::int64_t>(k)));
  std::vector<std::uint32_t> cur(k);
  for (std::size_t i = 0; i < k; ++i) cur[i] = static_cast<std::uint32_t>(i);
  while (true) {
    out.emplace_back(cur, n_fragments);
    // Colex successor: bump the lowest position that can move, reset below it.
    std::size_t j = 0;
    while (j < k && cur[j] + 1 == (j + 1 < k ? cur[j + 1] : n_fragments)) ++j;
    if (j == k) break;
    ++cur[j];
    for (std::size_t i = 0; i < j; ++i) cur[i] = static_cast<std::uint32_t>(i);
  }
  return out;
}

std::string_view method_name(CombineMethod m) noexcept {
  return m == CombineMethod::ragpart ? "ragpart" : "naive";
}

CombineMethod parse_method(std::string_view s) {
  if (s == "ragpart") return CombineMethod::ragpart;
  if (s == "naive") return CombineMethod::naive;
  throw UsageError("unknown combination method '" + std::string(s) + "'");
}

Embedding mean_pool(std::span<const Embedding> prepared, const Combination& combo) {
  const auto idx = combo.indices();
  if (idx.back() >= prepared.size()) {
    throw UsageError("ragpart_embedding: combination refers past the fragment list");
  }
  const std::size_t dim = prepared[idx.front()].dim();
  const auto& k = kernels::active();
  EmbeddingBuilder b(dim);
  auto acc = b.values();
  for (std::uint32_t i : idx) {
    if (prepared[i].dim() != dim) throw UsageError("ragpart_embedding: dimension mismatch");
    k.add_into(acc.data(), prepared[i].data(), dim);
  }
  k.divide(acc.data(), static_cast<float>(idx.size()), dim);
  return std::move(b).finish();
}

Embedding ragpart_embedding(std::span<const Embedding> fragment_embeddings,
                            const Combination& combo, bool normalize_fragments) {
  if (!normalize_fragments) return mean_pool(fragment_embeddings, combo);
  std::vector<Embedding> prepared(fragment_embeddings.size());
  for (std::uint32_t i : combo.indices()) {
    if (i < fragment_embeddings.size()) prepared[i] = normalize(fragment_embeddings[i]);
  }
  // Unselected slots stay default-constructed; mean_pool never reads them.
  return mean_pool(prepared, combo);
}

Embedding naive_embedding(const FragmentSet& fragments, const Combination& combo,
                          Embedder& embedder) {
  TokenSeq joined;
  joined.source_id = fragments.doc_id;
  for (std::uint32_t i : combo.indices()) {
    if (i >= fragments.count()) throw UsageError("naive_embedding: combination out of range");
    const auto& t = fragments.fragments[i].tokens;
    joined.tokens.insert(joined.tokens.end(), t.begin(), t.end());
  }
  return embedder.embed(joined);
}

std::vector<ComboEmbedding> combination_embeddings(const TokenSeq& doc, std::size_t n_fragments,
                                                   std::size_t k, CombineMethod method,
                                                   Embedder& embedder, PoolingStats* stats) {
  const FragmentSet frags = partition(doc, n_fragments);
  const auto combos = enumerate_combinations(n_fragments, k);
  std::vector<ComboEmbedding> out;
  out.reserve(combos.size());
  if (method == CombineMethod::ragpart) {
    std::vector<Embedding> prepared;
    prepared.reserve(n_fragments);
    for (const auto& f : frags.fragments) prepared.push_back(embedder.embed_prepared(f));
    if (stats != nullptr) stats->embed_calls += n_fragments;
    for (const auto& c : combos) {
      out.push_back({doc.source_id, static_cast<std::uint32_t>(c.rank()), mean_pool(prepared, c),
                     method});
    }
    if (stats != nullptr) stats->pool_ops += combos.size();
  } else {
    for (const auto& c : combos) {
      out.push_back({doc.source_id, static_cast<std::uint32_t>(c.rank()),
                     embedder.prepare(naive_embedding(frags, c, embedder)), method});
    }
    if (stats != nullptr) stats->embed_calls += combos.size();
  }
  return out;
}

}  // namespace ragshield

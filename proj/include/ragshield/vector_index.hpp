#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ragshield/embedding.hpp"
#include "ragshield/fragmenter.hpp"

namespace ragshield {

struct IndexEntry {
  std::string doc_id;
  std::uint32_t combo_id = 0;
  Embedding vector;

  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

struct RankedDoc {
  std::string doc_id;
  float score;

  friend bool operator==(const RankedDoc&, const RankedDoc&) = default;
};

/// Descending by score, ties by ascending doc_id.
struct RankedList {
  std::vector<RankedDoc> entries;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }
  bool contains(std::string_view doc_id) const noexcept;
};

/// Describes how the vectors were produced. Single-vector (full document)
/// indexes use N = k = 1.
struct IndexMeta {
  std::uint32_t n_fragments = 1;
  std::uint32_t k = 1;
  CombineMethod method = CombineMethod::ragpart;
  std::uint64_t embedder_fingerprint = 0;

  std::uint64_t combo_count() const { return binomial(n_fragments, k); }
  friend bool operator==(const IndexMeta&, const IndexMeta&) = default;
};

/// Immutable, exact inner-product index with one database per combo_id.
///
/// Rows of each database are kept sorted by doc_id, so the tie rule (lower
/// doc_id first) is an ordinal comparison. Vectors are stored in the panel
/// layout consumed by the SIMD scorers.
class Index {
 public:
  /// Throws BuildError on a duplicate (doc_id, combo_id), a dimension
  /// mismatch or a combo_id outside [0, C(N, k)).
  static Index build(std::vector<IndexEntry> entries, const IndexMeta& meta);

  const IndexMeta& meta() const noexcept { return meta_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entry_count_; }
  std::size_t doc_count() const noexcept { return doc_ids_.size(); }
  std::uint64_t combo_count() const { return meta_.combo_count(); }

  /// Sorted distinct doc ids.
  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }

  /// Top p docs of one combination database. Throws UsageError for p == 0,
  /// an unknown combo_id or a query of the wrong dimension.
  RankedList top_p(std::uint32_t combo_id, const Embedding& query, std::size_t p) const;

  /// Scores of every row of a combination database, in row (doc_id) order.
  std::vector<std::pair<std::uint32_t, float>> score_all(std::uint32_t combo_id,
                                                         const Embedding& query) const;

  /// Entries in canonical order: combo_id ascending, then doc_id ascending.
  std::vector<IndexEntry> entries() const;

  /// Writes the RGSIDX1 format. Throws Error when the file cannot be written.
  void save(const std::filesystem::path& path) const;
  /// Throws FormatError on bad magic, truncation or inconsistent counts.
  static Index load(const std::filesystem::path& path);

  std::string serialize() const;
  static Index deserialize(std::string_view bytes);

  friend bool operator==(const Index& a, const Index& b);

 private:
  struct Database {
    std::vector<std::uint32_t> doc_ordinals;  // ascending
    std::vector<float> panels;
  };

  IndexMeta meta_;
  std::size_t dim_ = 0;
  std::size_t entry_count_ = 0;
  std::vector<std::string> doc_ids_;
  std::map<std::uint32_t, Database> databases_;
};

inline constexpr char kIndexMagic[] = "RGSIDX1";

/// Convenience: embeds and indexes every document.
Index build_combination_index(const std::vector<TokenSeq>& docs, std::size_t n_fragments,
                              std::size_t k, CombineMethod method, Embedder& embedder,
                              PoolingStats* stats = nullptr);

}  // namespace ragshield

#include "ragshield/vector_index.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "ragshield/error.hpp"
#include "ragshield/kernels.hpp"

namespace ragshield {

namespace {

constexpr std::size_t kMagicLen = sizeof(kIndexMagic) - 1;

class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::string take() && { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
  std::uint32_t u32() {
    auto s = bytes(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto s = bytes(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  bool done() const noexcept { return pos_ == in_.size(); }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("index: truncated file");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

bool RankedList::contains(std::string_view doc_id) const noexcept {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const RankedDoc& d) { return d.doc_id == doc_id; });
}

Index Index::build(std::vector<IndexEntry> entries, const IndexMeta& meta) {
  if (meta.k < 1 || meta.k > meta.n_fragments) throw BuildError("index: need 1 <= k <= N");
  const std::uint64_t combos = meta.combo_count();
  Index idx;
  idx.meta_ = meta;
  idx.entry_count_ = entries.size();
  if (entries.empty()) return idx;
  idx.dim_ = entries.front().vector.dim();
  if (idx.dim_ == 0) throw BuildError("index: zero-dimensional vectors");

  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (e.vector.dim() != idx.dim_) {
      throw BuildError("index: entry (" + e.doc_id + ", " + std::to_string(e.combo_id) +
                       ") has dimension " + std::to_string(e.vector.dim()) + ", expected " +
                       std::to_string(idx.dim_));
    }
    if (e.combo_id >= combos) {
      throw BuildError("index: entry (" + e.doc_id + ", " + std::to_string(e.combo_id) +
                       ") has combo_id outside [0, " + std::to_string(combos) + ")");
    }
    ids.insert(e.doc_id);
  }
  idx.doc_ids_.assign(ids.begin(), ids.end());

  std::sort(entries.begin(), entries.end(), [](const IndexEntry& a, const IndexEntry& b) {
    return a.combo_id != b.combo_id ? a.combo_id < b.combo_id : a.doc_id < b.doc_id;
  });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].combo_id == entries[i - 1].combo_id &&
        entries[i].doc_id == entries[i - 1].doc_id) {
      throw BuildError("index: duplicate entry (" + entries[i].doc_id + ", " +
                       std::to_string(entries[i].combo_id) + ")");
    }
  }

  std::size_t begin = 0;
  while (begin < entries.size()) {
    std::size_t end = begin;
    while (end < entries.size() && entries[end].combo_id == entries[begin].combo_id) ++end;
    Database db;
    std::vector<float> rows;
    rows.reserve((end - begin) * idx.dim_);
    for (std::size_t i = begin; i < end; ++i) {
      auto it = std::lower_bound(idx.doc_ids_.begin(), idx.doc_ids_.end(), entries[i].doc_id);
      db.doc_ordinals.push_back(static_cast<std::uint32_t>(it - idx.doc_ids_.begin()));
      auto v = entries[i].vector.values();
      rows.insert(rows.end(), v.begin(), v.end());
    }
    db.panels = kernels::pack_panels(rows, end - begin, idx.dim_);
    idx.databases_.emplace(entries[begin].combo_id, std::move(db));
    begin = end;
  }
  return idx;
}

std::vector<std::pair<std::uint32_t, float>> Index::score_all(std::uint32_t combo_id,
                                                              const Embedding& query) const {
  if (combo_id >= combo_count()) {
    throw UsageError("top_p: unknown combo_id " + std::to_string(combo_id) + " (index has " +
                     std::to_string(combo_count()) + ")");
  }
  auto it = databases_.find(combo_id);
  if (it == databases_.end()) return {};
  if (query.dim() != dim_) {
    throw UsageError("top_p: query dimension " + std::to_string(query.dim()) +
                     " does not match index dimension " + std::to_string(dim_));
  }
  const Database& db = it->second;
  const std::size_t rows = db.doc_ordinals.size();
  std::vector<float> scores(rows);
  kernels::active().score_panels(db.panels.data(), rows, dim_, query.data(), scores.data());
  std::vector<std::pair<std::uint32_t, float>> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = {db.doc_ordinals[r], scores[r]};
  return out;
}

RankedList Index::top_p(std::uint32_t combo_id, const Embedding& query, std::size_t p) const {
  if (p == 0) throw UsageError("top_p: p must be >= 1");
  auto scored = score_all(combo_id, query);
  const std::size_t take = std::min(p, scored.size());
  // Ordinals follow doc_id order, so ordinal comparison is the doc_id tie rule.
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), [](const auto& a, const auto& b) {
                      return a.second != b.second ? a.second > b.second : a.first < b.first;
                    });
  RankedList out;
  out.entries.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.entries.push_back({doc_ids_[scored[i].first], scored[i].second});
  }
  return out;
}

std::vector<IndexEntry> Index::entries() const {
  std::vector<IndexEntry> out;
  out.reserve(entry_count_);
  for (const auto& [combo, db] : databases_) {
    for (std::size_t r = 0; r < db.doc_ordinals.size(); ++r) {
      std::vector<float> v(dim_);
      const float* panel = db.panels.data() + (r / kernels::kPanelWidth) * kernels::kPanelWidth * dim_;
      for (std::size_t j = 0; j < dim_; ++j) v[j] = panel[j * kernels::kPanelWidth + r % kernels::kPanelWidth];
      out.push_back({doc_ids_[db.doc_ordinals[r]], combo, Embedding(std::move(v))});
    }
  }
  return out;
}

std::string Index::serialize() const {
  Writer w;
  w.bytes(std::string_view(kIndexMagic, kMagicLen));
  w.u32(static_cast<std::uint32_t>(dim_));
  w.u64(entry_count_);
  w.u64(doc_ids_.size());
  w.u32(meta_.n_fragments);
  w.u32(meta_.k);
  w.u8(static_cast<std::uint8_t>(meta_.method));
  w.u64(meta_.embedder_fingerprint);
  for (const auto& e : entries()) {
    w.u32(static_cast<std::uint32_t>(e.doc_id.size()));
    w.bytes(e.doc_id);
    w.u32(e.combo_id);
    for (float v : e.vector.values()) w.f32(v);
  }
  return std::move(w).take();
}

Index Index::deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < kMagicLen || r.bytes(kMagicLen) != std::string_view(kIndexMagic, kMagicLen)) {
    throw FormatError("index: bad magic (not an RGSIDX1 file)");
  }
  const std::uint32_t dim = r.u32();
  const std::uint64_t count = r.u64();
  const std::uint64_t doc_count = r.u64();
  IndexMeta meta;
  meta.n_fragments = r.u32();
  meta.k = r.u32();
  const std::uint8_t method = r.u8();
  if (method > 1) throw FormatError("index: unknown combination method code");
  meta.method = static_cast<CombineMethod>(method);
  meta.embedder_fingerprint = r.u64();
  if (meta.k < 1 || meta.k > meta.n_fragments) throw FormatError("index: invalid N/k in header");
  if (count != 0 && dim == 0) throw FormatError("index: zero dimension with nonzero entries");
  // Each record needs at least 8 bytes plus the vector.
  if (count > r.remaining() / (8 + 4ull * dim)) throw FormatError("index: truncated file");

  std::vector<IndexEntry> entries;
  entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32();
    std::string id(r.bytes(len));
    const std::uint32_t combo = r.u32();
    std::vector<float> v(dim);
    for (auto& x : v) x = r.f32();
    try {
      entries.push_back({std::move(id), combo, Embedding(std::move(v))});
    } catch (const DataError& e) {
      throw FormatError(std::string("index: ") + e.what());
    }
  }
  if (!r.done()) throw FormatError("index: trailing bytes after last record");
  Index idx;
  try {
    idx = build(std::move(entries), meta);
  } catch (const BuildError& e) {
    throw FormatError(std::string("index: ") + e.what());
  }
  if (idx.doc_count() != doc_count) throw FormatError("index: document count mismatch");
  if (count != 0 && idx.dim() != dim) throw FormatError("index: dimension mismatch");
  return idx;
}

void Index::save(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("index: cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("index: write to " + path.string() + " failed");
}

Index Index::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("index: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

bool operator==(const Index& a, const Index& b) {
  return a.meta_ == b.meta_ && a.dim_ == b.dim_ && a.entry_count_ == b.entry_count_ &&
         a.doc_ids_ == b.doc_ids_ && a.entries() == b.entries();
}

Index build_combination_index(const std::vector<TokenSeq>& docs, std::size_t n_fragments,
                              std::size_t k, CombineMethod method, Embedder& embedder,
                              PoolingStats* stats) {
  std::vector<IndexEntry> entries;
  entries.reserve(docs.size() * binomial(static_cast<std::int64_t>(n_fragments),
                                         static_cast<std::int64_t>(k)));
  for (const auto& d : docs) {
    for (auto& ce : combination_embeddings(d, n_fragments, k, method, embedder, stats)) {
      entries.push_back({std::move(ce.doc_id), ce.combo_id, std::move(ce.vector)});
    }
  }
  IndexMeta meta{static_cast<std::uint32_t>(n_fragments), static_cast<std::uint32_t>(k), method,
                 embedder.config().fingerprint()};
  return Index::build(std::move(entries), meta);
}

}  // namespace ragshield

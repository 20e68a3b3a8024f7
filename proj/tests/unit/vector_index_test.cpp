#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ragshield/error.hpp"
#include "ragshield/kernels.hpp"
#include "ragshield/vector_index.hpp"
#include "support.hpp"

using namespace ragshield;
using ragshield::testing::basis;

namespace {

std::string id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "d%05zu", i);
  return buf;
}

Embedding random_vec(Rng& rng, std::size_t dim, bool coarse) {
  std::vector<float> v(dim);
  // Coarse values force plenty of exact score ties.
  for (auto& x : v) x = coarse ? static_cast<float>(rng.between(-2, 2)) : static_cast<float>(rng.uniform() - 0.5);
  return Embedding(v);
}

std::vector<RankedDoc> oracle(const std::vector<IndexEntry>& entries, std::uint32_t combo,
                              const Embedding& q, std::size_t p) {
  std::vector<RankedDoc> all;
  for (const auto& e : entries) {
    if (e.combo_id != combo) continue;
    float s = 0.0f;
    for (std::size_t j = 0; j < q.dim(); ++j) s = s + e.vector[j] * q[j];
    all.push_back({e.doc_id, s});
  }
  std::sort(all.begin(), all.end(), [](const RankedDoc& a, const RankedDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  if (all.size() > p) all.resize(p);
  return all;
}

Index small_index() {
  std::vector<IndexEntry> e;
  for (std::size_t i = 0; i < 4; ++i) e.push_back({id(i), 0, basis(4, i)});
  return Index::build(e, {});
}

}  // namespace

TEST(Index, EmptyIndex) {
  const Index idx = Index::build({}, {});
  EXPECT_EQ(idx.size(), 0u);
  EXPECT_TRUE(idx.top_p(0, basis(4, 0), 3).empty());
}

TEST(Index, EntryCount) {
  std::vector<IndexEntry> e;
  for (std::size_t d = 0; d < 7; ++d) {
    for (std::uint32_t c = 0; c < 10; ++c) e.push_back({id(d), c, basis(3, c % 3)});
  }
  const Index idx = Index::build(e, {5, 3, CombineMethod::ragpart, 0});
  EXPECT_EQ(idx.size(), 70u);
  EXPECT_EQ(idx.doc_count(), 7u);
  EXPECT_EQ(idx.combo_count(), 10u);
}

TEST(Index, BuildErrors) {
  std::vector<IndexEntry> dup{{"a", 0, basis(2, 0)}, {"a", 0, basis(2, 1)}};
  EXPECT_THROW(Index::build(dup, {}), BuildError);
  std::vector<IndexEntry> dims{{"a", 0, basis(2, 0)}, {"b", 0, basis(3, 1)}};
  EXPECT_THROW(Index::build(dims, {}), BuildError);
  std::vector<IndexEntry> combo{{"a", 1, basis(2, 0)}};
  EXPECT_THROW(Index::build(combo, {}), BuildError);
}

TEST(TopP, ExactMatchFirst) {
  const Index idx = small_index();
  const auto r = idx.top_p(0, basis(4, 2), 4);
  ASSERT_EQ(r.size(), 4u);
  EXPECT_EQ(r.entries[0].doc_id, id(2));
  EXPECT_EQ(r.entries[0].score, 1.0f);
}

TEST(TopP, HandSetScores) {
  const float scores[] = {3, 1, 4, 1, 5};
  std::vector<IndexEntry> e;
  for (std::size_t i = 0; i < 5; ++i) e.push_back({id(i), 0, basis(1, 0, scores[i])});
  const auto r = Index::build(e, {}).top_p(0, basis(1, 0), 3);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r.entries[0].score, 5.0f);
  EXPECT_EQ(r.entries[1].score, 4.0f);
  EXPECT_EQ(r.entries[2].score, 3.0f);
  EXPECT_EQ(r.entries[0].doc_id, id(4));
}

TEST(TopP, TiesByDocId) {
  std::vector<IndexEntry> e{{"b", 0, basis(2, 0)}, {"a", 0, basis(2, 0)}, {"c", 0, basis(2, 1)}};
  const auto r = Index::build(e, {}).top_p(0, basis(2, 0), 2);
  EXPECT_EQ(r.entries[0].doc_id, "a");
  EXPECT_EQ(r.entries[1].doc_id, "b");
}

TEST(TopP, Errors) {
  const Index idx = small_index();
  EXPECT_THROW(idx.top_p(1, basis(4, 0), 1), UsageError);
  EXPECT_THROW(idx.top_p(0, basis(4, 0), 0), UsageError);
  EXPECT_THROW(idx.top_p(0, basis(3, 0), 1), UsageError);
}

// Property: matches a full sort on random databases with every kernel set.
TEST(TopP, MatchesSortOracle) {
  Rng rng(99);
  const kernels::Isa before = kernels::active().isa;
  for (int t = 0; t < 100; ++t) {
    const std::size_t docs = 1 + rng.below(t < 10 ? 2000 : 300);
    const std::size_t N = 1 + rng.below(4);
    const std::size_t k = 1 + rng.below(N);
    const std::size_t C = binomial(N, k);
    const std::size_t dim = 1 + rng.below(40);
    const bool coarse = rng.below(2) == 0;
    std::vector<IndexEntry> entries;
    for (std::size_t d = 0; d < docs && entries.size() < 10000; ++d) {
      for (std::uint32_t c = 0; c < C && entries.size() < 10000; ++c) {
        entries.push_back({id(rng.below(1000000)) + "_" + std::to_string(d), c, random_vec(rng, dim, coarse)});
      }
    }
    const Index idx = Index::build(entries, {static_cast<std::uint32_t>(N), static_cast<std::uint32_t>(k),
                                             CombineMethod::ragpart, 0});
    const Embedding q = random_vec(rng, dim, coarse);
    const std::size_t p = 1 + rng.below(25);
    for (kernels::Isa isa : kernels::available_isas()) {
      kernels::set_active(isa);
      for (std::uint32_t c = 0; c < C; ++c) {
        const auto got = idx.top_p(c, q, p);
        ASSERT_EQ(got.entries, oracle(entries, c, q, p)) << "trial " << t << " isa " << kernels::isa_name(isa);
      }
    }
  }
  kernels::set_active(before);
}

TEST(Persistence, RoundTripIsByteExact) {
  Rng rng(5);
  std::vector<IndexEntry> entries;
  for (std::size_t d = 0; d < 30; ++d) {
    for (std::uint32_t c = 0; c < 3; ++c) entries.push_back({id(d), c, random_vec(rng, 9, false)});
  }
  const Index idx = Index::build(entries, {3, 2, CombineMethod::naive, 0xfeedULL});
  const auto path = std::filesystem::temp_directory_path() / "ragshield_roundtrip.rgsidx";
  idx.save(path);
  const Index back = Index::load(path);
  EXPECT_TRUE(back == idx);
  EXPECT_EQ(back.meta(), idx.meta());
  EXPECT_EQ(back.serialize(), idx.serialize());
  const auto a = idx.entries(), b = back.entries();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].doc_id, b[i].doc_id);
    EXPECT_EQ(a[i].combo_id, b[i].combo_id);
    EXPECT_EQ(a[i].vector, b[i].vector);
  }
  std::filesystem::remove(path);
}

TEST(Persistence, HeaderLayout) {
  std::vector<IndexEntry> e{{"ab", 0, Embedding(std::vector<float>{1.0f, -2.0f})}};
  const std::string bytes = Index::build(e, {1, 1, CombineMethod::ragpart, 0x0102030405060708ULL}).serialize();
  // magic(7) dim(4) entries(8) docs(8) N(4) k(4) method(1) fingerprint(8)
  ASSERT_EQ(bytes.size(), 44u + 4 + 2 + 4 + 8);
  EXPECT_EQ(bytes.substr(0, 7), "RGSIDX1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 2u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[11]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[36]), 0x08u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[43]), 0x01u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[44]), 2u);
  EXPECT_EQ(bytes.substr(48, 2), "ab");
}

TEST(Persistence, TruncationIsFormatError) {
  const std::string bytes = small_index().serialize();
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    EXPECT_THROW(Index::deserialize(std::string_view(bytes).substr(0, cut)), FormatError) << cut;
  }
}

TEST(Persistence, CorruptionIsFormatError) {
  std::string bytes = small_index().serialize();
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(Index::deserialize(bad_magic), FormatError);
  EXPECT_THROW(Index::deserialize(bytes + "x"), FormatError);
  std::string bad_count = bytes;
  bad_count[11] = 9;
  EXPECT_THROW(Index::deserialize(bad_count), FormatError);
  EXPECT_THROW(Index::load("/nonexistent/idx.rgsidx"), Error);
}

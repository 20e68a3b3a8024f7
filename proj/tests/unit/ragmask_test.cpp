#include <gtest/gtest.h>

#include <map>

#include "ragshield/embedder.hpp"
#include "ragshield/error.hpp"
#include "ragshield/ragmask.hpp"
#include "ragshield/vector_index.hpp"
#include "support.hpp"

using namespace ragshield;
using namespace ragshield::testing;

namespace {

struct Fixture {
  ReferenceEmbedder embedder{unigram_config(256)};
  std::map<std::string, TokenSeq> docs;
  Index index;

  explicit Fixture(std::size_t n, std::uint64_t seed = 1) {
    Rng rng(seed);
    const auto vocab = word_list(200);
    std::vector<IndexEntry> entries;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "doc" + std::to_string(i);
      docs[id] = random_tokens(rng, vocab, 20 + rng.below(30), id);
      entries.push_back({id, 0, embedder.embed_prepared(docs[id])});
    }
    index = Index::build(entries, {1, 1, CombineMethod::ragpart, embedder.config().fingerprint()});
  }

  DocLookup lookup() const {
    return [this](const std::string& id) -> const TokenSeq& { return docs.at(id); };
  }
};

}  // namespace

TEST(Segment, Boundaries) {
  Rng rng(1);
  const TokenSeq t25 = random_tokens(rng, word_list(5), 25);
  EXPECT_EQ(segment(t25, 10), (std::vector<Segment>{{0, 10}, {10, 10}, {20, 5}}));
  const TokenSeq t20 = random_tokens(rng, word_list(5), 20);
  EXPECT_EQ(segment(t20, 10).size(), 2u);
  EXPECT_TRUE(segment(TokenSeq{}, 10).empty());
  EXPECT_EQ(segment(t20, 50), (std::vector<Segment>{{0, 20}}));
  EXPECT_THROW(segment(t20, 0), UsageError);
}

TEST(Segment, WithoutSegment) {
  const TokenSeq t = toks({"a", "b", "c", "d", "e"});
  EXPECT_EQ(without_segment(t, {1, 2}), toks({"a", "d", "e"}));
  EXPECT_EQ(without_segment(t, {0, 5}), TokenSeq{});
}

TEST(Config, Validation) {
  MaskConfig c;
  c.alpha = 1.0;
  EXPECT_THROW(c.validate(), UsageError);
  c = MaskConfig{};
  c.m = 0;
  EXPECT_THROW(c.validate(), UsageError);
  c = MaskConfig{};
  c.alpha = 1.5;
  c.p = 3;
  EXPECT_EQ(c.pool_size(), 5u);
}

TEST(Sanitize, HugeDeltaKeepsEverything) {
  ReferenceEmbedder emb(unigram_config(128));
  Rng rng(4);
  const auto vocab = word_list(50);
  const Embedding q = emb.embed_prepared(random_tokens(rng, vocab, 6));
  for (int t = 0; t < 50; ++t) {
    const TokenSeq doc = random_tokens(rng, vocab, 1 + rng.below(60));
    MaskConfig cfg;
    cfg.delta = 1e6;
    const auto s = sanitize(doc, q, cfg, emb);
    EXPECT_EQ(s.sanitized_tokens, doc);
    EXPECT_EQ(s.sanitized_score, s.original_score);
  }
}

TEST(Sanitize, QuerySegmentIsDiscarded) {
  ReferenceEmbedder emb(unigram_config(512));
  const TokenSeq query = toks({"apple", "banana", "cherry", "grape", "melon"});
  const Embedding q = emb.embed_prepared(query);
  TokenSeq doc = query;
  const auto filler = word_list(30, "filler");
  for (std::size_t i = 0; i < 25; ++i) doc.tokens.push_back(filler[i]);
  MaskConfig cfg;
  cfg.m = 5;
  cfg.delta = 0.01;
  const auto s = sanitize(doc, q, cfg, emb);
  ASSERT_EQ(s.kept_segments.size(), 6u);
  EXPECT_FALSE(s.kept_segments[0]);
  for (const auto& tok : query.tokens) {
    EXPECT_EQ(std::count(s.sanitized_tokens.tokens.begin(), s.sanitized_tokens.tokens.end(), tok), 0);
  }
  EXPECT_LT(s.sanitized_score, s.original_score);
}

TEST(Sanitize, AllDiscardedScoresZero) {
  ReferenceEmbedder emb(unigram_config(64));
  const TokenSeq doc = toks({"x", "y"});
  const Embedding q = emb.embed_prepared(doc);
  MaskConfig cfg;
  cfg.m = 1;
  cfg.delta = -10.0;  // nothing can pass
  const auto s = sanitize(doc, q, cfg, emb);
  EXPECT_TRUE(s.sanitized_tokens.empty());
  EXPECT_EQ(s.sanitized_score, 0.0f);
}

TEST(Sanitize, KeptSetGrowsWithDelta) {
  ReferenceEmbedder emb(unigram_config(128));
  Rng rng(21);
  const auto vocab = word_list(40);
  for (int t = 0; t < 40; ++t) {
    const TokenSeq doc = random_tokens(rng, vocab, 10 + rng.below(50));
    const Embedding q = emb.embed_prepared(random_tokens(rng, vocab, 5));
    const std::size_t m = 1 + rng.below(8);
    std::vector<bool> last;
    for (double delta : {-0.5, -0.01, 0.0, 0.001, 0.01, 0.05, 0.2, 1.0}) {
      const auto s = sanitize(doc, q, {m, delta, 2.0, 10}, emb);
      if (!last.empty()) {
        for (std::size_t i = 0; i < last.size(); ++i) {
          if (last[i]) EXPECT_TRUE(s.kept_segments[i]) << "delta " << delta;
        }
      }
      last = s.kept_segments;
    }
  }
}

TEST(Sanitize, CallCount) {
  ReferenceEmbedder emb(unigram_config(64));
  Rng rng(5);
  const auto vocab = word_list(20);
  const TokenSeq doc = random_tokens(rng, vocab, 37);
  const Embedding q = emb.embed_prepared(random_tokens(rng, vocab, 4));
  const auto before = emb.calls();
  sanitize(doc, q, {10, 0.01, 2.0, 10}, emb, 0.5f);
  EXPECT_EQ(emb.calls() - before, 4u + 1u);
  const auto mid = emb.calls();
  sanitize(doc, q, {10, 0.01, 2.0, 10}, emb);
  EXPECT_EQ(emb.calls() - mid, 4u + 2u);
}

TEST(Retrieve, PoolAndCalls) {
  Fixture f(40);
  const Embedding q = f.embedder.embed_prepared(f.docs["doc3"]);
  MaskConfig cfg{10, 0.01, 2.0, 5};
  const auto before = f.embedder.calls();
  const auto r = f.index.top_p(0, q, cfg.pool_size());
  const auto out = ragmask_retrieve(f.index, q, f.lookup(), cfg, f.embedder);
  ASSERT_EQ(out.mask_decisions.size(), 10u);
  std::uint64_t expected = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(out.mask_decisions[i].doc_id, r.entries[i].doc_id);
    expected += (f.docs[r.entries[i].doc_id].size() + 9) / 10 + 1;
  }
  EXPECT_EQ(f.embedder.calls() - before, expected);
  EXPECT_EQ(out.final_docs.size(), 5u);
  for (const auto& d : out.final_docs) EXPECT_TRUE(r.contains(d));
}

TEST(Retrieve, PoolCappedByCorpus) {
  Fixture f(3);
  const Embedding q = f.embedder.embed_prepared(f.docs["doc0"]);
  const auto out = ragmask_retrieve(f.index, q, f.lookup(), {10, 0.01, 2.0, 10}, f.embedder);
  EXPECT_EQ(out.mask_decisions.size(), 3u);
  EXPECT_EQ(out.final_docs.size(), 3u);
}

TEST(Retrieve, HugeDeltaMatchesPlainTopP) {
  Fixture f(60, 9);
  Rng rng(77);
  for (int t = 0; t < 20; ++t) {
    const Embedding q = f.embedder.embed_prepared(random_tokens(rng, word_list(200), 8));
    const auto out = ragmask_retrieve(f.index, q, f.lookup(), {7, 1e6, 2.0, 6}, f.embedder);
    const auto plain = f.index.top_p(0, q, 6);
    std::vector<std::string> ids;
    for (const auto& e : plain.entries) ids.push_back(e.doc_id);
    EXPECT_EQ(out.final_docs, ids);
  }
}

TEST(Retrieve, RequiresFullIndex) {
  ReferenceEmbedder emb(unigram_config(8));
  const Index idx = Index::build({}, {5, 3, CombineMethod::ragpart, 0});
  DocLookup none = [](const std::string&) -> const TokenSeq& { throw std::out_of_range("x"); };
  EXPECT_THROW(ragmask_retrieve(idx, basis(8, 0), none, {}, emb), UsageError);
}

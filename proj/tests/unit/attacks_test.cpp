#include <gtest/gtest.h>

#include <set>

#include "ragshield/attacks.hpp"
#include "ragshield/error.hpp"
#include "ragshield/fragmenter.hpp"
#include "ragshield/tokenizer.hpp"
#include "support.hpp"

using namespace ragshield;
using namespace ragshield::testing;

namespace {

AttackObjective raw_objective(Embedder& e, const TokenSeq& query) {
  return {&e, e.embed(query), false};
}

}  // namespace

TEST(QueryAsPoison, Prepend) {
  ReferenceEmbedder emb(unigram_config(64));
  const TokenSeq q = toks({"q1", "q2"}, "Q");
  const TokenSeq base = toks({"a", "b", "c"}, "B");
  const auto r = query_as_poison(q, base, InsertPosition::prepend, raw_objective(emb, q));
  EXPECT_EQ(r.poisoned_tokens, toks({"q1", "q2", "a", "b", "c"}));
  EXPECT_EQ(r.injected_spans, (std::vector<InjectedSpan>{{0, 2}}));
  EXPECT_EQ(r.base_doc_id, "B");
  EXPECT_EQ(r.target_query_id, "Q");
}

TEST(QueryAsPoison, PositionsAndEmptyBase) {
  ReferenceEmbedder emb(unigram_config(64));
  const TokenSeq q = toks({"x"});
  const auto obj = raw_objective(emb, q);
  EXPECT_EQ(query_as_poison(q, toks({"a", "b", "c"}), InsertPosition::append, obj).poisoned_tokens,
            toks({"a", "b", "c", "x"}));
  EXPECT_EQ(query_as_poison(q, toks({"a", "b", "c"}), InsertPosition::middle, obj).poisoned_tokens,
            toks({"a", "x", "b", "c"}));
  const auto empty = query_as_poison(q, TokenSeq{}, InsertPosition::middle, obj);
  EXPECT_EQ(empty.poisoned_tokens, q);
  EXPECT_THROW(query_as_poison(TokenSeq{}, toks({"a"}), InsertPosition::prepend, obj), UsageError);
}

// With a unigram embedder the poisoned score is the base score plus the
// query's self-similarity.
TEST(QueryAsPoison, AdditivityOracle) {
  ReferenceEmbedder emb(unigram_config(256));
  Rng rng(31);
  const auto vocab = word_list(300);
  for (int t = 0; t < 200; ++t) {
    const TokenSeq q = random_tokens(rng, vocab, 1 + rng.below(8));
    const TokenSeq base = random_tokens(rng, vocab, rng.below(40));
    const auto obj = raw_objective(emb, q);
    const auto r = query_as_poison(q, base, static_cast<InsertPosition>(rng.below(3)), obj);
    const float expected = similarity(emb.embed(base), obj.query_emb) + similarity(obj.query_emb, obj.query_emb);
    EXPECT_EQ(r.achieved_similarity, expected);
  }
}

TEST(StripSpans, RecoversBase) {
  ReferenceEmbedder emb(unigram_config(64));
  Rng rng(6);
  const auto vocab = word_list(30);
  for (int t = 0; t < 100; ++t) {
    const TokenSeq base = random_tokens(rng, vocab, rng.below(30));
    const TokenSeq q = random_tokens(rng, vocab, 1 + rng.below(5));
    const auto obj = raw_objective(emb, q);
    const auto r1 = query_as_poison(q, base, static_cast<InsertPosition>(rng.below(3)), obj);
    EXPECT_EQ(strip_spans(r1.poisoned_tokens, r1.injected_spans), base);
    AttackBudget b{1 + rng.below(6), 5, 4, rng.next()};
    const auto r2 = greedy_flip(base, vocab, b, static_cast<SlotMode>(rng.below(2)), obj);
    EXPECT_EQ(r2.poisoned_tokens.size(), base.size() + b.n_tokens);
    EXPECT_EQ(strip_spans(r2.poisoned_tokens, r2.injected_spans), base);
  }
  EXPECT_THROW(strip_spans(toks({"a"}), {{0, 2}}), UsageError);
}

TEST(Greedy, DeterministicAndNeverWorse) {
  ReferenceEmbedder emb(unigram_config(128));
  Rng rng(12);
  const auto vocab = word_list(80);
  for (int t = 0; t < 30; ++t) {
    const TokenSeq q = random_tokens(rng, vocab, 5);
    const TokenSeq base = random_tokens(rng, vocab, 10 + rng.below(20));
    const auto obj = raw_objective(emb, q);
    const SlotMode mode = static_cast<SlotMode>(rng.below(2));
    AttackBudget b{6, 0, 10, rng.next()};
    const auto start = greedy_flip(base, vocab, b, mode, obj);
    EXPECT_EQ(start.achieved_similarity, obj.score(start.poisoned_tokens));
    float prev = start.achieved_similarity;
    for (std::size_t iters : {1, 3, 6, 12, 30}) {
      b.iterations = iters;
      const auto r = greedy_flip(base, vocab, b, mode, obj);
      EXPECT_GE(r.achieved_similarity, prev);
      EXPECT_EQ(r.achieved_similarity, obj.score(r.poisoned_tokens));
      EXPECT_EQ(greedy_flip(base, vocab, b, mode, obj), r);
      prev = r.achieved_similarity;
    }
  }
}

// Given the query tokens as vocabulary and a full pass, the greedy search
// does at least as well as pasting the query.
TEST(Greedy, AtLeastQueryAsPoison) {
  ReferenceEmbedder emb(unigram_config(512));
  Rng rng(19);
  const auto vocab = word_list(500);
  for (int t = 0; t < 40; ++t) {
    const TokenSeq q = random_tokens(rng, vocab, 2 + rng.below(6));
    const TokenSeq base = random_tokens(rng, vocab, 15);
    const auto obj = raw_objective(emb, q);
    const AttackBudget b{q.size(), 4 * q.size(), 1000, rng.next()};
    const auto g = greedy_flip(base, q.tokens, b, SlotMode::concentrated, obj);
    const auto qp = query_as_poison(q, base, InsertPosition::prepend, obj);
    EXPECT_GE(g.achieved_similarity, qp.achieved_similarity);
  }
}

TEST(Greedy, Errors) {
  ReferenceEmbedder emb(unigram_config(16));
  const auto obj = raw_objective(emb, toks({"a"}));
  EXPECT_THROW(greedy_flip(toks({"a"}), {}, {}, SlotMode::concentrated, obj), UsageError);
  AttackBudget b;
  b.n_tokens = 0;
  EXPECT_THROW(greedy_flip(toks({"a"}), {"a"}, b, SlotMode::spread, obj), UsageError);
}

// Exhaustive over small shapes: spread slots never share a fragment.
TEST(Spread, OneSlotPerFragment) {
  for (std::size_t N = 1; N <= 8; ++N) {
    for (std::size_t n = 1; n <= N; ++n) {
      for (std::size_t total = N; total <= 60; ++total) {
        if (n > total) continue;
        const auto pos = spread_positions(total, n);
        TokenSeq t;
        for (std::size_t i = 0; i < total; ++i) t.tokens.push_back(std::to_string(i));
        const auto frags = partition(t, N);
        std::set<std::size_t> used;
        std::size_t off = 0;
        std::vector<std::size_t> frag_of(total);
        for (std::size_t f = 0; f < N; ++f) {
          for (std::size_t i = 0; i < frags.fragments[f].size(); ++i) frag_of[off + i] = f;
          off += frags.fragments[f].size();
        }
        for (std::size_t p : pos) {
          ASSERT_LT(p, total);
          EXPECT_TRUE(used.insert(frag_of[p]).second) << "N=" << N << " n=" << n << " L=" << total;
        }
      }
    }
  }
  EXPECT_THROW(spread_positions(3, 4), UsageError);
}

TEST(Inject, AppendsPoisonsAndRejectsCollisions) {
  Corpus c;
  c.add({"d1", "t", "hello world"});
  PoisonRecord p;
  p.poison_id = "poison-1";
  p.target_query_id = "q1";
  p.poisoned_tokens = toks({"bad", "words"});
  const auto r = inject(c, {p});
  EXPECT_EQ(r.corpus.size(), 2u);
  EXPECT_EQ(r.corpus.get("poison-1").text, "bad words");
  ASSERT_EQ(r.manifest.size(), 1u);
  EXPECT_EQ(r.manifest[0].target_query_id, "q1");
  EXPECT_EQ(inject(c, {}).corpus.size(), 1u);
  p.poison_id = "d1";
  EXPECT_THROW(inject(c, {p}), UsageError);
  p.poison_id = "x";
  EXPECT_THROW(inject(c, {p, p}), UsageError);
}

TEST(Manifest, RoundTrip) {
  std::vector<PoisonManifestEntry> m{{"p1", "q1", "query_as_poison", "a b"},
                                     {"p2", "q2", "greedy", "c \"d\""}};
  const auto path = std::filesystem::temp_directory_path() / "ragshield_manifest.jsonl";
  write_manifest(m, path);
  const auto back = load_manifest(path);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].poison_id, m[i].poison_id);
    EXPECT_EQ(back[i].target_query_id, m[i].target_query_id);
    EXPECT_EQ(back[i].attack, m[i].attack);
    EXPECT_EQ(back[i].text, m[i].text);
  }
  std::filesystem::remove(path);
  EXPECT_THROW(parse_manifest("{\"poison_id\":\"a\",\"target_query_id\":\"q\",\"attack\":\"x\",\"text\":\"t\"}\n"
                              "{\"poison_id\":\"a\",\"target_query_id\":\"q\",\"attack\":\"x\",\"text\":\"t\"}\n"),
               ParseError);
}

TEST(External, Ingestion) {
  const auto r = parse_external_poisons(
      "{\"query_id\":\"q1\",\"text\":\"Fake ANSWER here\"}\n"
      "\n"
      "{\"target_query_id\":\"q2\",\"poison_id\":\"mine\",\"text\":\"x\"}\n");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].poison_id, "ext-1");
  EXPECT_EQ(r[0].target_query_id, "q1");
  EXPECT_EQ(r[0].poisoned_tokens, toks({"fake", "answer", "here"}));
  EXPECT_EQ(r[0].attack, AttackType::external);
  EXPECT_EQ(r[1].poison_id, "mine");
  EXPECT_THROW(parse_external_poisons("{\"text\":\"x\"}\n"), ParseError);
  EXPECT_THROW(parse_external_poisons("not json\n"), ParseError);
}

TEST(Names, RoundTrip) {
  for (AttackType t : {AttackType::query_as_poison, AttackType::greedy, AttackType::greedy_spread,
                       AttackType::external}) {
    EXPECT_EQ(parse_attack(attack_name(t)), t);
  }
  EXPECT_EQ(parse_position("middle"), InsertPosition::middle);
  EXPECT_THROW(parse_attack("nope"), UsageError);
}

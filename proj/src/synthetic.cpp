#include "ragshield/synthetic.hpp"

#include <cstdio>

#include "ragshield/error.hpp"
#include "ragshield/rng.hpp"

namespace ragshield {

void SynthConfig::validate() const {
  if (n_queries == 0 || query_len == 0 || sentences == 0) {
    throw UsageError("synthetic: queries, query_len and sentences must be positive");
  }
  if (phrase_min == 0 || phrase_min > phrase_max || phrase_max > query_len) {
    throw UsageError("synthetic: need 1 <= phrase_min <= phrase_max <= query_len");
  }
  if (topic_vocab == 0 || background_vocab == 0) throw UsageError("synthetic: empty vocabulary");
  if (filler_min > filler_max) throw UsageError("synthetic: filler_min > filler_max");
  if (!(background_word_prob >= 0.0 && background_word_prob <= 1.0)) {
    throw UsageError("synthetic: background_word_prob outside [0, 1]");
  }
  const std::size_t golden = n_queries * golden_per_query;
  if (golden > n_docs) throw UsageError("synthetic: more golden passages than documents");
  if (n_queries * bases_per_query > n_docs - golden) {
    throw UsageError("synthetic: not enough background documents for the poison bases");
  }
}

#define RAGSHIELD_SYNTH_FIELDS(X)                                                          \
  X(n_docs) X(n_queries) X(golden_per_query) X(query_len) X(sentences) X(phrase_min)       \
  X(phrase_max) X(topic_vocab) X(topic_words_per_sentence) X(background_word_prob)         \
  X(background_vocab) X(filler_min) X(filler_max) X(bases_per_query) X(seed)

void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = nlohmann::json::object();
#define X(f) j[#f] = c.f;
  RAGSHIELD_SYNTH_FIELDS(X)
#undef X
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  for (const auto& [key, _] : j.items()) {
    bool known = false;
#define X(f) known = known || key == #f;
    RAGSHIELD_SYNTH_FIELDS(X)
#undef X
    if (!known) throw UsageError("synthetic: unknown key '" + key + "'");
  }
#define X(f) \
  if (j.contains(#f)) j.at(#f).get_to(c.f);
  RAGSHIELD_SYNTH_FIELDS(X)
#undef X
}

std::string pseudo_word(std::size_t i) {
  static constexpr const char* kOnset = "bdfgklmnprstvzhj";
  static constexpr const char* kVowel = "aeiu";
  // Each syllable is exactly two letters, so the digit string decodes
  // uniquely; three syllables minimum.
  std::string digits;
  std::size_t v = i;
  for (int n = 0; n < 3 || v > 0; ++n) {
    const std::size_t d = v % 64;
    v /= 64;
    digits.push_back(kOnset[d / 4]);
    digits.push_back(kVowel[d % 4]);
  }
  return digits;
}

SynthData generate_synthetic(const SynthConfig& c) {
  c.validate();
  Rng rng(c.seed);

  const std::size_t per_query_words = c.query_len + c.topic_vocab;
  const std::size_t total_words = c.n_queries * per_query_words + c.background_vocab;
  std::vector<std::size_t> word_ids(total_words);
  for (std::size_t i = 0; i < total_words; ++i) word_ids[i] = i;
  rng.shuffle(word_ids);
  std::size_t next_word = 0;
  auto take_word = [&]() { return pseudo_word(word_ids[next_word++]); };

  std::vector<std::vector<std::string>> query_words(c.n_queries), topic_words(c.n_queries);
  for (std::size_t q = 0; q < c.n_queries; ++q) {
    for (std::size_t j = 0; j < c.query_len; ++j) query_words[q].push_back(take_word());
    for (std::size_t j = 0; j < c.topic_vocab; ++j) topic_words[q].push_back(take_word());
  }
  std::vector<std::string> background;
  for (std::size_t j = 0; j < c.background_vocab; ++j) background.push_back(take_word());

  auto join = [](const std::vector<std::string>& toks) {
    std::string s;
    for (const auto& t : toks) {
      if (!s.empty()) s += ' ';
      s += t;
    }
    return s;
  };
  auto pick = [&](const std::vector<std::string>& v) {
    return v[static_cast<std::size_t>(rng.below(v.size()))];
  };
  auto insert_random = [&](std::vector<std::string>& v, std::string w) {
    const auto at = static_cast<std::ptrdiff_t>(rng.below(v.size() + 1));
    v.insert(v.begin() + at, std::move(w));
  };

  // (text, owning query or npos)
  std::vector<std::pair<std::string, std::size_t>> raw;
  for (std::size_t q = 0; q < c.n_queries; ++q) {
    for (std::size_t g = 0; g < c.golden_per_query; ++g) {
      std::vector<std::string> toks;
      for (std::size_t s = 0; s < c.sentences; ++s) {
        const auto len = static_cast<std::size_t>(rng.between(
            static_cast<std::int64_t>(c.phrase_min), static_cast<std::int64_t>(c.phrase_max)));
        const auto start = static_cast<std::size_t>(rng.below(c.query_len - len + 1));
        std::vector<std::string> sent(query_words[q].begin() + static_cast<std::ptrdiff_t>(start),
                                      query_words[q].begin() + static_cast<std::ptrdiff_t>(start + len));
        for (std::size_t t = 0; t < c.topic_words_per_sentence; ++t) {
          insert_random(sent, pick(topic_words[q]));
        }
        if (rng.uniform() < c.background_word_prob) insert_random(sent, pick(background));
        toks.insert(toks.end(), sent.begin(), sent.end());
      }
      raw.emplace_back(join(toks), q);
    }
  }
  while (raw.size() < c.n_docs) {
    const auto len = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(c.filler_min),
                                                          static_cast<std::int64_t>(c.filler_max)));
    std::vector<std::string> toks;
    for (std::size_t t = 0; t < len; ++t) toks.push_back(pick(background));
    raw.emplace_back(join(toks), std::string::npos);
  }

  // Shuffle so ids carry no structure.
  std::vector<std::size_t> order(raw.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  SynthData out;
  std::vector<std::string> filler_ids;
  char buf[32];
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& [text, owner] = raw[order[pos]];
    std::snprintf(buf, sizeof buf, "doc%05zu", pos);
    out.corpus.add({buf, "", text});
    if (owner == std::string::npos) {
      filler_ids.emplace_back(buf);
    } else {
      std::snprintf(buf, sizeof buf, "q%04zu", owner);
      out.qrels.golden[buf].insert(out.corpus.at(pos).id);
    }
  }
  for (std::size_t q = 0; q < c.n_queries; ++q) {
    std::snprintf(buf, sizeof buf, "q%04zu", q);
    out.queries.push_back({buf, join(query_words[q])});
  }
  const auto chosen = rng.sample(filler_ids.size(), c.n_queries * c.bases_per_query);
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    out.bases[out.queries[i / c.bases_per_query].id].push_back(filler_ids[chosen[i]]);
  }
  return out;
}

}  // namespace ragshield

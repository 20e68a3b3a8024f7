#include "ragshield/attacks.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "ragshield/error.hpp"
#include "ragshield/fragmenter.hpp"
#include "ragshield/rng.hpp"
#include "ragshield/tokenizer.hpp"

namespace ragshield {

using nlohmann::json;

std::string_view attack_name(AttackType t) noexcept {
  switch (t) {
    case AttackType::query_as_poison: return "query_as_poison";
    case AttackType::greedy: return "greedy";
    case AttackType::greedy_spread: return "greedy_spread";
    case AttackType::external: return "external";
  }
  return "external";
}

AttackType parse_attack(std::string_view s) {
  if (s == "query_as_poison" || s == "query") return AttackType::query_as_poison;
  if (s == "greedy") return AttackType::greedy;
  if (s == "greedy_spread" || s == "greedy-spread") return AttackType::greedy_spread;
  if (s == "external") return AttackType::external;
  throw UsageError("unknown attack type '" + std::string(s) + "'");
}

InsertPosition parse_position(std::string_view s) {
  if (s == "prepend") return InsertPosition::prepend;
  if (s == "append") return InsertPosition::append;
  if (s == "middle") return InsertPosition::middle;
  throw UsageError("unknown insert position '" + std::string(s) + "'");
}

float AttackObjective::score(const TokenSeq& doc) const {
  if (embedder == nullptr) throw UsageError("attack objective has no embedder");
  Embedding e = embedder->embed(doc);
  if (normalize_doc) e = embedder->prepare(e);
  return similarity(e, query_emb, embedder->config().similarity);
}

TokenSeq strip_spans(const TokenSeq& poisoned, const std::vector<InjectedSpan>& spans) {
  std::vector<bool> drop(poisoned.size(), false);
  for (const InjectedSpan& s : spans) {
    if (s.position + s.count > poisoned.size()) throw UsageError("injected span out of range");
    std::fill(drop.begin() + static_cast<std::ptrdiff_t>(s.position),
              drop.begin() + static_cast<std::ptrdiff_t>(s.position + s.count), true);
  }
  TokenSeq out;
  out.source_id = poisoned.source_id;
  for (std::size_t i = 0; i < poisoned.size(); ++i) {
    if (!drop[i]) out.tokens.push_back(poisoned.tokens[i]);
  }
  return out;
}

PoisonRecord query_as_poison(const TokenSeq& query, const TokenSeq& base_doc,
                             InsertPosition position, const AttackObjective& objective) {
  if (query.empty()) throw UsageError("query_as_poison needs a nonempty query");
  std::size_t at = 0;
  switch (position) {
    case InsertPosition::prepend: at = 0; break;
    case InsertPosition::append: at = base_doc.size(); break;
    case InsertPosition::middle: at = base_doc.size() / 2; break;
  }
  PoisonRecord rec;
  rec.base_doc_id = base_doc.source_id;
  rec.target_query_id = query.source_id;
  rec.attack = AttackType::query_as_poison;
  rec.injected_spans.push_back({at, query.size()});
  auto& out = rec.poisoned_tokens.tokens;
  out.reserve(base_doc.size() + query.size());
  out.insert(out.end(), base_doc.tokens.begin(), base_doc.tokens.begin() + static_cast<std::ptrdiff_t>(at));
  out.insert(out.end(), query.tokens.begin(), query.tokens.end());
  out.insert(out.end(), base_doc.tokens.begin() + static_cast<std::ptrdiff_t>(at), base_doc.tokens.end());
  rec.achieved_similarity = objective.score(rec.poisoned_tokens);
  return rec;
}

std::vector<std::size_t> spread_positions(std::size_t total_len, std::size_t n_slots) {
  if (n_slots == 0 || n_slots > total_len) throw UsageError("invalid spread slot count");
  std::vector<std::size_t> pos(n_slots);
  const std::size_t base = total_len / n_slots;
  const std::size_t extra = total_len % n_slots;
  for (std::size_t i = 0; i < n_slots; ++i) pos[i] = i * base + std::min(i, extra);
  return pos;
}

PoisonRecord greedy_flip(const TokenSeq& base_doc, const std::vector<std::string>& vocab,
                         const AttackBudget& budget, SlotMode mode,
                         const AttackObjective& objective) {
  if (vocab.empty()) throw UsageError("greedy_flip needs a nonempty vocabulary");
  if (budget.n_tokens == 0) throw UsageError("greedy_flip needs n_tokens >= 1");
  Rng rng(budget.rng_seed);
  const std::size_t n = budget.n_tokens;
  const std::size_t total = base_doc.size() + n;

  PoisonRecord rec;
  rec.base_doc_id = base_doc.source_id;
  rec.attack = mode == SlotMode::spread ? AttackType::greedy_spread : AttackType::greedy;

  std::vector<std::size_t> slots;
  if (mode == SlotMode::concentrated) {
    const auto start = static_cast<std::size_t>(rng.below(base_doc.size() + 1));
    for (std::size_t i = 0; i < n; ++i) slots.push_back(start + i);
    rec.injected_spans.push_back({start, n});
  } else {
    slots = spread_positions(total, n);
    for (std::size_t s : slots) rec.injected_spans.push_back({s, 1});
  }

  auto& toks = rec.poisoned_tokens.tokens;
  toks.resize(total);
  std::vector<bool> is_slot(total, false);
  for (std::size_t s : slots) is_slot[s] = true;
  std::size_t b = 0;
  for (std::size_t i = 0; i < total; ++i) {
    if (is_slot[i]) {
      toks[i] = vocab[static_cast<std::size_t>(rng.below(vocab.size()))];
    } else {
      toks[i] = base_doc.tokens[b++];
    }
  }

  float current = objective.score(rec.poisoned_tokens);
  std::size_t stale = 0;
  for (std::size_t round = 0; round < budget.iterations && stale < n; ++round) {
    const std::size_t slot = slots[round % n];
    std::vector<std::size_t> cands;
    if (budget.candidates >= vocab.size()) {
      cands.resize(vocab.size());
      for (std::size_t i = 0; i < cands.size(); ++i) cands[i] = i;
    } else {
      cands = rng.sample(vocab.size(), budget.candidates);
    }
    const std::string keep = toks[slot];
    std::string best = keep;
    float best_score = current;
    for (std::size_t c : cands) {
      if (vocab[c] == keep) continue;
      toks[slot] = vocab[c];
      const float s = objective.score(rec.poisoned_tokens);
      if (s > best_score) {
        best_score = s;
        best = vocab[c];
      }
    }
    toks[slot] = best;
    stale = best_score > current ? 0 : stale + 1;
    current = best_score;
  }
  rec.achieved_similarity = current;
  return rec;
}

PoisonManifestEntry manifest_entry(const PoisonRecord& poison) {
  return {poison.poison_id, poison.target_query_id, std::string(attack_name(poison.attack)),
          poison.poisoned_tokens.text()};
}

InjectionResult inject(const Corpus& corpus, const std::vector<PoisonRecord>& poisons) {
  InjectionResult res{corpus, {}};
  for (const PoisonRecord& p : poisons) {
    if (p.poison_id.empty()) throw UsageError("poison without an id");
    if (res.corpus.contains(p.poison_id)) {
      throw UsageError("poison id '" + p.poison_id + "' collides with an existing document");
    }
    res.corpus.add({p.poison_id, "", p.poisoned_tokens.text()});
    res.manifest.push_back(manifest_entry(p));
  }
  return res;
}

namespace {

template <class Fn>
void each_line(std::string_view text, Fn&& fn) {
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line;
    std::string_view row = text.substr(pos, end - pos);
    pos = end + 1;
    if (row.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json j;
    try {
      j = json::parse(row);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line);
    }
    if (!j.is_object()) throw ParseError("expected a JSON object", line);
    fn(j, line);
  }
}

std::string need_string(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw ParseError(std::string("missing string \"") + key + "\"", line);
  }
  return it->get<std::string>();
}

}  // namespace

std::vector<PoisonManifestEntry> parse_manifest(std::string_view jsonl) {
  std::vector<PoisonManifestEntry> out;
  std::set<std::string> seen;
  each_line(jsonl, [&](const json& j, std::size_t line) {
    PoisonManifestEntry e{need_string(j, "poison_id", line), need_string(j, "target_query_id", line),
                          need_string(j, "attack", line), need_string(j, "text", line)};
    if (!seen.insert(e.poison_id).second) {
      throw ParseError("duplicate poison_id '" + e.poison_id + "'", line);
    }
    out.push_back(std::move(e));
  });
  return out;
}

std::vector<PoisonManifestEntry> load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path));
}

void write_manifest(const std::vector<PoisonManifestEntry>& manifest,
                    const std::filesystem::path& path) {
  std::string out;
  for (const auto& e : manifest) {
    out += json{{"attack", e.attack}, {"poison_id", e.poison_id},
                {"target_query_id", e.target_query_id}, {"text", e.text}}
               .dump();
    out += '\n';
  }
  write_file(path, out);
}

std::vector<PoisonRecord> parse_external_poisons(std::string_view jsonl) {
  std::vector<PoisonRecord> out;
  each_line(jsonl, [&](const json& j, std::size_t line) {
    PoisonRecord r;
    r.attack = AttackType::external;
    if (j.contains("target_query_id")) {
      r.target_query_id = need_string(j, "target_query_id", line);
    } else {
      r.target_query_id = need_string(j, "query_id", line);
    }
    r.poison_id = j.contains("poison_id") ? need_string(j, "poison_id", line)
                                          : "ext-" + std::to_string(line);
    r.poisoned_tokens = tokenize(need_string(j, "text", line), r.poison_id);
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<PoisonRecord> load_external_poisons(const std::filesystem::path& path) {
  return parse_external_poisons(read_file(path));
}

}  // namespace ragshield

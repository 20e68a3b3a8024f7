#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ragshield/corpus.hpp"
#include "ragshield/embedder.hpp"

namespace ragshield {

enum class AttackType { query_as_poison, greedy, greedy_spread, external };
enum class InsertPosition { prepend, append, middle };
enum class SlotMode { concentrated, spread };

std::string_view attack_name(AttackType t) noexcept;
AttackType parse_attack(std::string_view s);
InsertPosition parse_position(std::string_view s);

/// [position, position + count) in poisoned-token coordinates.
struct InjectedSpan {
  std::size_t position;
  std::size_t count;

  friend bool operator==(const InjectedSpan&, const InjectedSpan&) = default;
};

struct PoisonRecord {
  std::string poison_id;
  std::string base_doc_id;
  std::string target_query_id;
  AttackType attack = AttackType::query_as_poison;
  std::vector<InjectedSpan> injected_spans;
  TokenSeq poisoned_tokens;
  float achieved_similarity = 0.0f;

  friend bool operator==(const PoisonRecord&, const PoisonRecord&) = default;
};

struct AttackBudget {
  std::size_t n_tokens = 20;
  std::size_t iterations = 30;
  std::size_t candidates = 30;
  std::uint64_t rng_seed = 0;
};

/// What the attacker maximizes: similarity(embed(doc), query_emb), with the
/// document vector passed through Embedder::prepare when normalize_doc.
struct AttackObjective {
  Embedder* embedder = nullptr;
  Embedding query_emb;
  bool normalize_doc = false;

  float score(const TokenSeq& doc) const;
};

/// Removes the injected spans, recovering the base document's tokens.
TokenSeq strip_spans(const TokenSeq& poisoned, const std::vector<InjectedSpan>& spans);

/// Inserts the query tokens verbatim. middle means after floor(L / 2) tokens.
/// Throws UsageError for an empty query.
PoisonRecord query_as_poison(const TokenSeq& query, const TokenSeq& base_doc,
                             InsertPosition position, const AttackObjective& objective);

/// Final-document positions of n evenly spread slots in a document of total
/// length total_len: the starts of an n-way front-loaded partition.
std::vector<std::size_t> spread_positions(std::size_t total_len, std::size_t n_slots);

/// Black-box greedy token search.
///
/// Slots are placed as one block at a seeded-random offset (concentrated) or
/// at spread_positions (spread) and seeded with random vocabulary tokens.
/// Each round visits one slot round-robin, scores `candidates` random
/// vocabulary tokens (all of them when candidates >= |vocab|) in that slot
/// and keeps the best, the current token winning ties. The search stops
/// after `iterations` rounds or a full pass over the slots without an
/// improvement. Deterministic in budget.rng_seed.
PoisonRecord greedy_flip(const TokenSeq& base_doc, const std::vector<std::string>& vocab,
                         const AttackBudget& budget, SlotMode mode,
                         const AttackObjective& objective);

struct PoisonManifestEntry {
  std::string poison_id;
  std::string target_query_id;
  std::string attack;
  std::string text;
};

struct InjectionResult {
  Corpus corpus;
  std::vector<PoisonManifestEntry> manifest;
};

/// Appends one document per poison (id = poison_id, text = poisoned tokens).
/// Throws UsageError when a poison id collides with a corpus id or another
/// poison.
InjectionResult inject(const Corpus& corpus, const std::vector<PoisonRecord>& poisons);

PoisonManifestEntry manifest_entry(const PoisonRecord& poison);

/// Manifest JSONL: {"poison_id", "target_query_id", "attack", "text"}.
std::vector<PoisonManifestEntry> load_manifest(const std::filesystem::path& path);
std::vector<PoisonManifestEntry> parse_manifest(std::string_view jsonl);
void write_manifest(const std::vector<PoisonManifestEntry>& manifest,
                    const std::filesystem::path& path);

/// Externally generated poisons, JSONL {"query_id", "text"} with optional
/// "poison_id" (default ext-<line>). Also accepts manifest lines.
std::vector<PoisonRecord> load_external_poisons(const std::filesystem::path& path);
std::vector<PoisonRecord> parse_external_poisons(std::string_view jsonl);

}  // namespace ragshield

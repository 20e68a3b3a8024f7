#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragshield/embedding.hpp"

namespace ragshield {

enum class EmbedderKind { reference, remote };

struct EmbedderConfig {
  EmbedderKind kind = EmbedderKind::reference;
  std::size_t dim = 512;
  /// n-gram sizes hashed by the reference embedder.
  std::vector<int> ngram_orders{1, 2};
  /// Unit-normalize fragment and document vectors before pooling/indexing.
  bool normalize_fragments = true;
  SimilarityMode similarity = SimilarityMode::inner_product;
  /// Seed for the reference embedder's n-gram hashes.
  std::uint64_t hash_seed = 0x5241475348494431ULL;

  std::string endpoint;
  int timeout_ms = 10000;
  std::size_t batch_size = 32;
  /// Total request attempts per batch before giving up.
  int max_retries = 3;
  int backoff_ms = 50;

  /// Throws UsageError.
  void validate() const;

  /// Hash of every field that changes vector values. Remote transport knobs
  /// (timeout, batch, retries) are excluded.
  std::uint64_t fingerprint() const;

  /// Overlay EMBED_ENDPOINT, EMBED_DIM, EMBED_BATCH, EMBED_TIMEOUT_MS.
  void apply_env();
};

void to_json(nlohmann::json& j, const EmbedderConfig& c);
void from_json(const nlohmann::json& j, EmbedderConfig& c);

class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual Embedding embed(const TokenSeq& tokens) = 0;
  virtual std::vector<Embedding> embed_batch(std::span<const TokenSeq> seqs);

  const EmbedderConfig& config() const noexcept { return config_; }
  std::size_t dim() const noexcept { return config_.dim; }

  /// Number of sequences embedded so far.
  std::uint64_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }
  void reset_calls() noexcept { calls_.store(0, std::memory_order_relaxed); }

  /// embed() followed by normalize() when config().normalize_fragments.
  Embedding embed_prepared(const TokenSeq& tokens);
  Embedding prepare(const Embedding& e) const;

 protected:
  explicit Embedder(EmbedderConfig config);
  void count(std::uint64_t n) noexcept { calls_.fetch_add(n, std::memory_order_relaxed); }

 private:
  EmbedderConfig config_;
  std::atomic<std::uint64_t> calls_{0};
};

/// Signed feature hashing of token n-grams.
///
/// For every n in ngram_orders (ascending) and every start position in token
/// order, the n-gram g is the tokens joined by U+001F. With
///   h = FNV-1a-64(g, basis = 0xcbf29ce484222325 ^ hash_seed)
///   index = splitmix64(h ^ 0x1d8e4e27c47d124f) mod dim
///   sign  = top bit of splitmix64(h ^ 0x3c6ef372fe94f82a) ? -1 : +1
/// sign is added to values[index]. The output is not normalized.
///
/// All accumulated values are small integers, so addition is exact and the
/// vector is independent of summation order. Consequently, with
/// ngram_orders = {1}, embed(A ++ B) == embed(A) + embed(B) exactly; with
/// higher orders the identity holds up to the n-grams crossing the boundary.
class ReferenceEmbedder final : public Embedder {
 public:
  explicit ReferenceEmbedder(EmbedderConfig config);
  Embedding embed(const TokenSeq& tokens) override;

  /// (index, sign) assigned to one n-gram.
  std::pair<std::size_t, float> slot(std::span<const std::string> gram) const;
};

/// Client for an HTTP embedding service:
///   POST {"texts": [...]}  ->  200 {"embeddings": [[...], ...]}
/// Token sequences are sent as space-joined text.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(EmbedderConfig config);
  ~RemoteEmbedder() override;

  Embedding embed(const TokenSeq& tokens) override;
  std::vector<Embedding> embed_batch(std::span<const TokenSeq> seqs) override;

  /// Throws RetriableError when a batch fails on every attempt, DataError when
  /// a returned vector has the wrong length or non-finite values.
  std::vector<Embedding> embed_texts(std::span<const std::string> texts);

  std::uint64_t requests() const noexcept { return requests_.load(std::memory_order_relaxed); }

 private:
  std::vector<Embedding> post_batch(std::span<const std::string> texts, std::size_t offset);

  std::string base_url_;
  std::string path_;
  std::atomic<std::uint64_t> requests_{0};
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config);

}  // namespace ragshield

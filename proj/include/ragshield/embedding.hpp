#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ragshield {

/// Tokens of one document or query. Tokens are never empty strings.
struct TokenSeq {
  std::vector<std::string> tokens;
  std::string source_id;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  /// Tokens joined by single spaces.
  std::string text() const;

  friend bool operator==(const TokenSeq& a, const TokenSeq& b) { return a.tokens == b.tokens; }
};

/// Concatenate b after a; source_id is taken from a.
TokenSeq concat(const TokenSeq& a, const TokenSeq& b);

enum class SimilarityMode { inner_product, cosine };

/// Fixed-dimension f32 vector with finite entries.
///
/// Normalization is a derived property rather than a stored flag: a vector is
/// normalized iff its L2 norm is within 1e-6 of 1 or it is all zero.
class Embedding {
 public:
  Embedding() = default;
  /// Throws DataError naming the first non-finite position.
  explicit Embedding(std::vector<float> values);

  static Embedding zeros(std::size_t dim) { return Embedding(std::vector<float>(dim, 0.0f)); }

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }
  const float* data() const noexcept { return values_.data(); }
  float operator[](std::size_t i) const noexcept { return values_[i]; }

  /// L2 norm accumulated left to right in double.
  double norm() const noexcept;
  bool is_zero() const noexcept;
  bool is_normalized() const noexcept;

  /// Bitwise equality of the stored values.
  friend bool operator==(const Embedding& a, const Embedding& b);

 private:
  friend Embedding normalize(const Embedding&);
  friend class EmbeddingBuilder;
  std::vector<float> values_;
};

/// v / ||v||, computed per element in double and rounded once to f32. The
/// zero vector passes through unchanged.
Embedding normalize(const Embedding& v);

/// Mutable accumulator used by embedders and pooling; hands out an Embedding
/// without copying.
class EmbeddingBuilder {
 public:
  explicit EmbeddingBuilder(std::size_t dim) : values_(dim, 0.0f) {}
  std::span<float> values() noexcept { return values_; }
  Embedding finish() &&;

 private:
  std::vector<float> values_;
};

/// Exact f32 dot product accumulated left to right. Cosine mode normalizes
/// both inputs first; a zero vector has similarity 0 to everything.
/// Throws UsageError on dimension mismatch.
float similarity(const Embedding& a, const Embedding& b,
                 SimilarityMode mode = SimilarityMode::inner_product);

}  // namespace ragshield

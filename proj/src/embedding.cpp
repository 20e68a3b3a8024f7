#include "ragshield/embedding.hpp"

#include <cmath>
#include <cstring>

#include "ragshield/error.hpp"
#include "ragshield/kernels.hpp"

namespace ragshield {

std::string TokenSeq::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i != 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

TokenSeq concat(const TokenSeq& a, const TokenSeq& b) {
  TokenSeq out{a.tokens, a.source_id};
  out.tokens.insert(out.tokens.end(), b.tokens.begin(), b.tokens.end());
  return out;
}

Embedding::Embedding(std::vector<float> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw DataError("non-finite embedding value at position " + std::to_string(i));
    }
  }
}

double Embedding::norm() const noexcept {
  double acc = 0.0;
  for (float v : values_) acc += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(acc);
}

bool Embedding::is_zero() const noexcept {
  for (float v : values_) {
    if (v != 0.0f) return false;
  }
  return true;
}

bool Embedding::is_normalized() const noexcept {
  return is_zero() || std::abs(norm() - 1.0) <= 1e-6;
}

bool operator==(const Embedding& a, const Embedding& b) {
  return a.values_.size() == b.values_.size() &&
         (a.values_.empty() ||
          std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(float)) == 0);
}

Embedding normalize(const Embedding& v) {
  const double n = v.norm();
  if (n == 0.0) return v;
  Embedding out;
  out.values_.resize(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) {
    out.values_[i] = static_cast<float>(static_cast<double>(v.values_[i]) / n);
  }
  return out;
}

Embedding EmbeddingBuilder::finish() && { return Embedding(std::move(values_)); }

float similarity(const Embedding& a, const Embedding& b, SimilarityMode mode) {
  if (a.dim() != b.dim()) {
    throw UsageError("similarity: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.dim()) + ")");
  }
  if (mode == SimilarityMode::cosine) {
    const Embedding na = normalize(a);
    const Embedding nb = normalize(b);
    return kernels::dot(na.data(), nb.data(), na.dim());
  }
  return kernels::dot(a.data(), b.data(), a.dim());
}

}  // namespace ragshield

#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ragshield/embedder.hpp"
#include "ragshield/ragpart.hpp"
#include "ragshield/vector_index.hpp"

namespace ragshield {

struct MaskConfig {
  /// Segment (mask) length in tokens.
  std::size_t m = 10;
  /// Similarity shift a segment's removal may cost before it is discarded.
  double delta = 0.01;
  /// Candidate pool is ceil(alpha * p) documents.
  double alpha = 2.0;
  std::size_t p = 10;

  void validate() const;
  std::size_t pool_size() const;
};

struct Segment {
  std::size_t offset;
  std::size_t length;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// ceil(L / m) contiguous segments of m tokens, the last possibly shorter.
/// An empty sequence has no segments. Throws UsageError when m == 0.
std::vector<Segment> segment(const TokenSeq& tokens, std::size_t m);

/// A copy of tokens with [seg.offset, seg.offset + seg.length) deleted.
TokenSeq without_segment(const TokenSeq& tokens, const Segment& seg);

/// Masks each segment independently against the original document and keeps
/// it iff v' + delta > v, where v is the document's score and v' the score
/// with that segment deleted. Scores are inner products of
/// Embedder::embed_prepared vectors with query_emb, compared in double.
/// The kept segments are re-embedded once; an all-discarded document scores 0.
///
/// When original_score is given it is used as v and the document is not
/// re-embedded, so the cost is ceil(L / m) + 1 embedder calls.
SanitizedDoc sanitize(const TokenSeq& doc, const Embedding& query_emb, const MaskConfig& config,
                      Embedder& embedder, std::optional<float> original_score = std::nullopt);

using DocLookup = std::function<const TokenSeq&(const std::string& doc_id)>;

/// Retrieves ceil(alpha * p) candidates from a full-document index
/// (N = k = 1), sanitizes each, re-ranks by sanitized score (ties by doc_id)
/// and returns the first p.
DefenseResult ragmask_retrieve(const Index& full_index, const Embedding& query_emb,
                               const DocLookup& corpus, const MaskConfig& config,
                               Embedder& embedder);

}  // namespace ragshield

#include "ragshield/ragmask.hpp"

#include <algorithm>
#include <cmath>

#include "ragshield/error.hpp"
#include "ragshield/kernels.hpp"

namespace ragshield {

void MaskConfig::validate() const {
  if (m < 1) throw UsageError("ragmask: mask length m must be >= 1");
  if (!(alpha > 1.0) || !std::isfinite(alpha)) throw UsageError("ragmask: alpha must be > 1");
  if (p < 1) throw UsageError("ragmask: p must be >= 1");
  if (!std::isfinite(delta)) throw UsageError("ragmask: delta must be finite");
}

std::size_t MaskConfig::pool_size() const {
  return static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(p)));
}

std::vector<Segment> segment(const TokenSeq& tokens, std::size_t m) {
  if (m == 0) throw UsageError("segment: m must be >= 1");
  std::vector<Segment> out;
  for (std::size_t off = 0; off < tokens.size(); off += m) {
    out.push_back({off, std::min(m, tokens.size() - off)});
  }
  return out;
}

TokenSeq without_segment(const TokenSeq& tokens, const Segment& seg) {
  TokenSeq out;
  out.source_id = tokens.source_id;
  out.tokens.reserve(tokens.size() - seg.length);
  const auto b = tokens.tokens.begin();
  out.tokens.insert(out.tokens.end(), b, b + static_cast<std::ptrdiff_t>(seg.offset));
  out.tokens.insert(out.tokens.end(), b + static_cast<std::ptrdiff_t>(seg.offset + seg.length),
                    tokens.tokens.end());
  return out;
}

namespace {

float score(Embedder& embedder, const TokenSeq& tokens, const Embedding& query) {
  return similarity(embedder.embed_prepared(tokens), query);
}

}  // namespace

SanitizedDoc sanitize(const TokenSeq& doc, const Embedding& query_emb, const MaskConfig& config,
                      Embedder& embedder, std::optional<float> original_score) {
  config.validate();
  SanitizedDoc out;
  out.doc_id = doc.source_id;
  out.original_score = original_score ? *original_score : score(embedder, doc, query_emb);
  const double v = out.original_score;

  const auto segs = segment(doc, config.m);
  out.kept_segments.resize(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const double v_masked = score(embedder, without_segment(doc, segs[i]), query_emb);
    out.kept_segments[i] = v_masked + config.delta > v;
  }

  out.sanitized_tokens.source_id = doc.source_id;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (!out.kept_segments[i]) continue;
    const auto b = doc.tokens.begin() + static_cast<std::ptrdiff_t>(segs[i].offset);
    out.sanitized_tokens.tokens.insert(out.sanitized_tokens.tokens.end(), b,
                                       b + static_cast<std::ptrdiff_t>(segs[i].length));
  }
  // The re-embed happens even when nothing survived so the call count is
  // ceil(L/m) + 1 for every candidate; the zero vector scores 0 anyway.
  const float rescored = score(embedder, out.sanitized_tokens, query_emb);
  out.sanitized_score = out.sanitized_tokens.empty() ? 0.0f : rescored;
  return out;
}

DefenseResult ragmask_retrieve(const Index& full_index, const Embedding& query_emb,
                               const DocLookup& corpus, const MaskConfig& config,
                               Embedder& embedder) {
  config.validate();
  if (full_index.meta().n_fragments != 1 || full_index.meta().k != 1) {
    throw UsageError("ragmask_retrieve: expects a full-document index (N = k = 1)");
  }
  const RankedList pool = full_index.top_p(0, query_emb, config.pool_size());

  DefenseResult out;
  out.mask_decisions.reserve(pool.size());
  for (const auto& cand : pool.entries) {
    out.mask_decisions.push_back(
        sanitize(corpus(cand.doc_id), query_emb, config, embedder, cand.score));
    out.mask_decisions.back().doc_id = cand.doc_id;
  }

  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = out.mask_decisions[a];
    const auto& y = out.mask_decisions[b];
    return x.sanitized_score != y.sanitized_score ? x.sanitized_score > y.sanitized_score
                                                  : x.doc_id < y.doc_id;
  });
  RankedList reranked;
  for (std::size_t i : order) {
    reranked.entries.push_back({out.mask_decisions[i].doc_id, out.mask_decisions[i].sanitized_score});
  }
  for (std::size_t i = 0; i < std::min(config.p, order.size()); ++i) {
    out.final_docs.push_back(out.mask_decisions[order[i]].doc_id);
  }
  out.per_combo_lists.push_back(std::move(reranked));
  return out;
}

}  // namespace ragshield

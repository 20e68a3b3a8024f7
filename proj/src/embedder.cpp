#include "ragshield/embedder.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "ragshield/error.hpp"
#include "ragshield/rng.hpp"

namespace ragshield {

namespace {

constexpr std::uint64_t kIndexSalt = 0x1d8e4e27c47d124fULL;
constexpr std::uint64_t kSignSalt = 0x3c6ef372fe94f82aULL;
constexpr char kGramSeparator = '\x1f';

std::string_view kind_name(EmbedderKind k) {
  return k == EmbedderKind::reference ? "reference" : "remote";
}

std::string_view mode_name(SimilarityMode m) {
  return m == SimilarityMode::inner_product ? "inner_product" : "cosine";
}

}  // namespace

void EmbedderConfig::validate() const {
  if (dim < 1) throw UsageError("embedder: dim must be >= 1");
  if (batch_size < 1) throw UsageError("embedder: batch_size must be >= 1");
  if (kind == EmbedderKind::reference) {
    if (ngram_orders.empty()) throw UsageError("embedder: ngram_orders must be nonempty");
    for (int n : ngram_orders) {
      if (n < 1) throw UsageError("embedder: n-gram orders must be >= 1");
    }
  } else if (endpoint.empty()) {
    throw UsageError("embedder: remote kind requires an endpoint");
  }
}

std::uint64_t EmbedderConfig::fingerprint() const {
  std::ostringstream os;
  os << "kind=" << kind_name(kind) << ";dim=" << dim << ";norm=" << normalize_fragments
     << ";sim=" << mode_name(similarity);
  if (kind == EmbedderKind::reference) {
    std::vector<int> orders = ngram_orders;
    std::sort(orders.begin(), orders.end());
    orders.erase(std::unique(orders.begin(), orders.end()), orders.end());
    os << ";ngrams=";
    for (int n : orders) os << n << ',';
    os << ";seed=" << hash_seed;
  } else {
    os << ";endpoint=" << endpoint;
  }
  return fnv1a64(os.str());
}

void EmbedderConfig::apply_env() {
  auto env = [](const char* name) -> const char* {
    const char* v = std::getenv(name);
    return (v != nullptr && *v != '\0') ? v : nullptr;
  };
  if (const char* v = env("EMBED_ENDPOINT")) {
    endpoint = v;
    kind = EmbedderKind::remote;
  }
  auto number = [](const char* name, const char* v) -> long long {
    try {
      std::size_t used = 0;
      const long long n = std::stoll(v, &used);
      if (v[used] == '\0' && n > 0) return n;
    } catch (const std::logic_error&) {
    }
    throw UsageError(std::string(name) + " must be a positive integer, got '" + v + "'");
  };
  if (const char* v = env("EMBED_DIM")) dim = static_cast<std::size_t>(number("EMBED_DIM", v));
  if (const char* v = env("EMBED_BATCH")) {
    batch_size = static_cast<std::size_t>(number("EMBED_BATCH", v));
  }
  if (const char* v = env("EMBED_TIMEOUT_MS")) {
    timeout_ms = static_cast<int>(number("EMBED_TIMEOUT_MS", v));
  }
}

void to_json(nlohmann::json& j, const EmbedderConfig& c) {
  j = nlohmann::json{{"kind", kind_name(c.kind)},
                     {"dim", c.dim},
                     {"ngram_orders", c.ngram_orders},
                     {"normalize_fragments", c.normalize_fragments},
                     {"similarity", mode_name(c.similarity)},
                     {"hash_seed", c.hash_seed}};
  if (c.kind == EmbedderKind::remote) {
    j["endpoint"] = c.endpoint;
    j["timeout_ms"] = c.timeout_ms;
    j["batch_size"] = c.batch_size;
    j["max_retries"] = c.max_retries;
    j["backoff_ms"] = c.backoff_ms;
  }
}

void from_json(const nlohmann::json& j, EmbedderConfig& c) {
  c = EmbedderConfig{};
  if (j.contains("kind")) {
    const auto k = j.at("kind").get<std::string>();
    if (k == "reference") {
      c.kind = EmbedderKind::reference;
    } else if (k == "remote") {
      c.kind = EmbedderKind::remote;
    } else {
      throw UsageError("embedder: unknown kind '" + k + "'");
    }
  }
  if (j.contains("dim")) c.dim = j.at("dim").get<std::size_t>();
  if (j.contains("ngram_orders")) c.ngram_orders = j.at("ngram_orders").get<std::vector<int>>();
  if (j.contains("normalize_fragments")) {
    c.normalize_fragments = j.at("normalize_fragments").get<bool>();
  }
  if (j.contains("similarity")) {
    const auto m = j.at("similarity").get<std::string>();
    if (m == "inner_product" || m == "dot") {
      c.similarity = SimilarityMode::inner_product;
    } else if (m == "cosine") {
      c.similarity = SimilarityMode::cosine;
    } else {
      throw UsageError("embedder: unknown similarity '" + m + "'");
    }
  }
  if (j.contains("hash_seed")) c.hash_seed = j.at("hash_seed").get<std::uint64_t>();
  if (j.contains("endpoint")) c.endpoint = j.at("endpoint").get<std::string>();
  if (j.contains("timeout_ms")) c.timeout_ms = j.at("timeout_ms").get<int>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("max_retries")) c.max_retries = j.at("max_retries").get<int>();
  if (j.contains("backoff_ms")) c.backoff_ms = j.at("backoff_ms").get<int>();
}

Embedder::Embedder(EmbedderConfig config) : config_(std::move(config)) { config_.validate(); }

std::vector<Embedding> Embedder::embed_batch(std::span<const TokenSeq> seqs) {
  std::vector<Embedding> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(embed(s));
  return out;
}

Embedding Embedder::prepare(const Embedding& e) const {
  return config_.normalize_fragments ? normalize(e) : e;
}

Embedding Embedder::embed_prepared(const TokenSeq& tokens) { return prepare(embed(tokens)); }

ReferenceEmbedder::ReferenceEmbedder(EmbedderConfig config) : Embedder(std::move(config)) {
  if (this->config().kind != EmbedderKind::reference) {
    throw UsageError("ReferenceEmbedder requires kind=reference");
  }
}

std::pair<std::size_t, float> ReferenceEmbedder::slot(std::span<const std::string> gram) const {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ config().hash_seed;
  for (std::size_t i = 0; i < gram.size(); ++i) {
    if (i != 0) h = fnv1a64(std::string_view(&kGramSeparator, 1), h);
    h = fnv1a64(gram[i], h);
  }
  const std::size_t index = static_cast<std::size_t>(mix64(h ^ kIndexSalt) % config().dim);
  const float sign = (mix64(h ^ kSignSalt) >> 63) != 0 ? -1.0f : 1.0f;
  return {index, sign};
}

Embedding ReferenceEmbedder::embed(const TokenSeq& tokens) {
  count(1);
  EmbeddingBuilder b(config().dim);
  auto values = b.values();
  std::vector<int> orders = config().ngram_orders;
  std::sort(orders.begin(), orders.end());
  orders.erase(std::unique(orders.begin(), orders.end()), orders.end());
  const std::span<const std::string> toks(tokens.tokens);
  for (int n : orders) {
    const auto un = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + un <= toks.size(); ++i) {
      const auto [index, sign] = slot(toks.subspan(i, un));
      values[index] += sign;
    }
  }
  return std::move(b).finish();
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config) {
  if (config.kind == EmbedderKind::reference) return std::make_unique<ReferenceEmbedder>(config);
  return std::make_unique<RemoteEmbedder>(config);
}

}  // namespace ragshield

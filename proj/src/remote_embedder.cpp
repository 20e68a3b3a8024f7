#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "ragshield/embedder.hpp"
#include "ragshield/error.hpp"

namespace ragshield {

namespace {

// "http://host:port/path" -> ("http://host:port", "/path")
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  const std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = endpoint.find('/', host_start);
  if (slash == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, slash), endpoint.substr(slash)};
}

}  // namespace

RemoteEmbedder::RemoteEmbedder(EmbedderConfig config) : Embedder(std::move(config)) {
  if (this->config().kind != EmbedderKind::remote) {
    throw UsageError("RemoteEmbedder requires kind=remote");
  }
  std::tie(base_url_, path_) = split_endpoint(this->config().endpoint);
}

RemoteEmbedder::~RemoteEmbedder() = default;

Embedding RemoteEmbedder::embed(const TokenSeq& tokens) {
  const std::string text = tokens.text();
  return std::move(embed_texts(std::span<const std::string>(&text, 1)).front());
}

std::vector<Embedding> RemoteEmbedder::embed_batch(std::span<const TokenSeq> seqs) {
  std::vector<std::string> texts;
  texts.reserve(seqs.size());
  for (const auto& s : seqs) texts.push_back(s.text());
  return embed_texts(texts);
}

std::vector<Embedding> RemoteEmbedder::embed_texts(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  const std::size_t batch = config().batch_size;
  for (std::size_t offset = 0; offset < texts.size(); offset += batch) {
    const std::size_t n = std::min(batch, texts.size() - offset);
    auto part = post_batch(texts.subspan(offset, n), offset);
    for (auto& e : part) out.push_back(std::move(e));
  }
  count(texts.size());
  return out;
}

std::vector<Embedding> RemoteEmbedder::post_batch(std::span<const std::string> texts,
                                                  std::size_t offset) {
  const std::string body =
      nlohmann::json{{"texts", std::vector<std::string>(texts.begin(), texts.end())}}.dump();
  const int attempts = std::max(1, config().max_retries);
  std::string last_error;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt != 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(config().backoff_ms << (attempt - 1)));
    }
    httplib::Client cli(base_url_);
    const auto timeout = std::chrono::milliseconds(config().timeout_ms);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    requests_.fetch_add(1, std::memory_order_relaxed);
    auto res = cli.Post(path_, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }

    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("remote embedder: unparseable response: ") + e.what());
    }
    if (!reply.contains("embeddings") || !reply["embeddings"].is_array()) {
      throw DataError("remote embedder: response lacks an 'embeddings' array");
    }
    const auto& rows = reply["embeddings"];
    if (rows.size() != texts.size()) {
      throw DataError("remote embedder: expected " + std::to_string(texts.size()) +
                      " embeddings, got " + std::to_string(rows.size()));
    }
    std::vector<Embedding> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t index = offset + i;
      const auto& row = rows[i];
      if (!row.is_array() || row.size() != config().dim) {
        throw DataError("remote embedder: embedding " + std::to_string(index) + " has length " +
                        std::to_string(row.is_array() ? row.size() : 0) + ", expected " +
                        std::to_string(config().dim));
      }
      std::vector<float> values(row.size());
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (!row[j].is_number()) {
          throw DataError("remote embedder: embedding " + std::to_string(index) +
                          " has a non-numeric entry");
        }
        values[j] = row[j].get<float>();
        if (!std::isfinite(values[j])) {
          throw DataError("remote embedder: embedding " + std::to_string(index) +
                          " has a non-finite entry");
        }
      }
      out.emplace_back(std::move(values));
    }
    return out;
  }
  throw RetriableError("remote embedder: " + base_url_ + path_ + " failed after " +
                       std::to_string(attempts) + " attempts: " + last_error);
}

}  // namespace ragshield

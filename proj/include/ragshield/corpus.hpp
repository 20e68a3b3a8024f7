#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ragshield/embedding.hpp"

namespace ragshield {

struct Document {
  std::string id;
  std::string title;
  std::string text;
};

/// Documents in insertion order with id lookup. Ids are unique.
class Corpus {
 public:
  /// Throws UsageError on a duplicate id.
  void add(Document doc);

  std::size_t size() const noexcept { return docs_.size(); }
  bool empty() const noexcept { return docs_.empty(); }
  bool contains(const std::string& id) const { return by_id_.count(id) != 0; }
  const Document& at(std::size_t i) const { return docs_.at(i); }
  /// Throws UsageError for an unknown id.
  const Document& get(const std::string& id) const;
  const std::vector<Document>& docs() const noexcept { return docs_; }

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Tokens of title followed by text, with source_id = doc id.
TokenSeq document_tokens(const Document& doc);

struct Query {
  std::string id;
  std::string text;
};

struct Qrels {
  std::map<std::string, std::set<std::string>> golden;
  /// Rows that referenced documents missing from the corpus.
  std::vector<std::string> warnings;

  const std::set<std::string>* find(const std::string& query_id) const;
};

/// BEIR-style JSONL: {"_id", "title", "text"} per line. Blank lines are
/// skipped. Throws ParseError with the line number for malformed JSON or a
/// missing _id, UsageError naming a duplicate id.
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::string_view jsonl);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// JSONL {"_id", "text"} per line.
std::vector<Query> load_queries(const std::filesystem::path& path);
std::vector<Query> parse_queries(std::string_view jsonl);
void write_queries(const std::vector<Query>& queries, const std::filesystem::path& path);

/// TSV query_id, doc_id, relevance. Rows with relevance <= 0 are ignored. A
/// leading header row ("query-id ...") is skipped. Unknown doc ids are kept
/// and reported in warnings when a corpus is supplied.
Qrels load_qrels(const std::filesystem::path& path, const Corpus* corpus = nullptr);
Qrels parse_qrels(std::string_view tsv, const Corpus* corpus = nullptr);
void write_qrels(const Qrels& qrels, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace ragshield

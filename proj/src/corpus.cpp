#include "ragshield/corpus.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ragshield/error.hpp"
#include "ragshield/tokenizer.hpp"

namespace ragshield {

using nlohmann::json;

void Corpus::add(Document doc) {
  auto [it, inserted] = by_id_.emplace(doc.id, docs_.size());
  if (!inserted) throw UsageError("duplicate document id '" + doc.id + "'");
  docs_.push_back(std::move(doc));
}

const Document& Corpus::get(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw UsageError("unknown document id '" + id + "'");
  return docs_[it->second];
}

TokenSeq document_tokens(const Document& doc) {
  if (doc.title.empty()) return tokenize(doc.text, doc.id);
  return tokenize(doc.title + " " + doc.text, doc.id);
}

const std::set<std::string>* Qrels::find(const std::string& query_id) const {
  auto it = golden.find(query_id);
  return it == golden.end() ? nullptr : &it->second;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw UsageError("write failed: " + path.string());
}

namespace {

// Calls fn(object, line_number) for every nonblank line.
template <class Fn>
void each_json_line(std::string_view text, Fn&& fn) {
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line;
    std::string_view row = text.substr(pos, end - pos);
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (row.find_first_not_of(" \t") != std::string_view::npos) {
      json j;
      try {
        j = json::parse(row);
      } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), line);
      }
      if (!j.is_object()) throw ParseError("expected a JSON object", line);
      fn(j, line);
    }
    pos = end + 1;
  }
}

std::string string_field(const json& j, const char* key, std::size_t line, bool required) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw ParseError(std::string("missing \"") + key + "\"", line);
    return {};
  }
  if (it->is_string()) return it->get<std::string>();
  // Numeric ids show up in some BEIR exports.
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw ParseError(std::string("\"") + key + "\" must be a string", line);
}

std::string id_field(const json& j, std::size_t line) {
  if (j.contains("_id")) return string_field(j, "_id", line, true);
  return string_field(j, "id", line, true);
}

}  // namespace

Corpus parse_corpus(std::string_view jsonl) {
  Corpus corpus;
  each_json_line(jsonl, [&](const json& j, std::size_t line) {
    Document doc{id_field(j, line), string_field(j, "title", line, false),
                 string_field(j, "text", line, false)};
    if (corpus.contains(doc.id)) {
      throw UsageError("duplicate document id '" + doc.id + "' at line " + std::to_string(line));
    }
    corpus.add(std::move(doc));
  });
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::string out;
  for (const Document& d : corpus.docs()) {
    json j{{"_id", d.id}, {"title", d.title}, {"text", d.text}};
    out += j.dump();
    out += '\n';
  }
  write_file(path, out);
}

std::vector<Query> parse_queries(std::string_view jsonl) {
  std::vector<Query> queries;
  std::set<std::string> seen;
  each_json_line(jsonl, [&](const json& j, std::size_t line) {
    Query q{id_field(j, line), string_field(j, "text", line, true)};
    if (!seen.insert(q.id).second) throw UsageError("duplicate query id '" + q.id + "'");
    queries.push_back(std::move(q));
  });
  return queries;
}

std::vector<Query> load_queries(const std::filesystem::path& path) {
  return parse_queries(read_file(path));
}

void write_queries(const std::vector<Query>& queries, const std::filesystem::path& path) {
  std::string out;
  for (const Query& q : queries) {
    out += json{{"_id", q.id}, {"text", q.text}}.dump();
    out += '\n';
  }
  write_file(path, out);
}

Qrels parse_qrels(std::string_view tsv, const Corpus* corpus) {
  Qrels qrels;
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos <= tsv.size()) {
    std::size_t end = tsv.find('\n', pos);
    if (end == std::string_view::npos) end = tsv.size();
    ++line;
    std::string_view row = tsv.substr(pos, end - pos);
    pos = end + 1;
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (row.find_first_not_of(" \t") == std::string_view::npos) continue;

    std::vector<std::string_view> cols;
    std::size_t c = 0;
    while (true) {
      std::size_t tab = row.find('\t', c);
      cols.push_back(row.substr(c, tab == std::string_view::npos ? row.size() - c : tab - c));
      if (tab == std::string_view::npos) break;
      c = tab + 1;
    }
    if (cols.size() != 3) throw ParseError("expected 3 tab-separated columns", line);
    if (line == 1 && (cols[0] == "query-id" || cols[0] == "query_id")) continue;
    if (cols[0].empty() || cols[1].empty()) throw ParseError("empty id", line);

    long long rel = 0;
    std::string rel_text(cols[2]);
    try {
      std::size_t used = 0;
      rel = std::stoll(rel_text, &used);
      if (used != rel_text.size()) throw std::invalid_argument(rel_text);
    } catch (const std::logic_error&) {
      throw ParseError("relevance is not an integer: '" + rel_text + "'", line);
    }
    if (rel <= 0) continue;

    std::string qid(cols[0]);
    std::string did(cols[1]);
    if (corpus != nullptr && !corpus->contains(did)) {
      qrels.warnings.push_back("line " + std::to_string(line) + ": query " + qid +
                               " references unknown document " + did);
    }
    qrels.golden[qid].insert(did);
  }
  return qrels;
}

Qrels load_qrels(const std::filesystem::path& path, const Corpus* corpus) {
  return parse_qrels(read_file(path), corpus);
}

void write_qrels(const Qrels& qrels, const std::filesystem::path& path) {
  std::string out = "query-id\tcorpus-id\tscore\n";
  for (const auto& [qid, docs] : qrels.golden) {
    for (const std::string& d : docs) out += qid + "\t" + d + "\t1\n";
  }
  write_file(path, out);
}

}  // namespace ragshield

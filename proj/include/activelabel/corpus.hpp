#pragma once

// Review corpus rows, one JSON object per line:
//   {"id": str, "text": str, "aspects": [str]?, "sentiment": [str]?,
//    "split": "train" | "validation"?}
// A row carrying either label field is labeled; the other field then counts
// as an empty label set.

#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "activelabel/error.hpp"
#include "activelabel/labels.hpp"

namespace activelabel {

enum class Split { Train, Validation };

struct Document {
  std::string id;
  std::string text;
  std::optional<std::vector<std::string>> aspects;
  std::optional<std::vector<std::string>> sentiment;
  Split split = Split::Train;

  bool labeled() const { return aspects.has_value() || sentiment.has_value(); }

  LabelVector labels(const Taxonomy& taxonomy, Task task) const {
    const auto& names = task == Task::Aspect ? aspects : sentiment;
    return taxonomy.encode(names ? *names : std::vector<std::string>{}, task);
  }

  bool operator==(const Document&) const = default;
};

inline nlohmann::json document_to_json(const Document& doc) {
  nlohmann::json j{{"id", doc.id}, {"text", doc.text}};
  if (doc.aspects) j["aspects"] = *doc.aspects;
  if (doc.sentiment) j["sentiment"] = *doc.sentiment;
  if (doc.split == Split::Validation) j["split"] = "validation";
  return j;
}

/// Throws IngestError (line 0) on schema violations; callers add the line.
inline Document document_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::IngestError, "row is not a JSON object");
  Document doc;
  for (const auto& [key, value] : j.items()) {
    if (key == "id") {
      if (!value.is_string() || value.get<std::string>().empty())
        throw Error(ErrorCode::IngestError, "'id' must be a non-empty string");
      doc.id = value.get<std::string>();
    } else if (key == "text") {
      if (!value.is_string()) throw Error(ErrorCode::IngestError, "'text' must be a string");
      doc.text = value.get<std::string>();
    } else if (key == "aspects" || key == "sentiment") {
      if (value.is_null()) continue;
      if (!value.is_array()) throw Error(ErrorCode::IngestError, "'" + key + "' must be an array of strings");
      std::vector<std::string> names;
      for (const auto& v : value) {
        if (!v.is_string()) throw Error(ErrorCode::IngestError, "'" + key + "' must be an array of strings");
        names.push_back(v.get<std::string>());
      }
      (key == "aspects" ? doc.aspects : doc.sentiment) = std::move(names);
    } else if (key == "split") {
      const std::string s = value.is_string() ? value.get<std::string>() : "";
      if (s == "train") {
        doc.split = Split::Train;
      } else if (s == "validation") {
        doc.split = Split::Validation;
      } else {
        throw Error(ErrorCode::IngestError, "'split' must be \"train\" or \"validation\"");
      }
    } else {
      throw Error(ErrorCode::IngestError, "unknown field '" + key + "'");
    }
  }
  if (doc.id.empty()) throw Error(ErrorCode::IngestError, "missing 'id'");
  if (!j.contains("text")) throw Error(ErrorCode::IngestError, "missing 'text'");
  if (doc.split == Split::Validation && !doc.labeled())
    throw Error(ErrorCode::IngestError, "validation rows must carry labels");
  return doc;
}

/// Parses JSONL. Blank lines are skipped; ids must be unique.
inline std::vector<Document> read_corpus(std::istream& in) {
  std::vector<Document> docs;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::IngestError, std::string("invalid JSON: ") + e.what(), line_no);
    }
    Document doc;
    try {
      doc = document_from_json(j);
    } catch (const Error& e) {
      throw Error(e.code(), e.detail(), line_no);
    }
    if (!seen.insert(doc.id).second) throw Error(ErrorCode::IngestError, "duplicate id '" + doc.id + "'", line_no);
    docs.push_back(std::move(doc));
  }
  return docs;
}

inline void write_corpus(std::ostream& out, const std::vector<Document>& docs) {
  for (const auto& doc : docs) out << document_to_json(doc).dump() << '\n';
}

}  // namespace activelabel

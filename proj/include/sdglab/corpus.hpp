#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "sdglab/detail/csv.hpp"
#include "sdglab/error.hpp"
#include "sdglab/sdg.hpp"
#include "sdglab/tokenize.hpp"

namespace sdgl {

/// Expert judgement attached to a document. `evaluated` holds the goals the
/// experts judged the document for; `labels` ⊆ `evaluated`.
struct ExpertLabels {
  SdgSet labels;
  SdgSet evaluated;
  bool operator==(const ExpertLabels&) const = default;
};

struct Document {
  std::string id;
  std::string text;
  Tokens tokens;
  std::optional<ExpertLabels> expert;

  Document() = default;
  Document(std::string id_, std::string text_, std::optional<ExpertLabels> expert_ = std::nullopt)
      : id(std::move(id_)), text(std::move(text_)), tokens(tokenize(text)), expert(expert_) {}

  std::size_t word_count() const noexcept { return tokens.size(); }
  bool labeled() const noexcept { return expert.has_value(); }

  bool operator==(const Document&) const = default;
};

enum class DatasetKind { Labeled, Unlabeled, Synthetic };

inline std::string_view to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::Labeled: return "labeled";
    case DatasetKind::Unlabeled: return "unlabeled";
    case DatasetKind::Synthetic: return "synthetic";
  }
  return "unknown";
}

class Dataset {
 public:
  Dataset(std::string name, DatasetKind kind, std::vector<Document> documents)
      : name_(std::move(name)), kind_(kind), documents_(std::move(documents)) {
    if (documents_.empty()) throw Error(ErrorCode::Schema, "dataset '" + name_ + "' is empty");
    for (std::size_t i = 0; i < documents_.size(); ++i) {
      const auto& d = documents_[i];
      if (d.id.empty()) throw Error(ErrorCode::Schema, "dataset '" + name_ + "': empty document id");
      if (!by_id_.emplace(d.id, i).second) {
        throw Error(ErrorCode::Schema, "dataset '" + name_ + "': duplicate document id '" + d.id + "'");
      }
      if (kind_ == DatasetKind::Labeled && !d.labeled()) {
        throw Error(ErrorCode::Schema, "dataset '" + name_ + "': document '" + d.id + "' has no labels");
      }
    }
  }

  const std::string& name() const noexcept { return name_; }
  DatasetKind kind() const noexcept { return kind_; }
  const std::vector<Document>& documents() const noexcept { return documents_; }
  std::size_t size() const noexcept { return documents_.size(); }
  bool labeled() const noexcept { return kind_ == DatasetKind::Labeled; }

  const Document* find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &documents_[it->second];
  }
  std::optional<std::size_t> index_of(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  double mean_word_count() const {
    double total = 0;
    for (const auto& d : documents_) total += static_cast<double>(d.word_count());
    return total / static_cast<double>(documents_.size());
  }

 private:
  std::string name_;
  DatasetKind kind_;
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

enum class DocFormat { Jsonl, Csv };

namespace detail {

inline std::string schema_where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line);
}

inline SdgSet parse_sdg_array(const nlohmann::json& value, const std::string& where, const char* field) {
  if (!value.is_array()) throw Error(ErrorCode::Schema, where + ": field '" + field + "' must be an array");
  SdgSet out;
  for (const auto& v : value) {
    if (!v.is_number_integer()) {
      throw Error(ErrorCode::Schema, where + ": field '" + field + "' must hold integers");
    }
    const auto g = v.get<long long>();
    if (!is_valid_sdg(g)) {
      throw Error(ErrorCode::Schema,
                  where + ": field '" + field + "' has SDG id " + std::to_string(g) + " outside 1..17");
    }
    out.insert(static_cast<int>(g));
  }
  return out;
}

inline SdgSet parse_sdg_pipe_list(std::string_view s, const std::string& where, const char* field) {
  SdgSet out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto bar = s.find('|', start);
    const auto piece = s.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start);
    const auto v = parse_int(piece);
    if (!v) throw Error(ErrorCode::Schema, where + ": field '" + field + "' is not a '|'-separated integer list");
    if (!is_valid_sdg(*v)) {
      throw Error(ErrorCode::Schema,
                  where + ": field '" + field + "' has SDG id " + std::to_string(*v) + " outside 1..17");
    }
    out.insert(static_cast<int>(*v));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return out;
}

inline std::optional<ExpertLabels> make_expert(std::optional<SdgSet> labels, std::optional<SdgSet> evaluated,
                                               const std::string& where) {
  if (!labels && !evaluated) return std::nullopt;
  ExpertLabels e{labels.value_or(SdgSet{}), evaluated.value_or(SdgSet::all())};
  if (e.evaluated.empty()) throw Error(ErrorCode::Schema, where + ": field 'evaluated' is empty");
  if (!e.labels.is_subset_of(e.evaluated)) {
    throw Error(ErrorCode::Schema, where + ": field 'labels' is not a subset of 'evaluated'");
  }
  return e;
}

inline DatasetKind infer_kind(const std::vector<Document>& docs, const std::vector<std::size_t>& lines,
                              const std::string& path) {
  for (std::size_t i = 1; i < docs.size(); ++i) {
    if (docs[i].labeled() != docs[0].labeled()) {
      throw Error(ErrorCode::Schema, schema_where(path, lines[i]) +
                                         ": mixes labeled and unlabeled records in one dataset");
    }
  }
  return !docs.empty() && docs[0].labeled() ? DatasetKind::Labeled : DatasetKind::Unlabeled;
}

inline Dataset load_jsonl(const std::string& path, std::string name) {
  const std::string text = read_file(path);
  std::vector<Document> docs;
  std::vector<std::size_t> lines;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = schema_where(path, line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::Schema, where + ": invalid JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw Error(ErrorCode::Schema, where + ": record must be a JSON object");
    auto id = obj.find("id");
    if (id == obj.end() || !id->is_string()) throw Error(ErrorCode::Schema, where + ": missing string field 'id'");
    auto txt = obj.find("text");
    if (txt == obj.end() || !txt->is_string()) {
      throw Error(ErrorCode::Schema, where + ": missing string field 'text'");
    }
    std::optional<SdgSet> labels, evaluated;
    if (auto it = obj.find("labels"); it != obj.end()) labels = parse_sdg_array(*it, where, "labels");
    if (auto it = obj.find("evaluated"); it != obj.end()) evaluated = parse_sdg_array(*it, where, "evaluated");
    docs.emplace_back(id->get<std::string>(), txt->get<std::string>(), make_expert(labels, evaluated, where));
    lines.push_back(line_no);
  }
  if (docs.empty()) throw Error(ErrorCode::Schema, path + ": no records");
  const auto kind = infer_kind(docs, lines, path);
  return Dataset(std::move(name), kind, std::move(docs));
}

inline Dataset load_csv_documents(const std::string& path, std::string name) {
  const auto records = parse_csv(read_file(path), path);
  if (records.empty()) throw Error(ErrorCode::Schema, path + ": missing header");
  const CsvHeader header(records.front().fields, {"id", "text"}, path);
  const auto id_col = header.at("id");
  const auto text_col = header.at("text");
  const auto labels_col = header.index("labels");
  const auto eval_col = header.index("evaluated");
  std::vector<Document> docs;
  std::vector<std::size_t> lines;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = schema_where(path, rec.line);
    auto field = [&](std::optional<std::size_t> col) -> std::string_view {
      if (!col || *col >= rec.fields.size()) return {};
      return rec.fields[*col];
    };
    if (field(id_col).empty()) throw Error(ErrorCode::Schema, where + ": missing field 'id'");
    if (text_col >= rec.fields.size()) throw Error(ErrorCode::Schema, where + ": missing field 'text'");
    std::optional<SdgSet> labels, evaluated;
    const auto lf = field(labels_col);
    const auto ef = field(eval_col);
    if (!lf.empty() || !ef.empty()) {
      labels = lf.empty() ? SdgSet{} : parse_sdg_pipe_list(lf, where, "labels");
      if (!ef.empty()) evaluated = parse_sdg_pipe_list(ef, where, "evaluated");
    }
    docs.emplace_back(std::string(field(id_col)), rec.fields[text_col], make_expert(labels, evaluated, where));
    lines.push_back(rec.line);
  }
  if (docs.empty()) throw Error(ErrorCode::Schema, path + ": no records");
  const auto kind = infer_kind(docs, lines, path);
  return Dataset(std::move(name), kind, std::move(docs));
}

}  // namespace detail

inline DocFormat format_from_path(const std::string& path) {
  return std::filesystem::path(path).extension() == ".csv" ? DocFormat::Csv : DocFormat::Jsonl;
}

/// Loads a document collection. The dataset name defaults to the file stem.
/// Labeled records (with `labels` and/or `evaluated`) and unlabeled ones may
/// not be mixed in one file.
inline Dataset load_documents(const std::string& path, DocFormat format, std::string name = {}) {
  if (name.empty()) name = std::filesystem::path(path).stem().string();
  return format == DocFormat::Csv ? detail::load_csv_documents(path, std::move(name))
                                  : detail::load_jsonl(path, std::move(name));
}

inline Dataset load_documents(const std::string& path) { return load_documents(path, format_from_path(path)); }

inline nlohmann::json to_json(const Document& d) {
  nlohmann::json obj;
  obj["id"] = d.id;
  obj["text"] = d.text;
  if (d.expert) {
    obj["labels"] = d.expert->labels.to_vector();
    obj["evaluated"] = d.expert->evaluated.to_vector();
  }
  return obj;
}

inline void write_jsonl(std::ostream& out, const Dataset& ds) {
  for (const auto& d : ds.documents()) {
    out << to_json(d).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
}

inline void save_documents(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  write_jsonl(out, ds);
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

}  // namespace sdgl

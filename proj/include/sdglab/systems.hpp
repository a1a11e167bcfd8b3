#pragma once

// Labeling systems: named per-SDG query sets, detection over datasets, and
// the dense (document, system, SDG) prediction matrix.

#include <algorithm>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "sdglab/corpus.hpp"
#include "sdglab/detail/csv.hpp"
#include "sdglab/error.hpp"
#include "sdglab/parallel.hpp"
#include "sdglab/query.hpp"
#include "sdglab/sdg.hpp"

namespace sdgl {

struct SystemEntry {
  int sdg;
  std::string query_id;
  Query query;
};

struct SystemDefinition {
  std::string name;
  std::vector<SystemEntry> entries;
};

/// Reads a system file (CSV `system,sdg,query_id,query`). One file may hold
/// several systems; they are returned in order of first appearance.
inline std::vector<SystemDefinition> load_systems(const std::string& path) {
  const auto records = detail::parse_csv(detail::read_file(path), path);
  if (records.empty()) throw Error(ErrorCode::Schema, path + ": missing header");
  const detail::CsvHeader header(records.front().fields, {"system", "sdg", "query_id", "query"}, path);
  const auto c_sys = header.at("system"), c_sdg = header.at("sdg"), c_id = header.at("query_id"),
             c_query = header.at("query");
  const auto width = std::max({c_sys, c_sdg, c_id, c_query}) + 1;

  std::vector<SystemDefinition> systems;
  std::map<std::string, std::size_t> by_name;
  std::map<std::string, std::set<std::string>> seen_ids;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = path + ":" + std::to_string(rec.line);
    if (rec.fields.size() < width) throw Error(ErrorCode::Schema, where + ": expected 4 columns");
    const std::string& sys = rec.fields[c_sys];
    const std::string& qid = rec.fields[c_id];
    if (sys.empty()) throw Error(ErrorCode::Schema, where + ": empty system name");
    if (qid.empty()) throw Error(ErrorCode::Schema, where + ": empty query_id");
    const auto sdg = detail::parse_int(rec.fields[c_sdg]);
    if (!sdg || !is_valid_sdg(*sdg)) {
      throw Error(ErrorCode::Schema, where + ": sdg '" + rec.fields[c_sdg] + "' outside 1..17");
    }
    if (!seen_ids[sys].insert(qid).second) {
      throw Error(ErrorCode::Schema, where + ": duplicate query_id '" + qid + "' in system '" + sys + "'");
    }
    Query q = [&] {
      try {
        return parse_query(rec.fields[c_query]);
      } catch (const Error& e) {
        throw Error(e.code(), where + ": system '" + sys + "', query '" + qid + "': " + e.message());
      }
    }();
    auto [it, inserted] = by_name.emplace(sys, systems.size());
    if (inserted) systems.push_back(SystemDefinition{sys, {}});
    systems[it->second].entries.push_back(SystemEntry{static_cast<int>(*sdg), qid, std::move(q)});
  }
  if (systems.empty()) throw Error(ErrorCode::Schema, path + ": no query rows");
  return systems;
}

/// Reads a file that must define exactly one system.
inline SystemDefinition load_system(const std::string& path) {
  auto systems = load_systems(path);
  if (systems.size() != 1) {
    throw Error(ErrorCode::Schema, path + ": expected one system, found " + std::to_string(systems.size()));
  }
  return std::move(systems.front());
}

/// One query of one system matching one document.
struct Hit {
  std::string doc_id;
  std::string system;
  int sdg;
  std::string query_id;
  std::vector<TermHit> matched_terms;

  auto key() const { return std::tie(doc_id, system, sdg, query_id); }
  bool operator==(const Hit&) const = default;
};

/// Evaluates every query of every system on every document. Hits are sorted
/// by (doc_id, system, sdg, query_id) whatever the thread count.
inline std::vector<Hit> detect(const Dataset& dataset, const std::vector<SystemDefinition>& systems,
                               unsigned threads = 1) {
  const auto& docs = dataset.documents();
  std::vector<std::vector<Hit>> per_doc(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) {
    const auto& doc = docs[i];
    const TokenIndex index(doc.tokens);
    for (const auto& sys : systems) {
      for (const auto& entry : sys.entries) {
        auto m = match_query(entry.query, index);
        if (m.matched) {
          per_doc[i].push_back(Hit{doc.id, sys.name, entry.sdg, entry.query_id, std::move(m.matched_terms)});
        }
      }
    }
  });
  std::vector<Hit> hits;
  for (auto& v : per_doc) std::move(v.begin(), v.end(), std::back_inserter(hits));
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.key() < b.key(); });
  return hits;
}

/// Boolean predictions indexed (document, system, SDG) for one dataset.
/// A (document, system) cell is "present" once a prediction for it has been
/// recorded, even if the predicted set is empty.
class PredictionMatrix {
 public:
  PredictionMatrix() = default;
  explicit PredictionMatrix(const Dataset& ds) {
    doc_ids_.reserve(ds.size());
    for (const auto& d : ds.documents()) doc_ids_.push_back(d.id);
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) doc_index_.emplace(doc_ids_[i], i);
  }

  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  const std::vector<std::string>& systems() const noexcept { return systems_; }
  std::size_t num_docs() const noexcept { return doc_ids_.size(); }

  std::optional<std::size_t> system_index(std::string_view name) const {
    for (std::size_t s = 0; s < systems_.size(); ++s) {
      if (systems_[s] == name) return s;
    }
    return std::nullopt;
  }
  std::optional<std::size_t> doc_index(std::string_view id) const {
    auto it = doc_index_.find(std::string(id));
    if (it == doc_index_.end()) return std::nullopt;
    return it->second;
  }

  /// Adds a system column (all cells absent) or returns the existing one.
  std::size_t add_system(const std::string& name) {
    if (auto s = system_index(name)) return *s;
    const std::size_t ns = systems_.size() + 1;
    std::vector<std::uint32_t> masks(num_docs() * ns, 0);
    std::vector<bool> present(num_docs() * ns, false);
    for (std::size_t d = 0; d < num_docs(); ++d) {
      for (std::size_t s = 0; s + 1 < ns; ++s) {
        masks[d * ns + s] = masks_[d * (ns - 1) + s];
        present[d * ns + s] = present_[d * (ns - 1) + s];
      }
    }
    masks_ = std::move(masks);
    present_ = std::move(present);
    systems_.push_back(name);
    return ns - 1;
  }

  /// Marks every document as predicted (possibly empty) by system `s`.
  void mark_all_present(std::size_t s) {
    for (std::size_t d = 0; d < num_docs(); ++d) present_[cell(d, s)] = true;
  }

  void assign(std::size_t doc, std::size_t s, int sdg) {
    if (!is_valid_sdg(sdg)) throw Error(ErrorCode::Schema, "SDG id " + std::to_string(sdg) + " outside 1..17");
    masks_[cell(doc, s)] |= SdgSet{sdg}.mask();
    present_[cell(doc, s)] = true;
  }
  void set_predicted(std::size_t doc, std::size_t s, SdgSet set) {
    masks_[cell(doc, s)] = set.mask();
    present_[cell(doc, s)] = true;
  }

  bool get(std::size_t doc, std::size_t s, int sdg) const { return predicted(doc, s).contains(sdg); }
  SdgSet predicted(std::size_t doc, std::size_t s) const { return SdgSet::from_mask(masks_[cell(doc, s)]); }
  bool present(std::size_t doc, std::size_t s) const { return present_[cell(doc, s)]; }

  /// ORs the columns of `other` (same documents) into this matrix.
  void merge(const PredictionMatrix& other) {
    if (other.doc_ids_ != doc_ids_) {
      throw Error(ErrorCode::Schema, "cannot merge prediction matrices over different documents");
    }
    for (std::size_t os = 0; os < other.systems_.size(); ++os) {
      const std::size_t s = add_system(other.systems_[os]);
      for (std::size_t d = 0; d < num_docs(); ++d) {
        masks_[cell(d, s)] |= other.masks_[other.cell(d, os)];
        if (other.present_[other.cell(d, os)]) present_[cell(d, s)] = true;
      }
    }
  }

  bool operator==(const PredictionMatrix& o) const {
    return doc_ids_ == o.doc_ids_ && systems_ == o.systems_ && masks_ == o.masks_ && present_ == o.present_;
  }

 private:
  std::size_t cell(std::size_t doc, std::size_t s) const {
    if (doc >= num_docs() || s >= systems_.size()) throw std::out_of_range("prediction matrix cell");
    return doc * systems_.size() + s;
  }

  std::vector<std::string> doc_ids_;
  std::map<std::string, std::size_t> doc_index_;
  std::vector<std::string> systems_;
  std::vector<std::uint32_t> masks_;
  std::vector<bool> present_;
};

/// Collapses hits to booleans. Every listed system gets a column and every
/// document a (possibly empty) row. Hits for unknown documents or systems
/// are rejected.
inline PredictionMatrix to_matrix(const std::vector<Hit>& hits, const Dataset& dataset,
                                  const std::vector<std::string>& system_names) {
  PredictionMatrix m(dataset);
  for (const auto& name : system_names) m.mark_all_present(m.add_system(name));
  for (const auto& h : hits) {
    const auto d = m.doc_index(h.doc_id);
    const auto s = m.system_index(h.system);
    if (!d || !s) throw Error(ErrorCode::Schema, "hit for unknown document/system: " + h.doc_id + "/" + h.system);
    m.assign(*d, *s, h.sdg);
  }
  return m;
}

inline PredictionMatrix to_matrix(const std::vector<Hit>& hits, const Dataset& dataset,
                                  const std::vector<SystemDefinition>& systems) {
  std::vector<std::string> names;
  for (const auto& s : systems) names.push_back(s.name);
  return to_matrix(hits, dataset, names);
}

enum class UnknownDocPolicy { Fail, Warn };

/// Imports black-box predictions (CSV `doc_id,sdg`) as a single-system
/// matrix. Documents absent from the file are present with an empty set.
/// Unknown documents fail or are skipped with a message in `warnings`.
inline PredictionMatrix import_external_predictions(const std::string& path, const std::string& system_name,
                                                    const Dataset& dataset,
                                                    UnknownDocPolicy policy = UnknownDocPolicy::Fail,
                                                    std::vector<std::string>* warnings = nullptr) {
  PredictionMatrix m(dataset);
  const auto s = m.add_system(system_name);
  m.mark_all_present(s);
  const auto records = detail::parse_csv(detail::read_file(path), path);
  if (records.empty()) return m;
  const detail::CsvHeader header(records.front().fields, {"doc_id", "sdg"}, path);
  const auto c_doc = header.at("doc_id"), c_sdg = header.at("sdg");
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = path + ":" + std::to_string(rec.line);
    if (rec.fields.size() <= std::max(c_doc, c_sdg)) throw Error(ErrorCode::Schema, where + ": expected 2 columns");
    const auto sdg = detail::parse_int(rec.fields[c_sdg]);
    if (!sdg || !is_valid_sdg(*sdg)) {
      throw Error(ErrorCode::Schema, where + ": sdg '" + rec.fields[c_sdg] + "' outside 1..17");
    }
    const auto d = m.doc_index(rec.fields[c_doc]);
    if (!d) {
      const std::string msg = where + ": unknown doc_id '" + rec.fields[c_doc] + "'";
      if (policy == UnknownDocPolicy::Fail) throw Error(ErrorCode::Schema, msg);
      if (warnings) warnings->push_back(msg);
      continue;
    }
    m.assign(*d, s, static_cast<int>(*sdg));
  }
  return m;
}

struct KeywordCount {
  std::string system;
  std::string term;
  std::size_t count;
  bool operator==(const KeywordCount&) const = default;
};

/// Number of matched positions per (system, literal), summed over documents;
/// sorted by count descending, then system and term.
inline std::vector<KeywordCount> keyword_frequencies(const std::vector<Hit>& hits) {
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto& h : hits) {
    for (const auto& t : h.matched_terms) counts[{h.system, t.pattern}] += t.positions.size();
  }
  std::vector<KeywordCount> out;
  out.reserve(counts.size());
  for (const auto& [key, n] : counts) out.push_back({key.first, key.second, n});
  std::stable_sort(out.begin(), out.end(),
                   [](const KeywordCount& a, const KeywordCount& b) { return a.count > b.count; });
  return out;
}

// ---------------------------------------------------------------------------
// Text forms used by the command-line tool.

/// `pattern:p1 p2;pattern2:p3`
inline std::string format_term_hits(const std::vector<TermHit>& terms) {
  std::string out;
  for (const auto& t : terms) {
    if (!out.empty()) out += ';';
    out += t.pattern;
    out += ':';
    for (std::size_t i = 0; i < t.positions.size(); ++i) {
      if (i) out += ' ';
      out += std::to_string(t.positions[i]);
    }
  }
  return out;
}

inline void write_hits_csv_header(std::ostream& out) {
  out << "dataset,doc_id,system,sdg,query_id,terms\n";
}

inline void write_hits_csv(std::ostream& out, const std::string& dataset, const std::vector<Hit>& hits) {
  for (const auto& h : hits) {
    out << detail::csv_line({dataset, h.doc_id, h.system, std::to_string(h.sdg), h.query_id,
                             format_term_hits(h.matched_terms)});
  }
}

inline void write_predictions_csv_header(std::ostream& out) { out << "dataset,doc_id,system,sdgs\n"; }

/// One row per present (document, system) cell; `sdgs` is a '|' list.
inline void write_predictions_csv(std::ostream& out, const std::string& dataset, const PredictionMatrix& m) {
  for (std::size_t d = 0; d < m.num_docs(); ++d) {
    for (std::size_t s = 0; s < m.systems().size(); ++s) {
      if (!m.present(d, s)) continue;
      out << detail::csv_line({dataset, m.doc_ids()[d], m.systems()[s], to_pipe_list(m.predicted(d, s))});
    }
  }
}

/// Reads a predictions file into one matrix per dataset. Rows naming
/// datasets not in `datasets` are ignored; unknown documents are E_SCHEMA.
inline std::map<std::string, PredictionMatrix> load_predictions_csv(const std::string& path,
                                                                    const std::vector<const Dataset*>& datasets) {
  std::map<std::string, PredictionMatrix> out;
  std::map<std::string, const Dataset*> by_name;
  for (const auto* ds : datasets) {
    by_name[ds->name()] = ds;
    out.emplace(ds->name(), PredictionMatrix(*ds));
  }
  const auto records = detail::parse_csv(detail::read_file(path), path);
  if (records.empty()) throw Error(ErrorCode::Schema, path + ": missing header");
  const detail::CsvHeader header(records.front().fields, {"dataset", "doc_id", "system", "sdgs"}, path);
  const auto c_ds = header.at("dataset"), c_doc = header.at("doc_id"), c_sys = header.at("system"),
             c_sdgs = header.at("sdgs");
  const auto width = std::max({c_ds, c_doc, c_sys, c_sdgs}) + 1;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = path + ":" + std::to_string(rec.line);
    if (rec.fields.size() < width) throw Error(ErrorCode::Schema, where + ": expected 4 columns");
    auto it = out.find(rec.fields[c_ds]);
    if (it == out.end()) continue;
    auto& m = it->second;
    const auto d = m.doc_index(rec.fields[c_doc]);
    if (!d) throw Error(ErrorCode::Schema, where + ": unknown doc_id '" + rec.fields[c_doc] + "'");
    const auto s = m.add_system(rec.fields[c_sys]);
    const auto& sdgs = rec.fields[c_sdgs];
    m.set_predicted(*d, s, sdgs.empty() ? SdgSet{} : detail::parse_sdg_pipe_list(sdgs, where, "sdgs"));
  }
  return out;
}

}  // namespace sdgl

#pragma once

// Scoring of system predictions against expert labels.
//
// Sensitivity is the true-positive rate TP/(TP+FN) and specificity the
// true-negative rate TN/(TN+FP). Some published descriptions swap the two
// parentheticals; these definitions are the conventional ones.

#include <optional>
#include <ostream>
#include <string>

#include "sdglab/corpus.hpp"
#include "sdglab/detail/csv.hpp"
#include "sdglab/error.hpp"
#include "sdglab/systems.hpp"

namespace sdgl {

/// Tallies over evaluated (document, SDG) pairs.
struct ConfusionCounts {
  long long tp = 0;
  long long fp = 0;
  long long tn = 0;
  long long fn = 0;

  long long total() const noexcept { return tp + fp + tn + fn; }

  void add(bool predicted, bool actual) noexcept {
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }

  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Each metric is empty when its denominator is zero.
struct MetricReport {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> accuracy;
  std::optional<double> balanced_accuracy;
  std::optional<double> precision;
  std::optional<double> f1;
};

namespace detail {
inline std::optional<double> ratio(long long num, long long den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace detail

inline MetricReport metrics(const ConfusionCounts& c) {
  MetricReport r;
  r.sensitivity = detail::ratio(c.tp, c.tp + c.fn);
  r.specificity = detail::ratio(c.tn, c.tn + c.fp);
  r.accuracy = detail::ratio(c.tp + c.tn, c.total());
  if (r.sensitivity && r.specificity) r.balanced_accuracy = (*r.sensitivity + *r.specificity) / 2.0;
  r.precision = detail::ratio(c.tp, c.tp + c.fp);
  if (r.precision && r.sensitivity && (*r.precision + *r.sensitivity) > 0.0) {
    r.f1 = 2.0 * *r.precision * *r.sensitivity / (*r.precision + *r.sensitivity);
  }
  return r;
}

/// Micro-averaged confusion table of `system` on `dataset`, restricted to
/// each document's evaluated SDGs.
inline ConfusionCounts confusion(const PredictionMatrix& matrix, const Dataset& dataset, const std::string& system) {
  if (!dataset.labeled()) {
    throw Error(ErrorCode::NoLabels, "dataset '" + dataset.name() + "' has no expert labels");
  }
  const auto s = matrix.system_index(system);
  if (!s) throw Error(ErrorCode::MissingSystem, "no predictions for system '" + system + "'");
  ConfusionCounts c;
  for (const auto& doc : dataset.documents()) {
    const auto d = matrix.doc_index(doc.id);
    if (!d) throw Error(ErrorCode::Schema, "document '" + doc.id + "' missing from prediction matrix");
    const SdgSet predicted = matrix.predicted(*d, *s);
    for (int g : doc.expert->evaluated.to_vector()) c.add(predicted.contains(g), doc.expert->labels.contains(g));
  }
  return c;
}

/// (1 - specificity, sensitivity).
struct RocPoint {
  double x;
  double y;
};

inline RocPoint roc_point(const MetricReport& r) {
  if (!r.sensitivity || !r.specificity) {
    throw Error(ErrorCode::Undefined, "ROC point needs both sensitivity and specificity");
  }
  return {1.0 - *r.specificity, *r.sensitivity};
}

struct SdgsPerDocument {
  double mean_sdgs;
  double mean_words;
};

/// Mean number of SDGs assigned per document, with the mean document length.
inline SdgsPerDocument sdgs_per_document(const PredictionMatrix& matrix, const Dataset& dataset,
                                         const std::string& system) {
  const auto s = matrix.system_index(system);
  if (!s) throw Error(ErrorCode::MissingSystem, "no predictions for system '" + system + "'");
  double total = 0;
  for (const auto& doc : dataset.documents()) {
    const auto d = matrix.doc_index(doc.id);
    if (!d) throw Error(ErrorCode::Schema, "document '" + doc.id + "' missing from prediction matrix");
    total += matrix.predicted(*d, *s).size();
  }
  return {total / static_cast<double>(dataset.size()), dataset.mean_word_count()};
}

inline void write_metrics_csv_header(std::ostream& out) {
  out << "dataset,system,tp,fp,tn,fn,sensitivity,specificity,accuracy,balanced_accuracy,precision,f1\n";
}

inline void write_metrics_csv_row(std::ostream& out, const std::string& dataset, const std::string& system,
                                  const ConfusionCounts& c, const MetricReport& r) {
  using detail::format_optional;
  out << detail::csv_line({dataset, system, std::to_string(c.tp), std::to_string(c.fp), std::to_string(c.tn),
                           std::to_string(c.fn), format_optional(r.sensitivity), format_optional(r.specificity),
                           format_optional(r.accuracy), format_optional(r.balanced_accuracy),
                           format_optional(r.precision), format_optional(r.f1)});
}

}  // namespace sdgl

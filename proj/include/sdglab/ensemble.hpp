#pragma once

// Per-SDG random-forest ensembles over base-system predictions.
//
// For goal g, a document's features are one 0/1 column per base system
// ("the system assigned g") followed, optionally, by the document's word
// count. Labeled rows weigh 1/N (N = documents in their dataset) so every
// dataset counts equally; synthetic negatives weigh k/N.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "sdglab/corpus.hpp"
#include "sdglab/detail/csv.hpp"
#include "sdglab/error.hpp"
#include "sdglab/evaluation.hpp"
#include "sdglab/forest.hpp"
#include "sdglab/parallel.hpp"
#include "sdglab/random.hpp"
#include "sdglab/sdg.hpp"
#include "sdglab/systems.hpp"

namespace sdgl {

inline constexpr double kMaxSyntheticFactor = 10.0;

struct FeatureSchema {
  std::vector<std::string> systems;
  bool include_length = true;

  std::size_t size() const noexcept { return systems.size() + (include_length ? 1 : 0); }
  std::vector<std::string> names() const {
    auto out = systems;
    if (include_length) out.emplace_back("word_count");
    return out;
  }
  bool operator==(const FeatureSchema&) const = default;
};

struct FeatureRow {
  std::string doc_id;
  int sdg = 0;
  std::vector<double> features;
  bool label = false;
  double weight = 0.0;
  std::string origin;  // dataset name
  bool synthetic = false;
};

/// Rows for each SDG (index 0 = SDG 1).
struct TrainingSet {
  FeatureSchema schema;
  std::array<std::vector<FeatureRow>, kNumSdgs> rows;
  double k = 0.0;

  std::vector<FeatureRow>& for_sdg(int sdg) { return rows.at(static_cast<std::size_t>(sdg - 1)); }
  const std::vector<FeatureRow>& for_sdg(int sdg) const { return rows.at(static_cast<std::size_t>(sdg - 1)); }
};

/// A dataset paired with the base-system predictions made on it.
struct PredictedDataset {
  const Dataset* dataset;
  const PredictionMatrix* matrix;
};

namespace detail {

inline std::vector<std::size_t> system_columns(const FeatureSchema& schema, const PredictionMatrix& m,
                                               const Dataset& ds) {
  std::vector<std::size_t> cols;
  for (const auto& s : schema.systems) {
    const auto c = m.system_index(s);
    if (!c) throw Error(ErrorCode::MissingSystem, "no predictions of system '" + s + "' for dataset '" + ds.name() + "'");
    cols.push_back(*c);
  }
  return cols;
}

inline std::vector<double> document_features(const FeatureSchema& schema, const std::vector<SdgSet>& predicted,
                                             std::size_t word_count, int sdg) {
  std::vector<double> f;
  f.reserve(schema.size());
  for (const auto& p : predicted) f.push_back(p.contains(sdg) ? 1.0 : 0.0);
  if (schema.include_length) f.push_back(static_cast<double>(word_count));
  return f;
}

inline std::vector<SdgSet> document_predictions(const PredictionMatrix& m, const std::vector<std::size_t>& cols,
                                                const Dataset& ds, const Document& doc,
                                                const FeatureSchema& schema) {
  const auto d = m.doc_index(doc.id);
  std::vector<SdgSet> out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (!d || !m.present(*d, cols[i])) {
      throw Error(ErrorCode::MissingSystem, "system '" + schema.systems[i] + "' has no prediction for document '" +
                                                doc.id + "' in dataset '" + ds.name() + "'");
    }
    out.push_back(m.predicted(*d, cols[i]));
  }
  return out;
}

}  // namespace detail

/// Builds per-SDG feature rows. Labeled documents yield one row per evaluated
/// SDG with weight 1/N; synthetic documents yield 17 negative rows with
/// weight k/N, and none at all when k = 0.
inline TrainingSet build_features(const FeatureSchema& schema, const std::vector<PredictedDataset>& labeled,
                                  const std::vector<PredictedDataset>& synthetic, double k) {
  if (schema.systems.empty()) throw Error(ErrorCode::Params, "feature schema needs at least one system");
  if (!(k >= 0.0 && k <= kMaxSyntheticFactor)) {
    throw Error(ErrorCode::Params, "synthetic factor k must lie in [0, 10]");
  }
  TrainingSet set;
  set.schema = schema;
  set.k = k;
  auto add_source = [&](const PredictedDataset& src, bool is_synthetic) {
    const Dataset& ds = *src.dataset;
    if (!is_synthetic && !ds.labeled()) {
      throw Error(ErrorCode::NoLabels, "dataset '" + ds.name() + "' has no expert labels");
    }
    const auto cols = detail::system_columns(schema, *src.matrix, ds);
    const double n = static_cast<double>(ds.size());
    const double weight = is_synthetic ? k / n : 1.0 / n;
    for (const auto& doc : ds.documents()) {
      const auto predicted = detail::document_predictions(*src.matrix, cols, ds, doc, schema);
      if (is_synthetic && k == 0.0) continue;
      const SdgSet evaluated = is_synthetic ? SdgSet::all() : doc.expert->evaluated;
      for (int g : evaluated.to_vector()) {
        FeatureRow row;
        row.doc_id = doc.id;
        row.sdg = g;
        row.features = detail::document_features(schema, predicted, doc.word_count(), g);
        row.label = !is_synthetic && doc.expert->labels.contains(g);
        row.weight = weight;
        row.origin = ds.name();
        row.synthetic = is_synthetic;
        set.for_sdg(g).push_back(std::move(row));
      }
    }
  };
  for (const auto& src : labeled) add_source(src, false);
  for (const auto& src : synthetic) add_source(src, true);
  return set;
}

inline Samples to_samples(const std::vector<FeatureRow>& rows, std::size_t num_features) {
  Samples s;
  s.num_features = num_features;
  for (const auto& r : rows) s.add(r.features, r.label, r.weight);
  return s;
}

struct EnsembleModel {
  FeatureSchema schema;
  std::array<Forest, kNumSdgs> forests;
  ForestParams params;
  double k = 0.0;
  double threshold = 0.5;
  std::vector<std::string> datasets;
  std::vector<int> constant_sdgs;  // goals whose training rows held a single class

  const Forest& forest(int sdg) const { return forests.at(static_cast<std::size_t>(sdg - 1)); }
};

/// Trains one forest per SDG. A goal whose rows hold a single class gets a
/// one-leaf constant forest and is listed in `constant_sdgs`.
inline EnsembleModel train_ensemble(const TrainingSet& set, const ForestParams& params, double threshold = 0.5) {
  validate(params, set.schema.size());
  EnsembleModel model;
  model.schema = set.schema;
  model.params = params;
  model.k = set.k;
  model.threshold = threshold;
  std::set<std::string> origins;
  std::array<bool, kNumSdgs> constant{};
  ForestParams inner = params;
  inner.threads = 1;
  parallel_for(kNumSdgs, params.threads, [&](std::size_t i) {
    const auto& rows = set.rows[i];
    ForestParams p = inner;
    p.seed = sub_seed(params.seed, i);
    try {
      model.forests[i] = train_forest(to_samples(rows, set.schema.size()), p);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::OneClass) throw;
      const bool positive = std::any_of(rows.begin(), rows.end(), [](const FeatureRow& r) { return r.label; });
      model.forests[i] = Forest(set.schema.size(), {DecisionTree::leaf(positive ? 1.0 : 0.0)});
      constant[i] = true;
    }
  });
  for (std::size_t i = 0; i < constant.size(); ++i) {
    if (constant[i]) model.constant_sdgs.push_back(static_cast<int>(i) + 1);
  }
  for (const auto& rows : set.rows) {
    for (const auto& r : rows) origins.insert(r.origin);
  }
  model.datasets.assign(origins.begin(), origins.end());
  return model;
}

struct EnsemblePrediction {
  SdgSet assigned;
  std::array<double, kNumSdgs> scores{};
};

/// Score for one SDG from a feature vector laid out per the model schema.
inline double predict_score(const EnsembleModel& model, int sdg, std::span<const double> features) {
  if (features.size() != model.schema.size()) {
    throw Error(ErrorCode::SchemaMismatch, "expected " + std::to_string(model.schema.size()) + " features");
  }
  return model.forest(sdg).predict(features);
}

/// `system_predictions` is aligned with model.schema.systems.
inline EnsemblePrediction predict(const EnsembleModel& model, const std::vector<SdgSet>& system_predictions,
                                  std::size_t word_count) {
  if (system_predictions.size() != model.schema.systems.size()) {
    throw Error(ErrorCode::SchemaMismatch, "model expects " + std::to_string(model.schema.systems.size()) +
                                               " base systems, got " + std::to_string(system_predictions.size()));
  }
  EnsemblePrediction out;
  for (int g = 1; g <= kNumSdgs; ++g) {
    const auto f = detail::document_features(model.schema, system_predictions, word_count, g);
    const double s = model.forest(g).predict(f);
    out.scores[static_cast<std::size_t>(g - 1)] = s;
    if (s >= model.threshold) out.assigned.insert(g);
  }
  return out;
}

/// Predicts every document of a dataset. The matrix must carry every base
/// system the model was trained on (E_SCHEMA_MISMATCH otherwise).
inline std::vector<EnsemblePrediction> predict(const EnsembleModel& model, const Dataset& ds,
                                               const PredictionMatrix& m) {
  std::vector<std::size_t> cols;
  for (const auto& s : model.schema.systems) {
    const auto c = m.system_index(s);
    if (!c) throw Error(ErrorCode::SchemaMismatch, "predictions lack base system '" + s + "' used by the model");
    cols.push_back(*c);
  }
  std::vector<EnsemblePrediction> out;
  out.reserve(ds.size());
  for (const auto& doc : ds.documents()) {
    const auto d = m.doc_index(doc.id);
    if (!d) throw Error(ErrorCode::SchemaMismatch, "document '" + doc.id + "' missing from predictions");
    std::vector<SdgSet> preds;
    for (auto c : cols) preds.push_back(m.predicted(*d, c));
    out.push_back(predict(model, preds, doc.word_count()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CvConfig {
  std::size_t folds = 5;
  std::size_t repeats = 2;
  std::uint64_t seed = 0;
  double k = 1.0;  // synthetic factor applied to training folds
};

struct DocKey {
  std::string origin;
  std::string doc_id;
  auto operator<=>(const DocKey&) const = default;
};

/// Fold of every document for one repeat. Documents are stratified by
/// (dataset, has any positive label); within a stratum they are shuffled and
/// dealt round-robin, the deal continuing across strata.
inline std::map<DocKey, std::size_t> assign_folds(const TrainingSet& set, std::size_t folds, std::uint64_t seed) {
  std::map<DocKey, bool> positive;
  for (const auto& rows : set.rows) {
    for (const auto& r : rows) positive[{r.origin, r.doc_id}] |= r.label;
  }
  std::map<std::pair<std::string, bool>, std::vector<DocKey>> strata;
  for (const auto& [key, pos] : positive) strata[{key.origin, pos}].push_back(key);
  Rng rng(seed);
  std::map<DocKey, std::size_t> out;
  std::size_t dealt = 0;
  for (auto& [stratum, docs] : strata) {
    rng.shuffle(docs);
    for (const auto& d : docs) out[d] = dealt++ % folds;
  }
  return out;
}

struct OofPrediction {
  int sdg;
  std::size_t repeat;
  std::size_t fold;
  std::string origin;
  std::string doc_id;
  bool synthetic;
  bool label;
  double score;
  bool predicted;
};

struct FoldReport {
  int sdg;
  std::size_t fold;
  std::size_t repeat;
  ConfusionCounts labeled;    // labeled test rows
  ConfusionCounts synthetic;  // synthetic test rows (all negatives)
};

struct SkippedFold {
  int sdg;
  std::size_t fold;
  std::size_t repeat;
  std::string reason;
};

struct CvResult {
  std::vector<FoldReport> folds;
  std::vector<SkippedFold> skipped;
  std::vector<OofPrediction> predictions;
  ConfusionCounts pooled;                           // all labeled out-of-fold rows
  std::map<std::string, ConfusionCounts> by_dataset;  // labeled rows per dataset
  ConfusionCounts synthetic;                        // synthetic out-of-fold rows

  MetricReport pooled_metrics() const { return metrics(pooled); }

  /// Equal-weight mean of per-dataset accuracies.
  std::optional<double> dataset_mean_accuracy() const {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& [name, c] : by_dataset) {
      if (auto a = metrics(c).accuracy) {
        sum += *a;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }

  /// Share of synthetic (SDG-negative) rows predicted positive.
  std::optional<double> synthetic_false_positive_rate() const {
    return detail::ratio(synthetic.fp, synthetic.fp + synthetic.tn);
  }
};

namespace detail {

/// Training weights for one CV fold: labeled rows keep their weight,
/// synthetic rows get k / N_origin and are left out when k = 0.
inline std::map<std::string, double> synthetic_origin_sizes(const TrainingSet& set) {
  std::map<std::string, std::set<std::string>> docs;
  for (const auto& rows : set.rows) {
    for (const auto& r : rows) {
      if (r.synthetic) docs[r.origin].insert(r.doc_id);
    }
  }
  std::map<std::string, double> out;
  for (const auto& [origin, ids] : docs) out[origin] = static_cast<double>(ids.size());
  return out;
}

struct CvTask {
  std::size_t repeat;
  std::size_t fold;
  int sdg;
};

template <typename OnFold>
void run_cv_tasks(const TrainingSet& set, const CvConfig& cv, const ForestParams& params, OnFold&& on_fold) {
  if (cv.folds < 2) throw Error(ErrorCode::Params, "cross-validation needs at least 2 folds");
  if (cv.repeats < 1) throw Error(ErrorCode::Params, "cross-validation needs at least 1 repeat");
  if (!(cv.k >= 0.0 && cv.k <= kMaxSyntheticFactor)) throw Error(ErrorCode::Params, "k must lie in [0, 10]");
  validate(params, set.schema.size());
  const auto synth_sizes = synthetic_origin_sizes(set);
  std::vector<std::map<DocKey, std::size_t>> assignment;
  for (std::size_t r = 0; r < cv.repeats; ++r) assignment.push_back(assign_folds(set, cv.folds, sub_seed(cv.seed, r)));

  std::vector<CvTask> tasks;
  for (std::size_t r = 0; r < cv.repeats; ++r) {
    for (std::size_t f = 0; f < cv.folds; ++f) {
      for (int g = 1; g <= kNumSdgs; ++g) tasks.push_back({r, f, g});
    }
  }
  ForestParams inner = params;
  inner.threads = 1;
  parallel_for(tasks.size(), params.threads, [&](std::size_t t) {
    const auto& task = tasks[t];
    const auto& rows = set.for_sdg(task.sdg);
    const auto& folds = assignment[task.repeat];
    Samples train;
    train.num_features = set.schema.size();
    std::vector<const FeatureRow*> test;
    for (const auto& row : rows) {
      if (folds.at({row.origin, row.doc_id}) == task.fold) {
        test.push_back(&row);
        continue;
      }
      const double w = row.synthetic ? cv.k / synth_sizes.at(row.origin) : row.weight;
      if (w > 0.0) train.add(row.features, row.label, w);
    }
    ForestParams p = inner;
    p.seed = sub_seed(params.seed, t);
    std::optional<Forest> forest;
    std::string reason;
    try {
      forest = train_forest(train, p);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::OneClass) throw;
      reason = e.message();
    }
    on_fold(t, task, forest ? &*forest : nullptr, test, reason);
  });
}

}  // namespace detail

/// Repeated stratified k-fold cross-validation with document-level folds:
/// all rows of a document share its fold across SDGs. Synthetic rows in
/// training folds are reweighted to cv.k / N; synthetic rows are always
/// scored in test folds. A (SDG, fold) whose training rows hold a single
/// class is skipped and recorded in `skipped`.
inline CvResult cross_validate(const TrainingSet& set, const CvConfig& cv, const ForestParams& params,
                               double threshold = 0.5) {
  struct TaskOut {
    std::optional<FoldReport> report;
    std::optional<SkippedFold> skipped;
    std::vector<OofPrediction> predictions;
  };
  std::vector<TaskOut> outs(cv.repeats * cv.folds * kNumSdgs);
  detail::run_cv_tasks(set, cv, params,
                       [&](std::size_t t, const detail::CvTask& task, const Forest* forest,
                           const std::vector<const FeatureRow*>& test, const std::string& reason) {
                         auto& out = outs[t];
                         if (!forest) {
                           out.skipped = SkippedFold{task.sdg, task.fold, task.repeat, reason};
                           return;
                         }
                         FoldReport rep{task.sdg, task.fold, task.repeat, {}, {}};
                         for (const auto* row : test) {
                           const double s = forest->predict(row->features);
                           const bool predicted = s >= threshold;
                           (row->synthetic ? rep.synthetic : rep.labeled).add(predicted, row->label);
                           out.predictions.push_back({task.sdg, task.repeat, task.fold, row->origin, row->doc_id,
                                                      row->synthetic, row->label, s, predicted});
                         }
                         out.report = rep;
                       });
  CvResult result;
  for (auto& out : outs) {
    if (out.skipped) result.skipped.push_back(*out.skipped);
    if (out.report) {
      result.folds.push_back(*out.report);
      result.pooled += out.report->labeled;
      result.synthetic += out.report->synthetic;
    }
    for (auto& p : out.predictions) {
      if (!p.synthetic) result.by_dataset[p.origin].add(p.predicted, p.label);
      result.predictions.push_back(std::move(p));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Permutation importance

/// Importance of each feature per SDG; `evaluated[g-1]` is false when there
/// were no rows to score for that goal.
struct ImportanceTable {
  std::vector<std::string> features;
  std::array<std::vector<double>, kNumSdgs> values;
  std::array<bool, kNumSdgs> evaluated{};
};

namespace detail {

inline double weighted_accuracy(const Forest& forest, const std::vector<const FeatureRow*>& rows,
                                const std::vector<std::vector<double>>& x, double threshold) {
  double hit = 0, total = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool predicted = forest.predict(x[i]) >= threshold;
    total += rows[i]->weight;
    if (predicted == rows[i]->label) hit += rows[i]->weight;
  }
  return total > 0 ? hit / total : 0.0;
}

/// Mean drop in weighted accuracy when feature f is shuffled, per feature.
inline std::vector<double> importance_for(const Forest& forest, const std::vector<const FeatureRow*>& rows,
                                          std::size_t num_features, std::size_t repetitions, std::uint64_t seed,
                                          double threshold) {
  std::vector<std::vector<double>> x;
  x.reserve(rows.size());
  for (const auto* r : rows) x.push_back(r->features);
  const double baseline = weighted_accuracy(forest, rows, x, threshold);
  std::vector<double> out(num_features, 0.0);
  for (std::size_t f = 0; f < num_features; ++f) {
    double drop = 0;
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      Rng rng(sub_seed(seed, f * repetitions + rep));
      std::vector<double> column(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) column[i] = x[i][f];
      rng.shuffle(column);
      auto permuted = x;
      for (std::size_t i = 0; i < rows.size(); ++i) permuted[i][f] = column[i];
      drop += baseline - weighted_accuracy(forest, rows, permuted, threshold);
    }
    out[f] = drop / static_cast<double>(repetitions);
  }
  return out;
}

}  // namespace detail

/// Permutation importance of a trained model on the given rows (normally
/// held out): mean over repetitions of the drop in row-weighted accuracy
/// after shuffling one feature column.
inline ImportanceTable permutation_importance(const EnsembleModel& model, const TrainingSet& rows,
                                              std::size_t repetitions = 10, std::uint64_t seed = 0) {
  if (repetitions == 0) throw Error(ErrorCode::Params, "repetitions must be at least 1");
  if (!(rows.schema == model.schema)) throw Error(ErrorCode::SchemaMismatch, "rows do not match the model's features");
  ImportanceTable table;
  table.features = model.schema.names();
  parallel_for(kNumSdgs, model.params.threads, [&](std::size_t i) {
    const auto& sdg_rows = rows.rows[i];
    table.values[i].assign(model.schema.size(), 0.0);
    if (sdg_rows.empty()) return;
    std::vector<const FeatureRow*> ptrs;
    for (const auto& r : sdg_rows) ptrs.push_back(&r);
    table.values[i] = detail::importance_for(model.forests[i], ptrs, model.schema.size(), repetitions,
                                             sub_seed(seed, i), model.threshold);
    table.evaluated[i] = true;
  });
  return table;
}

/// Permutation importance on out-of-fold rows, averaged over every trained
/// (fold, repeat) of each SDG.
inline ImportanceTable cv_permutation_importance(const TrainingSet& set, const CvConfig& cv,
                                                 const ForestParams& params, std::size_t repetitions = 10,
                                                 double threshold = 0.5) {
  if (repetitions == 0) throw Error(ErrorCode::Params, "repetitions must be at least 1");
  const std::size_t p = set.schema.size();
  std::vector<std::optional<std::vector<double>>> per_task(cv.repeats * cv.folds * kNumSdgs);
  detail::run_cv_tasks(set, cv, params,
                       [&](std::size_t t, const detail::CvTask&, const Forest* forest,
                           const std::vector<const FeatureRow*>& test, const std::string&) {
                         if (!forest || test.empty()) return;
                         per_task[t] = detail::importance_for(*forest, test, p, repetitions,
                                                              sub_seed(cv.seed ^ params.seed, t), threshold);
                       });
  ImportanceTable table;
  table.features = set.schema.names();
  std::array<std::size_t, kNumSdgs> n{};
  for (auto& v : table.values) v.assign(p, 0.0);
  for (std::size_t t = 0; t < per_task.size(); ++t) {
    if (!per_task[t]) continue;
    const auto g = t % kNumSdgs;
    for (std::size_t f = 0; f < p; ++f) table.values[g][f] += (*per_task[t])[f];
    ++n[g];
  }
  for (std::size_t g = 0; g < kNumSdgs; ++g) {
    if (n[g] == 0) continue;
    table.evaluated[g] = true;
    for (auto& v : table.values[g]) v /= static_cast<double>(n[g]);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Model file
//
// A single JSON document:
//   { "format": "sdglab-ensemble", "version": 1,
//     "feature_schema": { "systems": [...], "include_length": bool, "features": [...] },
//     "k": number, "seed": number, "threshold": number, "datasets": [...],
//     "params": { "num_trees", "mtry", "min_leaf_weight_fraction", "max_depth", "bootstrap" },
//     "constant_sdgs": [...],
//     "forests": [ 17 x { "sdg": g, "trees": [ { "feature": [...], "threshold": [...],
//                                                 "left": [...], "right": [...], "value": [...] } ] } ] }
// Tree arrays are indexed by node; node 0 is the root; feature -1 marks a leaf
// whose positive-class fraction is `value`.

inline constexpr const char* kModelFormat = "sdglab-ensemble";
inline constexpr int kModelVersion = 1;

inline nlohmann::json model_to_json(const EnsembleModel& m) {
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["feature_schema"] = {{"systems", m.schema.systems},
                         {"include_length", m.schema.include_length},
                         {"features", m.schema.names()}};
  j["k"] = m.k;
  j["seed"] = m.params.seed;
  j["threshold"] = m.threshold;
  j["datasets"] = m.datasets;
  j["params"] = {{"num_trees", m.params.num_trees},
                 {"mtry", m.params.mtry},
                 {"min_leaf_weight_fraction", m.params.min_leaf_weight_fraction},
                 {"max_depth", m.params.max_depth},
                 {"bootstrap", m.params.bootstrap}};
  j["constant_sdgs"] = m.constant_sdgs;
  auto forests = nlohmann::json::array();
  for (int g = 1; g <= kNumSdgs; ++g) {
    auto trees = nlohmann::json::array();
    for (const auto& tree : m.forest(g).trees()) {
      std::vector<std::int32_t> feature;
      std::vector<double> threshold, value;
      std::vector<std::uint32_t> left, right;
      for (const auto& n : tree.nodes()) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.positive_fraction);
      }
      trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
                       {"value", value}});
    }
    forests.push_back({{"sdg", g}, {"trees", trees}});
  }
  j["forests"] = forests;
  return j;
}

namespace detail {

inline DecisionTree tree_from_json(const nlohmann::json& t, std::size_t num_features) {
  const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
  const auto threshold = t.at("threshold").get<std::vector<double>>();
  const auto left = t.at("left").get<std::vector<std::uint32_t>>();
  const auto right = t.at("right").get<std::vector<std::uint32_t>>();
  const auto value = t.at("value").get<std::vector<double>>();
  const std::size_t n = feature.size();
  if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || value.size() != n) {
    throw Error(ErrorCode::Corrupt, "tree arrays have inconsistent lengths");
  }
  std::vector<TreeNode> nodes(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(value[i] >= 0.0 && value[i] <= 1.0)) throw Error(ErrorCode::Corrupt, "leaf fraction outside [0, 1]");
    if (feature[i] >= 0) {
      if (static_cast<std::size_t>(feature[i]) >= num_features) throw Error(ErrorCode::Corrupt, "feature index out of range");
      // children always follow their parent, which also rules out cycles
      if (left[i] <= i || right[i] <= i || left[i] >= n || right[i] >= n) {
        throw Error(ErrorCode::Corrupt, "invalid child index");
      }
    } else if (feature[i] != -1) {
      throw Error(ErrorCode::Corrupt, "invalid feature index");
    }
    nodes[i] = TreeNode{feature[i], threshold[i], left[i], right[i], value[i]};
  }
  return DecisionTree(std::move(nodes));
}

}  // namespace detail

inline EnsembleModel model_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("format", std::string{}) != kModelFormat) {
      throw Error(ErrorCode::Corrupt, "not an ensemble model file");
    }
    const int version = j.at("version").get<int>();
    if (version != kModelVersion) {
      throw Error(ErrorCode::Version, "unsupported model version " + std::to_string(version) + " (expected " +
                                          std::to_string(kModelVersion) + ")");
    }
    EnsembleModel m;
    const auto& fs = j.at("feature_schema");
    m.schema.systems = fs.at("systems").get<std::vector<std::string>>();
    m.schema.include_length = fs.at("include_length").get<bool>();
    if (fs.at("features").get<std::vector<std::string>>() != m.schema.names()) {
      throw Error(ErrorCode::Corrupt, "feature list does not match the schema");
    }
    m.k = j.at("k").get<double>();
    m.params.seed = j.at("seed").get<std::uint64_t>();
    m.threshold = j.at("threshold").get<double>();
    m.datasets = j.at("datasets").get<std::vector<std::string>>();
    const auto& p = j.at("params");
    m.params.num_trees = p.at("num_trees").get<std::size_t>();
    m.params.mtry = p.at("mtry").get<std::size_t>();
    m.params.min_leaf_weight_fraction = p.at("min_leaf_weight_fraction").get<double>();
    m.params.max_depth = p.at("max_depth").get<std::size_t>();
    m.params.bootstrap = p.at("bootstrap").get<bool>();
    m.constant_sdgs = j.at("constant_sdgs").get<std::vector<int>>();
    const auto& forests = j.at("forests");
    if (!forests.is_array() || forests.size() != static_cast<std::size_t>(kNumSdgs)) {
      throw Error(ErrorCode::Corrupt, "expected 17 forests");
    }
    for (std::size_t i = 0; i < forests.size(); ++i) {
      if (forests[i].at("sdg").get<int>() != static_cast<int>(i) + 1) throw Error(ErrorCode::Corrupt, "forests out of order");
      std::vector<DecisionTree> trees;
      for (const auto& t : forests[i].at("trees")) trees.push_back(detail::tree_from_json(t, m.schema.size()));
      if (trees.empty()) throw Error(ErrorCode::Corrupt, "empty forest");
      m.forests[i] = Forest(m.schema.size(), std::move(trees));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Corrupt, std::string("malformed model: ") + e.what());
  }
}

inline void save_model(const EnsembleModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << model_to_json(model).dump() << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

inline EnsembleModel load_model(const std::string& path) {
  const std::string text = detail::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Corrupt, path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace sdgl

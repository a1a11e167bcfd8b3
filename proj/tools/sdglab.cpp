// sdglab: detect SDG labels with query systems, score them, and train
// per-SDG forest ensembles over their predictions.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "report.hpp"
#include "sdglab/sdglab.hpp"

#ifndef SDGLAB_VERSION
#define SDGLAB_VERSION "0.0.0"
#endif

namespace {

using namespace sdglab_cli;
using sdgl::Error;
using sdgl::ErrorCode;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDegenerate = 4;

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::Params:
      return kExitUsage;
    case ErrorCode::Degenerate:
    case ErrorCode::Undefined:
    case ErrorCode::OneClass:
      return kExitDegenerate;
    default:
      return kExitData;
  }
}

struct Globals {
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out_dir = "out";
  bool json = false;
};

// ---------------------------------------------------------------------------
// loading helpers

/// Datasets at stable addresses, in the order given.
struct Corpus {
  std::deque<sdgl::Dataset> datasets;
  std::map<std::string, sdgl::PredictionMatrix> matrices;

  std::vector<const sdgl::Dataset*> pointers() const {
    std::vector<const sdgl::Dataset*> out;
    for (const auto& d : datasets) out.push_back(&d);
    return out;
  }
  const sdgl::PredictionMatrix& matrix(const sdgl::Dataset& ds) const { return matrices.at(ds.name()); }
};

void load_datasets(Run& run, Corpus& corpus, const std::vector<std::string>& paths) {
  for (const auto& p : paths) {
    run.note_input(p);
    auto ds = sdgl::load_documents(p);
    for (const auto& other : corpus.datasets) {
      if (other.name() == ds.name()) {
        throw Error(ErrorCode::Params, "two datasets named '" + ds.name() + "'; dataset names come from file stems");
      }
    }
    corpus.matrices.emplace(ds.name(), sdgl::PredictionMatrix(ds));
    corpus.datasets.push_back(std::move(ds));
  }
}

void load_predictions(Run& run, Corpus& corpus, const std::vector<std::string>& paths) {
  for (const auto& p : paths) {
    run.note_input(p);
    for (auto& [name, m] : sdgl::load_predictions_csv(p, corpus.pointers())) corpus.matrices.at(name).merge(m);
  }
}

/// Systems with a prediction for every document of `ds`, in column order.
std::vector<std::string> complete_systems(const sdgl::PredictionMatrix& m, Run& run, const std::string& dataset) {
  std::vector<std::string> out;
  for (std::size_t s = 0; s < m.systems().size(); ++s) {
    std::size_t present = 0;
    for (std::size_t d = 0; d < m.num_docs(); ++d) present += m.present(d, s);
    if (present == m.num_docs()) {
      out.push_back(m.systems()[s]);
    } else if (present > 0) {
      run.warn("system '" + m.systems()[s] + "' lacks predictions for " + std::to_string(m.num_docs() - present) +
               " documents of '" + dataset + "'; skipped");
    }
  }
  return out;
}

Table predictions_table() { return Table({"dataset", "doc_id", "system", "sdgs"}); }

void add_predictions(Table& t, const std::string& dataset, const sdgl::PredictionMatrix& m) {
  for (std::size_t d = 0; d < m.num_docs(); ++d) {
    for (std::size_t s = 0; s < m.systems().size(); ++s) {
      if (m.present(d, s)) t.add(dataset, m.doc_ids()[d], m.systems()[s], sdgl::to_pipe_list(m.predicted(d, s)));
    }
  }
}

/// Records every option of `cmd` as it was resolved (flag, config or default).
void record_params(Run& run, const CLI::App& cmd, const Globals& g) {
  auto& p = run.params();
  p["seed"] = g.seed;
  for (const auto* opt : cmd.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    const bool flag = opt->get_expected_max() == 0;
    const bool list = opt->get_expected_max() > 1;
    const auto& r = opt->results();
    if (flag) {
      p[name] = opt->count() > 0;
    } else if (list) {
      // options given as one delimited value are stored split
      p[name] = opt->count() > 0 ? opt->as<std::vector<std::string>>() : std::vector<std::string>{};
      if (opt->count() == 0 && !opt->get_default_str().empty()) p[name] = opt->get_default_str();
    } else {
      p[name] = opt->count() > 0 && !r.empty() ? r.front() : opt->get_default_str();
    }
  }
}

// ---------------------------------------------------------------------------
// detect

struct DetectArgs {
  std::vector<std::string> data, systems, external;
  std::string unknown_docs = "fail";
};

int cmd_detect(const DetectArgs& a, const Globals& g, Run& run) {
  Corpus corpus;
  load_datasets(run, corpus, a.data);
  std::vector<sdgl::SystemDefinition> systems;
  for (const auto& p : a.systems) {
    run.note_input(p);
    for (auto& s : sdgl::load_systems(p)) {
      for (const auto& other : systems) {
        if (other.name == s.name) throw Error(ErrorCode::Schema, "system '" + s.name + "' defined twice");
      }
      systems.push_back(std::move(s));
    }
  }
  if (systems.empty() && a.external.empty()) throw Error(ErrorCode::Params, "detect needs --systems or --external");

  Table hits({"dataset", "doc_id", "system", "sdg", "query_id", "terms"});
  Table preds = predictions_table();
  std::vector<sdgl::Hit> all_hits;
  for (const auto& ds : corpus.datasets) {
    auto found = sdgl::detect(ds, systems, g.threads);
    for (const auto& h : found) {
      hits.add(ds.name(), h.doc_id, h.system, h.sdg, h.query_id, sdgl::format_term_hits(h.matched_terms));
    }
    corpus.matrices.at(ds.name()) = sdgl::to_matrix(found, ds, systems);
    all_hits.insert(all_hits.end(), std::make_move_iterator(found.begin()), std::make_move_iterator(found.end()));
  }

  // --external SYSTEM:DATASET=PATH
  const auto policy = a.unknown_docs == "warn" ? sdgl::UnknownDocPolicy::Warn : sdgl::UnknownDocPolicy::Fail;
  for (const auto& spec : a.external) {
    const auto colon = spec.find(':'), eq = spec.find('=');
    if (colon == std::string::npos || eq == std::string::npos || eq < colon) {
      throw Error(ErrorCode::Params, "--external expects SYSTEM:DATASET=PATH, got '" + spec + "'");
    }
    const auto system = spec.substr(0, colon), dataset = spec.substr(colon + 1, eq - colon - 1),
               path = spec.substr(eq + 1);
    auto it = std::find_if(corpus.datasets.begin(), corpus.datasets.end(),
                           [&](const sdgl::Dataset& d) { return d.name() == dataset; });
    if (it == corpus.datasets.end()) throw Error(ErrorCode::Params, "--external names unknown dataset '" + dataset + "'");
    run.note_input(path);
    std::vector<std::string> warnings;
    corpus.matrices.at(dataset).merge(sdgl::import_external_predictions(path, system, *it, policy, &warnings));
    for (const auto& w : warnings) run.warn(w);
  }
  for (const auto& ds : corpus.datasets) add_predictions(preds, ds.name(), corpus.matrices.at(ds.name()));

  Table keywords({"system", "term", "count"});
  for (const auto& k : sdgl::keyword_frequencies(all_hits)) keywords.add(k.system, k.term, k.count);

  run.table("hits", hits);
  run.table("predictions", preds);
  run.table("keywords", keywords);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::vector<std::string> data, predictions;
};

int cmd_evaluate(const EvaluateArgs& a, Run& run) {
  Corpus corpus;
  load_datasets(run, corpus, a.data);
  load_predictions(run, corpus, a.predictions);
  if (std::none_of(corpus.datasets.begin(), corpus.datasets.end(), [](const auto& d) { return d.labeled(); })) {
    throw Error(ErrorCode::NoLabels, "evaluate needs at least one labeled dataset");
  }
  Table metrics({"dataset", "system", "tp", "fp", "tn", "fn", "sensitivity", "specificity", "accuracy",
                 "balanced_accuracy", "precision", "f1"});
  Table roc({"dataset", "system", "false_positive_rate", "true_positive_rate"});
  Table per_doc({"dataset", "system", "mean_words", "mean_sdgs_per_doc"});
  for (const auto& ds : corpus.datasets) {
    const auto& m = corpus.matrix(ds);
    for (const auto& system : complete_systems(m, run, ds.name())) {
      const auto rate = sdgl::sdgs_per_document(m, ds, system);
      per_doc.add(ds.name(), system, rate.mean_words, rate.mean_sdgs);
      if (!ds.labeled()) continue;
      const auto c = sdgl::confusion(m, ds, system);
      const auto r = sdgl::metrics(c);
      metrics.add(ds.name(), system, c.tp, c.fp, c.tn, c.fn, r.sensitivity, r.specificity, r.accuracy,
                  r.balanced_accuracy, r.precision, r.f1);
      if (r.sensitivity && r.specificity) {
        const auto p = sdgl::roc_point(r);
        roc.add(ds.name(), system, p.x, p.y);
      } else {
        run.warn("no ROC point for " + system + " on " + ds.name() + ": sensitivity or specificity undefined");
      }
    }
  }
  run.table("metrics", metrics);
  run.table("roc", roc);
  run.table("sdgs_per_doc", per_doc);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bias

struct BiasArgs {
  std::vector<std::string> data, predictions, pairs;
  std::string correlation = "pearson";
};

int cmd_bias(const BiasArgs& a, Run& run) {
  Corpus corpus;
  load_datasets(run, corpus, a.data);
  load_predictions(run, corpus, a.predictions);
  std::vector<const sdgl::Dataset*> labeled;
  for (const auto& ds : corpus.datasets) {
    if (ds.labeled()) labeled.push_back(&ds);
    else run.warn("dataset '" + ds.name() + "' has no expert labels; skipped");
  }
  if (labeled.empty()) throw Error(ErrorCode::NoLabels, "bias needs at least one labeled dataset");
  const auto kind = a.correlation == "spearman" ? sdgl::Correlation::Spearman : sdgl::Correlation::Pearson;

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  auto dataset_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      if (labeled[i]->name() == name) return i;
    }
    throw Error(ErrorCode::Params, "--pair names unknown dataset '" + name + "'");
  };
  for (const auto& p : a.pairs) {
    const auto colon = p.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::Params, "--pair expects A:B, got '" + p + "'");
    pairs.emplace_back(dataset_index(p.substr(0, colon)), dataset_index(p.substr(colon + 1)));
  }
  if (pairs.empty()) pairs = sdgl::all_pairs(labeled.size());

  // systems evaluated on every dataset, in first-seen order
  std::vector<std::string> systems;
  for (const auto* ds : labeled) {
    for (const auto& s : complete_systems(corpus.matrix(*ds), run, ds->name())) {
      if (std::find(systems.begin(), systems.end(), s) == systems.end()) systems.push_back(s);
    }
  }

  Table bias({"system", "dataset", "sdg", "observed", "predicted", "bias"});
  Table profiles({"source", "dataset", "sdg", "proportion"});
  Table summary({"system", "metric", "value"});
  bool any_defined = false;
  // degenerate values are reported empty and the run goes on
  auto summarize = [&](const std::string& system, const std::string& metric, auto&& compute) {
    try {
      summary.add(system, metric, compute());
      any_defined = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Degenerate) throw;
      run.warn(system + " " + metric + ": " + e.what());
      summary.add(system, metric, std::optional<double>{});
    }
  };
  std::vector<sdgl::SdgProfile> expert;
  for (const auto* ds : labeled) {
    expert.push_back(sdgl::expert_profile(*ds));
    if (expert.back().empty) run.warn("dataset '" + ds->name() + "' has no positive expert labels");
    for (int g = 1; g <= sdgl::kNumSdgs; ++g) profiles.add("expert", ds->name(), g, expert.back()[g]);
  }
  for (const auto& system : systems) {
    std::vector<sdgl::BiasVector> vectors;
    bool everywhere = true;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      const auto& ds = *labeled[i];
      const auto& m = corpus.matrix(ds);
      if (!m.system_index(system)) {
        everywhere = false;
        continue;
      }
      const auto sp = sdgl::system_profile(m, ds, system);
      const auto b = sdgl::bias(sp, expert[i]);
      vectors.push_back(b);
      for (int g = 1; g <= sdgl::kNumSdgs; ++g) {
        profiles.add(system, ds.name(), g, sp[g]);
        bias.add(system, ds.name(), g, expert[i][g], sp[g], b[static_cast<std::size_t>(g - 1)]);
      }
      summarize(system, "profile_fidelity:" + ds.name(), [&] { return sdgl::profile_fidelity(expert[i], sp); });
    }
    if (!everywhere) {
      run.warn("system '" + system + "' is missing on some datasets; no profile bias");
      continue;
    }
    for (const auto& [i, j] : pairs) {
      const std::string metric = "r:" + labeled[i]->name() + ":" + labeled[j]->name();
      summarize(system, metric, [&] { return sdgl::bias_correlation(vectors[i], vectors[j], kind); });
    }
    summarize(system, "profile_bias", [&] { return sdgl::profile_bias(vectors, pairs, kind); });
  }
  run.table("bias", bias);
  run.table("profiles", profiles);
  run.table("bias_summary", summary);
  if (!any_defined) {
    std::cerr << "sdglab bias: no correlation is defined for any system\n";
    return kExitDegenerate;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string freq;
  std::string name = "synthetic";
  std::vector<std::size_t> lengths{10, 100, 1000, 10000};
  std::vector<std::size_t> docs_per_length{1000, 1000, 1000, 100};
  std::vector<std::string> match, systems;
  bool no_generic = false;
};

std::string jsonl(const sdgl::Dataset& ds) {
  std::ostringstream out;
  sdgl::write_jsonl(out, ds);
  return out.str();
}

int cmd_synth(const SynthArgs& a, const Globals& g, Run& run) {
  run.note_input(a.freq);
  const auto table = sdgl::load_frequency_table(a.freq);
  std::vector<sdgl::Dataset> produced;

  if (!a.no_generic) {
    if (a.docs_per_length.size() != 1 && a.docs_per_length.size() != a.lengths.size()) {
      throw Error(ErrorCode::Params, "--docs-per-length needs one value or one per length");
    }
    // one generate call per length keeps per-length counts independent
    std::vector<sdgl::Document> docs;
    for (std::size_t i = 0; i < a.lengths.size(); ++i) {
      const auto n = a.docs_per_length.size() == 1 ? a.docs_per_length[0] : a.docs_per_length[i];
      const sdgl::SynthSpec spec{{a.lengths[i]}, n, sdgl::sub_seed(sdgl::sub_seed(g.seed, 0), i)};
      auto part = sdgl::generate_documents(table, spec, a.name, g.threads);
      docs.insert(docs.end(), part.documents().begin(), part.documents().end());
    }
    produced.emplace_back(a.name, sdgl::DatasetKind::Synthetic, std::move(docs));
  }
  for (std::size_t j = 0; j < a.match.size(); ++j) {
    run.note_input(a.match[j]);
    const auto ref = sdgl::load_documents(a.match[j]);
    produced.push_back(sdgl::generate_matched(table, ref, sdgl::sub_seed(sdgl::sub_seed(g.seed, 1), j), g.threads));
  }
  if (produced.empty()) throw Error(ErrorCode::Params, "nothing to generate (--no-generic without --match)");

  std::vector<sdgl::SystemDefinition> systems;
  for (const auto& p : a.systems) {
    run.note_input(p);
    for (auto& s : sdgl::load_systems(p)) systems.push_back(std::move(s));
  }
  Table fp({"system", "dataset", "length", "docs", "mean_sdgs_per_doc"});
  for (const auto& ds : produced) {
    run.file(ds.name() + ".jsonl", jsonl(ds));
    if (systems.empty()) continue;
    const auto m = sdgl::to_matrix(sdgl::detect(ds, systems, g.threads), ds, systems);
    for (std::size_t s = 0; s < systems.size(); ++s) {
      std::map<std::size_t, std::pair<std::size_t, std::size_t>> by_length;  // length -> (docs, sdgs)
      for (std::size_t d = 0; d < ds.size(); ++d) {
        auto& [n, sdgs] = by_length[ds.documents()[d].word_count()];
        ++n;
        sdgs += m.predicted(d, s).size();
      }
      for (const auto& [len, v] : by_length) {
        fp.add(systems[s].name, ds.name(), len, v.first, static_cast<double>(v.second) / static_cast<double>(v.first));
      }
    }
  }
  if (!systems.empty()) run.table("false_positives", fp);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train / importance share the feature and forest options

struct ModelArgs {
  std::vector<std::string> data, synthetic, predictions;
  std::vector<std::string> features;
  bool no_length = false;
  double k = 1.0;
  std::vector<double> k_grid;
  std::size_t folds = 5, repeats = 2;
  std::size_t trees = 300, mtry = 0, max_depth = 0;
  double min_leaf_weight = 1e-6;
  double threshold = 0.5;
  bool no_bootstrap = false;
  bool no_cv = false;
};

void add_model_options(CLI::App* cmd, ModelArgs& a) {
  cmd->add_option("--data", a.data, "Labeled datasets (JSONL or CSV)")->required();
  cmd->add_option("--synthetic", a.synthetic, "Synthetic (SDG-negative) datasets");
  cmd->add_option("--predictions", a.predictions, "Base-system prediction files from detect")->required();
  cmd->add_option("--features", a.features, "Base systems used as features, in order (default: all)")
      ->delimiter(',');
  cmd->add_flag("--no-length", a.no_length, "Leave document length out of the features");
  cmd->add_option("--k", a.k, "Synthetic weight factor")->capture_default_str()->check(CLI::Range(0.0, 10.0));
  cmd->add_option("--folds", a.folds, "Cross-validation folds")->capture_default_str();
  cmd->add_option("--repeats", a.repeats, "Cross-validation repeats")->capture_default_str();
  cmd->add_option("--trees", a.trees, "Trees per forest")->capture_default_str();
  cmd->add_option("--mtry", a.mtry, "Features tried per split (0: ceil(sqrt(p)))")->capture_default_str();
  cmd->add_option("--max-depth", a.max_depth, "Depth cap (0: none)")->capture_default_str();
  cmd->add_option("--min-leaf-weight", a.min_leaf_weight, "Minimum leaf weight, as a fraction of the tree total")
      ->capture_default_str();
  cmd->add_option("--threshold", a.threshold, "Score threshold for assigning an SDG")->capture_default_str();
  cmd->add_flag("--no-bootstrap", a.no_bootstrap, "Grow every tree on all rows with their case weights");
}

sdgl::ForestParams forest_params(const ModelArgs& a, const Globals& g) {
  sdgl::ForestParams p;
  p.num_trees = a.trees;
  p.mtry = a.mtry;
  p.max_depth = a.max_depth;
  p.min_leaf_weight_fraction = a.min_leaf_weight;
  p.bootstrap = !a.no_bootstrap;
  p.seed = g.seed;
  p.threads = g.threads;
  return p;
}

struct ModelInputs {
  Corpus corpus;
  std::vector<sdgl::PredictedDataset> labeled, synthetic;
  sdgl::FeatureSchema schema;
};

void load_model_inputs(const ModelArgs& a, Run& run, ModelInputs& in, const sdgl::FeatureSchema* fixed = nullptr) {
  load_datasets(run, in.corpus, a.data);
  const std::size_t n_labeled = in.corpus.datasets.size();
  load_datasets(run, in.corpus, a.synthetic);
  load_predictions(run, in.corpus, a.predictions);
  for (std::size_t i = 0; i < in.corpus.datasets.size(); ++i) {
    const auto& ds = in.corpus.datasets[i];
    const sdgl::PredictedDataset pd{&ds, &in.corpus.matrix(ds)};
    (i < n_labeled ? in.labeled : in.synthetic).push_back(pd);
  }
  if (fixed) {
    in.schema = *fixed;
    return;
  }
  in.schema.include_length = !a.no_length;
  if (!a.features.empty()) {
    in.schema.systems = a.features;
  } else {
    // systems complete on every dataset, in the column order of the first
    const auto& first = in.corpus.datasets.front();
    for (const auto& s : complete_systems(in.corpus.matrix(first), run, first.name())) {
      bool everywhere = true;
      for (const auto& ds : in.corpus.datasets) {
        const auto& m = in.corpus.matrix(ds);
        const auto col = m.system_index(s);
        for (std::size_t d = 0; everywhere && d < m.num_docs(); ++d) everywhere = col && m.present(d, *col);
      }
      if (everywhere) in.schema.systems.push_back(s);
    }
    if (in.schema.systems.empty()) throw Error(ErrorCode::MissingSystem, "no base system has predictions for every dataset");
  }
}

int cmd_train(const ModelArgs& a, const Globals& g, Run& run) {
  ModelInputs in;
  load_model_inputs(a, run, in);
  const auto params = forest_params(a, g);
  run.params()["feature_systems"] = in.schema.systems;

  const auto set = sdgl::build_features(in.schema, in.labeled, in.synthetic, a.k);
  const auto model = sdgl::train_ensemble(set, params, a.threshold);
  run.file("model.json", sdgl::model_to_json(model).dump() + "\n");
  for (int c : model.constant_sdgs) run.warn("SDG " + std::to_string(c) + " has a single class; constant model");

  Table fitted = predictions_table();
  for (const auto& src : in.labeled) {
    const auto preds = sdgl::predict(model, *src.dataset, *src.matrix);
    for (std::size_t d = 0; d < preds.size(); ++d) {
      fitted.add(src.dataset->name(), src.dataset->documents()[d].id, "ensemble", sdgl::to_pipe_list(preds[d].assigned));
    }
  }
  run.table("fitted_predictions", fitted);
  if (a.no_cv) return kExitOk;

  const std::vector<double> grid = a.k_grid.empty() ? std::vector<double>{a.k} : a.k_grid;
  Table folds({"k", "sdg", "fold", "repeat", "tp", "fp", "tn", "fn", "accuracy", "f1"});
  Table datasets({"k", "dataset", "synthetic", "tp", "fp", "tn", "fn", "accuracy", "f1", "false_positive_rate"});
  Table summary({"k", "aggregation", "accuracy", "f1", "synthetic_false_positive_rate"});
  Table skipped({"k", "sdg", "fold", "repeat", "reason"});
  bool any_fold = false;
  for (double k : grid) {
    if (!(k >= 0.0 && k <= sdgl::kMaxSyntheticFactor)) throw Error(ErrorCode::Params, "--k-grid values must lie in [0, 10]");
    const sdgl::CvConfig cv{a.folds, a.repeats, g.seed, k};
    const auto result = sdgl::cross_validate(set, cv, params, a.threshold);
    any_fold = any_fold || !result.folds.empty();
    for (const auto& f : result.folds) {
      const auto m = sdgl::metrics(f.labeled);
      folds.add(k, f.sdg, f.fold, f.repeat, f.labeled.tp, f.labeled.fp, f.labeled.tn, f.labeled.fn, m.accuracy, m.f1);
    }
    for (const auto& s : result.skipped) {
      skipped.add(k, s.sdg, s.fold, s.repeat, s.reason);
      run.warn("k=" + sdgl::detail::format_double(k) + " SDG " + std::to_string(s.sdg) + " fold " +
               std::to_string(s.fold) + " repeat " + std::to_string(s.repeat) + " skipped: " + s.reason);
    }
    std::map<std::string, sdgl::ConfusionCounts> per_origin;
    for (const auto& p : result.predictions) per_origin[p.origin].add(p.predicted, p.label);
    for (const auto& src : in.labeled) {
      const auto& c = per_origin[src.dataset->name()];
      const auto m = sdgl::metrics(c);
      datasets.add(k, src.dataset->name(), "false", c.tp, c.fp, c.tn, c.fn, m.accuracy, m.f1,
                   sdgl::detail::ratio(c.fp, c.fp + c.tn));
    }
    for (const auto& src : in.synthetic) {
      const auto& c = per_origin[src.dataset->name()];
      const auto m = sdgl::metrics(c);
      datasets.add(k, src.dataset->name(), "true", c.tp, c.fp, c.tn, c.fn, m.accuracy, m.f1,
                   sdgl::detail::ratio(c.fp, c.fp + c.tn));
    }
    const auto pooled = result.pooled_metrics();
    const auto fp_rate = result.synthetic_false_positive_rate();
    summary.add(k, "pooled", pooled.accuracy, pooled.f1, fp_rate);
    std::optional<double> mean_f1;
    {
      double sum = 0;
      std::size_t n = 0;
      for (const auto& [name, c] : result.by_dataset) {
        if (auto f = sdgl::metrics(c).f1) {
          sum += *f;
          ++n;
        }
      }
      if (n) mean_f1 = sum / static_cast<double>(n);
    }
    summary.add(k, "dataset_mean", result.dataset_mean_accuracy(), mean_f1, fp_rate);
  }
  run.table("cv_folds", folds);
  run.table("cv_datasets", datasets);
  run.table("cv_summary", summary);
  run.table("cv_skipped", skipped);
  if (!any_fold) {
    std::cerr << "sdglab train: every cross-validation fold had single-class training rows\n";
    return kExitDegenerate;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model;
  std::vector<std::string> data, predictions;
  std::string system_name = "ensemble";
};

int cmd_predict(const PredictArgs& a, Run& run) {
  run.note_input(a.model);
  const auto model = sdgl::load_model(a.model);
  Corpus corpus;
  load_datasets(run, corpus, a.data);
  load_predictions(run, corpus, a.predictions);
  Table preds = predictions_table();
  Table scores({"dataset", "doc_id", "sdg", "score", "assigned"});
  for (const auto& ds : corpus.datasets) {
    const auto out = sdgl::predict(model, ds, corpus.matrix(ds));
    for (std::size_t d = 0; d < out.size(); ++d) {
      const auto& id = ds.documents()[d].id;
      preds.add(ds.name(), id, a.system_name, sdgl::to_pipe_list(out[d].assigned));
      for (int g = 1; g <= sdgl::kNumSdgs; ++g) {
        scores.add(ds.name(), id, g, out[d].scores[static_cast<std::size_t>(g - 1)],
                   out[d].assigned.contains(g) ? 1 : 0);
      }
    }
  }
  run.table("ensemble_predictions", preds);
  run.table("ensemble_scores", scores);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// importance

struct ImportanceArgs {
  ModelArgs model_args;
  std::string model;
  std::size_t repetitions = 10;
};

int cmd_importance(const ImportanceArgs& a, const Globals& g, Run& run) {
  Table out({"sdg", "feature", "importance"});
  sdgl::ImportanceTable table;
  if (!a.model.empty()) {
    // rows scored by a saved model, weighted as at training time
    run.note_input(a.model);
    const auto model = sdgl::load_model(a.model);
    ModelInputs in;
    load_model_inputs(a.model_args, run, in, &model.schema);
    const auto rows = sdgl::build_features(model.schema, in.labeled, in.synthetic, model.k);
    auto m = model;
    m.params.threads = g.threads;
    table = sdgl::permutation_importance(m, rows, a.repetitions, g.seed);
  } else {
    ModelInputs in;
    load_model_inputs(a.model_args, run, in);
    run.params()["feature_systems"] = in.schema.systems;
    const auto set = sdgl::build_features(in.schema, in.labeled, in.synthetic, a.model_args.k);
    const sdgl::CvConfig cv{a.model_args.folds, a.model_args.repeats, g.seed, a.model_args.k};
    table = sdgl::cv_permutation_importance(set, cv, forest_params(a.model_args, g), a.repetitions,
                                            a.model_args.threshold);
  }
  for (int sdg = 1; sdg <= sdgl::kNumSdgs; ++sdg) {
    const auto i = static_cast<std::size_t>(sdg - 1);
    if (!table.evaluated[i]) {
      run.warn("SDG " + std::to_string(sdg) + ": no rows to score");
      continue;
    }
    for (std::size_t f = 0; f < table.features.size(); ++f) out.add(sdg, table.features[f], table.values[i][f]);
  }
  run.table("importance", out);
  if (out.rows.empty()) {
    std::cerr << "sdglab importance: no SDG could be scored\n";
    return kExitDegenerate;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sdglab: SDG labeling with query systems, evaluation, bias profiles and forest ensembles"};
  app.set_version_flag("--version", SDGLAB_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0: all cores); results do not depend on it")
      ->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory for outputs and the run manifest")->capture_default_str();
  app.add_flag("--json", g.json, "Also write every CSV report as JSON");
  app.set_config("--config", "", "key = value config file; [command] sections hold command options")
      ->envname("SDGLAB_CONFIG");

  DetectArgs detect;
  auto* c_detect = app.add_subcommand("detect", "Run query systems over datasets");
  c_detect->add_option("--data", detect.data, "Datasets (JSONL or CSV)")->required();
  c_detect->add_option("--systems", detect.systems, "System definition CSV files");
  c_detect->add_option("--external", detect.external, "Imported predictions, SYSTEM:DATASET=PATH");
  c_detect->add_option("--unknown-docs", detect.unknown_docs, "Unknown ids in --external files: fail or warn")
      ->check(CLI::IsMember({"fail", "warn"}))
      ->capture_default_str();

  EvaluateArgs evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "Score predictions against expert labels");
  c_eval->add_option("--data", evaluate.data, "Datasets (JSONL or CSV)")->required();
  c_eval->add_option("--predictions", evaluate.predictions, "Prediction files")->required();

  BiasArgs bias;
  auto* c_bias = app.add_subcommand("bias", "SDG profiles, per-SDG bias and its consistency across datasets");
  c_bias->add_option("--data", bias.data, "Labeled datasets")->required();
  c_bias->add_option("--predictions", bias.predictions, "Prediction files")->required();
  c_bias->add_option("--pair", bias.pairs, "Dataset pair A:B for profile bias (default: all pairs)");
  c_bias->add_option("--correlation", bias.correlation, "pearson or spearman")
      ->check(CLI::IsMember({"pearson", "spearman"}))
      ->capture_default_str();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate synthetic SDG-negative documents");
  c_synth->add_option("--freq", synth.freq, "Word frequency table (word<TAB>count)")->required();
  c_synth->add_option("--name", synth.name, "Name of the generated dataset")->capture_default_str();
  c_synth->add_option("--lengths", synth.lengths, "Document lengths in words")->delimiter(',')->capture_default_str();
  c_synth->add_option("--docs-per-length", synth.docs_per_length, "Documents per length (one value or one per length)")
      ->delimiter(',')
      ->capture_default_str();
  c_synth->add_option("--match", synth.match, "Also generate a length-matched copy of these datasets");
  c_synth->add_flag("--no-generic", synth.no_generic, "Only produce the --match copies");
  c_synth->add_option("--systems", synth.systems, "Report SDGs per document of these systems by length");

  ModelArgs train;
  auto* c_train = app.add_subcommand("train", "Train the ensemble and cross-validate it");
  add_model_options(c_train, train);
  c_train->add_option("--k-grid", train.k_grid, "Cross-validate at each of these k")->delimiter(',');
  c_train->add_flag("--no-cv", train.no_cv, "Skip cross-validation");

  PredictArgs predict;
  auto* c_predict = app.add_subcommand("predict", "Apply a saved ensemble");
  c_predict->add_option("--model", predict.model, "Model file from train")->required();
  c_predict->add_option("--data", predict.data, "Datasets")->required();
  c_predict->add_option("--predictions", predict.predictions, "Base-system prediction files")->required();
  c_predict->add_option("--system-name", predict.system_name, "System name in the output")->capture_default_str();

  ImportanceArgs importance;
  auto* c_importance = app.add_subcommand("importance", "Permutation feature importance");
  add_model_options(c_importance, importance.model_args);
  c_importance->add_option("--model", importance.model, "Score a saved model instead of cross-validated forests");
  c_importance->add_option("--repetitions", importance.repetitions, "Shuffles per feature")->capture_default_str();

  // CLI11 silently skips a missing file named by the environment variable
  if (const char* env = std::getenv("SDGLAB_CONFIG"); env && *env && !std::filesystem::exists(env)) {
    std::cerr << "sdglab: SDGLAB_CONFIG names a missing file: " << env << '\n';
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    Run run(cmd->get_name(), g.out_dir, g.json, SDGLAB_VERSION);
    record_params(run, *cmd, g);
    run.params()["json"] = g.json;
    int rc = kExitOk;
    if (cmd == c_detect) rc = cmd_detect(detect, g, run);
    else if (cmd == c_eval) rc = cmd_evaluate(evaluate, run);
    else if (cmd == c_bias) rc = cmd_bias(bias, run);
    else if (cmd == c_synth) rc = cmd_synth(synth, g, run);
    else if (cmd == c_train) rc = cmd_train(train, g, run);
    else if (cmd == c_predict) rc = cmd_predict(predict, run);
    else if (cmd == c_importance) rc = cmd_importance(importance, g, run);
    run.finish();
    return rc;
  } catch (const Error& e) {
    std::cerr << "sdglab " << cmd->get_name() << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "sdglab " << cmd->get_name() << ": internal error: " << e.what() << '\n';
    return 1;
  }
}

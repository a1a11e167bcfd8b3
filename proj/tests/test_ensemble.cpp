#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "sdglab/ensemble.hpp"
#include "test_util.hpp"

using namespace sdgl;
using testutil::TempDir;

namespace {

const FeatureSchema kSchema{{"A", "B", "C"}, true};

ForestParams small_forest(std::uint64_t seed = 1) {
  ForestParams p;
  p.num_trees = 40;
  p.seed = seed;
  p.threads = 4;
  return p;
}

/// A tiny labeled + synthetic pair for the weight examples.
fixture::Task four_and_four() {
  std::mt19937_64 rng(1);
  std::vector<Document> lab, syn;
  for (int i = 0; i < 4; ++i) {
    lab.emplace_back("l" + std::to_string(i), "one two three", ExpertLabels{SdgSet{3}, SdgSet{3, 4, 5}});
    syn.emplace_back("s" + std::to_string(i), fixture::words(rng, 3, 9));
  }
  fixture::Task t;
  const std::vector<SdgSet> some{SdgSet{3}, SdgSet{}, SdgSet{4}, SdgSet{3, 5}};
  t.add(Dataset("lab", DatasetKind::Labeled, lab), {"A", "B", "C"}, {some, some, some});
  t.add(Dataset("syn", DatasetKind::Synthetic, syn), {"A", "B", "C"}, {some, some, some});
  return t;
}

ErrorCode error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::Corrupt;
}

}  // namespace

TEST(BuildFeatures, Weights) {
  const auto t = four_and_four();
  const auto set = build_features(kSchema, t.labeled, t.synthetic, 2.0);
  std::size_t labeled_rows = 0, synthetic_rows = 0;
  for (const auto& rows : set.rows) {
    for (const auto& r : rows) {
      if (r.synthetic) {
        ++synthetic_rows;
        EXPECT_DOUBLE_EQ(r.weight, 0.5);
        EXPECT_FALSE(r.label);
      } else {
        ++labeled_rows;
        EXPECT_DOUBLE_EQ(r.weight, 0.25);
      }
      EXPECT_EQ(r.features.size(), 4u);
    }
  }
  EXPECT_EQ(labeled_rows, 4u * 3u);  // evaluated {3,4,5}
  EXPECT_EQ(synthetic_rows, 4u * 17u);
  EXPECT_TRUE(set.for_sdg(1).size() == 4u);  // synthetic only
}

TEST(BuildFeatures, FeatureLayout) {
  const auto t = four_and_four();
  const auto set = build_features(kSchema, t.labeled, {}, 1.0);
  // doc l3 was predicted {3,5} by every system and has 3 words
  for (const auto& r : set.for_sdg(5)) {
    if (r.doc_id == "l3") EXPECT_EQ(r.features, (std::vector<double>{1, 1, 1, 3}));
    if (r.doc_id == "l0") EXPECT_EQ(r.features, (std::vector<double>{0, 0, 0, 3}));
  }
  for (const auto& r : set.for_sdg(3)) EXPECT_TRUE(r.label);
  EXPECT_EQ(kSchema.names(), (std::vector<std::string>{"A", "B", "C", "word_count"}));
  const auto no_len = build_features(FeatureSchema{{"B"}, false}, t.labeled, {}, 1.0);
  EXPECT_EQ(no_len.for_sdg(3).front().features.size(), 1u);
}

TEST(BuildFeatures, ZeroKDropsSyntheticRows) {
  const auto t = four_and_four();
  const auto set = build_features(kSchema, t.labeled, t.synthetic, 0.0);
  for (const auto& rows : set.rows) {
    for (const auto& r : rows) EXPECT_FALSE(r.synthetic);
  }
}

TEST(BuildFeatures, LabeledWeightsSumToOnePerDataset) {
  auto t = fixture::copied_label_task(37, 2, false);
  fixture::add_synthetic(t, 11, 3, {0.1, 0.1, 0.1});
  for (double k : {0.0, 0.5, 3.0}) {
    const auto set = build_features(kSchema, t.labeled, t.synthetic, k);
    for (const auto& rows : set.rows) {
      double lab = 0, syn = 0;
      for (const auto& r : rows) (r.synthetic ? syn : lab) += r.weight;
      EXPECT_NEAR(lab, 1.0, 1e-12);  // every doc is evaluated on every SDG
      EXPECT_NEAR(syn, k, 1e-12);
    }
  }
}

TEST(BuildFeatures, Errors) {
  const auto t = four_and_four();
  EXPECT_EQ(error_of([&] { build_features(kSchema, t.labeled, t.synthetic, 10.5); }), ErrorCode::Params);
  EXPECT_EQ(error_of([&] { build_features(kSchema, t.labeled, t.synthetic, -1); }), ErrorCode::Params);
  EXPECT_EQ(error_of([&] { build_features(FeatureSchema{{"A", "Z"}, true}, t.labeled, {}, 1); }),
            ErrorCode::MissingSystem);
  // synthetic data passed as labeled
  EXPECT_EQ(error_of([&] { build_features(kSchema, t.synthetic, {}, 1); }), ErrorCode::NoLabels);

  // a system with no cell for a document
  fixture::Task partial;
  std::vector<Document> docs;
  docs.emplace_back("x", "a", ExpertLabels{SdgSet{1}, SdgSet{1}});
  partial.datasets.emplace_back("p", DatasetKind::Labeled, docs);
  partial.matrices.emplace_back(partial.datasets.back());
  partial.matrices.back().add_system("A");
  partial.labeled.push_back({&partial.datasets.back(), &partial.matrices.back()});
  EXPECT_EQ(error_of([&] { build_features(FeatureSchema{{"A"}, true}, partial.labeled, {}, 1); }),
            ErrorCode::MissingSystem);
}

TEST(TrainEnsemble, LearnsCopiedLabelAndRecordsConstantGoals) {
  auto t = fixture::copied_label_task(120, 4, false);
  const auto set = build_features(kSchema, t.labeled, {}, 1.0);
  const auto model = train_ensemble(set, small_forest());
  EXPECT_TRUE(model.constant_sdgs.empty());
  EXPECT_EQ(model.datasets, std::vector<std::string>{"task"});
  const auto preds = predict(model, *t.labeled[0].dataset, *t.labeled[0].matrix);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    EXPECT_EQ(preds[i].assigned, t.labeled[0].dataset->documents()[i].expert->labels);
    for (double s : preds[i].scores) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
  }

  // all-negative goal
  TrainingSet one = set;
  for (auto& r : one.for_sdg(9)) r.label = false;
  const auto m2 = train_ensemble(one, small_forest());
  EXPECT_EQ(m2.constant_sdgs, std::vector<int>{9});
  EXPECT_EQ(m2.forest(9).predict(std::vector<double>{1, 1, 1, 10}), 0.0);
}

TEST(TrainEnsemble, DeterministicAcrossThreads) {
  const auto t = fixture::copied_label_task(60, 5, true);
  const auto set = build_features(kSchema, t.labeled, {}, 1.0);
  auto p = small_forest(9);
  p.threads = 1;
  const auto a = train_ensemble(set, p);
  p.threads = 6;
  const auto b = train_ensemble(set, p);
  EXPECT_EQ(a.forests, b.forests);
}

TEST(Predict, SchemaMismatch) {
  const auto t = fixture::copied_label_task(30, 6, false);
  const auto model = train_ensemble(build_features(kSchema, t.labeled, {}, 1.0), small_forest());
  EXPECT_EQ(error_of([&] { predict(model, std::vector<SdgSet>{SdgSet{}}, 3); }), ErrorCode::SchemaMismatch);
  PredictionMatrix other(*t.labeled[0].dataset);
  other.add_system("A");
  EXPECT_EQ(error_of([&] { predict(model, *t.labeled[0].dataset, other); }), ErrorCode::SchemaMismatch);
}

TEST(AssignFolds, DocumentLevelBalancedAndStratified) {
  auto t = fixture::copied_label_task(103, 7, false);
  fixture::add_synthetic(t, 41, 8, {0.1, 0.1, 0.1});
  const auto set = build_features(kSchema, t.labeled, t.synthetic, 1.0);
  const auto folds = assign_folds(set, 5, 99);
  EXPECT_EQ(folds.size(), 144u);
  std::map<std::size_t, std::size_t> sizes;
  std::map<std::pair<std::string, std::size_t>, std::size_t> by_origin;
  for (const auto& [key, f] : folds) {
    ++sizes[f];
    ++by_origin[{key.origin, f}];
  }
  for (const auto& [f, n] : sizes) EXPECT_TRUE(n == 28 || n == 29) << n;
  for (const auto& [k, n] : by_origin) EXPECT_LE(n, (k.first == "task" ? 103u : 41u) / 5 + 2);
  EXPECT_EQ(folds, assign_folds(set, 5, 99));
  EXPECT_NE(folds, assign_folds(set, 5, 100));
}

TEST(CrossValidate, SeparableTaskIsLearned) {
  const auto t = fixture::copied_label_task(150, 10, false);
  const auto set = build_features(kSchema, t.labeled, {}, 1.0);
  const auto cv = cross_validate(set, CvConfig{5, 2, 3, 1.0}, small_forest());
  EXPECT_GE(*cv.pooled_metrics().accuracy, 0.95);
  EXPECT_TRUE(cv.skipped.empty());
  EXPECT_EQ(cv.folds.size(), 5u * 2u * 17u);
  // every labeled row is scored once per repeat
  std::size_t rows = 0;
  for (const auto& r : set.rows) rows += r.size();
  EXPECT_EQ(cv.predictions.size(), 2 * rows);
}

TEST(CrossValidate, PermutedLabelsGiveMajorityRate) {
  // equal lengths: a continuous noise column lets fully grown trees chase noise
  const auto t = fixture::copied_label_task(150, 11, true, true);
  const auto set = build_features(kSchema, t.labeled, {}, 1.0);
  const auto cv = cross_validate(set, CvConfig{5, 2, 3, 1.0}, small_forest());
  double pos = 0, total = 0;
  for (const auto& rows : set.rows) {
    for (const auto& r : rows) {
      pos += r.label;
      total += 1;
    }
  }
  const double majority = std::max(pos / total, 1 - pos / total);
  EXPECT_NEAR(*cv.pooled_metrics().accuracy, majority, 0.05);
}

TEST(CrossValidate, DeterministicForSeed) {
  auto t = fixture::copied_label_task(60, 12, false);
  fixture::add_synthetic(t, 20, 13, {0.2, 0.1, 0.1});
  const auto set = build_features(kSchema, t.labeled, t.synthetic, 1.0);
  const CvConfig cfg{4, 2, 5, 2.0};
  const auto a = cross_validate(set, cfg, small_forest(2));
  auto p = small_forest(2);
  p.threads = 1;
  const auto b = cross_validate(set, cfg, p);
  ASSERT_EQ(a.predictions.size(), b.predictions.size());
  for (std::size_t i = 0; i < a.predictions.size(); ++i) {
    ASSERT_EQ(a.predictions[i].doc_id, b.predictions[i].doc_id);
    ASSERT_EQ(a.predictions[i].score, b.predictions[i].score);
  }
  EXPECT_EQ(a.pooled, b.pooled);
  EXPECT_EQ(a.synthetic, b.synthetic);
  // synthetic rows are scored, all as negatives
  EXPECT_EQ(a.synthetic.total(), 2 * 20 * 17);
  EXPECT_EQ(a.synthetic.tp + a.synthetic.fn, 0);
}

TEST(CrossValidate, OneClassFoldsAreSkipped) {
  auto t = fixture::copied_label_task(40, 14, false);
  auto set = build_features(kSchema, t.labeled, {}, 1.0);
  for (auto& r : set.for_sdg(2)) r.label = false;
  const auto cv = cross_validate(set, CvConfig{4, 1, 1, 1.0}, small_forest());
  EXPECT_EQ(cv.skipped.size(), 4u);
  for (const auto& s : cv.skipped) EXPECT_EQ(s.sdg, 2);
  EXPECT_EQ(cv.folds.size(), 4u * 16u);
}

TEST(CrossValidate, Params) {
  const auto t = fixture::copied_label_task(20, 15, false);
  const auto set = build_features(kSchema, t.labeled, {}, 1.0);
  EXPECT_EQ(error_of([&] { cross_validate(set, CvConfig{1, 1, 0, 1.0}, small_forest()); }), ErrorCode::Params);
  EXPECT_EQ(error_of([&] { cross_validate(set, CvConfig{3, 0, 0, 1.0}, small_forest()); }), ErrorCode::Params);
  EXPECT_EQ(error_of([&] { cross_validate(set, CvConfig{3, 1, 0, 11.0}, small_forest()); }), ErrorCode::Params);
}

TEST(Importance, CopiedFeatureRanksFirstAndUnusedScoresZero) {
  const auto t = fixture::copied_label_task(200, 16, false);
  const auto set = build_features(kSchema, t.labeled, {}, 1.0);
  const auto model = train_ensemble(set, small_forest());
  const auto holdout = fixture::copied_label_task(200, 17, false);
  const auto test_rows = build_features(kSchema, holdout.labeled, {}, 1.0);
  const auto table = permutation_importance(model, test_rows, 5, 3);
  EXPECT_EQ(table.features, kSchema.names());
  for (std::size_t g = 0; g < kNumSdgs; ++g) {
    ASSERT_TRUE(table.evaluated[g]);
    const auto& v = table.values[g];
    for (std::size_t f = 1; f < v.size(); ++f) EXPECT_GT(v[0], v[f]) << "sdg " << g + 1;
    for (std::size_t f = 1; f < 3; ++f) EXPECT_NEAR(v[f], 0.0, 0.02) << "sdg " << g + 1;
    for (std::size_t f = 0; f < v.size(); ++f) {
      if (!model.forests[g].uses_feature(f)) EXPECT_EQ(v[f], 0.0);
    }
  }
}

TEST(Importance, FeatureNeverSplitOnIsExactlyZero) {
  // column B is constant, so no tree can split on it
  auto t = fixture::copied_label_task(80, 18, false);
  for (auto& m : t.matrices) {
    const auto b = *m.system_index("B");
    for (std::size_t d = 0; d < m.num_docs(); ++d) m.set_predicted(d, b, SdgSet{});
  }
  const auto set = build_features(kSchema, t.labeled, {}, 1.0);
  const auto model = train_ensemble(set, small_forest());
  const auto table = permutation_importance(model, set, 4, 1);
  for (std::size_t g = 0; g < kNumSdgs; ++g) {
    ASSERT_FALSE(model.forests[g].uses_feature(1));
    EXPECT_EQ(table.values[g][1], 0.0);
  }
  const auto cv_table = cv_permutation_importance(set, CvConfig{3, 1, 2, 1.0}, small_forest(), 3);
  for (std::size_t g = 0; g < kNumSdgs; ++g) EXPECT_EQ(cv_table.values[g][1], 0.0);
}

TEST(ModelFile, RoundTripPredictsIdentically) {
  TempDir dir;
  auto t = fixture::copied_label_task(80, 19, false);
  fixture::add_synthetic(t, 20, 20, {0.3, 0.2, 0.1});
  const auto set = build_features(kSchema, t.labeled, t.synthetic, 2.0);
  auto model = train_ensemble(set, small_forest(), 0.4);
  const auto path = dir.path("model.json");
  save_model(model, path);
  const auto loaded = load_model(path);
  EXPECT_EQ(loaded.schema, model.schema);
  EXPECT_EQ(loaded.forests, model.forests);
  EXPECT_EQ(loaded.k, 2.0);
  EXPECT_EQ(loaded.threshold, 0.4);
  EXPECT_EQ(loaded.datasets, (std::vector<std::string>{"synthetic", "task"}));

  std::mt19937_64 rng(21);
  for (int i = 0; i < 100; ++i) {
    std::vector<SdgSet> preds{fixture::random_set(rng, 0.3), fixture::random_set(rng, 0.3),
                              fixture::random_set(rng, 0.3)};
    const auto wc = static_cast<std::size_t>(rng() % 300);
    const auto a = predict(model, preds, wc), b = predict(loaded, preds, wc);
    ASSERT_EQ(a.assigned, b.assigned);
    ASSERT_EQ(a.scores, b.scores);
  }
  // saving again gives the same bytes
  save_model(loaded, dir.path("again.json"));
  EXPECT_EQ(testutil::slurp(path), testutil::slurp(dir.path("again.json")));
}

TEST(ModelFile, CorruptAndVersionErrors) {
  TempDir dir;
  const auto t = fixture::copied_label_task(30, 22, false);
  const auto model = train_ensemble(build_features(kSchema, t.labeled, {}, 1.0), small_forest());
  const auto text = model_to_json(model).dump();

  const auto load_code = [&](const std::string& contents) {
    return error_of([&] { load_model(dir.file("m.json", contents)); });
  };
  EXPECT_EQ(load_code(text.substr(0, text.size() / 2)), ErrorCode::Corrupt);
  EXPECT_EQ(load_code(""), ErrorCode::Corrupt);
  EXPECT_EQ(load_code("[1,2,3]"), ErrorCode::Corrupt);

  auto j = model_to_json(model);
  j["version"] = 2;
  EXPECT_EQ(load_code(j.dump()), ErrorCode::Version);

  j = model_to_json(model);
  j["forests"][0]["trees"][0]["left"][0] = 0;  // a node pointing at itself
  if (j["forests"][0]["trees"][0]["feature"][0] != -1) EXPECT_EQ(load_code(j.dump()), ErrorCode::Corrupt);

  j = model_to_json(model);
  j["forests"].erase(16);
  EXPECT_EQ(load_code(j.dump()), ErrorCode::Corrupt);

  j = model_to_json(model);
  j["feature_schema"]["features"][0] = "renamed";
  EXPECT_EQ(load_code(j.dump()), ErrorCode::Corrupt);

  EXPECT_EQ(error_of([&] { load_model(dir.path("missing.json")); }), ErrorCode::Io);
}

#pragma once

// Constructed ensemble tasks shared by unit and acceptance tests.

#include <deque>
#include <random>
#include <string>
#include <vector>

#include "sdglab/ensemble.hpp"

namespace fixture {

/// Datasets and their base-system predictions, kept at stable addresses.
struct Task {
  std::deque<sdgl::Dataset> datasets;
  std::deque<sdgl::PredictionMatrix> matrices;
  std::vector<sdgl::PredictedDataset> labeled;
  std::vector<sdgl::PredictedDataset> synthetic;

  void add(sdgl::Dataset ds, const std::vector<std::string>& systems,
           const std::vector<std::vector<sdgl::SdgSet>>& preds) {
    datasets.push_back(std::move(ds));
    const auto& d = datasets.back();
    matrices.emplace_back(d);
    auto& m = matrices.back();
    for (std::size_t s = 0; s < systems.size(); ++s) {
      const auto col = m.add_system(systems[s]);
      for (std::size_t i = 0; i < d.size(); ++i) m.set_predicted(i, col, preds[s][i]);
    }
    (d.kind() == sdgl::DatasetKind::Synthetic ? synthetic : labeled).push_back({&d, &m});
  }
};

inline std::string words(std::mt19937_64& rng, int lo, int hi) {
  const int n = std::uniform_int_distribution<int>(lo, hi)(rng);
  std::string t;
  for (int i = 0; i < n; ++i) t += (i ? " w" : "w") + std::to_string(rng() % 20);
  return t;
}

inline sdgl::SdgSet random_set(std::mt19937_64& rng, double p) {
  sdgl::SdgSet s;
  std::bernoulli_distribution coin(p);
  for (int g = 1; g <= sdgl::kNumSdgs; ++g) {
    if (coin(rng)) s.insert(g);
  }
  return s;
}

/// System A reproduces the expert labels exactly; B and C are independent
/// noise. With `permute` the label sets are shuffled across documents, so no
/// system carries signal. Documents are 5-40 words long, or all 20 words
/// with `equal_lengths`.
inline Task copied_label_task(std::size_t n, std::uint64_t seed, bool permute, bool equal_lengths = false) {
  std::mt19937_64 rng(seed);
  std::vector<sdgl::SdgSet> truth(n), b(n), c(n);
  std::vector<sdgl::Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = random_set(rng, 0.3);
    b[i] = random_set(rng, 0.3);
    c[i] = random_set(rng, 0.3);
  }
  std::vector<sdgl::SdgSet> labels = truth;
  if (permute) std::shuffle(labels.begin(), labels.end(), rng);
  for (std::size_t i = 0; i < n; ++i) {
    docs.emplace_back("doc" + std::to_string(i), equal_lengths ? words(rng, 20, 20) : words(rng, 5, 40),
                      sdgl::ExpertLabels{labels[i], sdgl::SdgSet::all()});
  }
  Task t;
  t.add(sdgl::Dataset("task", sdgl::DatasetKind::Labeled, std::move(docs)), {"A", "B", "C"}, {truth, b, c});
  return t;
}

/// Three systems, each wrong on 40% of the documents. The documents fall in
/// five equal blocks; A errs on blocks 0-1, B on 2-3, C on 4 and 0, so the
/// error slices only share block 0 and every system is right on 60%.
inline Task disjoint_slices_task(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<sdgl::SdgSet> a(n), b(n), c(n);
  std::vector<sdgl::Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    const auto truth = random_set(rng, 0.4);
    const auto flipped = sdgl::SdgSet::from_mask(truth.mask() ^ sdgl::SdgSet::all().mask());
    const std::size_t block = i * 5 / n;
    a[i] = block <= 1 ? flipped : truth;
    b[i] = block == 2 || block == 3 ? flipped : truth;
    c[i] = block == 4 || block == 0 ? flipped : truth;
    docs.emplace_back("doc" + std::to_string(i), words(rng, 5, 40), sdgl::ExpertLabels{truth, sdgl::SdgSet::all()});
  }
  Task t;
  t.add(sdgl::Dataset("slices", sdgl::DatasetKind::Labeled, std::move(docs)), {"A", "B", "C"}, {a, b, c});
  return t;
}

/// Adds `n` synthetic documents on which each system fires at the given rates.
inline void add_synthetic(Task& t, std::size_t n, std::uint64_t seed, const std::vector<double>& rates) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<sdgl::SdgSet>> preds(rates.size(), std::vector<sdgl::SdgSet>(n));
  std::vector<sdgl::Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < rates.size(); ++s) preds[s][i] = random_set(rng, rates[s]);
    docs.emplace_back("synth" + std::to_string(i), words(rng, 50, 200));
  }
  std::vector<std::string> names;
  for (std::size_t s = 0; s < rates.size(); ++s) names.push_back(std::string(1, static_cast<char>('A' + s)));
  t.add(sdgl::Dataset("synthetic", sdgl::DatasetKind::Synthetic, std::move(docs)), names, preds);
}

/// Accuracy of a base system's raw predictions over every evaluated pair.
inline double system_accuracy(const Task& t, const std::string& system) {
  sdgl::ConfusionCounts c;
  for (const auto& src : t.labeled) c += sdgl::confusion(*src.matrix, *src.dataset, system);
  return *sdgl::metrics(c).accuracy;
}

}  // namespace fixture

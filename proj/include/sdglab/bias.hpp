#pragma once

// SDG profiles, per-SDG bias against experts, and the correlations used to
// summarise how systematic a system's bias is across datasets.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdglab/corpus.hpp"
#include "sdglab/error.hpp"
#include "sdglab/sdg.hpp"
#include "sdglab/systems.hpp"

namespace sdgl {

/// Share of label assignments going to each SDG (index 0 = SDG 1).
struct SdgProfile {
  std::array<double, kNumSdgs> proportions{};
  bool empty = true;  // no assignments at all; proportions are all zero

  double operator[](int sdg) const { return proportions.at(static_cast<std::size_t>(sdg - 1)); }
};

using BiasVector = std::array<std::optional<double>, kNumSdgs>;

/// A multi-label document contributes one unit per assigned SDG.
inline SdgProfile profile(std::span<const SdgSet> label_sets) {
  std::array<double, kNumSdgs> counts{};
  double total = 0;
  for (const auto& s : label_sets) {
    for (int g : s.to_vector()) {
      counts[static_cast<std::size_t>(g - 1)] += 1.0;
      total += 1.0;
    }
  }
  SdgProfile p;
  if (total == 0) return p;
  p.empty = false;
  for (std::size_t i = 0; i < counts.size(); ++i) p.proportions[i] = counts[i] / total;
  return p;
}

/// Profile of the expert labels of a labeled dataset.
inline SdgProfile expert_profile(const Dataset& ds) {
  if (!ds.labeled()) throw Error(ErrorCode::NoLabels, "dataset '" + ds.name() + "' has no expert labels");
  std::vector<SdgSet> sets;
  sets.reserve(ds.size());
  for (const auto& d : ds.documents()) sets.push_back(d.expert->labels);
  return profile(sets);
}

/// Profile of a system's predictions. On a labeled dataset predictions are
/// restricted to each document's evaluated SDGs, the pairs the experts judged.
inline SdgProfile system_profile(const PredictionMatrix& m, const Dataset& ds, const std::string& system) {
  const auto s = m.system_index(system);
  if (!s) throw Error(ErrorCode::MissingSystem, "no predictions for system '" + system + "'");
  std::vector<SdgSet> sets;
  sets.reserve(ds.size());
  for (const auto& d : ds.documents()) {
    const auto i = m.doc_index(d.id);
    if (!i) throw Error(ErrorCode::Schema, "document '" + d.id + "' missing from prediction matrix");
    SdgSet p = m.predicted(*i, *s);
    if (d.expert) p = p & d.expert->evaluated;
    sets.push_back(p);
  }
  return profile(sets);
}

/// Equal-weight mean of several profiles; empty profiles are skipped.
inline SdgProfile average_profiles(std::span<const SdgProfile> profiles) {
  SdgProfile out;
  std::size_t n = 0;
  for (const auto& p : profiles) {
    if (p.empty) continue;
    ++n;
    for (std::size_t i = 0; i < p.proportions.size(); ++i) out.proportions[i] += p.proportions[i];
  }
  if (n == 0) return out;
  out.empty = false;
  for (auto& v : out.proportions) v /= static_cast<double>(n);
  return out;
}

/// (predicted - observed) / observed per SDG; empty where observed is 0.
/// Positive means the SDG is assigned more often than experts assign it.
inline BiasVector bias(const SdgProfile& predicted, const SdgProfile& observed) {
  BiasVector out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double obs = observed.proportions[i];
    if (obs > 0.0) out[i] = (predicted.proportions[i] - obs) / obs;
  }
  return out;
}

/// Pearson product-moment correlation. E_DEGENERATE for fewer than three
/// points, unequal lengths, or a constant input.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::Degenerate, "correlation inputs differ in length");
  if (x.size() < 3) throw Error(ErrorCode::Degenerate, "correlation needs at least 3 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::Degenerate, "correlation of a constant vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// 1-based ranks; ties share the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman's rho: Pearson correlation of average ranks.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::Degenerate, "correlation inputs differ in length");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

enum class Correlation { Pearson, Spearman };

inline double correlate(Correlation kind, std::span<const double> x, std::span<const double> y) {
  return kind == Correlation::Pearson ? pearson(x, y) : spearman(x, y);
}

/// Correlation of two bias vectors over the SDGs defined in both.
inline double bias_correlation(const BiasVector& a, const BiasVector& b, Correlation kind = Correlation::Pearson) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && b[i]) {
      x.push_back(*a[i]);
      y.push_back(*b[i]);
    }
  }
  if (x.size() < 3) {
    throw Error(ErrorCode::Degenerate,
                "bias vectors share " + std::to_string(x.size()) + " defined SDGs, need at least 3");
  }
  return correlate(kind, x, y);
}

/// Mean bias correlation over the given pairs of indices into `biases`.
inline double profile_bias(std::span<const BiasVector> biases,
                           std::span<const std::pair<std::size_t, std::size_t>> pairs,
                           Correlation kind = Correlation::Pearson) {
  if (biases.size() < 2) throw Error(ErrorCode::Degenerate, "profile bias needs at least two datasets");
  if (pairs.empty()) throw Error(ErrorCode::Degenerate, "profile bias needs at least one dataset pair");
  double sum = 0;
  for (const auto& [i, j] : pairs) {
    if (i >= biases.size() || j >= biases.size() || i == j) {
      throw Error(ErrorCode::Params, "invalid dataset pair for profile bias");
    }
    sum += bias_correlation(biases[i], biases[j], kind);
  }
  return sum / static_cast<double>(pairs.size());
}

/// All unordered pairs (i, j), i < j.
inline std::vector<std::pair<std::size_t, std::size_t>> all_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
  }
  return out;
}

/// Spearman correlation between an expert and a system profile.
inline double profile_fidelity(const SdgProfile& expert, const SdgProfile& system) {
  return spearman(expert.proportions, system.proportions);
}

}  // namespace sdgl

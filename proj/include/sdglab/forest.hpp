#pragma once

// Binary-classification random forest with case weights.
//
// Each tree is grown on a weighted bootstrap: `n` rows drawn with replacement
// with probability proportional to their case weight, and each drawn row
// counts once per draw inside the tree. With bootstrap disabled the tree sees
// every row once, carrying its case weight. At each node `mtry` features are
// drawn without replacement and scanned in ascending index order; the split
// with the largest weighted Gini decrease wins (ties keep the earlier
// candidate). Rows with x <= threshold go left. Growth stops at pure nodes, at
// max_depth, or when no split leaves both children at least min_leaf_weight.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "sdglab/error.hpp"
#include "sdglab/parallel.hpp"
#include "sdglab/random.hpp"

namespace sdgl {

struct ForestParams {
  std::size_t num_trees = 300;
  std::size_t mtry = 0;                   // 0: ceil(sqrt(num_features))
  double min_leaf_weight_fraction = 1e-6;  // of the tree's total in-bag weight
  std::size_t max_depth = 0;              // 0: unlimited
  bool bootstrap = true;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Row-major training rows for one binary task.
struct Samples {
  std::size_t num_features = 0;
  std::vector<double> x;      // rows * num_features
  std::vector<bool> y;
  std::vector<double> weight;

  std::size_t rows() const noexcept { return y.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(x).subspan(i * num_features, num_features);
  }
  void add(std::span<const double> features, bool label, double w) {
    x.insert(x.end(), features.begin(), features.end());
    y.push_back(label);
    weight.push_back(w);
  }
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double positive_fraction = 0.0;  // weighted share of positive in-bag rows

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  static DecisionTree leaf(double positive_fraction) { return DecisionTree({TreeNode{-1, 0, 0, 0, positive_fraction}}); }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

  const TreeNode& leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto& n = nodes_[i];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[i];
  }

  double predict(std::span<const double> x) const { return leaf_for(x).positive_fraction; }

  bool uses_feature(std::size_t f) const {
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [&](const TreeNode& n) { return !n.is_leaf() && static_cast<std::size_t>(n.feature) == f; });
  }

  std::size_t depth() const { return depth_from(0); }

  bool operator==(const DecisionTree&) const = default;

 private:
  std::size_t depth_from(std::size_t i) const {
    if (nodes_[i].is_leaf()) return 0;
    return 1 + std::max(depth_from(nodes_[i].left), depth_from(nodes_[i].right));
  }

  std::vector<TreeNode> nodes_;
};

class Forest {
 public:
  Forest() = default;
  Forest(std::size_t num_features, std::vector<DecisionTree> trees)
      : num_features_(num_features), trees_(std::move(trees)) {}

  std::size_t num_features() const noexcept { return num_features_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

  /// Mean of the trees' leaf positive fractions.
  double predict(std::span<const double> x) const {
    if (x.size() != num_features_) {
      throw Error(ErrorCode::SchemaMismatch, "expected " + std::to_string(num_features_) + " features, got " +
                                                 std::to_string(x.size()));
    }
    double sum = 0;
    for (const auto& t : trees_) sum += t.predict(x);
    return trees_.empty() ? 0.0 : sum / static_cast<double>(trees_.size());
  }

  bool uses_feature(std::size_t f) const {
    return std::any_of(trees_.begin(), trees_.end(), [&](const DecisionTree& t) { return t.uses_feature(f); });
  }

  bool operator==(const Forest&) const = default;

 private:
  std::size_t num_features_ = 0;
  std::vector<DecisionTree> trees_;
};

inline double gini(double positive, double total) noexcept {
  if (total <= 0) return 0.0;
  const double p = positive / total;
  return 2.0 * p * (1.0 - p);
}

struct SplitChoice {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double decrease = 0.0;
};

namespace detail {

inline double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

class TreeGrower {
 public:
  TreeGrower(const Samples& data, std::vector<double> inbag, const ForestParams& params, std::size_t mtry,
             Rng& rng)
      : data_(data), inbag_(std::move(inbag)), params_(params), mtry_(mtry), rng_(rng) {
    const double total = std::accumulate(inbag_.begin(), inbag_.end(), 0.0);
    min_leaf_ = params.min_leaf_weight_fraction * total;
  }

  DecisionTree grow() {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < inbag_.size(); ++i) {
      if (inbag_[i] > 0) rows.push_back(i);
    }
    build(rows, 0);
    return DecisionTree(std::move(nodes_));
  }

 private:
  std::uint32_t build(std::vector<std::size_t>& rows, std::size_t depth) {
    double pos = 0, total = 0;
    for (auto r : rows) {
      total += inbag_[r];
      if (data_.y[r]) pos += inbag_[r];
    }
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(TreeNode{-1, 0.0, 0, 0, total > 0 ? pos / total : 0.0});
    const bool pure = pos <= 0 || pos >= total;
    const bool depth_cap = params_.max_depth != 0 && depth >= params_.max_depth;
    if (pure || depth_cap) return id;

    auto features = rng_.sample_without_replacement(data_.num_features, mtry_);
    std::sort(features.begin(), features.end());
    const SplitChoice best = best_split(rows, features, pos, total);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (data_.row(r)[static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const auto l = build(left, depth + 1);
    const auto r = build(right, depth + 1);
    nodes_[id].feature = best.feature;
    nodes_[id].threshold = best.threshold;
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  SplitChoice best_split(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& features,
                         double pos, double total) const {
    SplitChoice best;
    const double parent = total * gini(pos, total);
    const double eps = 1e-12 * total;
    std::vector<std::pair<double, std::size_t>> sorted(rows.size());
    for (auto f : features) {
      for (std::size_t i = 0; i < rows.size(); ++i) sorted[i] = {data_.row(rows[i])[f], rows[i]};
      std::sort(sorted.begin(), sorted.end());
      double wl = 0, pl = 0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const auto r = sorted[i].second;
        wl += inbag_[r];
        if (data_.y[r]) pl += inbag_[r];
        if (sorted[i].first == sorted[i + 1].first) continue;
        const double wr = total - wl, pr = pos - pl;
        if (wl < min_leaf_ || wr < min_leaf_) continue;
        const double decrease = parent - wl * gini(pl, wl) - wr * gini(pr, wr);
        if (decrease > eps && decrease > best.decrease) {
          best = {static_cast<std::int32_t>(f), midpoint(sorted[i].first, sorted[i + 1].first), decrease};
        }
      }
    }
    return best;
  }

  const Samples& data_;
  std::vector<double> inbag_;
  const ForestParams& params_;
  std::size_t mtry_;
  Rng& rng_;
  double min_leaf_ = 0;
  std::vector<TreeNode> nodes_;
};

inline std::vector<double> weighted_bootstrap(const std::vector<double>& weights, Rng& rng) {
  std::vector<double> cumulative(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
  const double total = cumulative.back();
  std::vector<double> counts(weights.size(), 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double u = rng.uniform01() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    counts[static_cast<std::size_t>(it - cumulative.begin())] += 1.0;
  }
  return counts;
}

}  // namespace detail

inline std::size_t resolve_mtry(const ForestParams& params, std::size_t num_features) {
  if (params.mtry != 0) return params.mtry;
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(num_features))));
}

inline void validate(const ForestParams& params, std::size_t num_features) {
  if (params.num_trees == 0) throw Error(ErrorCode::Params, "num_trees must be at least 1");
  if (num_features == 0) throw Error(ErrorCode::Params, "no features");
  const auto mtry = resolve_mtry(params, num_features);
  if (mtry > num_features) {
    throw Error(ErrorCode::Params, "mtry " + std::to_string(mtry) + " exceeds feature count " +
                                       std::to_string(num_features));
  }
  if (!(params.min_leaf_weight_fraction >= 0.0 && params.min_leaf_weight_fraction < 0.5)) {
    throw Error(ErrorCode::Params, "min_leaf_weight_fraction must be in [0, 0.5)");
  }
}

/// Grows one tree. Exposed for tests; train_forest is the normal entry point.
inline DecisionTree grow_tree(const Samples& data, const ForestParams& params, std::uint64_t tree_seed) {
  Rng rng(tree_seed);
  std::vector<double> inbag = params.bootstrap ? detail::weighted_bootstrap(data.weight, rng) : data.weight;
  return detail::TreeGrower(data, std::move(inbag), params, resolve_mtry(params, data.num_features), rng).grow();
}

/// Trains `num_trees` trees; tree t uses Rng(sub_seed(seed, t)), so the result
/// does not depend on `threads`. E_ONE_CLASS unless both classes carry weight.
inline Forest train_forest(const Samples& data, const ForestParams& params) {
  validate(params, data.num_features);
  if (data.rows() == 0) throw Error(ErrorCode::OneClass, "no training rows");
  if (data.x.size() != data.rows() * data.num_features || data.weight.size() != data.rows()) {
    throw Error(ErrorCode::Params, "inconsistent sample arrays");
  }
  double pos = 0, neg = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const double w = data.weight[i];
    if (!(w > 0.0) || !std::isfinite(w)) throw Error(ErrorCode::Params, "case weights must be positive and finite");
    (data.y[i] ? pos : neg) += w;
  }
  if (pos == 0 || neg == 0) throw Error(ErrorCode::OneClass, "training rows contain a single class");

  std::vector<DecisionTree> trees(params.num_trees);
  parallel_for(params.num_trees, params.threads,
               [&](std::size_t t) { trees[t] = grow_tree(data, params, sub_seed(params.seed, t)); });
  return Forest(data.num_features, std::move(trees));
}

}  // namespace sdgl

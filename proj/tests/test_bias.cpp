#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "sdglab/bias.hpp"

using namespace sdgl;

namespace {

SdgProfile from_shares(std::array<double, kNumSdgs> shares) {
  SdgProfile p;
  p.proportions = shares;
  p.empty = false;
  return p;
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

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, bool ties) {
  std::vector<double> v(n);
  for (auto& x : v) {
    x = ties ? static_cast<double>(std::uniform_int_distribution<int>(0, 4)(rng))
             : std::uniform_real_distribution<double>(-5, 5)(rng);
  }
  return v;
}

}  // namespace

TEST(Profile, Examples) {
  const std::vector<SdgSet> a{SdgSet{1}, SdgSet{1}, SdgSet{3}};
  const auto p = profile(a);
  EXPECT_DOUBLE_EQ(p[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(p[3], 1.0 / 3.0);
  EXPECT_FALSE(p.empty);

  const std::vector<SdgSet> multi{SdgSet{1, 3}};
  EXPECT_DOUBLE_EQ(profile(multi)[1], 0.5);
  EXPECT_DOUBLE_EQ(profile(multi)[3], 0.5);

  const std::vector<SdgSet> none{SdgSet{}, SdgSet{}};
  const auto z = profile(none);
  EXPECT_TRUE(z.empty);
  for (double v : z.proportions) EXPECT_EQ(v, 0.0);
}

TEST(Profile, SumsToOne) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    std::vector<SdgSet> sets(std::uniform_int_distribution<int>(1, 30)(rng));
    for (auto& s : sets) s = SdgSet::from_mask(static_cast<std::uint32_t>(rng()) & ((1u << 17) - 1));
    const auto p = profile(sets);
    if (p.empty) continue;
    ASSERT_NEAR(std::accumulate(p.proportions.begin(), p.proportions.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(SystemProfile, RestrictedToEvaluatedPairs) {
  std::vector<Document> docs;
  docs.emplace_back("a", "x", ExpertLabels{SdgSet{3}, SdgSet{3, 4}});
  const Dataset ds("lab", DatasetKind::Labeled, docs);
  PredictionMatrix m(ds);
  m.set_predicted(0, m.add_system("s"), SdgSet{3, 9});
  const auto p = system_profile(m, ds, "s");
  EXPECT_DOUBLE_EQ(p[3], 1.0);
  EXPECT_DOUBLE_EQ(p[9], 0.0);
  EXPECT_DOUBLE_EQ(expert_profile(ds)[3], 1.0);
}

TEST(Bias, Examples) {
  std::array<double, kNumSdgs> pred{}, obs{};
  pred[2] = 0.26;
  obs[2] = 0.13;
  pred[0] = 0.05;
  obs[0] = 0.10;
  const auto b = bias(from_shares(pred), from_shares(obs));
  EXPECT_DOUBLE_EQ(*b[2], 1.0);
  EXPECT_DOUBLE_EQ(*b[0], -0.5);
  EXPECT_FALSE(b[5]);  // observed share 0

  const auto same = bias(from_shares(obs), from_shares(obs));
  for (const auto& v : same) {
    if (v) EXPECT_EQ(*v, 0.0);
  }
}

TEST(Bias, DefinedExactlyWhereObservedPositive) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 200; ++i) {
    std::array<double, kNumSdgs> p{}, o{};
    for (std::size_t g = 0; g < p.size(); ++g) {
      p[g] = std::uniform_real_distribution<double>(0, 1)(rng);
      o[g] = std::bernoulli_distribution(0.3)(rng) ? 0.0 : std::uniform_real_distribution<double>(0.01, 1)(rng);
    }
    const auto b = bias(from_shares(p), from_shares(o));
    for (std::size_t g = 0; g < p.size(); ++g) {
      ASSERT_EQ(b[g].has_value(), o[g] > 0);
      if (b[g]) ASSERT_GE(*b[g], -1.0);
    }
  }
}

TEST(Correlation, Examples) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> neg(x.size());
  std::transform(x.begin(), x.end(), neg.begin(), [](double v) { return -v; });
  EXPECT_DOUBLE_EQ(pearson(x, x), 1.0);
  EXPECT_DOUBLE_EQ(spearman(x, x), 1.0);
  EXPECT_DOUBLE_EQ(pearson(x, neg), -1.0);

  const std::vector<double> a{2.0, 4.5, 1.0, 7.0, 3.5}, b{1.0, 3.0, 2.5, 8.0, 2.0};
  EXPECT_NEAR(pearson(a, b), oracle::pearson(a, b), 1e-12);
  EXPECT_NEAR(spearman(a, b), oracle::spearman(a, b), 1e-12);
  const std::vector<double> ta{1, 2, 2, 3, 3, 3}, tb{6, 5, 5, 1, 2, 2};
  EXPECT_NEAR(spearman(ta, tb), oracle::spearman(ta, tb), 1e-12);
}

TEST(Correlation, Degenerate) {
  const std::vector<double> two{1, 2}, three{1, 2, 3}, flat{4, 4, 4}, four{1, 2, 3, 4};
  EXPECT_EQ(error_of([&] { pearson(two, two); }), ErrorCode::Degenerate);
  EXPECT_EQ(error_of([&] { pearson(three, flat); }), ErrorCode::Degenerate);
  EXPECT_EQ(error_of([&] { spearman(flat, three); }), ErrorCode::Degenerate);
  EXPECT_EQ(error_of([&] { pearson(three, four); }), ErrorCode::Degenerate);
}

TEST(Correlation, MatchesOraclesAndIsBounded) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 2000; ++i) {
    const auto n = std::uniform_int_distribution<std::size_t>(3, 17)(rng);
    const bool ties = i % 2 == 0;
    const auto x = random_vector(rng, n, ties), y = random_vector(rng, n, ties);
    const auto constant = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [&](double e) { return e == v[0]; });
    };
    if (constant(x) || constant(y)) continue;
    const double p = pearson(x, y), s = spearman(x, y);
    ASSERT_NEAR(p, oracle::pearson(x, y), 1e-9);
    ASSERT_NEAR(s, oracle::spearman(x, y), 1e-9);
    ASSERT_LE(std::abs(p), 1.0);
    ASSERT_LE(std::abs(s), 1.0);
    ASSERT_NEAR(p, pearson(y, x), 1e-12);
    ASSERT_NEAR(s, spearman(y, x), 1e-12);
  }
}

TEST(Correlation, RanksMatchBruteForce) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const auto x = random_vector(rng, 17, true);
    const auto r = average_ranks(x);
    ASSERT_EQ(r, oracle::ranks(x));
  }
}

TEST(ProfileBias, Examples) {
  BiasVector v;
  for (int g = 0; g < 6; ++g) v[static_cast<std::size_t>(g)] = g * 0.3 - 0.7;
  BiasVector negated;
  for (std::size_t g = 0; g < v.size(); ++g) {
    if (v[g]) negated[g] = -*v[g];
  }
  const std::vector<BiasVector> same{v, v}, opposite{v, negated};
  EXPECT_DOUBLE_EQ(profile_bias(same, all_pairs(2)), 1.0);
  EXPECT_DOUBLE_EQ(profile_bias(opposite, all_pairs(2)), -1.0);

  // third dataset with only two shared defined SDGs
  BiasVector sparse;
  sparse[0] = 1.0;
  sparse[1] = 2.0;
  const std::vector<BiasVector> thin{v, sparse};
  EXPECT_EQ(error_of([&] { profile_bias(thin, all_pairs(2)); }), ErrorCode::Degenerate);
  const std::vector<BiasVector> single{v};
  EXPECT_EQ(error_of([&] { profile_bias(single, all_pairs(1)); }), ErrorCode::Degenerate);
}

TEST(ProfileBias, MeanOverPairsMatchesOracle) {
  std::mt19937_64 rng(31);
  std::vector<BiasVector> biases(3);
  for (auto& b : biases) {
    for (auto& e : b) {
      if (std::bernoulli_distribution(0.8)(rng)) e = std::uniform_real_distribution<double>(-1, 3)(rng);
    }
  }
  const auto pairs = all_pairs(3);
  ASSERT_EQ(pairs.size(), 3u);
  double expected = 0;
  for (const auto& [i, j] : pairs) {
    std::vector<double> x, y;
    for (std::size_t g = 0; g < kNumSdgs; ++g) {
      if (biases[i][g] && biases[j][g]) {
        x.push_back(*biases[i][g]);
        y.push_back(*biases[j][g]);
      }
    }
    expected += oracle::pearson(x, y);
  }
  EXPECT_NEAR(profile_bias(biases, pairs), expected / 3.0, 1e-12);
}

TEST(ProfileFidelity, Examples) {
  std::array<double, kNumSdgs> up{}, down{};
  for (std::size_t i = 0; i < up.size(); ++i) {
    up[i] = static_cast<double>(i + 1) / 153.0;
    down[i] = static_cast<double>(17 - i) / 153.0;
  }
  EXPECT_DOUBLE_EQ(profile_fidelity(from_shares(up), from_shares(up)), 1.0);
  EXPECT_DOUBLE_EQ(profile_fidelity(from_shares(up), from_shares(down)), -1.0);

  // known permutation with a tie
  const std::array<int, kNumSdgs> perm{3, 1, 2, 5, 4, 7, 6, 9, 8, 11, 10, 13, 12, 15, 14, 17, 17};
  std::array<double, kNumSdgs> permuted{};
  for (std::size_t i = 0; i < perm.size(); ++i) permuted[i] = perm[i] / 153.0;
  const std::vector<double> x(up.begin(), up.end()), y(permuted.begin(), permuted.end());
  EXPECT_NEAR(profile_fidelity(from_shares(up), from_shares(permuted)), oracle::spearman(x, y), 1e-12);
}

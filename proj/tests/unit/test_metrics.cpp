#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "iu4rec/errors.hpp"
#include "iu4rec/metrics.hpp"
#include "iu4rec/rng.hpp"

using namespace iu4rec;

namespace {

// O(|P||N|) pair count.
double brute_force_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels, double tie) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      if (scores[i] == scores[j]) wins += tie;
    }
  }
  return wins / pairs;
}

}  // namespace

TEST(Auc, HandCases) {
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.9}, std::vector<std::uint8_t>{0, 1}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.1}, std::vector<std::uint8_t>{0, 1}), 0.0);
  EXPECT_EQ(auc(std::vector<double>{0.5, 0.5}, std::vector<std::uint8_t>{0, 1}), 0.5);
  EXPECT_EQ(auc(std::vector<double>{0.5, 0.5}, std::vector<std::uint8_t>{0, 1}, TieMode::kStrict), 0.0);
  // Pairs: (0.8>0.3) (0.8>0.6) (0.4>0.3) (0.4<0.6) -> 3/4
  EXPECT_EQ(auc(std::vector<double>{0.8, 0.3, 0.4, 0.6}, std::vector<std::uint8_t>{1, 0, 1, 0}), 0.75);
}

TEST(Auc, MatchesBruteForceOnRandomSetsWithTies) {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(120);
    std::vector<double> scores(n);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng.below(8)) / 8.0;  // heavy ties
      labels[i] = rng.bernoulli(0.3) ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    EXPECT_NEAR(auc(scores, labels), brute_force_auc(scores, labels, 0.5), 1e-12);
    EXPECT_NEAR(auc(scores, labels, TieMode::kStrict), brute_force_auc(scores, labels, 0.0), 1e-12);
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  Rng rng(3);
  std::vector<double> scores(200);
  std::vector<std::uint8_t> labels(200);
  for (std::size_t i = 0; i < 200; ++i) {
    scores[i] = rng.normal();
    labels[i] = rng.bernoulli(0.4) ? 1 : 0;
  }
  std::vector<double> mapped(scores);
  for (double& s : mapped) s = std::exp(3.0 * s) + 1.0;
  EXPECT_NEAR(auc(scores, labels), auc(mapped, labels), 1e-15);
}

TEST(Auc, FlippingLabelsComplements) {
  Rng rng(4);
  std::vector<double> scores(150);
  std::vector<std::uint8_t> labels(150);
  for (std::size_t i = 0; i < 150; ++i) {
    scores[i] = static_cast<double>(rng.below(20));
    labels[i] = rng.bernoulli(0.5) ? 1 : 0;
  }
  std::vector<std::uint8_t> flipped(labels);
  for (auto& l : flipped) l = l != 0 ? 0 : 1;
  EXPECT_NEAR(auc(scores, labels) + auc(scores, flipped), 1.0, 1e-12);
}

TEST(Auc, SingleClassIsUndefined) {
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{1, 1}), UndefinedMetric);
  EXPECT_THROW(auc(std::vector<double>{}, std::vector<std::uint8_t>{}), UndefinedMetric);
  EXPECT_THROW(auc(std::vector<double>{0.1}, std::vector<std::uint8_t>{1, 0}), DataError);
}

TEST(Gauc, TwoUserHandCase) {
  // User 1: 4 impressions, AUC 1. User 2: 6 impressions, 6 of 9 pairs won.
  // GAUC = (4 * 1 + 6 * 2/3) / 10 = 0.8.
  const std::vector<ScoredSample> samples{
      {1, 0.9, 1, false}, {1, 0.8, 1, false}, {1, 0.2, 0, false},  {1, 0.1, 0, false},
      {2, 0.9, 1, false}, {2, 0.45, 1, false}, {2, 0.05, 1, false}, {2, 0.4, 0, false},
      {2, 0.3, 0, false}, {2, 0.1, 0, false},
  };
  const auto users = per_user_auc(samples);
  ASSERT_EQ(users.size(), 2u);
  EXPECT_EQ(users[0].auc, 1.0);
  EXPECT_EQ(users[0].impressions, 4u);
  EXPECT_DOUBLE_EQ(users[1].auc, 6.0 / 9.0);
  EXPECT_EQ(users[1].impressions, 6u);
  EXPECT_DOUBLE_EQ(gauc(samples), 0.8);
}

TEST(Gauc, SkipsSingleClassUsers) {
  const std::vector<ScoredSample> samples{
      {1, 0.9, 1, false}, {1, 0.1, 0, false}, {2, 0.5, 1, false}, {2, 0.7, 1, false}, {3, 0.2, 0, false},
  };
  EXPECT_EQ(per_user_auc(samples).size(), 1u);
  EXPECT_EQ(gauc(samples), 1.0);
  const std::vector<ScoredSample> none{{2, 0.5, 1, false}, {3, 0.2, 0, false}};
  EXPECT_THROW(gauc(none), UndefinedMetric);
}

TEST(Gauc, LiesBetweenPerUserExtremes) {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScoredSample> samples;
    const std::size_t users = 2 + rng.below(6);
    for (std::uint32_t u = 1; u <= users; ++u) {
      const std::size_t n = 2 + rng.below(30);
      for (std::size_t i = 0; i < n; ++i) {
        samples.push_back({u, rng.uniform(), static_cast<std::uint8_t>(rng.bernoulli(0.4) ? 1 : 0), false});
      }
      samples.push_back({u, rng.uniform(), 1, false});
      samples.push_back({u, rng.uniform(), 0, false});
    }
    const auto per_user = per_user_auc(samples);
    const auto [lo, hi] = std::minmax_element(per_user.begin(), per_user.end(),
                                              [](const UserAuc& a, const UserAuc& b) { return a.auc < b.auc; });
    const double g = gauc(samples);
    EXPECT_GE(g, lo->auc - 1e-15);
    EXPECT_LE(g, hi->auc + 1e-15);
  }
}

TEST(RelaImpr, PublishedTableArithmetic) {
  EXPECT_NEAR(rela_impr(0.7411, 0.7366), 1.90, 0.01);
  EXPECT_NEAR(rela_impr(0.7335, 0.7366), -1.31, 0.01);
  // Printed values are 1.91% and -1.30%.
  EXPECT_NEAR(rela_impr(0.7411, 0.7366), 1.91, 0.02);
  EXPECT_NEAR(rela_impr(0.7335, 0.7366), -1.30, 0.02);
  EXPECT_EQ(rela_impr(0.7, 0.7), 0.0);
  EXPECT_THROW(rela_impr(0.7, 0.5), UndefinedMetric);
}

TEST(DomainSplit, PartitionsAndCounts) {
  const std::vector<ScoredSample> samples{
      {1, 0.9, 1, true}, {1, 0.1, 0, true}, {1, 0.6, 1, false}, {1, 0.7, 0, false}, {2, 0.3, 0, false},
  };
  const DomainMetrics m = domain_split_eval(samples);
  EXPECT_EQ(m.overall_count, 5u);
  EXPECT_EQ(m.iu_count, 2u);
  EXPECT_EQ(m.normal_count, 3u);
  EXPECT_EQ(*m.iu_auc, 1.0);
  EXPECT_EQ(*m.normal_auc, 0.5);
  ASSERT_TRUE(m.overall_auc.has_value());
}

TEST(DomainSplit, EmptyPartitionIsUndefinedNotZero) {
  const std::vector<ScoredSample> samples{{1, 0.9, 1, false}, {1, 0.1, 0, false}};
  const DomainMetrics m = domain_split_eval(samples);
  EXPECT_FALSE(m.iu_auc.has_value());
  ModelRow row{"DIN", m, {}, {}, {}, {}};
  const auto report = make_report({row}, "DIN");
  const auto j = to_json(report);
  EXPECT_EQ(j["rows"][0]["interest_unit"]["auc"], "undefined");
  EXPECT_EQ(j["rows"][0]["overall"]["auc_ri_pct"], 0.0);
}

TEST(Report, RelativeColumnsAgainstBase) {
  ModelRow base{"DIN", {}, {}, {}, {}, {}};
  base.metrics.overall_auc = 0.7366;
  ModelRow better{"IU_BOOSTED", {}, {}, {}, {}, {}};
  better.metrics.overall_auc = 0.7411;
  const auto report = make_report({base, better}, "DIN");
  EXPECT_NEAR(*report.rows[1].ri_overall_auc, rela_impr(0.7411, 0.7366), 1e-15);
  EXPECT_FALSE(report.rows[1].ri_iu_auc.has_value());
  EXPECT_THROW(make_report({better}, "DIN"), ConfigError);
}

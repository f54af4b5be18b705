#include <gtest/gtest.h>

#include <cmath>

#include "inmerge/error.hpp"
#include "inmerge/metrics.hpp"
#include "inmerge/rng.hpp"
#include "oracles.hpp"

namespace inmerge {
namespace {

using Labels = std::vector<std::uint8_t>;
using Scores = std::vector<double>;

TEST(AccuracyTest, Examples) {
  EXPECT_DOUBLE_EQ(accuracy(Labels{0, 1, 1}, Labels{0, 1, 0}), 2.0 / 3.0);
  EXPECT_EQ(accuracy(Labels{2, 1}, Labels{2, 1}), 1.0);
  EXPECT_EQ(accuracy(Labels{0, 0}, Labels{1, 1}), 0.0);
  EXPECT_THROW(accuracy(Labels{}, Labels{}), ShapeError);
  EXPECT_THROW(accuracy(Labels{1}, Labels{1, 0}), ShapeError);
}

TEST(AurocTest, Examples) {
  EXPECT_DOUBLE_EQ(*auroc(Scores{0.1, 0.4, 0.35, 0.8}, Labels{0, 0, 1, 1}), 0.75);
  EXPECT_EQ(*auroc(Scores{0.1, 0.2, 0.8, 0.9}, Labels{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(*auroc(Scores{0.5, 0.5, 0.5}, Labels{0, 1, 1}), 0.5);
  EXPECT_FALSE(auroc(Scores{0.1, 0.2}, Labels{1, 1}).has_value());
}

TEST(AurocTest, MatchesPairCountOracle) {
  Rng rng(99);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng.uniform_index(200);
    Scores s(n);
    Labels l(n);
    const std::size_t levels = 1 + rng.uniform_index(10);  // few levels force ties
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = t % 2 ? static_cast<double>(rng.uniform_index(levels)) : rng.normal();
      l[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    const auto got = auroc(s, l);
    const auto want = testing::pair_count_auroc(s, l);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) EXPECT_NEAR(*got, *want, 1e-12);
  }
}

TEST(AurocTest, MonotoneTransformInvariance) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    Scores s(60), e(60), a(60), neg(60);
    Labels l(60);
    for (std::size_t i = 0; i < 60; ++i) {
      s[i] = rng.uniform(-3, 3);
      e[i] = std::exp(s[i]);
      a[i] = 2.5 * s[i] - 7.0;
      neg[i] = -s[i];
      l[i] = i % 3 == 0;
    }
    const double base = *auroc(s, l);
    EXPECT_NEAR(*auroc(e, l), base, 1e-12);
    EXPECT_NEAR(*auroc(a, l), base, 1e-12);
    EXPECT_NEAR(*auroc(neg, l) + base, 1.0, 1e-12);
  }
}

TEST(MeanAurocTest, Rules) {
  using Opt = std::vector<std::optional<double>>;
  EXPECT_EQ(mean_auroc(Opt{1.0, 0.5}), 0.75);
  EXPECT_DOUBLE_EQ(mean_auroc(Opt{0.6, std::nullopt, 0.8}), 0.7);
  EXPECT_EQ(mean_auroc(Opt{0.9}), 0.9);
  EXPECT_THROW(mean_auroc(Opt{std::nullopt}), ShapeError);
}

TEST(RocPointsTest, EndsAtOneOne) {
  const auto pts = roc_points(Scores{0.1, 0.4, 0.35, 0.8}, Labels{0, 0, 1, 1});
  ASSERT_EQ(pts.size(), 5u);
  EXPECT_EQ(pts.front().fpr, 0.0);
  EXPECT_EQ(pts.front().tpr, 0.0);
  EXPECT_EQ(pts.back().fpr, 1.0);
  EXPECT_EQ(pts.back().tpr, 1.0);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    EXPECT_LT(pts[i].threshold, pts[i - 1].threshold);
  }
}

}  // namespace
}  // namespace inmerge

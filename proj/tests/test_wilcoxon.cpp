#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "metaood/rng.hpp"
#include "metaood/wilcoxon.hpp"
#include "support.hpp"

using namespace metaood;
using testing_support::enumerate_p;
using testing_support::integer_ranks_of_abs;
using testing_support::tie_free_differences;

namespace {

std::vector<double> zeros(std::size_t n) { return std::vector<double>(n, 0.0); }

}  // namespace

TEST(Wilcoxon, IdenticalSamplesGiveOne) {
  const std::vector<double> x{1, 2, 3, 4};
  const auto r = wilcoxon_signed_rank(x, x);
  EXPECT_TRUE(r.all_zero);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.n_effective, 0u);
}

TEST(Wilcoxon, OneTwoThree) {
  const std::vector<double> d{1, 2, 3};
  const auto r = wilcoxon_signed_rank(d, zeros(3));
  EXPECT_EQ(r.statistic, 6.0);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.p_value, 0.125);
  EXPECT_EQ(wilcoxon_signed_rank(d, zeros(3), Alternative::less).p_value, 1.0);
  EXPECT_EQ(wilcoxon_signed_rank(d, zeros(3), Alternative::two_sided).p_value, 0.25);
}

TEST(Wilcoxon, NullDistributionCounts) {
  const auto c = signed_rank_counts(4);
  const std::vector<std::uint64_t> expect{1, 1, 1, 2, 2, 2, 2, 2, 1, 1, 1};
  EXPECT_EQ(c, expect);
  for (std::size_t n = 1; n <= 14; ++n) {
    std::uint64_t total = 0;
    for (auto v : signed_rank_counts(n)) total += v;
    EXPECT_EQ(total, std::uint64_t{1} << n);
  }
}

TEST(Wilcoxon, ExactMatchesEnumerationBitForBit) {
  Rng rng(2024);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.below(10);
    const auto d = tie_free_differences(rng, n);
    const auto ranks = integer_ranks_of_abs(d);
    double w = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (d[i] > 0) w += ranks[i];
    const auto e = enumerate_p(ranks, w);
    const auto g = wilcoxon_signed_rank(d, zeros(n), Alternative::greater);
    const auto l = wilcoxon_signed_rank(d, zeros(n), Alternative::less);
    ASSERT_TRUE(g.exact);
    EXPECT_EQ(g.statistic, w);
    EXPECT_EQ(g.p_value, e.greater);
    EXPECT_EQ(l.p_value, e.less);
  }
}

TEST(Wilcoxon, NormalApproximationCloseToEnumerationAtTwentyFour) {
  Rng rng(7);
  for (int t = 0; t < 3; ++t) {
    const auto d = tie_free_differences(rng, 24);
    const auto r = wilcoxon_signed_rank(d, zeros(24));
    ASSERT_FALSE(r.exact);
    const auto e = enumerate_p(integer_ranks_of_abs(d), r.statistic);
    EXPECT_NEAR(r.p_value, e.greater, 0.01);
  }
}

TEST(Wilcoxon, ExactAndApproximateAgreeNearCutoff) {
  Rng rng(11);
  for (std::size_t n = 10; n <= 14; ++n) {
    const auto d = tie_free_differences(rng, n);
    const auto r = wilcoxon_signed_rank(d, zeros(n));
    ASSERT_TRUE(r.exact);
    const double mean = n * (n + 1) / 4.0, sd = std::sqrt(n * (n + 1) * (2.0 * n + 1) / 24.0);
    const double approx = 0.5 * std::erfc((r.statistic - mean - 0.5) / sd / std::sqrt(2.0));
    EXPECT_NEAR(r.p_value, approx, 0.02) << n;
  }
}

TEST(Wilcoxon, TiesUseCorrectedNormal) {
  const std::vector<double> d{1, 1, -2, 3, 3, 3};
  const auto r = wilcoxon_signed_rank(d, zeros(6));
  EXPECT_FALSE(r.exact);
  // midranks of |d|: 1.5 1.5 3 5 5 5 ; W+ = 1.5+1.5+15 = 18
  EXPECT_DOUBLE_EQ(r.statistic, 18.0);
  const double var = 6 * 7 * 13 / 24.0 - (8 - 2) / 48.0 - (27 - 3) / 48.0;
  const double z = (18 - 10.5 - 0.5) / std::sqrt(var);
  EXPECT_NEAR(r.p_value, 0.5 * std::erfc(z / std::sqrt(2.0)), 1e-15);
}

TEST(Wilcoxon, InvariantUnderShiftAndPositiveScale) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 3 + rng.below(20);
    std::vector<double> x(n), y(n), x2(n), y2(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = std::round(rng.uniform(0, 100) * 4) / 4;
      y[i] = std::round(rng.uniform(0, 100) * 4) / 4;
      x2[i] = 2 * x[i] + 8;
      y2[i] = 2 * y[i] + 8;
    }
    const auto a = wilcoxon_signed_rank(x, y), b = wilcoxon_signed_rank(x2, y2);
    EXPECT_EQ(a.statistic, b.statistic);
    EXPECT_EQ(a.p_value, b.p_value);
    // swapping the samples mirrors the alternative
    EXPECT_EQ(wilcoxon_signed_rank(y, x, Alternative::less).p_value, a.p_value);
  }
}

TEST(Wilcoxon, PValuesInUnitInterval) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::round(rng.uniform(0, 5)), y[i] = std::round(rng.uniform(0, 5));
    for (auto alt : {Alternative::greater, Alternative::less, Alternative::two_sided}) {
      const auto r = wilcoxon_signed_rank(x, y, alt);
      EXPECT_GE(r.p_value, 0.0);
      EXPECT_LE(r.p_value, 1.0);
    }
  }
}

TEST(Wilcoxon, InputValidation) {
  EXPECT_THROW(wilcoxon_signed_rank(std::vector<double>{1}, std::vector<double>{1, 2}), ValidationError);
  EXPECT_THROW(wilcoxon_signed_rank(std::vector<double>{}, std::vector<double>{}), ValidationError);
  EXPECT_THROW(wilcoxon_signed_rank(std::vector<double>{std::nan("")}, std::vector<double>{1}), ValidationError);
  EXPECT_THROW(parse_alternative("bigger"), ValidationError);
}

TEST(Wilcoxon, MatchesScipyReferenceValues) {
  // scipy.stats.wilcoxon(zero_method="wilcox", correction=True)
  const std::vector<double> x{88.1, 91.2, 75.0, 80.5, 99.0, 62.3, 70.0, 85.5, 90.0, 77.7, 66.6, 93.3, 81.0, 79.9, 84.4, 73.2};
  const std::vector<double> y{85.0, 90.0, 76.5, 80.5, 95.0, 60.0, 72.0, 83.0, 86.0, 77.0, 60.0, 90.0, 82.5, 75.0, 80.0, 71.0};
  const auto g = wilcoxon_signed_rank(x, y, Alternative::greater);
  EXPECT_EQ(g.n_effective, 15u);
  EXPECT_DOUBLE_EQ(g.statistic, 108.0);
  EXPECT_NEAR(g.p_value, 0.0034783786027722994, 1e-12);
  EXPECT_NEAR(wilcoxon_signed_rank(x, y, Alternative::less).p_value, 0.9970719010949035, 1e-12);
  EXPECT_NEAR(wilcoxon_signed_rank(x, y, Alternative::two_sided).p_value, 0.006956757205544599, 1e-12);
  const std::vector<double> d{1, 1, -2, 3, 3, 3};
  EXPECT_NEAR(wilcoxon_signed_rank(d, zeros(6)).p_value, 0.0683512919857247, 1e-12);
  const std::vector<double> e{0.5, -1.25, 2, 3.5, -4, 6, 7.5};
  const auto r = wilcoxon_signed_rank(e, zeros(7));
  EXPECT_DOUBLE_EQ(r.statistic, 21.0);
  EXPECT_EQ(r.p_value, 0.1484375);
}

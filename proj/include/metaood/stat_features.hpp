#pragma once

// Sample statistics of a one-dimensional distribution.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "metaood/error.hpp"
#include "metaood/feature_block.hpp"

namespace metaood {

/// Percentile by linear interpolation between closest ranks: position
/// (n - 1) * p in the sorted sample, p in [0, 1].
inline double percentile_sorted(std::span<const double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double median_sorted(std::span<const double> sorted) { return percentile_sorted(sorted, 0.5); }

inline double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Central moment of order k (population normalisation).
inline double central_moment(std::span<const double> x, double mean, int k) {
  double s = 0.0;
  for (double v : x) s += std::pow(v - mean, k);
  return s / static_cast<double>(x.size());
}

/// Gini coefficient of a non-negative sample: sum_i sum_j |x_i - x_j| / (2 n^2 mean).
/// Returns nullopt-like NaN when the sum is zero.
inline double gini_sorted(std::span<const double> sorted) {
  const auto n = static_cast<double>(sorted.size());
  double total = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    total += sorted[i];
    weighted += static_cast<double>(i + 1) * sorted[i];
  }
  if (total == 0.0) return std::nan("");
  return (2.0 * weighted) / (n * total) - (n + 1.0) / n;
}

/// Statistical meta-features of one sample.
///
/// var/std use the unbiased (n - 1) normalisation; skewness, kurtosis and
/// moments 5..10 are standardised central moments m_k / m_2^(k/2) with
/// population normalisation, kurtosis non-excess. Deviations (MAD, AAD) are
/// taken about the median. The normality statistic is Jarque-Bera,
/// n / 6 * (S^2 + (K - 3)^2 / 4).
inline FeatureBlock stat_features(std::span<const double> x) {
  if (x.size() < 2) throw ValidationError("stat_features: need at least 2 samples");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const auto n = static_cast<double>(s.size());
  const double mean = mean_of(s);
  const double median = median_sorted(s);
  const double m2 = central_moment(s, mean, 2);
  const double var = m2 * n / (n - 1.0);
  const double sd = std::sqrt(var);
  const double mn = s.front(), mx = s.back();
  const double q1 = percentile_sorted(s, 0.01), q25 = percentile_sorted(s, 0.25);
  const double q75 = percentile_sorted(s, 0.75), q99 = percentile_sorted(s, 0.99);

  std::vector<double> absdev(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) absdev[i] = std::fabs(s[i] - median);
  const double aad = mean_of(absdev);
  std::sort(absdev.begin(), absdev.end());
  const double mad = median_sorted(absdev);

  FeatureBlock b;
  b.add("mean", mean);
  b.add("median", median);
  b.add("var", var);
  b.add("min", mn);
  b.add("max", mx);
  b.add("std", sd);
  b.add("q1", q1);
  b.add("q25", q25);
  b.add("q75", q75);
  b.add("q99", q99);
  b.add("iqr", q75 - q25);
  b.add_ratio("norm_mean", mean, mx);
  b.add_ratio("norm_median", median, mx);
  b.add("range", mx - mn);
  const double g = gini_sorted(s);
  if (std::isnan(g))
    b.add_ratio("gini", 0.0, 0.0);
  else
    b.add("gini", g);
  b.add("mad", mad);
  b.add("aad", aad);
  b.add_ratio("qcd", q75 - q25, q75 + q25);
  b.add_ratio("cv", sd, mean);

  const double m3 = central_moment(s, mean, 3), m4 = central_moment(s, mean, 4);
  const bool degenerate = m2 == 0.0;
  const double skew = degenerate ? 0.0 : m3 / std::pow(m2, 1.5);
  const double kurt = degenerate ? 0.0 : m4 / (m2 * m2);
  if (degenerate)
    b.add_ratio("normality_jb", 0.0, 0.0);
  else
    b.add("normality_jb", n / 6.0 * (skew * skew + (kurt - 3.0) * (kurt - 3.0) / 4.0));
  for (int k = 5; k <= 10; ++k) {
    const std::string name = "moment" + std::to_string(k);
    if (degenerate)
      b.add_ratio(name, 0.0, 0.0);
    else
      b.add(name, central_moment(s, mean, k) / std::pow(m2, k / 2.0));
  }
  if (degenerate) {
    b.add_ratio("skewness", 0.0, 0.0);
    b.add_ratio("kurtosis", 0.0, 0.0);
  } else {
    b.add("skewness", skew);
    b.add("kurtosis", kurt);
  }
  return b;
}

}  // namespace metaood

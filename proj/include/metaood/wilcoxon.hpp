#pragma once

// Wilcoxon signed-rank test for paired samples.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "metaood/error.hpp"
#include "metaood/rank.hpp"

namespace metaood {

enum class Alternative { two_sided, greater, less };

inline std::string to_string(Alternative a) {
  switch (a) {
    case Alternative::two_sided: return "two_sided";
    case Alternative::greater: return "greater";
    case Alternative::less: return "less";
  }
  return "?";
}

inline Alternative parse_alternative(const std::string& s) {
  if (s == "two_sided" || s == "two-sided") return Alternative::two_sided;
  if (s == "greater") return Alternative::greater;
  if (s == "less") return Alternative::less;
  throw ValidationError("unknown alternative '" + s + "'");
}

struct WilcoxonResult {
  double statistic = 0.0;  // W+, sum of ranks of positive differences
  double p_value = 1.0;
  std::size_t n_effective = 0;  // non-zero differences
  bool exact = false;
  bool all_zero = false;  // every difference was zero; W reported as 0
  Alternative alternative = Alternative::greater;
};

/// Largest effective sample size handled by exact enumeration.
inline constexpr std::size_t kWilcoxonExactMaxN = 14;

/// Null distribution of W+ for ranks 1..n: counts[s] is the number of the
/// 2^n sign assignments with W+ = s.
inline std::vector<std::uint64_t> signed_rank_counts(std::size_t n) {
  const std::size_t max_sum = n * (n + 1) / 2;
  std::vector<std::uint64_t> counts(max_sum + 1, 0);
  counts[0] = 1;
  for (std::size_t r = 1; r <= n; ++r)
    for (std::size_t s = max_sum; s >= r; --s) counts[s] += counts[s - r];
  return counts;
}

namespace detail {

inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace detail

/// Differences d = x - y with zeros dropped; |d| midranked; W+ is the rank
/// sum of positive differences. "greater" tests x > y. The p-value is exact
/// (from the null distribution of W+) when the effective n is at most 14
/// and |d| has no ties; otherwise a normal approximation with tie-corrected
/// variance and a 0.5 continuity correction is used.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                           Alternative alternative = Alternative::greater) {
  if (x.size() != y.size()) throw ValidationError("wilcoxon: samples differ in length");
  if (x.empty()) throw ValidationError("wilcoxon: empty samples");
  std::vector<double> absd;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (!std::isfinite(d)) throw ValidationError("wilcoxon: non-finite difference at index " + std::to_string(i));
    if (d == 0.0) continue;
    absd.push_back(std::fabs(d));
    positive.push_back(d > 0.0);
  }
  WilcoxonResult res;
  res.alternative = alternative;
  res.n_effective = absd.size();
  if (absd.empty()) {
    res.all_zero = true;
    return res;
  }
  const auto ranks = midranks(absd);
  double w = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i)
    if (positive[i]) w += ranks[i];
  res.statistic = w;

  const auto ties = tie_group_sizes(absd);
  const std::size_t n = absd.size();
  if (n <= kWilcoxonExactMaxN && ties.empty()) {
    res.exact = true;
    const auto counts = signed_rank_counts(n);
    const auto w_int = static_cast<std::size_t>(w);
    std::uint64_t upper = 0, lower = 0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (s >= w_int) upper += counts[s];
      if (s <= w_int) lower += counts[s];
    }
    const double total = std::ldexp(1.0, static_cast<int>(n));
    const double p_greater = static_cast<double>(upper) / total;
    const double p_less = static_cast<double>(lower) / total;
    switch (alternative) {
      case Alternative::greater: res.p_value = p_greater; break;
      case Alternative::less: res.p_value = p_less; break;
      case Alternative::two_sided: res.p_value = std::min(1.0, 2.0 * std::min(p_greater, p_less)); break;
    }
    return res;
  }

  const auto nd = static_cast<double>(n);
  const double mean = nd * (nd + 1.0) / 4.0;
  double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0;
  for (auto t : ties) {
    const auto td = static_cast<double>(t);
    var -= (td * td * td - td) / 48.0;
  }
  const double sd = std::sqrt(var);
  if (sd == 0.0) {
    res.p_value = 1.0;
    return res;
  }
  switch (alternative) {
    case Alternative::greater: res.p_value = detail::normal_upper_tail((w - mean - 0.5) / sd); break;
    case Alternative::less: res.p_value = detail::normal_upper_tail((mean - w - 0.5) / sd); break;
    case Alternative::two_sided: {
      const double z = (std::fabs(w - mean) - 0.5) / sd;
      res.p_value = std::min(1.0, 2.0 * detail::normal_upper_tail(z));
      break;
    }
  }
  res.p_value = std::clamp(res.p_value, 0.0, 1.0);
  return res;
}

}  // namespace metaood

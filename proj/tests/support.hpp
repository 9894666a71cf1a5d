#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "metaood/gbrt.hpp"
#include "metaood/meta_predictor.hpp"
#include "metaood/rng.hpp"

namespace testing_support {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(METAOOD_FIXTURE_DIR) / name;
}

/// Fresh scratch directory under the system temp dir, unique per test name.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("metaood-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Transport oracle: north-west corner plan over normalised masses, which
// is an optimal coupling for |i - j| cost on a line. Returns sum flow*|i-j|.
inline double transport_oracle(std::vector<double> a, std::vector<double> b) {
  double sa = 0, sb = 0;
  for (double v : a) sa += v;
  for (double v : b) sb += v;
  for (auto& v : a) v /= sa;
  for (auto& v : b) v /= sb;
  std::size_t i = 0, j = 0;
  double cost = 0;
  while (i < a.size() && j < b.size()) {
    const double f = std::min(a[i], b[j]);
    cost += f * std::fabs(static_cast<double>(i) - static_cast<double>(j));
    a[i] -= f;
    b[j] -= f;
    if (a[i] <= 1e-15) ++i;
    else ++j;
  }
  return cost;
}

// Brute force over all 2^n sign patterns of the observed |d| ranks.
struct Enumerated {
  double greater, less;
};

inline Enumerated enumerate_p(const std::vector<double>& ranks, double w) {
  const std::size_t n = ranks.size();
  std::uint64_t ge = 0, le = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) s += ranks[i];
    if (s >= w - 1e-9) ++ge;
    if (s <= w + 1e-9) ++le;
  }
  const double total = std::ldexp(1.0, static_cast<int>(n));
  return {static_cast<double>(ge) / total, static_cast<double>(le) / total};
}

// Tie-free sample: distinct magnitudes with random signs.
inline std::vector<double> tie_free_differences(metaood::Rng& rng, std::size_t n) {
  std::vector<double> d;
  for (std::size_t i = 0; i < n; ++i) d.push_back((static_cast<double>(i) + 1 + rng.uniform(0.0, 0.5)) * (rng.uniform() < 0.5 ? -1 : 1));
  metaood::shuffle(d, rng);
  return d;
}

inline std::vector<double> integer_ranks_of_abs(const std::vector<double>& d) {
  std::vector<double> r(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::size_t below = 0;
    for (double v : d) below += std::fabs(v) < std::fabs(d[i]);
    r[i] = static_cast<double>(below + 1);
  }
  return r;
}

/// Synthetic selection task: pair i has a 2-d data embedding d_i, pseudo
/// model j has embedding (cos a_j, sin a_j) for 8 evenly spaced angles, and
/// AUROC = 50 + 30 d.e_j. Returns the fraction of held-out pairs on which the
/// GBRT selection equals the true argmax.
inline double gbrt_recovery_accuracy(std::uint64_t seed, std::size_t train_rows = 200, std::size_t test_rows = 50,
                                     std::size_t models = 8) {
  using namespace metaood;
  Rng rng(seed);
  std::vector<std::string> names;
  ModelEmbeddings model_embs;
  for (std::size_t j = 0; j < models; ++j) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(models);
    names.push_back("m" + std::to_string(j));
    model_embs.push_back({std::cos(a), std::sin(a)});
  }
  const auto catalog = ModelCatalog::from_names(names);
  std::vector<DatasetPairId> pairs;
  std::map<DatasetPairId, std::vector<double>> data;
  std::vector<double> values;
  for (std::size_t i = 0; i < train_rows + test_rows; ++i) {
    DatasetPairId p{"id" + std::to_string(i), "ood"};
    std::vector<double> d{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (const auto& e : model_embs) values.push_back(50.0 + 30.0 * (d[0] * e[0] + d[1] * e[1]));
    data[p] = d;
    pairs.push_back(p);
  }
  const PerformanceMatrix matrix(pairs, catalog, values);
  const DataEmbedder embed = [&](const DatasetPairId& p) { return data.at(p); };
  const std::vector<DatasetPairId> train(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(train_rows));
  const auto ts = build_training_set(matrix, train, embed, model_embs);
  const auto predictor = fit_gbrt(ts.X, ts.y, GBRTConfig{});
  std::size_t hits = 0;
  for (std::size_t i = train_rows; i < pairs.size(); ++i) {
    const auto s = select(predictor, data.at(pairs[i]), model_embs, catalog);
    if (s.index == *best_in_row(matrix.row(i))) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test_rows);
}

}  // namespace testing_support

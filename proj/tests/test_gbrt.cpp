#include <algorithm>
#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "metaood/gbrt.hpp"
#include "metaood/rng.hpp"

using namespace metaood;

namespace {

struct Data {
  std::vector<std::vector<double>> X;
  std::vector<double> y;
};

Data make_data(std::uint64_t seed, std::size_t n, std::size_t d, double (*f)(const std::vector<double>&)) {
  Rng rng(seed);
  Data out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(d);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    out.y.push_back(f(x));
    out.X.push_back(std::move(x));
  }
  return out;
}

double rmse(const MetaPredictor& p, const Data& d) {
  double s = 0;
  for (std::size_t i = 0; i < d.X.size(); ++i) {
    const double e = p.predict(d.X[i]) - d.y[i];
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(d.X.size()));
}

// Exhaustive best stump: every feature, every gap between consecutive
// distinct values, both sides holding at least `min_leaf` rows.
struct Stump {
  std::size_t feature;
  double lo_value, hi_value;  // split lies strictly between these
  double left_mean, right_mean;
};

Stump brute_force_stump(const Data& d, std::size_t min_leaf) {
  const std::size_t n = d.X.size();
  double mean = 0;
  for (double v : d.y) mean += v / static_cast<double>(n);
  Stump best{};
  double best_sse = 0;
  for (double v : d.y) best_sse += (v - mean) * (v - mean);
  bool found = false;
  for (std::size_t f = 0; f < d.X[0].size(); ++f) {
    std::vector<double> values;
    for (const auto& x : d.X) values.push_back(x[f]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      double sl = 0, sr = 0;
      std::size_t nl = 0, nr = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (d.X[i][f] <= values[k]) sl += d.y[i], ++nl;
        else sr += d.y[i], ++nr;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double ml = sl / static_cast<double>(nl), mr = sr / static_cast<double>(nr);
      double sse = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = d.y[i] - (d.X[i][f] <= values[k] ? ml : mr);
        sse += e * e;
      }
      if (sse < best_sse - 1e-12) {
        best_sse = sse;
        best = {f, values[k], values[k + 1], ml, mr};
        found = true;
      }
    }
  }
  EXPECT_TRUE(found);
  return best;
}

}  // namespace

TEST(Gbrt, ConstantTargetPredictsConstant) {
  auto d = make_data(1, 40, 3, [](const std::vector<double>&) { return 4.25; });
  const auto p = fit_gbrt(d.X, d.y, {.num_trees = 20});
  for (const auto& x : d.X) EXPECT_DOUBLE_EQ(p.predict(x), 4.25);
  EXPECT_DOUBLE_EQ(p.predict(std::vector<double>{9, 9, 9}), 4.25);
}

TEST(Gbrt, RecoversIdentityFunction) {
  auto d = make_data(2, 400, 2, [](const std::vector<double>& x) { return x[0]; });
  const auto p = fit_gbrt(d.X, d.y, {.num_trees = 200, .max_depth = 4, .learning_rate = 0.1, .min_samples_leaf = 3});
  EXPECT_LT(rmse(p, d), 0.05);
  const auto held = make_data(3, 200, 2, [](const std::vector<double>& x) { return x[0]; });
  EXPECT_LT(rmse(p, held), 0.1);
}

TEST(Gbrt, FirstStumpMatchesExhaustiveSearch) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto d = make_data(seed, 30, 3, [](const std::vector<double>& x) { return x[0] * x[1] + std::sin(3 * x[2]); });
    const GBRTConfig cfg{.num_trees = 1, .max_depth = 1, .learning_rate = 1.0, .min_samples_leaf = 4};
    const auto p = fit_gbrt(d.X, d.y, cfg);
    const auto s = brute_force_stump(d, 4);
    const auto& root = p.trees()[0].nodes()[0];
    ASSERT_FALSE(root.is_leaf());
    EXPECT_EQ(static_cast<std::size_t>(root.feature), s.feature);
    EXPECT_GE(root.threshold, s.lo_value);
    EXPECT_LT(root.threshold, s.hi_value);
    for (const auto& x : d.X)
      EXPECT_NEAR(p.predict(x), x[s.feature] <= s.lo_value ? s.left_mean : s.right_mean, 1e-12);
  }
}

TEST(Gbrt, DeterministicAcrossThreadCounts) {
  auto d = make_data(4, 120, 6, [](const std::vector<double>& x) { return x[0] - 2 * x[3] * x[4]; });
  const GBRTConfig cfg{.num_trees = 30, .subsample_fraction = 0.7, .feature_fraction = 0.5, .seed = 11};
  const auto a = fit_gbrt(d.X, d.y, cfg, 1);
  const auto b = fit_gbrt(d.X, d.y, cfg, 4);
  EXPECT_EQ(a, b);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Gbrt, SeedChangesSubsampledFit) {
  auto d = make_data(5, 80, 4, [](const std::vector<double>& x) { return x[1]; });
  GBRTConfig cfg{.num_trees = 10, .subsample_fraction = 0.5, .seed = 1};
  const auto a = fit_gbrt(d.X, d.y, cfg);
  cfg.seed = 2;
  EXPECT_FALSE(a == fit_gbrt(d.X, d.y, cfg));
}

TEST(Gbrt, JsonRoundTripIsExact) {
  auto d = make_data(6, 60, 3, [](const std::vector<double>& x) { return std::exp(x[0]) + x[2]; });
  auto p = fit_gbrt(d.X, d.y, {.num_trees = 15});
  p.set_target_transform(TargetTransform::per_pair_rank);
  const auto back = predictor_from_json(nlohmann::json::parse(to_json(p).dump()));
  EXPECT_EQ(back, p);
  for (const auto& x : d.X) EXPECT_EQ(back.predict(x), p.predict(x));
}

TEST(Gbrt, MalformedJsonRejected) {
  auto d = make_data(7, 20, 2, [](const std::vector<double>& x) { return x[0]; });
  auto j = to_json(fit_gbrt(d.X, d.y, {.num_trees = 2}));
  auto bad_version = j;
  bad_version["version"] = 99;
  EXPECT_THROW(predictor_from_json(bad_version), ValidationError);
  auto bad_node = j;
  bad_node["trees"][0][0][0] = 7;  // feature beyond input_dim
  EXPECT_THROW(predictor_from_json(bad_node), ValidationError);
  auto missing = j;
  missing.erase("base");
  EXPECT_THROW(predictor_from_json(missing), ValidationError);
}

TEST(Gbrt, MonotoneTargetGivesMonotoneGrid) {
  auto d = make_data(8, 200, 1, [](const std::vector<double>& x) { return 3 * x[0] + 1; });
  const auto p = fit_gbrt(d.X, d.y, {.num_trees = 100});
  double prev = -1e300;
  for (int k = -100; k <= 100; ++k) {
    const double v = p.predict(std::vector<double>{k / 100.0});
    EXPECT_GE(v, prev - 1e-12);
    prev = v;
  }
}

TEST(Gbrt, TrainingLossNonIncreasingPerStage) {
  auto d = make_data(9, 100, 3, [](const std::vector<double>& x) { return x[0] * x[0] - x[1]; });
  const auto p = fit_gbrt(d.X, d.y, {.num_trees = 40, .learning_rate = 0.3});
  std::vector<double> F(d.X.size(), p.base());
  auto loss = [&] {
    double s = 0;
    for (std::size_t i = 0; i < F.size(); ++i) s += (F[i] - d.y[i]) * (F[i] - d.y[i]);
    return s;
  };
  double prev = loss();
  for (const auto& t : p.trees()) {
    for (std::size_t i = 0; i < F.size(); ++i) F[i] += 0.3 * t.predict(d.X[i]);
    const double cur = loss();
    EXPECT_LE(cur, prev + 1e-9);
    prev = cur;
  }
}

TEST(Gbrt, PredictionIsBasePlusScaledLeaves) {
  auto d = make_data(10, 50, 4, [](const std::vector<double>& x) { return x[0] + x[1] * x[2]; });
  const GBRTConfig cfg{.num_trees = 25, .max_depth = 3, .learning_rate = 0.2};
  const auto p = fit_gbrt(d.X, d.y, cfg);
  EXPECT_EQ(p.trees().size(), 25u);
  for (const auto& t : p.trees()) EXPECT_LE(t.depth(), 3u);
  for (const auto& x : d.X) {
    double acc = p.base();
    for (const auto& t : p.trees()) acc += 0.2 * t.predict(x);
    EXPECT_NEAR(p.predict(x), acc, 1e-12);
  }
}

TEST(Gbrt, LeavesRespectMinimumSize) {
  auto d = make_data(11, 40, 2, [](const std::vector<double>& x) { return x[0]; });
  const auto p = fit_gbrt(d.X, d.y, {.num_trees = 5, .max_depth = 6, .min_samples_leaf = 7});
  for (const auto& t : p.trees()) {
    std::map<const void*, int> counts;
    for (const auto& x : d.X) {
      std::size_t k = 0;
      while (!t.nodes()[k].is_leaf())
        k = static_cast<std::size_t>(x[static_cast<std::size_t>(t.nodes()[k].feature)] <= t.nodes()[k].threshold
                                         ? t.nodes()[k].left
                                         : t.nodes()[k].right);
      ++counts[&t.nodes()[k]];
    }
    for (const auto& [leaf, c] : counts) EXPECT_GE(c, 7);
  }
}

TEST(Gbrt, InputValidation) {
  auto d = make_data(12, 20, 3, [](const std::vector<double>& x) { return x[0]; });
  const auto p = fit_gbrt(d.X, d.y, {.num_trees = 2});
  EXPECT_THROW(p.predict(std::vector<double>{1, 2}), ValidationError);
  auto bad = d;
  bad.X[3][1] = std::nan("");
  EXPECT_THROW(fit_gbrt(bad.X, bad.y, {}), ValidationError);
  EXPECT_THROW(fit_gbrt(d.X, std::vector<double>(3, 0.0), {}), ValidationError);
  EXPECT_THROW(fit_gbrt(d.X, d.y, {.learning_rate = 0.0}), ValidationError);
  EXPECT_THROW(fit_gbrt(d.X, d.y, {.subsample_fraction = 1.5}), ValidationError);
}

#pragma once

// Model-selection baselines: Global Best, Random, fixed choice, ISAC
// (clustering), ARGOSMART (1-nearest neighbour), ALORS (matrix
// factorisation) and NCF (neural interaction model).

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaood/embeddings.hpp"
#include "metaood/error.hpp"
#include "metaood/linalg.hpp"
#include "metaood/meta_predictor.hpp"
#include "metaood/mlp.hpp"
#include "metaood/perf_store.hpp"
#include "metaood/rng.hpp"

namespace metaood {

/// Model with the highest mean AUROC over the given rows, MISSING cells
/// skipped; ties go to the lowest catalog index.
inline std::size_t best_mean_model(const PerformanceMatrix& matrix, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ValidationError("best_mean_model: no rows");
  std::vector<double> sum(matrix.cols(), 0.0);
  std::vector<std::size_t> count(matrix.cols(), 0);
  for (auto i : rows) {
    const auto r = matrix.row(i);
    for (std::size_t j = 0; j < matrix.cols(); ++j)
      if (!std::isnan(r[j])) {
        sum[j] += r[j];
        ++count[j];
      }
  }
  std::optional<std::size_t> best;
  double best_mean = 0.0;
  for (std::size_t j = 0; j < matrix.cols(); ++j) {
    if (count[j] == 0) continue;
    const double m = sum[j] / static_cast<double>(count[j]);
    if (!best || m > best_mean) {
      best = j;
      best_mean = m;
    }
  }
  if (!best) throw ValidationError("best_mean_model: every cell is missing");
  return *best;
}

inline std::vector<std::size_t> rows_of(const PerformanceMatrix& matrix, std::span<const DatasetPairId> pairs) {
  std::vector<std::size_t> rows;
  for (const auto& p : pairs) rows.push_back(matrix.row_of(p));
  return rows;
}

inline std::size_t global_best(const PerformanceMatrix& matrix, std::span<const DatasetPairId> train) {
  if (train.empty()) throw ValidationError("global_best: empty train split");
  return best_mean_model(matrix, rows_of(matrix, train));
}

/// Uniform draw from the catalog.
inline std::size_t random_select(const ModelCatalog& catalog, Rng& rng) {
  if (catalog.empty()) throw ValidationError("random_select: empty catalog");
  return static_cast<std::size_t>(rng.below(catalog.size()));
}

inline std::size_t fixed_select(const ModelCatalog& catalog, const std::string& name) {
  return catalog.index_of(name);
}

/// Column-wise z-scoring with training statistics; zero spread keeps scale 1.
class Standardizer {
 public:
  Standardizer() = default;

  explicit Standardizer(const std::vector<std::vector<double>>& X) {
    if (X.empty()) throw ValidationError("standardizer: no rows");
    const std::size_t d = X.front().size();
    const auto n = static_cast<double>(X.size());
    mean_.assign(d, 0.0);
    scale_.assign(d, 0.0);
    for (const auto& x : X) {
      if (x.size() != d) throw ValidationError("standardizer: rows differ in dimension");
      for (std::size_t k = 0; k < d; ++k) mean_[k] += x[k] / n;
    }
    for (const auto& x : X)
      for (std::size_t k = 0; k < d; ++k) scale_[k] += (x[k] - mean_[k]) * (x[k] - mean_[k]) / n;
    for (auto& s : scale_) s = s > 1e-24 ? std::sqrt(s) : 1.0;
  }

  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != mean_.size())
      throw ValidationError("standardizer: input has dimension " + std::to_string(x.size()) + ", expected " +
                            std::to_string(mean_.size()));
    std::vector<double> z(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) z[k] = (x[k] - mean_[k]) / scale_[k];
    return z;
  }

  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }

 private:
  std::vector<double> mean_, scale_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

/// Index of the nearest point (Euclidean); ties go to the lowest index.
inline std::size_t nearest(std::span<const double> x, const std::vector<std::vector<double>>& points) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = squared_distance(x, points[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

struct KMeansResult {
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> assignment;
  std::size_t iterations = 0;
};

/// Lloyd's k-means with k-means++ seeding. A cluster that becomes empty is
/// re-seeded at the point farthest from its assigned centroid (lowest index
/// on ties), and that point moves to the re-seeded cluster.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& X, std::size_t k, std::uint64_t seed,
                           std::size_t max_iterations = 100) {
  if (k < 1 || k > X.size())
    throw ValidationError("kmeans: k = " + std::to_string(k) + " must be in [1, " + std::to_string(X.size()) + "]");
  Rng rng(seed);
  KMeansResult res;
  res.centroids.push_back(X[static_cast<std::size_t>(rng.below(X.size()))]);
  std::vector<double> d2(X.size());
  while (res.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
      d2[i] = squared_distance(X[i], res.centroids[nearest(X[i], res.centroids)]);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      pick = X.size() - 1;
      for (std::size_t i = 0; i < X.size(); ++i) {
        if (u < d2[i]) {
          pick = i;
          break;
        }
        u -= d2[i];
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(X.size()));
    }
    res.centroids.push_back(X[pick]);
  }

  res.assignment.assign(X.size(), k);  // k = unassigned
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < X.size(); ++i) {
      const std::size_t c = nearest(X[i], res.centroids);
      if (c != res.assignment[i]) {
        res.assignment[i] = c;
        changed = true;
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (std::find(res.assignment.begin(), res.assignment.end(), c) != res.assignment.end()) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < X.size(); ++i) {
        const double d = squared_distance(X[i], res.centroids[res.assignment[i]]);
        const auto members =
            static_cast<std::size_t>(std::count(res.assignment.begin(), res.assignment.end(), res.assignment[i]));
        if (members > 1 && d > far_d) {
          far_d = d;
          far = i;
        }
      }
      res.centroids[c] = X[far];
      res.assignment[far] = c;
      changed = true;
    }
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> mean(X.front().size(), 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < X.size(); ++i)
        if (res.assignment[i] == c) {
          ++count;
          for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += X[i][d];
        }
      for (auto& v : mean) v /= static_cast<double>(count);
      res.centroids[c] = std::move(mean);
    }
    res.iterations = it + 1;
    if (!changed) break;
  }
  return res;
}

/// ISAC: clusters of training pairs in standardised meta-feature space, each
/// with the best mean-AUROC model of its members.
struct IsacModel {
  Standardizer standardizer;
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> cluster_best;
};

inline IsacModel isac_fit(const std::vector<std::vector<double>>& train_features, const PerformanceMatrix& matrix,
                          std::span<const DatasetPairId> train_pairs, std::size_t k, std::uint64_t seed,
                          std::size_t max_iterations = 100) {
  if (train_features.size() != train_pairs.size())
    throw ValidationError("isac_fit: feature rows do not match train pairs");
  if (k < 1 || k > train_pairs.size())
    throw ValidationError("isac_fit: k = " + std::to_string(k) + " must be in [1, " +
                          std::to_string(train_pairs.size()) + "]");
  IsacModel m;
  m.standardizer = Standardizer(train_features);
  std::vector<std::vector<double>> Z;
  for (const auto& x : train_features) Z.push_back(m.standardizer.apply(x));
  const auto km = kmeans(Z, k, seed, max_iterations);
  m.centroids = km.centroids;
  const auto rows = rows_of(matrix, train_pairs);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (km.assignment[i] == c) members.push_back(rows[i]);
    m.cluster_best.push_back(best_mean_model(matrix, members));
  }
  return m;
}

inline std::size_t isac_select(const IsacModel& m, std::span<const double> features) {
  return m.cluster_best[nearest(m.standardizer.apply(features), m.centroids)];
}

inline nlohmann::json to_json(const IsacModel& m) {
  return nlohmann::json{{"kind", "isac"},
                        {"mean", m.standardizer.mean()},
                        {"scale", m.standardizer.scale()},
                        {"centroids", m.centroids},
                        {"cluster_best", m.cluster_best}};
}

/// ARGOSMART: best model of the nearest training pair in standardised space.
struct ArgosmartModel {
  Standardizer standardizer;
  std::vector<std::vector<double>> train_points;
  std::vector<std::size_t> train_best;
};

inline ArgosmartModel argosmart_fit(const std::vector<std::vector<double>>& train_features,
                                    const PerformanceMatrix& matrix, std::span<const DatasetPairId> train_pairs) {
  if (train_features.size() != train_pairs.size() || train_pairs.empty())
    throw ValidationError("argosmart_fit: feature rows do not match train pairs");
  ArgosmartModel m;
  m.standardizer = Standardizer(train_features);
  for (std::size_t i = 0; i < train_pairs.size(); ++i) {
    m.train_points.push_back(m.standardizer.apply(train_features[i]));
    const auto best = best_in_row(matrix.row(matrix.row_of(train_pairs[i])));
    if (!best) throw ValidationError("argosmart_fit: pair " + train_pairs[i].str() + " has no values");
    m.train_best.push_back(*best);
  }
  return m;
}

inline std::size_t argosmart_select(const ArgosmartModel& m, std::span<const double> features) {
  return m.train_best[nearest(m.standardizer.apply(features), m.train_points)];
}

/// ALORS: rank-k factorisation of the (column-mean imputed) training
/// matrix, P ~ latent * V^T with latent = U * diag(sigma), and a 1-nearest-
/// neighbour regressor from standardised meta-features to latent rows.
struct AlorsModel {
  Standardizer standardizer;
  std::vector<std::vector<double>> train_points;
  DenseMatrix latent;  // n_train x k
  DenseMatrix v;       // m x k

  std::vector<double> predict_row(std::span<const double> latent_row) const {
    std::vector<double> row(v.rows, 0.0);
    for (std::size_t j = 0; j < v.rows; ++j)
      for (std::size_t c = 0; c < v.cols; ++c) row[j] += latent_row[c] * v(j, c);
    return row;
  }

  DenseMatrix reconstruct() const {
    DenseMatrix out(latent.rows, v.rows);
    for (std::size_t i = 0; i < latent.rows; ++i) {
      const auto r = predict_row(std::span<const double>(&latent.data[i * latent.cols], latent.cols));
      for (std::size_t j = 0; j < v.rows; ++j) out(i, j) = r[j];
    }
    return out;
  }
};

/// Training rows as a dense matrix with MISSING replaced by the column mean
/// over the training rows (0 if the whole column is missing).
inline DenseMatrix imputed_rows(const PerformanceMatrix& matrix, std::span<const std::size_t> rows) {
  DenseMatrix a(rows.size(), matrix.cols());
  for (std::size_t j = 0; j < matrix.cols(); ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (auto i : rows)
      if (auto v = matrix.value(i, j)) {
        sum += *v;
        ++count;
      }
    const double fill = count ? sum / static_cast<double>(count) : 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) a(r, j) = matrix.value(rows[r], j).value_or(fill);
  }
  return a;
}

inline AlorsModel alors_fit(const PerformanceMatrix& matrix, std::span<const DatasetPairId> train_pairs,
                            std::size_t rank, const std::vector<std::vector<double>>& train_features,
                            std::uint64_t seed = 0, std::size_t iterations = 200) {
  if (train_features.size() != train_pairs.size())
    throw ValidationError("alors_fit: feature rows do not match train pairs");
  const auto rows = rows_of(matrix, train_pairs);
  if (rank < 1 || rank > std::min(rows.size(), matrix.cols()))
    throw ValidationError("alors_fit: rank " + std::to_string(rank) + " outside [1, " +
                          std::to_string(std::min(rows.size(), matrix.cols())) + "]");
  const auto a = imputed_rows(matrix, rows);
  const auto svd = truncated_svd(a, rank, iterations, seed);
  AlorsModel m;
  m.standardizer = Standardizer(train_features);
  for (const auto& x : train_features) m.train_points.push_back(m.standardizer.apply(x));
  m.latent = DenseMatrix(rows.size(), rank);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rank; ++c) m.latent(i, c) = svd.u(i, c) * svd.sigma[c];
  m.v = svd.v;
  return m;
}

inline std::vector<double> alors_predict(const AlorsModel& m, std::span<const double> features) {
  const std::size_t i = nearest(m.standardizer.apply(features), m.train_points);
  return m.predict_row(std::span<const double>(&m.latent.data[i * m.latent.cols], m.latent.cols));
}

inline std::size_t alors_select(const AlorsModel& m, std::span<const double> features) {
  return argmax_lowest(alors_predict(m, features));
}

inline nlohmann::json to_json(const AlorsModel& m) {
  return nlohmann::json{{"kind", "alors"},
                        {"mean", m.standardizer.mean()},
                        {"scale", m.standardizer.scale()},
                        {"train_points", m.train_points},
                        {"rank", m.v.cols},
                        {"latent", m.latent.data},
                        {"v", m.v.data}};
}

/// NCF: the MLP regressor on (pair features ++ one-hot model) -> AUROC / 100.
struct NcfModel {
  MLPRegressor net;
  ModelEmbeddings one_hots;
};

inline NcfModel ncf_fit(const PerformanceMatrix& matrix, std::span<const DatasetPairId> train_pairs,
                        const std::vector<std::vector<double>>& train_features, const MLPConfig& cfg,
                        bool enabled = true) {
  if (!enabled) throw UnavailableError("ncf selector is disabled in the configuration");
  if (train_features.size() != train_pairs.size())
    throw ValidationError("ncf_fit: feature rows do not match train pairs");
  std::map<DatasetPairId, std::size_t> where;
  for (std::size_t i = 0; i < train_pairs.size(); ++i) where[train_pairs[i]] = i;
  NcfModel m{MLPRegressor{}, one_hot_embeddings(matrix.catalog())};
  const auto ts = build_training_set(
      matrix, train_pairs, [&](const DatasetPairId& p) { return train_features[where.at(p)]; }, m.one_hots);
  m.net = fit_mlp(ts.X, ts.y, cfg);
  return m;
}

inline Selection ncf_select(const NcfModel& m, std::span<const double> features, const ModelCatalog& catalog) {
  return select(m.net, features, m.one_hots, catalog);
}

}  // namespace metaood

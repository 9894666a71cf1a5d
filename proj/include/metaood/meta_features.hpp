#pragma once

// Classical dataset embedding: statistical, image, dataset-level and
// landmarker meta-features of an ID/OOD dataset pair.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaood/csv.hpp"
#include "metaood/error.hpp"
#include "metaood/feature_block.hpp"
#include "metaood/image_features.hpp"
#include "metaood/image_io.hpp"
#include "metaood/perf_store.hpp"
#include "metaood/rng.hpp"
#include "metaood/stat_features.hpp"

namespace metaood {

/// Per-sample class probabilities, n rows of K columns.
class SoftmaxMatrix {
 public:
  static constexpr double kRowSumTolerance = 1e-6;

  SoftmaxMatrix(std::size_t n, std::size_t k, std::vector<double> probs) : n_(n), k_(k), probs_(std::move(probs)) {
    if (n_ == 0) throw ValidationError("softmax matrix: no rows");
    if (k_ < 2) throw ValidationError("softmax matrix: need at least 2 classes");
    if (probs_.size() != n_ * k_) throw ValidationError("softmax matrix: size mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < k_; ++j) {
        const double p = probs_[i * k_ + j];
        if (!(p >= 0.0 && p <= 1.0))
          throw ValidationError("softmax matrix: row " + std::to_string(i) + " has entry outside [0,1]");
        sum += p;
      }
      if (std::fabs(sum - 1.0) > kRowSumTolerance)
        throw ValidationError("softmax matrix: row " + std::to_string(i) + " sums to " + csv::format_double(sum));
    }
  }

  std::size_t rows() const { return n_; }
  std::size_t classes() const { return k_; }
  std::span<const double> row(std::size_t i) const { return std::span<const double>(probs_).subspan(i * k_, k_); }

 private:
  std::size_t n_, k_;
  std::vector<double> probs_;
};

/// Softmax CSV: one row per sample, one column per class. A non-numeric
/// first line is treated as a header and skipped.
inline SoftmaxMatrix load_softmax_csv(const std::filesystem::path& path) {
  const auto t = csv::read_file(path);
  std::vector<std::vector<std::string>> rows = t.rows;
  if (std::all_of(t.header.begin(), t.header.end(), [](const auto& f) { return csv::parse_double(f).has_value(); }))
    rows.insert(rows.begin(), t.header);
  std::vector<double> probs;
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (const auto& f : rows[r]) {
      const auto v = csv::parse_double(f);
      if (!v) throw ValidationError(path.string() + ": non-numeric probability '" + f + "'");
      probs.push_back(*v);
    }
  try {
    return SoftmaxMatrix(rows.size(), t.header.size(), std::move(probs));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

namespace detail {

inline double population_std(std::span<const double> v) {
  const double m = metaood::mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace detail

/// Landmarker features of softmax outputs. Per sample: top-1 and top-2
/// probability, minimum, entropy (natural log), range top1 - min, margin
/// top1 - top2. Aggregated as mean/std/min/max of top-1, means of the
/// others, and skewness and kurtosis (non-excess) of the top-1 values.
inline FeatureBlock landmarker_features(const SoftmaxMatrix& s) {
  const std::size_t n = s.rows();
  std::vector<double> top1(n), top2(n), entropy(n), range(n), margin(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r(s.row(i).begin(), s.row(i).end());
    std::sort(r.begin(), r.end(), std::greater<>());
    top1[i] = r[0];
    top2[i] = r[1];
    range[i] = r.front() - r.back();
    margin[i] = r[0] - r[1];
    double e = 0.0;
    for (double p : r)
      if (p > 0.0) e -= p * std::log(p);
    entropy[i] = e;
  }
  FeatureBlock b;
  b.add("top1_mean", mean_of(top1));
  b.add("top1_std", detail::population_std(top1));
  b.add("top1_min", *std::min_element(top1.begin(), top1.end()));
  b.add("top1_max", *std::max_element(top1.begin(), top1.end()));
  b.add("entropy_mean", mean_of(entropy));
  b.add("range_mean", mean_of(range));
  b.add("top2_mean", mean_of(top2));
  b.add("margin_mean", mean_of(margin));
  const double m = mean_of(top1);
  const double m2 = central_moment(top1, m, 2);
  if (m2 == 0.0) {
    b.add_ratio("top1_skewness", 0.0, 0.0);
    b.add_ratio("top1_kurtosis", 0.0, 0.0);
  } else {
    b.add("top1_skewness", central_moment(top1, m, 3) / std::pow(m2, 1.5));
    b.add("top1_kurtosis", central_moment(top1, m, 4) / (m2 * m2));
  }
  return b;
}

/// Histogram of per-pixel intensity over [0, 256) with `bins` equal bins,
/// normalised to sum 1.
inline std::vector<double> intensity_histogram(const ImageDataset& d, std::size_t bins) {
  std::vector<double> h(bins, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto g = intensity(d, i);
    for (double v : g.px) {
      h[std::min(bins - 1, static_cast<std::size_t>(v * static_cast<double>(bins) / 256.0))] += 1.0;
      total += 1.0;
    }
  }
  for (auto& v : h) v /= total;
  return h;
}

/// One-dimensional earth mover's distance between two histograms on the
/// same bins: sum over bins of |CDF_a - CDF_b| * bin_width. Both inputs are
/// normalised to unit mass first.
inline double emd_1d(std::span<const double> a, std::span<const double> b, double bin_width = 1.0) {
  if (a.size() != b.size() || a.empty()) throw ValidationError("emd_1d: histograms must have equal non-zero length");
  double sa = 0.0, sb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] < 0.0 || b[k] < 0.0) throw ValidationError("emd_1d: negative histogram mass");
    sa += a[k];
    sb += b[k];
  }
  if (sa <= 0.0 || sb <= 0.0) throw ValidationError("emd_1d: empty histogram");
  double ca = 0.0, cb = 0.0, d = 0.0;
  for (std::size_t k = 0; k + 1 < a.size(); ++k) {
    ca += a[k] / sa;
    cb += b[k] / sb;
    d += std::fabs(ca - cb);
  }
  return d * bin_width;
}

struct MetaFeatureConfig {
  ImageFeatureConfig image;
  std::size_t emd_bins = 32;
};

/// n, p = h*w*c, d = h*w and class count of the training set, plus the EMD
/// (in bin units) between train and test intensity histograms.
inline FeatureBlock dataset_features(const ImageDataset& train, const ImageDataset& test,
                                     const MetaFeatureConfig& cfg = {}) {
  FeatureBlock b;
  b.add("n", static_cast<double>(train.size()));
  b.add("p", static_cast<double>(train.height() * train.width() * train.channels()));
  b.add("d", static_cast<double>(train.height() * train.width()));
  b.add("num_classes", static_cast<double>(train.num_classes()));
  b.add("emd", emd_1d(intensity_histogram(train, cfg.emd_bins), intensity_histogram(test, cfg.emd_bins)));
  return b;
}

/// Per-image channel means for R, G, B and intensity (grayscale replicated).
inline std::array<std::vector<double>, 4> channel_means(const ImageDataset& d) {
  std::array<std::vector<double>, 4> out;
  for (auto& v : out) v.resize(d.size());
  const double pixels = static_cast<double>(d.height() * d.width());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto img = d.image(i);
    double r = 0, g = 0, b = 0;
    for (std::size_t p = 0; p < d.height() * d.width(); ++p) {
      if (d.channels() == 3) {
        r += img[3 * p];
        g += img[3 * p + 1];
        b += img[3 * p + 2];
      } else {
        r += img[p];
      }
    }
    if (d.channels() == 1) g = b = r;
    out[0][i] = r / pixels;
    out[1][i] = g / pixels;
    out[2][i] = b / pixels;
    out[3][i] = 0.299 * out[0][i] + 0.587 * out[1][i] + 0.114 * out[2][i];
  }
  return out;
}

/// Zero-fit landmarker source: a seeded random linear head over per-image
/// channel means followed by a softmax. Weights are uniform in [-4, 4] on
/// inputs rescaled to [-0.5, 0.5].
inline SoftmaxMatrix random_projection_softmax(const ImageDataset& d, std::size_t classes, std::uint64_t seed) {
  classes = std::max<std::size_t>(classes, 2);
  Rng rng(seed);
  std::vector<double> w(classes * 4), bias(classes);
  for (auto& v : w) v = rng.uniform(-4.0, 4.0);
  for (auto& v : bias) v = rng.uniform(-0.5, 0.5);
  const auto means = channel_means(d);
  std::vector<double> probs(d.size() * classes);
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<double> logits(classes);
    for (std::size_t k = 0; k < classes; ++k) {
      double z = bias[k];
      for (std::size_t c = 0; c < 4; ++c) z += w[k * 4 + c] * (means[c][i] / 255.0 - 0.5);
      logits[k] = z;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (auto& z : logits) sum += (z = std::exp(z - mx));
    for (std::size_t k = 0; k < classes; ++k) probs[i * classes + k] = logits[k] / sum;
  }
  return SoftmaxMatrix(d.size(), classes, std::move(probs));
}

/// Fixed-length named meta-feature vector with sentinel diagnostics.
struct MetaFeatureVector {
  std::vector<std::string> schema;
  std::vector<double> values;
  std::vector<std::string> diagnostics;
};

/// Where the landmarker softmax comes from: an external matrix, or the
/// random-projection fallback when allowed.
struct SoftmaxSource {
  std::optional<SoftmaxMatrix> external;
  bool allow_fallback = true;
  std::uint64_t seed = 0;
};

/// Full classical embedding of a pair. Schema order: statistical blocks
/// (train then test; channels r, g, b, intensity over per-image means),
/// image blocks (train then test), dataset block, landmarker block on the
/// test set.
inline MetaFeatureVector compose(const ImageDataset& train, const ImageDataset& test, const SoftmaxSource& softmax,
                                 const MetaFeatureConfig& cfg = {}, const std::string& pair_label = "pair") {
  if (train.size() == 0 || test.size() == 0) throw ValidationError(pair_label + ": empty dataset");
  FeatureBlock all;
  const char* channel_names[] = {"r", "g", "b", "i"};
  for (const auto* side : {&train, &test}) {
    const std::string prefix = side == &train ? "train_stat_" : "test_stat_";
    const auto means = channel_means(*side);
    for (std::size_t c = 0; c < 4; ++c) {
      if (means[c].size() < 2) throw ValidationError(pair_label + ": statistical features need at least 2 images");
      all.append(stat_features(means[c]), prefix + channel_names[c] + "_");
    }
  }
  all.append(image_features(train, cfg.image), "train_img_");
  all.append(image_features(test, cfg.image), "test_img_");
  all.append(dataset_features(train, test, cfg), "data_");
  if (softmax.external) {
    all.append(landmarker_features(*softmax.external), "land_");
  } else if (softmax.allow_fallback) {
    all.append(landmarker_features(random_projection_softmax(test, train.num_classes(), softmax.seed)), "land_");
  } else {
    throw ValidationError(pair_label + ": no softmax file and the random-projection fallback is disabled");
  }
  return {std::move(all.names), std::move(all.values), std::move(all.diagnostics)};
}

/// Named vectors for a set of pairs sharing one schema.
struct MetaFeatureTable {
  std::vector<std::string> schema;
  std::vector<DatasetPairId> pairs;
  std::vector<std::vector<double>> rows;

  const std::vector<double>& at(const DatasetPairId& p) const {
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (pairs[i] == p) return rows[i];
    throw ValidationError("no meta-features for pair " + p.str());
  }

  bool contains(const DatasetPairId& p) const { return std::find(pairs.begin(), pairs.end(), p) != pairs.end(); }
};

inline std::string meta_feature_csv(const MetaFeatureTable& t) {
  std::vector<std::string> header{"id_dataset", "ood_dataset"};
  header.insert(header.end(), t.schema.begin(), t.schema.end());
  std::string out = csv::join(header) + "\n";
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    std::vector<std::string> f{t.pairs[i].id_dataset, t.pairs[i].ood_dataset};
    for (double v : t.rows[i]) f.push_back(csv::format_double(v));
    out += csv::join(f) + "\n";
  }
  return out;
}

inline MetaFeatureTable load_meta_feature_csv(const std::filesystem::path& path) {
  const auto t = csv::read_file(path);
  if (t.header.size() < 3 || t.header[0] != "id_dataset" || t.header[1] != "ood_dataset")
    throw ValidationError(path.string() + ": header must start with id_dataset,ood_dataset");
  MetaFeatureTable out;
  out.schema.assign(t.header.begin() + 2, t.header.end());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    DatasetPairId p{t.rows[r][0], t.rows[r][1]};
    if (out.contains(p)) throw ValidationError(path.string() + ": duplicate pair " + p.str());
    std::vector<double> v;
    for (std::size_t c = 2; c < t.rows[r].size(); ++c) {
      const auto x = csv::parse_double(t.rows[r][c]);
      if (!x || !std::isfinite(*x))
        throw ValidationError(path.string() + ":" + std::to_string(t.line_numbers[r]) + ": bad value in column " +
                              t.header[c]);
      v.push_back(*x);
    }
    out.pairs.push_back(std::move(p));
    out.rows.push_back(std::move(v));
  }
  return out;
}

}  // namespace metaood

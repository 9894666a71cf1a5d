#pragma once

// Gradient-boosted regression trees with squared-error loss and exact
// greedy split search.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaood/error.hpp"
#include "metaood/parallel.hpp"
#include "metaood/rng.hpp"

namespace metaood {

struct GBRTConfig {
  std::size_t num_trees = 200;
  std::size_t max_depth = 4;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 3;
  double subsample_fraction = 1.0;
  double feature_fraction = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_trees < 1) throw ValidationError("gbrt: num_trees must be >= 1");
    if (max_depth < 1) throw ValidationError("gbrt: max_depth must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ValidationError("gbrt: learning_rate must be in (0, 1]");
    if (min_samples_leaf < 1) throw ValidationError("gbrt: min_samples_leaf must be >= 1");
    if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0))
      throw ValidationError("gbrt: subsample_fraction must be in (0, 1]");
    if (!(feature_fraction > 0.0 && feature_fraction <= 1.0))
      throw ValidationError("gbrt: feature_fraction must be in (0, 1]");
  }

  bool operator==(const GBRTConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const GBRTConfig& c) {
  j = nlohmann::json{{"num_trees", c.num_trees},
                     {"max_depth", c.max_depth},
                     {"learning_rate", c.learning_rate},
                     {"min_samples_leaf", c.min_samples_leaf},
                     {"subsample_fraction", c.subsample_fraction},
                     {"feature_fraction", c.feature_fraction},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, GBRTConfig& c) {
  GBRTConfig d;
  c.num_trees = j.value("num_trees", d.num_trees);
  c.max_depth = j.value("max_depth", d.max_depth);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.min_samples_leaf = j.value("min_samples_leaf", d.min_samples_leaf);
  c.subsample_fraction = j.value("subsample_fraction", d.subsample_fraction);
  c.feature_fraction = j.value("feature_fraction", d.feature_fraction);
  c.seed = j.value("seed", d.seed);
}

/// A node is a leaf when feature < 0. Internal nodes send x[feature] <=
/// threshold to the left child.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const {
    std::size_t k = 0;
    while (!nodes_[k].is_leaf()) {
      const auto& n = nodes_[k];
      k = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes_[k].value;
  }

  /// Number of edges on the longest root-to-leaf path.
  std::size_t depth() const { return nodes_.empty() ? 0 : depth_from(0); }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  bool operator==(const RegressionTree&) const = default;

 private:
  std::size_t depth_from(std::size_t k) const {
    if (nodes_[k].is_leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(nodes_[k].left)),
                        depth_from(static_cast<std::size_t>(nodes_[k].right)));
  }

  std::vector<TreeNode> nodes_;
};

/// Training target of the meta-predictor.
enum class TargetTransform { raw, per_pair_rank };

inline std::string to_string(TargetTransform t) { return t == TargetTransform::raw ? "raw" : "per_pair_rank"; }

inline TargetTransform parse_target_transform(const std::string& s) {
  if (s == "raw") return TargetTransform::raw;
  if (s == "per_pair_rank") return TargetTransform::per_pair_rank;
  throw ValidationError("unknown target_transform '" + s + "' (expected raw or per_pair_rank)");
}

/// Boosted ensemble: prediction = base + sum_t learning_rate * tree_t(x).
class MetaPredictor {
 public:
  static constexpr int kFormatVersion = 1;

  MetaPredictor() = default;
  MetaPredictor(std::vector<RegressionTree> trees, double base, GBRTConfig config, std::size_t input_dim,
                TargetTransform transform = TargetTransform::raw)
      : trees_(std::move(trees)), base_(base), config_(config), input_dim_(input_dim), transform_(transform) {}

  double predict(std::span<const double> x) const {
    if (x.size() != input_dim_)
      throw ValidationError("predict: input has dimension " + std::to_string(x.size()) + ", predictor expects " +
                            std::to_string(input_dim_));
    double acc = base_;
    for (const auto& t : trees_) acc += config_.learning_rate * t.predict(x);
    return acc;
  }

  const std::vector<RegressionTree>& trees() const { return trees_; }
  double base() const { return base_; }
  const GBRTConfig& config() const { return config_; }
  std::size_t input_dim() const { return input_dim_; }
  TargetTransform target_transform() const { return transform_; }
  void set_target_transform(TargetTransform t) { transform_ = t; }

  bool operator==(const MetaPredictor&) const = default;

 private:
  std::vector<RegressionTree> trees_;
  double base_ = 0.0;
  GBRTConfig config_;
  std::size_t input_dim_ = 0;
  TargetTransform transform_ = TargetTransform::raw;
};

/// Versioned JSON: `version`, `config`, `base`, `input_dim`,
/// `target_transform`, and `trees` as lists of
/// [feature, threshold, left, right, value] nodes.
inline nlohmann::json to_json(const MetaPredictor& p) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : p.trees()) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes()) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back(std::move(nodes));
  }
  return nlohmann::json{{"version", MetaPredictor::kFormatVersion},
                        {"config", p.config()},
                        {"base", p.base()},
                        {"input_dim", p.input_dim()},
                        {"target_transform", to_string(p.target_transform())},
                        {"trees", std::move(trees)}};
}

inline MetaPredictor predictor_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != MetaPredictor::kFormatVersion)
      throw ValidationError("predictor: unsupported version " + j.at("version").dump());
    const auto config = j.at("config").get<GBRTConfig>();
    const auto input_dim = j.at("input_dim").get<std::size_t>();
    std::vector<RegressionTree> trees;
    for (const auto& t : j.at("trees")) {
      std::vector<TreeNode> nodes;
      for (const auto& n : t) {
        TreeNode node{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                      n.at(4).get<double>()};
        if (!node.is_leaf()) {
          const auto count = static_cast<int>(t.size());
          if (node.left <= 0 || node.right <= 0 || node.left >= count || node.right >= count ||
              static_cast<std::size_t>(node.feature) >= input_dim)
            throw ValidationError("predictor: malformed tree node " + n.dump());
        } else if (!std::isfinite(node.value)) {
          throw ValidationError("predictor: non-finite leaf value");
        }
        nodes.push_back(node);
      }
      if (nodes.empty()) throw ValidationError("predictor: empty tree");
      trees.emplace_back(std::move(nodes));
    }
    return MetaPredictor(std::move(trees), j.at("base").get<double>(), config, input_dim,
                         parse_target_transform(j.value("target_transform", std::string("raw"))));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("predictor: ") + e.what());
  }
}

namespace detail {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

/// Column-major copy of the design matrix with each column's row order
/// sorted by value (stable in row index).
struct PresortedColumns {
  std::size_t rows = 0, cols = 0;
  std::vector<double> values;              // [col][row]
  std::vector<std::uint32_t> sorted_rows;  // [col][k]

  PresortedColumns(const std::vector<std::vector<double>>& X) : rows(X.size()), cols(X.front().size()) {
    values.resize(rows * cols);
    sorted_rows.resize(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) values[c * rows + r] = X[r][c];
    for (std::size_t c = 0; c < cols; ++c) {
      auto first = sorted_rows.begin() + static_cast<std::ptrdiff_t>(c * rows);
      std::iota(first, first + static_cast<std::ptrdiff_t>(rows), 0u);
      const double* col = &values[c * rows];
      std::stable_sort(first, first + static_cast<std::ptrdiff_t>(rows),
                       [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    }
  }

  double at(std::size_t r, std::size_t c) const { return values[c * rows + r]; }
};

inline double split_point(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid < hi ? mid : lo;
}

/// Grows one tree level by level on the residuals of the rows with
/// node_of[r] >= 0. Split search per feature runs in parallel; the winner is
/// chosen in feature order, so the result does not depend on `threads`.
inline RegressionTree grow_tree(const PresortedColumns& X, std::span<const double> residual,
                                std::vector<int> node_of, std::span<const std::size_t> features,
                                const GBRTConfig& cfg, std::size_t threads) {
  struct NodeStats {
    std::size_t count = 0;
    double sum = 0.0;
  };
  std::vector<TreeNode> nodes(1);
  std::vector<std::size_t> open{0};
  const double min_gain = 1e-12;

  for (std::size_t depth = 0; !open.empty(); ++depth) {
    std::vector<int> slot(nodes.size(), -1);  // node index -> position in open
    for (std::size_t k = 0; k < open.size(); ++k) slot[open[k]] = static_cast<int>(k);
    std::vector<NodeStats> totals(open.size());
    for (std::size_t r = 0; r < X.rows; ++r) {
      if (node_of[r] < 0) continue;
      const int s = slot[static_cast<std::size_t>(node_of[r])];
      if (s < 0) continue;
      totals[static_cast<std::size_t>(s)].count++;
      totals[static_cast<std::size_t>(s)].sum += residual[r];
    }

    std::vector<bool> may_split(open.size(), false);
    for (std::size_t k = 0; k < open.size(); ++k)
      may_split[k] = depth < cfg.max_depth && totals[k].count >= 2 * cfg.min_samples_leaf;

    std::vector<std::vector<SplitCandidate>> per_feature(features.size());
    if (std::any_of(may_split.begin(), may_split.end(), [](bool b) { return b; })) {
      parallel_for(features.size(), threads, [&](std::size_t fi) {
        const std::size_t f = features[fi];
        std::vector<SplitCandidate> best(open.size());
        std::vector<NodeStats> left(open.size());
        std::vector<double> last(open.size(), 0.0);
        const std::uint32_t* order = &X.sorted_rows[f * X.rows];
        for (std::size_t k = 0; k < X.rows; ++k) {
          const std::uint32_t r = order[k];
          if (node_of[r] < 0) continue;
          const int s = slot[static_cast<std::size_t>(node_of[r])];
          if (s < 0 || !may_split[static_cast<std::size_t>(s)]) continue;
          const auto si = static_cast<std::size_t>(s);
          const double v = X.at(r, f);
          auto& l = left[si];
          const auto& t = totals[si];
          if (l.count >= cfg.min_samples_leaf && v > last[si] && t.count - l.count >= cfg.min_samples_leaf) {
            const double nl = static_cast<double>(l.count), nr = static_cast<double>(t.count - l.count);
            const double sr = t.sum - l.sum;
            const double gain =
                l.sum * l.sum / nl + sr * sr / nr - t.sum * t.sum / static_cast<double>(t.count);
            if (gain > best[si].gain) best[si] = {gain, static_cast<int>(f), split_point(last[si], v)};
          }
          l.count++;
          l.sum += residual[r];
          last[si] = v;
        }
        per_feature[fi] = std::move(best);
      });
    }

    std::vector<std::size_t> next_open;
    std::vector<int> remap(nodes.size(), -1);  // split node -> left child index
    for (std::size_t k = 0; k < open.size(); ++k) {
      SplitCandidate best;
      if (may_split[k])
        for (const auto& pf : per_feature)
          if (pf[k].gain > best.gain) best = pf[k];
      auto& node = nodes[open[k]];
      if (best.feature < 0 || best.gain <= min_gain) {
        node.value = totals[k].count ? totals[k].sum / static_cast<double>(totals[k].count) : 0.0;
        continue;
      }
      node.feature = best.feature;
      node.threshold = best.threshold;
      node.left = static_cast<int>(nodes.size());
      node.right = node.left + 1;
      remap[open[k]] = node.left;
      next_open.push_back(static_cast<std::size_t>(node.left));
      next_open.push_back(static_cast<std::size_t>(node.right));
      nodes.emplace_back();
      nodes.emplace_back();
    }
    for (std::size_t r = 0; r < X.rows; ++r) {
      if (node_of[r] < 0) continue;
      const auto n = static_cast<std::size_t>(node_of[r]);
      if (remap.size() <= n || remap[n] < 0) continue;
      const auto& node = nodes[n];
      node_of[r] = X.at(r, static_cast<std::size_t>(node.feature)) <= node.threshold ? node.left : node.right;
    }
    open = std::move(next_open);
  }
  return RegressionTree(std::move(nodes));
}

}  // namespace detail

/// Squared-error gradient boosting. Stage t fits a depth-limited tree to
/// the residuals y - F_{t-1}(X) of a row subsample (without replacement),
/// restricted to a per-tree feature subsample; leaves hold mean residuals.
/// Splits maximise the reduction of squared error; ties go to the lowest
/// feature index, then the lowest threshold.
inline MetaPredictor fit_gbrt(const std::vector<std::vector<double>>& X, std::span<const double> y,
                              const GBRTConfig& cfg, std::size_t threads = 1) {
  cfg.validate();
  if (X.size() != y.size()) throw ValidationError("fit_gbrt: X and y differ in length");
  if (X.size() < 2) throw ValidationError("fit_gbrt: need at least 2 samples");
  const std::size_t dim = X.front().size();
  if (dim == 0) throw ValidationError("fit_gbrt: zero-dimensional inputs");
  for (std::size_t r = 0; r < X.size(); ++r) {
    if (X[r].size() != dim) throw ValidationError("fit_gbrt: row " + std::to_string(r) + " has a different dimension");
    for (double v : X[r])
      if (!std::isfinite(v)) throw ValidationError("fit_gbrt: non-finite feature in row " + std::to_string(r));
    if (!std::isfinite(y[r])) throw ValidationError("fit_gbrt: non-finite target in row " + std::to_string(r));
  }
  const detail::PresortedColumns cols(X);
  const std::size_t n = X.size();
  double base = 0.0;
  for (double v : y) base += v;
  base /= static_cast<double>(n);

  std::vector<double> F(n, base), residual(n);
  const Rng root(cfg.seed);
  const auto n_rows = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.subsample_fraction * static_cast<double>(n))));
  const auto n_feat = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.feature_fraction * static_cast<double>(dim))));
  std::vector<RegressionTree> trees;
  trees.reserve(cfg.num_trees);
  for (std::size_t t = 0; t < cfg.num_trees; ++t) {
    for (std::size_t r = 0; r < n; ++r) residual[r] = y[r] - F[r];
    Rng rng = root.split(t);
    std::vector<int> node_of(n, 0);
    if (n_rows < n) {
      std::vector<std::size_t> rows(n);
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      shuffle(rows, rng);
      std::fill(node_of.begin(), node_of.end(), -1);
      for (std::size_t k = 0; k < n_rows; ++k) node_of[rows[k]] = 0;
    }
    std::vector<std::size_t> features(dim);
    std::iota(features.begin(), features.end(), std::size_t{0});
    if (n_feat < dim) {
      shuffle(features, rng);
      features.resize(n_feat);
      std::sort(features.begin(), features.end());
    }
    auto tree = detail::grow_tree(cols, residual, std::move(node_of), features, cfg, threads);
    for (std::size_t r = 0; r < n; ++r) F[r] += cfg.learning_rate * tree.predict(X[r]);
    trees.push_back(std::move(tree));
  }
  return MetaPredictor(std::move(trees), base, cfg, dim);
}

}  // namespace metaood

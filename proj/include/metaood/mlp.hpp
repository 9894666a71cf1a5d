#pragma once

// Two-hidden-layer feed-forward regressor trained by mini-batch gradient
// descent with backpropagation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaood/csv.hpp"
#include "metaood/error.hpp"
#include "metaood/rng.hpp"

namespace metaood {

enum class Activation { tanh, relu };

inline std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw ValidationError("unknown activation '" + s + "' (expected tanh or relu)");
}

struct MLPConfig {
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 32;
  Activation activation = Activation::tanh;
  std::size_t epochs = 300;
  double step_size = 0.01;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden1 < 1 || hidden2 < 1) throw ValidationError("mlp: hidden sizes must be >= 1");
    if (!(step_size > 0.0)) throw ValidationError("mlp: step size must be > 0");
    if (batch_size < 1) throw ValidationError("mlp: batch size must be >= 1");
  }

  bool operator==(const MLPConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const MLPConfig& c) {
  j = nlohmann::json{{"hidden1", c.hidden1},       {"hidden2", c.hidden2}, {"activation", to_string(c.activation)},
                     {"epochs", c.epochs},         {"step_size", c.step_size}, {"batch_size", c.batch_size},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, MLPConfig& c) {
  MLPConfig d;
  c.hidden1 = j.value("hidden1", d.hidden1);
  c.hidden2 = j.value("hidden2", d.hidden2);
  c.activation = parse_activation(j.value("activation", to_string(d.activation)));
  c.epochs = j.value("epochs", d.epochs);
  c.step_size = j.value("step_size", d.step_size);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.seed = j.value("seed", d.seed);
}

/// y = w3 . act(W2 act(W1 z + b1) + b2) + b3 on standardised inputs z, with
/// the output mapped back through the stored target mean and scale.
/// Parameters live in one flat vector: W1, b1, W2, b2, w3, b3.
class MLPRegressor {
 public:
  MLPRegressor() = default;

  MLPRegressor(std::size_t input_dim, const MLPConfig& cfg)
      : dim_(input_dim), cfg_(cfg), in_mean_(input_dim, 0.0), in_scale_(input_dim, 1.0) {
    params_.assign(param_count(), 0.0);
  }

  std::size_t input_dim() const { return dim_; }
  const MLPConfig& config() const { return cfg_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  std::size_t param_count() const {
    const auto h1 = cfg_.hidden1, h2 = cfg_.hidden2;
    return h1 * dim_ + h1 + h2 * h1 + h2 + h2 + 1;
  }

  /// Stores input standardisation and target scaling statistics.
  void set_normalisation(std::vector<double> in_mean, std::vector<double> in_scale, double y_mean, double y_scale) {
    in_mean_ = std::move(in_mean);
    in_scale_ = std::move(in_scale);
    y_mean_ = y_mean;
    y_scale_ = y_scale;
  }

  double y_mean() const { return y_mean_; }
  const std::vector<double>& in_mean() const { return in_mean_; }
  const std::vector<double>& in_scale() const { return in_scale_; }
  double y_scale() const { return y_scale_; }

  std::vector<double> standardise(std::span<const double> x) const {
    std::vector<double> z(dim_);
    for (std::size_t k = 0; k < dim_; ++k) z[k] = (x[k] - in_mean_[k]) / in_scale_[k];
    return z;
  }

  /// Network output in the standardised target space.
  double forward(std::span<const double> z) const {
    Cache c;
    return forward(z, c);
  }

  double predict(std::span<const double> x) const {
    if (x.size() != dim_)
      throw ValidationError("mlp predict: input has dimension " + std::to_string(x.size()) + ", expected " +
                            std::to_string(dim_));
    return y_mean_ + y_scale_ * forward(standardise(x));
  }

  /// Mean of 0.5 (f(z) - t)^2 over a batch of standardised inputs/targets.
  double batch_loss(const std::vector<std::vector<double>>& Z, std::span<const double> t,
                    std::span<const std::size_t> batch) const {
    double loss = 0.0;
    for (auto r : batch) {
      const double e = forward(Z[r]) - t[r];
      loss += 0.5 * e * e;
    }
    return loss / static_cast<double>(batch.size());
  }

  /// Gradient of batch_loss with respect to params() by backpropagation.
  std::vector<double> batch_gradient(const std::vector<std::vector<double>>& Z, std::span<const double> t,
                                     std::span<const std::size_t> batch) const {
    const auto h1 = cfg_.hidden1, h2 = cfg_.hidden2;
    const Layout L = layout();
    std::vector<double> g(params_.size(), 0.0);
    const double inv = 1.0 / static_cast<double>(batch.size());
    Cache c;
    std::vector<double> d2(h2), d1(h1);
    for (auto r : batch) {
      const auto& z = Z[r];
      const double out = forward(z, c);
      const double e = (out - t[r]) * inv;
      for (std::size_t j = 0; j < h2; ++j) {
        g[L.w3 + j] += e * c.a2[j];
        d2[j] = e * params_[L.w3 + j] * act_grad(c.s2[j], c.a2[j]);
      }
      g[L.b3] += e;
      for (std::size_t i = 0; i < h1; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < h2; ++j) {
          g[L.w2 + j * h1 + i] += d2[j] * c.a1[i];
          acc += d2[j] * params_[L.w2 + j * h1 + i];
        }
        d1[i] = acc * act_grad(c.s1[i], c.a1[i]);
      }
      for (std::size_t j = 0; j < h2; ++j) g[L.b2 + j] += d2[j];
      for (std::size_t i = 0; i < h1; ++i) {
        for (std::size_t k = 0; k < dim_; ++k) g[L.w1 + i * dim_ + k] += d1[i] * z[k];
        g[L.b1 + i] += d1[i];
      }
    }
    return g;
  }

  /// Glorot-uniform weights, zero biases.
  void initialise(Rng& rng) {
    const Layout L = layout();
    const auto h1 = cfg_.hidden1, h2 = cfg_.hidden2;
    auto fill = [&](std::size_t off, std::size_t count, std::size_t fan_in, std::size_t fan_out) {
      const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (std::size_t k = 0; k < count; ++k) params_[off + k] = rng.uniform(-a, a);
    };
    std::fill(params_.begin(), params_.end(), 0.0);
    fill(L.w1, h1 * dim_, dim_, h1);
    fill(L.w2, h2 * h1, h1, h2);
    fill(L.w3, h2, h2, 1);
  }

  bool operator==(const MLPRegressor&) const = default;

 private:
  struct Layout {
    std::size_t w1, b1, w2, b2, w3, b3;
  };
  struct Cache {
    std::vector<double> s1, a1, s2, a2;
  };

  Layout layout() const {
    const auto h1 = cfg_.hidden1, h2 = cfg_.hidden2;
    Layout L{};
    L.w1 = 0;
    L.b1 = L.w1 + h1 * dim_;
    L.w2 = L.b1 + h1;
    L.b2 = L.w2 + h2 * h1;
    L.w3 = L.b2 + h2;
    L.b3 = L.w3 + h2;
    return L;
  }

  double act(double s) const { return cfg_.activation == Activation::tanh ? std::tanh(s) : std::max(0.0, s); }
  double act_grad(double s, double a) const {
    if (cfg_.activation == Activation::tanh) return 1.0 - a * a;
    return s > 0.0 ? 1.0 : 0.0;
  }

  double forward(std::span<const double> z, Cache& c) const {
    const auto h1 = cfg_.hidden1, h2 = cfg_.hidden2;
    const Layout L = layout();
    c.s1.assign(h1, 0.0);
    c.a1.assign(h1, 0.0);
    c.s2.assign(h2, 0.0);
    c.a2.assign(h2, 0.0);
    for (std::size_t i = 0; i < h1; ++i) {
      double s = params_[L.b1 + i];
      for (std::size_t k = 0; k < dim_; ++k) s += params_[L.w1 + i * dim_ + k] * z[k];
      c.s1[i] = s;
      c.a1[i] = act(s);
    }
    double out = params_[L.b3];
    for (std::size_t j = 0; j < h2; ++j) {
      double s = params_[L.b2 + j];
      for (std::size_t i = 0; i < h1; ++i) s += params_[L.w2 + j * h1 + i] * c.a1[i];
      c.s2[j] = s;
      c.a2[j] = act(s);
      out += params_[L.w3 + j] * c.a2[j];
    }
    return out;
  }

  std::size_t dim_ = 0;
  MLPConfig cfg_;
  std::vector<double> params_;
  std::vector<double> in_mean_, in_scale_;
  double y_mean_ = 0.0, y_scale_ = 1.0;
};

inline nlohmann::json to_json(const MLPRegressor& m) {
  return {{"version", 1},         {"config", m.config()},     {"input_dim", m.input_dim()},
          {"in_mean", m.in_mean()}, {"in_scale", m.in_scale()}, {"y_mean", m.y_mean()},
          {"y_scale", m.y_scale()}, {"params", m.params()}};
}

inline MLPRegressor mlp_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw ValidationError("unsupported MLP format version");
    MLPRegressor m(j.at("input_dim").get<std::size_t>(), j.at("config").get<MLPConfig>());
    auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != m.param_count())
      throw ValidationError("MLP file has " + std::to_string(params.size()) + " parameters, expected " +
                            std::to_string(m.param_count()));
    m.params() = std::move(params);
    auto mean = j.at("in_mean").get<std::vector<double>>();
    auto scale = j.at("in_scale").get<std::vector<double>>();
    if (mean.size() != m.input_dim() || scale.size() != m.input_dim())
      throw ValidationError("MLP file: normalisation vectors do not match input_dim");
    m.set_normalisation(std::move(mean), std::move(scale), j.at("y_mean").get<double>(), j.at("y_scale").get<double>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed MLP file: ") + e.what());
  }
}

/// Standardises inputs and targets with training statistics (zero spread
/// maps to scale 1), then runs `epochs` passes of shuffled mini-batch
/// gradient descent on the squared error.
inline MLPRegressor fit_mlp(const std::vector<std::vector<double>>& X, std::span<const double> y,
                            const MLPConfig& cfg) {
  cfg.validate();
  if (X.size() != y.size()) throw ValidationError("fit_mlp: X and y differ in length");
  if (X.size() < 2) throw ValidationError("fit_mlp: need at least 2 samples");
  const std::size_t dim = X.front().size();
  for (std::size_t r = 0; r < X.size(); ++r) {
    if (X[r].size() != dim) throw ValidationError("fit_mlp: row " + std::to_string(r) + " has a different dimension");
    for (double v : X[r])
      if (!std::isfinite(v)) throw ValidationError("fit_mlp: non-finite feature in row " + std::to_string(r));
    if (!std::isfinite(y[r])) throw ValidationError("fit_mlp: non-finite target in row " + std::to_string(r));
  }
  const auto n = static_cast<double>(X.size());
  std::vector<double> mean(dim, 0.0), scale(dim, 0.0);
  for (const auto& x : X)
    for (std::size_t k = 0; k < dim; ++k) mean[k] += x[k] / n;
  for (const auto& x : X)
    for (std::size_t k = 0; k < dim; ++k) scale[k] += (x[k] - mean[k]) * (x[k] - mean[k]) / n;
  for (auto& s : scale) s = s > 1e-24 ? std::sqrt(s) : 1.0;
  double y_mean = 0.0, y_var = 0.0;
  for (double v : y) y_mean += v / n;
  for (double v : y) y_var += (v - y_mean) * (v - y_mean) / n;
  const double y_scale = y_var > 1e-24 ? std::sqrt(y_var) : 1.0;

  MLPRegressor model(dim, cfg);
  model.set_normalisation(mean, scale, y_mean, y_scale);
  Rng rng(cfg.seed);
  model.initialise(rng);

  std::vector<std::vector<double>> Z;
  Z.reserve(X.size());
  for (const auto& x : X) Z.push_back(model.standardise(x));
  std::vector<double> t(y.size());
  for (std::size_t r = 0; r < y.size(); ++r) t[r] = (y[r] - y_mean) / y_scale;

  std::vector<std::size_t> order(X.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(cfg.batch_size, order.size() - start));
      const auto g = model.batch_gradient(Z, t, batch);
      auto& p = model.params();
      for (std::size_t k = 0; k < p.size(); ++k) p[k] -= cfg.step_size * g[k];
    }
    const double loss = model.batch_loss(Z, t, order);
    if (!std::isfinite(loss))
      throw NumericalError("fit_mlp: training diverged (loss not finite) at epoch " + std::to_string(epoch + 1) +
                           " with step size " + csv::format_double(cfg.step_size));
  }
  return model;
}

}  // namespace metaood

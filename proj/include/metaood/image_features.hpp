#pragma once

// Image meta-features: colour, histogram, border (Sobel), co-occurrence
// texture and Fourier texture statistics of a dataset.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metaood/error.hpp"
#include "metaood/feature_block.hpp"
#include "metaood/image_io.hpp"

namespace metaood {

/// Single-channel floating-point image.
struct GrayImage {
  std::size_t h = 0, w = 0;
  std::vector<double> px;

  double at(std::size_t y, std::size_t x) const { return px[y * w + x]; }
  double& at(std::size_t y, std::size_t x) { return px[y * w + x]; }
};

struct ImageFeatureConfig {
  std::size_t glcm_levels = 8;
  std::vector<std::pair<int, int>> glcm_offsets{{1, 0}, {0, 1}};  // (dx, dy)
  std::size_t histogram_bins = 32;
  double sobel_white_fraction = 0.5;  // "white" when magnitude > fraction * max
};

/// Luma intensity 0.299 R + 0.587 G + 0.114 B; grayscale images pass through.
inline GrayImage intensity(const ImageDataset& d, std::size_t i) {
  GrayImage g{d.height(), d.width(), std::vector<double>(d.height() * d.width())};
  const auto img = d.image(i);
  for (std::size_t p = 0; p < g.px.size(); ++p) {
    if (d.channels() == 1) {
      g.px[p] = img[p];
    } else {
      g.px[p] = 0.299 * img[3 * p] + 0.587 * img[3 * p + 1] + 0.114 * img[3 * p + 2];
    }
  }
  return g;
}

/// 90 degree counter-clockwise rotation.
inline GrayImage rotate90(const GrayImage& g) {
  GrayImage r{g.w, g.h, std::vector<double>(g.px.size())};
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x) r.at(g.w - 1 - x, y) = g.at(y, x);
  return r;
}

/// RGB in [0, 255] to HSV with all components in [0, 1].
inline std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
  r /= 255.0;
  g /= 255.0;
  b /= 255.0;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double delta = mx - mn;
  double h = 0.0;
  if (delta > 0.0) {
    if (mx == r)
      h = (g - b) / delta;
    else if (mx == g)
      h = 2.0 + (b - r) / delta;
    else
      h = 4.0 + (r - g) / delta;
    h /= 6.0;
    if (h < 0.0) h += 1.0;
  }
  const double s = mx > 0.0 ? delta / mx : 0.0;
  return {h, s, mx};
}

/// Sobel gradient magnitude with replicated borders.
inline GrayImage sobel_magnitude(const GrayImage& g) {
  GrayImage out{g.h, g.w, std::vector<double>(g.px.size())};
  auto px = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(g.h) - 1);
    x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(g.w) - 1);
    return g.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };
  for (std::size_t yy = 0; yy < g.h; ++yy)
    for (std::size_t xx = 0; xx < g.w; ++xx) {
      const auto y = static_cast<std::ptrdiff_t>(yy), x = static_cast<std::ptrdiff_t>(xx);
      const double gx = (px(y - 1, x + 1) + 2.0 * px(y, x + 1) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2.0 * px(y, x - 1) + px(y + 1, x - 1));
      const double gy = (px(y + 1, x - 1) + 2.0 * px(y + 1, x) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2.0 * px(y - 1, x) + px(y - 1, x + 1));
      out.at(yy, xx) = std::sqrt(gx * gx + gy * gy);
    }
  return out;
}

/// Fraction of pixels whose value exceeds `fraction` times the image maximum.
inline double white_fraction(const GrayImage& g, double fraction) {
  const double mx = *std::max_element(g.px.begin(), g.px.end());
  if (mx <= 0.0) return 0.0;
  const auto count = std::count_if(g.px.begin(), g.px.end(), [&](double v) { return v > fraction * mx; });
  return static_cast<double>(count) / static_cast<double>(g.px.size());
}

/// The seven Hu moment invariants of an intensity image, or nullopt when
/// the image has zero mass.
inline std::optional<std::array<double, 7>> hu_moments(const GrayImage& g) {
  double m00 = 0.0, m10 = 0.0, m01 = 0.0;
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x) {
      const double v = g.at(y, x);
      m00 += v;
      m10 += v * static_cast<double>(x);
      m01 += v * static_cast<double>(y);
    }
  if (m00 <= 0.0) return std::nullopt;
  const double cx = m10 / m00, cy = m01 / m00;
  double mu[4][4] = {};
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x) {
      const double v = g.at(y, x);
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const double dx2 = dx * dx, dy2 = dy * dy;
      mu[2][0] += v * dx2;
      mu[0][2] += v * dy2;
      mu[1][1] += v * dx * dy;
      mu[3][0] += v * dx2 * dx;
      mu[0][3] += v * dy2 * dy;
      mu[2][1] += v * dx2 * dy;
      mu[1][2] += v * dx * dy2;
    }
  auto eta = [&](int p, int q) { return mu[p][q] / std::pow(m00, 1.0 + (p + q) / 2.0); };
  const double n20 = eta(2, 0), n02 = eta(0, 2), n11 = eta(1, 1);
  const double n30 = eta(3, 0), n03 = eta(0, 3), n21 = eta(2, 1), n12 = eta(1, 2);
  const double a = n30 + n12, b = n21 + n03;
  const double c = n30 - 3.0 * n12, d = 3.0 * n21 - n03;
  std::array<double, 7> h{};
  h[0] = n20 + n02;
  h[1] = (n20 - n02) * (n20 - n02) + 4.0 * n11 * n11;
  h[2] = c * c + d * d;
  h[3] = a * a + b * b;
  h[4] = c * a * (a * a - 3.0 * b * b) + d * b * (3.0 * a * a - b * b);
  h[5] = (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b;
  h[6] = d * a * (a * a - 3.0 * b * b) - c * b * (3.0 * a * a - b * b);
  return h;
}

/// Normalised symmetric gray-level co-occurrence matrix (levels x levels,
/// row-major). Intensities in [0, 255] are quantised to floor(v * levels / 256).
/// One symmetric matrix is built per offset and the matrices are averaged.
inline std::vector<double> glcm(const GrayImage& g, std::size_t levels,
                                std::span<const std::pair<int, int>> offsets) {
  if (levels < 2) throw ValidationError("glcm: need at least 2 gray levels");
  if (offsets.empty()) throw ValidationError("glcm: need at least one offset");
  std::vector<std::size_t> q(g.px.size());
  for (std::size_t p = 0; p < q.size(); ++p) {
    const double v = std::clamp(g.px[p], 0.0, 255.0);
    q[p] = std::min(levels - 1, static_cast<std::size_t>(v * static_cast<double>(levels) / 256.0));
  }
  std::vector<double> out(levels * levels, 0.0);
  std::size_t used = 0;
  for (const auto& [dx, dy] : offsets) {
    std::vector<double> counts(levels * levels, 0.0);
    double total = 0.0;
    for (std::size_t y = 0; y < g.h; ++y)
      for (std::size_t x = 0; x < g.w; ++x) {
        const auto ny = static_cast<std::ptrdiff_t>(y) + dy, nx = static_cast<std::ptrdiff_t>(x) + dx;
        if (ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(g.h) || nx >= static_cast<std::ptrdiff_t>(g.w))
          continue;
        const std::size_t a = q[y * g.w + x], b = q[static_cast<std::size_t>(ny) * g.w + static_cast<std::size_t>(nx)];
        counts[a * levels + b] += 1.0;
        counts[b * levels + a] += 1.0;
        total += 2.0;
      }
    if (total == 0.0) continue;
    for (std::size_t k = 0; k < counts.size(); ++k) out[k] += counts[k] / total;
    ++used;
  }
  if (used == 0) throw ValidationError("glcm: image too small for the requested offsets");
  for (auto& v : out) v /= static_cast<double>(used);
  return out;
}

struct GlcmStats {
  double contrast = 0, dissimilarity = 0, homogeneity = 0, energy = 0, correlation = 0, entropy = 0;
  bool correlation_defined = true;
};

/// Haralick-style statistics. Energy is the angular second moment sum p^2;
/// homogeneity is sum p / (1 + (i - j)^2); entropy uses natural logs.
/// Correlation is undefined (0/0) when either marginal has zero variance.
inline GlcmStats glcm_stats(std::span<const double> p, std::size_t levels) {
  GlcmStats s;
  double mi = 0, mj = 0;
  for (std::size_t i = 0; i < levels; ++i)
    for (std::size_t j = 0; j < levels; ++j) {
      const double v = p[i * levels + j];
      mi += static_cast<double>(i) * v;
      mj += static_cast<double>(j) * v;
    }
  double vi = 0, vj = 0, cov = 0;
  for (std::size_t i = 0; i < levels; ++i)
    for (std::size_t j = 0; j < levels; ++j) {
      const double v = p[i * levels + j];
      const double di = static_cast<double>(i) - mi, dj = static_cast<double>(j) - mj;
      const double diff = static_cast<double>(i) - static_cast<double>(j);
      s.contrast += diff * diff * v;
      s.dissimilarity += std::fabs(diff) * v;
      s.homogeneity += v / (1.0 + diff * diff);
      s.energy += v * v;
      if (v > 0.0) s.entropy -= v * std::log(v);
      vi += di * di * v;
      vj += dj * dj * v;
      cov += di * dj * v;
    }
  if (vi > 1e-15 && vj > 1e-15) {
    s.correlation = cov / std::sqrt(vi * vj);
  } else {
    s.correlation_defined = false;
  }
  return s;
}

/// 2-D discrete Fourier transform magnitudes (separable direct DFT),
/// centred so that index (h/2, w/2) holds the zero frequency.
inline GrayImage dft_magnitude(const GrayImage& g) {
  auto twiddles = [](std::size_t n) {
    std::vector<std::complex<double>> t(n);
    for (std::size_t k = 0; k < n; ++k)
      t[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    return t;
  };
  const auto tw = twiddles(g.w), th = twiddles(g.h);
  std::vector<std::complex<double>> rows(g.h * g.w);
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t u = 0; u < g.w; ++u) {
      std::complex<double> acc{};
      for (std::size_t x = 0; x < g.w; ++x) acc += g.at(y, x) * tw[(u * x) % g.w];
      rows[y * g.w + u] = acc;
    }
  GrayImage mag{g.h, g.w, std::vector<double>(g.px.size())};
  for (std::size_t u = 0; u < g.w; ++u)
    for (std::size_t v = 0; v < g.h; ++v) {
      std::complex<double> acc{};
      for (std::size_t y = 0; y < g.h; ++y) acc += rows[y * g.w + u] * th[(v * y) % g.h];
      const std::size_t sy = (v + g.h / 2) % g.h, sx = (u + g.w / 2) % g.w;
      mag.at(sy, sx) = std::abs(acc);
    }
  return mag;
}

struct FftStats {
  double entropy = 0, inertia = 0, energy = 0, homogeneity = 0;
  bool defined = true;
};

/// Texture statistics of the normalised magnitude spectrum p(u, v) =
/// |F(u, v)| / sum |F|, with frequencies u, v in cycles per pixel
/// ([-0.5, 0.5)): entropy -sum p ln p, inertia sum (u^2 + v^2) p, energy
/// sum p^2, homogeneity sum p / (1 + u^2 + v^2).
inline FftStats fft_stats(const GrayImage& g) {
  const auto mag = dft_magnitude(g);
  double total = 0.0;
  for (double v : mag.px) total += v;
  FftStats s;
  if (total <= 0.0) {
    s.defined = false;
    return s;
  }
  for (std::size_t y = 0; y < mag.h; ++y)
    for (std::size_t x = 0; x < mag.w; ++x) {
      const double p = mag.at(y, x) / total;
      const double fv = (static_cast<double>(y) - static_cast<double>(mag.h / 2)) / static_cast<double>(mag.h);
      const double fu = (static_cast<double>(x) - static_cast<double>(mag.w / 2)) / static_cast<double>(mag.w);
      const double r2 = fu * fu + fv * fv;
      if (p > 0.0) s.entropy -= p * std::log(p);
      s.inertia += r2 * p;
      s.energy += p * p;
      s.homogeneity += p / (1.0 + r2);
    }
  return s;
}

namespace detail {

struct RunningMoments {
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  void push(double v) {
    sum += v;
    sum_sq += v * v;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double stddev() const {
    if (n == 0) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, sum_sq / static_cast<double>(n) - m * m));
  }
};

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double stddev_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

inline double histogram_std(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  std::vector<double> p(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) p[k] = total > 0 ? counts[k] / total : 0.0;
  return stddev_of(p);
}

inline double histogram_entropy(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  double e = 0.0;
  for (double c : counts)
    if (c > 0.0) e -= (c / total) * std::log(c / total);
  return e;
}

}  // namespace detail

/// Dataset-level image features. Grayscale datasets are treated as RGB with
/// three identical channels, so hue and saturation are zero.
///
/// Stds and means over images use population normalisation; image-level
/// quantities are averaged over images in index order.
inline FeatureBlock image_features(const ImageDataset& d, const ImageFeatureConfig& cfg = {}) {
  const std::size_t bins = cfg.histogram_bins;
  // Channel order for histograms: R, G, B, H, S, V, I.
  std::vector<std::vector<double>> hist(7, std::vector<double>(bins, 0.0));
  std::vector<std::vector<double>> rgb256(3, std::vector<double>(256, 0.0));
  detail::RunningMoments hue, sat, val, inten;
  auto bin_of = [&](double unit) { return std::min(bins - 1, static_cast<std::size_t>(unit * static_cast<double>(bins))); };

  std::vector<double> white(d.size());
  std::vector<std::array<double, 7>> hu(d.size());
  std::vector<bool> hu_ok(d.size());
  std::vector<GlcmStats> tex(d.size());
  std::vector<FftStats> fft(d.size());

  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto img = d.image(i);
    for (std::size_t p = 0; p < d.height() * d.width(); ++p) {
      const double r = d.channels() == 3 ? img[3 * p] : img[p];
      const double g = d.channels() == 3 ? img[3 * p + 1] : img[p];
      const double b = d.channels() == 3 ? img[3 * p + 2] : img[p];
      const auto hsv = rgb_to_hsv(r, g, b);
      const double in = d.channels() == 3 ? 0.299 * r + 0.587 * g + 0.114 * b : r;
      hue.push(hsv[0]);
      sat.push(hsv[1]);
      val.push(hsv[2]);
      inten.push(in);
      rgb256[0][static_cast<std::size_t>(r)] += 1;
      rgb256[1][static_cast<std::size_t>(g)] += 1;
      rgb256[2][static_cast<std::size_t>(b)] += 1;
      hist[0][bin_of(r / 256.0)] += 1;
      hist[1][bin_of(g / 256.0)] += 1;
      hist[2][bin_of(b / 256.0)] += 1;
      hist[3][bin_of(hsv[0])] += 1;
      hist[4][bin_of(hsv[1])] += 1;
      hist[5][bin_of(hsv[2])] += 1;
      hist[6][bin_of(std::min(in, 255.0) / 256.0)] += 1;
    }
    const auto gray = intensity(d, i);
    const auto edges = sobel_magnitude(gray);
    white[i] = white_fraction(edges, cfg.sobel_white_fraction);
    const auto h = hu_moments(edges);
    hu_ok[i] = h.has_value();
    if (h) hu[i] = *h;
    tex[i] = glcm_stats(glcm(gray, cfg.glcm_levels, cfg.glcm_offsets), cfg.glcm_levels);
    fft[i] = fft_stats(gray);
  }

  FeatureBlock b;
  b.add("color_h_mean", hue.mean());
  b.add("color_h_std", hue.stddev());
  b.add("color_s_mean", sat.mean());
  b.add("color_s_std", sat.stddev());
  b.add("color_v_mean", val.mean());
  b.add("color_v_std", val.stddev());
  b.add("color_intensity_std", inten.stddev());
  b.add("color_r_entropy", detail::histogram_entropy(rgb256[0]));
  b.add("color_g_entropy", detail::histogram_entropy(rgb256[1]));
  b.add("color_b_entropy", detail::histogram_entropy(rgb256[2]));
  const char* hist_names[] = {"r", "g", "b", "h", "s", "v", "intensity"};
  for (std::size_t k = 0; k < 7; ++k) b.add(std::string("hist_") + hist_names[k] + "_std", detail::histogram_std(hist[k]));

  b.add("border_white_mean", detail::mean_of(white));
  std::size_t hu_count = 0;
  std::array<double, 7> hu_sum{};
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!hu_ok[i]) continue;
    ++hu_count;
    for (std::size_t k = 0; k < 7; ++k) hu_sum[k] += hu[i][k];
  }
  for (std::size_t k = 0; k < 7; ++k)
    b.add_ratio("border_hu" + std::to_string(k + 1) + "_mean", hu_sum[k], static_cast<double>(hu_count));

  auto add_mean_std = [&](const std::string& name, auto getter, auto defined) {
    std::vector<double> v;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (defined(i)) v.push_back(getter(i));
    if (v.size() < d.size())
      b.diagnostics.push_back(name + ": undefined on " + std::to_string(d.size() - v.size()) +
                              " images, excluded (0 when none defined)");
    b.add(name + "_mean", detail::mean_of(v));
    b.add(name + "_std", detail::stddev_of(v));
  };
  auto always = [](std::size_t) { return true; };
  add_mean_std("glcm_contrast", [&](std::size_t i) { return tex[i].contrast; }, always);
  add_mean_std("glcm_dissimilarity", [&](std::size_t i) { return tex[i].dissimilarity; }, always);
  add_mean_std("glcm_homogeneity", [&](std::size_t i) { return tex[i].homogeneity; }, always);
  add_mean_std("glcm_energy", [&](std::size_t i) { return tex[i].energy; }, always);
  add_mean_std("glcm_correlation", [&](std::size_t i) { return tex[i].correlation; },
               [&](std::size_t i) { return tex[i].correlation_defined; });
  add_mean_std("glcm_entropy", [&](std::size_t i) { return tex[i].entropy; }, always);
  auto fft_defined = [&](std::size_t i) { return fft[i].defined; };
  add_mean_std("fft_entropy", [&](std::size_t i) { return fft[i].entropy; }, fft_defined);
  add_mean_std("fft_inertia", [&](std::size_t i) { return fft[i].inertia; }, fft_defined);
  add_mean_std("fft_energy", [&](std::size_t i) { return fft[i].energy; }, fft_defined);
  add_mean_std("fft_homogeneity", [&](std::size_t i) { return fft[i].homogeneity; }, fft_defined);
  return b;
}

}  // namespace metaood

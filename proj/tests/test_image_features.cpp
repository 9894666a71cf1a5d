#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "metaood/image_features.hpp"
#include "metaood/image_io.hpp"
#include "metaood/rng.hpp"

using namespace metaood;

namespace {

GrayImage random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  GrayImage g{h, w, std::vector<double>(h * w)};
  for (auto& v : g.px) v = static_cast<double>(rng.below(256));
  return g;
}

GrayImage constant_image(std::size_t h, std::size_t w, double v) { return {h, w, std::vector<double>(h * w, v)}; }

// Hu invariants from raw moments m_pq, central moments by the binomial
// expansion (a different route from the implementation's direct sums).
std::array<double, 7> hu_oracle(const GrayImage& g) {
  long double m[4][4] = {};
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x)
      for (int p = 0; p < 4; ++p)
        for (int q = 0; p + q < 4; ++q) m[p][q] += g.at(y, x) * std::pow((long double)x, p) * std::pow((long double)y, q);
  const long double xb = m[1][0] / m[0][0], yb = m[0][1] / m[0][0];
  const long double mu20 = m[2][0] - xb * m[1][0], mu02 = m[0][2] - yb * m[0][1], mu11 = m[1][1] - xb * m[0][1];
  const long double mu30 = m[3][0] - 3 * xb * m[2][0] + 2 * xb * xb * m[1][0];
  const long double mu03 = m[0][3] - 3 * yb * m[0][2] + 2 * yb * yb * m[0][1];
  const long double mu21 = m[2][1] - 2 * xb * m[1][1] - yb * m[2][0] + 2 * xb * xb * m[0][1];
  const long double mu12 = m[1][2] - 2 * yb * m[1][1] - xb * m[0][2] + 2 * yb * yb * m[1][0];
  auto eta = [&](long double mu, int order) { return mu / std::pow(m[0][0], 1.0L + order / 2.0L); };
  const long double n20 = eta(mu20, 2), n02 = eta(mu02, 2), n11 = eta(mu11, 2);
  const long double n30 = eta(mu30, 3), n03 = eta(mu03, 3), n21 = eta(mu21, 3), n12 = eta(mu12, 3);
  std::array<double, 7> h{};
  h[0] = n20 + n02;
  h[1] = (n20 - n02) * (n20 - n02) + 4 * n11 * n11;
  h[2] = (n30 - 3 * n12) * (n30 - 3 * n12) + (3 * n21 - n03) * (3 * n21 - n03);
  h[3] = (n30 + n12) * (n30 + n12) + (n21 + n03) * (n21 + n03);
  h[4] = (n30 - 3 * n12) * (n30 + n12) * ((n30 + n12) * (n30 + n12) - 3 * (n21 + n03) * (n21 + n03)) +
         (3 * n21 - n03) * (n21 + n03) * (3 * (n30 + n12) * (n30 + n12) - (n21 + n03) * (n21 + n03));
  h[5] = (n20 - n02) * ((n30 + n12) * (n30 + n12) - (n21 + n03) * (n21 + n03)) + 4 * n11 * (n30 + n12) * (n21 + n03);
  h[6] = (3 * n21 - n03) * (n30 + n12) * ((n30 + n12) * (n30 + n12) - 3 * (n21 + n03) * (n21 + n03)) -
         (n30 - 3 * n12) * (n21 + n03) * (3 * (n30 + n12) * (n30 + n12) - (n21 + n03) * (n21 + n03));
  return h;
}

void expect_rel(double a, double b, double tol) {
  EXPECT_LE(std::fabs(a - b), tol * std::max({std::fabs(a), std::fabs(b), 1e-300})) << a << " vs " << b;
}

const std::vector<std::pair<int, int>> kDefaultOffsets{{1, 0}, {0, 1}};

}  // namespace

TEST(Glcm, ConstantImage) {
  const auto p = glcm(constant_image(6, 5, 100), 8, kDefaultOffsets);
  const auto s = glcm_stats(p, 8);
  EXPECT_DOUBLE_EQ(s.energy, 1.0);
  EXPECT_DOUBLE_EQ(s.contrast, 0.0);
  EXPECT_DOUBLE_EQ(s.homogeneity, 1.0);
  EXPECT_DOUBLE_EQ(s.entropy, 0.0);
  EXPECT_FALSE(s.correlation_defined);
}

TEST(Glcm, TwoByTwoCheckerboard) {
  const GrayImage g{2, 2, {0, 255, 255, 0}};
  const std::vector<std::pair<int, int>> off{{1, 0}};
  const auto p = glcm(g, 8, off);
  // co-occurring pairs (0,7) and (7,0), symmetrised: p[0][7] = p[7][0] = 1/2
  EXPECT_DOUBLE_EQ(p[0 * 8 + 7], 0.5);
  EXPECT_DOUBLE_EQ(p[7 * 8 + 0], 0.5);
  const auto s = glcm_stats(p, 8);
  EXPECT_DOUBLE_EQ(s.contrast, 49.0);
  EXPECT_DOUBLE_EQ(s.energy, 0.5);
  EXPECT_DOUBLE_EQ(s.dissimilarity, 7.0);
  EXPECT_DOUBLE_EQ(s.homogeneity, 1.0 / 50.0);
  EXPECT_NEAR(s.entropy, std::log(2.0), 1e-15);
  EXPECT_NEAR(s.correlation, -1.0, 1e-12);
}

TEST(Glcm, QuantisationRule) {
  // floor(v * G / 256): 31 -> 0, 32 -> 1, 255 -> 7
  const GrayImage g{1, 3, {31, 32, 255}};
  const std::vector<std::pair<int, int>> off{{1, 0}};
  const auto p = glcm(g, 8, off);
  EXPECT_DOUBLE_EQ(p[0 * 8 + 1], 0.25);
  EXPECT_DOUBLE_EQ(p[1 * 8 + 7], 0.25);
}

TEST(Glcm, PropertySymmetricNormalised) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = random_image(3 + seed % 7, 4 + seed % 5, seed);
    const auto p = glcm(g, 8, kDefaultOffsets);
    double sum = 0;
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) {
        EXPECT_DOUBLE_EQ(p[i * 8 + j], p[j * 8 + i]);
        sum += p[i * 8 + j];
      }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const auto s = glcm_stats(p, 8);
    EXPECT_GT(s.energy, 0.0);
    EXPECT_LE(s.energy, 1.0);
  }
}

TEST(Glcm, RejectsDegenerateInput) {
  EXPECT_THROW(glcm(constant_image(1, 1, 0), 8, kDefaultOffsets), ValidationError);
  EXPECT_THROW(glcm(constant_image(3, 3, 0), 1, kDefaultOffsets), ValidationError);
}

TEST(Hu, MatchesRawMomentOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = random_image(5 + seed % 4, 6 + seed % 3, seed);
    const auto h = hu_moments(g);
    ASSERT_TRUE(h.has_value());
    const auto o = hu_oracle(g);
    for (int k = 0; k < 7; ++k) EXPECT_NEAR((*h)[k], o[k], 1e-9 * std::fabs(o[k]) + 1e-15) << k;
  }
}

TEST(Hu, InvariantUnderRotation) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = random_image(7, 9, seed + 100);
    const auto a = *hu_moments(g), b = *hu_moments(rotate90(g));
    for (int k = 0; k < 7; ++k) expect_rel(a[k], b[k], 1e-6);
    const auto sa = *hu_moments(sobel_magnitude(g)), sb = *hu_moments(sobel_magnitude(rotate90(g)));
    for (int k = 0; k < 7; ++k) expect_rel(sa[k], sb[k], 1e-6);
  }
}

TEST(Hu, ZeroMassIsUndefined) { EXPECT_FALSE(hu_moments(constant_image(4, 4, 0)).has_value()); }

TEST(Sobel, ConstantAndStep) {
  const auto flat = sobel_magnitude(constant_image(5, 5, 42));
  for (double v : flat.px) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(white_fraction(flat, 0.5), 0.0);
  // vertical step: columns 0-1 at 0, columns 2-3 at 100
  GrayImage step{3, 4, {0, 0, 100, 100, 0, 0, 100, 100, 0, 0, 100, 100}};
  const auto e = sobel_magnitude(step);
  EXPECT_DOUBLE_EQ(e.at(1, 1), 400.0);
  EXPECT_DOUBLE_EQ(e.at(1, 2), 400.0);
  EXPECT_DOUBLE_EQ(e.at(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(white_fraction(e, 0.5), 0.5);
}

TEST(Hsv, KnownColours) {
  const auto red = rgb_to_hsv(255, 0, 0), green = rgb_to_hsv(0, 255, 0), gray = rgb_to_hsv(128, 128, 128);
  EXPECT_DOUBLE_EQ(red[0], 0.0);
  EXPECT_DOUBLE_EQ(red[1], 1.0);
  EXPECT_DOUBLE_EQ(green[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(gray[1], 0.0);
  EXPECT_DOUBLE_EQ(gray[2], 128.0 / 255.0);
  EXPECT_NEAR(rgb_to_hsv(255, 0, 255)[0], 5.0 / 6.0, 1e-15);
}

TEST(Fft, ConstantImageIsPureDc) {
  const auto s = fft_stats(constant_image(8, 8, 10));
  EXPECT_TRUE(s.defined);
  EXPECT_NEAR(s.entropy, 0.0, 1e-12);
  EXPECT_NEAR(s.energy, 1.0, 1e-12);
  EXPECT_NEAR(s.inertia, 0.0, 1e-12);
  EXPECT_NEAR(s.homogeneity, 1.0, 1e-12);
  EXPECT_FALSE(fft_stats(constant_image(4, 4, 0)).defined);
}

TEST(Fft, MagnitudeMatchesDirectSum) {
  const auto g = random_image(5, 6, 77);
  const auto mag = dft_magnitude(g);
  const double pi = std::acos(-1.0);
  for (std::size_t v = 0; v < g.h; ++v)
    for (std::size_t u = 0; u < g.w; ++u) {
      double re = 0, im = 0;
      for (std::size_t y = 0; y < g.h; ++y)
        for (std::size_t x = 0; x < g.w; ++x) {
          const double a = -2 * pi * (double(u * x) / g.w + double(v * y) / g.h);
          re += g.at(y, x) * std::cos(a);
          im += g.at(y, x) * std::sin(a);
        }
      EXPECT_NEAR(mag.at((v + g.h / 2) % g.h, (u + g.w / 2) % g.w), std::hypot(re, im), 1e-8);
    }
}

TEST(Fft, SingleFrequencyInertia) {
  // cos along x at 1/4 cycles per pixel: mass at DC and u = +-1/4
  GrayImage g{4, 4, std::vector<double>(16)};
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) g.at(y, x) = 100 + 50 * std::cos(2 * std::acos(-1.0) * x / 4.0);
  const auto s = fft_stats(g);
  // |F| at DC = 1600, at +-1/4 = 400 each: p = 2/3, 1/6, 1/6
  EXPECT_NEAR(s.inertia, (1.0 / 3.0) * 0.0625, 1e-12);
  EXPECT_NEAR(s.energy, 4.0 / 9 + 2.0 / 36, 1e-12);
}

TEST(ImageFeatures, SchemaFiniteAndUnique) {
  const auto d = synth_dataset({.seed = 4, .n = 6, .h = 8, .w = 8, .c = 3, .num_classes = 2});
  const auto b = image_features(d);
  EXPECT_EQ(std::set<std::string>(b.names.begin(), b.names.end()).size(), b.names.size());
  for (double v : b.values) EXPECT_TRUE(std::isfinite(v));
  const auto gray = synth_dataset({.seed = 4, .n = 6, .h = 8, .w = 8, .c = 1, .num_classes = 2});
  const auto g = image_features(gray);
  EXPECT_EQ(g.names, b.names);
  EXPECT_EQ(g.get("color_h_mean"), 0.0);
  EXPECT_EQ(g.get("color_s_mean"), 0.0);
}

TEST(ImageFeatures, ConstantDataset) {
  const auto d = synth_dataset({.seed = 1, .n = 3, .h = 6, .w = 6, .c = 1, .num_classes = 1, .spread = 0.0});
  const auto b = image_features(d);
  EXPECT_DOUBLE_EQ(b.get("glcm_energy_mean"), 1.0);
  EXPECT_DOUBLE_EQ(b.get("glcm_contrast_mean"), 0.0);
  EXPECT_DOUBLE_EQ(b.get("glcm_entropy_mean"), 0.0);
  EXPECT_DOUBLE_EQ(b.get("glcm_correlation_mean"), 0.0);
  EXPECT_DOUBLE_EQ(b.get("border_white_mean"), 0.0);
  EXPECT_FALSE(b.diagnostics.empty());
}

TEST(ImageFeatures, Pure) {
  const auto d = synth_dataset({.seed = 9, .n = 4, .h = 7, .w = 5, .c = 3, .num_classes = 2});
  EXPECT_EQ(image_features(d).values, image_features(d).values);
}

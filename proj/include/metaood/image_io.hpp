#pragma once

// Image datasets: raw tensor files, directories of PNG/PPM/PGM images, and a
// deterministic synthetic generator for tests and proxy benchmarks.

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "metaood/csv.hpp"
#include "metaood/error.hpp"
#include "metaood/rng.hpp"

namespace metaood {

/// n images of h x w pixels with c channels, stored row-major as
/// [image][row][col][channel].
class ImageDataset {
 public:
  ImageDataset() = default;

  ImageDataset(std::string name, std::size_t n, std::size_t h, std::size_t w, std::size_t c,
               std::vector<std::uint8_t> pixels, std::vector<std::uint32_t> labels = {})
      : name_(std::move(name)), n_(n), h_(h), w_(w), c_(c), pixels_(std::move(pixels)), labels_(std::move(labels)) {
    if (n_ == 0 || h_ == 0 || w_ == 0) throw ValidationError("dataset '" + name_ + "': dimensions must be >= 1");
    if (c_ != 1 && c_ != 3) throw ValidationError("dataset '" + name_ + "': channels must be 1 or 3");
    if (pixels_.size() != n_ * h_ * w_ * c_)
      throw ValidationError("dataset '" + name_ + "': payload has " + std::to_string(pixels_.size()) +
                            " bytes, expected " + std::to_string(n_ * h_ * w_ * c_));
    if (!labels_.empty() && labels_.size() != n_)
      throw ValidationError("dataset '" + name_ + "': " + std::to_string(labels_.size()) + " labels for " +
                            std::to_string(n_) + " images");
  }

  const std::string& name() const { return name_; }
  std::size_t size() const { return n_; }
  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t channels() const { return c_; }
  std::size_t image_bytes() const { return h_ * w_ * c_; }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return std::span<const std::uint8_t>(pixels_).subspan(i * image_bytes(), image_bytes());
  }
  std::uint8_t at(std::size_t i, std::size_t y, std::size_t x, std::size_t ch) const {
    return pixels_[((i * h_ + y) * w_ + x) * c_ + ch];
  }

  bool has_labels() const { return !labels_.empty(); }
  const std::vector<std::uint32_t>& labels() const { return labels_; }

  /// Distinct classes (max label + 1); 0 when unlabeled.
  std::size_t num_classes() const {
    if (labels_.empty()) return 0;
    return static_cast<std::size_t>(*std::max_element(labels_.begin(), labels_.end())) + 1;
  }

  /// Images [first, first + count).
  ImageDataset slice(std::size_t first, std::size_t count, std::string name) const {
    if (first + count > n_ || count == 0) throw ValidationError("dataset '" + name_ + "': slice out of range");
    std::vector<std::uint8_t> px(pixels_.begin() + static_cast<std::ptrdiff_t>(first * image_bytes()),
                                 pixels_.begin() + static_cast<std::ptrdiff_t>((first + count) * image_bytes()));
    std::vector<std::uint32_t> lb;
    if (has_labels())
      lb.assign(labels_.begin() + static_cast<std::ptrdiff_t>(first),
                labels_.begin() + static_cast<std::ptrdiff_t>(first + count));
    return ImageDataset(std::move(name), count, h_, w_, c_, std::move(px), std::move(lb));
  }

  bool operator==(const ImageDataset& o) const {
    return n_ == o.n_ && h_ == o.h_ && w_ == o.w_ && c_ == o.c_ && pixels_ == o.pixels_ && labels_ == o.labels_;
  }

 private:
  std::string name_;
  std::size_t n_ = 0, h_ = 0, w_ = 0, c_ = 0;
  std::vector<std::uint8_t> pixels_;
  std::vector<std::uint32_t> labels_;
};

/// Concatenates datasets of identical geometry. Labels are kept only when
/// every part is labeled.
inline ImageDataset concat(const std::vector<const ImageDataset*>& parts, std::string name) {
  if (parts.empty()) throw ValidationError("concat: no datasets");
  const auto& first = *parts.front();
  std::vector<std::uint8_t> px;
  std::vector<std::uint32_t> lb;
  bool labeled = true;
  std::size_t n = 0;
  for (const auto* d : parts) {
    if (d->height() != first.height() || d->width() != first.width() || d->channels() != first.channels())
      throw ValidationError("concat: '" + d->name() + "' geometry differs from '" + first.name() + "'");
    px.insert(px.end(), d->pixels().begin(), d->pixels().end());
    labeled = labeled && d->has_labels();
    if (labeled) lb.insert(lb.end(), d->labels().begin(), d->labels().end());
    n += d->size();
  }
  if (!labeled) lb.clear();
  return ImageDataset(std::move(name), n, first.height(), first.width(), first.channels(), std::move(px),
                      std::move(lb));
}

/// Nearest-neighbour resample to h x w and channel conversion (gray is
/// replicated; RGB becomes integer luma). Integer arithmetic only.
inline ImageDataset conform(const ImageDataset& d, std::size_t h, std::size_t w, std::size_t c) {
  if (d.height() == h && d.width() == w && d.channels() == c) return d;
  if (h == 0 || w == 0 || (c != 1 && c != 3)) throw ValidationError("conform: bad target geometry");
  std::vector<std::uint8_t> px;
  px.reserve(d.size() * h * w * c);
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t sy = y * d.height() / h, sx = x * d.width() / w;
        if (d.channels() == c) {
          for (std::size_t ch = 0; ch < c; ++ch) px.push_back(d.at(i, sy, sx, ch));
        } else if (c == 3) {
          px.insert(px.end(), 3, d.at(i, sy, sx, 0));
        } else {
          const unsigned luma = (299u * d.at(i, sy, sx, 0) + 587u * d.at(i, sy, sx, 1) + 114u * d.at(i, sy, sx, 2) + 500u) / 1000u;
          px.push_back(static_cast<std::uint8_t>(luma));
        }
      }
  return ImageDataset(d.name(), d.size(), h, w, c, std::move(px), d.labels());
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
  return v;
}

inline std::filesystem::path labels_path(const std::filesystem::path& raw) {
  auto p = raw;
  p += ".labels";
  return p;
}

}  // namespace detail

inline constexpr std::array<char, 4> kRawMagic{'M', 'O', 'I', 'D'};

/// Raw tensor file: `MOID`, u32 LE n, h, w, c, then n*h*w*c bytes. Labels,
/// when present, go to a sibling `<path>.labels` file of n u32 LE values.
inline void save_raw(const ImageDataset& d, const std::filesystem::path& path) {
  std::string out(kRawMagic.begin(), kRawMagic.end());
  for (auto v : {d.size(), d.height(), d.width(), d.channels()}) detail::put_u32(out, static_cast<std::uint32_t>(v));
  out.append(reinterpret_cast<const char*>(d.pixels().data()), d.pixels().size());
  csv::write_text(path, out);
  const auto lp = detail::labels_path(path);
  if (d.has_labels()) {
    std::string lb;
    for (auto l : d.labels()) detail::put_u32(lb, l);
    csv::write_text(lp, lb);
  } else if (std::filesystem::exists(lp)) {
    std::filesystem::remove(lp);
  }
}

inline ImageDataset load_raw(const std::filesystem::path& path) {
  const std::string in = csv::read_text(path);
  const std::string src = path.string();
  if (in.size() < 20 || !std::equal(kRawMagic.begin(), kRawMagic.end(), in.begin()))
    throw ValidationError(src + ": not a raw tensor file (bad magic or short header)");
  const std::size_t n = detail::get_u32(in, 4), h = detail::get_u32(in, 8), w = detail::get_u32(in, 12),
                    c = detail::get_u32(in, 16);
  const std::size_t expected = n * h * w * c;
  if (in.size() - 20 != expected)
    throw ValidationError(src + ": header declares " + std::to_string(expected) + " payload bytes, file has " +
                          std::to_string(in.size() - 20));
  std::vector<std::uint8_t> px(in.begin() + 20, in.end());
  std::vector<std::uint32_t> labels;
  const auto lp = detail::labels_path(path);
  if (std::filesystem::exists(lp)) {
    const std::string lb = csv::read_text(lp);
    if (lb.size() != 4 * n)
      throw ValidationError(lp.string() + ": expected " + std::to_string(n) + " labels, file has " +
                            std::to_string(lb.size()) + " bytes");
    for (std::size_t i = 0; i < n; ++i) labels.push_back(detail::get_u32(lb, 4 * i));
  }
  try {
    return ImageDataset(path.stem().string(), n, h, w, c, std::move(px), std::move(labels));
  } catch (const ValidationError& e) {
    throw ValidationError(src + ": " + e.what());
  }
}

struct DecodedImage {
  std::size_t h = 0, w = 0, c = 0;
  std::vector<std::uint8_t> pixels;
};

namespace detail {

inline std::size_t read_pnm_int(std::istream& in) {
  int ch = in.get();
  for (;;) {
    while (ch != EOF && std::isspace(ch)) ch = in.get();
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
      continue;
    }
    break;
  }
  if (ch == EOF || !std::isdigit(ch)) throw ValidationError("malformed PNM header");
  std::size_t v = 0;
  while (ch != EOF && std::isdigit(ch)) {
    v = v * 10 + static_cast<std::size_t>(ch - '0');
    ch = in.get();
  }
  return v;  // the single whitespace after the value has been consumed
}

}  // namespace detail

/// Binary PGM (P5) or PPM (P6) with maxval <= 255.
inline DecodedImage decode_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
    throw ValidationError(path.string() + ": only binary P5/P6 images are supported");
  DecodedImage img;
  img.c = magic[1] == '5' ? 1 : 3;
  try {
    img.w = detail::read_pnm_int(in);
    img.h = detail::read_pnm_int(in);
    const auto maxval = detail::read_pnm_int(in);
    if (maxval == 0 || maxval > 255) throw ValidationError("unsupported maxval");
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  img.pixels.resize(img.h * img.w * img.c);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.pixels.size())
    throw ValidationError(path.string() + ": truncated pixel data");
  return img;
}

inline DecodedImage decode_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw ValidationError(path.string() + ": " + image.message);
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  DecodedImage img{image.height, image.width, color ? 3u : 1u, {}};
  img.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw ValidationError(path.string() + ": " + image.message);
  }
  return img;
}

inline void encode_png(const std::filesystem::path& path, const DecodedImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.w);
  image.height = static_cast<png_uint_32>(img.h);
  image.format = img.c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr))
    throw ValidationError(path.string() + ": " + image.message);
}

/// Directory of .png/.ppm/.pgm files plus `labels.csv` (`file,label`). Files
/// are read in lexicographic order. A dataset is RGB if any image is RGB;
/// grayscale images are then replicated to three channels.
inline ImageDataset load_image_directory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".ppm" || ext == ".pgm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError(dir.string() + ": no image files");

  std::vector<DecodedImage> images;
  for (const auto& f : files) {
    const auto ext = f.extension().string();
    images.push_back(ext == ".png" || ext == ".PNG" ? decode_png(f) : decode_pnm(f));
    if (images.back().h != images.front().h || images.back().w != images.front().w)
      throw ValidationError(f.string() + ": image size differs from " + files.front().string());
  }
  const bool rgb = std::any_of(images.begin(), images.end(), [](const auto& i) { return i.c == 3; });
  const std::size_t c = rgb ? 3 : 1;
  std::vector<std::uint8_t> px;
  for (const auto& img : images) {
    if (img.c == c) {
      px.insert(px.end(), img.pixels.begin(), img.pixels.end());
    } else {
      for (auto v : img.pixels) px.insert(px.end(), {v, v, v});
    }
  }

  std::vector<std::uint32_t> labels;
  const auto manifest = dir / "labels.csv";
  if (std::filesystem::exists(manifest)) {
    const auto t = csv::read_file(manifest);
    std::map<std::string, std::uint32_t> by_file;
    // The header line is optional; treat a numeric second column as data.
    std::vector<std::vector<std::string>> rows = t.rows;
    if (t.header.size() == 2 && csv::parse_double(t.header[1])) rows.insert(rows.begin(), t.header);
    for (const auto& r : rows) {
      if (r.size() != 2) throw ValidationError(manifest.string() + ": expected file,label rows");
      const auto v = csv::parse_double(r[1]);
      if (!v || *v < 0 || *v != std::floor(*v)) throw ValidationError(manifest.string() + ": bad label '" + r[1] + "'");
      by_file[r[0]] = static_cast<std::uint32_t>(*v);
    }
    for (const auto& f : files) {
      const auto it = by_file.find(f.filename().string());
      if (it == by_file.end()) throw ValidationError(manifest.string() + ": no label for " + f.filename().string());
      labels.push_back(it->second);
    }
    if (by_file.size() != files.size())
      throw ValidationError(manifest.string() + ": " + std::to_string(by_file.size()) + " labels for " +
                            std::to_string(files.size()) + " images");
  }
  return ImageDataset(dir.filename().string(), images.size(), images.front().h, images.front().w, c, std::move(px),
                      std::move(labels));
}

/// Loads a raw tensor file or an image directory.
inline ImageDataset load_dataset(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_image_directory(path);
  if (!std::filesystem::exists(path)) throw ValidationError("dataset not found: " + path.string());
  return load_raw(path);
}

struct SynthSpec {
  std::uint64_t seed = 0;
  std::size_t n = 16, h = 16, w = 16, c = 3;
  std::size_t num_classes = 2;
  double spread = 1.0;  // 0 yields constant images
};

/// Deterministic synthetic dataset. Image i has label i % num_classes; each
/// class has a seeded base colour and a seeded triangle-wave texture, plus
/// per-pixel noise (centred sum of four uniforms). Every pixel is
/// `base + spread * (class colour + texture + jitter + noise)`, clamped to
/// [0, 255] and rounded, so spread = 0 gives a single constant value across
/// the whole dataset. Only SplitMix64 draws and IEEE arithmetic are involved
/// (no libm calls), so the bytes are identical on every platform.
inline ImageDataset synth_dataset(const SynthSpec& s, std::string name = "synthetic") {
  if (s.n == 0 || s.h == 0 || s.w == 0 || s.num_classes == 0)
    throw ValidationError("synth_dataset: all dimensions must be >= 1");
  if (s.c != 1 && s.c != 3) throw ValidationError("synth_dataset: channels must be 1 or 3");
  if (!(s.spread >= 0.0)) throw ValidationError("synth_dataset: spread must be >= 0");
  Rng rng(s.seed);
  const double base = 64.0 + std::floor(rng.uniform() * 128.0);
  struct ClassStyle {
    std::array<double, 3> colour;
    double fx, fy, phase, amplitude;
  };
  std::vector<ClassStyle> styles(s.num_classes);
  for (auto& st : styles) {
    for (auto& col : st.colour) col = rng.uniform(-48.0, 48.0);
    st.fx = rng.uniform(0.0, 0.25);
    st.fy = rng.uniform(0.0, 0.25);
    st.phase = rng.uniform();
    st.amplitude = rng.uniform(4.0, 40.0);
  }
  const double noise = 2.0 + 18.0 * rng.uniform();
  std::vector<std::uint8_t> px;
  px.reserve(s.n * s.h * s.w * s.c);
  std::vector<std::uint32_t> labels(s.n);
  for (std::size_t i = 0; i < s.n; ++i) {
    const auto label = static_cast<std::uint32_t>(i % s.num_classes);
    labels[i] = label;
    const auto& st = styles[label];
    const double jitter = rng.uniform(-10.0, 10.0);
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x) {
        const double t = st.fx * static_cast<double>(x) + st.fy * static_cast<double>(y) + st.phase;
        const double frac = t - std::floor(t);
        const double texture = st.amplitude * (4.0 * std::fabs(frac - 0.5) - 1.0);
        for (std::size_t ch = 0; ch < s.c; ++ch) {
          const double u = rng.uniform() + rng.uniform() + rng.uniform() + rng.uniform() - 2.0;
          const double v = base + s.spread * (st.colour[ch] + texture + jitter + noise * u);
          px.push_back(static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0)));
        }
      }
  }
  return ImageDataset(std::move(name), s.n, s.h, s.w, s.c, std::move(px), std::move(labels));
}

}  // namespace metaood

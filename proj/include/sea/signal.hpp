#pragma once

// Numeric kernels shared by every other module: image/delta containers,
// correlation measures and the 2-D power spectrum.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sea {

inline constexpr int kLevels = 256;               // quantization levels per pixel
inline constexpr int kDeltaLevels = 2 * kLevels - 1;  // 511 pixel-difference levels

struct Dims {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const { return height * width * channels; }
  std::size_t plane() const { return height * width; }
  bool operator==(const Dims&) const = default;
};

/// Quantized image in [0,1]^d, stored as 8-bit levels in row-major (H, W, C) order.
class Image {
 public:
  Image() = default;
  Image(Dims dims, std::vector<std::uint8_t> levels);
  /// Rounds each value to the nearest of 256 levels after clamping to [0,1].
  static Image quantize(Dims dims, std::span<const double> values);
  static Image filled(Dims dims, std::uint8_t level);

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return levels_.size(); }
  std::span<const std::uint8_t> levels() const { return levels_; }
  std::uint8_t level(std::size_t i) const { return levels_[i]; }
  double value(std::size_t i) const { return levels_[i] / 255.0; }
  std::vector<double> values() const;

  bool operator==(const Image&) const = default;

 private:
  Dims dims_;
  std::vector<std::uint8_t> levels_;
};

/// Per-query change next - prev on dequantized values; every entry is a multiple of 1/255.
class Delta {
 public:
  Delta() = default;
  Delta(Dims dims, std::vector<double> values);
  static Delta between(const Image& prev, const Image& next);
  static Delta zeros(Dims dims);

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  /// Index into the 511-level difference alphabet: round(v*255) + 255.
  int level_index(std::size_t i) const;
  bool is_zero() const;

 private:
  Dims dims_;
  std::vector<double> values_;
};

/// Channel-averaged power spectrum over the spatial frequency grid.
struct Spectrum {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> power;  // row-major (u, v)

  double at(std::size_t u, std::size_t v) const { return power[u * width + v]; }
};

/// Binary spectral mask with the spectrum's layout.
struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;

  std::size_t count() const;
  std::vector<double> as_reals() const;
  bool operator==(const Mask&) const = default;
};

double pearson(std::span<const double> z1, std::span<const double> z2);
double cosine_sim(std::span<const double> v1, std::span<const double> v2);
double mse(std::span<const double> a, std::span<const double> b);

/// Centered, unit-norm copy (all zeros for a constant vector). The dot product
/// of two standardized vectors is their Pearson correlation.
std::vector<double> standardize(std::span<const double> z);
double dot(std::span<const double> a, std::span<const double> b);

/// Unnormalized forward DFT per channel, |X[u,v]|^2 averaged over channels.
Spectrum psd2(const Delta& delta);

/// 1 where power > factor * median(power). Entries at or below 1e-12 of the
/// spectrum's maximum are treated as exact zeros.
Mask binarize(const Spectrum& spec, double threshold_factor);

}  // namespace sea

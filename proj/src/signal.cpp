#include "sea/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>

#include "sea/error.hpp"

namespace sea {

namespace {

void require_dims(const Dims& dims) {
  if (dims.height == 0 || dims.width == 0 || dims.channels == 0)
    throw InvalidInput("dimensions must be at least 1x1x1");
}

// FFTW plans are created once per spatial shape. Plan creation is not
// thread-safe; execution through the new-array interface is.
class PlanCache {
 public:
  fftw_plan get(std::size_t h, std::size_t w) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(h, w);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<double> in(h * w);
    std::vector<fftw_complex> out(h * (w / 2 + 1));
    fftw_plan plan = fftw_plan_dft_r2c_2d(static_cast<int>(h), static_cast<int>(w), in.data(),
                                          out.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::size_t, std::size_t>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  double upper = *mid;
  if (n % 2 == 1) return upper;
  double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

Image::Image(Dims dims, std::vector<std::uint8_t> levels) : dims_(dims), levels_(std::move(levels)) {
  require_dims(dims_);
  if (levels_.size() != dims_.size()) throw InvalidInput("image data does not match its dimensions");
}

Image Image::quantize(Dims dims, std::span<const double> values) {
  if (values.size() != dims.size()) throw InvalidInput("image data does not match its dimensions");
  std::vector<std::uint8_t> levels(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    double v = std::clamp(values[i], 0.0, 1.0);
    levels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return Image(dims, std::move(levels));
}

Image Image::filled(Dims dims, std::uint8_t level) {
  return Image(dims, std::vector<std::uint8_t>(dims.size(), level));
}

std::vector<double> Image::values() const {
  std::vector<double> out(levels_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = levels_[i] / 255.0;
  return out;
}

Delta::Delta(Dims dims, std::vector<double> values) : dims_(dims), values_(std::move(values)) {
  require_dims(dims_);
  if (values_.size() != dims_.size()) throw InvalidInput("delta data does not match its dimensions");
}

Delta Delta::between(const Image& prev, const Image& next) {
  if (prev.dims() != next.dims()) throw InvalidInput("delta between images of different dimensions");
  std::vector<double> values(prev.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = next.value(i) - prev.value(i);
  return Delta(prev.dims(), std::move(values));
}

Delta Delta::zeros(Dims dims) { return Delta(dims, std::vector<double>(dims.size(), 0.0)); }

int Delta::level_index(std::size_t i) const {
  return static_cast<int>(std::floor(values_[i] * 255.0 + 0.5)) + (kLevels - 1);
}

bool Delta::is_zero() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::vector<double> Mask::as_reals() const { return {bits.begin(), bits.end()}; }

double pearson(std::span<const double> z1, std::span<const double> z2) {
  if (z1.size() != z2.size()) throw InvalidInput("pearson: length mismatch");
  if (z1.size() < 2) throw InvalidInput("pearson: need at least two entries");
  const double n = static_cast<double>(z1.size());
  double m1 = std::accumulate(z1.begin(), z1.end(), 0.0) / n;
  double m2 = std::accumulate(z2.begin(), z2.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < z1.size(); ++i) {
    double a = z1[i] - m1;
    double b = z2[i] - m2;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  // A constant vector has no pattern to correlate with.
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double cosine_sim(std::span<const double> v1, std::span<const double> v2) {
  if (v1.size() != v2.size()) throw InvalidInput("cosine_sim: length mismatch");
  double dot = 0.0, n1 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < v1.size(); ++i) {
    dot += v1[i] * v2[i];
    n1 += v1[i] * v1[i];
    n2 += v2[i] * v2[i];
  }
  if (n1 <= 0.0 || n2 <= 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(n1 * n2), -1.0, 1.0);
}

double mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("mse: length mismatch");
  if (a.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

std::vector<double> standardize(std::span<const double> z) {
  std::vector<double> out(z.begin(), z.end());
  if (out.empty()) return out;
  double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
  double norm = 0.0;
  for (double& v : out) {
    v -= mean;
    norm += v * v;
  }
  if (norm <= 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  norm = std::sqrt(norm);
  for (double& v : out) v /= norm;
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

Spectrum psd2(const Delta& delta) {
  const Dims& dims = delta.dims();
  require_dims(dims);
  const std::size_t h = dims.height, w = dims.width, c = dims.channels;
  const std::size_t half = w / 2 + 1;
  fftw_plan plan = plan_cache().get(h, w);

  Spectrum spec{h, w, std::vector<double>(h * w, 0.0)};
  std::vector<double> plane(h * w);
  std::vector<fftw_complex> out(h * half);
  auto values = delta.values();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < h * w; ++p) plane[p] = values[p * c + ch];
    fftw_execute_dft_r2c(plan, plane.data(), out.data());
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t v = 0; v < w; ++v) {
        // Bins beyond w/2 follow from Hermitian symmetry X[u,v] = conj(X[-u,-v]).
        std::size_t uu = u, vv = v;
        if (v >= half) {
          uu = (h - u) % h;
          vv = w - v;
        }
        const fftw_complex& x = out[uu * half + vv];
        spec.power[u * w + v] += x[0] * x[0] + x[1] * x[1];
      }
    }
  }
  for (double& p : spec.power) p /= static_cast<double>(c);
  return spec;
}

Mask binarize(const Spectrum& spec, double threshold_factor) {
  if (!(threshold_factor > 0.0)) throw InvalidInput("binarize: threshold factor must be positive");
  Mask mask{spec.height, spec.width, std::vector<std::uint8_t>(spec.power.size(), 0)};
  if (spec.power.empty()) return mask;
  double peak = *std::max_element(spec.power.begin(), spec.power.end());
  if (peak <= 0.0) return mask;
  const double zero_floor = 1e-12 * peak;
  std::vector<double> cleaned(spec.power);
  for (double& p : cleaned)
    if (p <= zero_floor) p = 0.0;
  double threshold = threshold_factor * median_of(cleaned);
  for (std::size_t i = 0; i < cleaned.size(); ++i)
    mask.bits[i] = cleaned[i] > threshold ? 1 : 0;
  return mask;
}

}  // namespace sea

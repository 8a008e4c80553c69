#include "sea/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "sea/error.hpp"

namespace sea {

namespace {

// Noise scales in [0,1] units. Probe noise stays small enough that the
// -0.5 correlation between successive probe differences does not read as a
// line search.
constexpr double kSigmaN2 = 0.3 / 255.0;   // small normalized Gaussian probes
constexpr double kSigmaN4 = 0.55 / 255.0;   // DCT-subspace probes (marginal sd)
constexpr double kSigmaN3 = 0.75 / 255.0;  // plain Gaussian probes
constexpr double kSdN1 = 6.0 / 255.0;      // Gaussian gradient step
constexpr double kSignStep = 1.0 / 255.0;  // sign gradient step
constexpr double kPatternSd = 6.0 / 255.0;
constexpr std::size_t kTile = 4;
constexpr double kBlockStart = 32.0 / 255.0;  // minimum coarse start amplitude
constexpr double kBlockStartScale = 4.0;    // minimum coarse start, in offsets
constexpr std::size_t kSubspace = 25;      // DCT coefficients kept per axis

std::vector<double> blur_plane(const std::vector<double>& in, std::size_t h, std::size_t w, double sigma) {
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) total += k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= total;
  auto reflect = [](long i, long n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return static_cast<std::size_t>(i);
  };
  std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (int i = -radius; i <= radius; ++i)
        tmp[y * w + x] += k[static_cast<std::size_t>(i + radius)] * in[y * w + reflect(static_cast<long>(x) + i, static_cast<long>(w))];
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (int i = -radius; i <= radius; ++i)
        out[y * w + x] += k[static_cast<std::size_t>(i + radius)] * tmp[reflect(static_cast<long>(y) + i, static_cast<long>(h)) * w + x];
  return out;
}

// Unit-sd smoothed Gaussian field in (H, W, C) order, channels independent.
std::vector<double> smooth_field(Dims dims, std::mt19937_64& rng, double sigma_px) {
  std::normal_distribution<double> normal;
  std::vector<double> out(dims.size());
  std::vector<double> plane(dims.plane());
  for (std::size_t ch = 0; ch < dims.channels; ++ch) {
    for (double& v : plane) v = normal(rng);
    std::vector<double> smooth = blur_plane(plane, dims.height, dims.width, sigma_px);
    double mean = 0.0, sq = 0.0;
    for (double v : smooth) mean += v;
    mean /= static_cast<double>(smooth.size());
    for (double v : smooth) sq += (v - mean) * (v - mean);
    double sd = std::sqrt(sq / static_cast<double>(smooth.size()));
    for (std::size_t i = 0; i < smooth.size(); ++i) out[i * dims.channels + ch] = (smooth[i] - mean) / sd;
  }
  return out;
}

std::vector<double> image_values(Dims dims, std::mt19937_64& rng, double contrast = 0.16) {
  std::vector<double> z = smooth_field(dims, rng, 1.0);
  for (double& v : z) v = std::clamp(0.5 + contrast * v, 0.1, 0.9);
  return z;
}

double sd_of(std::span<const double> v) {
  double mean = 0.0, sq = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double x : v) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(v.size()));
}

double norm_of(std::span<const double> v, Norm norm) {
  double acc = 0.0;
  for (double x : v) acc = norm == Norm::Linf ? std::max(acc, std::abs(x)) : acc + x * x;
  return norm == Norm::Linf ? acc : std::sqrt(acc);
}

void axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

std::vector<double> scaled(const std::vector<double>& x, double a) {
  std::vector<double> out(x);
  for (double& v : out) v *= a;
  return out;
}

std::vector<double> sum(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a);
  axpy(out, 1.0, b);
  return out;
}

class Program {
 public:
  Program(const SyntheticAttackSpec& spec, const Image& clean, std::size_t budget)
      : spec_(spec), dims(clean.dims()), clean_(clean), c(clean.values()), eps(spec.budget()), rng(spec.seed),
        budget_(budget), p(dims.size(), 0.0) {
    if (spec.adaptive.kind == Adaptive::Kind::ScaledNoise) noise_mult = spec.adaptive.param;
    if (spec.adaptive.kind == Adaptive::Kind::ScaledLr) lr_mult = spec.adaptive.param;
    emit(p, "");
  }

  // One slot stays free for the final projection.
  bool full() const { return queries.size() + 1 >= budget_; }

  void emit(const std::vector<double>& offset, const std::string& label) {
    if (!queries.empty() && full()) return;
    std::vector<double> x(c);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i] + offset[i], 0.0, 1.0);
    Image img = Image::quantize(dims, x);
    if (!queries.empty()) labels.push_back(img == queries.back() ? "NULL" : label);
    queries.push_back(std::move(img));
    last_offset = offset;
  }

  std::vector<double> gaussian(double sd) {
    std::normal_distribution<double> normal(0.0, sd);
    std::vector<double> out(dims.size());
    for (double& v : out) v = normal(rng);
    return out;
  }

  std::vector<double> probe(const std::string& label) {
    if (label == "N2") return gaussian(kSigmaN2 * noise_mult);
    if (label == "N3") return gaussian(kSigmaN3 * noise_mult);
    return subspace_noise(kSigmaN4 * noise_mult);
  }

  // Low-frequency DCT subspace noise, rescaled to the requested marginal sd.
  std::vector<double> subspace_noise(double sd) {
    const std::size_t h = dims.height, w = dims.width, kh = std::min(kSubspace, h), kw = std::min(kSubspace, w);
    auto basis = [](std::size_t n, std::size_t k) {
      std::vector<double> b(n * k);
      for (std::size_t x = 0; x < n; ++x)
        for (std::size_t j = 0; j < k; ++j)
          b[x * k + j] = std::cos(std::numbers::pi * (2.0 * x + 1.0) * j / (2.0 * n));
      return b;
    };
    std::vector<double> bh = basis(h, kh), bw = basis(w, kw);
    std::normal_distribution<double> normal;
    std::vector<double> out(dims.size());
    std::vector<double> coef(kh * kw), tmp(h * kw);
    for (std::size_t ch = 0; ch < dims.channels; ++ch) {
      for (double& v : coef) v = normal(rng);
      std::fill(tmp.begin(), tmp.end(), 0.0);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t k = 0; k < kh; ++k)
          for (std::size_t l = 0; l < kw; ++l) tmp[y * kw + l] += bh[y * kh + k] * coef[k * kw + l];
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          double v = 0.0;
          for (std::size_t l = 0; l < kw; ++l) v += tmp[y * kw + l] * bw[x * kw + l];
          out[(y * w + x) * dims.channels + ch] = v;
        }
    }
    double s = sd_of(out);
    for (double& v : out) v *= sd / s;
    return out;
  }

  // Sum of a row profile and a column profile per channel: spectral cross.
  std::vector<double> cross_pattern(double sd, bool central) {
    std::normal_distribution<double> normal;
    std::vector<double> out(dims.size());
    for (std::size_t ch = 0; ch < dims.channels; ++ch) {
      std::vector<double> rows(dims.height), cols(dims.width);
      for (double& v : rows) v = normal(rng);
      for (double& v : cols) v = normal(rng);
      for (std::size_t y = 0; y < dims.height; ++y)
        for (std::size_t x = 0; x < dims.width; ++x) out[(y * dims.width + x) * dims.channels + ch] = rows[y] + cols[x];
    }
    double s = sd_of(out);
    for (double& v : out) v *= sd / s;
    if (central) {
      std::uniform_real_distribution<double> pos(0.0, 1.0);
      double cy = pos(rng) * dims.height, cx = pos(rng) * dims.width;
      double amp = 2.5 * sd * (pos(rng) < 0.5 ? -1.0 : 1.0);
      for (std::size_t y = 0; y < dims.height; ++y)
        for (std::size_t x = 0; x < dims.width; ++x) {
          double r2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          double v = amp * std::exp(-r2 / (2.0 * 9.0));
          for (std::size_t ch = 0; ch < dims.channels; ++ch) out[(y * dims.width + x) * dims.channels + ch] += v;
        }
    }
    return out;
  }

  std::vector<double> smooth_field_offset(double sd) { return scaled(smooth_field(dims, rng, 1.0), sd); }

  std::size_t uniform_index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
  bool coin(double prob = 0.5) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < prob; }

  // Low-contrast starting point, then a binary search on the blend factor
  // that first halves twice toward clean.
  void init_from_start(int ls_steps) {
    std::vector<double> start = image_values(dims, rng, 0.12);
    std::vector<double> dir(dims.size());
    for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = start[i] - c[i];
    emit(dir, "IMG");
    double a = 1.0, step = 0.5;
    for (int k = 0; k < ls_steps; ++k) {
      a += (k < 2 || coin()) ? -step : step;
      step /= 2.0;
      emit(scaled(dir, a), "LS");
    }
    p = scaled(dir, a);
  }

  // Line search along dir from p: queries p + t*dir for each t.
  void line_search(const std::vector<double>& dir, std::span<const double> ts, const std::string& first_label) {
    for (std::size_t k = 0; k < ts.size(); ++k) emit(sum(p, scaled(dir, ts[k])), k == 0 ? first_label : "LS");
    axpy(p, ts.back(), dir);
  }

  // Moves toward clean: p scaled by each rho in turn.
  void shrink(std::span<const double> rhos) {
    for (std::size_t k = 0; k < rhos.size(); ++k) emit(scaled(p, rhos[k]), k == 0 ? "IMG" : "LS");
    p = scaled(p, rhos.back());
  }

  void finish() {
    Image last = queries.back();
    if (perturbation_norm(last, clean_, spec_.norm) <= eps) return;
    std::vector<double> offset = last_offset;
    double s = eps / norm_of(offset, spec_.norm);
    budget_ = queries.size() + 2;
    for (int attempt = 0; attempt < 200; ++attempt, s *= 0.98) {
      std::vector<double> x(c);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i] + s * offset[i], 0.0, 1.0);
      Image img = Image::quantize(dims, x);
      if (perturbation_norm(img, clean_, spec_.norm) <= eps) {
        emit(scaled(offset, s), "IMG");
        return;
      }
    }
    emit(std::vector<double>(dims.size(), 0.0), "IMG");
  }

  const SyntheticAttackSpec& spec_;
  Dims dims;
  Image clean_;
  std::vector<double> c;
  double eps;
  std::mt19937_64 rng;
  std::size_t budget_;
  std::vector<double> p;
  std::vector<double> last_offset;
  double noise_mult = 1.0;
  double lr_mult = 1.0;
  std::vector<Image> queries;
  std::vector<std::string> labels;
};

void run_gauss_grad(Program& P) {
  const bool l2 = P.spec_.norm == Norm::L2;
  P.init_from_start(3);
  for (std::size_t k = 0; !P.full(); ++k) {
    std::size_t batch = l2 ? std::min<std::size_t>(45, 15 + 3 * k) : 20;
    for (std::size_t b = 0; b < batch; ++b) P.emit(sum(P.p, P.probe("N2")), "N2");
    std::vector<double> g = P.gaussian(kSdN1 * P.lr_mult);
    if (l2) {
      const double ts[] = {1.0, 0.5};
      P.line_search(g, ts, "N1");
    } else {
      const double ts[] = {1.0, 0.5, 0.75};
      P.line_search(g, ts, "N1");
    }
    if (k < (l2 ? 6u : 10u)) {
      const double rhos[] = {0.75, 0.875};
      P.shrink(rhos);
    }
  }
}

void run_subspace_noise(Program& P) {
  const bool l2 = P.spec_.norm == Norm::L2;
  P.init_from_start(3);
  for (std::size_t k = 0; !P.full(); ++k) {
    std::size_t batch = l2 ? 30 : 40;
    for (std::size_t b = 0; b < batch; ++b) P.emit(sum(P.p, P.probe("N4")), "N4");
    std::vector<double> step = P.cross_pattern(kPatternSd * P.lr_mult, !l2);
    const double ts[] = {1.0, 0.5};
    P.line_search(step, ts, l2 ? "P1" : "P2");
    if (k % 3 == 0 && k < 12) {
      const double rhos[] = {0.8, 0.9};
      P.shrink(rhos);
    }
  }
}

void run_block_pattern(Program& P) {
  const bool l2 = P.spec_.norm == Norm::L2;
  const double a = l2 ? 20.0 / 255.0 : std::floor(P.eps * 255.0 + 1e-9) / 255.0;
  const std::size_t th = P.dims.height / kTile, tw = P.dims.width / kTile, nch = P.dims.channels;
  // Per-tile, per-channel level index into the value set.
  const std::vector<double> values = l2 ? std::vector<double>{-a, 0.0, a} : std::vector<double>{-a, a};
  std::vector<std::size_t> state(th * tw * nch);
  for (auto& s : state) s = P.uniform_index(values.size());
  auto offset = [&] {
    std::vector<double> out(P.dims.size(), 0.0);
    for (std::size_t y = 0; y < th * kTile; ++y)
      for (std::size_t x = 0; x < tw * kTile; ++x)
        for (std::size_t ch = 0; ch < nch; ++ch)
          out[(y * P.dims.width + x) * nch + ch] = values[state[((y / kTile) * tw + x / kTile) * nch + ch]];
    return out;
  };
  // Coarse start at a large amplitude, then projected onto the budget.
  P.emit(scaled(offset(), std::max(kBlockStartScale, kBlockStart / a)), "IMG");
  P.emit(offset(), "LS");
  while (!P.full()) {
    std::size_t t = P.uniform_index(th * tw);
    for (std::size_t ch = 0; ch < nch; ++ch) state[t * nch + ch] = P.uniform_index(values.size());
    P.emit(offset(), "P3");
  }
}

void run_ray_search(Program& P) {
  const std::size_t d = P.dims.size();
  const double r_max = P.spec_.norm == Norm::Linf ? P.eps : P.eps / std::sqrt(static_cast<double>(d));
  const double r = std::max(1.0, std::floor(r_max * 255.0 + 1e-9)) / 255.0;
  std::vector<double> s(d, 1.0);
  auto ray = [&](double radius) { return scaled(s, radius); };
  for (double radius : {0.5, 0.25, 0.125, 0.0625, 0.03125}) P.emit(ray(std::max(radius, r)), "LS");
  P.emit(ray(r), "LS");
  const std::size_t row = P.dims.width * P.dims.channels;
  const std::size_t big = 2 * row, small = row / 2;
  const std::size_t n_big = d / big, n_small = d / small;
  auto flip = [&](std::size_t start, std::size_t len, const char* label) {
    for (std::size_t i = start; i < start + len; ++i) s[i] = -s[i];
    P.emit(ray(r), label);
  };
  while (!P.full()) {
    std::vector<std::size_t> order(n_big);
    for (std::size_t i = 0; i < n_big; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), P.rng);
    for (std::size_t i = 0; i < n_big / 2 + P.uniform_index(n_big / 2 + 1); ++i) flip(order[i] * big, big, "P4");
    order.resize(n_small);
    for (std::size_t i = 0; i < n_small; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), P.rng);
    for (std::size_t i = 0; i < n_small / 3; ++i) flip(order[i] * small, small, "P5");
    // Restore uniform signs on the coarse blocks.
    for (std::size_t b = 0; b < n_big; ++b)
      for (std::size_t j = 1; j < big / small; ++j) {
        std::size_t start = b * big + j * small;
        if (s[start] != s[b * big]) flip(start, small, "P5");
      }
  }
}

void run_sign_step(Program& P) {
  P.init_from_start(3);
  while (!P.full()) {
    for (int b = 0; b < 10; ++b) P.emit(sum(P.p, P.probe("N3")), "N3");
    std::vector<double> g = P.gaussian(kSdN1 * P.lr_mult);
    P.emit(sum(P.p, g), "N1");
    for (double t : {0.5, 0.75}) P.emit(sum(P.p, scaled(g, t)), "LS");
    axpy(P.p, 0.75, g);
  }
}

void run_boundary_walk(Program& P) {
  P.init_from_start(2);
  while (!P.full()) {
    std::size_t proposals = 20 + P.uniform_index(60);
    for (std::size_t b = 0; b < proposals && !P.full(); ++b) {
      std::vector<double> eta = P.probe("N3");
      P.emit(sum(P.p, eta), "N3");
      if (b + 1 == proposals) axpy(P.p, 1.0, eta);
    }
    double sd = sd_of(P.p);
    double mu = std::min(0.2, 2.5 / 255.0 / std::max(sd, 1e-9));
    if (sd * 255.0 > 8.0) {
      P.emit(scaled(P.p, 1.0 - mu), "IMG");
      P.p = scaled(P.p, 1.0 - mu);
    }
  }
}

void run_evo_grad(Program& P) {
  const bool l2 = P.spec_.norm == Norm::L2;
  if (l2) {
    P.p = P.smooth_field_offset(22.0 / 255.0);
  } else {
    P.p = P.gaussian(1.0);
    for (double& v : P.p) v = v < 0 ? -P.eps : P.eps;
  }
  P.emit(P.p, "IMG");
  while (!P.full()) {
    std::size_t batch = l2 ? 20 : 30;
    for (std::size_t b = 0; b < batch; ++b) P.emit(sum(P.p, P.probe("N3")), "N3");
    if (l2) {
      axpy(P.p, 1.0, P.gaussian(kSdN1 * P.lr_mult));
      P.emit(P.p, "N1");
    } else {
      std::vector<double> g = P.gaussian(1.0);
      for (std::size_t i = 0; i < g.size(); ++i)
        P.p[i] = std::clamp(P.p[i] + (g[i] < 0 ? -kSignStep : kSignStep) * P.lr_mult, -P.eps, P.eps);
      P.emit(P.p, "N5");
    }
  }
}

Image rotate(const Image& img, double degrees) {
  const Dims dims = img.dims();
  const double th = degrees * std::numbers::pi / 180.0, cs = std::cos(th), sn = std::sin(th);
  const double cy = (dims.height - 1) / 2.0, cx = (dims.width - 1) / 2.0;
  std::vector<double> out(dims.size());
  auto at = [&](long y, long x, std::size_t ch) {
    y = std::clamp<long>(y, 0, static_cast<long>(dims.height) - 1);
    x = std::clamp<long>(x, 0, static_cast<long>(dims.width) - 1);
    return img.value((static_cast<std::size_t>(y) * dims.width + static_cast<std::size_t>(x)) * dims.channels + ch);
  };
  for (std::size_t y = 0; y < dims.height; ++y)
    for (std::size_t x = 0; x < dims.width; ++x) {
      double sy = cs * (y - cy) - sn * (x - cx) + cy, sx = sn * (y - cy) + cs * (x - cx) + cx;
      long y0 = static_cast<long>(std::floor(sy)), x0 = static_cast<long>(std::floor(sx));
      double fy = sy - y0, fx = sx - x0;
      for (std::size_t ch = 0; ch < dims.channels; ++ch)
        out[(y * dims.width + x) * dims.channels + ch] =
            (1 - fy) * ((1 - fx) * at(y0, x0, ch) + fx * at(y0, x0 + 1, ch)) +
            fy * ((1 - fx) * at(y0 + 1, x0, ch) + fx * at(y0 + 1, x0 + 1, ch));
    }
  return Image::quantize(dims, out);
}

std::string relabel(const Image& prev, const Image& next, const std::string& label) {
  return prev == next ? "NULL" : label;
}

std::string format_param(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

const char* to_string(AttackFamily f) {
  switch (f) {
    case AttackFamily::GaussGrad: return "gauss-grad";
    case AttackFamily::SubspaceNoise: return "subspace-noise";
    case AttackFamily::BlockPattern: return "block-pattern";
    case AttackFamily::RaySearch: return "ray-search";
    case AttackFamily::SignStep: return "sign-step";
    case AttackFamily::BoundaryWalk: return "boundary-walk";
    case AttackFamily::EvoGrad: return "evo-grad";
  }
  return "?";
}

const char* to_string(Norm n) { return n == Norm::L2 ? "L2" : "Linf"; }

AttackFamily attack_family_from_string(const std::string& s) {
  for (AttackFamily f : {AttackFamily::GaussGrad, AttackFamily::SubspaceNoise, AttackFamily::BlockPattern,
                         AttackFamily::RaySearch, AttackFamily::SignStep, AttackFamily::BoundaryWalk,
                         AttackFamily::EvoGrad})
    if (s == to_string(f)) return f;
  throw InvalidInput("unknown attack family '" + s + "'");
}

Norm norm_from_string(const std::string& s) {
  if (s == "L2" || s == "l2") return Norm::L2;
  if (s == "Linf" || s == "linf" || s == "Inf" || s == "inf") return Norm::Linf;
  throw InvalidInput("unknown norm '" + s + "'");
}

std::string Adaptive::to_string() const {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::DummyNoise: return "dummy-noise(" + format_param(param) + ")";
    case Kind::ScaledNoise: return "scaled-noise(" + format_param(param) + ")";
    case Kind::ScaledLr: return "scaled-lr(" + format_param(param) + ")";
    case Kind::Rotation: return "rotation(" + format_param(param) + ")";
    case Kind::DuplicateBug: return "duplicate-bug";
  }
  return "none";
}

Adaptive Adaptive::parse(const std::string& s) {
  if (s.empty() || s == "none") return none();
  if (s == "duplicate-bug") return duplicate_bug();
  auto open = s.find('(');
  if (open == std::string::npos || s.back() != ')') throw InvalidInput("malformed adaptive strategy '" + s + "'");
  std::string name = s.substr(0, open);
  double v = 0.0;
  try {
    std::size_t used = 0;
    std::string arg = s.substr(open + 1, s.size() - open - 2);
    v = std::stod(arg, &used);
    if (used != arg.size()) throw std::invalid_argument(arg);
  } catch (const std::exception&) {
    throw InvalidInput("malformed adaptive parameter in '" + s + "'");
  }
  if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("adaptive parameter must be finite and non-negative");
  if (name == "dummy-noise") return dummy_noise(v);
  if (name == "scaled-noise") return scaled_noise(v);
  if (name == "scaled-lr") return scaled_lr(v);
  if (name == "rotation") return rotation(v);
  throw InvalidInput("unknown adaptive strategy '" + name + "'");
}

double SyntheticAttackSpec::budget() const {
  if (epsilon) return *epsilon;
  return norm == Norm::L2 ? 10.0 : 4.0 / 255.0;
}

std::string SyntheticAttackSpec::variant_name() const {
  std::string name = std::string(to_string(family)) + "-" + to_string(norm);
  if (adaptive.kind != Adaptive::Kind::None) name += "+" + adaptive.to_string();
  return name;
}

double perturbation_norm(const Image& x, const Image& clean, Norm norm) {
  if (x.dims() != clean.dims()) throw InvalidInput("perturbation_norm: dimension mismatch");
  std::vector<double> diff(x.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = x.value(i) - clean.value(i);
  return norm_of(diff, norm);
}

Image random_image(Dims dims, std::uint64_t seed) {
  if (dims.size() == 0) throw InvalidInput("random_image: empty dimensions");
  std::mt19937_64 rng(seed);
  return Image::quantize(dims, image_values(dims, rng));
}

QueryLog make_benign_log(std::size_t count, Dims dims, std::uint64_t seed) {
  QueryLog log;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i)
    log.append(static_cast<std::int64_t>(i), Image::quantize(dims, image_values(dims, rng)));
  return log;
}

MixedLog mix_into_log(const Trace& trace, const QueryLog& benign, std::uint64_t seed) {
  const std::size_t total = trace.size() + benign.size();
  std::vector<bool> is_attack(total, false);
  std::vector<std::size_t> slots(total);
  for (std::size_t i = 0; i < total; ++i) slots[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(slots.begin(), slots.end(), rng);
  for (std::size_t i = 0; i < trace.size(); ++i) is_attack[slots[i]] = true;
  MixedLog out;
  std::size_t a = 0, b = 0;
  for (std::size_t i = 0; i < total; ++i) {
    if (is_attack[i]) {
      out.attack_indices.push_back(i);
      out.log.append(static_cast<std::int64_t>(i), trace.queries[a++]);
    } else {
      out.log.append(static_cast<std::int64_t>(i), benign[b++].image);
    }
  }
  return out;
}

std::vector<SyntheticAttackSpec> attack_catalog() {
  std::vector<SyntheticAttackSpec> out;
  auto add = [&](AttackFamily f, Norm n) {
    SyntheticAttackSpec s;
    s.family = f;
    s.norm = n;
    out.push_back(s);
  };
  add(AttackFamily::GaussGrad, Norm::L2);
  add(AttackFamily::GaussGrad, Norm::Linf);
  add(AttackFamily::SubspaceNoise, Norm::L2);
  add(AttackFamily::SubspaceNoise, Norm::Linf);
  add(AttackFamily::BlockPattern, Norm::L2);
  add(AttackFamily::BlockPattern, Norm::Linf);
  add(AttackFamily::RaySearch, Norm::Linf);
  add(AttackFamily::SignStep, Norm::L2);
  add(AttackFamily::BoundaryWalk, Norm::L2);
  add(AttackFamily::EvoGrad, Norm::L2);
  add(AttackFamily::EvoGrad, Norm::Linf);
  return out;
}

LabeledTrace simulate(const SyntheticAttackSpec& spec, const Image& clean) {
  if (!(spec.budget() > 0.0) || !std::isfinite(spec.budget())) throw InvalidInput("simulate: epsilon must be positive");
  if (spec.max_queries < 2) throw InvalidInput("simulate: max_queries must be at least 2");
  if (clean.size() == 0) throw InvalidInput("simulate: empty clean image");
  if (clean.dims().height < kTile || clean.dims().width < 2 * kTile)
    throw InvalidInput("simulate: clean image too small");

  const Adaptive::Kind kind = spec.adaptive.kind;
  Program P(spec, clean, spec.max_queries);
  switch (spec.family) {
    case AttackFamily::GaussGrad: run_gauss_grad(P); break;
    case AttackFamily::SubspaceNoise: run_subspace_noise(P); break;
    case AttackFamily::BlockPattern: run_block_pattern(P); break;
    case AttackFamily::RaySearch: run_ray_search(P); break;
    case AttackFamily::SignStep: run_sign_step(P); break;
    case AttackFamily::BoundaryWalk: run_boundary_walk(P); break;
    case AttackFamily::EvoGrad: run_evo_grad(P); break;
  }
  P.finish();

  LabeledTrace out;
  out.spec = spec;
  std::vector<Image>& q = P.queries;
  std::vector<std::string>& labels = P.labels;
  std::vector<Image> queries;
  std::vector<std::string> new_labels;
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  switch (kind) {
    case Adaptive::Kind::DuplicateBug:
      for (std::size_t i = 0; i < q.size(); ++i) {
        if (i > 0) new_labels.push_back(relabel(queries.back(), q[i], labels[i - 1]));
        queries.push_back(q[i]);
        new_labels.push_back("NULL");
        queries.push_back(q[i]);
      }
      break;
    case Adaptive::Kind::DummyNoise: {
      std::normal_distribution<double> normal(0.0, spec.adaptive.param);
      for (std::size_t i = 0; i < q.size(); ++i) {
        if (i > 0) {
          std::vector<double> x = q[i - 1].values();
          for (double& v : x) v = std::clamp(v + normal(rng), 0.0, 1.0);
          Image dummy = Image::quantize(q[i].dims(), x);
          new_labels.push_back(relabel(queries.back(), dummy, kDummyLabel));
          queries.push_back(std::move(dummy));
          new_labels.push_back(relabel(queries.back(), q[i], labels[i - 1]));
        }
        queries.push_back(q[i]);
      }
      break;
    }
    case Adaptive::Kind::Rotation: {
      std::uniform_real_distribution<double> angle(-spec.adaptive.param, spec.adaptive.param);
      for (std::size_t i = 0; i < q.size(); ++i) {
        Image r = rotate(q[i], angle(rng));
        if (i > 0) new_labels.push_back(relabel(queries.back(), r, labels[i - 1]));
        queries.push_back(std::move(r));
      }
      break;
    }
    default:
      queries = std::move(q);
      new_labels = std::move(labels);
  }
  out.trace.queries = std::move(queries);
  out.trace.log_indices.assign(out.trace.queries.size(), std::nullopt);
  out.labels = std::move(new_labels);
  return out;
}

ProcedureDB reference_procedures(const std::vector<LabeledTrace>& traces, double binarize_factor, const KdeConfig& kde) {
  std::map<std::string, std::vector<Delta>> by_label;
  for (const LabeledTrace& lt : traces) {
    const auto& q = lt.trace.queries;
    for (std::size_t i = 0; i + 1 < q.size() && i < lt.labels.size(); ++i) {
      const std::string& label = lt.labels[i];
      if (label.size() < 2 || (label[0] != 'N' && label[0] != 'P') || !std::isdigit(static_cast<unsigned char>(label[1])))
        continue;
      by_label[label].push_back(Delta::between(q[i], q[i + 1]));
    }
  }
  ProcedureDB db = ProcedureDB::with_generics();
  db.set_binarize_factor(binarize_factor);
  for (auto& [label, deltas] : by_label) {
    if (label[0] == 'N') {
      db.add(Procedure::noise_procedure(label, estimate_noise_pmf(deltas, kde)));
    } else {
      try {
        db.add(Procedure::pattern_procedure(label, extract_template(deltas, binarize_factor).mask));
      } catch (const DegenerateTemplate&) {
      }
    }
  }
  return db;
}

}  // namespace sea

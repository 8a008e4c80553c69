#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <vector>

#include "sea/hmm.hpp"
#include "sea/signal.hpp"

namespace sea::test {

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline Image random_levels(std::mt19937_64& rng, Dims dims) {
  std::uniform_int_distribution<int> u(0, 255);
  std::vector<std::uint8_t> levels(dims.size());
  for (auto& l : levels) l = static_cast<std::uint8_t>(u(rng));
  return Image(dims, std::move(levels));
}

/// Delta with integer level differences drawn uniformly from [-k, k].
inline Delta random_delta(std::mt19937_64& rng, Dims dims, int k) {
  std::uniform_int_distribution<int> u(-k, k);
  std::vector<double> v(dims.size());
  for (double& x : v) x = u(rng) / 255.0;
  return Delta(dims, std::move(v));
}

inline double pearson_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(da * db);
}

/// O(n^4) DFT power, averaged over channels, same layout as psd2.
inline std::vector<double> naive_psd(const Delta& d) {
  const Dims& dims = d.dims();
  const std::size_t h = dims.height, w = dims.width, c = dims.channels;
  std::vector<double> out(h * w, 0.0);
  const double two_pi = 2.0 * std::acos(-1.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t u = 0; u < h; ++u)
      for (std::size_t v = 0; v < w; ++v) {
        std::complex<double> acc = 0;
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            double phase = -two_pi * (double(u * y) / h + double(v * x) / w);
            acc += d[(y * w + x) * c + ch] * std::polar(1.0, phase);
          }
        out[u * w + v] += std::norm(acc) / c;
      }
  return out;
}

/// Random row-stochastic matrix; some entries are zero when sparse is set.
inline TransitionMatrix random_transition(std::mt19937_64& rng, std::size_t m, bool sparse = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> a(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    double total = 0;
    for (std::size_t j = 0; j < m; ++j) {
      double v = u(rng);
      if (sparse && j != i && u(rng) < 0.3) v = 0.0;
      total += (a[i * m + j] = v);
    }
    for (std::size_t j = 0; j < m; ++j) a[i * m + j] /= total;
  }
  return TransitionMatrix(m, std::move(a));
}

inline LogEmissionTable random_table(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::uniform_real_distribution<double> u(-30.0, 0.0);
  LogEmissionTable t(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) t(i, j) = u(rng);
  return t;
}

/// Calls f(path) for every state sequence of length n over m states.
template <typename F>
void for_each_path(std::size_t n, std::size_t m, F&& f) {
  std::vector<std::size_t> path(n, 0);
  while (true) {
    f(path);
    std::size_t k = 0;
    while (k < n && ++path[k] == m) path[k++] = 0;
    if (k == n) return;
  }
}

inline double path_log_prob(const LogEmissionTable& t, const TransitionMatrix& a, const std::vector<std::size_t>& path) {
  double lp = -std::log(static_cast<double>(a.size())) + t(0, path[0]);
  for (std::size_t i = 1; i < path.size(); ++i) lp += std::log(a(path[i - 1], path[i])) + t(i, path[i]);
  return lp;
}

inline double brute_force_likelihood(const LogEmissionTable& t, const TransitionMatrix& a) {
  double max = -std::numeric_limits<double>::infinity();
  std::vector<double> all;
  for_each_path(t.steps(), a.size(), [&](const std::vector<std::size_t>& p) {
    all.push_back(path_log_prob(t, a, p));
    max = std::max(max, all.back());
  });
  if (std::isinf(max)) return max;
  double acc = 0;
  for (double v : all) acc += std::exp(v - max);
  return max + std::log(acc);
}

/// Most probable path; among equal paths the one whose reversed sequence is
/// lexicographically smallest.
inline std::vector<std::size_t> brute_force_viterbi(const LogEmissionTable& t, const TransitionMatrix& a) {
  std::vector<std::size_t> best;
  double best_lp = -std::numeric_limits<double>::infinity();
  for_each_path(t.steps(), a.size(), [&](const std::vector<std::size_t>& p) {
    double lp = path_log_prob(t, a, p);
    bool better = best.empty() || lp > best_lp;
    if (!better && lp == best_lp)
      better = std::lexicographical_compare(p.rbegin(), p.rend(), best.rbegin(), best.rend());
    if (better) {
      best = p;
      best_lp = lp;
    }
  });
  return best;
}

/// Samples a chain from a (uniform start) and emits unit Gaussian observations
/// with state means 0, spacing, 2 spacing, ...; returns the log-emission table.
inline LogEmissionTable sample_gaussian_chain(std::mt19937_64& rng, const TransitionMatrix& a, std::size_t n,
                                              std::vector<std::size_t>* states = nullptr, double spacing = 3.0) {
  const std::size_t m = a.size();
  std::uniform_int_distribution<std::size_t> start(0, m - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LogEmissionTable t(n, m);
  std::size_t s = start(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      double r = u(rng), c = 0;
      std::size_t next = m - 1;
      for (std::size_t j = 0; j < m; ++j)
        if (r < (c += a(s, j))) {
          next = j;
          break;
        }
      s = next;
    }
    if (states) states->push_back(s);
    double y = spacing * static_cast<double>(s) + noise(rng);
    for (std::size_t j = 0; j < m; ++j) {
      double z = y - spacing * static_cast<double>(j);
      t(i, j) = -0.5 * z * z - 0.5 * std::log(2 * std::acos(-1.0));
    }
  }
  return t;
}

}  // namespace sea::test

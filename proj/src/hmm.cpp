#include "sea/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "sea/error.hpp"

namespace sea {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool any_pattern(const ProcedureDB& db) {
  return std::any_of(db.procedures().begin(), db.procedures().end(),
                     [](const Procedure& p) { return p.kind == ProcedureKind::Pattern; });
}

void require_compatible(const LogEmissionTable& table, const TransitionMatrix& a) {
  if (table.states() != a.size()) throw InvalidInput("transition matrix does not match the procedure count");
  if (table.states() == 0) throw InvalidInput("no procedure states");
  if (table.steps() == 0) throw InvalidInput("observation sequence is empty");
}

// Emissions of one step rescaled by their maximum: e[j] = exp(log_e[j] - max).
double scaled_emissions(std::span<const double> log_e, std::vector<double>& e) {
  double mx = *std::max_element(log_e.begin(), log_e.end());
  for (std::size_t j = 0; j < log_e.size(); ++j) e[j] = std::exp(log_e[j] - mx);
  return mx;
}

struct ForwardPass {
  std::vector<double> alpha;  // n x m, each row normalized
  std::vector<double> scale;  // log normalizer per step, including the emission max
  double log_likelihood = 0.0;
};

ForwardPass forward_pass(const LogEmissionTable& table, const TransitionMatrix& a, bool keep_all) {
  const std::size_t n = table.steps(), m = table.states();
  ForwardPass fp;
  fp.alpha.assign(keep_all ? n * m : 2 * m, 0.0);
  fp.scale.assign(n, 0.0);
  std::vector<double> e(m), pred(m);
  auto row = [&](std::size_t t) { return fp.alpha.data() + (keep_all ? t : t % 2) * m; };

  for (std::size_t t = 0; t < n; ++t) {
    double mx = scaled_emissions(table.row(t), e);
    double* cur = row(t);
    if (t == 0) {
      std::fill(pred.begin(), pred.end(), 1.0 / static_cast<double>(m));
    } else {
      const double* prev = row(t - 1);
      std::fill(pred.begin(), pred.end(), 0.0);
      for (std::size_t k = 0; k < m; ++k) {
        if (prev[k] == 0.0) continue;
        for (std::size_t j = 0; j < m; ++j) pred[j] += prev[k] * a(k, j);
      }
    }
    double c = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      cur[j] = pred[j] * e[j];
      c += cur[j];
    }
    if (!(c > 0.0)) {
      // Every reachable state's emission underflowed relative to the maximum;
      // recompute this step in the log domain.
      std::vector<double> la(m);
      for (std::size_t j = 0; j < m; ++j)
        la[j] = pred[j] > 0.0 ? std::log(pred[j]) + table(t, j) : kNegInf;
      double lc = log_sum_exp(la);
      for (std::size_t j = 0; j < m; ++j) cur[j] = std::exp(la[j] - lc);
      fp.scale[t] = lc;
    } else {
      for (std::size_t j = 0; j < m; ++j) cur[j] /= c;
      fp.scale[t] = std::log(c) + mx;
    }
    fp.log_likelihood += fp.scale[t];
  }
  return fp;
}

}  // namespace

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return kNegInf;
  double mx = *std::max_element(xs.begin(), xs.end());
  if (mx == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

TransitionMatrix::TransitionMatrix(std::size_t m, std::vector<double> entries) : m_(m), a_(std::move(entries)) {
  if (m_ == 0) throw InvalidInput("transition matrix must have at least one state");
  if (a_.size() != m_ * m_) throw InvalidInput("transition matrix entries do not form an m x m matrix");
  for (std::size_t i = 0; i < m_; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < m_; ++j) {
      double v = a_[i * m_ + j];
      if (!(v >= 0.0)) throw InvalidInput("transition matrix entries must be non-negative");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("transition matrix rows must sum to 1");
  }
}

TransitionMatrix TransitionMatrix::uniform(std::size_t m) {
  return TransitionMatrix(m, std::vector<double>(m * m, 1.0 / static_cast<double>(m)));
}

TransitionMatrix TransitionMatrix::jittered(std::size_t m, std::uint64_t seed, double alpha) {
  if (!(alpha > 0.0)) throw InvalidInput("Dirichlet concentration must be positive");
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> a(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) total += a[i * m + j] = gamma(rng);
    for (std::size_t j = 0; j < m; ++j) a[i * m + j] /= total;
  }
  return TransitionMatrix(m, std::move(a));
}

TransitionMatrix TransitionMatrix::padded(std::size_t m) const {
  if (m < m_) throw InvalidInput("cannot pad a transition matrix to fewer states");
  std::vector<double> a(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i < m_) {
        a[i * m + j] = j < m_ ? (*this)(i, j) : 0.0;
      } else {
        a[i * m + j] = 1.0 / static_cast<double>(m);
      }
    }
  }
  return TransitionMatrix(m, std::move(a));
}

TransitionMatrix TransitionMatrix::smoothed(double floor) const {
  const double m = static_cast<double>(m_);
  if (!(floor >= 0.0) || floor * m > 1.0) throw InvalidInput("smoothing floor must lie in [0, 1/m]");
  std::vector<double> a(a_);
  for (double& v : a) v = (1.0 - m * floor) * v + floor;
  return TransitionMatrix(m_, std::move(a));
}

TransitionMatrix TransitionMatrix::permuted(std::span<const std::size_t> order) const {
  if (order.size() != m_) throw InvalidInput("permutation size does not match the matrix");
  std::vector<double> a(m_ * m_);
  for (std::size_t i = 0; i < m_; ++i)
    for (std::size_t j = 0; j < m_; ++j) a[i * m_ + j] = (*this)(order[i], order[j]);
  return TransitionMatrix(m_, std::move(a));
}

ObservationSequence ObservationSequence::from_trace(const Trace& trace) {
  if (trace.size() < 2) throw InvalidInput("a trace needs at least two queries to yield an observation");
  ObservationSequence obs;
  obs.deltas.reserve(trace.size() - 1);
  for (std::size_t i = 0; i + 1 < trace.size(); ++i)
    obs.deltas.push_back(Delta::between(trace.queries[i], trace.queries[i + 1]));
  obs.adv = trace.adv();
  return obs;
}

LogEmissionTable::LogEmissionTable(std::size_t n, std::size_t m, std::vector<double> values)
    : n_(n), m_(m), v_(std::move(values)) {
  if (v_.size() != n_ * m_) throw InvalidInput("emission table size mismatch");
}

LogEmissionTable::LogEmissionTable(std::size_t n, std::size_t m) : n_(n), m_(m), v_(n * m, 0.0) {}

LogEmissionTable log_emissions(const ObservationSequence& obs, const ProcedureDB& db) {
  const std::size_t n = obs.size(), m = db.size();
  LogEmissionTable table(n, m);
  const bool spectrum = any_pattern(db);
  const std::vector<double> adv_z = adversarial_template(obs.adv);
  std::vector<DeltaFeatures> features;
  features.reserve(n);
  for (const Delta& d : obs.deltas) {
    if (d.dims() != obs.adv.dims()) throw InvalidInput("delta dimensions do not match the adversarial example");
    features.emplace_back(d, db.binarize_factor(), spectrum);
  }
  for (std::size_t t = 0; t < n; ++t) {
    const DeltaFeatures* prev = t > 0 ? &features[t - 1] : nullptr;
    for (std::size_t j = 0; j < m; ++j) table(t, j) = log_emission(db[j], features[t], prev, &adv_z);
  }
  return table;
}

double forward_log_likelihood(const LogEmissionTable& table, const TransitionMatrix& a) {
  require_compatible(table, a);
  return forward_pass(table, a, false).log_likelihood;
}

double forward_log_likelihood(const ObservationSequence& obs, const AttackModel& attack, const ProcedureDB& db) {
  return forward_log_likelihood(log_emissions(obs, db), attack.transition);
}

ViterbiPath viterbi(const LogEmissionTable& table, const TransitionMatrix& a) {
  require_compatible(table, a);
  const std::size_t n = table.steps(), m = table.states();
  std::vector<double> log_a(m * m);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t j = 0; j < m; ++j) log_a[k * m + j] = a(k, j) > 0.0 ? std::log(a(k, j)) : kNegInf;

  std::vector<double> score(m), next(m);
  std::vector<std::size_t> back(n * m, 0);
  const double log_init = -std::log(static_cast<double>(m));
  for (std::size_t j = 0; j < m; ++j) score[j] = log_init + table(0, j);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < m; ++j) {
      double best = kNegInf;
      std::size_t arg = 0;
      for (std::size_t k = 0; k < m; ++k) {
        double s = score[k] + log_a[k * m + j];
        if (s > best) {
          best = s;
          arg = k;
        }
      }
      next[j] = best + table(t, j);
      back[t * m + j] = arg;
    }
    score.swap(next);
  }
  ViterbiPath path;
  path.states.assign(n, 0);
  std::size_t last = 0;
  double best = kNegInf;
  for (std::size_t j = 0; j < m; ++j) {
    if (score[j] > best) {
      best = score[j];
      last = j;
    }
  }
  path.log_prob = best;
  path.states[n - 1] = last;
  for (std::size_t t = n - 1; t > 0; --t) path.states[t - 1] = back[t * m + path.states[t]];
  return path;
}

std::vector<std::string> viterbi_decode(const ObservationSequence& obs, const AttackModel& attack,
                                        const ProcedureDB& db) {
  ViterbiPath path = viterbi(log_emissions(obs, db), attack.transition);
  std::vector<std::string> ids;
  ids.reserve(path.states.size());
  for (std::size_t s : path.states) ids.push_back(db[s].id);
  return ids;
}

FitResult fit_transition(const LogEmissionTable& table, const TransitionMatrix& init, const FitOptions& opts) {
  require_compatible(table, init);
  if (opts.max_iters == 0) throw InvalidInput("max_iters must be at least 1");
  if (!(opts.pseudo_count >= 0.0)) throw InvalidInput("pseudo_count must be non-negative");
  const std::size_t n = table.steps(), m = table.states();

  FitResult result;
  TransitionMatrix a = init;
  std::vector<double> e_next(m), beta(m), beta_prev(m), counts(m * m);
  for (std::size_t iter = 0; iter < opts.max_iters; ++iter) {
    ForwardPass fp = forward_pass(table, a, true);
    result.log_likelihoods.push_back(fp.log_likelihood);

    // Backward pass with the forward normalizers; accumulate expected transitions.
    std::fill(counts.begin(), counts.end(), 0.0);
    std::fill(beta.begin(), beta.end(), 1.0);
    for (std::size_t t = n - 1; t > 0; --t) {
      // Emissions divided by the forward normalizer of step t.
      for (std::size_t j = 0; j < m; ++j) e_next[j] = std::exp(table(t, j) - fp.scale[t]);
      const double* alpha = fp.alpha.data() + (t - 1) * m;
      for (std::size_t k = 0; k < m; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          double w = a(k, j) * e_next[j] * beta[j];
          acc += w;
          counts[k * m + j] += alpha[k] * w;
        }
        beta_prev[k] = acc;
      }
      beta.swap(beta_prev);
    }

    std::vector<double> updated(m * m);
    for (double& c : counts) c += opts.pseudo_count;
    for (std::size_t k = 0; k < m; ++k) {
      double total = 0.0;
      for (std::size_t j = 0; j < m; ++j) total += counts[k * m + j];
      for (std::size_t j = 0; j < m; ++j)
        updated[k * m + j] = total > 1e-300 ? counts[k * m + j] / total : 1.0 / static_cast<double>(m);
      // Renormalize against rounding so the row sums to 1 within tolerance.
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += updated[k * m + j];
      for (std::size_t j = 0; j < m; ++j) updated[k * m + j] /= s;
    }
    a = TransitionMatrix(m, std::move(updated));

    std::size_t hist = result.log_likelihoods.size();
    if (hist >= 2) {
      double gain = result.log_likelihoods[hist - 1] - result.log_likelihoods[hist - 2];
      if (gain < opts.tol * static_cast<double>(n)) {
        result.converged = true;
        break;
      }
    }
  }
  result.transition = std::move(a);
  return result;
}

TransitionMatrix fit_transition(const ObservationSequence& obs, const ProcedureDB& db, const TransitionMatrix& init,
                                std::size_t max_iters, double tol) {
  return fit_transition(log_emissions(obs, db), init, FitOptions{max_iters, tol}).transition;
}

}  // namespace sea

#pragma once

// Log-space HMM inference over procedure states: forward likelihood, Viterbi
// decoding and Baum-Welch estimation of the transition matrix with frozen
// emissions. The initial state distribution is uniform.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sea/extraction.hpp"
#include "sea/procedures.hpp"

namespace sea {

/// Row-stochastic m x m matrix, row-major.
class TransitionMatrix {
 public:
  TransitionMatrix() = default;
  TransitionMatrix(std::size_t m, std::vector<double> entries);

  static TransitionMatrix uniform(std::size_t m);
  /// Rows drawn from a symmetric Dirichlet(alpha) with a fixed seed.
  static TransitionMatrix jittered(std::size_t m, std::uint64_t seed, double alpha = 10.0);

  std::size_t size() const { return m_; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * m_ + j]; }
  std::span<const double> flat() const { return a_; }

  /// Embeds into m' >= m states: new columns are zero, new rows uniform.
  TransitionMatrix padded(std::size_t m) const;
  /// (1 - m*floor) * A + floor: every transition gets probability at least floor.
  TransitionMatrix smoothed(double floor) const;
  /// Reorders states: result(i,j) = this(order[i], order[j]).
  TransitionMatrix permuted(std::span<const std::size_t> order) const;

 private:
  std::size_t m_ = 0;
  std::vector<double> a_;
};

struct AttackModel {
  std::string id;
  TransitionMatrix transition;
};

/// Per-query changes of a trace; deltas[i] = x_{i+1} - x_i.
struct ObservationSequence {
  std::vector<Delta> deltas;
  Image adv;

  static ObservationSequence from_trace(const Trace& trace);
  std::size_t size() const { return deltas.size(); }
};

/// Log-emission of every procedure for every observation (n rows, m columns).
class LogEmissionTable {
 public:
  LogEmissionTable() = default;
  LogEmissionTable(std::size_t n, std::size_t m, std::vector<double> values);
  LogEmissionTable(std::size_t n, std::size_t m);

  std::size_t steps() const { return n_; }
  std::size_t states() const { return m_; }
  double operator()(std::size_t t, std::size_t j) const { return v_[t * m_ + j]; }
  double& operator()(std::size_t t, std::size_t j) { return v_[t * m_ + j]; }
  std::span<const double> row(std::size_t t) const { return {v_.data() + t * m_, m_}; }

 private:
  std::size_t n_ = 0, m_ = 0;
  std::vector<double> v_;
};

LogEmissionTable log_emissions(const ObservationSequence& obs, const ProcedureDB& db);

double forward_log_likelihood(const LogEmissionTable& table, const TransitionMatrix& a);
double forward_log_likelihood(const ObservationSequence& obs, const AttackModel& attack, const ProcedureDB& db);

struct ViterbiPath {
  std::vector<std::size_t> states;
  double log_prob = 0.0;  // joint log-probability of the path and the observations
};

/// Ties prefer the lowest state index, resolved from the last step backward.
ViterbiPath viterbi(const LogEmissionTable& table, const TransitionMatrix& a);
std::vector<std::string> viterbi_decode(const ObservationSequence& obs, const AttackModel& attack,
                                        const ProcedureDB& db);

struct FitOptions {
  std::size_t max_iters = 100;
  double tol = 1e-4;  // per-observation log-likelihood improvement
  /// Added to every expected transition count in the M-step (MAP under a
  /// symmetric Dirichlet prior). Zero gives plain maximum likelihood.
  double pseudo_count = 0.0;
};

struct FitResult {
  TransitionMatrix transition;
  std::vector<double> log_likelihoods;  // one entry per E-step, non-decreasing
  bool converged = false;
};

FitResult fit_transition(const LogEmissionTable& table, const TransitionMatrix& init, const FitOptions& opts = {});
TransitionMatrix fit_transition(const ObservationSequence& obs, const ProcedureDB& db, const TransitionMatrix& init,
                                std::size_t max_iters = 100, double tol = 1e-4);

/// Log of sum of exponentials; -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> xs);

}  // namespace sea

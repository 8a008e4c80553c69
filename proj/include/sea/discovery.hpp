#pragma once

// Enrolling an unseen attack from one trace: segment-and-merge clustering of
// the per-query changes in spectrum space, noise/pattern classification,
// emission estimation, gain-gated procedure enrollment and transition fitting.

#include <optional>
#include <string>
#include <vector>

#include "sea/attribution.hpp"
#include "sea/fingerprint.hpp"

namespace sea {

struct Cluster {
  std::vector<std::size_t> member_indices;  // delta indices, increasing
  std::vector<Delta> deltas;
};

struct DiscoveryConfig {
  double tau_segment = 500.0;
  double tau_merge = 250.0;
  double gain_threshold = 0.10;
  double binarize_factor = 3.0;
  /// Smaller clusters are left to the existing procedures.
  std::size_t min_cluster_size = 5;
  /// Maximum mask size for a noise cluster; unset means 1% of spectral bins.
  std::optional<std::size_t> noise_l0_threshold;
  KdeConfig kde;
  FitConfig fit;

  std::size_t l0_threshold(std::size_t bins) const;
};

enum class ClusterClass { Noise, Pattern, NullLike };
const char* to_string(ClusterClass c);

/// psd2 of the change in 8-bit levels per pixel: white noise of sd s levels
/// has mean power s^2 in every bin. Segmentation thresholds apply on this scale.
Spectrum level_spectrum(const Delta& delta);

std::vector<Cluster> segment_and_merge(const ObservationSequence& obs, const DiscoveryConfig& cfg);
ClusterClass classify_cluster(const Cluster& cluster, const DiscoveryConfig& cfg);

struct GainResult {
  double raw = 1.0;              // (1 - P(C|candidate)) / (1 - max_P P(C|P))
  double log_p_candidate = 0.0;  // per-pixel geometric-mean log-probability
  double log_p_best = 0.0;
  double improvement = 1.0;      // P(C|candidate) / max_P P(C|P)
  std::string best_existing;
  bool enroll = false;           // improvement > 1 + gain_threshold
};

/// Gain ratio from per-pixel geometric-mean log-probabilities.
double gain_from_log_probs(double log_p_candidate, double log_p_best);

/// Scores the candidate and every procedure of pdb on the cluster's deltas,
/// with their trace context (previous delta, adversarial example) from obs.
GainResult gain(const Cluster& cluster, const Procedure& candidate, const ProcedureDB& pdb,
                const ObservationSequence& obs, double gain_threshold = 0.10);

struct CandidateReport {
  std::string id;
  ClusterClass cls = ClusterClass::Noise;
  std::size_t cluster_size = 0;
  GainResult gain;
};

struct EnrollmentResult {
  ProcedureDB pdb;
  AttackDB adb;
  Fingerprint fingerprint;
  std::vector<std::string> new_procedures;
  std::vector<CandidateReport> candidates;
};

EnrollmentResult enroll_attack(const Trace& trace, const ProcedureDB& pdb, const AttackDB& adb,
                               const DiscoveryConfig& cfg, const std::string& id);

/// Next free id of the form <prefix><counter>.
std::string next_procedure_id(const ProcedureDB& pdb, const std::string& prefix);

}  // namespace sea

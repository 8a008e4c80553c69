#include "sea/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sea/error.hpp"

namespace sea {

namespace {

std::vector<double> mean_power(const std::vector<const Spectrum*>& spectra) {
  std::vector<double> mean(spectra.front()->power.size(), 0.0);
  for (const Spectrum* s : spectra)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += s->power[i];
  for (double& v : mean) v /= static_cast<double>(spectra.size());
  return mean;
}

// Per-pixel geometric mean of P(delta | proc) over the cluster, in log space.
double cluster_log_prob(const Cluster& cluster, const Procedure& proc, const ObservationSequence& obs,
                        const std::vector<DeltaFeatures>& features, const std::vector<double>& adv_z) {
  double acc = 0.0;
  for (std::size_t k = 0; k < cluster.member_indices.size(); ++k) {
    std::size_t i = cluster.member_indices[k];
    const DeltaFeatures* prev = i > 0 ? &features[i - 1] : nullptr;
    acc += log_emission(proc, features[i], prev, &adv_z);
  }
  double d = static_cast<double>(obs.deltas.front().size());
  return acc / (static_cast<double>(cluster.member_indices.size()) * d);
}

constexpr double kExplainedMatch = 0.9;

}  // namespace

Spectrum level_spectrum(const Delta& delta) {
  Spectrum s = psd2(delta);
  const double scale = 255.0 * 255.0 / static_cast<double>(s.height * s.width);
  for (double& p : s.power) p *= scale;
  return s;
}

std::size_t DiscoveryConfig::l0_threshold(std::size_t bins) const {
  if (noise_l0_threshold) return *noise_l0_threshold;
  return bins / 100;
}

const char* to_string(ClusterClass c) {
  switch (c) {
    case ClusterClass::Noise: return "noise";
    case ClusterClass::Pattern: return "pattern";
    case ClusterClass::NullLike: return "null-like";
  }
  return "?";
}

std::vector<Cluster> segment_and_merge(const ObservationSequence& obs, const DiscoveryConfig& cfg) {
  const std::size_t n = obs.size();
  if (n == 0) throw InvalidInput("segment_and_merge: empty observation sequence");
  std::vector<Spectrum> spectra;
  spectra.reserve(n);
  for (const Delta& d : obs.deltas) spectra.push_back(level_spectrum(d));

  // Segment: cut after step i when the next change differs too much.
  std::vector<std::vector<std::size_t>> segments(1);
  for (std::size_t i = 0; i < n; ++i) {
    segments.back().push_back(i);
    if (i + 1 < n && mse(spectra[i].power, spectra[i + 1].power) > cfg.tau_segment) segments.emplace_back();
  }

  // Merge: each segment joins the closest earlier cluster when their means are close.
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::vector<double>> cluster_means;
  auto mean_of = [&](const std::vector<std::size_t>& idx) {
    std::vector<const Spectrum*> ptrs;
    for (std::size_t i : idx) ptrs.push_back(&spectra[i]);
    return mean_power(ptrs);
  };
  for (const auto& segment : segments) {
    std::vector<double> seg_mean = mean_of(segment);
    std::size_t best = 0;
    double best_mse = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      double e = mse(seg_mean, cluster_means[c]);
      if (e < best_mse) {
        best_mse = e;
        best = c;
      }
    }
    if (!clusters.empty() && best_mse < cfg.tau_merge) {
      auto& members = clusters[best];
      members.insert(members.end(), segment.begin(), segment.end());
      std::sort(members.begin(), members.end());
      cluster_means[best] = mean_of(members);
    } else {
      clusters.push_back(segment);
      cluster_means.push_back(std::move(seg_mean));
    }
  }

  std::vector<Cluster> out;
  out.reserve(clusters.size());
  for (auto& members : clusters) {
    Cluster c;
    c.member_indices = members;
    for (std::size_t i : members) c.deltas.push_back(obs.deltas[i]);
    out.push_back(std::move(c));
  }
  return out;
}

ClusterClass classify_cluster(const Cluster& cluster, const DiscoveryConfig& cfg) {
  if (cluster.deltas.empty()) throw InvalidInput("classify_cluster: empty cluster");
  if (std::all_of(cluster.deltas.begin(), cluster.deltas.end(), [](const Delta& d) { return d.is_zero(); }))
    return ClusterClass::NullLike;
  Spectrum mean = psd2(cluster.deltas.front());
  for (std::size_t k = 1; k < cluster.deltas.size(); ++k) {
    Spectrum s = psd2(cluster.deltas[k]);
    for (std::size_t i = 0; i < s.power.size(); ++i) mean.power[i] += s.power[i];
  }
  for (double& p : mean.power) p /= static_cast<double>(cluster.deltas.size());
  std::size_t l0 = binarize(mean, cfg.binarize_factor).count();
  return l0 <= cfg.l0_threshold(mean.power.size()) ? ClusterClass::Noise : ClusterClass::Pattern;
}

double gain_from_log_probs(double log_p_candidate, double log_p_best) {
  // 1 - exp(x) computed as -expm1(x) to keep precision near x = 0.
  double miss_candidate = -std::expm1(log_p_candidate);
  double miss_best = -std::expm1(log_p_best);
  if (miss_best <= 0.0) return miss_candidate <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return miss_candidate / miss_best;
}

GainResult gain(const Cluster& cluster, const Procedure& candidate, const ProcedureDB& pdb,
                const ObservationSequence& obs, double gain_threshold) {
  if (cluster.member_indices.empty()) throw InvalidInput("gain: empty cluster");
  bool spectrum = candidate.kind == ProcedureKind::Pattern;
  for (const auto& p : pdb.procedures()) spectrum = spectrum || p.kind == ProcedureKind::Pattern;
  // Features for the members and their predecessors only.
  std::vector<DeltaFeatures> features;
  features.reserve(obs.size());
  std::vector<bool> needed(obs.size(), false);
  for (std::size_t i : cluster.member_indices) {
    needed[i] = true;
    if (i > 0) needed[i - 1] = true;
  }
  for (std::size_t i = 0; i < obs.size(); ++i)
    features.emplace_back(obs.deltas[i], pdb.binarize_factor(), spectrum && needed[i]);
  std::vector<double> adv_z = adversarial_template(obs.adv);

  GainResult result;
  result.log_p_candidate = cluster_log_prob(cluster, candidate, obs, features, adv_z);
  result.log_p_best = -std::numeric_limits<double>::infinity();
  for (const auto& p : pdb.procedures()) {
    double lp = cluster_log_prob(cluster, p, obs, features, adv_z);
    if (lp > result.log_p_best) {
      result.log_p_best = lp;
      result.best_existing = p.id;
    }
  }
  result.raw = gain_from_log_probs(result.log_p_candidate, result.log_p_best);
  result.improvement = std::exp(result.log_p_candidate - result.log_p_best);
  result.enroll = result.improvement > 1.0 + gain_threshold;
  return result;
}

std::string next_procedure_id(const ProcedureDB& pdb, const std::string& prefix) {
  int counter = 0;
  for (const auto& id : pdb.ids()) {
    if (id.size() <= prefix.size() || id.compare(0, prefix.size(), prefix) != 0) continue;
    std::string rest = id.substr(prefix.size());
    if (!std::all_of(rest.begin(), rest.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    counter = std::max(counter, std::stoi(rest));
  }
  return prefix + std::to_string(counter + 1);
}

EnrollmentResult enroll_attack(const Trace& trace, const ProcedureDB& pdb, const AttackDB& adb,
                               const DiscoveryConfig& cfg, const std::string& id) {
  if (id.empty()) throw InvalidInput("enroll_attack: attack id must not be empty");
  if (adb.index_of(id)) throw InvalidInput("enroll_attack: attack '" + id + "' is already enrolled");
  if (trace.size() < 2) throw InvalidInput("enroll_attack: trace needs at least two queries");

  EnrollmentResult result{pdb, adb, {}, {}, {}};
  ObservationSequence obs = ObservationSequence::from_trace(trace);
  // Undersized clusters are pooled into one residual candidate, leaving out
  // changes an existing procedure already matches closely.
  const std::vector<double> adv_z = adversarial_template(obs.adv);
  auto well_explained = [&](std::size_t i) {
    DeltaFeatures f(obs.deltas[i], result.pdb.binarize_factor());
    std::optional<DeltaFeatures> prev;
    if (i > 0) prev.emplace(obs.deltas[i - 1], result.pdb.binarize_factor());
    for (const auto& p : result.pdb.procedures())
      if (match_score(p, f, prev ? &*prev : nullptr, &adv_z) >= kExplainedMatch) return true;
    return false;
  };
  std::vector<std::pair<Cluster, ClusterClass>> work;
  Cluster residual;
  for (Cluster& cluster : segment_and_merge(obs, cfg)) {
    ClusterClass cls = classify_cluster(cluster, cfg);
    if (cls == ClusterClass::NullLike) continue;
    if (cluster.member_indices.size() >= cfg.min_cluster_size) {
      work.emplace_back(std::move(cluster), cls);
      continue;
    }
    for (std::size_t i : cluster.member_indices)
      if (!obs.deltas[i].is_zero() && !well_explained(i)) residual.member_indices.push_back(i);
  }
  if (residual.member_indices.size() >= cfg.min_cluster_size) {
    std::sort(residual.member_indices.begin(), residual.member_indices.end());
    for (std::size_t i : residual.member_indices) residual.deltas.push_back(obs.deltas[i]);
    ClusterClass cls = classify_cluster(residual, cfg);
    work.emplace_back(std::move(residual), cls);
  }

  for (const auto& [cluster, cls] : work) {
    std::optional<Procedure> candidate;
    if (cls == ClusterClass::Noise) {
      candidate = Procedure::noise_procedure(next_procedure_id(result.pdb, "N"),
                                             estimate_noise_pmf(cluster.deltas, cfg.kde));
    } else {
      try {
        PatternModel model = extract_template(cluster.deltas, cfg.binarize_factor);
        candidate = Procedure::pattern_procedure(next_procedure_id(result.pdb, "P"), std::move(model.mask));
      } catch (const DegenerateTemplate&) {
        continue;
      }
    }
    GainResult g = gain(cluster, *candidate, result.pdb, obs, cfg.gain_threshold);
    result.candidates.push_back({candidate->id, cls, cluster.member_indices.size(), g});
    if (g.enroll) {
      result.new_procedures.push_back(candidate->id);
      result.pdb.add(std::move(*candidate));
    }
  }

  result.adb.pad_to(result.pdb.size());
  LogEmissionTable table = log_emissions(obs, result.pdb);
  result.fingerprint = fingerprint_observations(table, result.pdb, id + "-enrollment", cfg.fit);
  result.fingerprint.attack_id = id;
  result.fingerprint.dims = trace.adv().dims();
  result.adb.add({id, result.fingerprint.matrix});
  return result;
}

}  // namespace sea

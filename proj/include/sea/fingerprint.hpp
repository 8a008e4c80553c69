#pragma once

// Shareable per-incident fingerprints (fitted transition matrices) and
// matching against per-attack average fingerprints.

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "sea/hmm.hpp"

namespace sea {

inline constexpr std::uint64_t kDefaultFitSeed = 0x5ea5eedULL;
inline constexpr const char* kUnknownAttack = "unknown";

struct Fingerprint {
  TransitionMatrix matrix;
  std::string attack_id = kUnknownAttack;
  std::string incident_id;
  std::vector<std::string> procedure_order;  // row/column meaning of matrix
  std::string created_at;                    // ISO-8601 UTC
  std::size_t trace_length = 0;
  Dims dims;

  /// Row-major over procedure_order.
  std::vector<double> flatten() const;
  /// Same fingerprint with rows/columns reordered to `order`; the procedure sets must agree.
  Fingerprint aligned_to(const std::vector<std::string>& order) const;
};

class FingerprintDB {
 public:
  void add(Fingerprint fp);
  std::size_t size() const { return fingerprints_.size(); }
  bool empty() const { return fingerprints_.empty(); }
  const std::vector<Fingerprint>& fingerprints() const { return fingerprints_; }
  /// Attack ids with at least one fingerprint, sorted.
  std::vector<std::string> attack_ids() const;

 private:
  std::vector<Fingerprint> fingerprints_;
};

/// Dirichlet pseudo-count for fingerprint fits: rarely visited states stay
/// close to a uniform row instead of copying one or two transitions.
inline constexpr double kFingerprintPseudoCount = 1.0;

struct FitConfig {
  std::uint64_t seed = kDefaultFitSeed;
  FitOptions options{.pseudo_count = kFingerprintPseudoCount};
};

Fingerprint fingerprint_trace(const Trace& trace, const ProcedureDB& pdb, std::string incident_id,
                              const FitConfig& cfg = {});
Fingerprint fingerprint_observations(const LogEmissionTable& table, const ProcedureDB& pdb, std::string incident_id,
                                     const FitConfig& cfg = {});

struct FingerprintMatch {
  std::string attack_id;
  double similarity = 0.0;
};

/// Cosine similarity against each attack's mean fingerprint, descending, ties by id.
std::vector<FingerprintMatch> match_fingerprint(const Fingerprint& fp, const FingerprintDB& db);

nlohmann::json to_json(const Fingerprint& fp);
Fingerprint fingerprint_from_json(const nlohmann::json& j);
nlohmann::json to_json(const std::vector<FingerprintMatch>& ranking);

std::string utc_timestamp();

}  // namespace sea

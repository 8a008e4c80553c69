#pragma once

// Attack attribution by HMM model selection and per-query explanation by
// Viterbi decoding.

#include <json.hpp>

#include <string>
#include <vector>

#include "sea/hmm.hpp"

namespace sea {

class AttackDB {
 public:
  void add(AttackModel attack);
  std::size_t size() const { return attacks_.size(); }
  bool empty() const { return attacks_.empty(); }
  const AttackModel& operator[](std::size_t i) const { return attacks_[i]; }
  const std::vector<AttackModel>& attacks() const { return attacks_; }
  std::optional<std::size_t> index_of(const std::string& id) const;
  /// Extends every transition matrix to m states (see TransitionMatrix::padded).
  void pad_to(std::size_t m);

 private:
  std::vector<AttackModel> attacks_;
};

struct RankedAttack {
  std::string id;
  double log_likelihood = 0.0;
};

struct TimelineEntry {
  std::size_t delta_index = 0;  // explains x_{i+1} - x_i
  std::size_t query_index = 0;  // i + 1, the query the procedure produced
  std::string procedure;
  double log_emission = 0.0;
};

struct AttributionReport {
  std::vector<RankedAttack> ranking;  // descending likelihood, ties by id
  std::vector<TimelineEntry> decoded;  // Viterbi path under the top-ranked attack
  std::size_t trace_length = 0;
  Dims dims;

  const std::string& top() const { return ranking.front().id; }
  /// 1-based rank of the attack, or 0 when absent.
  std::size_t rank_of(const std::string& id) const;
};

/// Transitions never seen while fitting an attack keep this probability when scoring.
inline constexpr double kTransitionFloor = 1e-4;

AttributionReport attribute(const Trace& trace, const AttackDB& adb, const ProcedureDB& pdb);
/// Attribution from a precomputed emission table (shared across attacks).
AttributionReport attribute(const LogEmissionTable& table, const AttackDB& adb, const ProcedureDB& pdb,
                            bool decode = true);

std::vector<TimelineEntry> explain(const Trace& trace, const AttackModel& attack, const ProcedureDB& pdb);
std::vector<TimelineEntry> explain(const LogEmissionTable& table, const AttackModel& attack, const ProcedureDB& pdb);

nlohmann::json to_json(const AttributionReport& report, std::size_t topk = 3);
/// One row per decoded query: index, procedure id, per-step log-emission.
std::string render_timeline(const std::vector<TimelineEntry>& timeline);

nlohmann::json to_json(const AttackDB& adb, const ProcedureDB& pdb);
/// Matrices stored over fewer procedures than pdb holds are padded.
AttackDB attack_db_from_json(const nlohmann::json& j, const ProcedureDB& pdb);

}  // namespace sea

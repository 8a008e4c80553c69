#pragma once

// Emission models for the hidden procedures of an attack and the database
// that holds them.

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sea/signal.hpp"

namespace sea {

enum class ProcedureKind { Null, Noise, Pattern, LineSearch, Interpolation };

const char* to_string(ProcedureKind kind);
ProcedureKind procedure_kind_from_string(const std::string& s);

/// i.i.d. per-pixel distribution over the 511 quantized difference levels.
class NoiseModel {
 public:
  NoiseModel() = default;
  /// Validates that the table has 511 positive entries summing to 1 (within 1e-9).
  explicit NoiseModel(std::vector<double> pmf);
  static NoiseModel uniform();

  const std::vector<double>& pmf() const { return pmf_; }
  double log_prob(int level_index) const { return log_pmf_[static_cast<std::size_t>(level_index)]; }

 private:
  std::vector<double> pmf_;
  std::vector<double> log_pmf_;
};

struct PatternModel {
  enum class Source { Spectral, AdversarialExample };
  Source source = Source::Spectral;
  Mask mask;  // binarized spectral template; empty for AdversarialExample
  std::vector<double> mask_z;  // standardized mask, filled by Procedure::pattern_procedure
};

struct Procedure {
  std::string id;
  ProcedureKind kind = ProcedureKind::Null;
  std::optional<NoiseModel> noise;
  std::optional<PatternModel> pattern;

  /// 2 for procedures whose emission reads the previous delta too.
  int context_arity() const { return kind == ProcedureKind::LineSearch ? 2 : 1; }

  static Procedure null_procedure();
  static Procedure line_search();
  static Procedure interpolation();
  static Procedure noise_procedure(std::string id, NoiseModel model);
  static Procedure pattern_procedure(std::string id, Mask mask);
};

class ProcedureDB {
 public:
  /// Database holding only the generic procedures NULL, LS and IMG.
  static ProcedureDB with_generics();

  void add(Procedure proc);
  std::size_t size() const { return procedures_.size(); }
  const Procedure& operator[](std::size_t i) const { return procedures_[i]; }
  const std::vector<Procedure>& procedures() const { return procedures_; }
  std::optional<std::size_t> index_of(const std::string& id) const;
  std::vector<std::string> ids() const;

  double binarize_factor() const { return binarize_factor_; }
  void set_binarize_factor(double f);

 private:
  std::vector<Procedure> procedures_;
  double binarize_factor_ = 3.0;
};

/// Lower bound on every log-emission: d*log(1/511) - 50.
double log_floor(std::size_t d);

/// Per-delta quantities shared by all procedures' emission functions.
class DeltaFeatures {
 public:
  DeltaFeatures(const Delta& delta, double binarize_factor, bool with_spectrum = true);

  const Delta& delta() const { return *delta_; }
  bool is_zero() const { return zero_; }
  /// Standardized binarized spectrum (empty when computed without spectrum).
  const std::vector<double>& mask_z() const { return mask_z_; }
  const std::vector<double>& delta_z() const { return delta_z_; }
  /// (level index, pixel count) for every level present, by increasing index.
  const std::vector<std::pair<int, std::size_t>>& level_counts() const { return level_counts_; }

 private:
  const Delta* delta_;
  bool zero_ = false;
  std::vector<std::pair<int, std::size_t>> level_counts_;
  std::vector<double> mask_z_;
  std::vector<double> delta_z_;
};

/// Standardized copy of the adversarial example, the template of IMG.
std::vector<double> adversarial_template(const Image& adv);

/// log P_proc(delta | context). Missing context yields the log floor.
double log_emission(const Procedure& proc, const DeltaFeatures& delta, const DeltaFeatures* prev,
                    const std::vector<double>* adv_z);

/// Convenience overload computing the features on the fly.
double log_emission(const Procedure& proc, const Delta& delta, const Delta* prev, const Image* adv,
                    double binarize_factor = 3.0);

/// Matching score M in [0,1] used by pattern-like procedures (0 for noise/NULL).
double match_score(const Procedure& proc, const DeltaFeatures& delta, const DeltaFeatures* prev,
                   const std::vector<double>* adv_z);

struct KdeConfig {
  double bandwidth = 1.0;   // kernel width cap, in difference levels
  double epsilon = 1e-12;   // probability floor
};

NoiseModel estimate_noise_pmf(std::span<const Delta> cluster, const KdeConfig& cfg = {});

/// binarize(mean psd2) over the cluster. Throws DegenerateTemplate when empty.
PatternModel extract_template(std::span<const Delta> cluster, double threshold_factor);

nlohmann::json to_json(const ProcedureDB& db);
ProcedureDB procedure_db_from_json(const nlohmann::json& j);

nlohmann::json mask_to_json(const Mask& mask);
Mask mask_from_json(const nlohmann::json& j);

}  // namespace sea

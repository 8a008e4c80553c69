#pragma once

// Synthetic black-box attack traces with per-delta ground-truth procedure
// labels. Attack feedback is scripted; only trace structure is modeled.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sea/extraction.hpp"
#include "sea/procedures.hpp"

namespace sea {

enum class AttackFamily { GaussGrad, SubspaceNoise, BlockPattern, RaySearch, SignStep, BoundaryWalk, EvoGrad };
enum class Norm { L2, Linf };

const char* to_string(AttackFamily f);
const char* to_string(Norm n);
AttackFamily attack_family_from_string(const std::string& s);
Norm norm_from_string(const std::string& s);

struct Adaptive {
  enum class Kind { None, DummyNoise, ScaledNoise, ScaledLr, Rotation, DuplicateBug };
  Kind kind = Kind::None;
  double param = 0.0;  // sigma, noise factor, lr factor or max angle in degrees

  static Adaptive none() { return {}; }
  static Adaptive dummy_noise(double sigma) { return {Kind::DummyNoise, sigma}; }
  static Adaptive scaled_noise(double factor) { return {Kind::ScaledNoise, factor}; }
  static Adaptive scaled_lr(double factor) { return {Kind::ScaledLr, factor}; }
  static Adaptive rotation(double degrees) { return {Kind::Rotation, degrees}; }
  static Adaptive duplicate_bug() { return {Kind::DuplicateBug, 0.0}; }

  /// "none", "dummy-noise(0.05)", "rotation(10)", "duplicate-bug", ...
  std::string to_string() const;
  static Adaptive parse(const std::string& s);
  bool operator==(const Adaptive&) const = default;
};

struct SyntheticAttackSpec {
  AttackFamily family = AttackFamily::GaussGrad;
  Norm norm = Norm::L2;
  std::optional<double> epsilon;  // defaults: 10 for L2, 4/255 for Linf
  std::size_t max_queries = 1000;  // queries of the base attack; dummy and duplicate decorators add more
  Adaptive adaptive;
  std::uint64_t seed = 0;

  double budget() const;
  /// Family and norm, e.g. "gauss-grad-L2", with an adaptive suffix when set.
  std::string variant_name() const;
};

struct LabeledTrace {
  Trace trace;
  std::vector<std::string> labels;  // one procedure id per delta
  SyntheticAttackSpec spec;
};

/// Label given to the change into an inserted dummy query.
inline constexpr const char* kDummyLabel = "DUMMY";

/// Deterministic in (spec, clean). Throws InvalidInput on a bad spec.
LabeledTrace simulate(const SyntheticAttackSpec& spec, const Image& clean);

/// Smoothed Gaussian random field in [0.1, 0.9], the stand-in for natural images.
Image random_image(Dims dims, std::uint64_t seed);

/// Benign log of count random images with timestamps 0..count-1.
QueryLog make_benign_log(std::size_t count, Dims dims, std::uint64_t seed);

/// Attack queries interleaved at random positions into a benign log.
struct MixedLog {
  QueryLog log;
  std::vector<std::size_t> attack_indices;  // log index of each trace query, in order
};
MixedLog mix_into_log(const Trace& trace, const QueryLog& benign, std::uint64_t seed);

/// The eleven base variants (family x supported norms).
std::vector<SyntheticAttackSpec> attack_catalog();

/// Procedure database estimated from ground-truth labels: noise labels (N*)
/// get a KDE pmf, pattern labels (P*) an extracted template. Generic and
/// unknown labels are ignored.
ProcedureDB reference_procedures(const std::vector<LabeledTrace>& traces, double binarize_factor = 3.0,
                                 const KdeConfig& kde = {});

/// Norm of x - clean under spec's norm, in [0,1] units.
double perturbation_norm(const Image& x, const Image& clean, Norm norm);

}  // namespace sea

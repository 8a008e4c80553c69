#include "sea/procedures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sea/error.hpp"

namespace sea {

using nlohmann::json;

namespace {

const double kLog256 = std::log(256.0);

double clamp_match(double m) { return std::clamp(std::abs(m), 0.0, 1.0); }

// Truncated-exponential transform of a match score: log |D|^(M-1).
double pattern_log_prob(double match, std::size_t d) {
  return (match - 1.0) * static_cast<double>(d) * kLog256;
}

char hex_digit(unsigned v) { return "0123456789abcdef"[v & 0xF]; }

unsigned hex_value(char c) {
  if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
  if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
  if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
  throw FormatError("invalid hex digit in packed mask");
}

}  // namespace

const char* to_string(ProcedureKind kind) {
  switch (kind) {
    case ProcedureKind::Null: return "null";
    case ProcedureKind::Noise: return "noise";
    case ProcedureKind::Pattern: return "pattern";
    case ProcedureKind::LineSearch: return "line-search";
    case ProcedureKind::Interpolation: return "interpolation";
  }
  return "?";
}

ProcedureKind procedure_kind_from_string(const std::string& s) {
  if (s == "null") return ProcedureKind::Null;
  if (s == "noise") return ProcedureKind::Noise;
  if (s == "pattern") return ProcedureKind::Pattern;
  if (s == "line-search") return ProcedureKind::LineSearch;
  if (s == "interpolation") return ProcedureKind::Interpolation;
  throw FormatError("unknown procedure kind '" + s + "'");
}

NoiseModel::NoiseModel(std::vector<double> pmf) : pmf_(std::move(pmf)) {
  if (pmf_.size() != static_cast<std::size_t>(kDeltaLevels))
    throw InvalidInput("noise pmf must have 511 entries");
  double total = 0.0;
  for (double p : pmf_) {
    if (!(p > 0.0)) throw InvalidInput("noise pmf entries must be positive");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("noise pmf must sum to 1");
  log_pmf_.resize(pmf_.size());
  std::transform(pmf_.begin(), pmf_.end(), log_pmf_.begin(), [](double p) { return std::log(p); });
}

NoiseModel NoiseModel::uniform() {
  return NoiseModel(std::vector<double>(kDeltaLevels, 1.0 / kDeltaLevels));
}

Procedure Procedure::null_procedure() { return {"NULL", ProcedureKind::Null, {}, {}}; }

Procedure Procedure::line_search() { return {"LS", ProcedureKind::LineSearch, {}, {}}; }

Procedure Procedure::interpolation() {
  return {"IMG", ProcedureKind::Interpolation, {}, PatternModel{PatternModel::Source::AdversarialExample, {}, {}}};
}

Procedure Procedure::noise_procedure(std::string id, NoiseModel model) {
  return {std::move(id), ProcedureKind::Noise, std::move(model), {}};
}

Procedure Procedure::pattern_procedure(std::string id, Mask mask) {
  if (mask.count() == 0) throw DegenerateTemplate("spectral template has no nonzero bin");
  std::vector<double> reals = mask.as_reals();
  PatternModel model{PatternModel::Source::Spectral, std::move(mask), standardize(reals)};
  return {std::move(id), ProcedureKind::Pattern, {}, std::move(model)};
}

ProcedureDB ProcedureDB::with_generics() {
  ProcedureDB db;
  db.add(Procedure::null_procedure());
  db.add(Procedure::line_search());
  db.add(Procedure::interpolation());
  return db;
}

void ProcedureDB::add(Procedure proc) {
  if (proc.id.empty()) throw InvalidInput("procedure id must not be empty");
  if (index_of(proc.id)) throw InvalidInput("duplicate procedure id '" + proc.id + "'");
  bool consistent = false;
  switch (proc.kind) {
    case ProcedureKind::Noise: consistent = proc.noise.has_value() && !proc.pattern; break;
    case ProcedureKind::Pattern:
      consistent = proc.pattern && proc.pattern->source == PatternModel::Source::Spectral &&
                   proc.pattern->mask.count() > 0 && !proc.noise;
      break;
    case ProcedureKind::Interpolation:
      consistent = proc.pattern && proc.pattern->source == PatternModel::Source::AdversarialExample && !proc.noise;
      break;
    case ProcedureKind::LineSearch:
    case ProcedureKind::Null: consistent = !proc.noise && !proc.pattern; break;
  }
  if (!consistent) throw InvalidInput("procedure '" + proc.id + "' has a model inconsistent with its kind");
  procedures_.push_back(std::move(proc));
}

std::optional<std::size_t> ProcedureDB::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < procedures_.size(); ++i)
    if (procedures_[i].id == id) return i;
  return std::nullopt;
}

std::vector<std::string> ProcedureDB::ids() const {
  std::vector<std::string> out;
  for (const auto& p : procedures_) out.push_back(p.id);
  return out;
}

void ProcedureDB::set_binarize_factor(double f) {
  if (!(f > 0.0)) throw InvalidInput("binarize factor must be positive");
  binarize_factor_ = f;
}

double log_floor(std::size_t d) { return static_cast<double>(d) * std::log(1.0 / kDeltaLevels) - 50.0; }

DeltaFeatures::DeltaFeatures(const Delta& delta, double binarize_factor, bool with_spectrum)
    : delta_(&delta), zero_(delta.is_zero()) {
  std::vector<std::size_t> counts(kDeltaLevels, 0);
  for (std::size_t i = 0; i < delta.size(); ++i) ++counts[std::clamp(delta.level_index(i), 0, kDeltaLevels - 1)];
  for (int l = 0; l < kDeltaLevels; ++l)
    if (counts[l] > 0) level_counts_.emplace_back(l, counts[l]);
  delta_z_ = standardize(delta.values());
  if (with_spectrum) {
    Mask mask = binarize(psd2(delta), binarize_factor);
    std::vector<double> reals = mask.as_reals();
    mask_z_ = standardize(reals);
  }
}

std::vector<double> adversarial_template(const Image& adv) {
  std::vector<double> values = adv.values();
  return standardize(values);
}

double match_score(const Procedure& proc, const DeltaFeatures& delta, const DeltaFeatures* prev,
                   const std::vector<double>* adv_z) {
  switch (proc.kind) {
    case ProcedureKind::Pattern: {
      if (delta.mask_z().empty()) return 0.0;
      const PatternModel& model = *proc.pattern;
      if (model.mask_z.size() == delta.mask_z().size()) return clamp_match(dot(model.mask_z, delta.mask_z()));
      std::vector<double> reals = model.mask.as_reals();
      if (reals.size() != delta.mask_z().size()) return 0.0;
      return clamp_match(dot(standardize(reals), delta.mask_z()));
    }
    case ProcedureKind::Interpolation:
      if (!adv_z || adv_z->size() != delta.delta_z().size()) return 0.0;
      return clamp_match(dot(*adv_z, delta.delta_z()));
    case ProcedureKind::LineSearch:
      if (!prev || prev->delta().size() != delta.delta().size()) return 0.0;
      return clamp_match(cosine_sim(delta.delta().values(), prev->delta().values()));
    case ProcedureKind::Null:
    case ProcedureKind::Noise: return 0.0;
  }
  return 0.0;
}

double log_emission(const Procedure& proc, const DeltaFeatures& features, const DeltaFeatures* prev,
                    const std::vector<double>* adv_z) {
  const Delta& delta = features.delta();
  const std::size_t d = delta.size();
  const double floor = log_floor(d);
  double value = floor;
  switch (proc.kind) {
    case ProcedureKind::Null: value = features.is_zero() ? 0.0 : floor; break;
    case ProcedureKind::Noise: {
      double acc = 0.0;
      for (const auto& [level, count] : features.level_counts())
        acc += static_cast<double>(count) * proc.noise->log_prob(level);
      value = acc;
      break;
    }
    case ProcedureKind::Pattern:
      if (features.mask_z().empty()) break;
      value = pattern_log_prob(match_score(proc, features, prev, adv_z), d);
      break;
    case ProcedureKind::Interpolation:
      if (!adv_z) break;
      value = pattern_log_prob(match_score(proc, features, prev, adv_z), d);
      break;
    case ProcedureKind::LineSearch:
      if (!prev) break;
      value = pattern_log_prob(match_score(proc, features, prev, adv_z), d);
      break;
  }
  return std::clamp(value, floor, 0.0);
}

double log_emission(const Procedure& proc, const Delta& delta, const Delta* prev, const Image* adv,
                    double binarize_factor) {
  DeltaFeatures cur(delta, binarize_factor, proc.kind == ProcedureKind::Pattern);
  std::optional<DeltaFeatures> prev_features;
  if (prev) prev_features.emplace(*prev, binarize_factor, false);
  std::optional<std::vector<double>> adv_z;
  if (adv) adv_z = adversarial_template(*adv);
  return log_emission(proc, cur, prev_features ? &*prev_features : nullptr, adv_z ? &*adv_z : nullptr);
}

NoiseModel estimate_noise_pmf(std::span<const Delta> cluster, const KdeConfig& cfg) {
  if (cluster.empty()) throw InvalidInput("estimate_noise_pmf: empty cluster");
  std::vector<double> counts(kDeltaLevels, 0.0);
  double n = 0.0, sum = 0.0, sum_sq = 0.0;
  for (const Delta& delta : cluster) {
    for (std::size_t i = 0; i < delta.size(); ++i) {
      int idx = std::clamp(delta.level_index(i), 0, kDeltaLevels - 1);
      counts[static_cast<std::size_t>(idx)] += 1.0;
      double level = idx - (kLevels - 1);
      sum += level;
      sum_sq += level * level;
      n += 1.0;
    }
  }
  // Gaussian kernel with Silverman's rule, capped by the configured bandwidth.
  double mean = sum / n;
  double sd = std::sqrt(std::max(0.0, sum_sq / n - mean * mean));
  double h = std::min(cfg.bandwidth, 1.06 * sd * std::pow(n, -0.2));
  std::vector<double> pmf(kDeltaLevels, 0.0);
  if (h < 1e-3) {
    for (std::size_t i = 0; i < pmf.size(); ++i) pmf[i] = counts[i] / n;
  } else {
    int radius = static_cast<int>(std::ceil(5.0 * h));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    for (int k = -radius; k <= radius; ++k)
      kernel[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * (k / h) * (k / h));
    for (int i = 0; i < kDeltaLevels; ++i) {
      double c = counts[static_cast<std::size_t>(i)];
      if (c == 0.0) continue;
      // Mass falling outside the alphabet is dropped and recovered by renormalization.
      for (int k = -radius; k <= radius; ++k) {
        int j = i + k;
        if (j < 0 || j >= kDeltaLevels) continue;
        pmf[static_cast<std::size_t>(j)] += c * kernel[static_cast<std::size_t>(k + radius)];
      }
    }
  }
  double total = 0.0;
  for (double& p : pmf) total += p;
  for (double& p : pmf) p = std::max(p / total, cfg.epsilon);
  total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  for (double& p : pmf) p /= total;
  return NoiseModel(std::move(pmf));
}

PatternModel extract_template(std::span<const Delta> cluster, double threshold_factor) {
  if (cluster.empty()) throw InvalidInput("extract_template: empty cluster");
  Spectrum mean = psd2(cluster.front());
  for (std::size_t k = 1; k < cluster.size(); ++k) {
    Spectrum s = psd2(cluster[k]);
    if (s.power.size() != mean.power.size()) throw InvalidInput("extract_template: mixed dimensions");
    for (std::size_t i = 0; i < s.power.size(); ++i) mean.power[i] += s.power[i];
  }
  for (double& p : mean.power) p /= static_cast<double>(cluster.size());
  Mask mask = binarize(mean, threshold_factor);
  if (mask.count() == 0) throw DegenerateTemplate("cluster spectrum has no peaks");
  std::vector<double> reals = mask.as_reals();
  return {PatternModel::Source::Spectral, std::move(mask), standardize(reals)};
}

json mask_to_json(const Mask& mask) {
  std::string packed;
  for (std::size_t i = 0; i < mask.bits.size(); i += 8) {
    unsigned byte = 0;
    for (std::size_t b = 0; b < 8 && i + b < mask.bits.size(); ++b)
      if (mask.bits[i + b]) byte |= 1u << (7 - b);
    packed.push_back(hex_digit(byte >> 4));
    packed.push_back(hex_digit(byte));
  }
  return {{"height", mask.height}, {"width", mask.width}, {"bits", packed}};
}

Mask mask_from_json(const json& j) {
  Mask mask;
  mask.height = j.at("height").get<std::size_t>();
  mask.width = j.at("width").get<std::size_t>();
  std::string packed = j.at("bits").get<std::string>();
  std::size_t n = mask.height * mask.width;
  if (packed.size() != 2 * ((n + 7) / 8)) throw FormatError("packed mask length does not match its dims");
  mask.bits.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned byte = (hex_value(packed[2 * (i / 8)]) << 4) | hex_value(packed[2 * (i / 8) + 1]);
    mask.bits[i] = (byte >> (7 - i % 8)) & 1u;
  }
  return mask;
}

json to_json(const ProcedureDB& db) {
  json procs = json::array();
  for (const auto& p : db.procedures()) {
    json j{{"id", p.id}, {"kind", to_string(p.kind)}, {"context_arity", p.context_arity()}};
    if (p.noise) j["pmf"] = p.noise->pmf();
    if (p.pattern && p.pattern->source == PatternModel::Source::Spectral)
      j["template"] = mask_to_json(p.pattern->mask);
    procs.push_back(std::move(j));
  }
  return {{"format", "sea-procedures"},
          {"version", 1},
          {"binarize_factor", db.binarize_factor()},
          {"procedures", procs}};
}

ProcedureDB procedure_db_from_json(const json& j) {
  try {
    ProcedureDB db;
    db.set_binarize_factor(j.value("binarize_factor", 3.0));
    for (const auto& pj : j.at("procedures")) {
      Procedure p;
      p.id = pj.at("id").get<std::string>();
      p.kind = procedure_kind_from_string(pj.at("kind").get<std::string>());
      if (pj.contains("context_arity") && pj.at("context_arity").get<int>() != p.context_arity())
        throw FormatError("procedure '" + p.id + "' has an inconsistent context_arity");
      if (p.kind == ProcedureKind::Noise) p.noise = NoiseModel(pj.at("pmf").get<std::vector<double>>());
      if (p.kind == ProcedureKind::Pattern) {
        Procedure pattern = Procedure::pattern_procedure(p.id, mask_from_json(pj.at("template")));
        p.pattern = std::move(pattern.pattern);
      }
      if (p.kind == ProcedureKind::Interpolation)
        p.pattern = PatternModel{PatternModel::Source::AdversarialExample, {}, {}};
      db.add(std::move(p));
    }
    for (const char* generic : {"NULL", "LS", "IMG"})
      if (!db.index_of(generic)) throw FormatError(std::string("procedure database lacks generic ") + generic);
    return db;
  } catch (const json::exception& e) {
    throw FormatError(std::string("procedure database: ") + e.what());
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("procedure database: ") + e.what());
  } catch (const DegenerateTemplate& e) {
    throw FormatError(std::string("procedure database: ") + e.what());
  }
}

}  // namespace sea

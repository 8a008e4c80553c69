#include "sea/fingerprint.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <map>
#include <set>

#include "sea/error.hpp"

namespace sea {

using nlohmann::json;

std::vector<double> Fingerprint::flatten() const { return {matrix.flat().begin(), matrix.flat().end()}; }

Fingerprint Fingerprint::aligned_to(const std::vector<std::string>& order) const {
  if (order == procedure_order) return *this;
  if (order.size() != procedure_order.size())
    throw IncompatibleDatabase("fingerprint '" + incident_id + "' covers a different procedure set");
  std::vector<std::size_t> perm(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto it = std::find(procedure_order.begin(), procedure_order.end(), order[i]);
    if (it == procedure_order.end())
      throw IncompatibleDatabase("fingerprint '" + incident_id + "' lacks procedure '" + order[i] + "'");
    perm[i] = static_cast<std::size_t>(it - procedure_order.begin());
  }
  Fingerprint out = *this;
  out.matrix = matrix.permuted(perm);
  out.procedure_order = order;
  return out;
}

void FingerprintDB::add(Fingerprint fp) {
  if (fp.incident_id.empty()) throw InvalidInput("fingerprint incident id must not be empty");
  for (const auto& existing : fingerprints_)
    if (existing.incident_id == fp.incident_id)
      throw InvalidInput("duplicate incident id '" + fp.incident_id + "'");
  if (fp.matrix.size() != fp.procedure_order.size())
    throw InvalidInput("fingerprint matrix does not match its procedure order");
  fingerprints_.push_back(std::move(fp));
}

std::vector<std::string> FingerprintDB::attack_ids() const {
  std::set<std::string> ids;
  for (const auto& fp : fingerprints_) ids.insert(fp.attack_id);
  return {ids.begin(), ids.end()};
}

std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Fingerprint fingerprint_observations(const LogEmissionTable& table, const ProcedureDB& pdb, std::string incident_id,
                                     const FitConfig& cfg) {
  FitResult fit = fit_transition(table, TransitionMatrix::jittered(pdb.size(), cfg.seed), cfg.options);
  Fingerprint fp;
  fp.matrix = std::move(fit.transition);
  fp.incident_id = std::move(incident_id);
  fp.procedure_order = pdb.ids();
  fp.created_at = utc_timestamp();
  fp.trace_length = table.steps() + 1;
  return fp;
}

Fingerprint fingerprint_trace(const Trace& trace, const ProcedureDB& pdb, std::string incident_id,
                              const FitConfig& cfg) {
  if (trace.size() < 2) throw InvalidInput("fingerprint_trace: trace needs at least two queries");
  Fingerprint fp = fingerprint_observations(log_emissions(ObservationSequence::from_trace(trace), pdb), pdb,
                                            std::move(incident_id), cfg);
  fp.dims = trace.adv().dims();
  return fp;
}

std::vector<FingerprintMatch> match_fingerprint(const Fingerprint& fp, const FingerprintDB& db) {
  if (db.empty()) throw InvalidInput("match_fingerprint: fingerprint database is empty");
  std::map<std::string, std::pair<std::vector<double>, std::size_t>> sums;
  for (const auto& stored : db.fingerprints()) {
    std::vector<double> flat = stored.aligned_to(fp.procedure_order).flatten();
    auto& [sum, count] = sums[stored.attack_id];
    if (sum.empty()) sum.assign(flat.size(), 0.0);
    for (std::size_t i = 0; i < flat.size(); ++i) sum[i] += flat[i];
    ++count;
  }
  std::vector<double> query = fp.flatten();
  std::vector<FingerprintMatch> ranking;
  for (auto& [attack, entry] : sums) {
    auto& [sum, count] = entry;
    for (double& v : sum) v /= static_cast<double>(count);
    ranking.push_back({attack, cosine_sim(query, sum)});
  }
  std::sort(ranking.begin(), ranking.end(), [](const FingerprintMatch& a, const FingerprintMatch& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.attack_id < b.attack_id;
  });
  return ranking;
}

json to_json(const Fingerprint& fp) {
  return {{"format", "sea-fingerprint"},
          {"version", 1},
          {"incident_id", fp.incident_id},
          {"attack_id", fp.attack_id},
          {"procedure_order", fp.procedure_order},
          {"matrix", fp.flatten()},
          {"created_at", fp.created_at},
          {"trace_meta", {{"length", fp.trace_length}, {"dims", {fp.dims.height, fp.dims.width, fp.dims.channels}}}}};
}

Fingerprint fingerprint_from_json(const json& j) {
  try {
    Fingerprint fp;
    fp.incident_id = j.at("incident_id").get<std::string>();
    fp.attack_id = j.value("attack_id", std::string(kUnknownAttack));
    fp.procedure_order = j.at("procedure_order").get<std::vector<std::string>>();
    fp.matrix = TransitionMatrix(fp.procedure_order.size(), j.at("matrix").get<std::vector<double>>());
    fp.created_at = j.value("created_at", std::string());
    if (j.contains("trace_meta")) {
      const auto& meta = j.at("trace_meta");
      fp.trace_length = meta.value("length", std::size_t{0});
      if (meta.contains("dims")) {
        auto d = meta.at("dims").get<std::vector<std::size_t>>();
        if (d.size() == 3) fp.dims = {d[0], d[1], d[2]};
      }
    }
    return fp;
  } catch (const json::exception& e) {
    throw FormatError(std::string("fingerprint: ") + e.what());
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("fingerprint: ") + e.what());
  }
}

json to_json(const std::vector<FingerprintMatch>& ranking) {
  json out = json::array();
  for (const auto& m : ranking) out.push_back({{"attack_id", m.attack_id}, {"similarity", m.similarity}});
  return {{"format", "sea-match"}, {"version", 1}, {"ranking", out}};
}

}  // namespace sea

#include "sea/attribution.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "sea/error.hpp"

namespace sea {

using nlohmann::json;

void AttackDB::add(AttackModel attack) {
  if (attack.id.empty()) throw InvalidInput("attack id must not be empty");
  if (index_of(attack.id)) throw InvalidInput("duplicate attack id '" + attack.id + "'");
  if (!attacks_.empty() && attacks_.front().transition.size() != attack.transition.size())
    throw InvalidInput("attack '" + attack.id + "' has a transition matrix of a different size");
  attacks_.push_back(std::move(attack));
}

std::optional<std::size_t> AttackDB::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < attacks_.size(); ++i)
    if (attacks_[i].id == id) return i;
  return std::nullopt;
}

void AttackDB::pad_to(std::size_t m) {
  for (auto& a : attacks_)
    if (a.transition.size() < m) a.transition = a.transition.padded(m);
}

std::size_t AttributionReport::rank_of(const std::string& id) const {
  for (std::size_t i = 0; i < ranking.size(); ++i)
    if (ranking[i].id == id) return i + 1;
  return 0;
}

namespace {

TransitionMatrix scoring_matrix(const TransitionMatrix& a) {
  return a.smoothed(std::min(kTransitionFloor, 1.0 / static_cast<double>(a.size())));
}

}  // namespace

std::vector<TimelineEntry> explain(const LogEmissionTable& table, const AttackModel& attack, const ProcedureDB& pdb) {
  ViterbiPath path = viterbi(table, scoring_matrix(attack.transition));
  std::vector<TimelineEntry> timeline;
  timeline.reserve(path.states.size());
  for (std::size_t t = 0; t < path.states.size(); ++t) {
    std::size_t s = path.states[t];
    timeline.push_back({t, t + 1, pdb[s].id, table(t, s)});
  }
  return timeline;
}

std::vector<TimelineEntry> explain(const Trace& trace, const AttackModel& attack, const ProcedureDB& pdb) {
  if (trace.size() < 2) throw InvalidInput("explain: trace needs at least two queries");
  return explain(log_emissions(ObservationSequence::from_trace(trace), pdb), attack, pdb);
}

AttributionReport attribute(const LogEmissionTable& table, const AttackDB& adb, const ProcedureDB& pdb, bool decode) {
  if (adb.empty()) throw InvalidInput("attribute: attack database is empty");
  AttributionReport report;
  report.trace_length = table.steps() + 1;
  for (const auto& attack : adb.attacks())
    report.ranking.push_back({attack.id, forward_log_likelihood(table, scoring_matrix(attack.transition))});
  std::sort(report.ranking.begin(), report.ranking.end(), [](const RankedAttack& a, const RankedAttack& b) {
    if (a.log_likelihood != b.log_likelihood) return a.log_likelihood > b.log_likelihood;
    return a.id < b.id;
  });
  if (decode) report.decoded = explain(table, adb[*adb.index_of(report.top())], pdb);
  return report;
}

AttributionReport attribute(const Trace& trace, const AttackDB& adb, const ProcedureDB& pdb) {
  if (trace.size() < 2) throw InvalidInput("attribute: trace needs at least two queries");
  AttributionReport report = attribute(log_emissions(ObservationSequence::from_trace(trace), pdb), adb, pdb);
  report.dims = trace.adv().dims();
  return report;
}

json to_json(const AttributionReport& report, std::size_t topk) {
  json ranking = json::array();
  for (const auto& r : report.ranking) ranking.push_back({{"attack_id", r.id}, {"log_likelihood", r.log_likelihood}});
  std::size_t k = std::min(report.ranking.size(), topk);
  json top = json::array();
  for (std::size_t i = 0; i < k; ++i) top.push_back(report.ranking[i].id);
  json decoded = json::array();
  for (const auto& e : report.decoded)
    decoded.push_back({{"query_index", e.query_index}, {"procedure", e.procedure}, {"log_emission", e.log_emission}});
  return {{"format", "sea-attribution"},
          {"version", 1},
          {"top_k", top},
          {"ranking", ranking},
          {"decoded", decoded},
          {"trace", {{"length", report.trace_length},
                     {"dims", {report.dims.height, report.dims.width, report.dims.channels}}}}};
}

std::string render_timeline(const std::vector<TimelineEntry>& timeline) {
  std::ostringstream out;
  out << "query  procedure  log_emission\n";
  char line[128];
  for (const auto& e : timeline) {
    std::snprintf(line, sizeof line, "%5zu  %-9s  %.3f\n", e.query_index, e.procedure.c_str(), e.log_emission);
    out << line;
  }
  return out.str();
}

json to_json(const AttackDB& adb, const ProcedureDB& pdb) {
  json attacks = json::array();
  for (const auto& a : adb.attacks()) {
    std::vector<double> flat(a.transition.flat().begin(), a.transition.flat().end());
    attacks.push_back({{"id", a.id}, {"size", a.transition.size()}, {"matrix", flat}});
  }
  return {{"format", "sea-attacks"}, {"version", 1}, {"procedure_order", pdb.ids()}, {"attacks", attacks}};
}

AttackDB attack_db_from_json(const json& j, const ProcedureDB& pdb) {
  try {
    auto order = j.at("procedure_order").get<std::vector<std::string>>();
    auto ids = pdb.ids();
    if (order.size() > ids.size() || !std::equal(order.begin(), order.end(), ids.begin()))
      throw IncompatibleDatabase("attack database procedure order is not a prefix of the procedure database");
    AttackDB adb;
    for (const auto& aj : j.at("attacks")) {
      auto m = aj.at("size").get<std::size_t>();
      TransitionMatrix t(m, aj.at("matrix").get<std::vector<double>>());
      if (m > ids.size()) throw IncompatibleDatabase("attack matrix larger than the procedure database");
      adb.add({aj.at("id").get<std::string>(), t.padded(ids.size())});
    }
    return adb;
  } catch (const json::exception& e) {
    throw FormatError(std::string("attack database: ") + e.what());
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("attack database: ") + e.what());
  }
}

}  // namespace sea

// sea: command-line front end for attack trace forensics.
//
//   sea init <workspace>
//   sea simulate --family F --norm N [--adaptive A] [--seed S] --out DIR
//   sea extract <log> <adv> [--r 0.5] [--downscale S] --out DIR
//   sea attribute <trace> --workspace W [--topk 3] [--timeline] [--report FILE]
//   sea enroll <trace> --workspace W --id ID
//   sea fingerprint <trace> --workspace W [--incident ID] --out FILE
//   sea match <fingerprint> --workspace W
//
// Exit status: 0 success, 1 analysis error, 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "sea/attribution.hpp"
#include "sea/discovery.hpp"
#include "sea/error.hpp"
#include "sea/extraction.hpp"
#include "sea/fingerprint.hpp"
#include "sea/io_util.hpp"
#include "sea/query_log.hpp"
#include "sea/simulator.hpp"
#include "sea/workspace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sea;

namespace {

constexpr int kExitAnalysis = 1;
constexpr int kExitUsage = 2;

// Raised for argument combinations CLI11 cannot check on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

std::string image_bytes(const Image& image) {
  auto levels = image.levels();
  return std::string(reinterpret_cast<const char*>(levels.data()), levels.size());
}

json spec_to_json(const SyntheticAttackSpec& spec) {
  return {{"family", to_string(spec.family)},
          {"norm", to_string(spec.norm)},
          {"epsilon", spec.budget()},
          {"max_queries", spec.max_queries},
          {"adaptive", spec.adaptive.to_string()},
          {"seed", spec.seed},
          {"variant", spec.variant_name()}};
}

struct SimulateArgs {
  std::string family, norm = "L2", adaptive = "none";
  std::optional<double> epsilon;
  std::uint64_t seed = 0;
  std::size_t queries = 1000, benign = 0, side = 32;
  std::optional<std::size_t> downscale;
  fs::path out;
};

int cmd_simulate(const SimulateArgs& a) {
  SyntheticAttackSpec spec;
  try {
    spec.family = attack_family_from_string(a.family);
    spec.norm = norm_from_string(a.norm);
    spec.adaptive = Adaptive::parse(a.adaptive);
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
  spec.epsilon = a.epsilon;
  spec.seed = a.seed;
  spec.max_queries = a.queries;
  Dims dims{a.side, a.side, 3};
  LabeledTrace lt = simulate(spec, random_image(dims, a.seed ^ 0xc1ea2ULL));

  QueryLog benign = make_benign_log(a.benign, dims, a.seed ^ 0xbe2191ULL);
  MixedLog mixed = mix_into_log(lt.trace, benign, a.seed ^ 0x313ULL);
  Image adv = lt.trace.adv();
  if (a.downscale) {
    mixed.log = downscale(mixed.log, *a.downscale);
    adv = downscale(adv, *a.downscale);
  }
  json labels = {{"format", "sea-labels"},
                 {"version", 1},
                 {"spec", spec_to_json(spec)},
                 {"attack_indices", mixed.attack_indices},
                 {"labels", lt.labels}};
  write_query_log(a.out, mixed.log, {{"labels.json", labels.dump(2) + "\n"}, {"adv.u8", image_bytes(adv)}});
  print_json({{"out", a.out.string()},
              {"variant", spec.variant_name()},
              {"trace_length", lt.trace.size()},
              {"log_size", mixed.log.size()}});
  return 0;
}

struct ExtractArgs {
  fs::path log, adv, out;
  double r = 0.5;
  std::optional<std::size_t> downscale;
};

int cmd_extract(const ExtractArgs& a) {
  QueryLog log = read_query_log(a.log);
  if (log.empty()) throw FormatError(a.log.string() + ": empty query log");
  Image adv = read_raw_image(a.adv, *log.dims());
  if (a.downscale) {
    log = downscale(log, *a.downscale);
    adv = downscale(adv, *a.downscale);
  }
  ExtractionResult result = extract_trace(log, adv, a.r);
  if (!result.adv_in_log) std::cerr << "warning: the adversarial example does not occur in the log\n";
  write_trace(a.out, result.trace, a.r);

  json report = {{"out", a.out.string()}, {"r", a.r}, {"length", result.trace.size()}, {"adv_in_log", result.adv_in_log}};
  fs::path labels_file = a.log / "labels.json";
  if (fs::exists(labels_file)) {
    json labels = json::parse(read_text_file(labels_file));
    auto truth = labels.at("attack_indices").get<std::vector<std::size_t>>();
    PrecisionRecall pr = score_extraction(result.trace.log_indices, truth);
    report["precision"] = pr.precision;
    report["recall"] = pr.recall;
  }
  print_json(report);
  return 0;
}

struct AttributeArgs {
  fs::path trace, workspace;
  std::optional<std::size_t> topk;
  bool timeline = false;
  std::optional<fs::path> report;
};

int cmd_attribute(const AttributeArgs& a) {
  Settings settings = Settings::from_environment();
  std::size_t topk = a.topk.value_or(settings.topk);
  Workspace ws = Workspace::open(a.workspace);
  Trace trace = read_trace(a.trace);
  AttributionReport report = attribute(trace, ws.attacks, ws.procedures);
  json j = to_json(report, topk);
  if (a.report) atomic_write_file(*a.report, j.dump(2) + "\n");
  if (a.timeline) {
    std::cout << "top " << topk << ":";
    for (std::size_t i = 0; i < std::min(topk, report.ranking.size()); ++i) std::cout << ' ' << report.ranking[i].id;
    std::cout << '\n' << render_timeline(report.decoded);
  } else {
    print_json(j);
  }
  return 0;
}

struct EnrollArgs {
  fs::path trace, workspace;
  std::string id;
};

int cmd_enroll(const EnrollArgs& a) {
  Settings settings = Settings::from_environment();
  Trace trace = read_trace(a.trace);
  auto lock = Workspace::open(a.workspace).lock();
  Workspace ws = Workspace::open(a.workspace);
  EnrollmentResult r = enroll_attack(trace, ws.procedures, ws.attacks, settings.discovery, a.id);
  ws.procedures = std::move(r.pdb);
  ws.attacks = std::move(r.adb);
  ws.save_databases();
  fs::path fp_file = ws.save_fingerprint(r.fingerprint);

  json candidates = json::array();
  for (const auto& c : r.candidates)
    candidates.push_back({{"id", c.id},
                          {"class", to_string(c.cls)},
                          {"cluster_size", c.cluster_size},
                          {"gain", c.gain.raw},
                          {"improvement", c.gain.improvement},
                          {"best_existing", c.gain.best_existing},
                          {"enrolled", c.gain.enroll}});
  print_json({{"attack_id", a.id},
              {"new_procedures", r.new_procedures},
              {"candidates", candidates},
              {"procedures", ws.procedures.ids()},
              {"fingerprint", fp_file.string()}});
  return 0;
}

struct FingerprintArgs {
  fs::path trace, workspace, out;
  std::string incident;
};

int cmd_fingerprint(const FingerprintArgs& a) {
  Settings settings = Settings::from_environment();
  Workspace ws = Workspace::open(a.workspace);
  Trace trace = read_trace(a.trace);
  std::string incident = a.incident.empty() ? a.trace.filename().string() : a.incident;
  Fingerprint fp = fingerprint_trace(trace, ws.procedures, incident, settings.discovery.fit);
  atomic_write_file(a.out, to_json(fp).dump(2) + "\n");
  print_json({{"out", a.out.string()}, {"incident_id", fp.incident_id}, {"trace_length", fp.trace_length}});
  return 0;
}

struct MatchArgs {
  fs::path fingerprint, workspace;
};

int cmd_match(const MatchArgs& a) {
  Workspace ws = Workspace::open(a.workspace);
  if (ws.fingerprints.empty()) throw InvalidInput("the workspace holds no fingerprints");
  Fingerprint fp = fingerprint_from_json(json::parse(read_text_file(a.fingerprint)));
  fp = embed_fingerprint(fp, ws.procedures.ids());
  print_json(to_json(match_fingerprint(fp, ws.fingerprints)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forensic analysis of black-box adversarial attack traces"};
  app.require_subcommand(1);

  fs::path init_root;
  auto* init = app.add_subcommand("init", "Create an empty workspace");
  init->add_option("workspace", init_root)->required();

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Write a synthetic attack as a query log with labels.json");
  simulate_cmd->add_option("--family", sim.family, "gauss-grad, subspace-noise, block-pattern, ray-search, "
                                                   "sign-step, boundary-walk or evo-grad")->required();
  simulate_cmd->add_option("--norm", sim.norm, "L2 or Linf")->capture_default_str();
  simulate_cmd->add_option("--adaptive", sim.adaptive, "none, dummy-noise(s), scaled-noise(f), scaled-lr(f), "
                                                       "rotation(deg) or duplicate-bug")->capture_default_str();
  simulate_cmd->add_option("--epsilon", sim.epsilon, "Perturbation budget in [0,1] units");
  simulate_cmd->add_option("--seed", sim.seed)->capture_default_str();
  simulate_cmd->add_option("--queries", sim.queries, "Query budget")->check(CLI::Range(2, 1000000))->capture_default_str();
  simulate_cmd->add_option("--benign", sim.benign, "Benign queries mixed into the log")->capture_default_str();
  simulate_cmd->add_option("--side", sim.side, "Image side length")->check(CLI::Range(8, 1024))->capture_default_str();
  simulate_cmd->add_option("--downscale", sim.downscale, "Store queries resized to this side")->check(CLI::Range(2, 1024));
  simulate_cmd->add_option("--out", sim.out)->required();

  ExtractArgs ext;
  auto* extract_cmd = app.add_subcommand("extract", "Recover the trace ending at an adversarial example");
  extract_cmd->add_option("log", ext.log, "Query log directory")->required()->check(CLI::ExistingDirectory);
  extract_cmd->add_option("adv", ext.adv, "Adversarial example, raw u8 with the log's dims")->required()->check(CLI::ExistingFile);
  auto* r_opt = extract_cmd->add_option("--r", ext.r, "Correlation threshold in (0,1)");
  extract_cmd->add_option("--downscale", ext.downscale, "Resize queries to this side first")->check(CLI::Range(2, 1024));
  extract_cmd->add_option("--out", ext.out)->required();

  AttributeArgs att;
  auto* attribute_cmd = app.add_subcommand("attribute", "Rank enrolled attacks for a trace");
  attribute_cmd->add_option("trace", att.trace)->required()->check(CLI::ExistingDirectory);
  attribute_cmd->add_option("--workspace", att.workspace)->required()->check(CLI::ExistingDirectory);
  attribute_cmd->add_option("--topk", att.topk)->check(CLI::Range(1, 1000));
  attribute_cmd->add_flag("--timeline", att.timeline, "Print the decoded per-query timeline instead of JSON");
  attribute_cmd->add_option("--report", att.report, "Also write the JSON report here");

  EnrollArgs enr;
  auto* enroll_cmd = app.add_subcommand("enroll", "Enroll a new attack from one trace");
  enroll_cmd->add_option("trace", enr.trace)->required()->check(CLI::ExistingDirectory);
  enroll_cmd->add_option("--workspace", enr.workspace)->required()->check(CLI::ExistingDirectory);
  enroll_cmd->add_option("--id", enr.id)->required();

  FingerprintArgs fpa;
  auto* fingerprint_cmd = app.add_subcommand("fingerprint", "Fit a shareable fingerprint for a trace");
  fingerprint_cmd->add_option("trace", fpa.trace)->required()->check(CLI::ExistingDirectory);
  fingerprint_cmd->add_option("--workspace", fpa.workspace)->required()->check(CLI::ExistingDirectory);
  fingerprint_cmd->add_option("--incident", fpa.incident);
  fingerprint_cmd->add_option("--out", fpa.out)->required();

  MatchArgs mat;
  auto* match_cmd = app.add_subcommand("match", "Match a fingerprint against the workspace's fingerprints");
  match_cmd->add_option("fingerprint", mat.fingerprint)->required()->check(CLI::ExistingFile);
  match_cmd->add_option("--workspace", mat.workspace)->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*init) {
      Workspace::init(init_root);
      print_json({{"workspace", init_root.string()}});
      return 0;
    }
    if (*simulate_cmd) return cmd_simulate(sim);
    if (*extract_cmd) {
      if (r_opt->count() == 0) ext.r = Settings::from_environment().r;
      if (!(ext.r > 0.0 && ext.r < 1.0)) throw UsageError("--r must lie strictly between 0 and 1");
      return cmd_extract(ext);
    }
    if (*attribute_cmd) return cmd_attribute(att);
    if (*enroll_cmd) return cmd_enroll(enr);
    if (*fingerprint_cmd) return cmd_fingerprint(fpa);
    if (*match_cmd) return cmd_match(mat);
  } catch (const UsageError& e) {
    std::cerr << "sea: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "sea: " << e.what() << '\n';
    return kExitAnalysis;
  }
  return kExitUsage;
}

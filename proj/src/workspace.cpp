#include "sea/workspace.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>

#include "sea/error.hpp"

namespace sea {

namespace fs = std::filesystem;

namespace {

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

double env_double(const char* name, double fallback) {
  const char* v = env(name);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw InvalidInput(std::string(name) + ": not a number: '" + v + "'");
  }
}

std::uint64_t env_uint(const char* name, std::uint64_t fallback) {
  const char* v = env(name);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    unsigned long long x = std::stoull(v, &used, 0);
    if (used != std::string(v).size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw InvalidInput(std::string(name) + ": not an unsigned integer: '" + v + "'");
  }
}

nlohmann::json load_json(const fs::path& file) {
  try {
    return nlohmann::json::parse(read_text_file(file));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(file.string() + ": " + e.what());
  }
}

}  // namespace

Settings Settings::from_environment() {
  Settings s;
  s.r = env_double("SEA_R", s.r);
  s.topk = static_cast<std::size_t>(env_uint("SEA_TOPK", s.topk));
  s.discovery.tau_segment = env_double("SEA_TAU_SEGMENT", s.discovery.tau_segment);
  s.discovery.tau_merge = env_double("SEA_TAU_MERGE", s.discovery.tau_merge);
  s.discovery.gain_threshold = env_double("SEA_GAIN_THRESHOLD", s.discovery.gain_threshold);
  s.discovery.binarize_factor = env_double("SEA_BINARIZE_FACTOR", s.discovery.binarize_factor);
  s.discovery.fit.seed = env_uint("SEA_SEED", s.discovery.fit.seed);
  return s;
}

Fingerprint embed_fingerprint(const Fingerprint& fp, const std::vector<std::string>& order) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < fp.procedure_order.size(); ++i) pos[fp.procedure_order[i]] = i;
  std::vector<std::optional<std::size_t>> src(order.size());
  std::size_t found = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto it = pos.find(order[i]);
    if (it != pos.end()) {
      src[i] = it->second;
      ++found;
    }
  }
  if (found != fp.procedure_order.size())
    throw IncompatibleDatabase("fingerprint '" + fp.incident_id + "' uses procedures unknown to this database");
  const std::size_t m = order.size();
  std::vector<double> a(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (!src[i]) a[i * m + j] = 1.0 / static_cast<double>(m);
      else if (src[j]) a[i * m + j] = fp.matrix(*src[i], *src[j]);
    }
  Fingerprint out = fp;
  out.matrix = TransitionMatrix(m, std::move(a));
  out.procedure_order = order;
  return out;
}

Workspace Workspace::init(const fs::path& root) {
  fs::create_directories(root / "fingerprints");
  fs::create_directories(root / "logs");
  Workspace ws(root);
  auto guard = ws.lock();
  if (!fs::exists(root / "procedures.json"))
    atomic_write_file(root / "procedures.json", to_json(ProcedureDB::with_generics()).dump(2));
  if (!fs::exists(root / "attacks.json")) {
    ProcedureDB pdb = procedure_db_from_json(load_json(root / "procedures.json"));
    atomic_write_file(root / "attacks.json", to_json(AttackDB{}, pdb).dump(2));
  }
  return open(root);
}

Workspace Workspace::open(const fs::path& root) {
  if (!fs::is_directory(root)) throw InvalidInput("workspace '" + root.string() + "' does not exist");
  for (const char* f : {"procedures.json", "attacks.json"})
    if (!fs::exists(root / f)) throw FormatError("workspace '" + root.string() + "' lacks " + f + " (run init)");
  Workspace ws(root);
  ws.procedures = procedure_db_from_json(load_json(root / "procedures.json"));
  ws.attacks = attack_db_from_json(load_json(root / "attacks.json"), ws.procedures);
  if (fs::is_directory(ws.fingerprint_dir())) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(ws.fingerprint_dir()))
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files)
      ws.fingerprints.add(embed_fingerprint(fingerprint_from_json(load_json(f)), ws.procedures.ids()));
  }
  return ws;
}

void Workspace::save_databases() const {
  atomic_write_file(root_ / "procedures.json", to_json(procedures).dump(2));
  atomic_write_file(root_ / "attacks.json", to_json(attacks, procedures).dump(2));
}

fs::path Workspace::save_fingerprint(const Fingerprint& fp) const {
  if (fp.incident_id.empty() || fp.incident_id.find_first_of("/\\") != std::string::npos || fp.incident_id[0] == '.')
    throw InvalidInput("incident id '" + fp.incident_id + "' is not usable as a file name");
  fs::create_directories(fingerprint_dir());
  fs::path file = fingerprint_dir() / (fp.incident_id + ".json");
  atomic_write_file(file, to_json(fp).dump(2));
  return file;
}

std::unique_ptr<FileLock> Workspace::lock() const { return std::make_unique<FileLock>(root_ / ".lock"); }

}  // namespace sea

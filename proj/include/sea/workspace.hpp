#pragma once

// Analyst workspace: plain files under one root directory.
//   procedures.json   procedure database
//   attacks.json      attack database (transition matrices)
//   fingerprints/     one fingerprint JSON per incident
//   logs/             query log directories

#include <filesystem>
#include <memory>
#include <string>

#include "sea/attribution.hpp"
#include "sea/discovery.hpp"
#include "sea/fingerprint.hpp"
#include "sea/io_util.hpp"

namespace sea {

/// Defaults, each overridable from the environment:
/// SEA_R, SEA_TOPK, SEA_TAU_SEGMENT, SEA_TAU_MERGE, SEA_GAIN_THRESHOLD,
/// SEA_BINARIZE_FACTOR, SEA_SEED.
struct Settings {
  double r = 0.5;
  std::size_t topk = 3;
  DiscoveryConfig discovery;

  static Settings from_environment();
};

/// Re-expresses a fingerprint over a larger procedure order: unknown states
/// get uniform rows and zero columns. Throws IncompatibleDatabase when the
/// fingerprint uses a procedure missing from order.
Fingerprint embed_fingerprint(const Fingerprint& fp, const std::vector<std::string>& order);

class Workspace {
 public:
  /// Creates the layout with a generic-only procedure database. Existing
  /// databases are left untouched.
  static Workspace init(const std::filesystem::path& root);
  static Workspace open(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path fingerprint_dir() const { return root_ / "fingerprints"; }
  std::filesystem::path log_dir() const { return root_ / "logs"; }

  ProcedureDB procedures;
  AttackDB attacks;
  /// Loaded fingerprints, embedded into the current procedure order.
  FingerprintDB fingerprints;

  void save_databases() const;
  /// Writes fingerprints/<incident_id>.json and returns the path.
  std::filesystem::path save_fingerprint(const Fingerprint& fp) const;

  /// Exclusive lock on the workspace, held while the returned object lives.
  std::unique_ptr<FileLock> lock() const;

 private:
  explicit Workspace(std::filesystem::path root) : root_(std::move(root)) {}
  std::filesystem::path root_;
};

}  // namespace sea

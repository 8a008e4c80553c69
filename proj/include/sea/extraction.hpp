#pragma once

// Recovering an attack trace from the history of queries a service received.

#include <cstdint>
#include <optional>
#include <vector>

#include "sea/signal.hpp"

namespace sea {

struct LoggedQuery {
  std::int64_t timestamp = 0;
  Image image;
};

/// Append-only history of queries; timestamps strictly increase and all images share dims.
class QueryLog {
 public:
  QueryLog() = default;
  explicit QueryLog(std::vector<LoggedQuery> entries);

  void append(std::int64_t timestamp, Image image);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const LoggedQuery& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<LoggedQuery>& entries() const { return entries_; }
  /// Dimensions shared by every entry; unset for an empty log.
  std::optional<Dims> dims() const;

 private:
  std::vector<LoggedQuery> entries_;
};

struct Trace {
  std::vector<Image> queries;  // adversarial example last
  /// Log index of each query; unset for an adversarial example that was not logged.
  std::vector<std::optional<std::size_t>> log_indices;

  std::size_t size() const { return queries.size(); }
  std::size_t adv_index() const { return queries.size() - 1; }
  const Image& adv() const { return queries.back(); }
};

struct ExtractionResult {
  Trace trace;
  bool adv_in_log = false;
};

/// Single-link closure of {adv} under Pearson correlation >= r over the log.
/// Members are ordered by timestamp and the adversarial example is last; queries
/// logged after the last byte-identical copy of adv are dropped.
ExtractionResult extract_trace(const QueryLog& log, const Image& adv, double r);

/// Bilinear resize to side x side per channel followed by requantization.
Image downscale(const Image& image, std::size_t side);
QueryLog downscale(const QueryLog& log, std::size_t side);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

/// Scores extracted log indices against ground-truth attack indices.
PrecisionRecall score_extraction(const std::vector<std::optional<std::size_t>>& extracted,
                                 const std::vector<std::size_t>& truth);

}  // namespace sea

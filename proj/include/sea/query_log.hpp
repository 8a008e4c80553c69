#pragma once

// On-disk query log: a directory holding manifest.json plus one raw u8 tensor
// (row-major H, W, C) per query.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sea/extraction.hpp"

namespace sea {

QueryLog read_query_log(const std::filesystem::path& dir);
void write_query_log(const std::filesystem::path& dir, const QueryLog& log);
/// Same, with extra files (name, contents) committed together with the log.
void write_query_log(const std::filesystem::path& dir, const QueryLog& log,
                     const std::vector<std::pair<std::string, std::string>>& extra_files);

/// Writes the trace as a query log plus trace.json listing the member log indices.
void write_trace(const std::filesystem::path& dir, const Trace& trace, double r);
Trace read_trace(const std::filesystem::path& dir);

Image read_raw_image(const std::filesystem::path& file, const Dims& dims);
void write_raw_image(const std::filesystem::path& file, const Image& image);

}  // namespace sea

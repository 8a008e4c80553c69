#include "sea/query_log.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <random>

#include "sea/error.hpp"
#include "sea/io_util.hpp"

namespace sea {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string query_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%06zu.u8", i);
  return buf;
}

fs::path staging_dir(const fs::path& dir) {
  std::random_device rd;
  fs::path tmp = dir;
  tmp += ".tmp" + std::to_string(rd());
  return tmp;
}

void commit_dir(const fs::path& staged, const fs::path& dir) {
  if (fs::exists(dir)) fs::remove_all(dir);
  if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
  fs::rename(staged, dir);
}

void write_log_contents(const fs::path& dir, const QueryLog& log) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "sea-query-log";
  manifest["version"] = 1;
  manifest["dtype"] = "u8";
  manifest["count"] = log.size();
  Dims dims = log.dims().value_or(Dims{});
  manifest["dims"] = {dims.height, dims.width, dims.channels};
  json timestamps = json::array(), files = json::array();
  for (std::size_t i = 0; i < log.size(); ++i) {
    timestamps.push_back(log[i].timestamp);
    files.push_back(query_file_name(i));
    write_raw_image(dir / query_file_name(i), log[i].image);
  }
  manifest["timestamps"] = timestamps;
  manifest["files"] = files;
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

}  // namespace

Image read_raw_image(const fs::path& file, const Dims& dims) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot open " + file.string());
  std::vector<std::uint8_t> levels(dims.size());
  in.read(reinterpret_cast<char*>(levels.data()), static_cast<std::streamsize>(levels.size()));
  if (in.gcount() != static_cast<std::streamsize>(levels.size()) || in.peek() != EOF)
    throw FormatError(file.string() + ": size does not match manifest dims");
  return Image(dims, std::move(levels));
}

void write_raw_image(const fs::path& file, const Image& image) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + file.string());
  auto levels = image.levels();
  out.write(reinterpret_cast<const char*>(levels.data()), static_cast<std::streamsize>(levels.size()));
}

QueryLog read_query_log(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw FormatError(dir.string() + "/manifest.json: " + e.what());
  }
  try {
    if (manifest.at("dtype").get<std::string>() != "u8")
      throw FormatError(dir.string() + ": unsupported dtype");
    auto d = manifest.at("dims").get<std::vector<std::size_t>>();
    auto count = manifest.at("count").get<std::size_t>();
    auto timestamps = manifest.at("timestamps").get<std::vector<std::int64_t>>();
    if (timestamps.size() != count) throw FormatError(dir.string() + ": timestamp count mismatch");
    std::vector<std::string> files;
    if (manifest.contains("files")) {
      files = manifest.at("files").get<std::vector<std::string>>();
      if (files.size() != count) throw FormatError(dir.string() + ": file count mismatch");
    } else {
      for (std::size_t i = 0; i < count; ++i) files.push_back(query_file_name(i));
    }
    QueryLog log;
    if (count == 0) return log;
    if (d.size() != 3) throw FormatError(dir.string() + ": dims must be [H, W, C]");
    Dims dims{d[0], d[1], d[2]};
    for (std::size_t i = 0; i < count; ++i)
      log.append(timestamps[i], read_raw_image(dir / files[i], dims));
    return log;
  } catch (const json::exception& e) {
    throw FormatError(dir.string() + "/manifest.json: " + e.what());
  } catch (const InvalidInput& e) {
    throw FormatError(dir.string() + ": " + e.what());
  }
}

void write_query_log(const fs::path& dir, const QueryLog& log) { write_query_log(dir, log, {}); }

void write_query_log(const fs::path& dir, const QueryLog& log,
                     const std::vector<std::pair<std::string, std::string>>& extra_files) {
  fs::path staged = staging_dir(dir);
  write_log_contents(staged, log);
  for (const auto& [name, contents] : extra_files) {
    if (name.empty() || name.find('/') != std::string::npos || name == "manifest.json")
      throw InvalidInput("bad extra file name '" + name + "'");
    std::ofstream out(staged / name, std::ios::binary);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw FormatError("cannot write " + (staged / name).string());
  }
  commit_dir(staged, dir);
}

void write_trace(const fs::path& dir, const Trace& trace, double r) {
  QueryLog log;
  for (std::size_t i = 0; i < trace.size(); ++i)
    log.append(static_cast<std::int64_t>(i), trace.queries[i]);
  fs::path staged = staging_dir(dir);
  write_log_contents(staged, log);
  json meta;
  json members = json::array();
  for (const auto& idx : trace.log_indices) members.push_back(idx ? json(*idx) : json(nullptr));
  meta["members"] = members;
  meta["length"] = trace.size();
  meta["adv_index"] = trace.adv_index();
  meta["adv_log_index"] = trace.log_indices.back() ? json(*trace.log_indices.back()) : json(nullptr);
  meta["r"] = r;
  std::ofstream(staged / "trace.json") << meta.dump(2) << '\n';
  commit_dir(staged, dir);
}

Trace read_trace(const fs::path& dir) {
  QueryLog log = read_query_log(dir);
  Trace trace;
  for (const auto& e : log.entries()) trace.queries.push_back(e.image);
  if (fs::exists(dir / "trace.json")) {
    json meta = json::parse(read_text_file(dir / "trace.json"));
    for (const auto& m : meta.at("members"))
      trace.log_indices.push_back(m.is_null() ? std::nullopt : std::optional<std::size_t>(m.get<std::size_t>()));
    if (trace.log_indices.size() != trace.queries.size())
      throw FormatError(dir.string() + "/trace.json: member count does not match the queries");
  } else {
    for (std::size_t i = 0; i < trace.size(); ++i) trace.log_indices.emplace_back(i);
  }
  if (trace.queries.empty()) throw FormatError(dir.string() + ": empty trace");
  return trace;
}

}  // namespace sea

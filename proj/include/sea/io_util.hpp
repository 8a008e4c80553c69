#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace sea {

std::string read_text_file(const std::filesystem::path& file);

/// Writes to a sibling temporary file and renames it into place.
void atomic_write_file(const std::filesystem::path& file, std::string_view content);

/// Exclusive advisory lock (flock) held for the lifetime of the object.
class FileLock {
 public:
  explicit FileLock(const std::filesystem::path& file);
  ~FileLock();
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace sea

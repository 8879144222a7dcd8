#pragma once

// Minimal comma-separated reader for the project's unquoted CSV formats.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spatio {

/// Malformed or inconsistent input data (maps to exit code 2 in the CLI).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace util {

class CsvReader {
 public:
  explicit CsvReader(const std::filesystem::path& path);

  /// Next non-blank, non-comment row with fields trimmed; nullopt at EOF.
  std::optional<std::vector<std::string>> next();
  void expect_header(const std::vector<std::string>& columns);
  double parse_double(const std::string& text) const;
  std::size_t line() const { return line_; }
  /// Throws DataError tagged with `path:line`.
  [[noreturn]] void fail(const std::string& message) const;

  /// Lines starting with '#' are handed back here instead of being skipped
  /// when set; the snapshot format carries metadata in such a line.
  std::vector<std::string> comments;

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_ = 0;
};

std::vector<std::string> split_fields(const std::string& line);

}  // namespace util
}  // namespace spatio

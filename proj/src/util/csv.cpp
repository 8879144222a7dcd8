#include "spatio/util/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>

namespace spatio::util {

namespace {
std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}
}  // namespace

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

CsvReader::CsvReader(const std::filesystem::path& path) : path_(path), in_(path) {
  if (!in_) throw DataError("cannot open " + path.string());
}

std::optional<std::vector<std::string>> CsvReader::next() {
  std::string raw;
  while (std::getline(in_, raw)) {
    ++line_;
    const std::string t = trim(raw);
    if (t.empty()) continue;
    if (t.front() == '#') {
      comments.push_back(t);
      continue;
    }
    return split_fields(t);
  }
  return std::nullopt;
}

void CsvReader::expect_header(const std::vector<std::string>& columns) {
  auto header = next();
  if (!header) fail("empty file, expected header");
  if (*header != columns) {
    std::string want;
    for (const auto& c : columns) want += (want.empty() ? "" : ",") + c;
    fail("expected header '" + want + "'");
  }
}

double CsvReader::parse_double(const std::string& text) const {
  if (text.empty()) fail("empty numeric field");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || errno == ERANGE) fail("bad number '" + text + "'");
  return v;
}

void CsvReader::fail(const std::string& message) const {
  throw DataError(path_.string() + ":" + std::to_string(line_) + ": " + message);
}

}  // namespace spatio::util

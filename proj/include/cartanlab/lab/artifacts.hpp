#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cartanlab/json_io.hpp"

namespace cartanlab::lab {

/// Shortest-exact decimal form used in every CSV cell.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string sci(double v, int digits = 3) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*e", digits, v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) { row_strings(header); }

  CsvWriter& row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
    return *this;
  }

  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

/// Named output files kept in memory until written, so two runs can be
/// compared byte for byte.
class Artifacts {
 public:
  void add(const std::string& name, std::string bytes) { files_[name] = std::move(bytes); }
  void add_json(const std::string& name, const Json& j) { add(name, dump_json(j)); }
  const std::map<std::string, std::string>& files() const { return files_; }
  bool contains(const std::string& name) const { return files_.count(name) > 0; }

  void write(const std::string& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, ErrorCode::Io, "cannot create output directory " + dir + ": " + ec.message());
    for (const auto& [name, bytes] : files_) write_text_file((std::filesystem::path(dir) / name).string(), bytes);
  }

  friend bool operator==(const Artifacts&, const Artifacts&) = default;

 private:
  std::map<std::string, std::string> files_;
};

/// Minimal CSV reader for the files this tool writes (no quoting).
inline std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) {
      std::vector<std::string> cells;
      std::size_t a = 0;
      while (true) {
        std::size_t b = line.find(',', a);
        cells.push_back(line.substr(a, b == std::string::npos ? std::string::npos : b - a));
        if (b == std::string::npos) break;
        a = b + 1;
      }
      rows.push_back(std::move(cells));
    }
    pos = end + 1;
  }
  return rows;
}

}  // namespace cartanlab::lab

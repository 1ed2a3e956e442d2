#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "cartanlab/lab/artifacts.hpp"

namespace cartanlab::lab {

namespace detail {

inline std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

inline std::string fixed(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string file_if_present(const std::filesystem::path& p) {
  return std::filesystem::exists(p) ? read_text_file(p.string()) : std::string();
}

}  // namespace detail

/// Plain-text summary of an output directory. Needs run.json; exponents.csv
/// and chambers.json are tabulated when present. Output depends only on the
/// file contents.
inline std::string render_report(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  require(fs::is_directory(root), ErrorCode::Io, "no such directory: " + dir);
  require(fs::exists(root / "run.json"), ErrorCode::Io, "missing artifact run.json in " + dir);
  Json run = parse_json(read_text_file((root / "run.json").string()), (root / "run.json").string());
  require(run.is_object() && run.contains("subcommand") && run.contains("status"), ErrorCode::Io,
          "run.json lacks subcommand/status");

  std::string out;
  out += "cartanlab report: " + dir + "\n";
  out += "subcommand: " + run["subcommand"].get<std::string>() + "\n";
  if (run.contains("config") && run["config"].contains("preset"))
    out += "preset: " + run["config"]["preset"].get<std::string>() + "\n";
  if (run.contains("config") && run["config"].contains("seed"))
    out += "seed: " + std::to_string(run["config"]["seed"].get<std::uint64_t>()) + "\n";
  out += "status: " + run["status"].get<std::string>() + "\n";

  if (run.contains("checks") && !run["checks"].empty()) {
    out += "\nchecks\n";
    for (const auto& c : run["checks"]) {
      std::string label = c.contains("criterion") ? std::to_string(c["criterion"].get<int>()) + " " : "- ";
      out += "  " + c["status"].get<std::string>() + "  " + detail::pad(label + c["name"].get<std::string>(), 36) +
             c["detail"].get<std::string>() + "\n";
    }
  }

  std::string csv = detail::file_if_present(root / "exponents.csv");
  if (!csv.empty()) {
    auto rows = read_csv(csv);
    require(!rows.empty() && rows[0].size() >= 5, ErrorCode::Io, "malformed exponents.csv");
    const std::size_t k = rows[0].size() - 4;
    out += "\nexponents (estimated vs linear)\n";
    out += "  " + detail::pad("m", 12) + detail::pad("i", 4) + detail::pad("estimate", 14) + detail::pad("stderr", 12) +
           detail::pad("linear", 14) + "|delta|\n";
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      require(row.size() == k + 4, ErrorCode::Io, "malformed exponents.csv row " + std::to_string(r));
      std::string m = "(";
      for (std::size_t j = 0; j < k; ++j) m += (j ? "," : "") + row[j];
      m += ")";
      double est = std::stod(row[k + 1]), se = std::stod(row[k + 2]), lin = std::stod(row[k + 3]);
      out += "  " + detail::pad(m, 12) + detail::pad(row[k], 4) + detail::pad(detail::fixed(est), 14) +
             detail::pad(sci(se, 2), 12) + detail::pad(detail::fixed(lin), 14) + sci(std::abs(est - lin), 2) + "\n";
    }
  }

  std::string ch = detail::file_if_present(root / "chambers.json");
  if (!ch.empty()) {
    Json j = parse_json(ch, (root / "chambers.json").string());
    out += "\nchambers (" + std::to_string(j.value("count", j["chambers"].size())) + ")\n";
    for (const auto& c : j["chambers"]) {
      std::string m = "(";
      bool first = true;
      for (const auto& v : c["representative"]) {
        m += (first ? "" : ",") + std::to_string(v.get<long long>());
        first = false;
      }
      out += "  " + detail::pad(c["pattern"].get<std::string>(), 8) + m + ")\n";
    }
  }

  if (run.contains("results") && run["results"].contains("semiconjugacy")) {
    const auto& s = run["results"]["semiconjugacy"];
    out += "\nsemiconjugacy\n";
    out += "  residual " + sci(s["residual"].get<double>()) + ", iterations " + std::to_string(s["iterations"].get<int>()) +
           ", contraction rate " + sci(s["contraction_rate"].get<double>()) + "\n";
    if (s.contains("oracle_distance")) out += "  oracle distance " + sci(s["oracle_distance"].get<double>()) + "\n";
    if (s.contains("equivariance")) {
      out += "  equivariance";
      int g = 1;
      for (const auto& e : s["equivariance"]) out += " g" + std::to_string(g++) + "=" + sci(e.get<double>());
      out += "\n";
    }
  }
  return out;
}

}  // namespace cartanlab::lab

#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "json.hpp"

#include "cartanlab/errors.hpp"

namespace cartanlab {

using Json = nlohmann::ordered_json;

namespace detail {

inline void write_json(std::string& out, const Json& j, int indent, int depth) {
  auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += Json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        write_json(out, it.value(), indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& e : j) flat = flat && !e.is_structured();
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += flat ? ", " : ",";
        first = false;
        if (!flat) newline(depth + 1);
        write_json(out, e, indent, depth + 1);
      }
      if (!flat) newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Serializes with every real printed to 17 significant digits (exact
/// IEEE-754 round trip) and integers verbatim.
inline std::string dump_json(const Json& j, int indent = 2) {
  std::string out;
  detail::write_json(out, j, indent, 0);
  if (indent >= 0) out += '\n';
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::Io, "cannot open " + path + " for writing");
  f << text;
  require(static_cast<bool>(f), ErrorCode::Io, "write failed for " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::Io, "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

inline Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw LabError(ErrorCode::Config, origin + ": " + e.what());
  }
}

}  // namespace cartanlab

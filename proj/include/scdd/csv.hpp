#pragma once

// Minimal reader/writer for the pipeline's comma-separated tables. Fields
// never contain commas or quotes, so no quoting is supported.

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "scdd/error.hpp"

namespace scdd::csv {

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// One data row with its 1-based line number in the source file.
struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;

  const std::string& operator[](std::size_t i) const { return fields[i]; }
};

/// Reads a whole table and checks the header matches `expected` exactly.
/// Blank lines are skipped; a row with the wrong field count is a parse error.
inline std::vector<Row> read_table(const std::string& path, const std::vector<std::string>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");

  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = trim(line);
    if (lineno == 1 && view.size() >= 3 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
    if (view.empty()) continue;
    auto parts = split(view);
    if (!have_header) {
      std::vector<std::string> header;
      for (auto p : parts) header.emplace_back(trim(p));
      if (header != expected) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        throw Error(ErrorKind::schema, path + ":" + std::to_string(lineno) +
                                           ": unexpected header, expected '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (parts.size() != expected.size()) {
      throw Error(ErrorKind::parse, path + ":" + std::to_string(lineno) + ": expected " +
                                        std::to_string(expected.size()) + " fields, got " +
                                        std::to_string(parts.size()));
    }
    Row row;
    row.line = lineno;
    row.fields.reserve(parts.size());
    for (auto p : parts) row.fields.emplace_back(trim(p));
    rows.push_back(std::move(row));
  }
  if (!have_header) throw Error(ErrorKind::schema, path + ": missing header");
  return rows;
}

inline std::string location(const std::string& path, const Row& row) {
  return path + ":" + std::to_string(row.line);
}

/// Parses a finite double; empty input yields nullopt.
inline std::optional<double> parse_optional_double(std::string_view s, const std::string& where) {
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  const auto* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) {
    throw Error(ErrorKind::parse, where + ": not a number: '" + std::string(s) + "'");
  }
  return value;
}

inline double parse_double(std::string_view s, const std::string& where) {
  auto v = parse_optional_double(s, where);
  if (!v) throw Error(ErrorKind::parse, where + ": missing numeric value");
  return *v;
}

template <typename Int>
std::optional<Int> parse_optional_int(std::string_view s, const std::string& where) {
  if (s.empty()) return std::nullopt;
  Int value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::parse, where + ": not an integer: '" + std::string(s) + "'");
  }
  return value;
}

/// Shortest decimal form that round-trips to the same double.
/// Shortest round-trip text; plain notation for magnitudes in [1e-6, 1e15).
inline std::string format_double(double v) {
  char buf[128];
  const double a = std::fabs(v);
  const bool plain = a == 0.0 || (a >= 1e-6 && a < 1e15);
  const auto [ptr, ec] = plain ? std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed)
                               : std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error(ErrorKind::internal, "double formatting failed");
  return std::string(buf, ptr);
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out;
}

}  // namespace scdd::csv

#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "preftrans/error.hpp"
#include "preftrans/sphere.hpp"
#include "preftrans/transport.hpp"

#ifndef PREFTRANS_VERSION
#define PREFTRANS_VERSION "0.0.0"
#endif

namespace preftrans {

inline constexpr std::string_view kVersion = PREFTRANS_VERSION;

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Shortest-roundtrip-safe text for a double (17 significant digits).
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// First line of every output file.
struct OutputHeader {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  std::string line() const {
    return "preftrans " + std::string(kVersion) + " config=" + hex64(config_hash) +
           " seed=" + std::to_string(seed);
  }
};

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(Errc::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(Errc::IoError, "cannot open " + path + " for writing");
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!os) fail(Errc::IoError, "write failed for " + path);
}

/// CSV text: "# <header>" line, column names, then rows.
class CsvBuilder {
 public:
  CsvBuilder(const OutputHeader& header, std::string_view columns) {
    out_ = "# " + header.line() + "\n";
    out_ += columns;
    out_ += '\n';
  }

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((out_ += (first ? "" : ","), out_ += field(fields), first = false), ...);
    out_ += '\n';
  }

  const std::string& str() const { return out_; }

 private:
  static std::string field(double v) { return fmt_double(v); }
  static std::string field(const std::string& s) { return s; }
  static std::string field(const char* s) { return s; }
  template <typename I>
    requires std::is_integral_v<I>
  static std::string field(I v) {
    return std::to_string(v);
  }

  std::string out_;
};

/// Sparse plan CSV with columns i,j,mass in entry order.
inline std::string plan_csv(const TransportPlan& plan, const OutputHeader& header) {
  CsvBuilder csv(header, "i,j,mass");
  for (const auto& e : plan.entries) csv.row(e.i, e.j, e.mass);
  return csv.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r' && c != ' ' && c != '\t') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_number(const std::string& tok, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size() || tok.empty()) fail(Errc::ConfigError, where + ": not a number: '" + tok + "'");
  return v;
}

}  // namespace detail

/// Measure from CSV rows x,y,z,weight. A header row with those names and
/// lines starting with '#' are skipped. Points are renormalized but must be
/// unit length within 1e-6.
inline DiscreteMeasure parse_measure_csv(const std::string& text, const std::string& source) {
  DiscreteMeasure m;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() == 4 && fields[0] == "x") continue;
    if (fields.size() != 4) {
      fail(Errc::ConfigError, where + ": expected 4 fields x,y,z,weight, got " + std::to_string(fields.size()));
    }
    const Vec3 v{detail::parse_number(fields[0], where + " field x"),
                 detail::parse_number(fields[1], where + " field y"),
                 detail::parse_number(fields[2], where + " field z")};
    if (std::abs(norm(v) - 1.0) > 1e-6) fail(Errc::ConfigError, where + ": point is not a unit vector");
    m.points.push_back(normalize(v));
    m.weights.push_back(detail::parse_number(fields[3], where + " field weight"));
  }
  return m;
}

inline std::string measure_csv(const DiscreteMeasure& m, const OutputHeader& header) {
  CsvBuilder csv(header, "x,y,z,weight");
  for (std::size_t k = 0; k < m.size(); ++k) {
    csv.row(m.points[k].x(), m.points[k].y(), m.points[k].z(), m.weights[k]);
  }
  return csv.str();
}

}  // namespace preftrans

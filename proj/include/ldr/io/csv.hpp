#pragma once

// Comma-separated outputs. Doubles use the shortest representation that
// round-trips, so files are byte-stable for identical inputs.

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ldr/error.hpp"
#include "ldr/ldr_propagator.hpp"

namespace ldr::io {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw ConfigError(where + ": cannot parse '" + std::string(s) + "' as a number");
  return v;
}

inline const std::vector<std::string>& observable_columns() {
  static const std::vector<std::string> cols{"t",        "x_mean",   "y_mean", "pop_ad_0",
                                             "pop_ad_1", "pop_di_0", "pop_di_1", "coh_re",
                                             "coh_im",   "coh_abs",  "norm"};
  return cols;
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out;
}

inline void write_observables(std::ostream& out, const ObservableSeries& series) {
  out << join(observable_columns()) << '\n';
  for (const auto& r : series.records) {
    out << join({format_double(r.t), format_double(r.x_mean), format_double(r.y_mean),
                 format_double(r.pop_ad[0]), format_double(r.pop_ad[1]), format_double(r.pop_di[0]),
                 format_double(r.pop_di[1]), format_double(r.coherence.real()),
                 format_double(r.coherence.imag()), format_double(std::abs(r.coherence)),
                 format_double(r.norm)})
        << '\n';
  }
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline ObservableSeries read_observables(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line) || line != join(observable_columns()))
    throw ConfigError(name + ": header does not match the observables schema");
  ObservableSeries series;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line);
    const std::string where = name + ":" + std::to_string(lineno);
    if (f.size() != observable_columns().size()) throw ConfigError(where + ": wrong column count");
    ObservableRecord r;
    r.t = parse_double(f[0], where);
    r.x_mean = parse_double(f[1], where);
    r.y_mean = parse_double(f[2], where);
    r.pop_ad = {parse_double(f[3], where), parse_double(f[4], where)};
    r.pop_di = {parse_double(f[5], where), parse_double(f[6], where)};
    r.coherence = {parse_double(f[7], where), parse_double(f[8], where)};
    r.norm = parse_double(f[10], where);
    series.records.push_back(r);
  }
  return series;
}

inline ObservableSeries read_observables_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open observables file '" + path + "'");
  return read_observables(in, path);
}

/// Long format: one (x, y, rho) row per grid point, x-major.
inline void write_density(std::ostream& out, std::span<const double> xs, std::span<const double> ys,
                          const Eigen::MatrixXd& rho) {
  out << "x,y,rho\n";
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ys.size(); ++j)
      out << format_double(xs[i]) << ',' << format_double(ys[j]) << ','
          << format_double(rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << '\n';
}

}  // namespace ldr::io

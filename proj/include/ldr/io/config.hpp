#pragma once

// Experiment configuration: JSON file with fixed sections, every key
// validated and unknown keys rejected.

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "ldr/electronic_model.hpp"
#include "ldr/error.hpp"
#include "ldr/reference_splitop.hpp"

namespace ldr::io {

using nlohmann::json;

struct BasisDimension {
  double min = -6.0;
  double max = 6.0;
  int count = 32;
  double width_factor = 1.0 / std::numbers::sqrt2;
};

struct WilsonLoopSpec {
  std::array<double, 2> center{0.5, 0.0};
  double radius = 0.3;
  std::size_t points = 256;
};

struct CompareTolerances {
  double x_mean = 5e-2;
  double y_mean = 5e-2;
  double pop_ad = 5e-2;
  double pop_di = 5e-2;
  double coh_abs = 2e-2;
  double norm = 1e-6;
};

struct ExperimentConfig {
  DiabaticModel model{1.0, 0.2, 1.0};
  std::array<BasisDimension, 2> basis{};
  GaugeMode gauge{GaugeKind::RandomPhase, 20221014};

  struct Propagation {
    double dt = 5e-3;
    double t_final = 40.0;
    std::size_t record_every = 10;
    std::array<double, 2> probe_offset{0.1, 0.1};
  } propagation;

  struct Reference {
    std::size_t nx = 256;
    std::size_t ny = 256;
    std::array<double, 4> extents{-8.0, 8.0, -8.0, 8.0};
    double dt = 2.5e-3;

    UniformGrid2D grid() const { return {extents[0], extents[1], extents[2], extents[3], nx, ny}; }
  } reference;

  struct Outputs {
    std::string directory = "out";
    std::vector<double> density_times{0.0, 40.0};
  } outputs;

  // Loops scanned by the `wilson` subcommand. Empty means the default scan
  // (CI-encircling loop, its refinement series and one non-enclosing loop).
  std::vector<WilsonLoopSpec> wilson_loops;

  CompareTolerances compare;
};

namespace detail {

inline void reject_unknown(const json& obj, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + (path.empty() ? key : path + "." + key) + "'");
  }
}

inline double real(const json& obj, const char* key, const std::string& path, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  const std::string where = path + "." + key;
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(where + ": must be finite");
  return x;
}

inline double positive(const json& obj, const char* key, const std::string& path, double fallback) {
  const double x = real(obj, key, path, fallback);
  if (!(x > 0.0)) throw ConfigError(path + "." + key + ": must be > 0");
  return x;
}

inline std::uint64_t count(const json& obj, const char* key, const std::string& path,
                           std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  const std::string where = path + "." + key;
  if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x <= 0) throw ConfigError(where + ": must be a positive integer");
  return static_cast<std::uint64_t>(x);
}

template <std::size_t N>
std::array<double, N> reals(const json& obj, const char* key, const std::string& path,
                            std::array<double, N> fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  const std::string where = path + "." + key;
  if (!v.is_array() || v.size() != N)
    throw ConfigError(where + ": expected an array of " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!v[i].is_number()) throw ConfigError(where + "[" + std::to_string(i) + "]: expected a number");
    out[i] = v[i].get<double>();
    if (!std::isfinite(out[i])) throw ConfigError(where + "[" + std::to_string(i) + "]: must be finite");
  }
  return out;
}

inline BasisDimension basis_dimension(const json& j, const std::string& path) {
  reject_unknown(j, path, {"min", "max", "count", "width_factor"});
  BasisDimension b;
  b.min = real(j, "min", path, b.min);
  b.max = real(j, "max", path, b.max);
  b.count = static_cast<int>(count(j, "count", path, static_cast<std::uint64_t>(b.count)));
  b.width_factor = positive(j, "width_factor", path, b.width_factor);
  if (!(b.max > b.min)) throw ConfigError(path + ": max must exceed min");
  if (b.count < 2) throw ConfigError(path + ".count: must be >= 2");
  return b;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& root) {
  using namespace detail;
  ExperimentConfig cfg;
  reject_unknown(root, "", {"model", "basis", "gauge", "propagation", "reference", "outputs", "wilson", "compare"});

  if (root.contains("model")) {
    const auto& j = root.at("model");
    reject_unknown(j, "model", {"kappa", "lambda", "delta"});
    cfg.model.kappa = real(j, "kappa", "model", cfg.model.kappa);
    cfg.model.lambda = real(j, "lambda", "model", cfg.model.lambda);
    cfg.model.delta = real(j, "delta", "model", cfg.model.delta);
  }

  if (root.contains("basis")) {
    const auto& j = root.at("basis");
    reject_unknown(j, "basis", {"x", "y"});
    if (j.contains("x")) cfg.basis[0] = basis_dimension(j.at("x"), "basis.x");
    if (j.contains("y")) cfg.basis[1] = basis_dimension(j.at("y"), "basis.y");
  }

  if (root.contains("gauge")) {
    const auto& j = root.at("gauge");
    reject_unknown(j, "gauge", {"mode", "seed"});
    if (j.contains("mode")) {
      if (!j.at("mode").is_string()) throw ConfigError("gauge.mode: expected a string");
      try {
        cfg.gauge.kind = parse_gauge_kind(j.at("mode").get<std::string>());
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("gauge.mode: ") + e.what());
      }
    }
    const bool random = cfg.gauge.kind != GaugeKind::FixedPositive;
    if (j.contains("seed")) {
      if (!j.at("seed").is_number_unsigned()) throw ConfigError("gauge.seed: expected a non-negative integer");
      cfg.gauge.seed = j.at("seed").get<std::uint64_t>();
    } else if (random) {
      throw ConfigError("gauge.seed: required when gauge.mode is random");
    }
  }

  if (root.contains("propagation")) {
    const auto& j = root.at("propagation");
    reject_unknown(j, "propagation", {"dt", "t_final", "record_every", "probe_offset"});
    auto& p = cfg.propagation;
    p.dt = positive(j, "dt", "propagation", p.dt);
    p.t_final = real(j, "t_final", "propagation", p.t_final);
    if (p.t_final < 0.0) throw ConfigError("propagation.t_final: must be >= 0");
    p.record_every = count(j, "record_every", "propagation", p.record_every);
    p.probe_offset = reals<2>(j, "probe_offset", "propagation", p.probe_offset);
  }

  if (root.contains("reference")) {
    const auto& j = root.at("reference");
    reject_unknown(j, "reference", {"nx", "ny", "extents", "dt"});
    auto& r = cfg.reference;
    r.nx = count(j, "nx", "reference", r.nx);
    r.ny = count(j, "ny", "reference", r.ny);
    r.extents = reals<4>(j, "extents", "reference", r.extents);
    r.dt = positive(j, "dt", "reference", r.dt);
    try {
      r.grid().validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("reference: ") + e.what());
    }
  }

  if (root.contains("outputs")) {
    const auto& j = root.at("outputs");
    reject_unknown(j, "outputs", {"directory", "density_times"});
    if (j.contains("directory")) {
      if (!j.at("directory").is_string()) throw ConfigError("outputs.directory: expected a string");
      cfg.outputs.directory = j.at("directory").get<std::string>();
    }
    if (j.contains("density_times")) {
      const auto& v = j.at("density_times");
      if (!v.is_array()) throw ConfigError("outputs.density_times: expected an array");
      cfg.outputs.density_times.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number() || !(v[i].get<double>() >= 0.0))
          throw ConfigError("outputs.density_times[" + std::to_string(i) + "]: expected a time >= 0");
        cfg.outputs.density_times.push_back(v[i].get<double>());
      }
    }
  }

  if (root.contains("wilson")) {
    const auto& j = root.at("wilson");
    reject_unknown(j, "wilson", {"loops"});
    if (j.contains("loops")) {
      const auto& v = j.at("loops");
      if (!v.is_array()) throw ConfigError("wilson.loops: expected an array");
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string path = "wilson.loops[" + std::to_string(i) + "]";
        reject_unknown(v[i], path, {"center", "radius", "points"});
        WilsonLoopSpec loop;
        loop.center = reals<2>(v[i], "center", path, loop.center);
        loop.radius = positive(v[i], "radius", path, loop.radius);
        loop.points = count(v[i], "points", path, loop.points);
        if (loop.points < 3) throw ConfigError(path + ".points: must be >= 3");
        cfg.wilson_loops.push_back(loop);
      }
    }
  }

  if (root.contains("compare")) {
    const auto& j = root.at("compare");
    reject_unknown(j, "compare", {"x_mean", "y_mean", "pop_ad", "pop_di", "coh_abs", "norm"});
    auto& c = cfg.compare;
    c.x_mean = positive(j, "x_mean", "compare", c.x_mean);
    c.y_mean = positive(j, "y_mean", "compare", c.y_mean);
    c.pop_ad = positive(j, "pop_ad", "compare", c.pop_ad);
    c.pop_di = positive(j, "pop_di", "compare", c.pop_di);
    c.coh_abs = positive(j, "coh_abs", "compare", c.coh_abs);
    c.norm = positive(j, "norm", "compare", c.norm);
  }
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return config_from_json(root);
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config_text(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Fully expanded config, used for manifests.
inline json to_json(const ExperimentConfig& cfg) {
  json j;
  j["model"] = {{"kappa", cfg.model.kappa}, {"lambda", cfg.model.lambda}, {"delta", cfg.model.delta}};
  const char* names[2] = {"x", "y"};
  for (int d = 0; d < 2; ++d) {
    const auto& b = cfg.basis[d];
    j["basis"][names[d]] = {{"min", b.min}, {"max", b.max}, {"count", b.count}, {"width_factor", b.width_factor}};
  }
  j["gauge"] = {{"mode", to_string(cfg.gauge.kind)}, {"seed", cfg.gauge.seed}};
  const auto& p = cfg.propagation;
  j["propagation"] = {{"dt", p.dt},
                      {"t_final", p.t_final},
                      {"record_every", p.record_every},
                      {"probe_offset", p.probe_offset}};
  const auto& r = cfg.reference;
  j["reference"] = {{"nx", r.nx}, {"ny", r.ny}, {"extents", r.extents}, {"dt", r.dt}};
  j["outputs"] = {{"directory", cfg.outputs.directory}, {"density_times", cfg.outputs.density_times}};
  json loops = json::array();
  for (const auto& l : cfg.wilson_loops)
    loops.push_back({{"center", l.center}, {"radius", l.radius}, {"points", l.points}});
  j["wilson"] = {{"loops", loops}};
  const auto& c = cfg.compare;
  j["compare"] = {{"x_mean", c.x_mean}, {"y_mean", c.y_mean}, {"pop_ad", c.pop_ad},
                  {"pop_di", c.pop_di}, {"coh_abs", c.coh_abs}, {"norm", c.norm}};
  return j;
}

}  // namespace ldr::io

// ldr-dyn: command-line front end for the LDR model study.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ldr/ldr.hpp"

#ifndef LDR_VERSION
#define LDR_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using ldr::io::format_double;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ldr::ConfigError("cannot write '" + path.string() + "'");
  return out;
}

void write_manifest(const fs::path& dir, const std::string& command, const ldr::io::ExperimentConfig& cfg,
                    json extra = json::object()) {
  json m;
  m["command"] = command;
  m["version"] = LDR_VERSION;
  m["config"] = ldr::io::to_json(cfg);
  m["seed"] = cfg.gauge.seed;
  for (auto& [k, v] : extra.items()) m[k] = v;
  open_out(dir / "manifest.json") << m.dump(2) << '\n';
}

std::string time_tag(double t) {
  return format_double(t);
}

void write_series_outputs(const fs::path& dir, const ldr::ObservableSeries& series,
                          const std::vector<ldr::io::DensitySnapshot>& densities,
                          const ldr::UniformGrid2D& grid) {
  auto obs = open_out(dir / "observables.csv");
  ldr::io::write_observables(obs, series);
  const auto xs = grid.xs();
  const auto ys = grid.ys();
  for (const auto& snap : densities) {
    auto out = open_out(dir / ("density_t" + time_tag(snap.t) + ".csv"));
    ldr::io::write_density(out, xs, ys, snap.rho);
  }
}

int run_ldr(const ldr::io::ExperimentConfig& cfg, const fs::path& dir) {
  const auto res = ldr::io::run_ldr(cfg);
  write_series_outputs(dir, res.series, res.densities, cfg.reference.grid());
  write_manifest(dir, "ldr", cfg,
                 {{"nodes", res.nodes},
                  {"captured_norm", res.captured_norm},
                  {"probe_node", res.probe_node},
                  {"probe_position", {res.probe.position[0], res.probe.position[1]}},
                  {"overlap_cond", {res.overlap_cond[0], res.overlap_cond[1]}},
                  {"energy_origin", res.energy_origin}});
  return 0;
}

int run_reference(const ldr::io::ExperimentConfig& cfg, const fs::path& dir) {
  const auto res = ldr::io::run_reference(cfg);
  write_series_outputs(dir, res.series, res.densities, cfg.reference.grid());
  write_manifest(dir, "reference", cfg,
                 {{"max_edge_density", res.max_edge_density},
                  {"probe_position", {res.probe.position[0], res.probe.position[1]}},
                  {"probe_weight", res.probe.weight}});
  return 0;
}

int run_compare(const ldr::io::ExperimentConfig& cfg, const fs::path& dir, const std::string& lhs,
                const std::string& rhs) {
  const auto report = ldr::io::compare_series(ldr::io::read_observables_file(lhs),
                                              ldr::io::read_observables_file(rhs), cfg.compare);
  auto out = open_out(dir / "comparison.csv");
  out << "observable,max_abs,rms,tolerance,pass\n";
  for (const auto& r : report.rows)
    out << r.name << ',' << format_double(r.max_abs) << ',' << format_double(r.rms) << ','
        << format_double(r.tolerance) << ',' << (r.pass ? "true" : "false") << '\n';
  write_manifest(dir, "compare", cfg, {{"lhs", lhs}, {"rhs", rhs}, {"pass", report.pass()}});
  std::cout << (report.pass() ? "pass" : "fail") << '\n';
  return report.pass() ? 0 : 1;
}

int run_wilson(const ldr::io::ExperimentConfig& cfg, const fs::path& dir) {
  auto out = open_out(dir / "wilson.csv");
  out << "center_x,center_y,radius,points,re_w,im_w,arg_w\n";
  for (const auto& row : ldr::io::run_wilson(cfg))
    out << format_double(row.loop.center[0]) << ',' << format_double(row.loop.center[1]) << ','
        << format_double(row.loop.radius) << ',' << row.loop.points << ',' << format_double(row.w.real())
        << ',' << format_double(row.w.imag()) << ',' << format_double(std::arg(row.w)) << '\n';
  write_manifest(dir, "wilson", cfg);
  return 0;
}

int run_basis_info(const ldr::io::ExperimentConfig& cfg, const fs::path& dir) {
  const auto basis = ldr::io::build_basis(cfg);
  const auto info = ldr::io::basis_info(basis);
  auto nodes = open_out(dir / "nodes.csv");
  nodes << "index,x,y\n";
  for (Eigen::Index n = 0; n < basis.nodes().rows(); ++n)
    nodes << n << ',' << format_double(basis.nodes()(n, 0)) << ',' << format_double(basis.nodes()(n, 1))
          << '\n';
  json j{{"nodes", info.nodes},
         {"overlap_cond", {info.overlap_cond[0], info.overlap_cond[1]}},
         {"kinetic_spectral_radius", {info.kinetic_radius[0], info.kinetic_radius[1]}},
         {"kinetic_spectral_radius_total", info.kinetic_radius_total}};
  open_out(dir / "basis_info.json") << j.dump(2) << '\n';
  write_manifest(dir, "basis-info", cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local diabatic representation dynamics for a two-state conical-intersection model"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string lhs, rhs;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory (overrides outputs.directory)");
    sub->add_option("--seed", seed, "gauge seed override");
  };
  auto* ldr_cmd = app.add_subcommand("ldr", "propagate in the local diabatic representation");
  auto* ref_cmd = app.add_subcommand("reference", "split-operator reference on a grid");
  auto* cmp_cmd = app.add_subcommand("compare", "compare two observables.csv files");
  auto* wil_cmd = app.add_subcommand("wilson", "Wilson-loop scan");
  auto* bas_cmd = app.add_subcommand("basis-info", "node list and basis diagnostics");
  for (auto* sub : {ldr_cmd, ref_cmd, cmp_cmd, wil_cmd, bas_cmd}) add_common(sub);
  cmp_cmd->add_option("--lhs", lhs, "first observables.csv")->required();
  cmp_cmd->add_option("--rhs", rhs, "second observables.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto cfg = ldr::io::parse_config(config_path);
    if (seed) cfg.gauge.seed = *seed;
    const fs::path root = out_dir.empty() ? fs::path(cfg.outputs.directory) : fs::path(out_dir);
    CLI::App* sub = app.get_subcommands().front();
    const fs::path dir = root / sub->get_name();
    fs::create_directories(dir);

    if (sub == ldr_cmd) return run_ldr(cfg, dir);
    if (sub == ref_cmd) return run_reference(cfg, dir);
    if (sub == cmp_cmd) return run_compare(cfg, dir, lhs, rhs);
    if (sub == wil_cmd) return run_wilson(cfg, dir);
    return run_basis_info(cfg, dir);
  } catch (const ldr::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: io: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
  }
  return 2;
}

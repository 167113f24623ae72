#pragma once

// Orchestration of the model study: LDR run, split-operator reference,
// series comparison, Wilson-loop scans and basis diagnostics.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ldr/electronic_model.hpp"
#include "ldr/error.hpp"
#include "ldr/io/config.hpp"
#include "ldr/ldr_propagator.hpp"
#include "ldr/nuclear_basis.hpp"
#include "ldr/reference_splitop.hpp"

namespace ldr::io {

/// Anchor of the coherence probe: the CI, or the origin when κ = 0.
inline std::array<double, 2> probe_anchor(const DiabaticModel& model) {
  try {
    return ci_locus(model);
  } catch (const NoIsolatedIntersection&) {
    return {0.0, 0.0};
  }
}

inline NuclearBasisND build_basis(const ExperimentConfig& cfg, std::size_t max_nodes = kDefaultMaxNodes) {
  std::vector<LocalizedBasis1D> factors;
  for (const auto& b : cfg.basis)
    factors.push_back(localize(build_primitive_1d(b.min, b.max, b.count, b.width_factor, 1.0)));
  return tensor_product(std::move(factors), max_nodes);
}

/// Probe node: the node nearest to anchor + probe_offset. Its weight
/// 1/χ_p(R_p)² maps pointwise amplitudes onto node coefficients.
inline std::pair<std::size_t, ProbePoint> probe_for(const NuclearBasisND& basis, const ExperimentConfig& cfg) {
  const auto anchor = probe_anchor(cfg.model);
  const std::array<double, 2> target{anchor[0] + cfg.propagation.probe_offset[0],
                                     anchor[1] + cfg.propagation.probe_offset[1]};
  const std::size_t node = basis.nearest_node(target);
  ProbePoint probe;
  probe.position = {basis.nodes()(static_cast<Eigen::Index>(node), 0),
                    basis.nodes()(static_cast<Eigen::Index>(node), 1)};
  const double amp = node_amplitude(basis, node, probe.position);
  probe.weight = 1.0 / (amp * amp);
  return {node, probe};
}

struct LdrSystem {
  NuclearBasisND basis;
  AdiabaticSet states;
  OverlapTensor overlaps;
  VibronicHamiltonian hamiltonian;
  InitialState initial;
  std::size_t probe_node = 0;
  ProbePoint probe;
};

struct LdrOptions {
  bool dense_overlaps = true;    // needed for density snapshots
  bool same_state_only = false;  // decoupled (adiabatic) limit
  bool shift_to_mean_energy = true;
  std::size_t max_nodes = kDefaultMaxNodes;
};

inline LdrSystem build_ldr_system(const ExperimentConfig& cfg, const LdrOptions& opt = {}) {
  LdrSystem sys;
  sys.basis = build_basis(cfg, opt.max_nodes);
  sys.states = apply_gauge(adiabatic_states(cfg.model, sys.basis.nodes()), cfg.gauge);
  sys.overlaps = opt.dense_overlaps ? electronic_overlap(sys.states)
                                    : electronic_overlap(sys.states, sys.basis.coupling_pattern());
  if (opt.same_state_only) sys.overlaps = sys.overlaps.same_state_only();
  sys.hamiltonian = assemble_hamiltonian(sys.states.energies, sys.basis.kinetic(), sys.overlaps);
  sys.initial = initial_coefficients(GaussianPacket::vertical_excitation(), sys.basis, sys.states);
  if (opt.shift_to_mean_energy) {
    const auto& c0 = sys.initial.coefficients.values;
    sys.hamiltonian.shift_energy(c0.dot(sys.hamiltonian * c0).real());
  }
  std::tie(sys.probe_node, sys.probe) = probe_for(sys.basis, cfg);
  return sys;
}

struct DensitySnapshot {
  double t = 0.0;
  Eigen::MatrixXd rho;
};

/// Maps requested snapshot times onto record steps; throws if a time falls
/// between records.
inline std::vector<std::size_t> snapshot_steps(const std::vector<double>& times, double dt,
                                               double t_final, std::size_t record_every) {
  const std::size_t last = step_count(dt, t_final);
  std::vector<std::size_t> steps;
  for (double t : times) {
    const auto s = static_cast<std::size_t>(std::llround(t / dt));
    if (s > last || std::abs(static_cast<double>(s) * dt - t) > 1e-9 * std::max(1.0, t) ||
        (s % record_every != 0 && s != last))
      throw ConfigError("outputs.density_times: time " + std::to_string(t) +
                        " is not on the record grid");
    steps.push_back(s);
  }
  return steps;
}

struct LdrResult {
  ObservableSeries series;
  std::vector<DensitySnapshot> densities;
  double captured_norm = 0.0;
  std::size_t nodes = 0;
  std::size_t probe_node = 0;
  ProbePoint probe;
  std::array<double, 2> overlap_cond{};
  double energy_origin = 0.0;
};

inline LdrResult run_ldr(const ExperimentConfig& cfg, LdrOptions opt = {}) {
  const bool want_density = !cfg.outputs.density_times.empty();
  opt.dense_overlaps = opt.dense_overlaps && want_density;
  const LdrSystem sys = build_ldr_system(cfg, opt);
  const auto& p = cfg.propagation;
  const auto steps = snapshot_steps(cfg.outputs.density_times, p.dt, p.t_final, p.record_every);
  const auto grid = cfg.reference.grid();
  const auto xs = grid.xs();
  const auto ys = grid.ys();

  LdrResult out;
  out.captured_norm = sys.initial.captured_norm;
  out.nodes = sys.basis.size();
  out.probe_node = sys.probe_node;
  out.probe = sys.probe;
  out.energy_origin = sys.hamiltonian.energy_origin();
  for (std::size_t d = 0; d < 2; ++d) out.overlap_cond[d] = sys.basis.factors()[d].overlap_cond;

  const LdrObservables observe(sys.basis, sys.states, sys.probe_node);
  out.series = propagate(
      sys.hamiltonian, sys.initial.coefficients, {p.dt, p.t_final, p.record_every}, observe,
      [&](std::size_t step, const CoefficientVector& c) {
        for (std::size_t k = 0; k < steps.size(); ++k)
          if (steps[k] == step)
            out.densities.push_back({cfg.outputs.density_times[k],
                                     nuclear_density(c, sys.overlaps, sys.basis, xs, ys)});
      });
  return out;
}

struct ReferenceResult {
  ObservableSeries series;
  std::vector<DensitySnapshot> densities;
  double max_edge_density = 0.0;
  ProbePoint probe;
};

/// Reference stride that lands on the LDR record times.
inline std::size_t reference_record_every(const ExperimentConfig& cfg) {
  const double interval = cfg.propagation.dt * static_cast<double>(cfg.propagation.record_every);
  const double ratio = interval / cfg.reference.dt;
  const auto stride = static_cast<std::size_t>(std::llround(ratio));
  if (stride == 0 || std::abs(ratio - static_cast<double>(stride)) > 1e-9 * ratio)
    throw ConfigError("reference.dt must divide propagation.dt * propagation.record_every");
  return stride;
}

inline ReferenceResult run_reference(const ExperimentConfig& cfg) {
  const auto grid = cfg.reference.grid();
  SplitOperator prop(cfg.model, grid, cfg.reference.dt);
  const std::size_t stride = reference_record_every(cfg);
  const auto steps = snapshot_steps(cfg.outputs.density_times, cfg.reference.dt,
                                    cfg.propagation.t_final, stride);

  ReferenceResult out;
  out.probe = probe_for(build_basis(cfg), cfg).second;
  out.series = propagate_reference(
      prop, init_reference(grid, GaussianPacket::vertical_excitation()), cfg.propagation.t_final,
      stride, out.probe, [&](std::size_t step, const DiabaticWavefunction& wf) {
        out.max_edge_density = std::max(out.max_edge_density, edge_density(wf));
        for (std::size_t k = 0; k < steps.size(); ++k)
          if (steps[k] == step)
            out.densities.push_back({cfg.outputs.density_times[k], ReferenceObservables::density(wf)});
      });
  return out;
}

struct ObservableDeviation {
  std::string name;
  double max_abs = 0.0;
  double rms = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

struct ComparisonReport {
  std::vector<ObservableDeviation> rows;
  bool pass() const {
    for (const auto& r : rows)
      if (!r.pass) return false;
    return true;
  }
  const ObservableDeviation& at(const std::string& name) const {
    for (const auto& r : rows)
      if (r.name == name) return r;
    throw ConfigError("no comparison row named " + name);
  }
};

inline ComparisonReport compare_series(const ObservableSeries& a, const ObservableSeries& b,
                                       const CompareTolerances& tol) {
  if (a.records.size() != b.records.size())
    throw AlignmentError("series have " + std::to_string(a.records.size()) + " and " +
                         std::to_string(b.records.size()) + " records");
  for (std::size_t k = 0; k < a.records.size(); ++k)
    if (a.records[k].t != b.records[k].t)
      throw AlignmentError("record " + std::to_string(k) + " times differ");

  struct Column {
    const char* name;
    double tol;
    double (*get)(const ObservableRecord&);
  };
  const Column columns[] = {
      {"x_mean", tol.x_mean, [](const ObservableRecord& r) { return r.x_mean; }},
      {"y_mean", tol.y_mean, [](const ObservableRecord& r) { return r.y_mean; }},
      {"pop_ad_0", tol.pop_ad, [](const ObservableRecord& r) { return r.pop_ad[0]; }},
      {"pop_ad_1", tol.pop_ad, [](const ObservableRecord& r) { return r.pop_ad[1]; }},
      {"pop_di_0", tol.pop_di, [](const ObservableRecord& r) { return r.pop_di[0]; }},
      {"pop_di_1", tol.pop_di, [](const ObservableRecord& r) { return r.pop_di[1]; }},
      {"coh_abs", tol.coh_abs, [](const ObservableRecord& r) { return std::abs(r.coherence); }},
      {"norm", tol.norm, [](const ObservableRecord& r) { return r.norm; }},
  };
  ComparisonReport report;
  for (const auto& col : columns) {
    ObservableDeviation d;
    d.name = col.name;
    d.tolerance = col.tol;
    double sq = 0.0;
    for (std::size_t k = 0; k < a.records.size(); ++k) {
      const double diff = std::abs(col.get(a.records[k]) - col.get(b.records[k]));
      d.max_abs = std::max(d.max_abs, diff);
      sq += diff * diff;
    }
    d.rms = a.records.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(a.records.size()));
    d.pass = d.max_abs <= d.tolerance;
    report.rows.push_back(d);
  }
  return report;
}

struct WilsonRow {
  WilsonLoopSpec loop;
  Complex w;
};

/// Default scan: the CI-encircling loop at 32…512 points plus one loop that
/// encloses no degeneracy.
inline std::vector<WilsonLoopSpec> default_wilson_loops(const DiabaticModel& model) {
  std::vector<WilsonLoopSpec> loops;
  const auto ci = probe_anchor(model);
  for (std::size_t n : {32, 64, 128, 256, 512}) loops.push_back({ci, 0.3, n});
  loops.push_back({{2.0, 2.0}, 0.1, 64});
  return loops;
}

inline std::vector<WilsonRow> run_wilson(const ExperimentConfig& cfg, std::size_t alpha = 0) {
  const auto loops = cfg.wilson_loops.empty() ? default_wilson_loops(cfg.model) : cfg.wilson_loops;
  std::vector<WilsonRow> rows;
  for (const auto& loop : loops)
    rows.push_back({loop, wilson_loop(cfg.model, circle_loop(loop.center, loop.radius, loop.points),
                                      alpha, cfg.gauge)});
  return rows;
}

/// Max density on the y = 0 row within |x - x_ci| <= half_width, divided by
/// the global maximum. Uses the grid row closest to y = 0.
inline double nodal_line_metric(const Eigen::MatrixXd& rho, std::span<const double> xs,
                                std::span<const double> ys, double x_ci, double half_width = 1.5) {
  std::size_t row = 0;
  for (std::size_t j = 1; j < ys.size(); ++j)
    if (std::abs(ys[j]) < std::abs(ys[row])) row = j;
  double line = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (std::abs(xs[i] - x_ci) <= half_width)
      line = std::max(line, rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(row)));
  return line / rho.maxCoeff();
}

struct BasisInfo {
  std::array<double, 2> overlap_cond{};
  std::array<double, 2> kinetic_radius{};  // per-dimension max |eigenvalue|
  double kinetic_radius_total = 0.0;
  std::size_t nodes = 0;
};

inline BasisInfo basis_info(const NuclearBasisND& basis) {
  BasisInfo info;
  info.nodes = basis.size();
  for (std::size_t d = 0; d < 2; ++d) {
    const auto& f = basis.factors()[d];
    info.overlap_cond[d] = f.overlap_cond;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(f.kinetic, Eigen::EigenvaluesOnly);
    info.kinetic_radius[d] = eig.eigenvalues().cwiseAbs().maxCoeff();
    info.kinetic_radius_total += info.kinetic_radius[d];
  }
  return info;
}

}  // namespace ldr::io

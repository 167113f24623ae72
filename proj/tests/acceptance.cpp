// Acceptance run: one PASS/FAIL line per criterion. Exits 0 once every check
// has been evaluated (2 on an exception); with --strict any FAIL exits 1.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ldr/ldr.hpp"

using namespace ldr;
using namespace ldr::io;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

void note(const std::string& s) {
  std::printf("  .. %s\n", s.c_str());
  std::fflush(stdout);
}

double integrate(auto f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-14);
}

double gauss(double c, double s, double x) {
  return std::pow(std::numbers::pi * s * s, -0.25) * std::exp(-(x - c) * (x - c) / (2 * s * s));
}

double dgauss(double c, double s, double x) { return -(x - c) / (s * s) * gauss(c, s, x); }

void matrix_elements() {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> count(1, 8);
  std::uniform_real_distribution<double> pos(-3.0, 3.0), width(0.3, 1.5), mass(0.5, 3.0);
  double worst = 0.0;
  const int trials = 64;
  for (int trial = 0; trial < trials; ++trial) {
    PrimitiveBasis1D b;
    const int n = count(rng);
    while (static_cast<int>(b.centers.size()) < n) {
      const double c = pos(rng);
      if (std::none_of(b.centers.begin(), b.centers.end(), [&](double o) { return std::abs(o - c) < 0.05; }))
        b.centers.push_back(c);
    }
    std::sort(b.centers.begin(), b.centers.end());
    b.width = width(rng);
    b.mass = mass(rng);
    const double lo = b.centers.front() - 14 * b.width, hi = b.centers.back() + 14 * b.width;
    Eigen::MatrixXd sq(n, n), xq(n, n), tq(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double a = b.centers[i], c = b.centers[j], w = b.width;
        sq(i, j) = integrate([&](double r) { return gauss(a, w, r) * gauss(c, w, r); }, lo, hi);
        xq(i, j) = integrate([&](double r) { return r * gauss(a, w, r) * gauss(c, w, r); }, lo, hi);
        tq(i, j) = integrate([&](double r) { return dgauss(a, w, r) * dgauss(c, w, r); }, lo, hi) / (2 * b.mass);
      }
    // Random bases may be badly conditioned; compare elements directly.
    Eigen::MatrixXd s(n, n), x(n, n), t(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        s(i, j) = gaussian::overlap(b.centers[i], b.centers[j], b.width);
        x(i, j) = gaussian::position(b.centers[i], b.centers[j], b.width);
        t(i, j) = gaussian::kinetic(b.centers[i], b.centers[j], b.width, b.mass);
      }
    worst = std::max({worst, (s - sq).cwiseAbs().maxCoeff(), (x - xq).cwiseAbs().maxCoeff(),
                      (t - tq).cwiseAbs().maxCoeff()});
  }
  report(1, "matrix elements vs adaptive quadrature", worst < 1e-10,
         num(worst) + " < 1e-10 over " + std::to_string(trials) + " random bases");
}

void localization(const ExperimentConfig& cfg) {
  double ortho = 0.0, diag = 0.0, cond = 0.0;
  for (const auto& d : cfg.basis) {
    const auto prim = build_primitive_1d(d.min, d.max, d.count, d.width_factor);
    const auto loc = localize(prim);
    Eigen::MatrixXd s(prim.size(), prim.size()), x(prim.size(), prim.size());
    for (std::size_t i = 0; i < prim.size(); ++i)
      for (std::size_t j = 0; j < prim.size(); ++j) {
        s(i, j) = gaussian::overlap(prim.centers[i], prim.centers[j], prim.width);
        x(i, j) = gaussian::position(prim.centers[i], prim.centers[j], prim.width);
      }
    const Eigen::MatrixXd& u = loc.transform;
    ortho = std::max(ortho, (u.transpose() * s * u - Eigen::MatrixXd::Identity(s.rows(), s.cols()))
                                .cwiseAbs().maxCoeff());
    Eigen::MatrixXd ux = u.transpose() * x * u;
    ux.diagonal() -= loc.nodes;
    diag = std::max(diag, ux.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);
    cond = std::max(cond, eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff());
  }
  report(2, "localization of production basis", ortho < 1e-10 && diag < 1e-10 && cond < 1e8,
         "|U'SU-I| " + num(ortho) + ", |U'XU-diag| " + num(diag) + " < 1e-10; cond(S) " + num(cond) +
             " < 1e8");
}

void overlap_structure(const ExperimentConfig& cfg) {
  const auto sys = build_ldr_system(cfg);
  const Eigen::MatrixXcd a = sys.overlaps.to_dense();
  const double herm = (a - a.adjoint()).cwiseAbs().maxCoeff();
  double ident = 0.0;
  for (Eigen::Index n = 0; n < a.rows() / 2; ++n)
    ident = std::max(ident, (a.block<2, 2>(2 * n, 2 * n) - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff());
  report(3, "overlap tensor structure", herm < 1e-14 && ident < 1e-14,
         "Hermiticity " + num(herm) + ", diagonal blocks " + num(ident) + " < 1e-14");
}

double series_gap(const ObservableSeries& a, const ObservableSeries& b, double (*get)(const ObservableRecord&)) {
  double gap = 0.0;
  for (std::size_t k = 0; k < a.records.size(); ++k) gap = std::max(gap, std::abs(get(a.records[k]) - get(b.records[k])));
  return gap;
}

double max_drift(const ObservableSeries& s) {
  double d = 0.0;
  for (const auto& r : s.records) d = std::max(d, std::abs(r.norm - 1.0));
  return d;
}

double x_of(const ObservableRecord& r) { return r.x_mean; }
double y_of(const ObservableRecord& r) { return r.y_mean; }
double pa0(const ObservableRecord& r) { return r.pop_ad[0]; }
double pa1(const ObservableRecord& r) { return r.pop_ad[1]; }
double pd0(const ObservableRecord& r) { return r.pop_di[0]; }
double pd1(const ObservableRecord& r) { return r.pop_di[1]; }
double coh(const ObservableRecord& r) { return std::abs(r.coherence); }
double nrm(const ObservableRecord& r) { return r.norm; }

double pop_gap(const ObservableSeries& a, const ObservableSeries& b) {
  return std::max(series_gap(a, b, pa0), series_gap(a, b, pa1));
}

const DensitySnapshot& density_at(const std::vector<DensitySnapshot>& d, double t) {
  for (const auto& s : d)
    if (s.t == t) return s;
  throw ConfigError("no density snapshot at t = " + format_double(t));
}

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::string lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start).count();
    start = now;
    return num(s) + " s";
  }
};

void harmonic_limit(const ExperimentConfig& production) {
  ExperimentConfig cfg = production;
  cfg.model = {0.0, 0.0, 1.0};
  cfg.outputs.density_times.clear();
  const auto ldr = run_ldr(cfg);
  double x_err = 0.0, pop = 0.0;
  const auto& first = ldr.series.records.front();
  for (const auto& r : ldr.series.records) {
    x_err = std::max(x_err, std::abs(r.x_mean + std::cos(r.t)));
    for (int s = 0; s < 2; ++s)
      pop = std::max({pop, std::abs(r.pop_ad[s] - first.pop_ad[s]), std::abs(r.pop_di[s] - first.pop_di[s])});
  }

  // Strang splitting carries a t dt^2 / 24 phase error on the oscillator, so
  // the 1e-6 check runs on its own fine time step and a modest grid.
  constexpr std::size_t kSub = 8;
  cfg.reference.nx = cfg.reference.ny = 64;
  cfg.reference.extents = {-8.0, 8.0, -8.0, 8.0};
  cfg.reference.dt = cfg.propagation.dt / kSub;
  const auto ref = run_reference(cfg);
  double rx = 0.0, rpop = 0.0;
  const auto& rfirst = ref.series.records.front();
  for (const auto& r : ref.series.records) {
    rx = std::max(rx, std::abs(r.x_mean + std::cos(r.t)));
    for (int s = 0; s < 2; ++s)
      rpop = std::max({rpop, std::abs(r.pop_ad[s] - rfirst.pop_ad[s]), std::abs(r.pop_di[s] - rfirst.pop_di[s])});
  }
  report(10, "harmonic limit, <x> = -cos t",
         x_err < 1e-3 && rx < 1e-6 && pop < 1e-10 && rpop < 1e-10,
         "LDR " + num(x_err) + " < 1e-3, reference " + num(rx) + " < 1e-6 (dt " + num(cfg.reference.dt) +
             "); population change LDR " + num(pop) + ", reference " + num(rpop) + " < 1e-10");
}

void same_state_truncation(const ExperimentConfig& production, double norm_drift) {
  ExperimentConfig cfg = production;
  cfg.outputs.density_times.clear();
  LdrOptions opt;
  opt.same_state_only = true;
  const auto run = run_ldr(cfg, opt);
  double change = 0.0;
  const auto& first = run.series.records.front();
  for (const auto& r : run.series.records)
    for (int s = 0; s < 2; ++s) change = std::max(change, std::abs(r.pop_ad[s] - first.pop_ad[s]));

  // Leakage: a state confined to one adiabatic surface must stay there bit for bit.
  const auto sys = build_ldr_system(cfg, opt);
  CoefficientVector c = sys.initial.coefficients;
  for (Eigen::Index n = 0; n < c.values.size(); n += 2) c.values(n + 1) = 0.0;
  c.values.normalize();
  Rk4Integrator rk4(sys.hamiltonian);
  double leak = 0.0;
  for (std::size_t k = 0; k < step_count(cfg.propagation.dt, cfg.propagation.t_final); ++k) rk4.step(c, cfg.propagation.dt);
  for (Eigen::Index n = 1; n < c.values.size(); n += 2) leak = std::max(leak, std::abs(c.values(n)));

  // RK4 damps the truncated dynamics too; halving dt shows the change is
  // integrator error rather than transfer. Reported, not part of the check.
  ExperimentConfig half = cfg;
  half.propagation.dt /= 2;
  half.propagation.record_every *= 2;
  const auto run_half = run_ldr(half, opt);
  double change_half = 0.0;
  for (const auto& r : run_half.series.records)
    for (int s = 0; s < 2; ++s) change_half = std::max(change_half, std::abs(r.pop_ad[s] - first.pop_ad[s]));
  report(10, "same-state truncation freezes adiabatic populations", leak == 0.0 && change <= norm_drift,
         "cross-state leakage " + num(leak) + " == 0; max |dP| " + num(change) + " <= RK4 norm drift " +
             num(norm_drift));
  note("same-state max |dP| at dt/2: " + num(change_half) + " (" + num(change / change_half) + "x smaller)");
}

// exp(-i H t) from the Hermitian eigendecomposition.
Eigen::MatrixXcd expm_eigen(const Eigen::MatrixXcd& h, double t) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h);
  const Eigen::VectorXcd phase = (Complex(0.0, -t) * eig.eigenvalues().cast<Complex>()).array().exp();
  return eig.eigenvectors() * phase.asDiagonal() * eig.eigenvectors().adjoint();
}

void three_node_brute_force() {
  Eigen::MatrixXd pts(3, 2);
  pts << -0.3, 0.4, 0.5, -0.2, 1.1, 0.7;
  const auto set = apply_gauge(adiabatic_states(DiabaticModel{1.0, 0.2, 1.0}, pts), {GaugeKind::RandomPhase, 5});
  Eigen::MatrixXd t(3, 3);
  t << 1.2, -0.4, 0.1, -0.4, 0.9, -0.3, 0.1, -0.3, 1.5;
  const auto a = electronic_overlap(set);
  const auto h = assemble_hamiltonian(set.energies, t, a);

  // Dense H built independently from the node energies, kinetic and overlaps.
  Eigen::MatrixXcd dense = Eigen::MatrixXcd::Zero(6, 6);
  for (int m = 0; m < 3; ++m)
    for (int n = 0; n < 3; ++n)
      for (int b = 0; b < 2; ++b)
        for (int al = 0; al < 2; ++al) {
          const Complex overlap = set.vectors[m].col(b).dot(set.vectors[n].col(al));
          dense(2 * m + b, 2 * n + al) = t(m, n) * overlap + (m == n && b == al ? set.energies(m, b) : 0.0);
        }
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  CoefficientVector c;
  c.values.resize(6);
  for (Eigen::Index i = 0; i < 6; ++i) c.values(i) = Complex(g(rng), g(rng));
  c.values.normalize();
  const Eigen::VectorXcd exact = expm_eigen(dense, 10.0) * c.values;
  Rk4Integrator rk4(h);
  for (int k = 0; k < 2000; ++k) rk4.step(c, 5e-3);
  const double err = (c.values - exact).cwiseAbs().maxCoeff();
  report(11, "3-node RK4 vs matrix exponential", err < 1e-8, num(err) + " < 1e-8 at t = 10 (dt 5e-3)");
}

}  // namespace

int main(int argc, char** argv) {
  std::string path = std::string(LDR_SOURCE_DIR) + "/configs/default.json";
  bool strict = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--strict") == 0)
      strict = true;
    else
      path = argv[i];
  }

  try {
    const auto cfg = parse_config(path);
    if (std::find(cfg.outputs.density_times.begin(), cfg.outputs.density_times.end(), cfg.propagation.t_final) ==
        cfg.outputs.density_times.end())
      throw ConfigError("acceptance needs a density snapshot at t_final");
    const double t_end = cfg.propagation.t_final;
    Clock clock;

    matrix_elements();
    localization(cfg);
    overlap_structure(cfg);

    const auto a = run_ldr(cfg);
    note("production LDR run " + clock.lap());
    ExperimentConfig seed_b = cfg;
    seed_b.gauge.seed = cfg.gauge.seed + 1;
    const auto b = run_ldr(seed_b);
    note("second gauge seed " + clock.lap());
    double gauge = 0.0;
    for (auto get : {x_of, y_of, pa0, pa1, pd0, pd1, coh, nrm}) gauge = std::max(gauge, series_gap(a.series, b.series, get));
    double rho = 0.0;
    for (std::size_t k = 0; k < a.densities.size(); ++k)
      rho = std::max(rho, (a.densities[k].rho - b.densities[k].rho).cwiseAbs().maxCoeff());
    report(4, "gauge-seed robustness", gauge < 1e-9 && rho < 1e-9,
           "observables " + num(gauge) + ", density " + num(rho) + " < 1e-9");

    ExperimentConfig half = cfg;
    half.propagation.dt /= 2;
    half.propagation.record_every *= 2;
    half.outputs.density_times.clear();
    const auto h = run_ldr(half);
    note("half time step " + clock.lap());
    const double drift = max_drift(a.series), drift_half = max_drift(h.series);
    report(5, "norm conservation and RK4 order", drift < 1e-8 && drift_half * 16 <= drift,
           "drift " + num(drift) + " < 1e-8; halving dt reduces it " + num(drift / drift_half) + "x >= 16");

    const auto ref = run_reference(cfg);
    note("reference run " + clock.lap() + ", edge density " + num(ref.max_edge_density));
    ExperimentConfig fine = cfg;
    for (auto& d : fine.basis) d.count *= 2;
    fine.outputs.density_times.clear();
    const auto f = run_ldr(fine);
    note("doubled basis " + clock.lap());
    const double gx = series_gap(a.series, ref.series, x_of), gp = pop_gap(a.series, ref.series);
    const double fx = series_gap(f.series, ref.series, x_of), fp = pop_gap(f.series, ref.series);
    report(6, "agreement with the split-operator reference", gx < 5e-2 && gp < 5e-2,
           "max |d<x>| " + num(gx) + ", max |dP| " + num(gp) + " < 5e-2");
    report(6, "convergence on doubling the node count", fx * 2 <= gx && fp * 2 <= gp,
           "<x> gap " + num(gx) + " -> " + num(fx) + " (" + num(gx / fx) + "x), P gap " + num(gp) + " -> " +
               num(fp) + " (" + num(gp / fp) + "x) >= 2x");

    const double c0 = std::abs(a.series.records.front().coherence);
    double cmax = 0.0;
    for (std::size_t k = 1; k < a.series.records.size(); ++k) cmax = std::max(cmax, coh(a.series.records[k]));
    const double cgap = series_gap(a.series, ref.series, coh);
    report(7, "local coherence vanishes at t = 0", c0 < 1e-6, num(c0) + " < 1e-6");
    report(7, "local coherence develops", cmax > 1e-3, "max " + num(cmax) + " > 1e-3");
    report(7, "coherence trace vs reference", cgap < 2e-2, "max-abs " + num(cgap) + " < 2e-2");

    const auto grid = cfg.reference.grid();
    const auto xs = grid.xs(), ys = grid.ys();
    const double x_ci = probe_anchor(cfg.model)[0];
    const double ml = nodal_line_metric(density_at(a.densities, t_end).rho, xs, ys, x_ci);
    const double mr = nodal_line_metric(density_at(ref.densities, t_end).rho, xs, ys, x_ci);
    report(8, "nodal line on y = 0 at t_final", ml < 0.05 && mr < 0.05,
           "LDR " + num(ml) + ", reference " + num(mr) + " < 0.05");

    const auto ci = probe_anchor(cfg.model);
    const auto loop = circle_loop(ci, 0.3, 256);
    const Complex w = wilson_loop(cfg.model, loop, 0, cfg.gauge);
    double inv = 0.0;
    for (const GaugeMode& g : {GaugeMode{GaugeKind::FixedPositive, 0}, GaugeMode{GaugeKind::RandomSign, 3},
                               GaugeMode{GaugeKind::RandomPhase, 99}})
      inv = std::max(inv, std::abs(wilson_loop(cfg.model, loop, 0, g) - w));
    const Complex w_out = wilson_loop(cfg.model, circle_loop({2.0, 2.0}, 0.3, 256), 0, cfg.gauge);
    const double arg_err = std::numbers::pi - std::abs(std::arg(w));
    report(9, "Wilson loop phase around the intersection", arg_err < 1e-6, "|arg W - pi| " + num(arg_err) + " < 1e-6");
    report(9, "Wilson loop modulus", std::abs(w) >= 0.98, "|W| " + num(std::abs(w)) + " >= 0.98 (256 points)");
    report(9, "Wilson loop gauge invariance", inv < 1e-14, num(inv) + " < 1e-14");
    report(9, "non-enclosing loop", std::abs(std::arg(w_out)) < 1e-6,
           "|arg W| " + num(std::abs(std::arg(w_out))) + " < 1e-6");

    harmonic_limit(cfg);
    same_state_truncation(cfg, drift);
    note("analytic limits " + clock.lap());
    three_node_brute_force();
  } catch (const std::exception& e) {
    std::printf("error: %s\n", e.what());
    return 2;
  }
  std::printf("%d criteria checks failed\n", failures);
  return strict && failures > 0 ? 1 : 0;
}

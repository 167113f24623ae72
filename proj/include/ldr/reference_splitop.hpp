#pragma once

// Exact reference: Strang split-operator propagation of the two diabatic
// nuclear wavepackets on a periodic uniform grid (FFTW for the kinetic step).

#include <fftw3.h>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <vector>

#include "ldr/electronic_model.hpp"
#include "ldr/error.hpp"
#include "ldr/ldr_propagator.hpp"

namespace ldr {

/// Periodic grid x_k = x_min + k dx, k = 0..nx-1, dx = (x_max - x_min)/nx.
struct UniformGrid2D {
  double x_min = -6.0, x_max = 6.0;
  double y_min = -6.0, y_max = 6.0;
  std::size_t nx = 128, ny = 128;

  void validate() const {
    auto pow2 = [](std::size_t n) { return n >= 16 && (n & (n - 1)) == 0; };
    if (!pow2(nx) || !pow2(ny)) throw ConfigError("reference grid sizes must be powers of two >= 16");
    if (!(x_max > x_min) || !(y_max > y_min)) throw ConfigError("reference grid extents must be increasing");
  }

  double dx() const { return (x_max - x_min) / static_cast<double>(nx); }
  double dy() const { return (y_max - y_min) / static_cast<double>(ny); }
  double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx(); }
  double y(std::size_t j) const { return y_min + static_cast<double>(j) * dy(); }

  std::vector<double> xs() const {
    std::vector<double> v(nx);
    for (std::size_t i = 0; i < nx; ++i) v[i] = x(i);
    return v;
  }
  std::vector<double> ys() const {
    std::vector<double> v(ny);
    for (std::size_t j = 0; j < ny; ++j) v[j] = y(j);
    return v;
  }

  /// FFT angular wavenumbers 2π·fftfreq(n, d).
  static std::vector<double> wavenumbers(std::size_t n, double d) {
    std::vector<double> k(n);
    const double scale = 2.0 * std::numbers::pi / (static_cast<double>(n) * d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto signed_i = i < (n + 1) / 2 ? static_cast<double>(i)
                                            : static_cast<double>(i) - static_cast<double>(n);
      k[i] = scale * signed_i;
    }
    return k;
  }
};

/// ψ_s stored row-major: index i·ny + j for (x_i, y_j).
struct DiabaticWavefunction {
  UniformGrid2D grid;
  std::array<std::vector<Complex>, kStates> psi;
  double time = 0.0;

  double norm2() const {
    double s = 0.0;
    for (const auto& comp : psi)
      for (const auto& v : comp) s += std::norm(v);
    return s * grid.dx() * grid.dy();
  }
};

/// Initial packet on diabatic |s⟩, discretely normalized. Requires the
/// packet to sit at least four widths inside the grid.
inline DiabaticWavefunction init_reference(const UniformGrid2D& grid, const GaussianPacket& packet) {
  grid.validate();
  if (packet.center.size() != 2 || packet.width.size() != 2)
    throw ConfigError("reference packet must be two-dimensional");
  if (packet.diabatic_state >= kStates) throw ConfigError("packet diabatic state out of range");
  const double lo[2] = {grid.x_min, grid.y_min};
  const double hi[2] = {grid.x_max, grid.y_max};
  for (int d = 0; d < 2; ++d) {
    const double margin = 4.0 * packet.width[d];
    if (packet.center[d] - margin < lo[d] || packet.center[d] + margin > hi[d])
      throw ConfigError("reference grid leaves less than four packet widths of margin");
  }
  DiabaticWavefunction wf;
  wf.grid = grid;
  for (auto& comp : wf.psi) comp.assign(grid.nx * grid.ny, Complex(0.0, 0.0));
  auto& target = wf.psi[packet.diabatic_state];
  for (std::size_t i = 0; i < grid.nx; ++i) {
    const double ux = (grid.x(i) - packet.center[0]) / packet.width[0];
    for (std::size_t j = 0; j < grid.ny; ++j) {
      const double uy = (grid.y(j) - packet.center[1]) / packet.width[1];
      target[i * grid.ny + j] = Complex(std::exp(-0.5 * (ux * ux + uy * uy)), 0.0);
    }
  }
  const double scale = 1.0 / std::sqrt(wf.norm2());
  for (auto& v : target) v *= scale;
  return wf;
}

/// exp(-i V τ) for a real symmetric 2×2 V: V = m I + r (n̂·σ),
/// exp = e^{-imτ} (cos(rτ) I - i sin(rτ) n̂·σ).
inline Eigen::Matrix2cd potential_phase(const Eigen::Matrix2d& v, double tau) {
  const double m = 0.5 * (v(0, 0) + v(1, 1));
  const double z = 0.5 * (v(0, 0) - v(1, 1));
  const double b = v(0, 1);
  const double r = std::hypot(z, b);
  const double c = std::cos(r * tau);
  // sin(rτ)/r, continuous at r = 0
  const double sinc = r > 0.0 ? std::sin(r * tau) / r : tau;
  const Complex ph = std::polar(1.0, -m * tau);
  const Complex mi(0.0, -1.0);
  Eigen::Matrix2cd u;
  u(0, 0) = ph * (c + mi * (z * sinc));
  u(1, 1) = ph * (c - mi * (z * sinc));
  u(0, 1) = u(1, 0) = ph * (mi * (b * sinc));
  return u;
}

/// Split-operator propagator bound to a model, grid and time step.
class SplitOperator {
 public:
  SplitOperator(const DiabaticModel& model, const UniformGrid2D& grid, double dt)
      : model_(model), grid_(grid), dt_(dt) {
    grid.validate();
    if (!(dt > 0.0)) throw ConfigError("reference dt must be positive");
    const std::size_t n = grid.nx * grid.ny;
    half_.resize(n);
    for (std::size_t i = 0; i < grid.nx; ++i)
      for (std::size_t j = 0; j < grid.ny; ++j) {
        const auto u = potential_phase(model.potential(grid.x(i), grid.y(j)), 0.5 * dt);
        half_[i * grid.ny + j] = {u(0, 0), u(0, 1), u(1, 1)};
      }
    const auto kx = UniformGrid2D::wavenumbers(grid.nx, grid.dx());
    const auto ky = UniformGrid2D::wavenumbers(grid.ny, grid.dy());
    kinetic_.resize(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < grid.nx; ++i)
      for (std::size_t j = 0; j < grid.ny; ++j)
        kinetic_[i * grid.ny + j] =
            std::polar(inv_n, -0.5 * (kx[i] * kx[i] + ky[j] * ky[j]) * dt);

    buffer_.reset(fftw_alloc_complex(n));
    auto* buf = buffer_.get();
    const int nx = static_cast<int>(grid.nx);
    const int ny = static_cast<int>(grid.ny);
    // FFTW_ESTIMATE keeps plan selection deterministic across runs.
    forward_.reset(fftw_plan_dft_2d(nx, ny, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE));
    backward_.reset(fftw_plan_dft_2d(nx, ny, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE));
    if (!forward_ || !backward_) throw ConfigError("could not create FFT plans");
  }

  const UniformGrid2D& grid() const noexcept { return grid_; }
  const DiabaticModel& model() const noexcept { return model_; }
  double dt() const noexcept { return dt_; }

  /// Half potential, full kinetic in momentum space, half potential.
  void step(DiabaticWavefunction& wf) {
    half_potential(wf);
    for (auto& comp : wf.psi) kinetic_step(comp);
    half_potential(wf);
    wf.time += dt_;
    if (!std::isfinite(wf.psi[0][0].real()) || !std::isfinite(wf.psi[1][0].real()) ||
        !std::isfinite(wf.norm2()))
      throw NumericalBlowup("non-finite reference wavefunction at t = " + std::to_string(wf.time));
  }

  /// Forward FFT of one component; result indexed like the grid.
  std::vector<Complex> spectrum(const std::vector<Complex>& comp) {
    auto* buf = reinterpret_cast<Complex*>(buffer_.get());
    std::copy(comp.begin(), comp.end(), buf);
    fftw_execute(forward_.get());
    return {buf, buf + comp.size()};
  }

 private:
  struct PlanDeleter {
    void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
  };
  struct BufferDeleter {
    void operator()(fftw_complex* p) const { fftw_free(p); }
  };

  void half_potential(DiabaticWavefunction& wf) const {
    auto& p0 = wf.psi[0];
    auto& p1 = wf.psi[1];
    for (std::size_t k = 0; k < half_.size(); ++k) {
      const auto& u = half_[k];
      const Complex a = p0[k];
      const Complex b = p1[k];
      p0[k] = u[0] * a + u[1] * b;
      p1[k] = u[1] * a + u[2] * b;
    }
  }

  void kinetic_step(std::vector<Complex>& comp) {
    auto* buf = reinterpret_cast<Complex*>(buffer_.get());
    std::copy(comp.begin(), comp.end(), buf);
    fftw_execute(forward_.get());
    for (std::size_t k = 0; k < kinetic_.size(); ++k) buf[k] *= kinetic_[k];
    fftw_execute(backward_.get());
    std::copy(buf, buf + comp.size(), comp.begin());
  }

  DiabaticModel model_;
  UniformGrid2D grid_;
  double dt_;
  std::vector<std::array<Complex, 3>> half_;  // U00, U01 = U10, U11
  std::vector<Complex> kinetic_;              // includes the 1/N of the inverse FFT
  std::unique_ptr<fftw_complex, BufferDeleter> buffer_;
  std::unique_ptr<fftw_plan_s, PlanDeleter> forward_, backward_;
};

inline DiabaticWavefunction splitop_step(SplitOperator& prop, DiabaticWavefunction wf) {
  prop.step(wf);
  return wf;
}

/// Point at which the reference reads the local coherence, and the weight
/// that converts ψ_g(R)ψ_e*(R) into the node-equivalent product C_g C_e*.
struct ProbePoint {
  std::array<double, 2> position{};
  double weight = 1.0;
};

/// Observables of the reference wavefunction in the same schema as the LDR.
class ReferenceObservables {
 public:
  ReferenceObservables(SplitOperator& prop, const ProbePoint& probe) : prop_(&prop), probe_(probe) {
    const auto& g = prop.grid();
    const std::size_t n = g.nx * g.ny;
    frames_.resize(n);
    for (std::size_t i = 0; i < g.nx; ++i)
      for (std::size_t j = 0; j < g.ny; ++j)
        frames_[i * g.ny + j] = fixed_frame(prop.model().potential(g.x(i), g.y(j)));
    probe_frame_ = fixed_frame(prop.model().potential(probe.position[0], probe.position[1]));

    // Trigonometric interpolation phases e^{i k (r_p - r_min)} / n per axis.
    auto phases = [](std::size_t count, double d, double offset) {
      const auto k = UniformGrid2D::wavenumbers(count, d);
      std::vector<Complex> p(count);
      for (std::size_t i = 0; i < count; ++i) {
        const bool nyquist = count % 2 == 0 && i == count / 2;
        // Real-valued treatment of the Nyquist mode.
        p[i] = nyquist ? Complex(std::cos(k[i] * offset), 0.0) : std::polar(1.0, k[i] * offset);
        p[i] /= static_cast<double>(count);
      }
      return p;
    };
    phase_x_ = phases(g.nx, g.dx(), probe.position[0] - g.x_min);
    phase_y_ = phases(g.ny, g.dy(), probe.position[1] - g.y_min);
  }

  ObservableRecord operator()(const DiabaticWavefunction& wf) const {
    const auto& g = wf.grid;
    const double area = g.dx() * g.dy();
    ObservableRecord r;
    r.t = wf.time;
    double xm = 0.0, ym = 0.0, d0 = 0.0, d1 = 0.0, a0 = 0.0, a1 = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) {
      const double x = g.x(i);
      for (std::size_t j = 0; j < g.ny; ++j) {
        const std::size_t k = i * g.ny + j;
        const Complex p0 = wf.psi[0][k];
        const Complex p1 = wf.psi[1][k];
        const double rho0 = std::norm(p0);
        const double rho1 = std::norm(p1);
        d0 += rho0;
        d1 += rho1;
        xm += x * (rho0 + rho1);
        ym += g.y(j) * (rho0 + rho1);
        const auto& v = frames_[k];
        a0 += std::norm(v(0, 0) * p0 + v(1, 0) * p1);
        a1 += std::norm(v(0, 1) * p0 + v(1, 1) * p1);
      }
    }
    r.x_mean = xm * area;
    r.y_mean = ym * area;
    r.pop_di = {d0 * area, d1 * area};
    r.pop_ad = {a0 * area, a1 * area};
    r.norm = (d0 + d1) * area;

    const Complex q0 = interpolate(wf.psi[0]);
    const Complex q1 = interpolate(wf.psi[1]);
    const Complex pg = probe_frame_(0, 0) * q0 + probe_frame_(1, 0) * q1;
    const Complex pe = probe_frame_(0, 1) * q0 + probe_frame_(1, 1) * q1;
    r.coherence = pg * std::conj(pe) * probe_.weight;
    return r;
  }

  static Eigen::MatrixXd density(const DiabaticWavefunction& wf) {
    const auto& g = wf.grid;
    Eigen::MatrixXd rho(static_cast<Eigen::Index>(g.nx), static_cast<Eigen::Index>(g.ny));
    for (std::size_t i = 0; i < g.nx; ++i)
      for (std::size_t j = 0; j < g.ny; ++j) {
        const std::size_t k = i * g.ny + j;
        rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            std::norm(wf.psi[0][k]) + std::norm(wf.psi[1][k]);
      }
    return rho;
  }

 private:
  /// Adiabatic eigenvectors with each column's largest component made positive.
  static Eigen::Matrix2d fixed_frame(const Eigen::Matrix2d& v) {
    Eigen::Matrix2d f = adiabatize(v).vectors;
    for (int a = 0; a < 2; ++a) {
      const int pivot = std::abs(f(1, a)) > std::abs(f(0, a)) * (1.0 + 1e-12) ? 1 : 0;
      if (f(pivot, a) < 0.0) f.col(a) *= -1.0;
    }
    return f;
  }

  Complex interpolate(const std::vector<Complex>& comp) const {
    const auto spec = prop_->spectrum(comp);
    const auto& g = prop_->grid();
    Complex sum(0.0, 0.0);
    for (std::size_t i = 0; i < g.nx; ++i) {
      Complex row(0.0, 0.0);
      for (std::size_t j = 0; j < g.ny; ++j) row += spec[i * g.ny + j] * phase_y_[j];
      sum += row * phase_x_[i];
    }
    return sum;
  }

  SplitOperator* prop_;
  ProbePoint probe_;
  std::vector<Eigen::Matrix2d> frames_;
  Eigen::Matrix2d probe_frame_;
  std::vector<Complex> phase_x_, phase_y_;
};

inline ObservableRecord reference_observables(const DiabaticWavefunction& wf, SplitOperator& prop,
                                              const ProbePoint& probe) {
  return ReferenceObservables(prop, probe)(wf);
}

/// Steps the reference, recording at the same cadence as the LDR propagate().
inline ObservableSeries propagate_reference(
    SplitOperator& prop, DiabaticWavefunction wf, double t_final, std::size_t record_every,
    const ProbePoint& probe,
    const std::function<void(std::size_t, const DiabaticWavefunction&)>& on_record = {}) {
  if (record_every == 0) throw ConfigError("record_every must be positive");
  const std::size_t steps = step_count(prop.dt(), t_final);
  const ReferenceObservables observe(prop, probe);
  ObservableSeries series;
  for (std::size_t step = 0;; ++step) {
    if (step % record_every == 0 || step == steps) {
      wf.time = static_cast<double>(step) * prop.dt();
      series.records.push_back(observe(wf));
      if (on_record) on_record(step, wf);
    }
    if (step == steps) break;
    prop.step(wf);
  }
  return series;
}

/// Largest density on the outermost grid rows/columns (edge monitor).
inline double edge_density(const DiabaticWavefunction& wf) {
  const Eigen::MatrixXd rho = ReferenceObservables::density(wf);
  const auto nx = rho.rows();
  const auto ny = rho.cols();
  return std::max({rho.row(0).maxCoeff(), rho.row(nx - 1).maxCoeff(), rho.col(0).maxCoeff(),
                   rho.col(ny - 1).maxCoeff()});
}

}  // namespace ldr

#pragma once

// LDR equation of motion
//   i dC_{mβ}/dt = E_β(R_m) C_{mβ} + Σ_{nα} T_{mn} A_{mβ,nα} C_{nα}
// with RK4 time stepping, observables and reduced densities.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ldr/electronic_model.hpp"
#include "ldr/error.hpp"
#include "ldr/nuclear_basis.hpp"

namespace ldr {

/// Block-sparse H_{mβ,nα} = E_β(R_m) δ_{mn} δ_{βα} + T_{mn} A_{mβ,nα}. Only
/// node pairs with T_{mn} ≠ 0 (plus the diagonal) are stored.
class VibronicHamiltonian {
 public:
  using Block = Eigen::Matrix2cd;

  VibronicHamiltonian() = default;
  VibronicHamiltonian(std::size_t nodes, std::vector<std::size_t> row_ptr,
                      std::vector<std::size_t> cols, std::vector<Block> blocks)
      : nodes_(nodes), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), blocks_(std::move(blocks)) {}

  std::size_t nodes() const noexcept { return nodes_; }
  std::size_t dimension() const noexcept { return nodes_ * kStates; }
  std::size_t stored_blocks() const noexcept { return blocks_.size(); }

  /// out = H c. Fixed summation order, so results are reproducible.
  void apply(const Eigen::VectorXcd& c, Eigen::VectorXcd& out) const {
    out.resize(c.size());
    const Complex* in = c.data();
    Complex* res = out.data();
    for (std::size_t m = 0; m < nodes_; ++m) {
      Complex s0(0.0, 0.0);
      Complex s1(0.0, 0.0);
      for (std::size_t k = row_ptr_[m]; k < row_ptr_[m + 1]; ++k) {
        const Block& b = blocks_[k];
        const Complex* cn = in + cols_[k] * kStates;
        s0 += b(0, 0) * cn[0] + b(0, 1) * cn[1];
        s1 += b(1, 0) * cn[0] + b(1, 1) * cn[1];
      }
      res[m * kStates] = s0;
      res[m * kStates + 1] = s1;
    }
  }

  Eigen::VectorXcd operator*(const Eigen::VectorXcd& c) const {
    Eigen::VectorXcd out;
    apply(c, out);
    return out;
  }

  Eigen::MatrixXcd to_dense() const {
    const auto dim = static_cast<Eigen::Index>(dimension());
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
    for (std::size_t m = 0; m < nodes_; ++m)
      for (std::size_t k = row_ptr_[m]; k < row_ptr_[m + 1]; ++k)
        out.block<2, 2>(static_cast<Eigen::Index>(m * kStates),
                        static_cast<Eigen::Index>(cols_[k] * kStates)) = blocks_[k];
    return out;
  }

  /// H -> H - e0·I. A global phase for every state; RK4 error depends on
  /// the phase rate, so propagating near zero mean energy is more accurate.
  void shift_energy(double e0) {
    for (std::size_t m = 0; m < nodes_; ++m)
      for (std::size_t k = row_ptr_[m]; k < row_ptr_[m + 1]; ++k)
        if (cols_[k] == m) blocks_[k].diagonal().array() -= e0;
    energy_origin_ += e0;
  }
  double energy_origin() const noexcept { return energy_origin_; }

  /// Max absolute row sum; bounds the spectral radius.
  double row_sum_bound() const {
    double best = 0.0;
    for (std::size_t m = 0; m < nodes_; ++m) {
      double r0 = 0.0;
      double r1 = 0.0;
      for (std::size_t k = row_ptr_[m]; k < row_ptr_[m + 1]; ++k) {
        r0 += std::abs(blocks_[k](0, 0)) + std::abs(blocks_[k](0, 1));
        r1 += std::abs(blocks_[k](1, 0)) + std::abs(blocks_[k](1, 1));
      }
      best = std::max({best, r0, r1});
    }
    return best;
  }

  std::span<const std::size_t> row_nodes(std::size_t m) const {
    return {cols_.data() + row_ptr_[m], row_ptr_[m + 1] - row_ptr_[m]};
  }
  std::span<const Block> row_blocks(std::size_t m) const {
    return {blocks_.data() + row_ptr_[m], row_ptr_[m + 1] - row_ptr_[m]};
  }

 private:
  std::size_t nodes_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> cols_;
  std::vector<Block> blocks_;
  double energy_origin_ = 0.0;
};

/// energies: nodes × states APES values at the nodes (DVR potential);
/// kinetic: nodes × nodes real symmetric T in the localized basis.
inline VibronicHamiltonian assemble_hamiltonian(const Eigen::MatrixXd& energies,
                                                const Eigen::MatrixXd& kinetic,
                                                const OverlapTensor& overlaps) {
  const auto n = static_cast<std::size_t>(kinetic.rows());
  if (kinetic.cols() != kinetic.rows()) throw AssemblyError("kinetic matrix must be square");
  if (static_cast<std::size_t>(energies.rows()) != n ||
      energies.cols() != static_cast<Eigen::Index>(kStates))
    throw AssemblyError("energy table must be nodes × 2, got " + std::to_string(energies.rows()) +
                        " × " + std::to_string(energies.cols()));
  if (overlaps.nodes() != n) throw AssemblyError("overlap tensor node count mismatch");

  std::vector<std::size_t> row_ptr(n + 1, 0);
  std::vector<std::size_t> cols;
  std::vector<VibronicHamiltonian::Block> blocks;
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t k = 0; k < n; ++k) {
      const double t = kinetic(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
      if (t == 0.0 && k != m) continue;
      const auto* a = overlaps.find(m, k);
      if (a == nullptr)
        throw AssemblyError("overlap block (" + std::to_string(m) + ", " + std::to_string(k) +
                            ") required by the kinetic coupling is not stored");
      VibronicHamiltonian::Block b = t * (*a);
      if (k == m) {
        b(0, 0) += energies(static_cast<Eigen::Index>(m), 0);
        b(1, 1) += energies(static_cast<Eigen::Index>(m), 1);
      }
      cols.push_back(k);
      blocks.push_back(b);
    }
    row_ptr[m + 1] = cols.size();
  }
  return VibronicHamiltonian(n, std::move(row_ptr), std::move(cols), std::move(blocks));
}

/// C_{nα}(t), node-major / electronic-minor.
struct CoefficientVector {
  Eigen::VectorXcd values;
  double time = 0.0;

  double norm2() const { return values.squaredNorm(); }
  Complex operator()(std::size_t n, std::size_t alpha) const {
    return values(static_cast<Eigen::Index>(n * kStates + alpha));
  }
};

/// Normalized Gaussian packet Π_d g(R_d; center_d, width_d) on one diabatic state.
struct GaussianPacket {
  std::vector<double> center;
  std::vector<double> width;
  std::size_t diabatic_state = 1;

  /// π^{-1/2} exp(-(x+1)²/2 - y²/2) |1⟩.
  static GaussianPacket vertical_excitation() { return {{-1.0, 0.0}, {1.0, 1.0}, 1}; }
};

struct InitialState {
  CoefficientVector coefficients;
  double captured_norm = 0.0;  // before renormalization
};

/// C_{nα}(0) = ⟨φ_α(R_n)|s⟩ ⟨R_n|g⟩, renormalized.
inline InitialState initial_coefficients(const GaussianPacket& packet, const NuclearBasisND& basis,
                                         const AdiabaticSet& set) {
  const std::size_t dims = basis.dimensions();
  if (packet.center.size() != dims || packet.width.size() != dims)
    throw ConfigError("packet dimension does not match the nuclear basis");
  if (packet.diabatic_state >= kStates) throw ConfigError("packet diabatic state out of range");
  if (set.size() != basis.size()) throw AssemblyError("adiabatic set does not match the basis");

  std::vector<Eigen::VectorXd> proj(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    const auto& f = basis.factors()[d];
    if (packet.center[d] < f.nodes(0) || packet.center[d] > f.nodes(f.nodes.size() - 1))
      throw CoverageError("packet center lies outside the basis coverage", 0.0);
    proj[d] = f.project_gaussian(packet.center[d], packet.width[d]);
  }

  InitialState out;
  out.coefficients.values.resize(static_cast<Eigen::Index>(basis.size() * kStates));
  double captured = 0.0;
  const auto s = static_cast<Eigen::Index>(packet.diabatic_state);
  for (std::size_t n = 0; n < basis.size(); ++n) {
    double amp = 1.0;
    for (std::size_t d = 0; d < dims; ++d)
      amp *= proj[d](static_cast<Eigen::Index>(basis.coordinate(n, d)));
    captured += amp * amp;
    for (std::size_t a = 0; a < kStates; ++a)
      out.coefficients.values(static_cast<Eigen::Index>(n * kStates + a)) =
          std::conj(set.vectors[n](s, static_cast<Eigen::Index>(a))) * amp;
  }
  out.captured_norm = captured;
  if (captured < 0.99)
    throw CoverageError("basis captures only " + std::to_string(captured) +
                            " of the initial packet norm",
                        captured);
  out.coefficients.values /= std::sqrt(out.coefficients.values.squaredNorm());
  return out;
}

/// Classical RK4 for i dC/dt = H C with reusable stage storage.
class Rk4Integrator {
 public:
  explicit Rk4Integrator(const VibronicHamiltonian& h) : h_(&h) {}

  void step(CoefficientVector& c, double dt) {
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    const Complex mi(0.0, -1.0);
    const auto& y = c.values;
    h_->apply(y, k_);
    k_ *= mi;
    acc_ = y + (dt / 6.0) * k_;
    tmp_ = y + (0.5 * dt) * k_;
    h_->apply(tmp_, k_);
    k_ *= mi;
    acc_ += (dt / 3.0) * k_;
    tmp_ = y + (0.5 * dt) * k_;
    h_->apply(tmp_, k_);
    k_ *= mi;
    acc_ += (dt / 3.0) * k_;
    tmp_ = y + dt * k_;
    h_->apply(tmp_, k_);
    k_ *= mi;
    acc_ += (dt / 6.0) * k_;
    if (!std::isfinite(acc_.squaredNorm()))
      throw NumericalBlowup("non-finite coefficients after RK4 step at t = " +
                            std::to_string(c.time) + "; dt is too large for the spectral radius " +
                            std::to_string(h_->row_sum_bound()) + " (bound)");
    c.values.swap(acc_);
    c.time += dt;
  }

 private:
  const VibronicHamiltonian* h_;
  Eigen::VectorXcd k_, tmp_, acc_;
};

inline CoefficientVector rk4_step(const VibronicHamiltonian& h, const CoefficientVector& c, double dt) {
  CoefficientVector out = c;
  Rk4Integrator(h).step(out, dt);
  return out;
}

/// One record of the observables.csv schema.
struct ObservableRecord {
  double t = 0.0;
  double x_mean = 0.0;
  double y_mean = 0.0;
  std::array<double, 2> pop_ad{};
  std::array<double, 2> pop_di{};
  Complex coherence{};
  double norm = 0.0;
};

struct ObservableSeries {
  std::vector<ObservableRecord> records;
};

/// Σ_{n,βα} C*_{nβ} O^{(n)}_{βα} C_{nα} for per-node electronic operators
/// expressed in the node's adiabatic frame.
inline Complex expectation_electronic(const CoefficientVector& c,
                                      std::span<const Eigen::Matrix2cd> ops) {
  const auto nodes = static_cast<std::size_t>(c.values.size()) / kStates;
  if (ops.size() != nodes) throw AssemblyError("electronic operator count does not match node count");
  Complex sum(0.0, 0.0);
  for (std::size_t n = 0; n < nodes; ++n) {
    const Eigen::Vector2cd cn = c.values.segment<2>(static_cast<Eigen::Index>(n * kStates));
    sum += cn.dot(ops[n] * cn);
  }
  return sum;
}

/// Σ_{mn,βα} C*_{mβ} O_{mn} A_{mβ,nα} C_{nα} for a nuclear operator O in the
/// localized basis. Every non-zero O_{mn} needs a stored overlap block.
inline Complex expectation_nuclear(const CoefficientVector& c, const OverlapTensor& overlaps,
                                   const Eigen::MatrixXcd& op) {
  const std::size_t nodes = overlaps.nodes();
  if (static_cast<std::size_t>(c.values.size()) != nodes * kStates ||
      static_cast<std::size_t>(op.rows()) != nodes || op.cols() != op.rows())
    throw AssemblyError("nuclear operator dimension mismatch");
  Complex sum(0.0, 0.0);
  for (std::size_t m = 0; m < nodes; ++m) {
    const Eigen::Vector2cd cm = c.values.segment<2>(static_cast<Eigen::Index>(m * kStates));
    for (std::size_t n = 0; n < nodes; ++n) {
      const Complex o = op(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
      if (o == Complex(0.0, 0.0)) continue;
      const Eigen::Vector2cd cn = c.values.segment<2>(static_cast<Eigen::Index>(n * kStates));
      sum += o * cm.dot(overlaps.block(m, n) * cn);
    }
  }
  return sum;
}

/// C_{n,g} conj(C_{n,e}); only the magnitude is gauge invariant.
inline Complex local_coherence(const CoefficientVector& c, std::size_t n) {
  if (n * kStates + 1 >= static_cast<std::size_t>(c.values.size()))
    throw ConfigError("probe node out of range");
  return c(n, 0) * std::conj(c(n, 1));
}

struct ReducedDensities {
  Eigen::Matrix2cd electronic;  // (α, β) = Σ_n C_{nα} C*_{nβ}
  Eigen::MatrixXcd nuclear;     // (n, m) = Σ_{βα} C*_{mβ} A_{mβ,nα} C_{nα}
};

inline ReducedDensities reduced_densities(const CoefficientVector& c, const OverlapTensor& overlaps) {
  const std::size_t nodes = overlaps.nodes();
  if (static_cast<std::size_t>(c.values.size()) != nodes * kStates)
    throw AssemblyError("coefficient vector does not match the overlap tensor");
  ReducedDensities rho;
  rho.electronic.setZero();
  rho.nuclear = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(nodes));
  for (std::size_t m = 0; m < nodes; ++m) {
    const Eigen::Vector2cd cm = c.values.segment<2>(static_cast<Eigen::Index>(m * kStates));
    rho.electronic += cm * cm.adjoint();
    const auto nodes_m = overlaps.row_nodes(m);
    const auto blocks_m = overlaps.row_blocks(m);
    for (std::size_t k = 0; k < nodes_m.size(); ++k) {
      const std::size_t n = nodes_m[k];
      const Eigen::Vector2cd cn = c.values.segment<2>(static_cast<Eigen::Index>(n * kStates));
      rho.nuclear(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) = cm.dot(blocks_m[k] * cn);
    }
  }
  return rho;
}

/// Total nuclear density ρ(x, y) = Σ_{mn} (ρ_n)_{nm} χ_m(R) χ_n(R) on the
/// tensor grid xs × ys (rows follow xs). Requires a dense overlap tensor.
inline Eigen::MatrixXd nuclear_density(const CoefficientVector& c, const OverlapTensor& overlaps,
                                       const NuclearBasisND& basis, std::span<const double> xs,
                                       std::span<const double> ys) {
  if (basis.dimensions() != 2) throw ConfigError("nuclear density is defined for 2-D bases");
  if (!overlaps.dense()) throw AssemblyError("nuclear density needs the dense overlap tensor");
  const auto& fx = basis.factors()[0];
  const auto& fy = basis.factors()[1];
  const auto nx = static_cast<Eigen::Index>(fx.size());
  const auto ny = static_cast<Eigen::Index>(fy.size());
  const auto gx = static_cast<Eigen::Index>(xs.size());
  const auto gy = static_cast<Eigen::Index>(ys.size());

  Eigen::MatrixXd ax(gx, nx);
  for (Eigen::Index k = 0; k < gx; ++k) ax.row(k) = fx.amplitudes(xs[k]).transpose();
  Eigen::MatrixXd by(gy, ny);
  for (Eigen::Index l = 0; l < gy; ++l) by.row(l) = fy.amplitudes(ys[l]).transpose();

  // χ real and ρ_n Hermitian: only Re ρ_n contributes.
  const Eigen::MatrixXd g = reduced_densities(c, overlaps).nuclear.real();
  const Eigen::Index nn = nx * ny;

  // stage1(i·gy + l, m) = Σ_j b_j(y_l) g(i·ny + j, m)
  Eigen::MatrixXd stage1(nx * gy, nn);
  for (Eigen::Index i = 0; i < nx; ++i)
    stage1.middleRows(i * gy, gy).noalias() = by * g.middleRows(i * ny, ny);
  // stage2(k·gy + l, m) = Σ_i a_i(x_k) stage1(i·gy + l, m)
  Eigen::MatrixXd stage2 = Eigen::MatrixXd::Zero(gx * gy, nn);
  for (Eigen::Index k = 0; k < gx; ++k)
    for (Eigen::Index i = 0; i < nx; ++i)
      stage2.middleRows(k * gy, gy).noalias() += ax(k, i) * stage1.middleRows(i * gy, gy);

  Eigen::MatrixXd rho(gx, gy);
  for (Eigen::Index k = 0; k < gx; ++k) {
    for (Eigen::Index l = 0; l < gy; ++l) {
      const auto row = stage2.row(k * gy + l);
      double sum = 0.0;
      for (Eigen::Index i = 0; i < nx; ++i) {
        double inner = 0.0;
        for (Eigen::Index j = 0; j < ny; ++j) inner += row(i * ny + j) * by(l, j);
        sum += ax(k, i) * inner;
      }
      rho(k, l) = sum;
    }
  }
  return rho;
}

/// Everything needed to turn coefficients into an ObservableRecord.
class LdrObservables {
 public:
  LdrObservables(const NuclearBasisND& basis, const AdiabaticSet& set, std::size_t probe_node)
      : probe_(probe_node) {
    if (basis.dimensions() != 2) throw ConfigError("LDR observables assume a 2-D nuclear basis");
    if (probe_node >= basis.size()) throw ConfigError("probe node out of range");
    x_ = basis.nodes().col(0);
    y_ = basis.nodes().col(1);
    for (std::size_t s = 0; s < kStates; ++s) {
      diabatic_proj_[s].resize(set.size());
      for (std::size_t n = 0; n < set.size(); ++n) {
        // O^{(n)} = V_n† |s⟩⟨s| V_n in the node's adiabatic frame.
        const Eigen::RowVector2cd row = set.vectors[n].row(static_cast<Eigen::Index>(s));
        diabatic_proj_[s][n] = row.adjoint() * row;
      }
    }
  }

  ObservableRecord operator()(const CoefficientVector& c) const {
    ObservableRecord r;
    r.t = c.time;
    const auto nodes = x_.size();
    double p0 = 0.0;
    double p1 = 0.0;
    double xm = 0.0;
    double ym = 0.0;
    for (Eigen::Index n = 0; n < nodes; ++n) {
      const double a0 = std::norm(c.values(2 * n));
      const double a1 = std::norm(c.values(2 * n + 1));
      p0 += a0;
      p1 += a1;
      xm += x_(n) * (a0 + a1);
      ym += y_(n) * (a0 + a1);
    }
    r.x_mean = xm;
    r.y_mean = ym;
    r.pop_ad = {p0, p1};
    for (std::size_t s = 0; s < kStates; ++s)
      r.pop_di[s] = expectation_electronic(c, diabatic_proj_[s]).real();
    r.coherence = local_coherence(c, probe_);
    r.norm = c.norm2();
    return r;
  }

  std::size_t probe_node() const noexcept { return probe_; }

 private:
  std::size_t probe_;
  Eigen::VectorXd x_, y_;
  std::array<std::vector<Eigen::Matrix2cd>, kStates> diabatic_proj_;
};

struct PropagationSettings {
  double dt = 5e-3;
  double t_final = 40.0;
  std::size_t record_every = 10;
};

inline std::size_t step_count(double dt, double t_final) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (!(t_final >= 0.0)) throw ConfigError("final time must be non-negative");
  return static_cast<std::size_t>(std::llround(t_final / dt));
}

/// RK4 propagation; records at every `record_every` steps and at the last
/// step. `on_record` (optional) sees the coefficients at each record.
inline ObservableSeries propagate(const VibronicHamiltonian& h, const CoefficientVector& c0,
                                  const PropagationSettings& settings, const LdrObservables& observe,
                                  const std::function<void(std::size_t, const CoefficientVector&)>&
                                      on_record = {}) {
  if (settings.record_every == 0) throw ConfigError("record_every must be positive");
  const std::size_t steps = step_count(settings.dt, settings.t_final);
  CoefficientVector c = c0;
  c.time = 0.0;
  Rk4Integrator rk4(h);
  ObservableSeries series;
  for (std::size_t step = 0;; ++step) {
    if (step % settings.record_every == 0 || step == steps) {
      c.time = static_cast<double>(step) * settings.dt;
      series.records.push_back(observe(c));
      if (on_record) on_record(step, c);
    }
    if (step == steps) break;
    rk4.step(c, settings.dt);
  }
  return series;
}

}  // namespace ldr

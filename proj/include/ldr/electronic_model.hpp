#pragma once

// Two-state linear vibronic model, closed-form adiabatization, gauge
// assignment, the blocked electronic overlap tensor and Wilson loops.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ldr/error.hpp"

namespace ldr {

using Complex = std::complex<double>;

/// Number of electronic states carried through the LDR machinery.
inline constexpr std::size_t kStates = 2;

/// Gaps below this are treated as exact degeneracies when ordering states.
inline constexpr double kDegeneracyGap = 1e-12;

/// Pluggable electronic model: maps a nuclear point to a 2×2 real symmetric
/// electronic Hamiltonian in a fixed (diabatic) basis.
template <class M>
concept ElectronicModel = requires(const M& m, std::span<const double> point) {
  { M::kNuclearDimension } -> std::convertible_to<std::size_t>;
  { m.potential(point) } -> std::convertible_to<Eigen::Matrix2d>;
};

/// H = Σ_σ (a†a + 1/2) - κ x σ_z + λ y σ_x + Δ σ⁺σ⁻ with the zero-point
/// constant dropped. Diabatic order |0⟩, |1⟩; σ_z = |1⟩⟨1| - |0⟩⟨0|.
struct DiabaticModel {
  static constexpr std::size_t kNuclearDimension = 2;

  double kappa = 1.0;
  double lambda = 0.2;
  double delta = 1.0;

  Eigen::Matrix2d potential(double x, double y) const {
    const double harmonic = 0.5 * (x * x + y * y);
    Eigen::Matrix2d v;
    v(0, 0) = harmonic + kappa * x;
    v(1, 1) = harmonic + delta - kappa * x;
    v(0, 1) = v(1, 0) = lambda * y;
    return v;
  }

  Eigen::Matrix2d potential(std::span<const double> point) const {
    return potential(point[0], point[1]);
  }
};

static_assert(ElectronicModel<DiabaticModel>);

inline Eigen::Matrix2d diabatic_potential(const DiabaticModel& model, double x, double y) {
  return model.potential(x, y);
}

/// Degeneracy point of the model: V_11 - V_00 = Δ - 2κx = 0 and λy = 0.
inline std::array<double, 2> ci_locus(const DiabaticModel& model) {
  if (model.kappa == 0.0)
    throw NoIsolatedIntersection("kappa = 0: the model has no isolated conical intersection");
  return {model.delta / (2.0 * model.kappa), 0.0};
}

/// θ with eigenvectors v_0 = (cos θ, -sin θ), v_1 = (sin θ, cos θ).
inline double mixing_angle(const Eigen::Matrix2d& v) {
  const double dz = v(1, 1) - v(0, 0);
  const double b = v(0, 1);
  if (std::hypot(0.5 * dz, b) < kDegeneracyGap) return 0.0;
  return 0.5 * std::atan2(2.0 * b, dz);
}

struct AdiabaticStates2 {
  Eigen::Vector2d energies;  // ascending
  Eigen::Matrix2d vectors;   // columns are states in the diabatic basis
};

/// Closed-form 2×2 eigendecomposition. At a degeneracy the pair is the
/// diabatic basis itself, so state 0 is the one maximally overlapping |0⟩.
inline AdiabaticStates2 adiabatize(const Eigen::Matrix2d& v) {
  const double mean = 0.5 * (v(0, 0) + v(1, 1));
  const double half_gap = std::hypot(0.5 * (v(1, 1) - v(0, 0)), v(0, 1));
  const double theta = mixing_angle(v);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  AdiabaticStates2 out;
  out.energies << mean - half_gap, mean + half_gap;
  out.vectors << c, s, -s, c;
  return out;
}

enum class GaugeKind { FixedPositive, RandomPhase, RandomSign };

struct GaugeMode {
  GaugeKind kind = GaugeKind::RandomPhase;
  std::uint64_t seed = 0;
};

inline std::string to_string(GaugeKind kind) {
  switch (kind) {
    case GaugeKind::FixedPositive: return "fixed-positive";
    case GaugeKind::RandomPhase: return "random-phase";
    case GaugeKind::RandomSign: return "random-sign";
  }
  return "unknown";
}

inline GaugeKind parse_gauge_kind(const std::string& name) {
  if (name == "fixed-positive") return GaugeKind::FixedPositive;
  if (name == "random-phase") return GaugeKind::RandomPhase;
  if (name == "random-sign") return GaugeKind::RandomSign;
  throw ConfigError("unknown gauge mode '" + name + "'");
}

/// Adiabatic states at a list of nuclear points (nodes).
struct AdiabaticSet {
  Eigen::MatrixXd energies;                // nodes × states
  std::vector<Eigen::Matrix2cd> vectors;   // per node; columns are states
  Eigen::MatrixXd gauge_phase;             // θ_{nα}: v' = e^{-iθ} v, accumulated

  std::size_t size() const noexcept { return vectors.size(); }
  double gap(std::size_t n) const {
    const auto i = static_cast<Eigen::Index>(n);
    return energies(i, 1) - energies(i, 0);
  }
};

template <ElectronicModel M>
AdiabaticSet adiabatic_states(const M& model, const Eigen::MatrixXd& points) {
  if (points.cols() != static_cast<Eigen::Index>(M::kNuclearDimension))
    throw ConfigError("point dimension does not match the electronic model");
  AdiabaticSet set;
  const auto n = points.rows();
  set.energies.resize(n, static_cast<Eigen::Index>(kStates));
  set.gauge_phase = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(kStates));
  set.vectors.resize(static_cast<std::size_t>(n));
  std::vector<double> point(M::kNuclearDimension);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < point.size(); ++d) point[d] = points(i, static_cast<Eigen::Index>(d));
    const auto states = adiabatize(model.potential(std::span<const double>(point)));
    set.energies.row(i) = states.energies.transpose();
    set.vectors[static_cast<std::size_t>(i)] = states.vectors.template cast<Complex>();
  }
  return set;
}

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double wrap_phase(double theta) {
  const double two_pi = 2.0 * std::numbers::pi;
  theta = std::fmod(theta, two_pi);
  return theta < 0.0 ? theta + two_pi : theta;
}

}  // namespace detail

/// Multiplies every eigenvector column by a unit-modulus factor e^{-iθ}.
/// Random phases are drawn in canonical (node-major, state-minor) order.
inline AdiabaticSet apply_gauge(AdiabaticSet set, const GaugeMode& mode) {
  std::mt19937_64 rng(mode.seed);
  for (std::size_t n = 0; n < set.size(); ++n) {
    for (std::size_t a = 0; a < kStates; ++a) {
      const auto col = static_cast<Eigen::Index>(a);
      auto v = set.vectors[n].col(col);
      double theta = 0.0;
      Complex factor(1.0, 0.0);
      switch (mode.kind) {
        case GaugeKind::FixedPositive: {
          // First component within a relative 1e-12 of the largest magnitude,
          // so re-application picks the same pivot.
          const double top = v.cwiseAbs().maxCoeff();
          Eigen::Index pivot = 0;
          while (std::abs(v(pivot)) < top * (1.0 - 1e-12)) ++pivot;
          const Complex z = v(pivot);
          factor = std::conj(z) / std::abs(z);
          theta = -std::arg(factor);
          break;
        }
        case GaugeKind::RandomPhase:
          theta = 2.0 * std::numbers::pi * detail::unit_uniform(rng);
          factor = std::polar(1.0, -theta);
          break;
        case GaugeKind::RandomSign:
          if (rng() >> 63) {
            theta = std::numbers::pi;
            factor = Complex(-1.0, 0.0);
          }
          break;
      }
      v *= factor;
      const auto i = static_cast<Eigen::Index>(n);
      set.gauge_phase(i, col) = detail::wrap_phase(set.gauge_phase(i, col) + theta);
    }
  }
  return set;
}

/// Sorted neighbour lists (including the node itself); must be symmetric.
using NodePattern = std::vector<std::vector<std::size_t>>;

/// A_{mβ,nα} = ⟨φ_β(R_m)|φ_α(R_n)⟩ stored as 2×2 blocks (row β, column α)
/// over a symmetric node-pair pattern. The full pattern is the dense tensor.
class OverlapTensor {
 public:
  using Block = Eigen::Matrix2cd;

  OverlapTensor() = default;

  static OverlapTensor build(const AdiabaticSet& set, const NodePattern& pattern) {
    if (pattern.size() != set.size()) throw AssemblyError("overlap pattern size mismatch");
    OverlapTensor t;
    t.nodes_ = set.size();
    t.row_ptr_.assign(t.nodes_ + 1, 0);
    for (std::size_t m = 0; m < t.nodes_; ++m) {
      const auto& row = pattern[m];
      if (!std::is_sorted(row.begin(), row.end()) ||
          std::adjacent_find(row.begin(), row.end()) != row.end() ||
          !std::binary_search(row.begin(), row.end(), m))
        throw AssemblyError("overlap pattern rows must be sorted, unique and contain the diagonal");
      t.row_ptr_[m + 1] = t.row_ptr_[m] + row.size();
      for (std::size_t n : row) {
        if (n >= t.nodes_) throw AssemblyError("overlap pattern index out of range");
        t.cols_.push_back(n);
      }
    }
    t.dense_ = t.cols_.size() == t.nodes_ * t.nodes_;
    t.blocks_.resize(t.cols_.size());

    // Upper triangle computed, lower triangle mirrored: Hermiticity is exact.
    for (std::size_t m = 0; m < t.nodes_; ++m) {
      for (std::size_t k = t.row_ptr_[m]; k < t.row_ptr_[m + 1]; ++k) {
        const std::size_t n = t.cols_[k];
        if (n == m) {
          t.blocks_[k] = Block::Identity();
        } else if (n > m) {
          const auto& mirror = pattern[n];
          if (!std::binary_search(mirror.begin(), mirror.end(), m))
            throw AssemblyError("overlap pattern is not symmetric");
          t.blocks_[k] = set.vectors[m].adjoint() * set.vectors[n];
        }
      }
    }
    for (std::size_t m = 0; m < t.nodes_; ++m) {
      for (std::size_t k = t.row_ptr_[m]; k < t.row_ptr_[m + 1]; ++k) {
        const std::size_t n = t.cols_[k];
        if (n < m) {
          const Block* upper = t.find(n, m);
          if (upper == nullptr) throw AssemblyError("overlap pattern is not symmetric");
          t.blocks_[k] = upper->adjoint();
        }
      }
    }
    return t;
  }

  static NodePattern full_pattern(std::size_t nodes) {
    NodePattern p(nodes);
    for (auto& row : p) {
      row.resize(nodes);
      for (std::size_t n = 0; n < nodes; ++n) row[n] = n;
    }
    return p;
  }

  std::size_t nodes() const noexcept { return nodes_; }
  std::size_t states() const noexcept { return kStates; }
  std::size_t stored_blocks() const noexcept { return blocks_.size(); }
  bool dense() const noexcept { return dense_; }

  /// Block (m, n) or nullptr when the pair is outside the stored pattern.
  const Block* find(std::size_t m, std::size_t n) const {
    if (m >= nodes_ || n >= nodes_) return nullptr;
    if (dense_) return &blocks_[m * nodes_ + n];
    const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[m]);
    const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[m + 1]);
    const auto it = std::lower_bound(first, last, n);
    if (it == last || *it != n) return nullptr;
    return &blocks_[static_cast<std::size_t>(it - cols_.begin())];
  }

  const Block& block(std::size_t m, std::size_t n) const {
    const Block* b = find(m, n);
    if (b == nullptr)
      throw AssemblyError("overlap block (" + std::to_string(m) + ", " + std::to_string(n) +
                          ") is not stored");
    return *b;
  }

  Complex operator()(std::size_t m, std::size_t beta, std::size_t n, std::size_t alpha) const {
    return block(m, n)(static_cast<Eigen::Index>(beta), static_cast<Eigen::Index>(alpha));
  }

  std::span<const std::size_t> row_nodes(std::size_t m) const {
    return {cols_.data() + row_ptr_[m], row_ptr_[m + 1] - row_ptr_[m]};
  }
  std::span<const Block> row_blocks(std::size_t m) const {
    return {blocks_.data() + row_ptr_[m], row_ptr_[m + 1] - row_ptr_[m]};
  }

  /// A_{mβ,nα} → A^α_{mn} δ_{βα}: the decoupled (adiabatic) limit.
  OverlapTensor same_state_only() const {
    OverlapTensor t = *this;
    for (auto& b : t.blocks_) {
      b(0, 1) = Complex(0.0, 0.0);
      b(1, 0) = Complex(0.0, 0.0);
    }
    return t;
  }

  /// Dense (nodes·states)² matrix, node-major; unstored pairs are zero.
  Eigen::MatrixXcd to_dense() const {
    const auto dim = static_cast<Eigen::Index>(nodes_ * kStates);
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
    for (std::size_t m = 0; m < nodes_; ++m) {
      for (std::size_t k = row_ptr_[m]; k < row_ptr_[m + 1]; ++k)
        out.block<2, 2>(static_cast<Eigen::Index>(m * kStates),
                        static_cast<Eigen::Index>(cols_[k] * kStates)) = blocks_[k];
    }
    return out;
  }

 private:
  std::size_t nodes_ = 0;
  bool dense_ = false;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> cols_;
  std::vector<Block> blocks_;
};

/// Dense overlap tensor over every node pair.
inline OverlapTensor electronic_overlap(const AdiabaticSet& set) {
  return OverlapTensor::build(set, OverlapTensor::full_pattern(set.size()));
}

inline OverlapTensor electronic_overlap(const AdiabaticSet& set, const NodePattern& pattern) {
  return OverlapTensor::build(set, pattern);
}

/// Closed loop of `count` points equally spaced in polar angle.
inline Eigen::MatrixXd circle_loop(std::array<double, 2> center, double radius, std::size_t count) {
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(count), 2);
  for (std::size_t k = 0; k < count; ++k) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
    pts(static_cast<Eigen::Index>(k), 0) = center[0] + radius * std::cos(phi);
    pts(static_cast<Eigen::Index>(k), 1) = center[1] + radius * std::sin(phi);
  }
  return pts;
}

/// W_α = A_{1α,2α} A_{2α,3α} ⋯ A_{Nα,1α} around a closed loop (closure implicit).
template <ElectronicModel M>
Complex wilson_loop(const M& model, const Eigen::MatrixXd& loop, std::size_t alpha,
                    const GaugeMode& gauge) {
  if (loop.rows() < 3) throw ConfigError("Wilson loop needs at least 3 points");
  if (alpha >= kStates) throw ConfigError("Wilson loop state index out of range");
  if (loop.row(0) == loop.row(loop.rows() - 1))
    throw ConfigError("Wilson loop must not repeat its first point; closure is implicit");
  const AdiabaticSet set = apply_gauge(adiabatic_states(model, loop), gauge);
  const auto a = static_cast<Eigen::Index>(alpha);
  Complex w(1.0, 0.0);
  const std::size_t n = set.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Complex step = set.vectors[k].col(a).dot(set.vectors[(k + 1) % n].col(a));
    if (std::abs(step) < 1e-12)
      throw DegenerateSegment("Wilson loop segment " + std::to_string(k) +
                              " has vanishing overlap; refine the loop");
    w *= step;
  }
  return w;
}

}  // namespace ldr

#pragma once

// Localized nuclear basis: primitive equal-width Gaussians (real coherent
// states) per dimension, localized into orthonormal position eigenstates by
// solving X U = S U Λ, then combined by direct product.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ldr/error.hpp"

namespace ldr {

/// Bases whose overlap matrix is worse conditioned than this are rejected.
inline constexpr double kMaxOverlapCondition = 1e8;

/// Default cap on the number of product nodes (dense kinetic is N×N doubles).
inline constexpr std::size_t kDefaultMaxNodes = 4096;

/// Closed-form matrix elements of normalized real Gaussians
/// g(x) = (πσ²)^{-1/4} exp(-(x-c)²/(2σ²)).
namespace gaussian {

inline double value(double center, double width, double x) {
  const double u = (x - center) / width;
  return std::pow(std::numbers::pi * width * width, -0.25) * std::exp(-0.5 * u * u);
}

inline double overlap(double a, double b, double width) {
  const double d = a - b;
  return std::exp(-d * d / (4.0 * width * width));
}

/// Overlap of two normalized Gaussians with different widths.
inline double overlap(double a, double width_a, double b, double width_b) {
  const double s2 = width_a * width_a + width_b * width_b;
  const double d = a - b;
  return std::sqrt(2.0 * width_a * width_b / s2) * std::exp(-d * d / (2.0 * s2));
}

inline double position(double a, double b, double width) {
  return overlap(a, b, width) * 0.5 * (a + b);
}

/// ⟨g_a| -(1/2m) d²/dx² |g_b⟩.
inline double kinetic(double a, double b, double width, double mass) {
  const double d = a - b;
  const double s2 = width * width;
  return overlap(a, b, width) / (4.0 * mass * s2) * (1.0 - d * d / (2.0 * s2));
}

}  // namespace gaussian

struct PrimitiveBasis1D {
  std::vector<double> centers;
  double width = 1.0;
  double mass = 1.0;

  std::size_t size() const noexcept { return centers.size(); }

  void validate() const {
    if (centers.empty()) throw ConfigError("primitive basis has no functions");
    if (!(width > 0.0) || !std::isfinite(width))
      throw ConfigError("primitive basis width must be positive");
    if (!(mass > 0.0) || !std::isfinite(mass))
      throw ConfigError("primitive basis mass must be positive");
    for (std::size_t i = 1; i < centers.size(); ++i) {
      if (!(centers[i] > centers[i - 1]))
        throw ConfigError("primitive basis centers must be strictly increasing");
    }
  }
};

inline PrimitiveBasis1D build_primitive_1d(double grid_min, double grid_max, int count,
                                           double width_factor, double mass = 1.0) {
  if (count < 2) throw ConfigError("basis count must be >= 2, got " + std::to_string(count));
  if (!(grid_max > grid_min) || !std::isfinite(grid_min) || !std::isfinite(grid_max))
    throw ConfigError("basis range must satisfy max > min");
  if (!(width_factor > 0.0) || !std::isfinite(width_factor))
    throw ConfigError("basis width_factor must be positive");

  PrimitiveBasis1D basis;
  const double spacing = (grid_max - grid_min) / (count - 1);
  basis.centers.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) basis.centers[i] = grid_min + i * spacing;
  basis.centers.back() = grid_max;
  basis.width = width_factor * spacing;
  basis.mass = mass;
  basis.validate();
  return basis;
}

namespace detail {

template <class Element>
Eigen::MatrixXd symmetric_matrix(const PrimitiveBasis1D& basis, Element element) {
  basis.validate();
  const auto n = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      m(i, j) = element(basis.centers[i], basis.centers[j]);
      m(j, i) = m(i, j);
    }
  }
  return m;
}

}  // namespace detail

/// 2-norm condition number of a symmetric positive matrix. Returns +inf when
/// the smallest eigenvalue is not positive.
inline double condition_number(const Eigen::MatrixXd& spd) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(spd, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

/// Overlap matrix S. Throws IllConditionedBasis when cond(S) > kMaxOverlapCondition.
inline Eigen::MatrixXd overlap_matrix(const PrimitiveBasis1D& basis) {
  const double w = basis.width;
  Eigen::MatrixXd s = detail::symmetric_matrix(
      basis, [w](double a, double b) { return gaussian::overlap(a, b, w); });
  const double cond = condition_number(s);
  if (!(cond <= kMaxOverlapCondition)) {
    std::ostringstream msg;
    msg << "overlap matrix condition number " << cond << " exceeds " << kMaxOverlapCondition;
    throw IllConditionedBasis(msg.str(), cond);
  }
  return s;
}

inline Eigen::MatrixXd position_matrix(const PrimitiveBasis1D& basis) {
  const double w = basis.width;
  return detail::symmetric_matrix(
      basis, [w](double a, double b) { return gaussian::position(a, b, w); });
}

inline Eigen::MatrixXd kinetic_matrix(const PrimitiveBasis1D& basis) {
  const double w = basis.width;
  const double m = basis.mass;
  return detail::symmetric_matrix(
      basis, [w, m](double a, double b) { return gaussian::kinetic(a, b, w, m); });
}

/// Orthonormal position-eigenstate basis |R_n⟩ = Σ_μ U_{μn} |χ_μ⟩.
struct LocalizedBasis1D {
  PrimitiveBasis1D primitive;
  Eigen::VectorXd nodes;      // ascending position eigenvalues
  Eigen::MatrixXd transform;  // U, primitive × localized
  Eigen::MatrixXd kinetic;    // U^T T_prim U, exactly symmetric
  double overlap_cond = 1.0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(nodes.size()); }

  Eigen::VectorXd primitive_values(double x) const {
    Eigen::VectorXd g(static_cast<Eigen::Index>(primitive.size()));
    for (Eigen::Index mu = 0; mu < g.size(); ++mu)
      g(mu) = gaussian::value(primitive.centers[mu], primitive.width, x);
    return g;
  }

  /// χ_n(x) for every node n.
  Eigen::VectorXd amplitudes(double x) const { return transform.transpose() * primitive_values(x); }

  double amplitude(std::size_t n, double x) const {
    return transform.col(static_cast<Eigen::Index>(n)).dot(primitive_values(x));
  }

  /// ⟨R_n|g⟩ for a normalized Gaussian g of the given center and width.
  Eigen::VectorXd project_gaussian(double center, double width) const {
    Eigen::VectorXd o(static_cast<Eigen::Index>(primitive.size()));
    for (Eigen::Index mu = 0; mu < o.size(); ++mu)
      o(mu) = gaussian::overlap(primitive.centers[mu], primitive.width, center, width);
    return transform.transpose() * o;
  }
};

/// Solves X U = S U Λ by symmetric-definite reduction: S = L L^T,
/// (L^{-1} X L^{-T}) Q = Q Λ, U = L^{-T} Q.
inline LocalizedBasis1D localize(const PrimitiveBasis1D& basis) {
  basis.validate();
  const Eigen::MatrixXd s = overlap_matrix(basis);
  const Eigen::MatrixXd x = position_matrix(basis);
  const Eigen::MatrixXd t = kinetic_matrix(basis);

  LocalizedBasis1D out;
  out.primitive = basis;
  out.overlap_cond = condition_number(s);

  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw IllConditionedBasis("overlap matrix is not numerically positive definite",
                              out.overlap_cond);
  const auto lower = llt.matrixL();
  Eigen::MatrixXd reduced = lower.solve(x);
  reduced = lower.solve(reduced.transpose()).eval();
  reduced = (0.5 * (reduced + reduced.transpose())).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reduced);
  if (eig.info() != Eigen::Success)
    throw IllConditionedBasis("position eigenproblem did not converge", out.overlap_cond);

  out.nodes = eig.eigenvalues();
  out.transform = llt.matrixU().solve(eig.eigenvectors());

  // Sign convention: χ_n(R_n) > 0.
  for (Eigen::Index n = 0; n < out.nodes.size(); ++n) {
    if (out.amplitude(static_cast<std::size_t>(n), out.nodes(n)) < 0.0)
      out.transform.col(n) *= -1.0;
  }

  Eigen::MatrixXd kin = out.transform.transpose() * t * out.transform;
  out.kinetic = 0.5 * (kin + kin.transpose());

  const auto n = out.nodes.size();
  const double ortho_err =
      (out.transform.transpose() * s * out.transform - Eigen::MatrixXd::Identity(n, n))
          .cwiseAbs()
          .maxCoeff();
  Eigen::MatrixXd xl = out.transform.transpose() * x * out.transform;
  xl.diagonal() -= out.nodes;
  const double diag_err = xl.cwiseAbs().maxCoeff();
  if (ortho_err > 1e-10 || diag_err > 1e-10) {
    std::ostringstream msg;
    msg << "localized basis lost orthonormality (|U^T S U - I| = " << ortho_err
        << ", |U^T X U - Λ| = " << diag_err << ")";
    throw IllConditionedBasis(msg.str(), out.overlap_cond);
  }
  return out;
}

/// Direct-product nuclear basis. Node index is row-major over the factors:
/// the last dimension varies fastest.
class NuclearBasisND {
 public:
  NuclearBasisND() = default;

  NuclearBasisND(std::vector<LocalizedBasis1D> factors, std::size_t max_nodes = kDefaultMaxNodes)
      : factors_(std::move(factors)) {
    if (factors_.empty()) throw ConfigError("tensor product needs at least one factor");
    std::size_t total = 1;
    for (const auto& f : factors_) {
      if (f.size() == 0) throw ConfigError("tensor product factor has no nodes");
      if (total > max_nodes / f.size()) throw capacity(max_nodes);
      total *= f.size();
    }
    if (total > max_nodes) throw capacity(max_nodes);

    const std::size_t dims = factors_.size();
    strides_.assign(dims, 1);
    for (std::size_t d = dims - 1; d > 0; --d) strides_[d - 1] = strides_[d] * factors_[d].size();

    const auto nn = static_cast<Eigen::Index>(total);
    nodes_.resize(nn, static_cast<Eigen::Index>(dims));
    for (Eigen::Index n = 0; n < nn; ++n) {
      for (std::size_t d = 0; d < dims; ++d)
        nodes_(n, static_cast<Eigen::Index>(d)) =
            factors_[d].nodes(static_cast<Eigen::Index>(coordinate(static_cast<std::size_t>(n), d)));
    }

    // Σ_d I ⊗ ... ⊗ T_d ⊗ ... ⊗ I, assembled entrywise.
    kinetic_ = Eigen::MatrixXd::Zero(nn, nn);
    for (std::size_t m = 0; m < total; ++m) {
      for (std::size_t n : coupled_nodes(m)) {
        double value = 0.0;
        for (std::size_t d = 0; d < dims; ++d) {
          if (differs_only_in(m, n, d))
            value += factors_[d].kinetic(static_cast<Eigen::Index>(coordinate(m, d)),
                                         static_cast<Eigen::Index>(coordinate(n, d)));
        }
        kinetic_(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) = value;
      }
    }
  }

  std::size_t dimensions() const noexcept { return factors_.size(); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(nodes_.rows()); }
  const std::vector<LocalizedBasis1D>& factors() const noexcept { return factors_; }
  const Eigen::MatrixXd& nodes() const noexcept { return nodes_; }
  const Eigen::MatrixXd& kinetic() const noexcept { return kinetic_; }

  std::size_t coordinate(std::size_t n, std::size_t d) const {
    return (n / strides_[d]) % factors_[d].size();
  }

  std::size_t index(std::span<const std::size_t> coords) const {
    std::size_t n = 0;
    for (std::size_t d = 0; d < coords.size(); ++d) n += coords[d] * strides_[d];
    return n;
  }

  /// Nodes n with structurally non-zero T_{mn}: those that share every
  /// coordinate with m except at most one. Sorted ascending, includes m.
  std::vector<std::size_t> coupled_nodes(std::size_t m) const {
    std::vector<std::size_t> out;
    const std::size_t dims = factors_.size();
    for (std::size_t d = 0; d < dims; ++d) {
      const std::size_t base = m - coordinate(m, d) * strides_[d];
      for (std::size_t k = 0; k < factors_[d].size(); ++k) {
        const std::size_t n = base + k * strides_[d];
        if (n != m) out.push_back(n);
      }
    }
    out.push_back(m);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::vector<std::size_t>> coupling_pattern() const {
    std::vector<std::vector<std::size_t>> pattern(size());
    for (std::size_t m = 0; m < size(); ++m) pattern[m] = coupled_nodes(m);
    return pattern;
  }

  std::size_t nearest_node(std::span<const double> point) const {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < size(); ++n) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < dimensions(); ++d) {
        const double diff = nodes_(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d)) - point[d];
        d2 += diff * diff;
      }
      if (d2 < best_d2) {
        best_d2 = d2;
        best = n;
      }
    }
    return best;
  }

 private:
  static CapacityError capacity(std::size_t cap) {
    return CapacityError("product basis exceeds the node cap of " + std::to_string(cap));
  }

  bool differs_only_in(std::size_t m, std::size_t n, std::size_t dim) const {
    for (std::size_t d = 0; d < factors_.size(); ++d)
      if (d != dim && coordinate(m, d) != coordinate(n, d)) return false;
    return true;
  }

  std::vector<LocalizedBasis1D> factors_;
  std::vector<std::size_t> strides_;
  Eigen::MatrixXd nodes_;
  Eigen::MatrixXd kinetic_;
};

inline NuclearBasisND tensor_product(std::vector<LocalizedBasis1D> factors,
                                     std::size_t max_nodes = kDefaultMaxNodes) {
  return NuclearBasisND(std::move(factors), max_nodes);
}

/// χ_n(R) = Π_d χ^{(d)}_{n_d}(R_d).
inline double node_amplitude(const NuclearBasisND& basis, std::size_t n, std::span<const double> point) {
  if (n >= basis.size()) throw ConfigError("node index out of range");
  if (point.size() != basis.dimensions()) throw ConfigError("point dimension mismatch");
  double amp = 1.0;
  for (std::size_t d = 0; d < basis.dimensions(); ++d)
    amp *= basis.factors()[d].amplitude(basis.coordinate(n, d), point[d]);
  return amp;
}

}  // namespace ldr

#pragma once

// MIMO generalized super-twisting output tracking:
//
//   v      = -k1 phi1(sigma) + b nu
//   nu'    = -k2 phi2(sigma)
//   phi1   = (alpha1 |sigma|^-1/2 + alpha2) sigma
//   phi2   = (alpha1/2 |sigma|^-1/2 + alpha2) phi1
//
// and the allocation of v onto n well rates, optionally under a linear demand
// constraint W Q = D.

#include <Eigen/Dense>
#include <optional>

#include "ressim/grid.hpp"

namespace ressim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Floor on |sigma| inside |sigma|^-1/2. phi1 and phi2 stay continuous and
/// vanish at the origin.
inline constexpr double kSigmaFloor = 1e-12;

/// Relative singular-value threshold for ranks, pseudoinverses and null spaces.
inline constexpr double kRankTolerance = 1e-12;

struct OutputMap {
  RegionSet regions;
  double gamma1_0_rstar_0 = 1.0;  // scaling of the SR error components
};

struct Outputs {
  Vector y_u;
  Vector y_r;
};

/// Regional means of u over the pressure regions and of R over the SR regions.
Outputs compute_outputs(const ScalarField& u, const ScalarField& r, const DomainGrid& grid,
                        const OutputMap& map);

/// sigma = [y_u - r_u ; (y_R - r_R) / (gamma1_0 R*_0)].
Vector compute_error(const Vector& y_u, const Vector& y_r, const Vector& r_u, const Vector& r_r,
                     const OutputMap& map);

Vector phi1(const Vector& sigma, double alpha1, double alpha2);
Vector phi2(const Vector& sigma, double alpha1, double alpha2);

struct GstaGains {
  double k1 = 0.0, k2 = 0.0, b = 1.0;
  double alpha1 = 0.3, alpha2 = 80.0;
  double l = 0.0, k_bar1 = 0.0, k_bar2 = 0.0;
  double delta_b = 0.0;

  /// k1 = l k_bar1, k2 = l^2 k_bar2 and k_bar1 > sqrt(b k_bar2 / (1 - delta_b)).
  bool satisfies_design_rule() const;
};

/// k_bar1 = margin * sqrt(b k_bar2 / (1 - delta_b)), k1 = l k_bar1, k2 = l^2 k_bar2.
/// Throws ressim::Error unless k_bar2, l, b > 0, 0 <= delta_b < 1, margin > 1.
GstaGains design_gains(double k_bar2, double l, double b, double delta_b, double margin = 2.22);

struct Nominals {
  double beta0 = 0.0;
  double gamma1_0_rstar_0 = 0.0;
};

/// beta0 = 0.8 beta; gamma1_0 R*_0 = safety * gamma1_max * Gamma_R / sqrt(min V*).
/// Throws unless all inputs are positive and safety > 1.
Nominals select_nominals(double beta, double gamma1_max, double gamma_r, double min_well_volume,
                         double safety = 1.1);

/// Entry (i, j): 1/(beta0 V_ui) for a well inside pressure region i,
/// -1/(beta0 V_Ri) for a well inside SR region i, 0 otherwise.
Matrix build_B0(const OutputMap& map, const WellSet& wells, double beta0);

struct ControllerState {
  Vector sigma;  // current error
  Vector nu;     // integral state

  static ControllerState zero(std::size_t m) {
    return {Vector::Zero(static_cast<Eigen::Index>(m)), Vector::Zero(static_cast<Eigen::Index>(m))};
  }
};

/// Returns v = -k1 phi1(sigma) + b nu and advances nu by explicit Euler.
Vector gsta_step(ControllerState& state, const GstaGains& gains, double dt);

/// Singular values count when above rel_tol times max(sigma_max(a), scale).
int numerical_rank(const Matrix& a, double rel_tol = kRankTolerance, double scale = 0.0);
Matrix pseudo_inverse(const Matrix& a, double rel_tol = kRankTolerance);
/// Orthonormal basis of ker(a) as columns.
Matrix null_space(const Matrix& a, double rel_tol = kRankTolerance);

/// Maps the m-dimensional control v onto n well rates.
class InputAllocator {
 public:
  /// Unconstrained: Q = B0^+ v. Throws if B0 lacks full row rank.
  explicit InputAllocator(Matrix b0);

  /// Demand-constrained: Q = Wbar (B0 Wbar)^+ v + W^T (W W^T)^-1 D.
  /// Throws "too many constraints" when n_r + m > n, on a rank-deficient W,
  /// and "demand constraints incompatible with outputs" when B0 Wbar lacks
  /// full row rank.
  InputAllocator(Matrix b0, Matrix w);

  bool has_demand() const noexcept { return w_.rows() > 0; }
  std::size_t m() const noexcept { return static_cast<std::size_t>(b0_.rows()); }
  std::size_t n() const noexcept { return static_cast<std::size_t>(b0_.cols()); }
  std::size_t n_r() const noexcept { return static_cast<std::size_t>(w_.rows()); }

  /// Throws if a demand is required but missing, or supplied without W.
  Vector allocate(const Vector& v, const std::optional<Vector>& demand = std::nullopt) const;

  const Matrix& b0() const noexcept { return b0_; }
  const Matrix& b0_pinv() const noexcept { return b0_pinv_; }
  const Matrix& w() const noexcept { return w_; }
  const Matrix& w_bar() const noexcept { return w_bar_; }
  const Matrix& w_pinv_right() const noexcept { return w_pinv_right_; }

 private:
  Matrix b0_, b0_pinv_;
  Matrix w_, w_bar_, w_pinv_right_;
  Matrix feedback_map_;  // B0^+ or Wbar (B0 Wbar)^+
};

}  // namespace ressim

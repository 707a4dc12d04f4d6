#include "ressim/gsta.hpp"

#include <algorithm>

#include <cmath>
#include <string>

#include "ressim/diffusion.hpp"
#include "ressim/error.hpp"

namespace ressim {

Outputs compute_outputs(const ScalarField& u, const ScalarField& r, const DomainGrid& grid,
                        const OutputMap& map) {
  const auto& reg = map.regions;
  Outputs y{Vector(static_cast<Eigen::Index>(reg.m_u())),
            Vector(static_cast<Eigen::Index>(reg.m_r()))};
  for (std::size_t i = 0; i < reg.m_u(); ++i)
    y.y_u[static_cast<Eigen::Index>(i)] = mean_over(u, grid, reg.pressure()[i]);
  for (std::size_t i = 0; i < reg.m_r(); ++i)
    y.y_r[static_cast<Eigen::Index>(i)] = mean_over(r, grid, reg.sr()[i]);
  return y;
}

Vector compute_error(const Vector& y_u, const Vector& y_r, const Vector& r_u, const Vector& r_r,
                     const OutputMap& map) {
  if (y_u.size() != r_u.size() || y_r.size() != r_r.size())
    throw Error("output and reference sizes differ");
  Vector sigma(y_u.size() + y_r.size());
  sigma << y_u - r_u, (y_r - r_r) / map.gamma1_0_rstar_0;
  return sigma;
}

namespace {

double inv_sqrt_norm(const Vector& sigma) {
  return 1.0 / std::sqrt(std::max(sigma.norm(), kSigmaFloor));
}

}  // namespace

Vector phi1(const Vector& sigma, double alpha1, double alpha2) {
  return (alpha1 * inv_sqrt_norm(sigma) + alpha2) * sigma;
}

Vector phi2(const Vector& sigma, double alpha1, double alpha2) {
  return (0.5 * alpha1 * inv_sqrt_norm(sigma) + alpha2) * phi1(sigma, alpha1, alpha2);
}

bool GstaGains::satisfies_design_rule() const {
  if (!(delta_b >= 0.0 && delta_b < 1.0) || !(b > 0.0) || !(k_bar2 > 0.0) || !(l > 0.0))
    return false;
  const double rel = 1e-12;
  return k_bar1 > std::sqrt(b * k_bar2 / (1.0 - delta_b)) &&
         std::abs(k1 - l * k_bar1) <= rel * std::abs(k1) &&
         std::abs(k2 - l * l * k_bar2) <= rel * std::abs(k2);
}

GstaGains design_gains(double k_bar2, double l, double b, double delta_b, double margin) {
  if (!(delta_b >= 0.0 && delta_b < 1.0))
    throw Error("delta_b must satisfy 0 <= delta_b < 1");
  if (!(k_bar2 > 0.0) || !(l > 0.0) || !(b > 0.0)) throw Error("k_bar2, l and b must be positive");
  if (!(margin > 1.0)) throw Error("margin must exceed 1");
  GstaGains g;
  g.k_bar2 = k_bar2;
  g.l = l;
  g.b = b;
  g.delta_b = delta_b;
  g.k_bar1 = margin * std::sqrt(b * k_bar2 / (1.0 - delta_b));
  g.k1 = l * g.k_bar1;
  g.k2 = l * l * k_bar2;
  return g;
}

Nominals select_nominals(double beta, double gamma1_max, double gamma_r, double min_well_volume,
                         double safety) {
  if (!(beta > 0.0) || !(gamma1_max > 0.0) || !(gamma_r > 0.0) || !(min_well_volume > 0.0))
    throw Error("nominal selection inputs must be positive");
  if (!(safety > 1.0)) throw Error("nominal safety factor must exceed 1");
  return {0.8 * beta, safety * gamma1_max * gamma_r / std::sqrt(min_well_volume)};
}

Matrix build_B0(const OutputMap& map, const WellSet& wells, double beta0) {
  if (!(beta0 > 0.0)) throw Error("beta0 must be positive");
  const auto ordered = map.regions.ordered();
  Matrix b0 = Matrix::Zero(static_cast<Eigen::Index>(ordered.size()),
                           static_cast<Eigen::Index>(wells.size()));
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const Region& r = *ordered[i];
    const double sign = r.kind == RegionKind::pressure_output ? 1.0 : -1.0;
    for (std::size_t j = 0; j < wells.size(); ++j)
      if (well_inside(wells[j], r))
        b0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sign / (beta0 * r.volume);
  }
  return b0;
}

Vector gsta_step(ControllerState& state, const GstaGains& gains, double dt) {
  if (!(dt > 0.0)) throw Error("dt must be positive");
  const Vector v = -gains.k1 * phi1(state.sigma, gains.alpha1, gains.alpha2) + gains.b * state.nu;
  state.nu -= dt * gains.k2 * phi2(state.sigma, gains.alpha1, gains.alpha2);
  return v;
}

int numerical_rank(const Matrix& a, double rel_tol, double scale) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  const double ref = std::max(s.size() > 0 ? s[0] : 0.0, scale);
  if (ref == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > rel_tol * ref) ++r;
  return r;
}

Matrix pseudo_inverse(const Matrix& a, double rel_tol) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  Vector inv = Vector::Zero(s.size());
  const double cut = s.size() ? rel_tol * s[0] : 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > cut) inv[i] = 1.0 / s[i];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix null_space(const Matrix& a, double rel_tol) {
  const Eigen::Index n = a.cols();
  if (a.rows() == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const int r = numerical_rank(a, rel_tol);
  return svd.matrixV().rightCols(n - r);
}

InputAllocator::InputAllocator(Matrix b0) : b0_(std::move(b0)) {
  if (numerical_rank(b0_) < b0_.rows())
    throw Error("nominal control matrix B0 lacks full row rank (A4)");
  b0_pinv_ = pseudo_inverse(b0_);
  feedback_map_ = b0_pinv_;
}

InputAllocator::InputAllocator(Matrix b0, Matrix w) : InputAllocator(std::move(b0)) {
  if (w.rows() == 0) return;
  if (w.cols() != b0_.cols()) throw Error("demand weight matrix has the wrong column count");
  if (w.rows() + b0_.rows() > b0_.cols()) throw Error("too many constraints: n_r + m > n");
  if (numerical_rank(w) < w.rows()) throw Error("rank-deficient demand weight matrix W");
  w_ = std::move(w);
  w_bar_ = null_space(w_);
  const Matrix reduced = b0_ * w_bar_;
  if (numerical_rank(reduced, kRankTolerance, b0_.norm()) < reduced.rows())
    throw Error("demand constraints incompatible with outputs");
  feedback_map_ = w_bar_ * pseudo_inverse(reduced);
  const Matrix wwt = w_ * w_.transpose();
  w_pinv_right_ = w_.transpose() * wwt.ldlt().solve(Matrix::Identity(wwt.rows(), wwt.cols()));
}

Vector InputAllocator::allocate(const Vector& v, const std::optional<Vector>& demand) const {
  if (v.size() != b0_.rows()) throw Error("control vector size does not match m");
  Vector q = feedback_map_ * v;
  if (has_demand()) {
    if (!demand) throw Error("demand vector required by the demand constraint");
    if (demand->size() != w_.rows()) throw Error("demand vector size does not match n_r");
    q += w_pinv_right_ * *demand;
  } else if (demand && demand->size() > 0) {
    throw Error("demand supplied but no weight matrix configured");
  }
  return q;
}

}  // namespace ressim

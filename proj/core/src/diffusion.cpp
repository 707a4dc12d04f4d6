#include "ressim/diffusion.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#ifdef RESSIM_HAVE_OPENMP
#include <omp.h>
#endif

#include "ressim/error.hpp"

namespace ressim {

namespace {

int g_threads = 1;

// Deterministic for a fixed team size: static partition, per-thread partials
// combined in thread order.
template <class F>
double reduce_sum(std::size_t n, F&& term) {
#ifdef RESSIM_HAVE_OPENMP
  if (g_threads > 1) {
    std::vector<double> partial(static_cast<std::size_t>(g_threads), 0.0);
#pragma omp parallel num_threads(g_threads)
    {
      const int tid = omp_get_thread_num();
      double acc = 0.0;
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
        acc += term(static_cast<std::size_t>(i));
      partial[static_cast<std::size_t>(tid)] = acc;
    }
    double s = 0.0;
    for (double p : partial) s += p;
    return s;
  }
#endif
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += term(i);
  return s;
}

template <class F>
void for_each_cell(std::size_t n, F&& body) {
#ifdef RESSIM_HAVE_OPENMP
  if (g_threads > 1) {
#pragma omp parallel for schedule(static) num_threads(g_threads)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
      body(static_cast<std::size_t>(i));
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) body(i);
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

void DiffusionSolver::set_threads(int threads) { g_threads = threads < 1 ? 1 : threads; }
int DiffusionSolver::threads() { return g_threads; }

DiffusionParams DiffusionParams::uniform(const DomainGrid& grid, double beta,
                                         double c_hy_km2_per_yr, BoundaryKind bc) {
  DiffusionParams p;
  p.beta = beta;
  p.c_hy = grid.make_field(c_hy_km2_per_yr);
  p.bc = bc;
  return p;
}

DiffusionSolver::DiffusionSolver(const DomainGrid& grid, DiffusionParams params,
                                 const WellSet& wells)
    : grid_(&grid), wells_(&wells), params_(std::move(params)) {
  if (!(params_.beta > 0.0)) throw Error("beta must be positive (A3)");
  if (params_.c_hy.size() != grid.active_count())
    throw Error("c_hy field size does not match the active cell count");
  for (double c : params_.c_hy)
    if (!(c > 0.0) || !std::isfinite(c)) throw Error("c_hy must be positive everywhere (A3)");
  if (!(params_.theta >= 0.5 && params_.theta <= 1.0))
    throw Error("theta must lie in [0.5, 1]");

  const std::size_t n = grid.active_count();
  coef_.assign(n, {0.0, 0.0, 0.0, 0.0});
  diag_.assign(n, 0.0);
  const double hx2 = grid.dx() * grid.dx();
  const double hy2 = grid.dy() * grid.dy();
  const bool dirichlet = params_.bc == BoundaryKind::dirichlet;
  for (std::size_t a = 0; a < n; ++a) {
    const double ca = params_.c_hy[a];
    for (int f = 0; f < 4; ++f) {
      const double h2 = f < 2 ? hx2 : hy2;
      const int nb = grid.neighbor(a, static_cast<Face>(f));
      double k = 0.0;
      if (nb != DomainGrid::kNoNeighbor) {
        const double cb = params_.c_hy[static_cast<std::size_t>(nb)];
        k = 2.0 * ca * cb / (ca + cb) / h2;
      } else if (dirichlet) {
        k = 2.0 * ca / h2;
      }
      coef_[a][f] = k;
      diag_[a] += k;
    }
  }
}

void DiffusionSolver::apply_operator(std::span<const double> u, std::span<double> out) const {
  const auto& g = *grid_;
  for_each_cell(g.active_count(), [&](std::size_t a) {
    double acc = diag_[a] * u[a];
    for (int f = 0; f < 4; ++f) {
      const int nb = g.neighbor(a, static_cast<Face>(f));
      if (nb != DomainGrid::kNoNeighbor) acc -= coef_[a][f] * u[static_cast<std::size_t>(nb)];
    }
    out[a] = acc;
  });
}

ScalarField DiffusionSolver::source(std::span<const double> q) const {
  ScalarField s = grid_->make_field();
  for (std::size_t j = 0; j < wells_->size(); ++j) {
    const auto& w = (*wells_)[j];
    const double value = q[j] * w.indicator_value() / params_.beta;
    for (auto a : w.cells) s[a] += value;
  }
  return s;
}

// Solves (I + shift K) x = rhs by Jacobi-preconditioned CG; x holds the guess.
void DiffusionSolver::solve(std::span<const double> rhs, std::span<double> x, double shift,
                            StepInfo& info) const {
  const std::size_t n = grid_->active_count();
  std::vector<double> r(n), z(n), p(n), ap(n), inv_diag(n);
  for (std::size_t a = 0; a < n; ++a) inv_diag[a] = 1.0 / (1.0 + shift * diag_[a]);

  auto apply = [&](std::span<const double> in, std::span<double> out) {
    apply_operator(in, out);
    for_each_cell(n, [&](std::size_t a) { out[a] = in[a] + shift * out[a]; });
  };

  const double b_norm = std::sqrt(reduce_sum(n, [&](std::size_t a) { return rhs[a] * rhs[a]; }));
  apply(x, ap);
  for_each_cell(n, [&](std::size_t a) { r[a] = rhs[a] - ap[a]; });
  double r_norm = std::sqrt(reduce_sum(n, [&](std::size_t a) { return r[a] * r[a]; }));
  const double target = params_.cg_tolerance * (b_norm > 0.0 ? b_norm : 1.0);
  info.cg_iterations = 0;
  if (r_norm <= target) {
    info.cg_residual = b_norm > 0.0 ? r_norm / b_norm : r_norm;
    return;
  }

  for_each_cell(n, [&](std::size_t a) { z[a] = inv_diag[a] * r[a]; p[a] = z[a]; });
  double rz = reduce_sum(n, [&](std::size_t a) { return r[a] * z[a]; });
  const int max_iter = static_cast<int>(10 * n);
  for (int it = 1; it <= max_iter; ++it) {
    apply(p, ap);
    const double pap = reduce_sum(n, [&](std::size_t a) { return p[a] * ap[a]; });
    if (!(pap > 0.0)) throw Error("CG breakdown: operator not positive definite");
    const double alpha = rz / pap;
    for_each_cell(n, [&](std::size_t a) {
      x[a] += alpha * p[a];
      r[a] -= alpha * ap[a];
    });
    r_norm = std::sqrt(reduce_sum(n, [&](std::size_t a) { return r[a] * r[a]; }));
    info.cg_iterations = it;
    if (r_norm <= target) {
      info.cg_residual = b_norm > 0.0 ? r_norm / b_norm : r_norm;
      return;
    }
    for_each_cell(n, [&](std::size_t a) { z[a] = inv_diag[a] * r[a]; });
    const double rz_new = reduce_sum(n, [&](std::size_t a) { return r[a] * z[a]; });
    const double beta = rz_new / rz;
    rz = rz_new;
    for_each_cell(n, [&](std::size_t a) { p[a] = z[a] + beta * p[a]; });
  }
  throw Error("CG did not converge in " + std::to_string(max_iter) + " iterations");
}

PressureState DiffusionSolver::step(const PressureState& state, std::span<const double> q,
                                    double dt, StepInfo* info) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("dt must be positive");
  const auto& g = *grid_;
  const std::size_t n = g.active_count();
  if (state.u.size() != n) throw Error("pressure field size does not match the grid");
  if (q.size() != wells_->size()) throw Error("well-rate vector size does not match the well count");
  if (!all_finite(state.u.values())) throw Error("non-finite pressure field");
  if (!all_finite(q)) throw Error("non-finite well rates");
  if (params_.saturation) {
    const double qn = std::sqrt(std::inner_product(q.begin(), q.end(), q.begin(), 0.0));
    if (qn > *params_.saturation * (1.0 + 1e-12))
      throw Error("well rates exceed the saturation bound L_Q (A1)");
  }

  StepInfo local;
  StepInfo& si = info ? *info : local;
  const double theta = params_.theta;
  const ScalarField s = source(q);

  std::vector<double> rhs(n);
  if (theta < 1.0) {
    std::vector<double> ku(n);
    apply_operator(state.u.values(), ku);
    for_each_cell(n, [&](std::size_t a) {
      rhs[a] = state.u[a] - (1.0 - theta) * dt * ku[a] + dt * s[a];
    });
  } else {
    for_each_cell(n, [&](std::size_t a) { rhs[a] = state.u[a] + dt * s[a]; });
  }

  PressureState next;
  next.u = state.u;
  solve(rhs, next.u.values(), theta * dt, si);

  si.mean_shift = 0.0;
  if (params_.bc == BoundaryKind::neumann) {
    // The flux form has zero column sums, so the mean change is fixed by the
    // sources alone; remove the CG residual's contribution to it.
    double q_sum = 0.0;
    for (double v : q) q_sum += v;
    const double expected = mean_over(state.u, g) + dt * q_sum / (params_.beta * g.volume());
    const double shift = expected - mean_over(next.u, g);
    for (auto& v : next.u) v += shift;
    si.mean_shift = shift;
  }

  next.u_t = g.make_field();
  for (std::size_t a = 0; a < n; ++a) next.u_t[a] = (next.u[a] - state.u[a]) / dt;
  next.t = state.t + dt;
  return next;
}

double h0_norm(const ScalarField& field, const DomainGrid& grid) {
  double s = 0.0;
  for (double v : field) s += v * v;
  return std::sqrt(s * grid.cell_area());
}

double mean_over(const ScalarField& field, const DomainGrid& grid) {
  double s = 0.0;
  for (double v : field) s += v;
  return s * grid.cell_area() / grid.volume();
}

double mean_over(const ScalarField& field, const DomainGrid& grid, const Region& region) {
  if (region.cells.empty()) throw Error("empty region");
  double s = 0.0;
  for (auto a : region.cells) s += field[a];
  return s * grid.cell_area() / region.volume;
}

}  // namespace ressim

#pragma once

// Pressure-change diffusion with well sources:
//
//   u_t = div(c_hy grad u) + (1/beta) * sum_i B_i(x) Q_i(t)
//
// discretized with a cell-centred finite-volume 5-point stencil (harmonic-mean
// face diffusivity) and a theta-scheme in time. Under no-flux boundaries the
// scheme is conservative, so the domain mean obeys
//
//   mean(u_new) = mean(u_old) + dt * sum(Q) / (beta * V)
//
// to rounding. Internal units: km, yr, MPa.

#include <cstddef>
#include <optional>
#include <span>

#include "ressim/grid.hpp"

namespace ressim {

enum class BoundaryKind { neumann, dirichlet };

/// Hours per year used when converting diffusivities quoted in km^2/hr.
inline constexpr double kHoursPerYear = 8760.0;

struct DiffusionParams {
  double beta = 0.0;            // mixture compressibility [1/MPa]
  ScalarField c_hy;             // hydraulic diffusivity per active cell [km^2/yr]
  BoundaryKind bc = BoundaryKind::neumann;
  double theta = 1.0;           // 1 = backward Euler, 0.5 = Crank-Nicolson
  double cg_tolerance = 1e-10;  // relative residual
  std::optional<double> saturation;  // optional bound L_Q on ||Q||

  static DiffusionParams uniform(const DomainGrid& grid, double beta, double c_hy_km2_per_yr,
                                 BoundaryKind bc = BoundaryKind::neumann);
};

struct PressureState {
  ScalarField u;    // [MPa]
  ScalarField u_t;  // backward difference of the last step [MPa/yr]
  double t = 0.0;   // [yr]

  static PressureState zero(const DomainGrid& grid) {
    return {grid.make_field(), grid.make_field(), 0.0};
  }
};

struct StepInfo {
  int cg_iterations = 0;
  double cg_residual = 0.0;
  double mean_shift = 0.0;  // constant correction applied to close the mean balance
};

class DiffusionSolver {
 public:
  /// Throws ressim::Error when beta <= 0 or any c_hy <= 0.
  DiffusionSolver(const DomainGrid& grid, DiffusionParams params, const WellSet& wells);

  /// Advances one step with well rates `q` (size n) held constant over dt.
  /// Throws ressim::Error on dt <= 0, non-finite input, a saturation violation
  /// or a CG breakdown.
  PressureState step(const PressureState& state, std::span<const double> q, double dt,
                     StepInfo* info = nullptr) const;

  /// Applies the discrete operator K (so that u_t = -K u + sources); exposed
  /// for tests and benchmarks.
  void apply_operator(std::span<const double> u, std::span<double> out) const;

  /// Source term s_i = (1/beta) sum_j B_j(x_i) Q_j.
  ScalarField source(std::span<const double> q) const;

  const DomainGrid& grid() const noexcept { return *grid_; }
  const DiffusionParams& params() const noexcept { return params_; }
  std::size_t well_count() const noexcept { return wells_->size(); }

  /// Sets the OpenMP team size used by the stencil and CG kernels (1 = serial).
  /// Results are bitwise reproducible for a fixed thread count.
  static void set_threads(int threads);
  static int threads();

 private:
  const DomainGrid* grid_;
  const WellSet* wells_;
  DiffusionParams params_;
  // Per active cell: face transmissibilities (c_face / h^2) for the 4 faces;
  // for Dirichlet boundary faces the ghost-cell coefficient 2 c / h^2.
  std::vector<std::array<double, 4>> coef_;
  std::vector<double> diag_;  // sum of face coefficients of each cell

  void solve(std::span<const double> rhs, std::span<double> x, double shift, StepInfo& info) const;
};

/// sqrt(sum field^2 * cell_area) over the active cells.
double h0_norm(const ScalarField& field, const DomainGrid& grid);

/// Area-weighted mean over the whole active domain.
double mean_over(const ScalarField& field, const DomainGrid& grid);

/// Area-weighted mean over a region; throws on an empty region.
double mean_over(const ScalarField& field, const DomainGrid& grid, const Region& region);

}  // namespace ressim

#pragma once

// Pointwise seismicity rate driven by the pressure rate,
//
//   R_t = R * ( -gamma1(x) u_t - gamma2 (R - R*(x)) ),
//
// integrated in h = ln R so that R stays strictly positive.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ressim/grid.hpp"

namespace ressim {

/// Declared parameter bounds used for the positivity/boundedness checks.
struct SrBounds {
  double gamma1_min = 0.0, gamma1_max = 0.0;
  double gamma2_min = 0.0, gamma2_max = 0.0;
  double r_star_min = 0.0, r_star_max = 0.0;
};

struct SrParams {
  ScalarField gamma1;  // [1/MPa]
  double gamma2 = 0.0; // [1/events]
  ScalarField r_star;  // background rate [events/yr]
  SrBounds bounds;

  /// gamma1 = gamma1_max * density, with bounds taken from the fields.
  static SrParams from_density(const ScalarField& density, double gamma1_max, double gamma2,
                               double r_star);
};

/// Strict positivity of every parameter and containment in the declared bounds.
/// Returns the list of violations (empty when the parameters are admissible).
std::vector<std::string> check_sr_params(const SrParams& params);

struct SrState {
  ScalarField log_r;  // h = ln R
  double t = 0.0;

  static SrState at_rate(const ScalarField& r);
};

/// Advances every cell by dt with u_t held constant, using classical RK4 in
/// log coordinates and sub-steps chosen so dt_sub * gamma2 * max(R, R*) <= 0.1.
/// Throws ressim::Error on dt <= 0 or non-finite u_t.
SrState step_sr(const SrState& state, const SrParams& params, const ScalarField& u_t, double dt);

/// R = exp(h) per cell, floored at the smallest positive double.
ScalarField sr_field(const SrState& state);

/// Trapezoidal integral of a uniformly sampled rate series [events].
/// Throws on a negative sample.
double cumulative_events(std::span<const double> mean_sr_series, double dt);

/// Reads a density CSV with header `cell_id,value` and normalizes it so the
/// maximum is 1. Cells not listed get `fill` (before normalization). Throws on
/// unknown/inactive ids, negative values or an all-zero field.
ScalarField load_density_csv(const std::filesystem::path& path, const DomainGrid& grid,
                             double fill = 0.0);

/// Scales a non-negative field so its maximum is 1.
ScalarField normalize_max(ScalarField field);

}  // namespace ressim

#pragma once

// Scenario configuration (TOML), reference and demand generators, and the
// closed-loop run: controller -> diffusion sub-steps -> SR sub-steps -> record.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ressim/diffusion.hpp"
#include "ressim/grid.hpp"
#include "ressim/gsta.hpp"
#include "ressim/seismicity.hpp"

namespace ressim {

// ---------------------------------------------------------------- references

struct ReferenceSpec {
  enum class Kind { constant, sigmoid };
  Kind kind = Kind::constant;
  double target = 0.0;
  double t_mid = 0.0;  // [yr]
  double tau = 1.0;    // [yr]
};

/// constant: target. sigmoid: y0 + (target - y0) (s(t) - s(0)) / (1 - s(0)) with
/// s(t) = 1 / (1 + exp(-(t - t_mid) / tau)), so r(0) = y0 and r -> target.
/// Throws on tau <= 0 (sigmoid) or t < 0.
double reference_at(const ReferenceSpec& spec, double y0, double t);

// -------------------------------------------------------------------- demand

/// Piecewise-constant series: value i holds on [t_i, t_{i+1}); the last value
/// holds past the end and the first before the start.
class DemandSeries {
 public:
  DemandSeries() = default;
  /// Throws on an empty series, size mismatch, non-finite values or
  /// non-increasing times.
  DemandSeries(std::vector<double> t_years, std::vector<double> values);

  /// Reads a CSV with header `t_years,value`.
  static DemandSeries from_csv(const std::filesystem::path& path);

  double at(double t) const;
  bool empty() const noexcept { return t_.empty(); }
  const std::vector<double>& times() const noexcept { return t_; }
  const std::vector<double>& values() const noexcept { return v_; }

 private:
  std::vector<double> t_, v_;
};

struct DemandRowSpec {
  std::vector<int> wells;      // well indices carrying a non-zero weight
  double scale = 1.0;          // D_k(t) = scale * f(t)
  std::vector<double> weights; // explicit weights (same length as wells); empty = seeded draw
};

struct DemandSpec {
  std::filesystem::path series_path;  // resolved against the config directory
  std::vector<DemandRowSpec> rows;
  double weight_min = 0.8, weight_max = 1.2;
};

/// Builds the n_r x n demand weight matrix. Rows without explicit weights draw
/// them uniformly in [weight_min, weight_max] from a generator seeded by `seed`.
Matrix build_demand_weights(const DemandSpec& spec, std::size_t n_wells, std::uint64_t seed);

/// D(t) = [scale_k f(t)]_k. Throws on an empty series.
Vector demand_at(const DemandSeries& series, const std::vector<double>& scales, double t);

// -------------------------------------------------------------------- config

struct MaskSpec {
  enum class Kind { full, ellipse };
  Kind kind = Kind::full;
  double cx = 0, cy = 0, ax = 0, ay = 0;  // ellipse centre and semi-axes [km]
};

struct GridSpec {
  double lx = 0, ly = 0;
  int nx = 0, ny = 0;
  MaskSpec mask;
};

/// A well supported on the active cells whose centres lie within `radius` of
/// (x, y); radius 0 selects the single cell containing the point.
struct WellSpec {
  double x = 0, y = 0, radius = 0;
};

/// Rectangle [x0, x1] x [y0, y1] in km (cells with centres inside), or the
/// remainder of the active domain not claimed by any rectangle region.
struct RegionSpec {
  std::string name;
  RegionKind kind = RegionKind::pressure_output;
  bool remainder = false;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct DensitySpec {
  enum class Kind { uniform, gaussian, csv };
  Kind kind = Kind::uniform;
  double cx = 0, cy = 0, sigma = 1, floor = 0;  // gaussian blob in km
  std::filesystem::path path;                     // csv
};

struct DiffusionSpec {
  double beta = 0;
  double c_hy = 0;  // [km^2/yr]
  BoundaryKind bc = BoundaryKind::neumann;
  double theta = 1.0;
  std::optional<double> saturation;
};

struct SrSpec {
  double gamma1_max = 0, gamma2 = 0, r_star = 0;
  double r0_factor = 1.0;  // R(0) = r0_factor * R*
  DensitySpec density;
};

struct ControllerSpec {
  double l = 0, k_bar2 = 0, b = 1, delta_b = 0, margin = 2.22;
  double alpha1 = 0.3, alpha2 = 80;
  double gamma_r = 0, safety = 1.1;              // select_nominals inputs
  std::optional<double> gamma1_0_rstar_0;        // explicit override
};

struct Schedule {
  double t_end = 0, dt = 0, dt_c = 0;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct ScenarioConfig {
  std::string name;
  std::filesystem::path base_dir;
  GridSpec grid;
  std::vector<WellSpec> wells;
  std::vector<RegionSpec> regions;
  DiffusionSpec diffusion;
  SrSpec sr;
  ControllerSpec controller;
  std::vector<ReferenceSpec> pressure_refs;
  std::vector<ReferenceSpec> sr_refs;
  std::optional<DemandSpec> demand;
  Schedule schedule;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<std::pair<int, int>> grid;
  std::optional<int> threads;
  std::optional<BoundaryKind> bc;
};

/// Applies command-line overrides. A dt override also moves dt_c when dt_c
/// equalled the old dt.
void apply_overrides(ScenarioConfig& config, const Overrides& overrides);

/// Parses a TOML scenario without validating it. Throws ConfigError with
/// line information on syntax errors and on missing or mistyped keys.
ScenarioConfig parse_scenario(const std::filesystem::path& path);
ScenarioConfig parse_scenario_string(const std::string& toml, const std::filesystem::path& base_dir);

struct AssumptionCheck {
  std::string name;  // "A1".."A4" or "schedule"
  bool pass = true;
  std::vector<std::string> messages;
};

struct ValidationReport {
  std::vector<AssumptionCheck> checks;
  bool pass() const;
  /// First failing check, if any.
  const AssumptionCheck* first_failure() const;
};

ValidationReport validate(const ScenarioConfig& config);

/// parse_scenario + validate; throws ConfigError naming the violated
/// assumption when validation fails.
ScenarioConfig load_scenario(const std::filesystem::path& path);

// --------------------------------------------------------------------- model

/// Everything derived from a config. Not copyable or movable: the diffusion
/// solver built from it keeps references into `grid` and `wells`.
struct Model {
  DomainGrid grid;
  RegionSet regions;
  std::vector<std::string> region_names;  // ordered like RegionSet::ordered()
  WellSet wells;
  DiffusionParams diffusion;
  SrParams sr;
  OutputMap outputs;
  Nominals nominals;
  GstaGains gains;
  Matrix b0;
  Matrix w;  // n_r x n, empty without demand
  std::vector<double> demand_scales;
  DemandSeries series;
  double r0_factor = 1.0;

  Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
};

/// Builds the grid, regions, wells and parameters. Throws ConfigError (with
/// the assumption name where applicable) on inconsistent input.
std::unique_ptr<Model> build_model(const ScenarioConfig& config);

DomainGrid build_grid(const GridSpec& spec);
ScalarField build_density(const DensitySpec& spec, const DomainGrid& grid,
                          const std::filesystem::path& base_dir);

// ----------------------------------------------------------------------- run

enum class RunMode {
  closed_loop,  // GSTA feedback plus demand particular solution
  demand_only,  // Q = W^+ D, no feedback (uncontrolled baseline)
  zero_input,   // Q = 0
};

std::string to_string(RunMode mode);

/// Uniformly sampled at dt_c, t = 0 .. t_end. Control entries at sample k are
/// the values applied over [t_k, t_k + dt_c); the last sample's control is
/// computed but not applied.
struct RunRecord {
  std::vector<double> t;
  std::vector<Vector> y_u, y_r, r_u, r_r, sigma, nu, q, demand, wq;
  std::vector<double> mean_u;     // domain mean pressure
  std::vector<double> mean_r;     // domain mean SR
  std::vector<double> h0_u, h0_ut;
  std::vector<double> max_abs_ut; // pointwise max |u_t|
  std::vector<double> min_log_r, max_log_r;
  std::vector<double> cumulative_events;
  std::vector<double> mass_residual;  // max over the period's sub-steps
  std::vector<int> cg_iterations;     // summed over the period's sub-steps

  struct Meta {
    std::string scenario;
    RunMode mode = RunMode::closed_loop;
    BoundaryKind bc = BoundaryKind::neumann;
    double beta = 0, volume = 0, dt = 0, dt_c = 0, t_end = 0;
    double c_min = 0, lx = 0, ly = 0;
    double r_star = 0;  // domain mean of R*
    double gamma1_max = 0, gamma2 = 0, r_star_min = 0, r_star_max = 0;
    double gamma1_0_rstar_0 = 0;
    std::vector<double> well_volumes;
    std::size_t m_u = 0, m_r = 0, n = 0, n_r = 0;
    std::vector<std::string> region_names;
    double h0_u0 = 0, mean_u0 = 0, h0_ku0 = 0;
    std::optional<double> declared_saturation;
    GstaGains gains;
  } meta;

  std::size_t size() const noexcept { return t.size(); }
};

/// Runs the scenario. Throws SimulationError with the step index on a
/// non-finite state or solver breakdown.
RunRecord run(const ScenarioConfig& config, RunMode mode = RunMode::closed_loop);
RunRecord run(const ScenarioConfig& config, const Model& model, RunMode mode);

}  // namespace ressim

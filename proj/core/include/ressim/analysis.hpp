#pragma once

// Post-processing of run records: error norms, finite-time convergence
// detection, conservation and eISS bound checks, CSV and JSON export.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ressim/scenario.hpp"

namespace ressim {

enum class BoundStatus { pass, fail, info, not_applicable };

std::string to_string(BoundStatus status);

struct BoundReport {
  std::string quantity;
  double measured = 0.0;  // worst-case measured value (or worst measured/bound ratio input)
  double bound = 0.0;     // bound at the worst-case sample
  std::map<std::string, double> inputs;  // recorded for audit
  BoundStatus status = BoundStatus::info;
  std::string note;
};

/// ||sigma(t)|| per sample.
std::vector<double> error_norm_series(const RunRecord& record);

/// Earliest t_i such that series[j] < threshold for every t_j in
/// [t_i, t_i + hold] and the window fits in the data; hold <= 0 means "until
/// the end of the series". nullopt when no such time exists.
std::optional<double> detect_convergence(std::span<const double> t, std::span<const double> series,
                                         double threshold, double hold);

/// Largest relative per-period residual of the mean balance
/// mean_u[k+1] - mean_u[k] - dt_c sum(Q_k) / (beta V). Passes at <= tolerance.
BoundReport verify_mass_balance(const RunRecord& record, double tolerance = 1e-12);

struct EissOptions {
  std::optional<double> declared_l_q;  // audit: flag when below the measured L_Q
  std::optional<double> poincare;      // defaults to max(Lx, Ly) / pi
};

/// H0-norm bounds on u and u_t from measured L_Q and L_Qdot. Status is fail
/// only if a measured norm exceeds its bound or the declared inputs are
/// inconsistent with the record.
std::vector<BoundReport> verify_eiss(const RunRecord& record, const EissOptions& options = {});

/// Comparison bound on max |ln R| driven by the measured pointwise max |u_t|.
/// Informational.
BoundReport log_r_bound_report(const RunRecord& record);

/// max_t ||W Q(t) - D(t)|| / max(1, ||D||_inf); 0 without demand.
double demand_residual(const RunRecord& record);

struct TrackingSummary {
  double window_start = 0.0;
  std::vector<double> pressure_rel_error;  // per pressure region, max over the window
  std::vector<double> sr_rel_error;        // per SR region, max |y_R - r_R| / r_R over the window
  double events_controlled = 0.0;
  double events_background = 0.0;
  double demand_residual = 0.0;
};

/// Tracking metrics over samples with t >= window_start. Pressure errors are
/// relative to each reference's total swing |r(t_end) - r(0)|.
TrackingSummary summarize(const RunRecord& record, double window_start);

/// Writes outputs.csv, controls.csv, demand.csv, error_norm.csv and
/// events_cumulative.csv into `out_dir` (created if missing). `baseline`
/// provides the uncontrolled cumulative-event column (zeros when absent).
std::vector<std::filesystem::path> emit_csv(const RunRecord& record, const std::filesystem::path& out_dir,
                                            const RunRecord* baseline = nullptr);

/// Machine-readable summary with stable key names.
void write_report_json(const std::filesystem::path& path, const RunRecord& record,
                       const std::vector<BoundReport>& reports, const TrackingSummary& summary);

}  // namespace ressim

#include "ressim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <nlohmann/json.hpp>

#include "ressim/csv.hpp"
#include "ressim/error.hpp"

namespace ressim {

std::string to_string(BoundStatus status) {
  switch (status) {
    case BoundStatus::pass: return "pass";
    case BoundStatus::fail: return "fail";
    case BoundStatus::info: return "info";
    case BoundStatus::not_applicable: return "not applicable";
  }
  return "unknown";
}

std::vector<double> error_norm_series(const RunRecord& record) {
  std::vector<double> out;
  out.reserve(record.sigma.size());
  for (const auto& s : record.sigma) out.push_back(s.norm());
  return out;
}

std::optional<double> detect_convergence(std::span<const double> t, std::span<const double> series,
                                         double threshold, double hold) {
  if (!(threshold > 0.0)) throw Error("threshold must be positive");
  if (t.size() != series.size()) throw Error("time and series lengths differ");
  if (t.empty()) return std::nullopt;
  const double t_last = t.back();
  const double slack = 1e-9 * std::max(1.0, std::abs(t_last));
  std::size_t run_end = t.size();  // first index >= i whose sample is not below threshold
  std::optional<double> best;
  for (std::size_t i = t.size(); i-- > 0;) {
    if (!(series[i] < threshold)) {
      run_end = i;
      continue;
    }
    const bool to_end = run_end == t.size();
    if (hold <= 0.0) {
      if (to_end) best = t[i];
    } else if (t[i] + hold <= t_last + slack && (to_end || t[run_end] > t[i] + hold)) {
      best = t[i];
    }
  }
  return best;
}

BoundReport verify_mass_balance(const RunRecord& rec, double tolerance) {
  BoundReport r;
  r.quantity = "mass_balance";
  r.bound = tolerance;
  r.inputs = {{"beta", rec.meta.beta}, {"volume", rec.meta.volume}, {"dt_c", rec.meta.dt_c}};
  if (rec.meta.bc != BoundaryKind::neumann) {
    r.status = BoundStatus::not_applicable;
    r.note = "mean balance holds only under no-flux boundaries";
    return r;
  }
  const double scale = 1.0 / (rec.meta.beta * rec.meta.volume);
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < rec.size(); ++k) {
    const double expected = rec.meta.dt_c * rec.q[k].sum() * scale;
    const double res = std::abs(rec.mean_u[k + 1] - rec.mean_u[k] - expected) /
                       std::max(1.0, std::abs(rec.mean_u[k]));
    worst = std::max(worst, res);
  }
  r.measured = worst;
  r.status = worst <= tolerance ? BoundStatus::pass : BoundStatus::fail;
  return r;
}

std::vector<BoundReport> verify_eiss(const RunRecord& rec, const EissOptions& options) {
  const auto& meta = rec.meta;
  const double eps = options.poincare.value_or(std::max(meta.lx, meta.ly) / std::numbers::pi);
  const double n = static_cast<double>(meta.n);
  const double sqrt_v = std::sqrt(meta.volume);

  double l_q = 0.0, l_qdot = 0.0;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    l_q = std::max(l_q, rec.q[k].norm());
    const double dq = k == 0 ? rec.q[k].norm() : (rec.q[k] - rec.q[k - 1]).norm();
    l_qdot = std::max(l_qdot, dq / meta.dt_c);
  }
  double inv_sqrt_vt = 0.0;
  for (double v : meta.well_volumes) inv_sqrt_vt += 1.0 / std::sqrt(v) - 1.0 / sqrt_v;

  const double lambda = meta.c_min / (eps * eps);
  const double gain = eps * eps / (meta.beta * meta.c_min) * std::sqrt(n) * inv_sqrt_vt;
  const double mean_rate = std::sqrt(n) * l_q / (meta.beta * sqrt_v);

  const bool inconsistent = options.declared_l_q && *options.declared_l_q < l_q;
  std::map<std::string, double> inputs = {
      {"epsilon", eps},    {"c_min", meta.c_min},         {"beta", meta.beta},
      {"volume", meta.volume}, {"n", n},                   {"inv_sqrt_vt", inv_sqrt_vt},
      {"L_Q", l_q},        {"L_Qdot", l_qdot},            {"h0_u0", meta.h0_u0},
      {"mean_u0", meta.mean_u0}, {"h0_ku0", meta.h0_ku0}};
  if (options.declared_l_q) inputs["L_Q_declared"] = *options.declared_l_q;

  auto finish = [&](BoundReport& r, double worst_ratio) {
    r.inputs = inputs;
    if (inconsistent) {
      r.status = BoundStatus::fail;
      r.note = "inconsistent inputs: declared L_Q below measured max |Q|";
    } else {
      r.status = worst_ratio <= 1.0 ? BoundStatus::pass : BoundStatus::fail;
      r.note = "bound uses the rectangle Poincare estimate";
    }
  };

  BoundReport ru{"h0_u", 0, 0, {}, BoundStatus::info, {}};
  BoundReport rut{"h0_ut", 0, 0, {}, BoundStatus::info, {}};
  double worst_u = -1.0, worst_ut = -1.0;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    const double t = rec.t[k];
    const double g_u = meta.h0_u0 + 2.0 * sqrt_v * std::abs(meta.mean_u0) + gain * l_q + t * mean_rate;
    const double g_ut = std::exp(-lambda * t) * meta.h0_ku0 + gain * l_qdot + mean_rate;
    const double ratio_u = g_u > 0 ? rec.h0_u[k] / g_u : (rec.h0_u[k] > 0 ? INFINITY : 0.0);
    const double ratio_ut = g_ut > 0 ? rec.h0_ut[k] / g_ut : (rec.h0_ut[k] > 0 ? INFINITY : 0.0);
    if (ratio_u > worst_u) worst_u = ratio_u, ru.measured = rec.h0_u[k], ru.bound = g_u;
    if (ratio_ut > worst_ut) worst_ut = ratio_ut, rut.measured = rec.h0_ut[k], rut.bound = g_ut;
  }
  finish(ru, worst_u);
  finish(rut, worst_ut);
  ru.inputs["worst_ratio"] = std::max(worst_u, 0.0);
  rut.inputs["worst_ratio"] = std::max(worst_ut, 0.0);
  return {ru, rut};
}

BoundReport log_r_bound_report(const RunRecord& rec) {
  const auto& meta = rec.meta;
  BoundReport r;
  r.quantity = "max_abs_log_r";
  r.status = BoundStatus::info;
  if (rec.size() == 0) return r;
  const double u_max = *std::max_element(rec.max_abs_ut.begin(), rec.max_abs_ut.end());
  const double upper =
      std::max(rec.max_log_r.front(), std::log(meta.r_star_max + meta.gamma1_max * u_max / meta.gamma2));
  const double lower =
      std::min(rec.min_log_r.front(), std::log(meta.r_star_min)) - meta.gamma1_max * u_max * rec.t.back();
  double measured = 0.0;
  for (std::size_t k = 0; k < rec.size(); ++k)
    measured = std::max({measured, std::abs(rec.max_log_r[k]), std::abs(rec.min_log_r[k])});
  r.measured = measured;
  r.bound = std::max(std::abs(upper), std::abs(lower));
  r.inputs = {{"max_abs_ut", u_max}, {"gamma1_max", meta.gamma1_max}, {"gamma2", meta.gamma2},
              {"r_star_min", meta.r_star_min}, {"r_star_max", meta.r_star_max}};
  r.note = measured <= r.bound ? "within comparison bound" : "exceeds comparison bound";
  return r;
}

double demand_residual(const RunRecord& rec) {
  double worst = 0.0;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    if (rec.demand[k].size() == 0) continue;
    const double scale = std::max(1.0, rec.demand[k].cwiseAbs().maxCoeff());
    worst = std::max(worst, (rec.wq[k] - rec.demand[k]).norm() / scale);
  }
  return worst;
}

TrackingSummary summarize(const RunRecord& rec, double window_start) {
  TrackingSummary s;
  s.window_start = window_start;
  s.pressure_rel_error.assign(rec.meta.m_u, 0.0);
  s.sr_rel_error.assign(rec.meta.m_r, 0.0);
  if (rec.size() == 0) return s;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    if (rec.t[k] < window_start) continue;
    for (std::size_t i = 0; i < rec.meta.m_u; ++i) {
      const auto e = static_cast<Eigen::Index>(i);
      const double swing = std::abs(rec.r_u.back()[e] - rec.r_u.front()[e]);
      const double err = std::abs(rec.y_u[k][e] - rec.r_u[k][e]) / std::max(swing, 1e-300);
      s.pressure_rel_error[i] = std::max(s.pressure_rel_error[i], err);
    }
    for (std::size_t i = 0; i < rec.meta.m_r; ++i) {
      const auto e = static_cast<Eigen::Index>(i);
      const double err = std::abs(rec.y_r[k][e] - rec.r_r[k][e]) / std::abs(rec.r_r[k][e]);
      s.sr_rel_error[i] = std::max(s.sr_rel_error[i], err);
    }
  }
  s.events_controlled = rec.cumulative_events.back();
  s.events_background = rec.meta.r_star * rec.t.back();
  s.demand_residual = demand_residual(rec);
  return s;
}

std::vector<std::filesystem::path> emit_csv(const RunRecord& rec, const std::filesystem::path& out_dir,
                                            const RunRecord* baseline) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());
  const auto& meta = rec.meta;
  std::vector<std::filesystem::path> files;
  auto region_name = [&](std::size_t i) {
    return i < meta.region_names.size() ? meta.region_names[i] : "region" + std::to_string(i);
  };
  auto put = [](std::vector<double>& row, const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v[i]);
  };

  {
    CsvTable t;
    t.header = {"t_years"};
    for (std::size_t i = 0; i < meta.m_u; ++i) {
      t.header.push_back("y_u_" + region_name(i));
      t.header.push_back("r_u_" + region_name(i));
    }
    for (std::size_t i = 0; i < meta.m_r; ++i) {
      t.header.push_back("y_r_" + region_name(meta.m_u + i));
      t.header.push_back("r_r_" + region_name(meta.m_u + i));
    }
    t.header.push_back("mean_u");
    t.header.push_back("mean_r");
    for (std::size_t k = 0; k < rec.size(); ++k) {
      std::vector<double> row{rec.t[k]};
      for (Eigen::Index i = 0; i < rec.y_u[k].size(); ++i) row.push_back(rec.y_u[k][i]), row.push_back(rec.r_u[k][i]);
      for (Eigen::Index i = 0; i < rec.y_r[k].size(); ++i) row.push_back(rec.y_r[k][i]), row.push_back(rec.r_r[k][i]);
      row.push_back(rec.mean_u[k]);
      row.push_back(rec.mean_r[k]);
      t.rows.push_back(std::move(row));
    }
    files.push_back(out_dir / "outputs.csv");
    write_csv(files.back(), t);
  }
  {
    CsvTable t;
    t.header = {"t_years"};
    for (std::size_t j = 0; j < meta.n; ++j) t.header.push_back("Q_" + std::to_string(j));
    for (std::size_t k = 0; k < rec.size(); ++k) {
      std::vector<double> row{rec.t[k]};
      put(row, rec.q[k]);
      t.rows.push_back(std::move(row));
    }
    files.push_back(out_dir / "controls.csv");
    write_csv(files.back(), t);
  }
  {
    CsvTable t;
    t.header = {"t_years"};
    for (std::size_t j = 0; j < meta.n_r; ++j) t.header.push_back("D_" + std::to_string(j));
    for (std::size_t j = 0; j < meta.n_r; ++j) t.header.push_back("WQ_" + std::to_string(j));
    for (std::size_t k = 0; k < rec.size(); ++k) {
      std::vector<double> row{rec.t[k]};
      put(row, rec.demand[k]);
      put(row, rec.wq[k]);
      t.rows.push_back(std::move(row));
    }
    files.push_back(out_dir / "demand.csv");
    write_csv(files.back(), t);
  }
  {
    CsvTable t;
    t.header = {"t_years", "error_norm"};
    for (std::size_t i = 0; i < meta.m_u + meta.m_r; ++i) t.header.push_back("sigma_" + region_name(i));
    for (std::size_t i = 0; i < meta.m_u + meta.m_r; ++i) t.header.push_back("nu_" + region_name(i));
    for (std::size_t k = 0; k < rec.size(); ++k) {
      std::vector<double> row{rec.t[k], rec.sigma[k].norm()};
      put(row, rec.sigma[k]);
      put(row, rec.nu[k]);
      t.rows.push_back(std::move(row));
    }
    files.push_back(out_dir / "error_norm.csv");
    write_csv(files.back(), t);
  }
  {
    CsvTable t;
    t.header = {"t_years", "controlled", "baseline", "background"};
    for (std::size_t k = 0; k < rec.size(); ++k) {
      const double base = baseline && k < baseline->size() ? baseline->cumulative_events[k] : 0.0;
      t.rows.push_back({rec.t[k], rec.cumulative_events[k], base, meta.r_star * rec.t[k]});
    }
    files.push_back(out_dir / "events_cumulative.csv");
    write_csv(files.back(), t);
  }
  return files;
}

void write_report_json(const std::filesystem::path& path, const RunRecord& rec,
                       const std::vector<BoundReport>& reports, const TrackingSummary& summary) {
  using json = nlohmann::ordered_json;
  const auto& meta = rec.meta;
  json j;
  j["scenario"] = meta.scenario;
  j["mode"] = to_string(rec.meta.mode);
  j["boundary"] = meta.bc == BoundaryKind::neumann ? "neumann" : "dirichlet";
  j["samples"] = rec.size();
  j["t_end"] = meta.t_end;
  j["dt"] = meta.dt;
  j["dt_c"] = meta.dt_c;
  j["wells"] = meta.n;
  j["pressure_regions"] = meta.m_u;
  j["sr_regions"] = meta.m_r;
  j["demand_rows"] = meta.n_r;
  j["gains"] = {{"k1", meta.gains.k1},         {"k2", meta.gains.k2},         {"b", meta.gains.b},
                {"alpha1", meta.gains.alpha1}, {"alpha2", meta.gains.alpha2}, {"l", meta.gains.l},
                {"k_bar1", meta.gains.k_bar1}, {"k_bar2", meta.gains.k_bar2}, {"delta_b", meta.gains.delta_b}};
  j["gamma1_0_rstar_0"] = meta.gamma1_0_rstar_0;
  j["summary"] = {{"window_start", summary.window_start},
                  {"pressure_rel_error", summary.pressure_rel_error},
                  {"sr_rel_error", summary.sr_rel_error},
                  {"events_controlled", summary.events_controlled},
                  {"events_background", summary.events_background},
                  {"demand_residual", summary.demand_residual}};
  if (rec.size() > 0) j["final_error_norm"] = rec.sigma.back().norm();
  json list = json::array();
  for (const auto& r : reports) {
    json e;
    e["quantity"] = r.quantity;
    e["status"] = to_string(r.status);
    e["measured"] = r.measured;
    e["bound"] = r.bound;
    e["inputs"] = json::object();
    for (const auto& [k, v] : r.inputs) e["inputs"][k] = v;
    e["note"] = r.note;
    list.push_back(std::move(e));
  }
  j["checks"] = std::move(list);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace ressim

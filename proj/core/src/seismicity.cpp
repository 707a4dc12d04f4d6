#include "ressim/seismicity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ressim/csv.hpp"
#include "ressim/error.hpp"

namespace ressim {

namespace {

constexpr double kMaxStiffness = 0.1;  // dt_sub * gamma2 * max(R, R*)

std::pair<double, double> min_max(const ScalarField& f) {
  auto [lo, hi] = std::minmax_element(f.begin(), f.end());
  return {*lo, *hi};
}

}  // namespace

SrParams SrParams::from_density(const ScalarField& density, double gamma1_max, double gamma2,
                                double r_star) {
  SrParams p;
  p.gamma1 = density;
  for (auto& v : p.gamma1) v *= gamma1_max;
  p.gamma2 = gamma2;
  p.r_star = ScalarField(density.size(), r_star);
  if (density.size() > 0) {
    auto [g_lo, g_hi] = min_max(p.gamma1);
    p.bounds.gamma1_min = g_lo;
    p.bounds.gamma1_max = std::max(g_hi, gamma1_max);
  }
  p.bounds.gamma2_min = p.bounds.gamma2_max = gamma2;
  p.bounds.r_star_min = p.bounds.r_star_max = r_star;
  return p;
}

std::vector<std::string> check_sr_params(const SrParams& p) {
  std::vector<std::string> out;
  const auto& b = p.bounds;
  if (!(b.gamma1_min > 0.0)) out.push_back("gamma1 lower bound must be positive");
  if (!(b.gamma2_min > 0.0)) out.push_back("gamma2 lower bound must be positive");
  if (!(b.r_star_min > 0.0)) out.push_back("R* lower bound must be positive");
  if (p.gamma1.size() != p.r_star.size()) out.push_back("gamma1 and R* field sizes differ");
  for (double g : p.gamma1)
    if (!(g >= b.gamma1_min && g <= b.gamma1_max)) {
      out.push_back("gamma1 outside its declared bounds");
      break;
    }
  if (!(p.gamma2 >= b.gamma2_min && p.gamma2 <= b.gamma2_max))
    out.push_back("gamma2 outside its declared bounds");
  for (double r : p.r_star)
    if (!(r >= b.r_star_min && r <= b.r_star_max)) {
      out.push_back("R* outside its declared bounds");
      break;
    }
  return out;
}

SrState SrState::at_rate(const ScalarField& r) {
  SrState s;
  s.log_r = r;
  for (auto& v : s.log_r) {
    if (!(v > 0.0)) throw Error("seismicity rate must be positive");
    v = std::log(v);
  }
  return s;
}

SrState step_sr(const SrState& state, const SrParams& params, const ScalarField& u_t, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("dt must be positive");
  const std::size_t n = state.log_r.size();
  if (u_t.size() != n || params.gamma1.size() != n || params.r_star.size() != n)
    throw Error("seismicity field sizes do not match");
  for (double v : u_t)
    if (!std::isfinite(v)) throw Error("non-finite pressure rate");

  SrState next;
  next.log_r = state.log_r;
  next.t = state.t + dt;
  const double g2 = params.gamma2;
  for (std::size_t a = 0; a < n; ++a) {
    const double drive = -params.gamma1[a] * u_t[a];
    const double rs = params.r_star[a];
    auto rhs = [&](double h) { return drive - g2 * (std::exp(h) - rs); };

    double h = next.log_r[a];
    const double stiffness = dt * g2 * std::max(std::exp(h), rs);
    const int sub = std::max(1, static_cast<int>(std::ceil(stiffness / kMaxStiffness)));
    const double hs = dt / sub;
    for (int k = 0; k < sub; ++k) {
      const double k1 = rhs(h);
      const double k2 = rhs(h + 0.5 * hs * k1);
      const double k3 = rhs(h + 0.5 * hs * k2);
      const double k4 = rhs(h + hs * k3);
      h += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    next.log_r[a] = h;
  }
  return next;
}

ScalarField sr_field(const SrState& state) {
  ScalarField r = state.log_r;
  for (auto& v : r) v = std::max(std::exp(v), std::numeric_limits<double>::denorm_min());
  return r;
}

double cumulative_events(std::span<const double> series, double dt) {
  if (!(dt > 0.0)) throw Error("dt must be positive");
  for (double v : series)
    if (!(v >= 0.0)) throw Error("seismicity rate series must be non-negative");
  if (series.size() < 2) return 0.0;
  double s = 0.5 * (series.front() + series.back());
  for (std::size_t i = 1; i + 1 < series.size(); ++i) s += series[i];
  return s * dt;
}

ScalarField normalize_max(ScalarField field) {
  double hi = 0.0;
  for (double v : field) {
    if (!(v >= 0.0)) throw Error("density values must be non-negative");
    hi = std::max(hi, v);
  }
  if (!(hi > 0.0)) throw Error("density field is identically zero");
  for (auto& v : field) v /= hi;
  return field;
}

ScalarField load_density_csv(const std::filesystem::path& path, const DomainGrid& grid,
                             double fill) {
  const CsvTable table = read_csv(path);
  const auto id_col = table.column("cell_id");
  const auto val_col = table.column("value");
  ScalarField d = grid.make_field(fill);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double raw_id = table.rows[r][id_col];
    const int id = static_cast<int>(raw_id);
    if (raw_id != id) throw Error(path.string() + ": non-integer cell_id on row " + std::to_string(r + 2));
    auto a = grid.active_index(id);
    if (!a) throw Error(path.string() + ": cell_id " + std::to_string(id) + " is not an active cell");
    d[*a] = table.rows[r][val_col];
  }
  return normalize_max(std::move(d));
}

}  // namespace ressim

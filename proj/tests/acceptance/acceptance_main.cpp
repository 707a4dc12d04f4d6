// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all pass.
//
//   ressim_acceptance [--scenario-dir DIR] [--only N[,N...]]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "ressim/analysis.hpp"
#include "ressim/error.hpp"
#include "ressim/scenario.hpp"

using namespace ressim;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ------------------------------------------------------------- scenario runs

struct ScenarioRuns {
  std::filesystem::path dir;
  std::optional<RunRecord> s1, s2, s1_half;

  const RunRecord& scenario1() {
    if (!s1) s1 = run(load_scenario(dir / "scenario1.toml"), RunMode::closed_loop);
    return *s1;
  }
  const RunRecord& scenario2() {
    if (!s2) s2 = run(load_scenario(dir / "scenario2.toml"), RunMode::closed_loop);
    return *s2;
  }
  const RunRecord& scenario1_half_step() {
    if (!s1_half) {
      auto c = load_scenario(dir / "scenario1.toml");
      Overrides o;
      o.dt = c.schedule.dt / 2;
      apply_overrides(c, o);
      s1_half = run(c, RunMode::closed_loop);
    }
    return *s1_half;
  }
};

constexpr double kSteadyFrom = 20.0;

// ---------------------------------------------------------------- criteria

Outcome mass_balance(ScenarioRuns& runs) {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> res(6, 28), n_wells(1, 8), steps(3, 8);
  std::uniform_real_distribution<double> unit(0.0, 1.0), log_c(-1.0, 3.0), log_dt(-5.0, -1.0), rate(-1.0, 1.0);
  double worst = 0.0;
  int configs = 0;
  while (configs < 100) {
    const int nx = res(rng), ny = res(rng);
    const double lx = 5.0 + 30.0 * unit(rng), ly = 5.0 + 30.0 * unit(rng);
    std::vector<bool> mask(static_cast<std::size_t>(nx * ny));
    const double ax = 0.3 + 0.2 * unit(rng), ay = 0.3 + 0.2 * unit(rng);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const double x = (i + 0.5) / nx - 0.5, y = (j + 0.5) / ny - 0.5;
        mask[static_cast<std::size_t>(j * nx + i)] = configs % 4 == 0 || (x * x) / (ax * ax) + (y * y) / (ay * ay) <= 1.0;
      }
    std::optional<DomainGrid> grid;
    try {
      grid = DomainGrid::build(lx, ly, nx, ny, mask);
    } catch (const Error&) {
      continue;
    }
    const auto& g = *grid;
    WellSet wells;
    std::uniform_int_distribution<std::size_t> cell(0, g.active_count() - 1);
    const int n = n_wells(rng);
    for (int w = 0; w < n; ++w) {
      std::vector<int> support{g.cell_id_of(cell(rng))};
      if (unit(rng) < 0.5) support.push_back(g.cell_id_of(cell(rng)));
      wells.add(g, support);
    }
    DiffusionParams p;
    p.beta = std::pow(10.0, -4.0 + 2.0 * unit(rng));
    p.c_hy = g.make_field();
    for (auto& c : p.c_hy) c = std::pow(10.0, log_c(rng));
    p.theta = unit(rng) < 0.5 ? 1.0 : 0.5;
    const DiffusionSolver solver(g, p, wells);
    auto state = PressureState::zero(g);
    for (auto& u : state.u) u = rate(rng);
    const double q_scale = p.beta * g.volume();
    const int k_max = steps(rng);
    for (int k = 0; k < k_max; ++k) {
      std::vector<double> q(static_cast<std::size_t>(n));
      double total = 0.0;
      for (auto& v : q) total += (v = rate(rng) * q_scale);
      const double dt = std::pow(10.0, log_dt(rng));
      const double before = mean_over(state.u, g);
      state = solver.step(state, q, dt);
      const double res_k = std::abs(mean_over(state.u, g) - before - dt * total / q_scale) /
                           std::max(1.0, std::abs(before));
      worst = std::max(worst, res_k);
    }
    ++configs;
  }
  const auto r1 = verify_mass_balance(runs.scenario1());
  const auto r2 = verify_mass_balance(runs.scenario2());
  const bool pass = worst <= 1e-12 && r1.status == BoundStatus::pass && r2.status == BoundStatus::pass;
  return {pass, "worst relative residual " + fmt("%.2e", worst) + " over " + std::to_string(configs) +
                    " random configs; scenarios " + fmt("%.2e", r1.measured) + ", " + fmt("%.2e", r2.measured) +
                    " (tol 1e-12)"};
}

Outcome logistic_oracle(ScenarioRuns&) {
  const double gamma2 = 1.08e-2, r_star = 0.99, r0 = 2.0 * r_star, dt = 1e-3;
  const auto g = DomainGrid::build_full(2.0, 2.0, 2, 2);
  const auto params = SrParams::from_density(g.make_field(1.0), 4.7, gamma2, r_star);
  auto s = SrState::at_rate(g.make_field(r0));
  const auto zero = g.make_field();
  double worst = 0.0;
  for (int k = 1; k <= 10000; ++k) {
    s = step_sr(s, params, zero, dt);
    const double exact = oracle::logistic_rate(r_star, r0, gamma2, k * dt);
    for (double r : sr_field(s)) worst = std::max(worst, std::abs(r - exact) / exact);
  }
  return {worst < 1e-8, "max relative deviation " + fmt("%.2e", worst) + " over 10 yr at dt = 1e-3 (tol 1e-8)"};
}

struct BenchmarkResults {
  bool all_converged = true;
  double worst_t_conv = 0.0, worst_late_norm = 0.0, worst_estimate = 0.0;
};

const BenchmarkResults& benchmark() {
  static const BenchmarkResults results = [] {
    BenchmarkResults r;
    std::mt19937_64 rng(7);
    const auto gains = oracle::benchmark_gains();
    for (int trial = 0; trial < 20; ++trial) {
      const auto trace = oracle::simulate_benchmark(oracle::random_in_unit_ball(rng, 2), gains, 5e-5, 10.0);
      const auto t_conv = detect_convergence(trace.t, trace.sigma_norm, 1e-6, 0.0);
      if (!t_conv) {
        r.all_converged = false;
        continue;
      }
      r.worst_t_conv = std::max(r.worst_t_conv, *t_conv);
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t k = 0; k < trace.t.size(); ++k) {
        if (trace.t[k] < *t_conv) continue;
        r.worst_late_norm = std::max(r.worst_late_norm, trace.sigma_norm[k]);
        sum += trace.estimate_error[k];
        ++count;
      }
      r.worst_estimate = std::max(r.worst_estimate, sum / static_cast<double>(count));
    }
    return r;
  }();
  return results;
}

Outcome finite_time_convergence(ScenarioRuns&) {
  const auto& r = benchmark();
  return {r.all_converged && r.worst_late_norm < 1e-6,
          "20 initial conditions, latest T_conv " + fmt("%.3f", r.worst_t_conv) + ", max ||sigma|| after T_conv " +
              fmt("%.2e", r.worst_late_norm) + " (tol 1e-6)"};
}

Outcome perturbation_estimate(ScenarioRuns&) {
  const auto& r = benchmark();
  return {r.all_converged && r.worst_estimate < 1e-3,
          "worst time-averaged ||b nu + (I + dB)^-1 Psi2|| " + fmt("%.2e", r.worst_estimate) + " (tol 1e-3)"};
}

Outcome demand_exactness(ScenarioRuns& runs) {
  const double d1 = demand_residual(runs.scenario1()), d2 = demand_residual(runs.scenario2());
  const bool rows_ok = runs.scenario2().meta.n_r == 2;
  return {d1 <= 1e-12 && d2 <= 1e-12 && rows_ok,
          "scaled residual " + fmt("%.2e", d1) + " (scenario 1), " + fmt("%.2e", d2) + " (scenario 2, " +
              std::to_string(runs.scenario2().meta.n_r) + " rows) (tol 1e-12)"};
}

Outcome scenario_one(ScenarioRuns& runs) {
  const auto& rec = runs.scenario1();
  const auto s = summarize(rec, kSteadyFrom);
  const double p_err = *std::max_element(s.pressure_rel_error.begin(), s.pressure_rel_error.end());
  double sr_dev = 0.0;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    if (rec.t[k] < kSteadyFrom) continue;
    sr_dev = std::max(sr_dev, std::abs(rec.y_r[k][0] - rec.meta.r_star) / rec.meta.r_star);
  }
  const double excess = s.events_controlled / s.events_background - 1.0;
  const bool pass = p_err < 0.01 && sr_dev < 0.05 && excess < 0.15 && rec.meta.n == 29 && rec.meta.m_u == 5 &&
                    rec.meta.m_r == 1;
  return {pass, "steady pressure error " + fmt("%.2e", p_err) + " of swing (tol 1e-2), SR deviation " +
                    fmt("%.2e", sr_dev) + " (tol 5e-2), events " + fmt("%.2f", s.events_controlled) + " vs " +
                    fmt("%.2f", s.events_background) + " background (+" + fmt("%.1f", 100 * excess) +
                    "%, tol 15%)"};
}

Outcome scenario_two(ScenarioRuns& runs) {
  const auto& rec = runs.scenario2();
  double worst = 0.0;
  for (std::size_t k = 0; k < rec.size(); ++k)
    worst = std::max(worst, std::abs(rec.cumulative_events[k] - rec.meta.r_star * rec.t[k]));
  const double d = demand_residual(rec);
  return {worst < 1.0 && d <= 1e-12 && rec.meta.n_r == 2,
          "max |events - R* t| " + fmt("%.3f", worst) + " (tol 1 event), final " +
              fmt("%.2f", rec.cumulative_events.back()) + " vs " + fmt("%.2f", rec.meta.r_star * rec.t.back()) +
              ", demand residual " + fmt("%.2e", d)};
}

Outcome eiss(ScenarioRuns& runs) {
  bool pass = true;
  std::ostringstream detail;
  for (const auto* rec : {&runs.scenario1(), &runs.scenario2()}) {
    for (const auto& r : verify_eiss(*rec)) {
      pass &= r.status == BoundStatus::pass;
      detail << rec->meta.scenario << " " << r.quantity << " " << fmt("%.2e", r.measured) << " <= "
             << fmt("%.2e", r.bound) << "; ";
    }
  }
  auto text = detail.str();
  if (text.size() >= 2) text.resize(text.size() - 2);
  return {pass, text};
}

Outcome invariants(ScenarioRuns& runs) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::string> failed;

  // Positivity under random forcing and in both scenario records.
  {
    const auto g = DomainGrid::build_full(4.0, 4.0, 4, 4);
    auto density = g.make_field();
    for (auto& d : density) d = 0.05 + unit(rng);
    const auto params = SrParams::from_density(normalize_max(density), 4.7, 1.08e-2, 0.99);
    auto s = SrState::at_rate(params.r_star);
    bool ok = true;
    for (int k = 0; k < 2000 && ok; ++k) {
      auto u_t = g.make_field();
      for (auto& v : u_t) v = 200.0 * normal(rng);
      s = step_sr(s, params, u_t, std::pow(10.0, -4.0 * unit(rng)));
      for (double r : sr_field(s)) ok &= std::isfinite(r) && r > 0.0;
    }
    for (const auto* rec : {&runs.scenario1(), &runs.scenario2()})
      for (double h : rec->min_log_r) ok &= std::isfinite(h);
    if (!ok) failed.push_back("positivity");
  }
  // Square-root branch homogeneity.
  {
    bool ok = true;
    for (int k = 0; k < 1000; ++k) {
      Vector sigma(1 + k % 6);
      for (auto& v : sigma) v = normal(rng);
      sigma *= std::pow(10.0, -8.0 + 10.0 * unit(rng)) / sigma.norm();
      const double c = std::pow(10.0, -3.0 + 6.0 * unit(rng));
      ok &= phi1(c * sigma, 0.3, 0.0).isApprox(std::sqrt(c) * phi1(sigma, 0.3, 0.0), 1e-12);
    }
    if (!ok) failed.push_back("phi homogeneity");
  }
  // Allocation identities on random matrices and on the scenario control matrices.
  {
    bool ok = true;
    for (int k = 0; k < 300; ++k) {
      const Eigen::Index m = 1 + k % 6, n_r = 1 + k % 3, n = m + n_r + k % 5;
      const Matrix b0 = Matrix::NullaryExpr(m, n, [&] { return normal(rng); });
      const Matrix w = Matrix::NullaryExpr(n_r, n, [&] { return 0.8 + 0.4 * unit(rng); });
      ok &= (b0 * InputAllocator(b0).b0_pinv()).isApprox(Matrix::Identity(m, m), 1e-10);
      const InputAllocator alloc(b0, w);
      ok &= (w * alloc.w_bar()).cwiseAbs().maxCoeff() <= 1e-12;
      const Vector v = Vector::NullaryExpr(m, [&] { return normal(rng); });
      const Vector d = Vector::NullaryExpr(n_r, [&] { return 10.0 * normal(rng); });
      ok &= (w * alloc.allocate(v, d) - d).norm() <= 1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff());
    }
    for (const char* name : {"scenario1.toml", "scenario2.toml"}) {
      const auto model = build_model(load_scenario(runs.dir / name));
      const InputAllocator alloc(model->b0, model->w);
      const auto m = model->b0.rows();
      ok &= (model->b0 * alloc.b0_pinv()).isApprox(Matrix::Identity(m, m), 1e-10);
      ok &= (model->w * alloc.w_bar()).cwiseAbs().maxCoeff() <= 1e-12;
    }
    if (!ok) failed.push_back("allocation identities");
  }
  // Determinism under a fixed seed on a shortened scenario, plus seed sensitivity of W.
  {
    auto c = load_scenario(runs.dir / "scenario2.toml");
    c.schedule.t_end = 0.5;
    const auto a = run(c, RunMode::closed_loop);
    const auto b = run(c, RunMode::closed_loop);
    bool ok = a.t == b.t && a.mean_u == b.mean_u && a.mean_r == b.mean_r;
    for (std::size_t k = 0; ok && k < a.size(); ++k) ok = a.q[k] == b.q[k] && a.nu[k] == b.nu[k];
    auto other = c;
    other.schedule.seed += 1;
    ok &= build_model(c)->w != build_model(other)->w;
    if (!ok) failed.push_back("determinism");
  }
  std::string detail = "R > 0, phi homogeneity, B0 B0^+ = I, W Wbar = 0, W Q = D, fixed-seed determinism";
  if (!failed.empty()) {
    detail = "failed:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

Outcome convergence(ScenarioRuns& runs) {
  const double e16 = oracle::manufactured_l2_error(16), e32 = oracle::manufactured_l2_error(32),
               e64 = oracle::manufactured_l2_error(64);
  const double r1 = e16 / e32, r2 = e32 / e64;
  const Vector a = runs.scenario1().y_u.back(), b = runs.scenario1_half_step().y_u.back();
  double change = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) change = std::max(change, std::abs(a[i] - b[i]) / std::abs(a[i]));
  const bool pass = std::abs(r1 - 4.0) < 0.4 && std::abs(r2 - 4.0) < 0.4 && change < 0.01;
  return {pass, "L2 error ratios " + fmt("%.2f", r1) + ", " + fmt("%.2f", r2) + " (expect 4 +- 0.4); step halving " +
                    "changes final y_u by " + fmt("%.2e", change) + " (tol 1e-2)"};
}

}  // namespace

int main(int argc, char** argv) {
  ScenarioRuns runs{RESSIM_SCENARIO_DIR, {}, {}, {}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--scenario-dir" && i + 1 < argc) {
      runs.dir = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: %s [--scenario-dir DIR] [--only N[,N...]]\n", argv[0]);
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome(ScenarioRuns&)>>> criteria = {
      {"mass balance", mass_balance},
      {"SR logistic oracle", logistic_oracle},
      {"GSTA finite-time convergence", finite_time_convergence},
      {"perturbation reconstruction", perturbation_estimate},
      {"demand exactness", demand_exactness},
      {"desk-scale scenario 1", scenario_one},
      {"desk-scale scenario 2", scenario_two},
      {"eISS consistency", eiss},
      {"positivity and invariants", invariants},
      {"temporal and spatial convergence", convergence},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second(runs);
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += out.pass ? 0 : 1;
    std::printf("[%s] %2d %-34s %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

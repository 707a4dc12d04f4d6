// ressim: command-line front end for scenario runs, validation and gain design.
//
// Exit codes:
//   0  success
//   1  validation failed (validate, mass-balance-check)
//   2  configuration or usage error
//   3  runtime abort during a simulation

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "ressim/analysis.hpp"
#include "ressim/error.hpp"
#include "ressim/gsta.hpp"
#include "ressim/scenario.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailed = 1;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct OverrideFlags {
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<std::string> grid;
  std::optional<int> threads;
  std::optional<std::string> bc;

  void attach(CLI::App* app) {
    app->add_option("--seed", seed, "RNG seed for generated demand weights");
    app->add_option("--dt", dt, "Simulation step [yr]");
    app->add_option("--grid", grid, "Grid resolution NXxNY, e.g. 40x40");
    app->add_option("--threads", threads, "Solver threads");
    app->add_option("--bc", bc, "Boundary condition")->check(CLI::IsMember({"neumann", "dirichlet"}));
  }

  ressim::Overrides resolve() const {
    ressim::Overrides o;
    o.seed = seed;
    o.dt = dt;
    o.threads = threads;
    if (grid) {
      const auto x = grid->find_first_of("xX");
      try {
        if (x == std::string::npos) throw std::invalid_argument("no separator");
        std::size_t used_a = 0, used_b = 0;
        const std::string a = grid->substr(0, x), b = grid->substr(x + 1);
        const int nx = std::stoi(a, &used_a), ny = std::stoi(b, &used_b);
        if (used_a != a.size() || used_b != b.size()) throw std::invalid_argument("trailing text");
        o.grid = std::make_pair(nx, ny);
      } catch (const std::exception&) {
        throw ressim::ConfigError("--grid expects NXxNY, got '" + *grid + "'");
      }
    }
    if (bc) o.bc = *bc == "dirichlet" ? ressim::BoundaryKind::dirichlet : ressim::BoundaryKind::neumann;
    return o;
  }
};

void configure_logging() {
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("RES_SIM_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off")
      spdlog::warn("unknown RES_SIM_LOG level '{}', keeping info", env);
    else
      spdlog::set_level(level);
  }
}

ressim::ScenarioConfig load(const std::string& path, const OverrideFlags& flags) {
  auto config = ressim::parse_scenario(path);
  ressim::apply_overrides(config, flags.resolve());
  const auto report = ressim::validate(config);
  if (const auto* f = report.first_failure()) {
    std::string msg = f->name + " check failed";
    if (!f->messages.empty()) msg += ": " + f->messages.front();
    throw ressim::ConfigError(msg, f->name);
  }
  return config;
}

void print_summary(const ressim::TrackingSummary& s) {
  for (std::size_t i = 0; i < s.pressure_rel_error.size(); ++i)
    spdlog::info("pressure output {}: max relative error {:.3e} for t >= {}", i, s.pressure_rel_error[i],
                 s.window_start);
  for (std::size_t i = 0; i < s.sr_rel_error.size(); ++i)
    spdlog::info("SR output {}: max relative error {:.3e} for t >= {}", i, s.sr_rel_error[i], s.window_start);
  spdlog::info("cumulative events: controlled {:.3f}, background {:.3f}", s.events_controlled,
               s.events_background);
  spdlog::info("demand residual {:.3e}", s.demand_residual);
}

int execute_run(const ressim::ScenarioConfig& config, const std::string& out_dir, bool baseline_run,
                double window_start) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const auto model = ressim::build_model(config);
  spdlog::info("running '{}': {} active cells, {} wells, {} outputs, t_end {} yr, dt {} yr",
               config.name, model->grid.active_count(), model->wells.size(), model->regions.m(),
               config.schedule.t_end, config.schedule.dt);
  const auto record = ressim::run(config, *model, ressim::RunMode::closed_loop);
  std::optional<ressim::RunRecord> baseline;
  if (baseline_run) {
    spdlog::debug("running uncontrolled baseline");
    baseline = ressim::run(config, *model, ressim::RunMode::demand_only);
  }
  const auto files = ressim::emit_csv(record, out_dir, baseline ? &*baseline : nullptr);
  std::vector<ressim::BoundReport> reports{ressim::verify_mass_balance(record)};
  for (auto& r : ressim::verify_eiss(record, {config.diffusion.saturation, std::nullopt})) reports.push_back(r);
  reports.push_back(ressim::log_r_bound_report(record));
  if (window_start > config.schedule.t_end)
    spdlog::warn("steady window starts at {} yr, after t_end = {} yr; tracking errors cover no samples",
                 window_start, config.schedule.t_end);
  const auto summary = ressim::summarize(record, window_start);
  ressim::write_report_json(std::filesystem::path(out_dir) / "report.json", record, reports, summary);
  for (const auto& f : files) spdlog::debug("wrote {}", f.string());
  for (const auto& r : reports)
    spdlog::info("{}: {} (measured {:.3e}, bound {:.3e})", r.quantity, ressim::to_string(r.status),
                 r.measured, r.bound);
  print_summary(summary);
  if (baseline)
    spdlog::info("uncontrolled baseline events {:.3f}", baseline->cumulative_events.back());
  const double secs = std::chrono::duration<double>(clock::now() - start).count();
  spdlog::info("done in {:.1f} s, outputs in {}", secs, out_dir);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Reservoir pressure and seismicity-rate control toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "results";
  OverrideFlags flags;
  bool no_baseline = false;
  double window_start = 20.0;

  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write CSVs plus report.json");
  run_cmd->add_option("--config", config_path, "Scenario TOML")->required();
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_flag("--no-baseline", no_baseline, "Skip the uncontrolled baseline run");
  run_cmd->add_option("--steady-from", window_start, "Start of the steady tracking window [yr]");
  flags.attach(run_cmd);

  auto* validate_cmd = app.add_subcommand("validate", "Check assumptions A1-A4 for a scenario");
  validate_cmd->add_option("--config", config_path, "Scenario TOML")->required();
  flags.attach(validate_cmd);

  double k_bar2 = 0, l = 0, b = 1, delta_b = 0, margin = 2.22;
  auto* gains_cmd = app.add_subcommand("gains", "Design GSTA gains");
  gains_cmd->add_option("--k-bar2", k_bar2, "Normalized integral gain")->required();
  gains_cmd->add_option("--l", l, "Gain scaling")->required();
  gains_cmd->add_option("--b", b, "Integral-state weight");
  gains_cmd->add_option("--delta-b", delta_b, "Control-matrix uncertainty bound in [0, 1)");
  gains_cmd->add_option("--margin", margin, "Factor over the minimum k_bar1");

  auto* mass_cmd = app.add_subcommand("mass-balance-check", "Run a scenario and verify the mean balance");
  mass_cmd->add_option("--config", config_path, "Scenario TOML")->required();
  flags.attach(mass_cmd);

  auto* demo_cmd = app.add_subcommand("demo", "Reduced extraction scenario for smoke testing");
  demo_cmd->add_option("--config", config_path, "Scenario TOML")->default_val(RESSIM_SCENARIO_DIR "/scenario1.toml");
  demo_cmd->add_option("--out", out_dir, "Output directory")->default_val("demo_results");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*gains_cmd) {
      ressim::GstaGains g;
      try {
        g = ressim::design_gains(k_bar2, l, b, delta_b, margin);
      } catch (const ressim::Error& e) {
        spdlog::error("{}", e.what());
        return kConfigError;
      }
      const double k_bar1_min = std::sqrt(b * k_bar2 / (1.0 - delta_b));
      std::cout << "k1      = " << g.k1 << "\n"
                << "k2      = " << g.k2 << "\n"
                << "k_bar1  = " << g.k_bar1 << "\n"
                << "k_bar2  = " << g.k_bar2 << "\n"
                << "check   : k_bar1 = " << g.k_bar1 << " > sqrt(b k_bar2 / (1 - delta_b)) = " << k_bar1_min
                << "\n";
      if (delta_b > 0.99) spdlog::warn("delta_b = {} is close to 1; k_bar1 grows without bound", delta_b);
      return kOk;
    }
    if (*validate_cmd) {
      auto config = ressim::parse_scenario(config_path);
      ressim::apply_overrides(config, flags.resolve());
      const auto report = ressim::validate(config);
      for (const auto& c : report.checks) {
        std::cout << c.name << ": " << (c.pass ? "pass" : "FAIL") << "\n";
        for (const auto& m : c.messages) std::cout << "  " << m << "\n";
      }
      return report.pass() ? kOk : kValidationFailed;
    }
    if (*mass_cmd) {
      const auto config = load(config_path, flags);
      const auto record = ressim::run(config, ressim::RunMode::closed_loop);
      const auto r = ressim::verify_mass_balance(record);
      std::cout << "mass balance: " << ressim::to_string(r.status) << " (max relative residual " << r.measured
                << ", tolerance " << r.bound << ")\n";
      if (!r.note.empty()) std::cout << "  " << r.note << "\n";
      return r.status == ressim::BoundStatus::fail ? kValidationFailed : kOk;
    }
    if (*demo_cmd) {
      OverrideFlags demo;
      demo.grid = "20x20";
      demo.dt = 4e-3;
      const auto config = load(config_path, demo);
      return execute_run(config, out_dir, false, window_start);
    }
    const auto config = load(config_path, flags);
    return execute_run(config, out_dir, !no_baseline, window_start);
  } catch (const ressim::ConfigError& e) {
    spdlog::error("configuration error{}: {}", e.assumption().empty() ? "" : " (" + e.assumption() + ")",
                  e.what());
    return kConfigError;
  } catch (const ressim::SimulationError& e) {
    spdlog::error("simulation aborted at step {}: {}", e.step(), e.what());
    return kRuntimeError;
  } catch (const ressim::Error& e) {
    spdlog::error("{}", e.what());
    return kRuntimeError;
  } catch (const std::exception& e) {
    spdlog::error("unexpected error: {}", e.what());
    return kRuntimeError;
  }
}

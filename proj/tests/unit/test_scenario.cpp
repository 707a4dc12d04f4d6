#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "ressim/analysis.hpp"
#include "ressim/error.hpp"
#include "ressim/scenario.hpp"

using namespace ressim;

namespace {

const std::filesystem::path kFixtures = RESSIM_FIXTURE_DIR;
const std::filesystem::path kScenarios = RESSIM_SCENARIO_DIR;

ScenarioConfig small_config() { return parse_scenario(kFixtures / "small.toml"); }

bool mentions(const ValidationReport& report, const std::string& check, const std::string& text) {
  for (const auto& c : report.checks)
    if (c.name == check && !c.pass)
      for (const auto& m : c.messages)
        if (m.find(text) != std::string::npos) return true;
  return false;
}

void expect_same(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) ASSERT_EQ(a[k], b[k]) << "sample " << k;
}

}  // namespace

TEST(ScenarioConfig, ShippedScenarioOne) {
  const auto c = parse_scenario(kScenarios / "scenario1.toml");
  EXPECT_EQ(c.wells.size(), 29u);
  std::size_t n_p = 0, n_r = 0;
  for (const auto& r : c.regions) (r.kind == RegionKind::pressure_output ? n_p : n_r)++;
  EXPECT_EQ(n_p, 5u);
  EXPECT_EQ(n_r, 1u);
  EXPECT_NEAR(c.diffusion.c_hy, 4.4e-2 * 8760.0, 1e-12);
  const auto report = validate(c);
  for (const auto& ch : report.checks) EXPECT_TRUE(ch.pass) << ch.name << ": " << (ch.messages.empty() ? "" : ch.messages[0]);
  const auto model = build_model(c);
  EXPECT_EQ(model->regions.m(), 6u);
  EXPECT_EQ(model->wells.size(), 29u);
  EXPECT_EQ(model->w.rows(), 1);
  EXPECT_EQ(model->demand_scales, std::vector<double>{-1.0});
  EXPECT_NEAR(model->nominals.beta0, 0.8 * 5.7e-4, 1e-18);
}

TEST(ScenarioConfig, ShippedScenarioTwoDemandRows) {
  const auto c = load_scenario(kScenarios / "scenario2.toml");
  const auto model = build_model(c);
  ASSERT_EQ(model->w.rows(), 2);
  EXPECT_EQ(model->demand_scales, (std::vector<double>{-1.0, 1.36}));
  for (Eigen::Index j = 0; j < model->w.cols(); ++j)
    EXPECT_TRUE((model->w(0, j) == 0.0) != (model->w(1, j) == 0.0)) << "well " << j;
}

TEST(ScenarioConfig, OverlappingRegionsCiteA4) {
  const auto c = parse_scenario(kFixtures / "overlapping_regions.toml");
  const auto report = validate(c);
  EXPECT_FALSE(report.pass());
  EXPECT_TRUE(mentions(report, "A4", "disjoint"));
  try {
    load_scenario(kFixtures / "overlapping_regions.toml");
    FAIL() << "expected a configuration error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.assumption(), "A4");
  }
}

TEST(ScenarioConfig, TooManyConstraints) {
  const auto report = validate(parse_scenario(kFixtures / "too_many_constraints.toml"));
  EXPECT_FALSE(report.pass());
  EXPECT_TRUE(mentions(report, "A4", "too many constraints"));
}

TEST(ScenarioConfig, SyntaxErrorCarriesLocation) {
  try {
    parse_scenario(kFixtures / "syntax_error.toml");
    FAIL() << "expected a parse error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("syntax_error.toml:3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_scenario(kFixtures / "missing.toml"), ConfigError);
}

TEST(ScenarioConfig, MissingAndMistypedKeys) {
  const std::string base = R"(
[grid]
lx_km = 4.0
ly_km = 4.0
nx = 4
ny = 4
[wells]
positions_km = [[0.5, 0.5]]
[[regions]]
kind = "pressure"
rect_km = [0.0, 0.0, 1.0, 1.0]
[diffusion]
beta = 1.0
c_hy_km2_per_yr = 1.0
[sr]
gamma1_max = 1.0
gamma2 = 1.0
r_star = 1.0
[controller]
l = 1.0
k_bar2 = 1.0
gamma_r = 1.0
[references]
pressure = [{ kind = "constant", target = 0.0 }]
sr = []
[schedule]
t_end = 0.1
dt = 0.01
)";
  EXPECT_TRUE(validate(parse_scenario_string(base, ".")).pass());
  auto no_beta = base;
  no_beta.replace(no_beta.find("beta = 1.0"), 10, "");
  EXPECT_THROW(parse_scenario_string(no_beta, "."), ConfigError);
  auto text_nx = base;
  text_nx.replace(text_nx.find("nx = 4"), 6, "nx = \"four\"");
  EXPECT_THROW(parse_scenario_string(text_nx, "."), ConfigError);
  auto bad_kind = base;
  bad_kind.replace(bad_kind.find("kind = \"pressure\""), 17, "kind = \"volume\"");
  EXPECT_THROW(parse_scenario_string(bad_kind, "."), ConfigError);
}

TEST(ScenarioConfig, ReferenceCountMismatchFailsA2) {
  auto c = small_config();
  c.pressure_refs.pop_back();
  EXPECT_TRUE(mentions(validate(c), "A2", "pressure references"));
}

TEST(ScenarioConfig, Overrides) {
  auto c = small_config();
  Overrides o;
  o.dt = 5e-4;
  o.grid = std::make_pair(24, 24);
  o.seed = 99;
  o.bc = BoundaryKind::dirichlet;
  apply_overrides(c, o);
  EXPECT_DOUBLE_EQ(c.schedule.dt, 5e-4);
  EXPECT_DOUBLE_EQ(c.schedule.dt_c, 5e-4);
  EXPECT_EQ(c.grid.nx, 24);
  EXPECT_EQ(c.schedule.seed, 99u);
  EXPECT_EQ(c.diffusion.bc, BoundaryKind::dirichlet);
  Overrides zero;
  zero.dt = 0.0;
  try {
    apply_overrides(c, zero);
    FAIL() << "expected an error";
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "dt must be positive");
  }
}

TEST(References, Constant) {
  ReferenceSpec spec;
  spec.target = 0.99;
  for (double t : {0.0, 1.0, 31.0}) EXPECT_DOUBLE_EQ(reference_at(spec, -3.0, t), 0.99);
}

TEST(References, SigmoidPinnedAndAsymptotic) {
  const ReferenceSpec spec{ReferenceSpec::Kind::sigmoid, -2.0, 7.5, 1.25};
  EXPECT_DOUBLE_EQ(reference_at(spec, 0.3, 0.0), 0.3);
  EXPECT_NEAR(reference_at(spec, 0.3, 200.0), -2.0, 1e-12);
  double prev = reference_at(spec, 0.3, 0.0);
  for (int k = 1; k <= 310; ++k) {
    const double r = reference_at(spec, 0.3, 0.1 * k);
    EXPECT_LE(r, prev);
    prev = r;
  }
  EXPECT_THROW(reference_at(spec, 0.0, -1.0), Error);
  EXPECT_THROW(reference_at({ReferenceSpec::Kind::sigmoid, 1.0, 1.0, 0.0}, 0.0, 1.0), Error);
}

TEST(Demand, PiecewiseConstantSeries) {
  const DemandSeries s({0.0, 1.0, 2.0}, {1.0, 3.0, 5.0});
  EXPECT_DOUBLE_EQ(s.at(-1.0), 1.0);
  EXPECT_DOUBLE_EQ(s.at(0.0), 1.0);
  EXPECT_DOUBLE_EQ(s.at(0.999), 1.0);
  EXPECT_DOUBLE_EQ(s.at(1.0), 3.0);
  EXPECT_DOUBLE_EQ(s.at(10.0), 5.0);
  EXPECT_THROW(DemandSeries({}, {}), Error);
  EXPECT_THROW(DemandSeries({0.0, 0.0}, {1.0, 2.0}), Error);
  EXPECT_THROW(DemandSeries({0.0}, {1.0, 2.0}), Error);
  EXPECT_THROW(DemandSeries({0.0}, {std::nan("")}), Error);
}

TEST(Demand, ScaledRows) {
  const auto f = DemandSeries::from_csv(kScenarios / "data" / "extraction_monthly.csv");
  for (double t : {0.0, 5.3, 12.0, 30.9}) {
    const auto d1 = demand_at(f, {-1.0}, t);
    EXPECT_DOUBLE_EQ(d1[0], -f.at(t));
    const auto d2 = demand_at(f, {-1.0, 1.36}, t);
    EXPECT_DOUBLE_EQ(d2[1], 1.36 * f.at(t));
  }
  const DemandSeries zero({0.0, 1.0}, {0.0, 0.0});
  EXPECT_EQ(demand_at(zero, {-1.0, 1.36}, 0.5), Vector::Zero(2));
  EXPECT_THROW(demand_at(DemandSeries{}, {1.0}, 0.0), Error);
}

TEST(Demand, SeededWeights) {
  DemandSpec spec;
  spec.rows = {{{0, 1, 2}, -1.0, {}}, {{3, 4}, 1.36, {}}};
  const auto a = build_demand_weights(spec, 6, 7);
  const auto b = build_demand_weights(spec, 6, 7);
  const auto c = build_demand_weights(spec, 6, 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  ASSERT_EQ(a.rows(), 2);
  ASSERT_EQ(a.cols(), 6);
  for (int j = 0; j < 3; ++j) {
    EXPECT_GE(a(0, j), 0.8);
    EXPECT_LT(a(0, j), 1.2);
    EXPECT_EQ(a(1, j), 0.0);
  }
  EXPECT_EQ(a(0, 5), 0.0);
  EXPECT_EQ(a(1, 5), 0.0);
  spec.rows = {{{1, 2}, 1.0, {0.5, 2.0}}};
  const auto explicit_w = build_demand_weights(spec, 3, 1);
  EXPECT_EQ(explicit_w(0, 0), 0.0);
  EXPECT_EQ(explicit_w(0, 1), 0.5);
  EXPECT_EQ(explicit_w(0, 2), 2.0);
}

TEST(Run, ZeroInputEquilibrium) {
  const auto c = small_config();
  const auto rec = run(c, RunMode::zero_input);
  ASSERT_GT(rec.size(), 2u);
  for (std::size_t k = 0; k < rec.size(); ++k) {
    EXPECT_NEAR(rec.mean_u[k], 0.0, 1e-14);
    EXPECT_NEAR(rec.mean_r[k], 0.99, 1e-12);
    EXPECT_NEAR(rec.sigma[k][2], 0.0, 1e-12);
    EXPECT_EQ(rec.q[k], Vector::Zero(8));
  }
}

TEST(Run, ZeroInputRelaxesToBackground) {
  auto c = small_config();
  c.sr.r0_factor = 1.5;
  c.schedule.t_end = 400.0;
  c.schedule.dt = 0.5;
  c.schedule.dt_c = 0.5;
  const auto rec = run(c, RunMode::zero_input);
  EXPECT_NEAR(rec.mean_u.back(), rec.mean_u.front(), 1e-14);
  EXPECT_LT(std::abs(rec.mean_r.back() - 0.99), 0.1 * std::abs(rec.mean_r.front() - 0.99));
  for (std::size_t k = 1; k < rec.size(); ++k) EXPECT_LE(rec.mean_r[k], rec.mean_r[k - 1] + 1e-15);
}

TEST(Run, InitialErrorIsZero) {
  const auto rec = run(small_config(), RunMode::closed_loop);
  EXPECT_LT(rec.sigma.front().norm(), 1e-15);
  EXPECT_EQ(rec.t.front(), 0.0);
  EXPECT_NEAR(rec.t.back(), 3.0, 1e-12);
}

TEST(Run, DeterministicUnderFixedSeed) {
  const auto c = small_config();
  const auto a = run(c, RunMode::closed_loop);
  const auto b = run(c, RunMode::closed_loop);
  EXPECT_EQ(a.t, b.t);
  expect_same(a.y_u, b.y_u);
  expect_same(a.y_r, b.y_r);
  expect_same(a.q, b.q);
  expect_same(a.nu, b.nu);
  EXPECT_EQ(a.mean_u, b.mean_u);
  EXPECT_EQ(a.cumulative_events, b.cumulative_events);
  auto other = c;
  other.schedule.seed = c.schedule.seed + 1;
  const auto d = run(other, RunMode::closed_loop);
  EXPECT_NE(a.q.back(), d.q.back());
}

TEST(Run, DemandSatisfiedEveryStep) {
  const auto rec = run(small_config(), RunMode::closed_loop);
  EXPECT_LE(demand_residual(rec), 1e-12);
  const auto base = run(small_config(), RunMode::demand_only);
  EXPECT_LE(demand_residual(base), 1e-12);
}

TEST(Run, PositiveRateEverywhere) {
  const auto rec = run(small_config(), RunMode::closed_loop);
  for (double h : rec.min_log_r) ASSERT_TRUE(std::isfinite(h));
}

TEST(Run, StepHalvingChangesFinalOutputsLittle) {
  const auto c = small_config();
  auto fine = c;
  Overrides o;
  o.dt = c.schedule.dt / 2;
  apply_overrides(fine, o);
  const auto a = run(c, RunMode::closed_loop);
  const auto b = run(fine, RunMode::closed_loop);
  const Vector ya = a.y_u.back(), yb = b.y_u.back();
  for (Eigen::Index i = 0; i < ya.size(); ++i) EXPECT_LT(std::abs(ya[i] - yb[i]) / std::abs(ya[i]), 0.01) << i;
}

TEST(Run, InvalidConfigRejected) {
  auto c = small_config();
  c.schedule.dt_c = c.schedule.dt * 1.5;
  EXPECT_THROW(run(c), ConfigError);
}

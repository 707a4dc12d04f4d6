#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "ressim/error.hpp"
#include "ressim/seismicity.hpp"

using namespace ressim;

namespace {

constexpr double kGamma1Max = 4.7;
constexpr double kGamma2 = 1.08e-2;
constexpr double kRStar = 0.99;

struct Fixture {
  DomainGrid grid = DomainGrid::build_full(3.0, 3.0, 3, 3);
  SrParams params = SrParams::from_density(grid.make_field(1.0), kGamma1Max, kGamma2, kRStar);
};

}  // namespace

TEST(Seismicity, EquilibriumAtBackground) {
  Fixture f;
  auto s = SrState::at_rate(f.grid.make_field(kRStar));
  const auto zero = f.grid.make_field();
  for (int k = 0; k < 100; ++k) s = step_sr(s, f.params, zero, 0.01);
  for (double r : sr_field(s)) EXPECT_NEAR(r, kRStar, 1e-14);
  EXPECT_NEAR(s.t, 1.0, 1e-12);
}

TEST(Seismicity, LogisticOracle) {
  Fixture f;
  const double r0 = 2.0 * kRStar;
  auto s = SrState::at_rate(f.grid.make_field(r0));
  const auto zero = f.grid.make_field();
  const double dt = 1e-3;
  double worst = 0.0;
  for (int k = 1; k <= 10000; ++k) {
    s = step_sr(s, f.params, zero, dt);
    const double exact = oracle::logistic_rate(kRStar, r0, kGamma2, k * dt);
    worst = std::max(worst, std::abs(sr_field(s)[0] - exact) / exact);
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Seismicity, RelaxationIsMonotone) {
  Fixture f;
  const double dt = 1.0;
  for (double factor : {0.05, 0.5, 3.0, 40.0}) {
    auto s = SrState::at_rate(f.grid.make_field(factor * kRStar));
    const auto zero = f.grid.make_field();
    double prev = std::abs(sr_field(s)[0] - kRStar);
    for (int k = 0; k < 4000 && prev >= 1e-6 * kRStar; ++k) {
      s = step_sr(s, f.params, zero, dt);
      const double now = std::abs(sr_field(s)[0] - kRStar);
      ASSERT_LE(now, prev) << "factor " << factor << " step " << k;
      prev = now;
    }
    EXPECT_LT(prev, 1e-6 * kRStar) << "factor " << factor;
  }
}

TEST(Seismicity, ResponseSignOpposesPressureRate) {
  Fixture f;
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> rate(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    auto u_t = f.grid.make_field();
    for (auto& v : u_t) v = rate(rng);
    const auto s = step_sr(SrState::at_rate(f.params.r_star), f.params, u_t, 1e-4);
    const auto r = sr_field(s);
    for (std::size_t i = 0; i < u_t.size(); ++i) {
      if (u_t[i] < 0) {
        EXPECT_GT(r[i], kRStar);
      } else if (u_t[i] > 0) {
        EXPECT_LT(r[i], kRStar);
      }
    }
  }
}

TEST(Seismicity, PositivityUnderExtremeForcing) {
  Fixture f;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> rate(-1e3, 1e3), log_dt(-4.0, 0.0);
  auto s = SrState::at_rate(f.params.r_star);
  for (int k = 0; k < 500; ++k) {
    auto u_t = f.grid.make_field();
    for (auto& v : u_t) v = rate(rng);
    s = step_sr(s, f.params, u_t, std::pow(10.0, log_dt(rng)));
    for (double r : sr_field(s)) {
      ASSERT_TRUE(std::isfinite(r));
      ASSERT_GT(r, 0.0);
    }
  }
}

TEST(Seismicity, SrFieldIdentities) {
  const auto g = DomainGrid::build_full(2.0, 2.0, 2, 2);
  SrState s{g.make_field(0.0), 0.0};
  for (double r : sr_field(s)) EXPECT_DOUBLE_EQ(r, 1.0);
  s.log_r = g.make_field(std::log(kRStar));
  for (double r : sr_field(s)) EXPECT_NEAR(r, kRStar, 1e-15);
}

TEST(Seismicity, CumulativeEvents) {
  const std::vector<double> background(312, 0.99);  // 31.1 yr at dt = 0.1
  EXPECT_NEAR(cumulative_events(background, 0.1), 0.99 * 31.1, 1e-12);
  EXPECT_NEAR(cumulative_events(background, 0.1), 30.8, 0.05);
  EXPECT_DOUBLE_EQ(cumulative_events(std::vector<double>(10, 0.0), 0.5), 0.0);
  EXPECT_DOUBLE_EQ(cumulative_events(std::vector<double>(5, 1.0), 0.5), 2.0);
  EXPECT_THROW(cumulative_events(std::vector<double>{1.0, -0.1}, 0.5), Error);
}

TEST(Seismicity, ParameterChecks) {
  Fixture f;
  EXPECT_TRUE(check_sr_params(f.params).empty());
  auto bad = f.params;
  bad.gamma2 = 0.0;
  EXPECT_FALSE(check_sr_params(bad).empty());
  bad = f.params;
  bad.r_star[2] = -1.0;
  EXPECT_FALSE(check_sr_params(bad).empty());
  bad = f.params;
  bad.gamma1[0] = 10.0;
  EXPECT_FALSE(check_sr_params(bad).empty());
}

TEST(Seismicity, InvalidStepInputs) {
  Fixture f;
  const auto s = SrState::at_rate(f.params.r_star);
  EXPECT_THROW(step_sr(s, f.params, f.grid.make_field(), 0.0), Error);
  auto nan = f.grid.make_field();
  nan[1] = std::nan("");
  EXPECT_THROW(step_sr(s, f.params, nan, 0.1), Error);
  EXPECT_THROW(SrState::at_rate(f.grid.make_field(0.0)), Error);
}

TEST(Seismicity, DensityNormalization) {
  auto d = normalize_max(ScalarField(std::vector<double>{0.5, 2.0, 1.0}));
  EXPECT_DOUBLE_EQ(d[0], 0.25);
  EXPECT_DOUBLE_EQ(d[1], 1.0);
  EXPECT_THROW(normalize_max(ScalarField(3, 0.0)), Error);

  const auto g = DomainGrid::build_full(2.0, 2.0, 2, 2);
  const auto path = std::filesystem::temp_directory_path() / "ressim_density_test.csv";
  {
    std::ofstream out(path);
    out << "cell_id,value\n0,2\n3,4\n";
  }
  const auto field = load_density_csv(path, g, 1.0);
  EXPECT_DOUBLE_EQ(field[0], 0.5);
  EXPECT_DOUBLE_EQ(field[1], 0.25);
  EXPECT_DOUBLE_EQ(field[3], 1.0);
  {
    std::ofstream out(path);
    out << "cell_id,value\n9,2\n";
  }
  EXPECT_THROW(load_density_csv(path, g), Error);
  std::filesystem::remove(path);
}

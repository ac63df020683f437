#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <vector>

#include "kramers/ergodic.hpp"
#include "kramers/errors.hpp"
#include "kramers/stats.hpp"
#include "test_util.hpp"

using namespace kramers;
using kramers::testing::constants;
using kramers::testing::scalar_model;

namespace {

stats::MeanEstimate product_estimate(const EmpiricalMeasure& mu, bool vx, bool vy) {
  std::vector<double> v(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double a = vx ? mu.position(i)[0] : mu.velocity(i)[0];
    const double b = vy ? mu.position(i)[0] : mu.velocity(i)[0];
    v[i] = a * b;
  }
  return stats::estimate_mean(v, mu.chain_lengths());
}

// Stationary E (X_t - X_0)^2 of m X'' + X' + X = sqrt 2 B' from the
// continuous Lyapunov equation and the matrix exponential.
double exact_ou_increment(double m, double t) {
  Eigen::Matrix2d A;
  A << 0, 1, -1 / m, -1 / m;
  Eigen::Matrix2d S;
  S << 1, 0, 0, 1 / m;  // Var X = 1, Var Y = 1/m, Cov = 0
  Eigen::Matrix2d C = (A * t).exp() * S;
  return 2 * (S(0, 0) - C(0, 0));
}

}  // namespace

TEST_CASE("limit OU sampling recovers N(0, 1)") {
  auto ou = linear_model(1);
  IntegratorConfig cfg;
  cfg.rng_seed = 17;
  SamplingPlan plan;
  plan.n_samples = 20000;
  auto s = sample_invariant(ou, cfg, std::nullopt, plan);
  CHECK(s.measure.size() == 20000);
  CHECK(s.measure.provenance().limit);
  CHECK_FALSE(s.measure.has_velocities());
  auto x = s.measure.coordinate(0);
  auto mean = stats::estimate_mean(x, s.measure.chain_lengths());
  CHECK(std::abs(mean.mean) <= 3 * mean.se);
  auto second = position_moment(s.measure, 2);
  CHECK(std::abs(second.mean - 1.0) <= 3 * second.se);
  CHECK(s.report.stationary);
  CHECK_FALSE(s.report.insufficient_data);
}

TEST_CASE("kinetic OU sampling recovers the stationary covariance") {
  auto ou = linear_model(1);
  IntegratorConfig cfg;
  cfg.rng_seed = 18;
  SamplingPlan plan;
  plan.n_samples = 20000;
  const double m = 0.25;
  auto s = sample_invariant(ou, cfg, m, plan);
  REQUIRE(s.measure.has_velocities());
  auto xx = product_estimate(s.measure, true, true);
  auto yy = product_estimate(s.measure, false, false);
  auto xy = product_estimate(s.measure, true, false);
  CHECK(std::abs(xx.mean - 1.0) <= 3 * xx.se);
  CHECK(std::abs(yy.mean - 2.0 / (2 * m)) <= 3 * yy.se);
  CHECK(std::abs(xy.mean) <= 3 * xy.se);
  CHECK(s.report.blocks.size() == kStationarityBlocks);
  CHECK(s.report.stationary);
  CHECK(s.report.decay_rate > 0.0);
}

TEST_CASE("sampling preconditions and edge cases") {
  auto ref = reference_model_1d();
  IntegratorConfig cfg;
  SamplingPlan plan;
  plan.n_samples = 1;
  auto one = sample_invariant(ref, cfg, 0.1, plan);
  CHECK(one.measure.size() == 1);
  CHECK(one.report.insufficient_data);
  CHECK_THROWS_AS(sample_invariant(ref, cfg, 0.5, plan), PreconditionError);
  plan.thinning = -1.0;
  CHECK_THROWS_AS(sample_invariant(ref, cfg, 0.1, plan), ArgumentError);
  plan.thinning.reset();
  IntegratorConfig lim;
  lim.scheme = Scheme::limit_euler;
  CHECK_THROWS_AS(sample_invariant(ref, lim, 0.1, plan), ArgumentError);
  CHECK(default_burn_in(ref, std::nullopt) == doctest::Approx(40.0));
  CHECK(default_burn_in(ref, 0.1) == doctest::Approx(40.0));
  CHECK(default_thinning(ref) == doctest::Approx(2.0));
}

TEST_CASE("sampling is deterministic and seed dependent") {
  auto ref = reference_model_1d();
  IntegratorConfig cfg;
  cfg.rng_seed = 5;
  SamplingPlan plan;
  plan.n_samples = 300;
  plan.n_chains = 3;
  auto a = sample_invariant(ref, cfg, 0.1, plan);
  auto b = sample_invariant(ref, cfg, 0.1, plan);
  CHECK(std::vector<double>(a.measure.positions().begin(), a.measure.positions().end()) ==
        std::vector<double>(b.measure.positions().begin(), b.measure.positions().end()));
  cfg.rng_seed = 6;
  auto c = sample_invariant(ref, cfg, 0.1, plan);
  CHECK(c.measure.position(0)[0] != a.measure.position(0)[0]);
  CHECK(a.measure.chain_lengths() == std::vector<std::size_t>{100, 100, 100});
}

TEST_CASE("empirical measure validation") {
  CHECK_THROWS_AS(EmpiricalMeasure(1, {}), ArgumentError);
  CHECK_THROWS_AS(EmpiricalMeasure(2, {1.0, 2.0, 3.0}), ArgumentError);
  CHECK_THROWS_AS(EmpiricalMeasure(1, {1.0, 2.0}, {1.0}), ArgumentError);
  CHECK_THROWS_AS(EmpiricalMeasure(1, {1.0, std::nan("")}), ArgumentError);
  CHECK_THROWS_AS(EmpiricalMeasure(1, {1.0, 2.0}, {}, {3}), ArgumentError);
  EmpiricalMeasure ok(2, {1, 2, 3, 4});
  CHECK(ok.size() == 2);
  CHECK(ok.weight() == 0.5);
  CHECK(ok.coordinate(1) == std::vector<double>{2, 4});
}

TEST_CASE("stationarity report flags a drifting series") {
  std::vector<double> x;
  for (int i = 0; i < 4000; ++i) x.push_back(1.0 + i * 1e-3 + 0.1 * std::sin(i * 1.7));
  MeasureProvenance prov;
  prov.limit = true;
  prov.thinning = 1.0;
  EmpiricalMeasure trend(1, x, {}, {}, prov);
  auto rep = stationarity_report(trend);
  CHECK_FALSE(rep.stationary);
  CHECK(rep.max_block_discrepancy > kStationarityThreshold);
}

TEST_CASE("velocity moment scaling on the linear model") {
  auto ou = linear_model(1);
  IntegratorConfig cfg;
  cfg.rng_seed = 31;
  SamplingPlan plan;
  plan.n_samples = 4000;
  std::vector<double> grid;
  for (int k = 3; k <= 8; ++k) grid.push_back(std::ldexp(1.0, -k));
  auto fit = moment_scaling_check(ou, cfg, grid, 2, plan);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(0.1));
  CHECK(fit.ci_low <= fit.slope);
  CHECK(fit.ci_high >= fit.slope);
  CHECK_THROWS_AS(moment_scaling_check(ou, cfg, std::span<const double>(grid).first(2), 2, plan),
                  ArgumentError);
  CHECK_THROWS_AS(moment_scaling_check(ou, cfg, grid, 3, plan), ArgumentError);
}

TEST_CASE("velocity moment scaling preconditions and constructed input") {
  std::vector<EmpiricalMeasure> synthetic;
  std::vector<double> base = {0.3, -1.2, 0.8, 2.0, -0.4};
  for (int k = 2; k <= 6; ++k) {
    const double m = std::ldexp(1.0, -k);
    std::vector<double> y;
    for (double b : base) y.push_back(b * std::pow(m, -0.25));
    MeasureProvenance prov;
    prov.m = m;
    synthetic.emplace_back(1, base, y, std::vector<std::size_t>{}, prov);
  }
  auto fit = fit_velocity_moment_scaling(synthetic, 2);
  CHECK(fit.slope == doctest::Approx(-0.5).epsilon(1e-10));

  MeasureProvenance lim;
  lim.limit = true;
  std::vector<EmpiricalMeasure> limits(3, EmpiricalMeasure(1, base, {}, {}, lim));
  CHECK_THROWS_AS(fit_velocity_moment_scaling(limits, 2), PreconditionError);
}

TEST_CASE("increment moments at t = m match the exact OU law and stay bounded") {
  auto ou = linear_model(1);
  IntegratorConfig cfg;
  cfg.rng_seed = 41;
  cfg.mass_cfl = 0.02;
  SamplingPlan plan;
  std::vector<double> ratios;
  for (int k : {4, 6}) {
    const double m = std::ldexp(1.0, -k);
    std::vector<double> t = {m};
    auto rep = increment_moment_check(ou, cfg, m, t, 2, 20000, plan);
    REQUIRE(rep.rows.size() == 1);
    const auto& row = rep.rows[0];
    const double exact = exact_ou_increment(m, m);
    CHECK_MESSAGE(std::abs(row.moment.mean - exact) <= 4 * row.moment.se,
                  "m=" << m << " mc " << row.moment.mean << " exact " << exact);
    ratios.push_back(row.ratio);
  }
  IntegratorConfig fast;
  fast.rng_seed = 42;
  const double m8 = std::ldexp(1.0, -8);
  std::vector<double> t8 = {m8};
  auto rep8 = increment_moment_check(ou, fast, m8, t8, 2, 5000, plan);
  ratios.push_back(rep8.rows[0].ratio);
  const double lo = *std::min_element(ratios.begin(), ratios.end());
  const double hi = *std::max_element(ratios.begin(), ratios.end());
  CHECK(std::isfinite(hi));
  CHECK(hi / lo <= kIncrementSpreadLimit);
}

TEST_CASE("increment ratios over a time grid, including the log variant") {
  auto ref = reference_model_1d();
  IntegratorConfig cfg;
  cfg.rng_seed = 43;
  SamplingPlan plan;
  const double m = 1.0 / 64;
  std::vector<double> t = {m, 4 * m, 0.25, 1.0};
  auto rep = increment_moment_check(ref, cfg, m, t, 2, 3000, plan);
  CHECK(rep.rows.size() == 4);
  CHECK(rep.passed);
  CHECK(rep.log_passed);
  for (const auto& row : rep.rows) {
    CHECK(row.ratio > 0.0);
    CHECK(std::isfinite(row.log_ratio));
  }
  std::vector<double> bad = {0.0};
  CHECK_THROWS_AS(increment_moment_check(ref, cfg, m, bad, 2, 10, plan), ArgumentError);
  std::vector<double> bad2 = {1.5};
  CHECK_THROWS_AS(increment_moment_check(ref, cfg, m, bad2, 2, 10, plan), ArgumentError);
}

TEST_CASE("fixed point produces zero increments") {
  auto still = scalar_model([](double x) { return -x; }, [](double) { return 0.0; },
                            constants(1, 1, 1, 0, 1, 1));
  MeasureProvenance prov;
  prov.m = 0.1;
  EmpiricalMeasure start(1, {0.0}, {0.0}, {}, prov);
  IntegratorConfig cfg;
  std::vector<double> t = {1e-3, 0.5};
  auto rep = increment_moments_from(still, cfg, start, t, 2);
  for (const auto& row : rep.rows) {
    CHECK(row.moment.mean == 0.0);
    CHECK(row.log_moment.mean == 0.0);
  }
}

TEST_CASE("Lyapunov drift inequality") {
  auto ou = linear_model(1);
  auto res = lyapunov_drift_check(ou, 0.25, ProbePlan{});
  CHECK(res.passed);
  CHECK(res.violations == 0);
  CHECK(res.points >= 4096);
  CHECK(res.worst_margin <= 0.0);
  CHECK(res.c_star == doctest::Approx(3.0 + 6.0 * 2.0));
  CHECK_THROWS_AS(lyapunov_drift_check(ou, 0.6, ProbePlan{}), PreconditionError);

  // Shifted drift whose dissipativity constant has been understated.
  auto shifted = scalar_model([](double x) { return -x + 3.0; }, [](double) { return 1.0; },
                              constants(1, 10, 1, 0.0, 0.5, 1));
  auto bad = lyapunov_drift_check(shifted, 0.02, ProbePlan{});
  CHECK_FALSE(bad.passed);
  CHECK(bad.worst_margin > 0.0);
}

TEST_CASE("Lyapunov drift inequality holds for built-in models on the mass grid") {
  for (const auto& family : builtin_families()) {
    for (int d : {1, 2}) {
      auto spec = make_builtin_model(family, d);
      for (int k = 2; k <= 9; ++k) {
        const double m = std::ldexp(1.0, -k);
        if (m > spec.admissible_mass()) continue;
        auto r = lyapunov_drift_check(spec, m, ProbePlan{});
        CHECK_MESSAGE(r.passed, family << " d=" << d << " m=" << m << " margin "
                                       << r.worst_margin);
      }
    }
  }
}

TEST_CASE("generator averages vanish under the invariant measures") {
  auto ref = reference_model_1d();
  IntegratorConfig cfg;
  cfg.rng_seed = 51;
  cfg.dt_max = 1e-3;
  SamplingPlan plan;
  plan.n_samples = 20000;
  const double m = 0.125;
  auto kin = sample_invariant(ref, cfg, m, plan).measure;

  PhaseFunction xy;
  xy.value = [](std::span<const double> x, std::span<const double> y) { return x[0] * y[0]; };
  PhaseFunction yy;
  yy.value = [](std::span<const double>, std::span<const double> y) { return y[0] * y[0]; };
  for (const auto& g : {xy, yy, lyapunov_phase_function(m)}) {
    auto e = kinetic_generator_expectation(ref, kin, g);
    CHECK(std::abs(e.mean) <= 4 * e.se);
  }

  auto lim = sample_invariant(ref, cfg, std::nullopt, plan).measure;
  SpaceFunction x1;
  x1.value = [](std::span<const double> x) { return x[0]; };
  SpaceFunction x2;
  x2.value = [](std::span<const double> x) { return x[0] * x[0]; };
  for (const auto& g : {x1, x2}) {
    auto e = limit_generator_expectation(ref, lim, g);
    CHECK(std::abs(e.mean) <= 4 * e.se);
  }
  CHECK_THROWS_AS(kinetic_generator_expectation(ref, lim, xy), PreconditionError);
}

TEST_CASE("position moments are uniform in m and chain-count invariant") {
  auto ref = reference_model_1d();
  IntegratorConfig cfg;
  cfg.rng_seed = 61;
  SamplingPlan plan;
  plan.n_samples = 6000;
  for (int p : {2, 4}) {
    double lo = INFINITY, hi = 0.0;
    for (int k = 3; k <= 7; k += 2) {
      auto s = sample_invariant(ref, cfg, std::ldexp(1.0, -k), plan);
      const double v = position_moment(s.measure, p).mean;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    CHECK(hi / lo <= 2.0);
  }
  SamplingPlan p8 = plan, p16 = plan;
  p8.n_chains = 8;
  p16.n_chains = 16;
  auto a = sample_invariant(ref, cfg, 0.0625, p8).measure;
  cfg.rng_seed = 62;
  auto b = sample_invariant(ref, cfg, 0.0625, p16).measure;
  for (int p : {2, 4}) {
    auto ea = position_moment(a, p), eb = position_moment(b, p);
    CHECK(std::abs(ea.mean - eb.mean) <= 3 * std::hypot(ea.se, eb.se));
    auto va = velocity_moment(a, p), vb = velocity_moment(b, p);
    CHECK(std::abs(va.mean - vb.mean) <= 3 * std::hypot(va.se, vb.se));
  }
}

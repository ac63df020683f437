#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "kramers/ergodic.hpp"
#include "kramers/errors.hpp"
#include "kramers/stein1d.hpp"
#include "test_util.hpp"

using namespace kramers;
using kramers::testing::constants;
using kramers::testing::scalar_model;

namespace {

ModelSpec ou() { return linear_model(1); }

// b = -x - tanh x = -U', sigma = s constant.
ModelSpec saturating_gibbs(double s) {
  ModelSpec::Options opt;
  opt.gradient_drift = true;
  opt.constant_diffusion = true;
  opt.drift_derivative_1d = [](double x) { return -1.0 - 1.0 / (std::cosh(x) * std::cosh(x)); };
  opt.diffusion_derivative_1d = [](double) { return 0.0; };
  return scalar_model([](double x) { return -x - std::tanh(x); }, [s](double) { return s; },
                      constants(2.0, 4.0, s * s, 0.0, 1.0, s), opt);
}

TestFunction from(std::string name, std::function<double(double)> f) {
  TestFunction t;
  t.name = std::move(name);
  t.value = [f](std::span<const double> x) { return f(x[0]); };
  return t;
}

// Unnormalized density by adaptive quadrature of the exponent.
double oracle_density(const ModelSpec& spec, double x) {
  using boost::math::quadrature::gauss_kronrod;
  auto slope = [&](double u) {
    const double s = spec.diffusion_1d(u);
    return 2.0 * spec.drift_1d(u) / (s * s);
  };
  const double phi = gauss_kronrod<double, 31>::integrate(slope, 0.0, x, 10, 1e-14);
  const double s = spec.diffusion_1d(x);
  return std::exp(phi) / (s * s);
}

double oracle_expectation(const ModelSpec& spec, const std::function<double(double)>& h,
                          double R) {
  using boost::math::quadrature::gauss_kronrod;
  auto p = [&](double x) { return oracle_density(spec, x); };
  const double z = gauss_kronrod<double, 31>::integrate(p, -R, R, 12, 1e-13);
  const double num =
      gauss_kronrod<double, 31>::integrate([&](double x) { return h(x) * p(x); }, -R, R, 12, 1e-13);
  return num / z;
}

}  // namespace

TEST_CASE("OU density is the standard normal") {
  auto d = invariant_density_1d(ou());
  double worst = 0.0;
  for (std::size_t i = 0; i < d.grid.size(); ++i) {
    const double x = d.grid[i];
    worst = std::max(worst, std::abs(d.values[i] - std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi)));
  }
  CHECK(worst < 1e-8);
  CHECK(d.grid[d.grid.size() / 2] == 0.0);
  // Trapezoid integral on the grid.
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < d.grid.size(); ++i) s += 0.5 * d.spacing * (d.values[i] + d.values[i + 1]);
  CHECK(std::abs(s - 1.0) < 1e-8);
  CHECK(std::abs(d.cdf.back() - 1.0) < 1e-12);
  CHECK(d.tail_mass_estimate < 1e-10);
}

TEST_CASE("Gibbs density ratio is constant") {
  const double s = 1.2;
  auto d = invariant_density_1d(saturating_gibbs(s));
  std::vector<double> ratio;
  for (std::size_t i = 0; i < d.grid.size(); ++i) {
    const double x = d.grid[i];
    const double U = 0.5 * x * x + std::log(std::cosh(x));
    // Ratio in log form avoids the underflowing tails.
    ratio.push_back(d.log_values[i] + 2.0 * U / (s * s));
  }
  double worst = 0.0;
  for (double r : ratio) worst = std::max(worst, std::abs(std::expm1(r - ratio[ratio.size() / 2])));
  CHECK(worst < 1e-8);
}

TEST_CASE("stationarity identity holds under the quadrature density") {
  const auto spec = reference_model_1d();
  auto d = invariant_density_1d(spec);
  struct G {
    std::function<double(double)> g1, g2;
  };
  const std::vector<G> gs = {
      {[](double) { return 1.0; }, [](double) { return 0.0; }},
      {[](double x) { return 2 * x; }, [](double) { return 2.0; }},
      {[](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); }},
  };
  for (const auto& g : gs) {
    auto Ag = from("Ag", [&](double x) {
      const double s = spec.diffusion_1d(x);
      return spec.drift_1d(x) * g.g1(x) + 0.5 * s * s * g.g2(x);
    });
    CHECK(std::abs(nu_expectation(d, Ag)) <= 1e-6);
  }
}

TEST_CASE("nu expectations") {
  auto d = invariant_density_1d(ou());
  CHECK(std::abs(nu_expectation(d, tanh_test_function())) <= 1e-10);
  CHECK(std::abs(nu_expectation(d, from("x^2", [](double x) { return x * x; })) - 1.0) <= 1e-8);
  CHECK_THROWS_AS(nu_expectation(d, from("bad", [](double x) { return 1.0 / (x - x); })),
                  ModelEvaluationError);

  // Independent adaptive quadrature on the reference model.
  const auto spec = reference_model_1d();
  auto dr = invariant_density_1d(spec);
  for (auto h : {identity_test_function(), tanh_test_function(), sine_test_function()}) {
    const double oracle = oracle_expectation(spec, [&](double x) { return h.at(x); }, dr.radius);
    CHECK(std::abs(nu_expectation(dr, h) - oracle) <= 1e-9);
  }
}

TEST_CASE("quadrature expectations match limit-equation Monte Carlo") {
  const auto spec = reference_model_1d();
  auto d = invariant_density_1d(spec);
  IntegratorConfig cfg;
  cfg.scheme = Scheme::limit_euler;
  cfg.dt_max = 5e-4;
  cfg.rng_seed = 17;
  SamplingPlan plan;
  plan.n_samples = 20000;
  plan.n_chains = 8;
  plan.thinning = 1.0;
  plan.keep_velocities = false;
  auto s = sample_invariant(spec, cfg, std::nullopt, plan);
  for (auto h : {identity_test_function(), tanh_test_function(), smoothed_abs_test_function()}) {
    std::vector<double> v(s.measure.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = h.at(s.measure.position(i)[0]);
    auto e = stats::estimate_mean(v, s.measure.chain_lengths());
    CHECK(std::abs(e.mean - nu_expectation(d, h)) <= 4 * e.se);
  }
}

TEST_CASE("inverse-CDF sampler reproduces the density") {
  const auto spec = reference_model_1d();
  auto d = invariant_density_1d(spec);
  const std::size_t n = 200000;
  auto mu = sample_density_1d(d, n, 99);
  REQUIRE(mu.size() == n);
  CHECK(mu.provenance().limit);
  auto xs = mu.coordinate(0);
  std::sort(xs.begin(), xs.end());
  // Kolmogorov distance to the quadrature CDF, 1% critical value 1.63/sqrt(n).
  double ks = 0.0;
  for (std::size_t i = 0; i < n; i += 97) {
    const double x = xs[i];
    const std::size_t k = std::min<std::size_t>(std::floor((x + d.radius) / d.spacing), d.grid.size() - 2);
    const double t = (x - d.grid[k]) / d.spacing;
    const double F = d.cdf[k] + t * (d.cdf[k + 1] - d.cdf[k]);
    ks = std::max(ks, std::abs(F - (i + 0.5) / n));
  }
  CHECK(ks < 1.63 / std::sqrt(static_cast<double>(n)));
  auto m1 = stats::estimate_mean(mu.coordinate(0));
  CHECK(std::abs(m1.mean - nu_expectation(d, identity_test_function())) <= 4 * m1.se);
  auto again = sample_density_1d(d, 10, 99);
  CHECK(again.position(3)[0] == mu.position(3)[0]);
  CHECK_THROWS_AS(sample_density_1d(d, 0, 1), ArgumentError);
}

TEST_CASE("density errors") {
  auto expanding = scalar_model([](double x) { return x; }, [](double) { return 1.0; },
                                constants(1, 1, 1, 0, 1, 1));
  CHECK_THROWS_AS(invariant_density_1d(expanding, 10.0), DomainError);
  CHECK_THROWS_AS(invariant_density_1d(ou(), 2.0), DomainError);     // tail mass
  CHECK_THROWS_AS(invariant_density_1d(ou(), 60.0), DomainError);    // underflow
  CHECK_THROWS_AS(invariant_density_1d(linear_model(2)), ArgumentError);
  CHECK_THROWS_AS(invariant_density_1d(ou(), -1.0), ArgumentError);
  CHECK_THROWS_AS(invariant_density_1d(ou(), 10.0, 4), ArgumentError);
  CHECK(invariant_density_1d(ou(), 10.0, 31).grid.size() == 33);
}

TEST_CASE("OU with h = x has f' = -1") {
  auto d = invariant_density_1d(ou());
  auto sol = solve_stein_1d(ou(), d, identity_test_function());
  double e1 = 0.0, e2 = 0.0, e3 = 0.0, ef = 0.0;
  for (std::size_t i = 0; i < sol.grid.size(); ++i) {
    if (!sol.in_interior(i)) continue;
    e1 = std::max(e1, std::abs(sol.fp[i] + 1.0));
    e2 = std::max(e2, std::abs(sol.fpp[i]));
    e3 = std::max(e3, std::abs(sol.fppp[i]));
    ef = std::max(ef, std::abs(sol.f[i] + sol.grid[i]));
  }
  CHECK(e1 <= 1e-10);
  CHECK(e2 <= 1e-10);
  CHECK(e3 <= 1e-10);
  CHECK(ef <= 1e-9);
  CHECK(sol.discrete_residual_sup <= 1e-8);
  CHECK(std::abs(sol.nu_h) <= 1e-12);
  auto at = sol.derivatives_at(0.37);
  CHECK(at[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_THROWS_AS(sol.derivatives_at(2 * sol.radius), DomainError);
}

TEST_CASE("constant h gives the zero solution") {
  const auto spec = reference_model_1d();
  auto sol = solve_stein_1d(spec, invariant_density_1d(spec), constant_test_function(0.7));
  CHECK(sol.nu_h == doctest::Approx(0.7).epsilon(1e-12));
  double worst = 0.0;
  for (std::size_t i = 0; i < sol.grid.size(); ++i)
    worst = std::max({worst, std::abs(sol.f[i]), std::abs(sol.fp[i]), std::abs(sol.fpp[i])});
  CHECK(worst <= 1e-12);
}

TEST_CASE("reference model residuals and refinement") {
  const auto spec = reference_model_1d();
  const double R = default_stein_radius(spec);
  for (auto h : {identity_test_function(), tanh_test_function()}) {
    auto sol = solve_stein_1d(spec, invariant_density_1d(spec), h);
    MESSAGE(h.name << ": residual " << sol.residual_sup << ", discrete " << sol.discrete_residual_sup);
    CHECK(sol.residual_sup <= 1e-12);
    CHECK(sol.discrete_residual_sup <= kSteinResidualTolerance);
  }
  // Halving the spacing cuts the discrete residual until the floor.
  std::vector<double> res;
  for (int n : {256, 512, 1024}) {
    auto sol = solve_stein_1d(spec, invariant_density_1d(spec, R, n), tanh_test_function());
    res.push_back(sol.discrete_residual_sup);
  }
  CHECK(res[1] <= res[0] / 2);
  CHECK(res[2] <= res[1] / 2);
  // Differentiation consistency is second order or better.
  auto c1 = solve_stein_1d(spec, invariant_density_1d(spec, R, 512), tanh_test_function());
  auto c2 = solve_stein_1d(spec, invariant_density_1d(spec, R, 1024), tanh_test_function());
  CHECK(c2.fpp_consistency <= c1.fpp_consistency / 3.5);
  CHECK(c2.fppp_consistency <= c1.fppp_consistency / 3.5);
}

TEST_CASE("f' matches the integrating-factor formula by adaptive quadrature") {
  const auto spec = reference_model_1d();
  auto d = invariant_density_1d(spec);
  auto h = tanh_test_function();
  auto sol = solve_stein_1d(spec, d, h);
  using boost::math::quadrature::gauss_kronrod;
  const double nu = oracle_expectation(spec, [&](double x) { return h.at(x); }, d.radius);
  for (double x : {-3.0, -0.5, 0.0, 1.25, 4.0}) {
    auto p = [&](double u) { return oracle_density(spec, u); };
    const double G = gauss_kronrod<double, 31>::integrate(
        [&](double u) { return (h.at(u) - nu) * p(u); }, -d.radius, x, 12, 1e-13);
    const double s = spec.diffusion_1d(x);
    const double fp = 2.0 * G / (s * s * p(x));
    CHECK(sol.derivatives_at(x)[0] == doctest::Approx(fp).epsilon(1e-7));
  }
}

TEST_CASE("growth ratios") {
  auto sol = solve_stein_1d(ou(), invariant_density_1d(ou()), identity_test_function());
  auto g = verify_regularity_growth(sol);
  for (double r : g.sup_ratio) CHECK(r <= 1.0 + 1e-9);
  CHECK(g.passed);

  const auto spec = reference_model_1d();
  for (auto h : {tanh_test_function(), smoothed_abs_test_function(), sine_test_function()}) {
    auto rep = regularity_domain_stability(spec, h);
    for (int k = 0; k < 4; ++k)
      MESSAGE(h.name << " order " << k + 2 << ": " << rep.base.sup_ratio[k] << " at "
                     << rep.base.argmax[k] << ", change " << rep.relative_change[k]);
    CHECK(rep.passed);
  }
  auto cubic = regularity_domain_stability(spec, cubic_test_function());
  CHECK_FALSE(cubic.passed);
  CHECK_THROWS_AS(regularity_domain_stability(spec, tanh_test_function(), {}, 0.5), ArgumentError);
}

TEST_CASE("Hessian log-modulus") {
  auto sol = solve_stein_1d(ou(), invariant_density_1d(ou()), identity_test_function());
  CHECK(hessian_log_modulus_check(sol).sup <= 1e-9);

  const auto spec = reference_model_1d();
  const double R = default_stein_radius(spec);
  auto coarse = solve_stein_1d(spec, invariant_density_1d(spec, R, 8), tanh_test_function());
  CHECK_THROWS_AS(hessian_log_modulus_check(coarse), PreconditionError);

  auto rep = hessian_modulus_refinement(spec, tanh_test_function());
  MESSAGE("modulus " << rep.coarse.sup << " -> " << rep.fine.sup);
  CHECK(std::isfinite(rep.coarse.sup));
  CHECK(rep.coarse.sup > 0.0);
  CHECK(rep.passed);

  // Only pairs within 1/8 count: 8 neighbours at spacing 1/64.
  auto s64 = solve_stein_1d(spec, invariant_density_1d(spec, 12.0, 12 * 128), tanh_test_function());
  std::size_t interior = 0;
  for (std::size_t i = 0; i < s64.grid.size(); ++i) interior += s64.in_interior(i);
  CHECK(hessian_log_modulus_check(s64).pairs == 8 * interior - 36);
}

TEST_CASE("stationary identities in the Gibbs case") {
  const auto spec = ou();
  auto sol = solve_stein_1d(spec, invariant_density_1d(spec), tanh_test_function());
  IntegratorConfig cfg;
  cfg.rng_seed = 3;
  SamplingPlan plan;
  plan.n_samples = 40000;
  plan.n_chains = 8;
  plan.thinning = 0.5;
  auto s = sample_invariant(spec, cfg, 0.25, plan);
  auto r = stationary_identity_check(s.measure, sol);
  CHECK(r.m == 0.25);
  CHECK(r.velocity_gradient.passed);
  CHECK(r.gap_phi.passed);
  CHECK(std::abs(r.gap_phi.lhs.mean) <= 4 * r.gap_phi.lhs.se);
  auto rem = stein_remainder_check(s.measure, sol, 0.25);
  CHECK(rem.gap_remainder.passed);

  auto zero = solve_stein_1d(spec, invariant_density_1d(spec), constant_test_function(1.0));
  auto rz = stationary_identity_check(s.measure, zero);
  CHECK(rz.gap_phi.passed);
  CHECK(rz.gap_phi.difference.mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(stein_remainder_check(s.measure, zero, 0.25).gap_remainder.passed);

  EmpiricalMeasure positions_only(1, std::vector<double>{0.0, 1.0});
  CHECK_THROWS_AS(stationary_identity_check(positions_only, sol), PreconditionError);
  CHECK_THROWS_AS(stein_remainder_check(positions_only, sol, 0.25), PreconditionError);
}

TEST_CASE("stationary identities on the reference model") {
  const auto spec = reference_model_1d();
  auto sol = solve_stein_1d(spec, invariant_density_1d(spec), tanh_test_function());
  IntegratorConfig cfg;
  cfg.rng_seed = 8;
  SamplingPlan plan;
  plan.n_samples = 40000;
  plan.n_chains = 8;
  plan.thinning = 0.5;
  auto s = sample_invariant(spec, cfg, 0.125, plan);
  auto r = stationary_identity_check(s.measure, sol);
  MESSAGE("z values " << r.velocity_gradient.z << ", " << r.gap_phi.z);
  CHECK(r.velocity_gradient.passed);
  CHECK(r.gap_phi.passed);
  auto rem = stein_remainder_check(s.measure, sol, 0.125);
  MESSAGE("remainder " << rem.gap_remainder.rhs.mean << " +- " << rem.gap_remainder.rhs.se
                       << ", gap " << rem.gap_remainder.lhs.mean << " +- " << rem.gap_remainder.lhs.se);
  CHECK(rem.gap_remainder.passed);
}

TEST_CASE("remainder scaling fit") {
  std::vector<RemainderReport> rows;
  for (double m : {0.0625, 0.015625, 0.00390625}) {
    RemainderReport r;
    r.m = m;
    r.gap_remainder.rhs.mean = 0.3 * m;
    r.gap_remainder.rhs.se = 0.01 * m;
    rows.push_back(r);
  }
  auto fit = fit_remainder_scaling(rows);
  CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-10));
  rows.resize(1);
  CHECK_THROWS_AS(fit_remainder_scaling(rows), ArgumentError);
}

TEST_CASE("CSV export") {
  auto sol = solve_stein_1d(ou(), invariant_density_1d(ou(), 8.0, 64), identity_test_function());
  const std::string path = "test_stein_export.csv";
  write_stein_csv(path, sol);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "x,f,fp,fpp,fppp,p");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 65);
  std::remove(path.c_str());
  CHECK_THROWS_AS(write_stein_csv("/nonexistent/dir/x.csv", sol), ArgumentError);
}

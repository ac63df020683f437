// Acceptance run: one PASS/FAIL line per criterion. Arguments select a
// subset of criteria by number; --work-dir sets the scratch directory.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kramers/cli.hpp"
#include "kramers/ergodic.hpp"
#include "kramers/model.hpp"
#include "kramers/ratelab.hpp"
#include "kramers/rng.hpp"
#include "kramers/stats.hpp"
#include "kramers/stein1d.hpp"
#include "kramers/transport.hpp"

using namespace kramers;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

std::vector<double> mass_grid(int from, int to) {
  std::vector<double> g;
  for (int k = from; k <= to; ++k) g.push_back(std::ldexp(1.0, -k));
  return g;
}

fs::path g_work = "acceptance_work";

// Kinetic samples of the reference model shared by criteria 8 and 9.
const EmpiricalMeasure& reference_samples(double m) {
  static std::map<double, std::unique_ptr<EmpiricalMeasure>> cache;
  auto& slot = cache[m];
  if (!slot) {
    IntegratorConfig cfg;
    cfg.rng_seed = derive_seed(0xacce55, {stream_tag::kStein, std::bit_cast<std::uint64_t>(m)});
    SamplingPlan plan;
    plan.n_samples = 1000000;
    slot = std::make_unique<EmpiricalMeasure>(
        sample_invariant(reference_model_1d(), cfg, m, plan).measure);
  }
  return *slot;
}

const SteinSolution1D& reference_solution(const std::string& h) {
  static std::map<std::string, std::unique_ptr<SteinSolution1D>> cache;
  auto& slot = cache[h];
  if (!slot) {
    const ModelSpec spec = reference_model_1d();
    const Density1D dens = invariant_density_1d(spec);
    slot = std::make_unique<SteinSolution1D>(
        solve_stein_1d(spec, dens, h == "x" ? identity_test_function() : tanh_test_function()));
  }
  return *slot;
}

// 1. 1D rate through the CLI sweep pipeline.
Outcome criterion1() {
  const fs::path dir = g_work / "criterion1";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "reference.json";
  nlohmann::ordered_json j;
  j["model"] = {{"family", "linear_trig"},
                {"params", {{"a", 0.25}, {"s0", 1.0}, {"s1", 0.5}}},
                {"constants",
                 {{"L", 1.6}, {"Lb", 17.0 / 16.0}, {"sigma0", 1.0}, {"c1", 1.0}, {"c2", 0.5},
                  {"sigma_sup", 1.5}}}};
  j["sampling"] = {{"n", 1000000}};
  j["sweep"] = {{"m_grid", mass_grid(4, 9)}, {"transport", "sorted_1d"}, {"n_boot", 2000}};
  j["master_seed"] = 1;
  j["output_dir"] = (dir / "out").string();
  std::ofstream(cfg) << j.dump(2) << "\n";

  std::ostringstream out, err;
  const int code = run_cli({"sweep", cfg.string()}, out, err);
  std::cout << out.str();
  if (code != kExitOk) return {false, "sweep exited with " + std::to_string(code) + ": " + err.str()};
  std::ifstream in(dir / "out" / "fit.json");
  const auto fit = nlohmann::json::parse(in);
  if (!fit.contains("alpha"))
    return {false, "verdict " + fit["verdict"].get<std::string>() + ", no exponent fitted"};
  const double alpha = fit["alpha"], lo = fit["alpha_ci"][0], hi = fit["alpha_ci"][1];
  const bool pass = alpha >= 0.35 && alpha <= 0.65 && lo <= 0.5 && 0.5 <= hi;
  return {pass, "verdict " + fit["verdict"].get<std::string>() + ", alpha " + fmt(alpha) +
                    " CI [" + fmt(lo) + ", " + fmt(hi) + "], need alpha in [0.35, 0.65] and CI " +
                    "containing 0.5"};
}

// 2. Gibbs null case and the stationary covariance of the linear model.
Outcome criterion2() {
  const double sigma = std::sqrt(2.0);
  const ModelSpec spec = linear_model(1, 1.0, sigma);
  const std::vector<double> grid = mass_grid(2, 6);
  IntegratorConfig cfg;
  cfg.rng_seed = 2;
  SamplingPlan plan;
  plan.n_samples = 200000;
  const auto rows = run_sweep(spec, cfg, grid, plan);
  bool pass = true;
  std::string detail;
  for (const auto& r : rows) {
    const bool ok = r.status != RowStatus::failed && r.w1_value <= 3 * r.self_baseline;
    pass = pass && ok;
    detail += "m=" + fmt(r.m) + " w1 " + fmt(r.w1_value, 3) + "/base " + fmt(r.self_baseline, 3) +
              (ok ? "" : " (!)") + "; ";
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double m = grid[k];
    IntegratorConfig c = cfg;
    c.rng_seed = derive_seed(22, {k});
    const auto s = sample_invariant(spec, c, m, plan).measure;
    double vx = 0, vy = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      vx += s.position(i)[0] * s.position(i)[0];
      vy += s.velocity(i)[0] * s.velocity(i)[0];
    }
    vx /= s.size();
    vy /= s.size();
    const double ex = sigma * sigma / 2, ey = sigma * sigma / (2 * m);
    const double rx = vx / ex - 1, ry = vy / ey - 1;
    const bool ok = std::abs(rx) <= 0.02 && std::abs(ry) <= 0.02;
    pass = pass && ok;
    detail += "m=" + fmt(m) + " VarX " + fmt(100 * rx, 2) + "% VarY " + fmt(100 * ry, 2) + "%" +
              (ok ? "" : " (!)") + "; ";
  }
  return {pass, detail};
}

// 3. Lyapunov drift inequality for every validated built-in model.
Outcome criterion3() {
  std::vector<std::pair<std::string, ModelSpec>> models;
  models.emplace_back("reference", reference_model_1d());
  for (const auto& f : builtin_families())
    for (int d : {1, 2}) models.emplace_back(f + "/d" + std::to_string(d), make_builtin_model(f, d));
  const ProbePlan probe;  // 4096 points, R = 20
  std::size_t checked = 0, violations = 0, skipped_masses = 0;
  double worst = -INFINITY;
  std::string detail;
  for (const auto& [name, spec] : models) {
    if (!validate_model(spec, probe).passed) {
      detail += name + " not validated; ";
      continue;
    }
    for (double m : mass_grid(4, 9)) {
      if (m > spec.admissible_mass()) {
        ++skipped_masses;
        continue;
      }
      const auto r = lyapunov_drift_check(spec, m, probe);
      ++checked;
      violations += r.violations;
      worst = std::max(worst, r.worst_margin);
    }
  }
  detail += std::to_string(models.size()) + " models, " + std::to_string(checked) +
            " (model, m) pairs, " + std::to_string(violations) + " violations, worst margin " +
            fmt(worst) + ", " + std::to_string(skipped_masses) + " masses above admissible";
  return {violations == 0 && checked > 0, detail};
}

// 4. Velocity second moment scales like 1/m.
Outcome criterion4() {
  IntegratorConfig cfg;
  cfg.rng_seed = 4;
  SamplingPlan plan;
  plan.n_samples = 20000;
  const auto grid = mass_grid(3, 8);
  const auto lin = moment_scaling_check(linear_model(1), cfg, grid, 2, plan);
  const auto ref = moment_scaling_check(reference_model_1d(), cfg, grid, 2, plan);
  const bool pass = std::abs(lin.slope + 1.0) <= 0.1 && ref.slope >= -1.15;
  return {pass, "linear slope " + fmt(lin.slope) + " (need -1 +- 0.1), reference slope " +
                    fmt(ref.slope) + " (need >= -1.15)"};
}

// 5. Increment ratios at t = m.
Outcome criterion5() {
  IntegratorConfig cfg;
  cfg.rng_seed = 5;
  SamplingPlan plan;
  std::vector<double> ratio, log_ratio;
  for (double m : {std::ldexp(1.0, -4), std::ldexp(1.0, -6), std::ldexp(1.0, -8)}) {
    const std::vector<double> t = {m};
    const auto rep = increment_moment_check(reference_model_1d(), cfg, m, t, 2, 20000, plan);
    ratio.push_back(rep.rows[0].ratio);
    log_ratio.push_back(rep.rows[0].log_ratio);
  }
  auto spread = [](const std::vector<double>& v) {
    return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
  };
  const double s = spread(ratio), sl = spread(log_ratio);
  const bool finite = std::all_of(ratio.begin(), ratio.end(), [](double r) { return std::isfinite(r) && r > 0; }) &&
                      std::all_of(log_ratio.begin(), log_ratio.end(), [](double r) { return std::isfinite(r) && r > 0; });
  std::string detail = "ratios";
  for (double r : ratio) detail += " " + fmt(r);
  detail += " spread " + fmt(s) + "; log ratios";
  for (double r : log_ratio) detail += " " + fmt(r);
  detail += " spread " + fmt(sl) + " (limit 10)";
  return {finite && s <= kIncrementSpreadLimit && sl <= kIncrementSpreadLimit, detail};
}

// 6. Stein residuals.
Outcome criterion6() {
  bool pass = true;
  std::string detail;
  for (const char* h : {"x", "tanh"}) {
    const auto& sol = reference_solution(h);
    const bool ok = sol.residual_sup <= kSteinResidualTolerance &&
                    sol.discrete_residual_sup <= kSteinResidualTolerance;
    pass = pass && ok;
    detail += std::string("h=") + h + " residual " + fmt(sol.residual_sup, 3) + " / differenced " +
              fmt(sol.discrete_residual_sup, 3) + "; ";
  }
  const ModelSpec ou = linear_model(1);
  const auto sol = solve_stein_1d(ou, invariant_density_1d(ou), identity_test_function());
  double err = 0.0;
  for (std::size_t i = 0; i < sol.grid.size(); ++i)
    if (sol.in_interior(i)) err = std::max(err, std::abs(sol.fp[i] + 1.0));
  pass = pass && err <= 1e-10 && sol.discrete_residual_sup <= kSteinResidualTolerance;
  detail += "OU sup|f'+1| " + fmt(err, 3);
  return {pass, detail};
}

// 7. Growth ratios, domain stability and the Hessian log-modulus.
Outcome criterion7() {
  bool pass = true;
  std::string detail;
  const ModelSpec spec = reference_model_1d();
  for (const char* name : {"x", "tanh"}) {
    const TestFunction h = std::string(name) == "x" ? identity_test_function() : tanh_test_function();
    const auto dom = regularity_domain_stability(spec, h);
    bool finite = true;
    for (double r : dom.base.sup_ratio) finite = finite && std::isfinite(r);
    const auto mod = hessian_modulus_refinement(spec, h);
    const bool ok = finite && dom.passed && mod.passed && std::isfinite(mod.fine.sup);
    pass = pass && ok;
    detail += std::string("h=") + name + " ratios";
    for (double r : dom.base.sup_ratio) detail += " " + fmt(r, 3);
    double worst = 0.0;
    for (double c : dom.relative_change) worst = std::max(worst, std::abs(c));
    detail += " max change " + fmt(100 * worst, 2) + "%, modulus " + fmt(mod.coarse.sup, 4) +
              " -> " + fmt(mod.fine.sup, 4) + "; ";
  }
  return {pass, detail};
}

// 8. Stationary identities at m = 2^-6.
Outcome criterion8() {
  const double m = std::ldexp(1.0, -6);
  const auto& samples = reference_samples(m);
  bool pass = true;
  std::string detail = "n " + std::to_string(samples.size()) + "; ";
  for (const char* h : {"x", "tanh"}) {
    const auto rep = stationary_identity_check(samples, reference_solution(h));
    pass = pass && rep.velocity_gradient.passed && rep.gap_phi.passed;
    detail += std::string("h=") + h + " E[Y f'] " + fmt(rep.velocity_gradient.lhs.mean, 3) +
              " (z " + fmt(rep.velocity_gradient.z, 3) + "), gap " + fmt(rep.gap_phi.lhs.mean, 3) +
              " vs " + fmt(rep.gap_phi.rhs.mean, 3) + " (z " + fmt(rep.gap_phi.z, 3) + "); ";
  }
  return {pass, detail};
}

// 9. Remainder formula and its scaling in m.
Outcome criterion9() {
  const auto& sol = reference_solution("x");
  std::vector<RemainderReport> rows;
  std::string detail;
  for (int k : {4, 6, 8}) {
    const double m = std::ldexp(1.0, -k);
    rows.push_back(stein_remainder_check(reference_samples(m), sol, m));
    const auto& g = rows.back().gap_remainder;
    detail += "m=2^-" + std::to_string(k) + " gap " + fmt(g.lhs.mean, 3) + " remainder " +
              fmt(g.rhs.mean, 3) + " +- " + fmt(g.rhs.se, 2) + " (z " + fmt(g.z, 3) + "); ";
  }
  try {
    const auto fit = fit_remainder_scaling(rows);
    detail += "slope " + fmt(fit.slope) + " +- " + fmt(fit.slope_se, 3) + " (need >= 0.35)";
    return {fit.agreement && fit.slope >= 0.35, detail};
  } catch (const std::exception& e) {
    return {false, detail + e.what()};
  }
}

// 10. Transport oracles and metric axioms.
Outcome criterion10() {
  Rng rng(10);
  std::uniform_int_distribution<int> size(1, 256);
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    const int n = size(rng.engine());
    std::vector<double> a(n), b(n);
    const double shift = rng.normal(), scale = std::exp(rng.normal());
    for (int i = 0; i < n; ++i) {
      a[i] = rng.normal();
      b[i] = shift + scale * (inst % 3 == 0 ? std::round(4 * rng.normal()) / 4 : rng.normal());
    }
    const double s = w1_sorted_values(a, b);
    const double lp = w1_assignment_exact(EmpiricalMeasure(1, a), EmpiricalMeasure(1, b)).value;
    worst = std::max(worst, std::abs(s - lp));
  }

  std::size_t violations = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const int d = 1 + inst % 3, n = 64;
    auto cloud = [&](double shift) {
      std::vector<double> v(n * d);
      for (auto& x : v) x = shift + rng.normal();
      return EmpiricalMeasure(d, v);
    };
    const auto a = cloud(0.0), b = cloud(0.5), c = cloud(-1.0);
    const double ab = w1_assignment_exact(a, b).value, ba = w1_assignment_exact(b, a).value;
    const double bc = w1_assignment_exact(b, c).value, ac = w1_assignment_exact(a, c).value;
    const double aa = w1_assignment_exact(a, a).value;
    if (std::abs(ab - ba) > 1e-12) ++violations;
    if (ac > ab + bc + 1e-12) ++violations;
    if (std::abs(aa) > 1e-12 || !(ab > 0.0)) ++violations;
  }
  return {worst <= 1e-12 && violations == 0,
          "200 instances, max |sorted - assignment| " + fmt(worst, 3) + "; " +
              std::to_string(violations) + " axiom violations in 100 triples"};
}

// 11. Sliced W1 slope on a 2D non-gradient model.
Outcome criterion11() {
  const ModelSpec spec = make_builtin_model("linear_trig", 2, {{"s1", 0.0}});
  IntegratorConfig cfg;
  cfg.rng_seed = 11;
  SamplingPlan plan;
  plan.n_samples = 200000;
  SweepOptions opt;
  opt.method = TransportMethod::sliced;
  opt.n_proj = 128;
  const auto rows = run_sweep(spec, cfg, mass_grid(4, 8), plan, opt);
  std::string detail;
  for (const auto& r : rows)
    detail += "m=" + fmt(r.m, 3) + " " + fmt(r.w1_value, 3) + " (raw " + fmt(r.w1_raw, 3) +
              ", base " + fmt(r.self_baseline, 3) +
              (r.crosscheck ? ", exact " + fmt(*r.crosscheck, 3) + "/" + fmt(*r.crosscheck_baseline, 3) : "") +
              "); ";
  FitOptions fo;
  fo.seed = 11;
  const auto fit = fit_rate(rows, false, fo);
  if (!fit.fitted()) return {false, detail + "verdict " + fit.verdict + ", no exponent fitted"};
  const auto logfit = fit_rate(rows, true, fo);
  detail += "slope " + fmt(fit.alpha) + " CI [" + fmt(fit.alpha_ci_low) + ", " +
            fmt(fit.alpha_ci_high) + "] (need [0.3, 0.7])";
  if (logfit.fitted() && logfit.gamma)
    detail += ", with log term: alpha " + fmt(logfit.alpha) + " gamma " + fmt(*logfit.gamma);
  return {fit.alpha >= 0.3 && fit.alpha <= 0.7, detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work-dir" && i + 1 < argc) {
      g_work = argv[++i];
    } else {
      try {
        selected.insert(std::stoi(a));
      } catch (const std::exception&) {
        std::cerr << "usage: acceptance [--work-dir DIR] [criterion numbers]\n";
        return 2;
      }
    }
  }
  const std::vector<std::function<Outcome()>> criteria = {
      criterion1, criterion2, criterion3, criterion4,  criterion5, criterion6,
      criterion7, criterion8, criterion9, criterion10, criterion11};

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.passed;
    std::cout << "criterion " << id << ": " << (o.passed ? "PASS" : "FAIL") << "  [" << fmt(sec, 3)
              << " s] " << o.detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed")
            << std::endl;
  return failed ? 1 : 0;
}

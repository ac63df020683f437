#include "kramers/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "kramers/config.hpp"
#include "kramers/ergodic.hpp"
#include "kramers/errors.hpp"
#include "kramers/parallel.hpp"
#include "kramers/rng.hpp"
#include "kramers/stein1d.hpp"

namespace kramers {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct Context {
  ExperimentConfig cfg;
  fs::path outdir;
  std::ostream& out;
  std::ostream& err;
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream o(p, std::ios::binary);
  o << text;
  if (!o) throw ArgumentError("cannot write '" + p.string() + "'");
}

void write_json(const fs::path& p, const ojson& j) { write_file(p, j.dump(2) + "\n"); }


ojson estimate_json(const stats::MeanEstimate& e) { return {{"mean", e.mean}, {"se", e.se}}; }

ojson identity_json(const IdentityCheck& c) {
  return {{"lhs", estimate_json(c.lhs)},
          {"rhs", estimate_json(c.rhs)},
          {"difference", estimate_json(c.difference)},
          {"z", c.z},
          {"passed", c.passed}};
}

ojson model_json(const ModelSpec& spec) {
  const auto& c = spec.constants();
  ojson params = ojson::object();
  for (const auto& [k, v] : spec.params()) params[k] = v;
  return {{"family", spec.family()},
          {"dimension", spec.dimension()},
          {"params", params},
          {"constants",
           {{"L", c.lipschitz_L},
            {"Lb", c.growth_Lb},
            {"sigma0", c.ellipticity_sigma0},
            {"c1", c.dissipative_c1},
            {"c2", c.dissipative_c2},
            {"sigma_sup", c.sigma_sup}}},
          {"admissible_mass", spec.admissible_mass()}};
}

std::string point_string(std::span<const double> x) {
  std::string s = "(";
  for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ", " : "") + fmt(x[i], 10);
  return s + ")";
}

// ---- validate ------------------------------------------------------------

bool report_validation(const ValidationReport& r, std::ostream& out, ojson& j) {
  j["checks"] = ojson::array();
  for (const auto& c : r.checks) {
    out << "  " << std::left << std::setw(22) << c.name << " worst margin " << std::setw(14)
        << fmt(c.worst_margin) << (c.passed ? "ok" : "FAILED") << "\n";
    ojson cj = {{"name", c.name}, {"worst_margin", c.worst_margin}, {"passed", c.passed}};
    if (!c.passed) {
      out << "    witness x = " << point_string(c.witness);
      if (!c.witness_pair.empty()) out << ", y = " << point_string(c.witness_pair);
      out << "\n";
      cj["witness"] = c.witness;
      if (!c.witness_pair.empty()) cj["witness_pair"] = c.witness_pair;
    }
    j["checks"].push_back(cj);
  }
  return r.passed;
}

int cmd_validate(Context& c) {
  const ModelSpec spec = build_model(c.cfg.model);
  c.out << "model " << spec.family() << ", d = " << spec.dimension() << "\n";
  ojson j;
  j["model"] = model_json(spec);
  const ValidationReport report = validate_model(spec, c.cfg.model.probe);
  bool passed = report_validation(report, c.out, j);

  const double limit = spec.admissible_mass();
  std::vector<double> masses;
  for (double m : c.cfg.sweep_masses())
    if (m <= limit) masses.push_back(m);
  if (masses.empty()) masses.push_back(limit);

  j["drift"] = ojson::array();
  for (double m : c.cfg.sweep_masses())
    if (m > limit)
      c.out << "  drift m = " << fmt(m) << ": skipped, above the admissible mass " << fmt(limit)
            << "\n";
  for (double m : masses) {
    const DriftCheckResult d = lyapunov_drift_check(spec, m, c.cfg.model.probe);
    c.out << "  drift m = " << std::left << std::setw(12) << fmt(m) << " worst margin "
          << std::setw(14) << fmt(d.worst_margin) << d.violations << "/" << d.points
          << " violations " << (d.passed ? "ok" : "FAILED") << "\n";
    ojson dj = {{"m", m},
                {"c_star", d.c_star},
                {"worst_margin", d.worst_margin},
                {"points", d.points},
                {"violations", d.violations},
                {"passed", d.passed}};
    if (!d.passed) {
      c.out << "    witness x = " << point_string(d.witness.x)
            << ", y = " << point_string(d.witness.y) << "\n";
      dj["witness"] = {{"x", d.witness.x}, {"y", d.witness.y}};
    }
    j["drift"].push_back(dj);
    passed = passed && d.passed;
  }
  j["passed"] = passed;
  fs::create_directories(c.outdir);
  write_json(c.outdir / "validation.json", j);
  c.out << (passed ? "validation passed" : "validation FAILED") << "\n";
  return passed ? kExitOk : kExitFailed;
}

// ---- sweep / report ------------------------------------------------------

ojson row_json(const SweepRow& r) {
  ojson j = {{"m", r.m},
             {"w1", r.w1_value},
             {"stderr", r.w1_stderr},
             {"raw", r.w1_raw},
             {"baseline", r.self_baseline},
             {"n", r.n_samples},
             {"method", to_string(r.method)},
             {"status", to_string(r.status)}};
  if (r.crosscheck) j["crosscheck"] = *r.crosscheck;
  if (r.crosscheck_baseline) j["crosscheck_baseline"] = *r.crosscheck_baseline;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

void print_rows(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "  m            w1           stderr       baseline     status\n";
  for (const auto& r : rows) {
    out << "  " << std::left << std::setw(13) << fmt(r.m) << std::setw(13) << fmt(r.w1_value)
        << std::setw(13) << fmt(r.w1_stderr) << std::setw(13) << fmt(r.self_baseline)
        << to_string(r.status);
    if (!r.error.empty()) out << ": " << r.error;
    out << "\n";
  }
}

void emit_fit(Context& c, const std::vector<SweepRow>& rows) {
  std::size_t usable = 0;
  for (const auto& r : rows) usable += r.status != RowStatus::failed;
  ojson j;
  j["with_log_correction"] = c.cfg.sweep.with_log_correction;
  j["rows"] = ojson::array();
  for (const auto& r : rows) j["rows"].push_back(row_json(r));
  write_file(c.outdir / "sweep_plot.dat", sweep_plot_data(rows));

  if (usable < 4) {
    const std::string reason = "fit skipped: " + std::to_string(usable) +
                               " usable rows, at least 4 are required";
    j["verdict"] = "skipped";
    j["reason"] = reason;
    c.out << reason << "\n";
    write_json(c.outdir / "fit.json", j);
    return;
  }
  FitOptions fo;
  fo.n_boot = c.cfg.sweep.n_boot;
  fo.seed = c.cfg.master_seed;
  const RateFitResult fit = fit_rate(rows, c.cfg.sweep.with_log_correction, fo);
  j["verdict"] = fit.verdict;
  j["n_rows"] = fit.n_rows;
  if (!fit.fitted()) {
    j["message"] = "rate indistinguishable from 0";
    c.out << "rate indistinguishable from 0 (fewer than 4 rows above the self-distance baseline)\n";
    write_json(c.outdir / "fit.json", j);
    return;
  }
  j["alpha"] = fit.alpha;
  j["alpha_se"] = fit.alpha_se;
  j["alpha_ci"] = {fit.alpha_ci_low, fit.alpha_ci_high};
  j["ci_contains_half"] = fit.alpha_ci_low <= 0.5 && 0.5 <= fit.alpha_ci_high;
  j["intercept"] = fit.intercept;
  if (fit.gamma) {
    j["gamma"] = *fit.gamma;
    j["gamma_ci"] = {*fit.gamma_ci_low, *fit.gamma_ci_high};
  }
  j["residual_variance"] = fit.residual_variance;
  j["n_boot"] = fit.n_boot;
  j["fit_masses"] = fit.masses;
  j["fit_residuals"] = fit.residuals;
  write_json(c.outdir / "fit.json", j);
  c.out << "alpha = " << fmt(fit.alpha, 4) << "  95% CI [" << fmt(fit.alpha_ci_low, 4) << ", "
        << fmt(fit.alpha_ci_high, 4) << "]";
  if (fit.gamma)
    c.out << "  gamma = " << fmt(*fit.gamma, 4) << " [" << fmt(*fit.gamma_ci_low, 4) << ", "
          << fmt(*fit.gamma_ci_high, 4) << "]";
  c.out << "\n";
}

std::string table_identity(ExperimentConfig cfg) {
  cfg.output_dir = "";
  return serialize_config(cfg);
}

int cmd_sweep(Context& c) {
  const ModelSpec spec = build_model(c.cfg.model);
  const ValidationReport report = validate_model(spec, c.cfg.model.probe);
  if (!report.passed) {
    c.err << "model fails validation; run the validate subcommand for details\n";
    ojson j;
    report_validation(report, c.err, j);
    return kExitFailed;
  }
  const std::vector<double> masses = c.cfg.sweep_masses();
  const double limit = theorem_mass_limit(spec);
  for (double m : masses) {
    if (m > limit) {
      c.err << "m = " << fmt(m) << " exceeds the largest admissible mass " << fmt(limit)
            << " for this model\n";
      return kExitFailed;
    }
  }

  fs::create_directories(c.outdir);
  const fs::path table = c.outdir / "sweep.csv";
  const fs::path meta = c.outdir / "sweep_config.json";
  const std::string identity = table_identity(c.cfg);
  if (fs::exists(table) && fs::exists(meta) && read_file(meta) != identity) {
    c.err << "existing table " << table.string()
          << " was produced by a different configuration; remove it or choose another "
             "output directory\n";
    return kExitUsage;
  }
  write_file(meta, identity);

  SweepOptions opt;
  opt.method = c.cfg.transport_method();
  opt.n_proj = c.cfg.sweep.n_proj;
  opt.crosscheck_n = c.cfg.sweep.crosscheck_n;
  opt.table_path = table.string();
  const std::vector<SweepRow> rows =
      run_sweep(spec, c.cfg.integrator, masses, c.cfg.sampling, opt);
  print_rows(rows, c.out);
  emit_fit(c, rows);

  bool failed = false;
  for (const auto& r : rows) failed = failed || r.status == RowStatus::failed;
  if (failed) c.err << "some masses failed; see the error column of " << table.string() << "\n";
  return failed ? kExitFailed : kExitOk;
}

int cmd_report(Context& c, const std::string& table_arg) {
  const fs::path table = table_arg.empty() ? c.outdir / "sweep.csv" : fs::path(table_arg);
  if (!fs::exists(table)) {
    c.err << "table " << table.string() << " does not exist\n";
    return kExitUsage;
  }
  const std::vector<SweepRow> rows = read_sweep_table(table.string());
  fs::create_directories(c.outdir);
  print_rows(rows, c.out);
  emit_fit(c, rows);
  return kExitOk;
}

// ---- stein ---------------------------------------------------------------

int cmd_stein(Context& c) {
  if (c.cfg.model.dimension != 1) {
    c.err << "stein requires a one-dimensional model (dimension is " << c.cfg.model.dimension
          << "); the Stein solver is implemented for d = 1 only\n";
    return kExitUsage;
  }
  const ModelSpec spec = build_model(c.cfg.model);
  const TestFunction h = build_test_function(c.cfg.stein.h);
  const double spacing = c.cfg.stein.spacing;
  const double half_cells =
      std::ceil(c.cfg.stein.radius.value_or(default_stein_radius(spec)) / spacing - 1e-9);
  const double radius = half_cells * spacing;
  const int n_grid = 2 * static_cast<int>(half_cells);
  const Density1D dens = invariant_density_1d(spec, radius, n_grid);
  const SteinSolution1D sol = solve_stein_1d(spec, dens, h);
  fs::create_directories(c.outdir);
  write_stein_csv((c.outdir / "stein_solution.csv").string(), sol);

  ojson j;
  j["model"] = model_json(spec);
  j["h"] = h.name;
  j["nu_h"] = sol.nu_h;
  j["radius"] = sol.radius;
  j["spacing"] = sol.spacing;
  j["boundary_layer"] = sol.boundary_layer;
  j["derivatives"] = sol.analytic_model_derivatives ? "analytic" : "finite_difference_fallback";
  j["notes"] = ojson::array();
  if (!sol.analytic_model_derivatives)
    j["notes"].push_back(
        "analytic b' and sigma' unavailable: central finite differences with relative step "
        "used for f''' and the generator terms");

  double fp_min = INFINITY, fp_max = -INFINITY;
  for (std::size_t i = 0; i < sol.grid.size(); ++i) {
    if (!sol.in_interior(i)) continue;
    fp_min = std::min(fp_min, sol.fp[i]);
    fp_max = std::max(fp_max, sol.fp[i]);
  }
  j["fp_interior_range"] = {fp_min, fp_max};

  const bool residual_ok = sol.discrete_residual_sup <= kSteinResidualTolerance;
  j["residual"] = {{"algebraic_sup", sol.residual_sup},
                   {"discrete_sup", sol.discrete_residual_sup},
                   {"tolerance", kSteinResidualTolerance},
                   {"passed", residual_ok}};
  j["consistency"] = {{"fpp", sol.fpp_consistency}, {"fppp", sol.fppp_consistency}};

  const GrowthReport growth = verify_regularity_growth(sol);
  j["growth"] = {{"orders", {2, 3, 4, 5}},
                 {"sup_ratio", growth.sup_ratio},
                 {"argmax", growth.argmax},
                 {"interior", growth.interior},
                 {"passed", growth.passed}};
  const DomainStabilityReport domain =
      regularity_domain_stability(spec, h, radius, 1.5, spacing);
  j["domain_stability"] = {{"factor", 1.5},
                           {"extended_sup_ratio", domain.extended.sup_ratio},
                           {"relative_change", domain.relative_change},
                           {"passed", domain.passed}};
  const ModulusRefinementReport modulus =
      hessian_modulus_refinement(spec, h, radius, std::min(spacing, 1.0 / 64.0));
  j["hessian_modulus"] = {{"coarse", modulus.coarse.sup},
                          {"fine", modulus.fine.sup},
                          {"relative_change", modulus.relative_change},
                          {"passed", modulus.passed}};

  c.out << "stein: h = " << h.name << ", nu(h) = " << fmt(sol.nu_h, 10) << ", R = "
        << fmt(sol.radius) << ", spacing = " << fmt(sol.spacing) << "\n";
  if (!sol.analytic_model_derivatives)
    c.out << "  note: finite-difference fallback for b' and sigma'\n";
  c.out << "  f' interior range [" << fmt(fp_min, 12) << ", " << fmt(fp_max, 12) << "]\n";
  c.out << "  residual sup " << fmt(sol.discrete_residual_sup) << " (tolerance "
        << fmt(kSteinResidualTolerance) << ") " << (residual_ok ? "ok" : "FAILED") << "\n";
  c.out << "  growth ratios";
  for (double r : growth.sup_ratio) c.out << " " << fmt(r);
  c.out << " " << (growth.passed ? "ok" : "FAILED") << "\n";
  c.out << "  domain stability " << (domain.passed ? "ok" : "FAILED") << ", hessian modulus "
        << fmt(modulus.fine.sup) << " " << (modulus.passed ? "ok" : "FAILED") << "\n";

  bool passed = residual_ok && growth.passed && domain.passed && modulus.passed;
  j["identities"] = ojson::array();
  std::vector<RemainderReport> remainders;
  SamplingPlan plan = c.cfg.sampling;
  plan.n_samples = c.cfg.stein.n_samples;
  plan.keep_velocities = true;
  for (std::size_t k = 0; k < c.cfg.stein.m_grid.size(); ++k) {
    const double m = c.cfg.stein.m_grid[k];
    if (m > spec.admissible_mass()) {
      c.out << "  identities m = " << fmt(m) << ": skipped, above the admissible mass\n";
      j["notes"].push_back("m = " + fmt(m) + " skipped: above the admissible mass");
      continue;
    }
    IntegratorConfig ic = c.cfg.integrator;
    ic.rng_seed = derive_seed(c.cfg.master_seed, {stream_tag::kStein, k});
    const InvariantSample sample = sample_invariant(spec, ic, m, plan);
    const StationaryIdentityReport sid = stationary_identity_check(sample.measure, sol);
    const RemainderReport rem = stein_remainder_check(sample.measure, sol, m);
    remainders.push_back(rem);
    const bool ok =
        sid.velocity_gradient.passed && sid.gap_phi.passed && rem.gap_remainder.passed;
    passed = passed && ok;
    j["identities"].push_back({{"m", m},
                               {"n", sample.measure.size()},
                               {"velocity_gradient", identity_json(sid.velocity_gradient)},
                               {"gap_phi", identity_json(sid.gap_phi)},
                               {"gap_remainder", identity_json(rem.gap_remainder)},
                               {"passed", ok}});
    c.out << "  identities m = " << std::left << std::setw(10) << fmt(m) << " z(E[Y f']) "
          << std::setw(10) << fmt(sid.velocity_gradient.z, 3) << " z(gap phi) " << std::setw(10)
          << fmt(sid.gap_phi.z, 3) << " z(remainder) " << std::setw(10)
          << fmt(rem.gap_remainder.z, 3) << (ok ? "ok" : "FAILED") << "\n";
  }
  if (remainders.size() >= 2) {
    try {
      const RemainderScaling s = fit_remainder_scaling(remainders);
      j["remainder_scaling"] = {{"slope", s.slope}, {"slope_se", s.slope_se}};
      c.out << "  remainder slope " << fmt(s.slope, 4) << " +- " << fmt(s.slope_se, 3) << "\n";
    } catch (const ArgumentError& e) {
      j["remainder_scaling"] = {{"skipped", e.what()}};
    }
  }
  j["passed"] = passed;
  write_json(c.outdir / "stein_report.json", j);
  c.out << (passed ? "stein checks passed" : "stein checks FAILED") << "\n";
  return passed ? kExitOk : kExitFailed;
}

// ---- simulate ------------------------------------------------------------

int cmd_simulate(Context& c) {
  const ModelSpec spec = build_model(c.cfg.model);
  const auto& s = c.cfg.simulate;
  const auto d = static_cast<std::size_t>(spec.dimension());
  std::vector<double> x0 = s.x0.empty() ? std::vector<double>(d, 0.0) : s.x0;
  IntegratorConfig ic = c.cfg.integrator;
  PathSample path;
  if (s.m) {
    if (!is_kinetic(ic.scheme)) {
      c.err << "simulate.m is set but the integrator scheme is limit_euler\n";
      return kExitUsage;
    }
    KineticState st{x0, s.y0.empty() ? std::vector<double>(d, 0.0) : s.y0, *s.m};
    path = simulate_path(spec, ic, st, s.t_end, s.record_stride);
  } else {
    ic.scheme = Scheme::limit_euler;
    path = simulate_path(spec, ic, LimitState{x0}, s.t_end, s.record_stride);
  }
  fs::create_directories(c.outdir);
  write_path_csv((c.outdir / "path.csv").string(), path);

  ojson j;
  j["model"] = model_json(spec);
  j["config"] = ojson::parse(serialize_config(c.cfg));
  j["seed"] = {{"master_seed", path.seed.master_seed},
               {"chain", path.seed.chain},
               {"scheme", to_string(path.seed.scheme)},
               {"dt", path.seed.dt}};
  j["kinetic"] = path.kinetic;
  j["m"] = path.m;
  j["rows"] = path.size();
  j["fingerprint"] = spec.fingerprint();
  write_json(c.outdir / "path.json", j);
  c.out << "wrote " << path.size() << " states to " << (c.outdir / "path.csv").string() << "\n";
  return kExitOk;
}

}  // namespace

void write_path_csv(const std::string& path, const PathSample& p) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  const int d = p.dimension;
  out << "t";
  for (int i = 1; i <= d; ++i) out << ",x_" << i;
  if (p.kinetic)
    for (int i = 1; i <= d; ++i) out << ",y_" << i;
  out << "\n" << std::setprecision(17);
  for (std::size_t r = 0; r < p.size(); ++r) {
    out << p.times[r];
    for (int i = 0; i < d; ++i) out << ',' << p.positions[r * d + i];
    if (p.kinetic)
      for (int i = 0; i < d; ++i) out << ',' << p.velocities[r * d + i];
    out << '\n';
  }
  if (!out) throw ArgumentError("failed writing '" + path + "'");
}

std::string sweep_plot_data(std::span<const SweepRow> rows) {
  std::ostringstream o;
  o << "# log_m log_w1 log_w1_low log_w1_high\n" << std::setprecision(10);
  for (const auto& r : rows) {
    if (r.status == RowStatus::failed || !(r.w1_value > 0.0)) {
      o << "# m=" << r.m << " omitted: " << (r.status == RowStatus::failed ? "failed" : "w1 <= 0")
        << "\n";
      continue;
    }
    const double lo = r.w1_value - 1.96 * r.w1_stderr;
    o << std::log(r.m) << ' ' << std::log(r.w1_value) << ' ';
    if (lo > 0.0)
      o << std::log(lo);
    else
      o << "nan";
    o << ' ' << std::log(r.w1_value + 1.96 * r.w1_stderr) << '\n';
  }
  return o.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Small-mass kinetic Langevin experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  std::uint64_t seed = 0;
  std::string outdir_flag, config_path, table_path;
  app.add_option("--threads", threads, "worker threads (default: hardware parallelism)")
      ->check(CLI::Range(1, 4096));
  app.add_option("--seed", seed, "override master_seed");
  app.add_option("--output-dir", outdir_flag, "override the output directory");

  auto* validate = app.add_subcommand("validate", "check the declared model assumptions");
  auto* sweep = app.add_subcommand("sweep", "W1 mass sweep and rate fit");
  auto* stein = app.add_subcommand("stein", "1D Stein solution and identity report");
  auto* simulate = app.add_subcommand("simulate", "dump a single path");
  auto* report = app.add_subcommand("report", "refit an existing sweep table");
  for (auto* sub : {validate, sweep, stein, simulate, report})
    sub->add_option("config", config_path, "JSON experiment configuration")->required();
  report->add_option("--table", table_path, "sweep table (default: <output>/sweep.csv)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    ExperimentConfig cfg = load_config(config_path);
    if (app.count("--seed")) cfg.set_seed(seed);
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) cfg.output_dir = env;
    if (!outdir_flag.empty()) cfg.output_dir = outdir_flag;
    if (threads > 0) set_default_threads(threads);

    Context c{cfg, fs::path(cfg.output_dir), out, err};
    if (*validate) return cmd_validate(c);
    if (*sweep) return cmd_sweep(c);
    if (*stein) return cmd_stein(c);
    if (*simulate) return cmd_simulate(c);
    return cmd_report(c, table_path);
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailed;
  }
}

}  // namespace kramers

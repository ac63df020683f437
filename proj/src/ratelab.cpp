#include "kramers/ratelab.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "kramers/errors.hpp"
#include "kramers/rng.hpp"
#include "kramers/stats.hpp"
#include "kramers/stein1d.hpp"

namespace kramers {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string row_key(double m, std::uint64_t seed) {
  return format_double(m) + "/" + std::to_string(seed);
}

// Draws from nu: exact inverse-CDF samples in 1D, limit chains otherwise.
class NuSampler {
 public:
  NuSampler(const ModelSpec& spec, const IntegratorConfig& cfg, const SamplingPlan& plan)
      : spec_(spec), cfg_(cfg), plan_(plan) {
    if (spec.dimension() == 1) density_ = invariant_density_1d(spec);
    cfg_.scheme = Scheme::limit_euler;
    plan_.keep_velocities = false;
  }
  EmpiricalMeasure draw(std::size_t n, std::uint64_t seed) const {
    if (density_) return sample_density_1d(*density_, n, seed);
    IntegratorConfig c = cfg_;
    c.rng_seed = seed;
    SamplingPlan p = plan_;
    p.n_samples = n;
    return sample_invariant(spec_, c, std::nullopt, p).measure;
  }

 private:
  const ModelSpec& spec_;
  IntegratorConfig cfg_;
  SamplingPlan plan_;
  std::optional<Density1D> density_;
};

TransportResult distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                         TransportMethod method, std::span<const double> directions) {
  switch (method) {
    case TransportMethod::sorted_1d:
      return w1_sorted_1d(a, b);
    case TransportMethod::assignment_lp:
      return w1_assignment_exact(a, b);
    case TransportMethod::sliced:
      return w1_sliced_directions(a, b, directions);
  }
  throw ArgumentError("unknown transport method");
}

SweepRow sweep_point(const ModelSpec& spec, const IntegratorConfig& cfg, double m,
                     const SamplingPlan& plan, const SweepOptions& options,
                     const NuSampler& nu_sampler, std::uint64_t seed) {
  const int d = spec.dimension();
  SweepRow row;
  row.m = m;
  row.seed = seed;
  row.method = options.method.value_or(d == 1 ? TransportMethod::sorted_1d : TransportMethod::sliced);
  if (row.method == TransportMethod::sorted_1d && d != 1)
    throw ArgumentError("sorted_1d needs a one-dimensional model");

  IntegratorConfig kc = cfg;
  kc.rng_seed = derive_seed(seed, {stream_tag::kKinetic});
  SamplingPlan kp = plan;
  kp.keep_velocities = false;
  auto kinetic = sample_invariant(spec, kc, m, kp);
  const auto& pi = kinetic.measure;
  const std::size_t n = pi.size();
  auto nu = nu_sampler.draw(n, derive_seed(seed, {stream_tag::kLimit, 0}));
  auto nu2 = nu_sampler.draw(n, derive_seed(seed, {stream_tag::kLimit, 1}));

  std::vector<double> dirs;
  if (row.method == TransportMethod::sliced)
    dirs = sliced_directions(d, options.n_proj, derive_seed(seed, {stream_tag::kTransport}));
  auto raw = distance(pi, nu, row.method, dirs);
  auto base = distance(nu2, nu, row.method, dirs);
  row.w1_raw = raw.value;
  row.self_baseline = base.value;
  row.w1_value = std::max(raw.value - base.value, 0.0);
  row.n_samples = n;
  if (row.method == TransportMethod::sliced) {
    // Paired over the shared directions.
    std::vector<double> diff(raw.per_direction.size());
    for (std::size_t k = 0; k < diff.size(); ++k)
      diff[k] = raw.per_direction[k] - base.per_direction[k];
    row.w1_stderr = diff.size() > 1 ? std::sqrt(stats::variance(diff) / diff.size()) : 0.0;
  } else {
    const double a = raw.std_error.value_or(0.0), b = base.std_error.value_or(0.0);
    row.w1_stderr = std::sqrt(a * a + b * b);
  }
  if (d > 1 && options.crosscheck_n > 0) {
    const std::size_t k = std::min(options.crosscheck_n, n);
    auto ts = thin_measure(pi, k), tn = thin_measure(nu, k), tn2 = thin_measure(nu2, k);
    row.crosscheck = w1_assignment_exact(ts, tn, std::max(k, kDefaultAssignmentCap)).value;
    row.crosscheck_baseline = w1_assignment_exact(tn2, tn, std::max(k, kDefaultAssignmentCap)).value;
  }
  row.status = kinetic.measure.provenance().truncated ? RowStatus::truncated : RowStatus::ok;
  return row;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ArgumentError("sweep table: bad " + what + " '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ArgumentError("sweep table: bad " + what + " '" + s + "'");
  }
}

}  // namespace

std::string to_string(RowStatus s) {
  switch (s) {
    case RowStatus::ok:
      return "ok";
    case RowStatus::truncated:
      return "truncated";
    case RowStatus::failed:
      return "failed";
  }
  return "unknown";
}

RowStatus row_status_from_string(const std::string& s) {
  if (s == "ok") return RowStatus::ok;
  if (s == "truncated") return RowStatus::truncated;
  if (s == "failed") return RowStatus::failed;
  throw ArgumentError("unknown row status '" + s + "'");
}

double theorem_mass_limit(const ModelSpec& spec) {
  return std::min(spec.admissible_mass(), std::exp(-1.0));
}

std::uint64_t sweep_seed(std::uint64_t master, double m) {
  return derive_seed(master, {stream_tag::kSweep, std::bit_cast<std::uint64_t>(m)});
}

std::string sweep_csv_header() {
  return "m,w1,stderr,baseline,raw,n,method,seed,status,crosscheck,crosscheck_baseline,error";
}

std::string sweep_csv_line(const SweepRow& r) {
  std::string s = format_double(r.m) + ',' + format_double(r.w1_value) + ',' +
                  format_double(r.w1_stderr) + ',' + format_double(r.self_baseline) + ',' +
                  format_double(r.w1_raw) + ',' + std::to_string(r.n_samples) + ',' +
                  to_string(r.method) + ',' + std::to_string(r.seed) + ',' + to_string(r.status) + ',';
  if (r.crosscheck) s += format_double(*r.crosscheck);
  s += ',';
  if (r.crosscheck_baseline) s += format_double(*r.crosscheck_baseline);
  s += ',' + sanitize(r.error);
  return s;
}

std::vector<SweepRow> read_sweep_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot read sweep table '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != sweep_csv_header())
    throw ArgumentError("sweep table '" + path + "' has an unexpected header");
  std::vector<SweepRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 12)
      throw ArgumentError("sweep table '" + path + "' line " + std::to_string(lineno) +
                          ": expected 12 fields");
    SweepRow r;
    r.m = parse_double(f[0], "m");
    r.w1_value = parse_double(f[1], "w1");
    r.w1_stderr = parse_double(f[2], "stderr");
    r.self_baseline = parse_double(f[3], "baseline");
    r.w1_raw = parse_double(f[4], "raw");
    r.n_samples = parse_u64(f[5], "n");
    r.method = transport_method_from_string(f[6]);
    r.seed = parse_u64(f[7], "seed");
    r.status = row_status_from_string(f[8]);
    if (!f[9].empty()) r.crosscheck = parse_double(f[9], "crosscheck");
    if (!f[10].empty()) r.crosscheck_baseline = parse_double(f[10], "crosscheck_baseline");
    r.error = f[11];
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_sweep_table(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write sweep table '" + path + "'");
  out << sweep_csv_header() << '\n';
  for (const auto& r : rows) out << sweep_csv_line(r) << '\n';
  if (!out) throw ArgumentError("failed writing sweep table '" + path + "'");
}

std::vector<SweepRow> run_sweep(const ModelSpec& spec, const IntegratorConfig& cfg,
                                std::span<const double> m_grid, const SamplingPlan& plan,
                                const SweepOptions& options) {
  if (m_grid.empty()) throw ArgumentError("sweep needs a non-empty mass grid");
  cfg.validate();
  const double limit = theorem_mass_limit(spec);
  for (double m : m_grid) {
    if (!(m > 0.0) || !std::isfinite(m)) throw ArgumentError("masses must be positive");
    if (m > limit)
      throw PreconditionError("mass " + format_double(m) + " exceeds the rate range " +
                              format_double(limit));
  }

  std::map<std::string, SweepRow> existing;
  const bool persist = !options.table_path.empty();
  if (persist) {
    if (std::ifstream probe(options.table_path); probe.good()) {
      for (auto& r : read_sweep_table(options.table_path)) existing[row_key(r.m, r.seed)] = r;
    } else {
      std::ofstream out(options.table_path);
      if (!out) throw ArgumentError("cannot create sweep table '" + options.table_path + "'");
      out << sweep_csv_header() << '\n';
    }
  }

  NuSampler nu_sampler(spec, cfg, plan);
  std::vector<SweepRow> rows;
  for (double m : m_grid) {
    const std::uint64_t seed = sweep_seed(cfg.rng_seed, m);
    if (auto it = existing.find(row_key(m, seed)); it != existing.end()) {
      rows.push_back(it->second);
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    SweepRow row;
    try {
      row = sweep_point(spec, cfg, m, plan, options, nu_sampler, seed);
    } catch (const std::exception& e) {
      row = SweepRow{};
      row.m = m;
      row.seed = seed;
      row.method = options.method.value_or(spec.dimension() == 1 ? TransportMethod::sorted_1d
                                                                 : TransportMethod::sliced);
      row.status = RowStatus::failed;
      row.error = e.what();
    }
    row.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (persist) {
      std::ofstream out(options.table_path, std::ios::app);
      out << sweep_csv_line(row) << '\n';
      out.flush();
      if (!out) throw ArgumentError("failed appending to '" + options.table_path + "'");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- Rate fit -------------------------------------------------------------

RateFitResult fit_rate(std::span<const SweepRow> rows, bool with_log_correction,
                       const FitOptions& options) {
  if (options.n_boot < 10) throw ArgumentError("bootstrap needs at least 10 resamples");
  std::vector<const SweepRow*> usable;
  for (const auto& r : rows)
    if (r.status != RowStatus::failed && std::isfinite(r.w1_value) && r.m > 0.0) usable.push_back(&r);
  if (usable.size() < 4)
    throw ArgumentError("rate fit needs at least 4 sweep rows, got " + std::to_string(usable.size()));

  RateFitResult out;
  out.n_boot = options.n_boot;
  std::vector<const SweepRow*> pos;
  for (const auto* r : usable)
    if (r->w1_value > 0.0) pos.push_back(r);
  out.n_rows = pos.size();
  for (const auto* r : pos) {
    out.masses.push_back(r->m);
    out.values.push_back(r->w1_value);
    out.stderrs.push_back(r->w1_stderr);
  }
  if (pos.size() < 4) {
    out.verdict = "indistinguishable_from_zero";
    return out;
  }

  const std::size_t k = with_log_correction ? 3 : 2;
  const std::size_t n = pos.size();
  std::vector<double> design, y(n), w(n), rel(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = pos[i]->m;
    if (with_log_correction && !(m < 1.0))
      throw ArgumentError("log correction needs m < 1");
    design.push_back(1.0);
    design.push_back(std::log(m));
    if (with_log_correction) design.push_back(std::log(std::abs(std::log(m))));
    y[i] = std::log(pos[i]->w1_value);
    rel[i] = std::max(pos[i]->w1_stderr / pos[i]->w1_value, 1e-6);
    w[i] = 1.0 / (rel[i] * rel[i]);
  }
  auto fit = stats::weighted_least_squares(design, k, y, w, false);
  out.intercept = fit.coef[0];
  out.alpha = fit.coef[1];
  out.alpha_se = std::sqrt(fit.cov[k + 1] * std::max(1.0, fit.residual_variance));
  if (with_log_correction) out.gamma = fit.coef[2];
  out.residuals = fit.residuals;
  out.residual_variance = fit.residual_variance;

  std::vector<double> fitted(n), scale(n);
  for (std::size_t i = 0; i < n; ++i) {
    fitted[i] = y[i] - fit.residuals[i];
    scale[i] = std::max(std::abs(fit.residuals[i]), rel[i]);
  }
  Rng rng(derive_seed(options.seed, {stream_tag::kBootstrap}));
  std::vector<double> alphas, gammas, yb(n);
  alphas.reserve(options.n_boot);
  for (int b = 0; b < options.n_boot; ++b) {
    for (std::size_t i = 0; i < n; ++i) yb[i] = fitted[i] + scale[i] * rng.normal();
    auto f = stats::weighted_least_squares(design, k, yb, w, false);
    alphas.push_back(f.coef[1]);
    if (with_log_correction) gammas.push_back(f.coef[2]);
  }
  std::sort(alphas.begin(), alphas.end());
  out.alpha_ci_low = stats::sorted_quantile(alphas, 0.025);
  out.alpha_ci_high = stats::sorted_quantile(alphas, 0.975);
  if (with_log_correction) {
    std::sort(gammas.begin(), gammas.end());
    out.gamma_ci_low = stats::sorted_quantile(gammas, 0.025);
    out.gamma_ci_high = stats::sorted_quantile(gammas, 0.975);
  }
  return out;
}

// ---- Null case --------------------------------------------------------------

NullCaseResult null_case_check(const ModelSpec& spec, const IntegratorConfig& cfg, double m,
                               std::size_t n, const NullCaseOptions& options) {
  if (!spec.constant_diffusion())
    throw PreconditionError("null case needs a constant diffusion coefficient");
  if (!spec.gradient_drift()) throw PreconditionError("null case needs a gradient drift");
  if (options.baselines < 2) throw ArgumentError("null case needs at least two baselines");
  if (n < 2) throw ArgumentError("null case needs at least two samples");

  SamplingPlan plan;
  plan.n_samples = n;
  plan.n_chains = options.n_chains;
  plan.thinning = options.thinning.value_or(4.0 / spec.constants().dissipative_c2);
  plan.keep_velocities = false;

  NullCaseResult r;
  r.m = m;
  const int d = spec.dimension();
  r.method = d == 1 ? TransportMethod::sorted_1d
                    : (n <= kDefaultAssignmentCap ? TransportMethod::assignment_lp
                                                  : TransportMethod::sliced);
  std::vector<double> dirs;
  if (r.method == TransportMethod::sliced)
    dirs = sliced_directions(d, 128, derive_seed(cfg.rng_seed, {stream_tag::kTransport}));

  IntegratorConfig kc = cfg;
  kc.rng_seed = derive_seed(cfg.rng_seed, {stream_tag::kKinetic});
  auto pi = sample_invariant(spec, kc, m, plan).measure;
  NuSampler nu_sampler(spec, cfg, plan);
  const std::size_t size = pi.size();
  auto nu = nu_sampler.draw(size, derive_seed(cfg.rng_seed, {stream_tag::kBaseline, 0}));
  r.raw = distance(pi, nu, r.method, dirs).value;
  for (int k = 0; k < options.baselines; ++k) {
    auto other = nu_sampler.draw(size, derive_seed(cfg.rng_seed, {stream_tag::kBaseline,
                                                                  static_cast<std::uint64_t>(k + 1)}));
    r.baselines.push_back(distance(other, nu, r.method, dirs).value);
  }
  r.mean_baseline = stats::mean(r.baselines);
  const double K = static_cast<double>(r.baselines.size());
  r.se = std::sqrt(stats::variance(r.baselines) * (1.0 + 1.0 / K));
  r.statistic = r.se > 0.0 ? (r.raw - r.mean_baseline) / r.se : 0.0;
  r.passed = r.raw - r.mean_baseline <= 4.0 * r.se;
  return r;
}

}  // namespace kramers

#include "kramers/ergodic.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "kramers/errors.hpp"
#include "kramers/parallel.hpp"
#include "kramers/rng.hpp"

namespace kramers {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

void require_admissible(const ModelSpec& spec, double m) {
  if (!(m > 0.0) || !std::isfinite(m)) throw ArgumentError("mass must be positive");
  const double bound = spec.admissible_mass();
  if (m > bound * (1.0 + 1e-12)) {
    throw PreconditionError("mass " + std::to_string(m) +
                            " exceeds the admissible range min{c2/(2 Lb), 2/c2, 1} = " +
                            std::to_string(bound));
  }
}

std::vector<double> segment(std::span<const double> values,
                            const std::vector<std::size_t>& chains, int block,
                            int blocks, std::vector<std::size_t>& lengths) {
  std::vector<double> out;
  lengths.clear();
  std::size_t offset = 0;
  for (std::size_t len : chains) {
    const std::size_t lo = len * block / blocks, hi = len * (block + 1) / blocks;
    out.insert(out.end(), values.begin() + offset + lo, values.begin() + offset + hi);
    lengths.push_back(hi - lo);
    offset += len;
  }
  return out;
}

}  // namespace

// ---- EmpiricalMeasure ---------------------------------------------------

EmpiricalMeasure::EmpiricalMeasure(int dimension, std::vector<double> positions,
                                   std::vector<double> velocities,
                                   std::vector<std::size_t> chain_lengths,
                                   MeasureProvenance provenance)
    : dimension_(dimension),
      positions_(std::move(positions)),
      velocities_(std::move(velocities)),
      chain_lengths_(std::move(chain_lengths)),
      provenance_(std::move(provenance)) {
  if (dimension_ < 1) throw ArgumentError("measure dimension must be >= 1");
  if (positions_.empty() || positions_.size() % dimension_ != 0)
    throw ArgumentError("measure needs at least one complete sample");
  if (!velocities_.empty() && velocities_.size() != positions_.size())
    throw ArgumentError("velocities must pair with positions");
  for (double v : positions_)
    if (!std::isfinite(v)) throw ArgumentError("non-finite position sample");
  for (double v : velocities_)
    if (!std::isfinite(v)) throw ArgumentError("non-finite velocity sample");
  const std::size_t n = size();
  chain_lengths_.erase(std::remove(chain_lengths_.begin(), chain_lengths_.end(), 0u),
                       chain_lengths_.end());
  if (chain_lengths_.empty()) chain_lengths_.push_back(n);
  if (std::accumulate(chain_lengths_.begin(), chain_lengths_.end(), std::size_t{0}) != n)
    throw ArgumentError("chain lengths do not add up to the sample count");
}

std::vector<double> EmpiricalMeasure::coordinate(int k) const {
  if (k < 0 || k >= dimension_) throw ArgumentError("coordinate index out of range");
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = positions_[i * dimension_ + k];
  return out;
}

// ---- Stationarity -------------------------------------------------------

StationarityReport stationarity_report(const EmpiricalMeasure& measure) {
  StationarityReport rep;
  rep.truncated = measure.provenance().truncated;
  const std::size_t n = measure.size();
  const double m = measure.provenance().limit ? 0.0 : measure.provenance().m;
  const bool vel = measure.has_velocities();
  std::vector<double> x2(n), my2(n, 0.0), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = measure.position(i);
    x2[i] = norm2(x);
    if (vel && m > 0.0) {
      auto y = measure.velocity(i);
      double xy = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) xy += x[k] * y[k];
      my2[i] = m * m * norm2(y);
      v[i] = 2.0 * x2[i] + 6.0 * my2[i] + 4.0 * m * xy;
    } else {
      v[i] = 2.0 * x2[i];
    }
  }
  const auto& chains = measure.chain_lengths();
  const std::size_t shortest = *std::min_element(chains.begin(), chains.end());
  if (shortest < static_cast<std::size_t>(2 * kStationarityBlocks)) {
    rep.insufficient_data = true;
    rep.stationary = false;
    rep.message = "insufficient data: every chain needs at least " +
                  std::to_string(2 * kStationarityBlocks) + " samples";
  } else {
    std::vector<std::size_t> lens;
    for (int b = 0; b < kStationarityBlocks; ++b) {
      BlockStatistics bs;
      auto sx = segment(x2, chains, b, kStationarityBlocks, lens);
      auto sy = segment(my2, chains, b, kStationarityBlocks, lens);
      auto sv = segment(v, chains, b, kStationarityBlocks, lens);
      bs.n = sv.size();
      bs.mean_x2 = stats::mean(sx);
      bs.var_x2 = stats::variance(sx);
      bs.mean_my2 = stats::mean(sy);
      bs.var_my2 = stats::variance(sy);
      auto est = stats::estimate_mean(sv, lens);
      bs.mean_v = est.mean;
      bs.var_v = stats::variance(sv);
      bs.se_v = est.se;
      rep.blocks.push_back(bs);
    }
    const auto& last = rep.blocks.back();
    for (std::size_t b = 0; b + 1 < rep.blocks.size(); ++b) {
      const auto& blk = rep.blocks[b];
      const double se = std::hypot(blk.se_v, last.se_v);
      const double diff = std::abs(blk.mean_v - last.mean_v);
      const double z = se > 0.0 ? diff / se : (diff > 0.0 ? INFINITY : 0.0);
      rep.max_block_discrepancy = std::max(rep.max_block_discrepancy, z);
    }
    if (rep.max_block_discrepancy > kStationarityThreshold) {
      rep.stationary = false;
      rep.message = "trailing block means of V differ by " +
                    std::to_string(rep.max_block_discrepancy) + " combined standard errors";
    }
  }
  if (n >= 2) {
    rep.lag1_autocorrelation = stats::autocorrelation(x2, chains, 1);
    const double dt = measure.provenance().thinning;
    if (rep.lag1_autocorrelation <= 0.0) {
      rep.decay_rate = std::numeric_limits<double>::infinity();
    } else if (dt > 0.0 && rep.lag1_autocorrelation < 1.0) {
      rep.decay_rate = -std::log(rep.lag1_autocorrelation) / dt;
    } else {
      rep.decay_rate = 0.0;
    }
  }
  return rep;
}

// ---- Sampling -----------------------------------------------------------

double default_burn_in(const ModelSpec& spec, std::optional<double> mass) {
  const double c2 = spec.constants().dissipative_c2;
  if (!mass) return 20.0 / c2;
  return 20.0 * std::max(1.0 / c2, *mass);
}

double default_thinning(const ModelSpec& spec) {
  return 1.0 / spec.constants().dissipative_c2;
}

InvariantSample sample_invariant(const ModelSpec& spec, const IntegratorConfig& cfg_in,
                                 std::optional<double> mass, const SamplingPlan& plan) {
  cfg_in.validate();
  IntegratorConfig cfg = cfg_in;
  if (mass) {
    if (!is_kinetic(cfg.scheme))
      throw ArgumentError("a kinetic sample needs a kinetic scheme");
    require_admissible(spec, *mass);
  } else {
    cfg.scheme = Scheme::limit_euler;
  }
  if (plan.n_samples < 1) throw ArgumentError("n_samples must be >= 1");
  if (plan.n_chains < 1) throw ArgumentError("n_chains must be >= 1");
  const double burn_in = plan.burn_in.value_or(default_burn_in(spec, mass));
  const double thinning = plan.thinning.value_or(default_thinning(spec));
  if (!(burn_in > 0.0) || !(thinning > 0.0))
    throw ArgumentError("burn-in and thinning must be positive");

  const int d = spec.dimension();
  const double m = mass.value_or(0.0);
  const double dt_target = mass ? cfg.kinetic_dt(m) : cfg.dt_max;
  const auto steps_per_sample =
      static_cast<std::uint64_t>(std::ceil(thinning / dt_target - 1e-9));
  const double dt = thinning / static_cast<double>(steps_per_sample);
  const auto burn_steps = static_cast<std::uint64_t>(std::ceil(burn_in / dt - 1e-9));
  const bool keep_vel = mass.has_value() && plan.keep_velocities;

  const std::size_t chains = std::min<std::size_t>(plan.n_chains, plan.n_samples);
  std::vector<std::vector<double>> pos(chains), vel(chains);
  std::atomic<bool> stop{false};
  const auto start_time = std::chrono::steady_clock::now();
  auto over_budget = [&]() {
    if (plan.wallclock_cap_seconds <= 0.0) return false;
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return elapsed > plan.wallclock_cap_seconds;
  };

  parallel_for(chains, [&](std::size_t c) {
    const std::size_t want = plan.n_samples / chains + (c < plan.n_samples % chains ? 1 : 0);
    Rng start_rng(derive_seed(cfg.rng_seed, {stream_tag::kStart, c}));
    std::vector<double> x(d), y(d, 0.0);
    for (auto& v : x) v = 2.0 * start_rng.normal();
    if (mass)
      for (auto& v : y) v = 2.0 / std::sqrt(m) * start_rng.normal();
    ChainRunner runner(spec, cfg, mass ? m : 1.0, dt, cfg.rng_seed, c);
    pos[c].reserve(want * d);
    if (keep_vel) vel[c].reserve(want * d);
    try {
      runner.advance(x, y, burn_steps);
      for (std::size_t k = 0; k < want; ++k) {
        if (stop.load(std::memory_order_relaxed)) break;
        runner.advance(x, y, steps_per_sample);
        pos[c].insert(pos[c].end(), x.begin(), x.end());
        if (keep_vel) vel[c].insert(vel[c].end(), y.begin(), y.end());
        if (over_budget()) stop.store(true);
      }
    } catch (const BlowUpError& e) {
      throw BlowUpError(std::string(e.what()) + " in chain " + std::to_string(c) +
                            " (seed " + std::to_string(cfg.rng_seed) + ")",
                        e.time(), e.step());
    }
  });

  std::vector<double> positions, velocities;
  std::vector<std::size_t> lengths;
  for (std::size_t c = 0; c < chains; ++c) {
    positions.insert(positions.end(), pos[c].begin(), pos[c].end());
    velocities.insert(velocities.end(), vel[c].begin(), vel[c].end());
    lengths.push_back(pos[c].size() / d);
  }
  if (positions.empty())
    throw ArgumentError("wallclock cap reached before the first sample was recorded");

  MeasureProvenance prov;
  prov.spec_fingerprint = spec.fingerprint();
  prov.limit = !mass.has_value();
  prov.m = m;
  prov.seed = cfg.rng_seed;
  prov.burn_in = static_cast<double>(burn_steps) * dt;
  prov.thinning = thinning;
  prov.dt = dt;
  prov.n_chains = static_cast<int>(chains);
  prov.truncated = stop.load();
  prov.source = to_string(cfg.scheme);
  EmpiricalMeasure measure(d, std::move(positions), std::move(velocities), lengths, prov);
  auto report = stationarity_report(measure);
  return InvariantSample{std::move(measure), std::move(report)};
}

// ---- Moments ------------------------------------------------------------

namespace {

stats::MeanEstimate norm_moment(const EmpiricalMeasure& measure, int p, bool velocity) {
  if (p < 1) throw ArgumentError("moment order must be positive");
  const std::size_t n = measure.size();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r2 = norm2(velocity ? measure.velocity(i) : measure.position(i));
    v[i] = (p % 2 == 0) ? std::pow(r2, p / 2) : std::pow(std::sqrt(r2), p);
  }
  return stats::estimate_mean(v, measure.chain_lengths());
}

}  // namespace

stats::MeanEstimate position_moment(const EmpiricalMeasure& measure, int p) {
  return norm_moment(measure, p, false);
}

stats::MeanEstimate velocity_moment(const EmpiricalMeasure& measure, int p) {
  if (!measure.has_velocities())
    throw PreconditionError("velocity moments need a measure with velocities");
  return norm_moment(measure, p, true);
}

ScalingFit fit_velocity_moment_scaling(std::span<const EmpiricalMeasure> measures, int p) {
  if (p < 2 || p % 2 != 0) throw ArgumentError("moment order must be a positive even integer");
  if (measures.size() < 3)
    throw ArgumentError("degenerate regression: need at least 3 grid points");
  ScalingFit fit;
  std::vector<double> design, y, w;
  for (const auto& mu : measures) {
    if (!mu.has_velocities() || mu.provenance().limit)
      throw PreconditionError("velocity moment scaling needs kinetic samples with velocities");
    const double m = mu.provenance().m;
    if (!(m > 0.0)) throw ArgumentError("measure provenance carries no mass");
    auto est = velocity_moment(mu, p);
    if (!(est.mean > 0.0)) throw ArgumentError("velocity moment is not positive");
    fit.masses.push_back(m);
    fit.moments.push_back(est.mean);
    fit.moment_se.push_back(est.se);
    design.push_back(1.0);
    design.push_back(std::log(m));
    y.push_back(std::log(est.mean));
    const double rel = est.se / est.mean;
    w.push_back(rel > 0.0 ? 1.0 / (rel * rel) : 1.0);
  }
  auto ls = stats::weighted_least_squares(design, 2, y, w, false);
  fit.intercept = ls.coef[0];
  fit.slope = ls.coef[1];
  // Take the larger of the model-based and residual-based errors.
  double var = ls.cov[3] * std::max(1.0, ls.residual_variance);
  fit.slope_se = std::sqrt(var);
  fit.ci_low = fit.slope - 1.96 * fit.slope_se;
  fit.ci_high = fit.slope + 1.96 * fit.slope_se;
  return fit;
}

ScalingFit moment_scaling_check(const ModelSpec& spec, const IntegratorConfig& cfg,
                                std::span<const double> m_grid, int p,
                                const SamplingPlan& plan) {
  if (p < 2 || p % 2 != 0) throw ArgumentError("moment order must be a positive even integer");
  if (m_grid.size() < 3)
    throw ArgumentError("degenerate regression: need at least 3 grid points");
  std::vector<EmpiricalMeasure> measures;
  SamplingPlan pl = plan;
  pl.keep_velocities = true;
  for (std::size_t i = 0; i < m_grid.size(); ++i) {
    IntegratorConfig c = cfg;
    c.rng_seed = derive_seed(cfg.rng_seed, {stream_tag::kKinetic, i});
    measures.push_back(sample_invariant(spec, c, m_grid[i], pl).measure);
  }
  return fit_velocity_moment_scaling(measures, p);
}

// ---- Increments ---------------------------------------------------------

IncrementReport increment_moments_from(const ModelSpec& spec, const IntegratorConfig& cfg,
                                       const EmpiricalMeasure& starts,
                                       std::span<const double> t_grid, int p) {
  cfg.validate();
  if (!is_kinetic(cfg.scheme)) throw ArgumentError("increments need a kinetic scheme");
  if (!starts.has_velocities() || starts.provenance().limit)
    throw PreconditionError("increment checks need kinetic start points with velocities");
  if (p < 1) throw ArgumentError("moment order must be positive");
  if (t_grid.empty()) throw ArgumentError("t_grid is empty");
  std::vector<double> times(t_grid.begin(), t_grid.end());
  for (double t : times)
    if (!(t > 0.0 && t <= 1.0)) throw ArgumentError("increment times must lie in (0, 1]");
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const double m = starts.provenance().m;
  const int d = spec.dimension();
  const std::size_t n = starts.size();
  const std::size_t nt = times.size();

  // Segment step sizes so every grid time is hit exactly.
  std::vector<double> seg_dt(nt);
  std::vector<std::uint64_t> seg_steps(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    const double span = times[k] - (k ? times[k - 1] : 0.0);
    seg_steps[k] = static_cast<std::uint64_t>(std::ceil(span / cfg.kinetic_dt(m) - 1e-9));
    seg_dt[k] = span / static_cast<double>(seg_steps[k]);
  }

  std::vector<double> inc(n * nt), loginc(n * nt);
  parallel_for(n, [&](std::size_t i) {
    auto x0 = starts.position(i);
    std::vector<double> x(x0.begin(), x0.end());
    auto yv = starts.velocity(i);
    std::vector<double> y(yv.begin(), yv.end());
    const std::uint64_t seed = derive_seed(cfg.rng_seed, {stream_tag::kIncrement, i});
    for (std::size_t k = 0; k < nt; ++k) {
      ChainRunner runner(spec, cfg, m, seg_dt[k], seed, k);
      runner.advance(x, y, seg_steps[k]);
      double r2 = 0.0;
      for (int j = 0; j < d; ++j) r2 += (x[j] - x0[j]) * (x[j] - x0[j]);
      const double r = std::sqrt(r2);
      const double rp = std::pow(r, p);
      inc[k * n + i] = rp;
      loginc[k * n + i] = r > 0.0 ? rp * std::pow(std::abs(std::log(r)), p) : 0.0;
    }
  });

  IncrementReport rep;
  rep.m = m;
  rep.p = p;
  double lo = INFINITY, hi = 0.0, llo = INFINITY, lhi = 0.0;
  for (std::size_t k = 0; k < nt; ++k) {
    IncrementRow row;
    row.t = times[k];
    std::span<const double> a(inc.data() + k * n, n), b(loginc.data() + k * n, n);
    row.moment = stats::estimate_mean(a, starts.chain_lengths());
    row.log_moment = stats::estimate_mean(b, starts.chain_lengths());
    const double scale = std::pow(row.t, p / 2.0) + std::pow(m, p / 2.0);
    row.ratio = row.moment.mean / scale;
    row.log_ratio =
        row.log_moment.mean / (scale * (std::pow(std::abs(std::log(row.t + m)), p) + 1.0));
    lo = std::min(lo, row.ratio);
    hi = std::max(hi, row.ratio);
    llo = std::min(llo, row.log_ratio);
    lhi = std::max(lhi, row.log_ratio);
    rep.rows.push_back(row);
  }
  rep.spread = lo > 0.0 ? hi / lo : INFINITY;
  rep.log_spread = llo > 0.0 ? lhi / llo : INFINITY;
  if (hi == 0.0) rep.spread = 1.0;
  if (lhi == 0.0) rep.log_spread = 1.0;
  rep.passed = rep.spread <= kIncrementSpreadLimit;
  rep.log_passed = rep.log_spread <= kIncrementSpreadLimit;
  return rep;
}

IncrementReport increment_moment_check(const ModelSpec& spec, const IntegratorConfig& cfg,
                                       double m, std::span<const double> t_grid, int p,
                                       std::size_t n, const SamplingPlan& plan) {
  for (double t : t_grid)
    if (!(t > 0.0 && t <= 1.0)) throw ArgumentError("increment times must lie in (0, 1]");
  SamplingPlan pl = plan;
  pl.n_samples = n;
  pl.keep_velocities = true;
  IntegratorConfig c = cfg;
  c.rng_seed = derive_seed(cfg.rng_seed, {stream_tag::kStart});
  auto sample = sample_invariant(spec, c, m, pl);
  return increment_moments_from(spec, cfg, sample.measure, t_grid, p);
}

// ---- Lyapunov drift -----------------------------------------------------

DriftCheckResult lyapunov_drift_check(const ModelSpec& spec, double m,
                                      const ProbePlan& plan) {
  require_admissible(spec, m);
  const auto& c = spec.constants();
  const int d = spec.dimension();
  DriftCheckResult res;
  res.m = m;
  res.c_star = 4.0 * c.dissipative_c1 + 3.0 * c.dissipative_c2 +
               6.0 * c.sigma_sup * c.sigma_sup;
  res.worst_margin = -INFINITY;
  auto xs = probe_points(d, plan);
  ProbePlan yplan = plan;
  yplan.radius = plan.radius / m;
  yplan.seed = derive_seed(plan.seed, {stream_tag::kProbe, 2});
  auto ys = probe_points(d, yplan);
  auto g = lyapunov_phase_function(m);
  auto visit = [&](const std::vector<double>& x, const std::vector<double>& y) {
    KineticState s{x, y, m};
    const double v = lyapunov_vm(s);
    const double margin =
        generator_kinetic_apply(spec, g, s) + c.dissipative_c2 / 8.0 * v - res.c_star;
    ++res.points;
    if (margin > kViolationTolerance) ++res.violations;
    if (margin > res.worst_margin) {
      res.worst_margin = margin;
      res.witness = s;
    }
  };
  const std::vector<double> zero(d, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    visit(xs[i], ys[i % ys.size()]);
    visit(xs[i], zero);
  }
  res.passed = res.violations == 0;
  return res;
}

stats::MeanEstimate kinetic_generator_expectation(const ModelSpec& spec,
                                                  const EmpiricalMeasure& measure,
                                                  const PhaseFunction& g) {
  if (!measure.has_velocities() || measure.provenance().limit)
    throw PreconditionError("kinetic generator averages need velocities");
  const std::size_t n = measure.size();
  const double m = measure.provenance().m;
  std::vector<double> v(n);
  parallel_for(n, [&](std::size_t i) {
    auto x = measure.position(i);
    auto y = measure.velocity(i);
    KineticState s{{x.begin(), x.end()}, {y.begin(), y.end()}, m};
    v[i] = generator_kinetic_apply(spec, g, s);
  });
  return stats::estimate_mean(v, measure.chain_lengths());
}

stats::MeanEstimate limit_generator_expectation(const ModelSpec& spec,
                                                const EmpiricalMeasure& measure,
                                                const SpaceFunction& g) {
  const std::size_t n = measure.size();
  std::vector<double> v(n);
  parallel_for(n, [&](std::size_t i) {
    auto x = measure.position(i);
    v[i] = generator_limit_apply(spec, g, LimitState{{x.begin(), x.end()}});
  });
  return stats::estimate_mean(v, measure.chain_lengths());
}

}  // namespace kramers

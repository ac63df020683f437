#ifndef KRAMERS_ERGODIC_HPP_
#define KRAMERS_ERGODIC_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kramers/integrate.hpp"
#include "kramers/model.hpp"
#include "kramers/stats.hpp"

namespace kramers {

struct MeasureProvenance {
  std::uint64_t spec_fingerprint = 0;
  bool limit = false;
  double m = 0.0;  // 0 for the limit equation
  std::uint64_t seed = 0;
  double burn_in = 0.0;
  double thinning = 0.0;
  double dt = 0.0;
  int n_chains = 1;
  bool truncated = false;  // stopped early by a wallclock cap
  std::string source = "synthetic";
};

// Uniformly weighted sample cloud. Samples are stored chain by chain, in
// time order within each chain.
class EmpiricalMeasure {
 public:
  // Throws ArgumentError when empty, sizes disagree, a value is non-finite
  // or the chain lengths do not add up to the sample count. Empty
  // chain_lengths means one chain.
  EmpiricalMeasure(int dimension, std::vector<double> positions,
                   std::vector<double> velocities = {},
                   std::vector<std::size_t> chain_lengths = {},
                   MeasureProvenance provenance = {});

  int dimension() const { return dimension_; }
  std::size_t size() const { return positions_.size() / dimension_; }
  bool has_velocities() const { return !velocities_.empty(); }
  double weight() const { return 1.0 / static_cast<double>(size()); }

  std::span<const double> positions() const { return positions_; }
  std::span<const double> velocities() const { return velocities_; }
  std::span<const double> position(std::size_t i) const {
    return std::span<const double>(positions_).subspan(i * dimension_, dimension_);
  }
  std::span<const double> velocity(std::size_t i) const {
    return std::span<const double>(velocities_).subspan(i * dimension_, dimension_);
  }
  // Coordinate k of every position sample.
  std::vector<double> coordinate(int k) const;
  const std::vector<std::size_t>& chain_lengths() const { return chain_lengths_; }
  const MeasureProvenance& provenance() const { return provenance_; }

 private:
  int dimension_;
  std::vector<double> positions_;
  std::vector<double> velocities_;
  std::vector<std::size_t> chain_lengths_;
  MeasureProvenance provenance_;
};

struct BlockStatistics {
  std::size_t n = 0;
  double mean_x2 = 0.0, var_x2 = 0.0;
  double mean_my2 = 0.0, var_my2 = 0.0;  // m^2 |y|^2; zero for the limit
  double mean_v = 0.0, var_v = 0.0, se_v = 0.0;  // V_m (2|x|^2 for the limit)
};

struct StationarityReport {
  std::vector<BlockStatistics> blocks;  // trailing blocks, oldest first
  // max over blocks of |mean_v - mean_v(last)| / combined se.
  double max_block_discrepancy = 0.0;
  double lag1_autocorrelation = 0.0;  // of |x|^2 at the thinning lag
  double decay_rate = 0.0;            // -ln(rho_1) / thinning; inf if rho_1 <= 0
  bool stationary = true;
  bool insufficient_data = false;
  bool truncated = false;
  std::string message;
};

inline constexpr int kStationarityBlocks = 4;
inline constexpr double kStationarityThreshold = 5.0;  // combined standard errors

StationarityReport stationarity_report(const EmpiricalMeasure& measure);

struct SamplingPlan {
  std::optional<double> burn_in;   // default 20/c2 (limit), 20 max(1/c2, m)
  std::optional<double> thinning;  // default 1/c2
  std::size_t n_samples = 10000;
  int n_chains = 16;
  bool keep_velocities = true;
  double wallclock_cap_seconds = 0.0;  // 0 disables the cap

  bool operator==(const SamplingPlan&) const = default;
};

struct InvariantSample {
  EmpiricalMeasure measure;
  StationarityReport report;
};

// Runs n_chains chains from overdispersed starts (x ~ N(0, 4I),
// y ~ N(0, 4I/m)), discards [0, T0] and records every thinning interval.
// `mass` selects the kinetic system (cfg.scheme must be kinetic); nullopt
// samples the limit equation with Euler at dt_max. Seeds derive from
// cfg.rng_seed. Throws PreconditionError when m exceeds the admissible mass
// and BlowUpError naming the chain on divergence.
InvariantSample sample_invariant(const ModelSpec& spec, const IntegratorConfig& cfg,
                                 std::optional<double> mass, const SamplingPlan& plan);

double default_burn_in(const ModelSpec& spec, std::optional<double> mass);
double default_thinning(const ModelSpec& spec);

// E|X|^p and E|Y|^p with autocorrelation-corrected standard errors.
stats::MeanEstimate position_moment(const EmpiricalMeasure& measure, int p);
stats::MeanEstimate velocity_moment(const EmpiricalMeasure& measure, int p);

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double ci_low = 0.0, ci_high = 0.0;  // 95%
  std::vector<double> masses, moments, moment_se;
};

// Weighted regression of log E|Y|^p on log m over kinetic measures. Throws
// ArgumentError for odd or non-positive p and fewer than 3 measures,
// PreconditionError when a measure has no velocities.
ScalingFit fit_velocity_moment_scaling(std::span<const EmpiricalMeasure> measures, int p);
ScalingFit moment_scaling_check(const ModelSpec& spec, const IntegratorConfig& cfg,
                                std::span<const double> m_grid, int p,
                                const SamplingPlan& plan);

struct IncrementRow {
  double t = 0.0;
  stats::MeanEstimate moment;      // E|X_t - X_0|^p
  stats::MeanEstimate log_moment;  // E[|X_t - X_0|^p |ln|X_t - X_0||^p]
  double ratio = 0.0;              // moment / (t^{p/2} + m^{p/2})
  double log_ratio = 0.0;          // log_moment / ((t^{p/2}+m^{p/2})(|ln(t+m)|^p+1))
};

struct IncrementReport {
  double m = 0.0;
  int p = 2;
  std::vector<IncrementRow> rows;
  double spread = 1.0;      // max ratio / min ratio
  double log_spread = 1.0;
  bool passed = true;       // spread <= 10
  bool log_passed = true;
};

inline constexpr double kIncrementSpreadLimit = 10.0;

// Increments from the given start points (positions and velocities)
// through every time in t_grid, each start driven by its own stream.
IncrementReport increment_moments_from(const ModelSpec& spec, const IntegratorConfig& cfg,
                                       const EmpiricalMeasure& starts,
                                       std::span<const double> t_grid, int p);
// Same with stationary starts drawn by sample_invariant (n samples).
IncrementReport increment_moment_check(const ModelSpec& spec, const IntegratorConfig& cfg,
                                       double m, std::span<const double> t_grid, int p,
                                       std::size_t n, const SamplingPlan& plan);

struct DriftCheckResult {
  double m = 0.0;
  double c_star = 0.0;  // 4 c1 + 3 c2 + 6 sigma_sup^2
  double worst_margin = 0.0;
  KineticState witness;
  std::size_t points = 0;
  std::size_t violations = 0;  // margins above kViolationTolerance
  bool passed = true;
};

// Worst margin of A_m V_m + (c2/8) V_m - C* over probe pairs: positions from
// probe_points(d, plan) and velocities from a ball of radius R/m.
DriftCheckResult lyapunov_drift_check(const ModelSpec& spec, double m,
                                      const ProbePlan& plan);

// Monte Carlo E[A_m g] over a kinetic measure and E[A g] over a position
// measure.
stats::MeanEstimate kinetic_generator_expectation(const ModelSpec& spec,
                                                  const EmpiricalMeasure& measure,
                                                  const PhaseFunction& g);
stats::MeanEstimate limit_generator_expectation(const ModelSpec& spec,
                                                const EmpiricalMeasure& measure,
                                                const SpaceFunction& g);

}  // namespace kramers

#endif  // KRAMERS_ERGODIC_HPP_

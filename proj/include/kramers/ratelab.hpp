#ifndef KRAMERS_RATELAB_HPP_
#define KRAMERS_RATELAB_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kramers/ergodic.hpp"
#include "kramers/integrate.hpp"
#include "kramers/model.hpp"
#include "kramers/transport.hpp"

namespace kramers {

enum class RowStatus { ok, truncated, failed };
std::string to_string(RowStatus s);
RowStatus row_status_from_string(const std::string& s);

struct SweepRow {
  double m = 0.0;
  double w1_value = 0.0;   // raw minus baseline, floored at 0
  double w1_raw = 0.0;
  double w1_stderr = 0.0;
  double self_baseline = 0.0;
  std::size_t n_samples = 0;
  TransportMethod method = TransportMethod::sorted_1d;
  std::uint64_t seed = 0;
  RowStatus status = RowStatus::ok;
  std::string error;
  // d > 1: exact assignment W1 on evenly thinned clouds and its baseline.
  std::optional<double> crosscheck, crosscheck_baseline;
  double wallclock = 0.0;  // seconds; not persisted
};

struct SweepOptions {
  std::optional<TransportMethod> method;  // default: sorted_1d (d = 1), sliced
  int n_proj = 128;
  std::size_t crosscheck_n = kDefaultAssignmentCap;  // 0 disables
  std::string table_path;  // append-only CSV; empty keeps rows in memory
};

// Largest m for which the rate statements hold: min{admissible mass, 1/e}.
double theorem_mass_limit(const ModelSpec& spec);

// Per-m seed: derive_seed(master, {kSweep, bits of m}).
std::uint64_t sweep_seed(std::uint64_t master, double m);

// For each m: kinetic positions from sample_invariant, two fresh
// independent nu samples (exact inverse-CDF draws in 1D, limit-equation
// chains otherwise), raw W1 to the first and a same-law baseline between
// the two. Rows already present in the table (same m and seed) are reused.
// Throws ArgumentError on an empty grid or m <= 0 and PreconditionError
// when an m exceeds theorem_mass_limit; per-m runtime failures become
// failed rows.
std::vector<SweepRow> run_sweep(const ModelSpec& spec, const IntegratorConfig& cfg,
                                std::span<const double> m_grid, const SamplingPlan& plan,
                                const SweepOptions& options = {});

// Table CSV: m,w1,stderr,baseline,raw,n,method,seed,status,crosscheck,
// crosscheck_baseline,error. Throws ArgumentError on a malformed file.
std::string sweep_csv_header();
std::string sweep_csv_line(const SweepRow& row);
std::vector<SweepRow> read_sweep_table(const std::string& path);
void write_sweep_table(const std::string& path, const std::vector<SweepRow>& rows);

struct FitOptions {
  int n_boot = 2000;
  std::uint64_t seed = 0;
};

struct RateFitResult {
  std::string verdict = "fitted";  // or "indistinguishable_from_zero"
  double alpha = 0.0, intercept = 0.0;
  std::optional<double> gamma;  // coefficient of log|ln m|
  double alpha_se = 0.0;
  double alpha_ci_low = 0.0, alpha_ci_high = 0.0;  // 95% bootstrap
  std::optional<double> gamma_ci_low, gamma_ci_high;
  std::vector<double> masses, values, stderrs, residuals;
  double residual_variance = 0.0;
  std::size_t n_rows = 0;
  int n_boot = 0;
  bool fitted() const { return verdict == "fitted"; }
};

// Weighted least squares of log W1 on log m (and log|ln m|), weights from
// the delta-method standard errors. The bootstrap perturbs each fitted
// value by a normal draw scaled by the larger of its residual and its
// standard error. Throws ArgumentError with fewer than 4 usable rows or
// n_boot < 10; fewer than 4 positive corrected values yield the
// "indistinguishable_from_zero" verdict.
RateFitResult fit_rate(std::span<const SweepRow> rows, bool with_log_correction,
                       const FitOptions& options = {});

struct NullCaseOptions {
  int baselines = 8;
  std::optional<double> thinning;  // default 4 / c2, nearly independent draws
  int n_chains = 16;
};

struct NullCaseResult {
  double m = 0.0;
  TransportMethod method = TransportMethod::sorted_1d;
  double raw = 0.0;
  std::vector<double> baselines;
  double mean_baseline = 0.0;
  double se = 0.0;         // predictive sd of raw - mean baseline
  double statistic = 0.0;  // (raw - mean baseline) / se
  bool passed = true;      // statistic <= 4
};

// raw = W1(kinetic sample, nu sample); K further nu samples give the
// baseline distribution. Throws PreconditionError unless the diffusion is
// constant and the drift is declared a gradient.
NullCaseResult null_case_check(const ModelSpec& spec, const IntegratorConfig& cfg, double m,
                               std::size_t n, const NullCaseOptions& options = {});

}  // namespace kramers

#endif  // KRAMERS_RATELAB_HPP_

#ifndef KRAMERS_STATS_HPP_
#define KRAMERS_STATS_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace kramers::stats {

double mean(std::span<const double> v);
// Unbiased sample variance (n - 1 denominator); 0 for n < 2.
double variance(std::span<const double> v);

// Effective sample size of a multi-chain series. `values` holds the chains
// back to back; `chain_lengths` gives their sizes (a single chain when
// empty). Uses the chain-averaged autocovariance with Geyer's initial
// monotone positive-sequence truncation. Never exceeds the sample count.
double effective_sample_size(std::span<const double> values,
                             std::span<const std::size_t> chain_lengths = {});

// Lag-k autocorrelation pooled over chains.
double autocorrelation(std::span<const double> values,
                       std::span<const std::size_t> chain_lengths,
                       std::size_t lag);

struct MeanEstimate {
  double mean = 0.0;
  double se = 0.0;   // autocorrelation-corrected standard error
  double ess = 0.0;
  std::size_t n = 0;
};

MeanEstimate estimate_mean(std::span<const double> values,
                           std::span<const std::size_t> chain_lengths = {});

// Weighted least squares y ~ X beta. `design` is row-major n x k. Returns
// coefficients and their covariance (scaled by the residual variance when
// `scale_by_residual` is set, otherwise the weights are taken as exact
// inverse variances).
struct LinearFit {
  std::vector<double> coef;
  std::vector<double> cov;  // k x k row-major
  std::vector<double> residuals;
  double residual_variance = 0.0;  // weighted RSS / (n - k); 0 when n == k
};

LinearFit weighted_least_squares(std::span<const double> design, std::size_t k,
                                 std::span<const double> y,
                                 std::span<const double> weights,
                                 bool scale_by_residual);

// Linear interpolation quantile of an already sorted sample, q in [0,1].
double sorted_quantile(std::span<const double> sorted, double q);

}  // namespace kramers::stats

#endif  // KRAMERS_STATS_HPP_

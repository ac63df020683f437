#include "kramers/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kramers/errors.hpp"

namespace kramers::stats {

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  // Pairwise-free Neumaier summation keeps large-n means reproducible and
  // accurate.
  double sum = 0.0, comp = 0.0;
  for (double x : v) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return (sum + comp) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - mu) * (x - mu);
  return acc / static_cast<double>(v.size() - 1);
}

namespace {

std::vector<std::size_t> normalize_chains(std::span<const double> values,
                                          std::span<const std::size_t> lengths) {
  std::vector<std::size_t> out(lengths.begin(), lengths.end());
  if (out.empty()) out.push_back(values.size());
  std::size_t total = std::accumulate(out.begin(), out.end(), std::size_t{0});
  if (total != values.size())
    throw ArgumentError("chain lengths do not sum to the number of values");
  return out;
}

double pooled_autocov(std::span<const double> values,
                      const std::vector<std::size_t>& chains, double mu,
                      std::size_t lag) {
  double acc = 0.0;
  std::size_t offset = 0;
  for (std::size_t len : chains) {
    for (std::size_t t = 0; t + lag < len; ++t)
      acc += (values[offset + t] - mu) * (values[offset + t + lag] - mu);
    offset += len;
  }
  return acc / static_cast<double>(values.size());
}

}  // namespace

double autocorrelation(std::span<const double> values,
                       std::span<const std::size_t> chain_lengths,
                       std::size_t lag) {
  auto chains = normalize_chains(values, chain_lengths);
  const double mu = mean(values);
  const double c0 = pooled_autocov(values, chains, mu, 0);
  if (c0 <= 0.0) return 0.0;
  return pooled_autocov(values, chains, mu, lag) / c0;
}

double effective_sample_size(std::span<const double> values,
                             std::span<const std::size_t> chain_lengths) {
  const double n = static_cast<double>(values.size());
  if (values.size() < 4) return n;
  auto chains = normalize_chains(values, chain_lengths);
  const std::size_t max_len = *std::max_element(chains.begin(), chains.end());
  const double mu = mean(values);
  const double c0 = pooled_autocov(values, chains, mu, 0);
  if (c0 <= 0.0) return n;

  // Geyer initial monotone sequence on pair sums.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < max_len; k += 2) {
    double pair = (pooled_autocov(values, chains, mu, k) +
                   pooled_autocov(values, chains, mu, k + 1)) / c0;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / n);
  return std::min(n, n / tau);
}

MeanEstimate estimate_mean(std::span<const double> values,
                           std::span<const std::size_t> chain_lengths) {
  MeanEstimate out;
  out.n = values.size();
  if (values.empty()) return out;
  out.mean = mean(values);
  out.ess = effective_sample_size(values, chain_lengths);
  out.se = std::sqrt(variance(values) / std::max(out.ess, 1.0));
  return out;
}

LinearFit weighted_least_squares(std::span<const double> design, std::size_t k,
                                 std::span<const double> y,
                                 std::span<const double> weights,
                                 bool scale_by_residual) {
  const std::size_t n = y.size();
  if (k == 0 || design.size() != n * k || weights.size() != n)
    throw ArgumentError("weighted_least_squares: inconsistent dimensions");
  if (n < k) throw ArgumentError("weighted_least_squares: fewer rows than coefficients");

  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd Y(n), W(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) X(i, j) = design[i * k + j];
    Y(i) = y[i];
    W(i) = weights[i];
  }
  Eigen::VectorXd sw = W.cwiseSqrt();
  Eigen::MatrixXd Xw = sw.asDiagonal() * X;
  Eigen::VectorXd Yw = sw.asDiagonal() * Y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  if (qr.rank() < static_cast<Eigen::Index>(k))
    throw ArgumentError("weighted_least_squares: degenerate design");
  Eigen::VectorXd beta = qr.solve(Yw);
  Eigen::MatrixXd xtx = Xw.transpose() * Xw;
  Eigen::MatrixXd cov = xtx.inverse();

  LinearFit fit;
  fit.coef.assign(beta.data(), beta.data() + k);
  Eigen::VectorXd r = Y - X * beta;
  fit.residuals.assign(r.data(), r.data() + n);
  double rss = (sw.asDiagonal() * r).squaredNorm();
  fit.residual_variance = n > k ? rss / static_cast<double>(n - k) : 0.0;
  if (scale_by_residual) cov *= fit.residual_variance;
  fit.cov.resize(k * k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) fit.cov[i * k + j] = cov(i, j);
  return fit;
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ArgumentError("sorted_quantile: empty sample");
  q = std::clamp(q, 0.0, 1.0);
  double pos = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace kramers::stats

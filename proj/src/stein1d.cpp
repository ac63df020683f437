#include "kramers/stein1d.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "kramers/errors.hpp"
#include "kramers/parallel.hpp"
#include "kramers/rng.hpp"

namespace kramers {

namespace {

constexpr std::array<double, 8> kGlNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

template <class F>
double gauss_legendre(const F& f, double a, double b) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0.0;
  for (int k = 0; k < 8; ++k) s += kGlWeights[k] * f(mid + half * kGlNodes[k]);
  return half * s;
}

class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0, comp_ = 0.0;
};

void require_1d(const ModelSpec& spec) {
  if (spec.dimension() != 1) throw ArgumentError("one-dimensional model required");
}

// 2 b / sigma^2, the derivative of the exponent of the density.
double log_density_slope(const ModelSpec& spec, double x) {
  const double s = spec.diffusion_1d(x);
  return 2.0 * spec.drift_1d(x) / (s * s);
}

double fourth_order_derivative(const std::vector<double>& v, std::size_t i, double h) {
  return (-v[i + 2] + 8.0 * v[i + 1] - 8.0 * v[i - 1] + v[i - 2]) / (12.0 * h);
}

int grid_size_for(double radius, double spacing) {
  return 2 * static_cast<int>(std::ceil(radius / spacing - 1e-9));
}

IdentityCheck paired_check(std::span<const double> lhs, std::span<const double> rhs,
                           std::span<const std::size_t> chains) {
  IdentityCheck c;
  std::vector<double> diff(lhs.size());
  for (std::size_t i = 0; i < lhs.size(); ++i) diff[i] = lhs[i] - rhs[i];
  c.lhs = stats::estimate_mean(lhs, chains);
  c.rhs = stats::estimate_mean(rhs, chains);
  c.difference = stats::estimate_mean(diff, chains);
  if (c.difference.se > 0.0) {
    c.z = std::abs(c.difference.mean) / c.difference.se;
    c.passed = c.z <= 4.0;
  } else {
    c.z = 0.0;
    c.passed = std::abs(c.difference.mean) <= 1e-12;
  }
  return c;
}

// int of (h - nu) p beyond x = edge in the direction dir (+1 or -1),
// continuing the exponent past the grid until p is negligible.
double tail_integral(const ModelSpec& spec, const Density1D& dens, const TestFunction& h,
                     double nu, int dir) {
  const double edge = dir * dens.radius;
  const double step = dens.spacing;
  const double log_edge = dir > 0 ? dens.log_values.back() : dens.log_values.front();
  const double s_edge = spec.diffusion_1d(edge);
  // Exponent int_0^x 2b/sigma^2 at the edge, recovered from the stored log density.
  const double phi_edge = log_edge + 2.0 * std::log(s_edge);
  auto slope = [&](double u) { return log_density_slope(spec, u); };
  auto log_p = [&](double x, double phi) {
    const double s = spec.diffusion_1d(x);
    return phi - 2.0 * std::log(s) - dens.log_normalization;
  };
  CompensatedSum acc;
  double a = edge, phi_a = phi_edge;
  for (int k = 0; k < 4 * static_cast<int>(dens.grid.size()); ++k) {
    const double b = a + dir * step;
    double panel = 0.0;
    double largest = -INFINITY;
    for (int q = 0; q < 8; ++q) {
      const double t = 0.5 * (a + b) + 0.5 * (b - a) * kGlNodes[q];
      const double lp = log_p(t, phi_a + gauss_legendre(slope, a, t));
      largest = std::max(largest, lp);
      panel += kGlWeights[q] * 0.5 * step * (h.at(t) - nu) * std::exp(lp);
    }
    acc.add(panel);
    if (largest < log_edge - dens.log_normalization - 80.0) break;
    phi_a += gauss_legendre(slope, a, b);
    a = b;
  }
  return acc.value();
}

void require_kinetic_samples(const EmpiricalMeasure& samples) {
  if (samples.dimension() != 1) throw PreconditionError("one-dimensional samples required");
  if (!samples.has_velocities()) throw PreconditionError("samples carry no velocities");
}

}  // namespace

double default_stein_radius(const ModelSpec& spec) {
  const auto& c = spec.constants();
  return std::sqrt((c.dissipative_c1 + 40.0 * std::max(1.0, c.sigma_sup * c.sigma_sup)) /
                   c.dissipative_c2);
}

Density1D invariant_density_1d(const ModelSpec& spec, std::optional<double> radius,
                               std::optional<int> n_grid) {
  require_1d(spec);
  const double R = radius.value_or(default_stein_radius(spec));
  if (!(R > 0.0) || !std::isfinite(R)) throw ArgumentError("density radius must be positive");
  int n = n_grid.value_or(grid_size_for(R, kDefaultSteinSpacing));
  if (n < 8) throw ArgumentError("density grid needs at least 8 intervals");
  if (n % 2) ++n;
  const double h = 2.0 * R / n;
  const int half = n / 2;

  Density1D d;
  d.radius = R;
  d.spacing = h;
  d.grid.resize(n + 1);
  for (int i = 0; i <= n; ++i) d.grid[i] = (i - half) * h;

  auto slope = [&](double u) { return log_density_slope(spec, u); };
  std::vector<double> panel_phi(n);
  parallel_for(n, [&](std::size_t i) { panel_phi[i] = gauss_legendre(slope, d.grid[i], d.grid[i + 1]); });
  std::vector<double> phi(n + 1, 0.0);
  for (int i = half + 1; i <= n; ++i) phi[i] = phi[i - 1] + panel_phi[i - 1];
  for (int i = half - 1; i >= 0; --i) phi[i] = phi[i + 1] - panel_phi[i];

  auto log_weight = [&](double x, double exponent) {
    const double s = spec.diffusion_1d(x);
    if (!(s > 0.0) || !std::isfinite(s))
      throw ModelEvaluationError("diffusion must be positive and finite at x = " + std::to_string(x));
    return exponent - 2.0 * std::log(s);
  };

  d.log_values.resize(n + 1);
  for (int i = 0; i <= n; ++i) d.log_values[i] = log_weight(d.grid[i], phi[i]);
  d.node_x.resize(8 * n);
  d.node_weight.resize(8 * n);
  std::vector<double> node_log(8 * n);
  parallel_for(n, [&](std::size_t i) {
    const double a = d.grid[i], b = d.grid[i + 1];
    for (int k = 0; k < 8; ++k) {
      const double t = 0.5 * (a + b) + 0.5 * (b - a) * kGlNodes[k];
      d.node_x[8 * i + k] = t;
      d.node_weight[8 * i + k] = 0.5 * (b - a) * kGlWeights[k];
      node_log[8 * i + k] = log_weight(t, phi[i] + gauss_legendre(slope, a, t));
    }
  });

  for (double v : d.log_values)
    if (!std::isfinite(v)) throw ModelEvaluationError("density exponent is not finite");
  const double shift = std::max(*std::max_element(d.log_values.begin(), d.log_values.end()),
                                *std::max_element(node_log.begin(), node_log.end()));
  CompensatedSum z;
  for (std::size_t k = 0; k < node_log.size(); ++k)
    z.add(d.node_weight[k] * std::exp(node_log[k] - shift));
  d.log_normalization = shift + std::log(z.value());

  // The density must decay at both ends.
  auto outward = [&](double x) {
    const double s = spec.diffusion_1d(x);
    return log_density_slope(spec, x) - 2.0 * spec.diffusion_derivative_1d(x) / s;
  };
  const double slope_right = outward(R), slope_left = outward(-R);
  if (!(slope_right < 0.0) || !(slope_left > 0.0) || d.log_values[0] >= d.log_values[half] ||
      d.log_values[n] >= d.log_values[half])
    throw DomainError("stationary density is not integrable: it does not decay at the boundary");

  const double floor_log = std::log(std::numeric_limits<double>::min()) + 50.0;
  for (int i : {0, n})
    if (d.log_values[i] - d.log_normalization < floor_log)
      throw DomainError("density underflows at x = " + std::to_string(d.grid[i]) +
                        "; use a smaller radius");

  d.values.resize(n + 1);
  for (int i = 0; i <= n; ++i) d.values[i] = std::exp(d.log_values[i] - d.log_normalization);
  d.node_values.resize(8 * n);
  for (std::size_t k = 0; k < node_log.size(); ++k)
    d.node_values[k] = std::exp(node_log[k] - d.log_normalization);

  d.tail_mass_estimate = d.values[n] / -slope_right + d.values[0] / slope_left;
  if (d.tail_mass_estimate > 1e-10)
    throw DomainError("tail mass beyond R = " + std::to_string(R) + " is about " +
                      std::to_string(d.tail_mass_estimate) + "; increase the radius");

  d.cdf.assign(n + 1, 0.0);
  CompensatedSum acc;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 8; ++k) acc.add(d.node_weight[8 * i + k] * d.node_values[8 * i + k]);
    d.cdf[i + 1] = acc.value();
  }
  return d;
}

double nu_expectation(const Density1D& dens, const TestFunction& h) {
  CompensatedSum acc;
  for (std::size_t k = 0; k < dens.node_x.size(); ++k) {
    const double v = h.at(dens.node_x[k]);
    if (!std::isfinite(v))
      throw ModelEvaluationError("test function '" + h.name + "' is not finite at x = " +
                                 std::to_string(dens.node_x[k]));
    acc.add(dens.node_weight[k] * dens.node_values[k] * v);
  }
  return acc.value();
}

EmpiricalMeasure sample_density_1d(const Density1D& dens, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ArgumentError("sample size must be positive");
  if (dens.grid.size() < 2) throw ArgumentError("empty density");
  Rng rng(seed);
  const auto& F = dens.cdf;
  const auto& p = dens.values;
  const double h = dens.spacing;
  const std::size_t panels = dens.grid.size() - 1;
  std::vector<double> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double u = std::clamp(rng.uniform() * F.back(), F.front(), F.back());
    std::size_t i = std::upper_bound(F.begin(), F.end(), u) - F.begin();
    i = std::clamp<std::size_t>(i, 1, panels) - 1;
    // Cubic Hermite CDF on the panel, inverted by safeguarded Newton.
    const double f0 = F[i], f1 = F[i + 1], d0 = p[i] * h, d1 = p[i + 1] * h;
    auto cdf = [&](double t) {
      const double t2 = t * t, t3 = t2 * t;
      return (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * d0 + (-2 * t3 + 3 * t2) * f1 +
             (t3 - t2) * d1;
    };
    auto pdf = [&](double t) {
      const double t2 = t * t;
      return (6 * t2 - 6 * t) * f0 + (3 * t2 - 4 * t + 1) * d0 + (-6 * t2 + 6 * t) * f1 +
             (3 * t2 - 2 * t) * d1;
    };
    double lo = 0.0, hi = 1.0;
    double t = f1 > f0 ? std::clamp((u - f0) / (f1 - f0), 0.0, 1.0) : 0.5;
    for (int it = 0; it < 60; ++it) {
      const double g = cdf(t) - u;
      if (g > 0)
        hi = t;
      else
        lo = t;
      const double dg = pdf(t);
      double next = dg > 0 ? t - g / dg : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - t) < 1e-15) {
        t = next;
        break;
      }
      t = next;
    }
    out[s] = dens.grid[i] + t * h;
  }
  MeasureProvenance prov;
  prov.limit = true;
  prov.seed = seed;
  prov.source = "density_inverse_cdf";
  return EmpiricalMeasure(1, std::move(out), {}, {}, prov);
}

// ---- Stein equation -----------------------------------------------------

SteinSolution1D solve_stein_1d(const ModelSpec& spec, const Density1D& dens,
                               const TestFunction& h) {
  require_1d(spec);
  const std::size_t n = dens.grid.size() - 1;
  if (dens.grid.size() < 9) throw ArgumentError("density grid too small");
  const std::size_t half = n / 2;
  const double dx = dens.spacing;

  SteinSolution1D sol;
  sol.spec = std::make_shared<const ModelSpec>(spec);
  sol.h = h;
  sol.nu_h = nu_expectation(dens, h);
  sol.radius = dens.radius;
  sol.spacing = dx;
  sol.boundary_layer = dens.radius / 10.0;
  sol.grid = dens.grid;
  sol.p = dens.values;
  sol.analytic_model_derivatives = spec.has_analytic_derivatives_1d();

  std::vector<double> panel(n);
  parallel_for(n, [&](std::size_t i) {
    double s = 0.0;
    for (int k = 0; k < 8; ++k) {
      const std::size_t j = 8 * i + k;
      s += dens.node_weight[j] * dens.node_values[j] * (h.at(dens.node_x[j]) - sol.nu_h);
    }
    panel[i] = s;
  });
  // G(x) accumulated from the nearer end of the domain, including the mass
  // beyond it.
  std::vector<double> G(n + 1, 0.0);
  G[0] = tail_integral(spec, dens, h, sol.nu_h, -1);
  G[n] = -tail_integral(spec, dens, h, sol.nu_h, +1);
  {
    CompensatedSum acc;
    acc.add(G[0]);
    for (std::size_t i = 0; i < half; ++i) {
      acc.add(panel[i]);
      G[i + 1] = acc.value();
    }
  }
  {
    CompensatedSum acc;
    acc.add(G[n]);
    for (std::size_t i = n; i-- > half + 1;) {
      acc.add(-panel[i]);
      G[i] = acc.value();
    }
  }

  sol.f.assign(n + 1, 0.0);
  sol.fp.resize(n + 1);
  sol.fpp.resize(n + 1);
  sol.fppp.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double x = dens.grid[i];
    const double b = spec.drift_1d(x), s = spec.diffusion_1d(x);
    const double db = spec.drift_derivative_1d(x), ds = spec.diffusion_derivative_1d(x);
    const double s2 = s * s;
    const double g = h.at(x) - sol.nu_h;
    sol.fp[i] = 2.0 * G[i] / (s2 * dens.values[i]);
    sol.fpp[i] = 2.0 * (g - b * sol.fp[i]) / s2;
    sol.fppp[i] = 2.0 * (h.derivative_1d(x) - db * sol.fp[i] - b * sol.fpp[i] - s * ds * sol.fpp[i]) / s2;
  }
  // Euler-Maclaurin (corrected trapezoid) integration of f' from f(0) = 0.
  for (std::size_t i = half; i < n; ++i)
    sol.f[i + 1] = sol.f[i] + 0.5 * dx * (sol.fp[i] + sol.fp[i + 1]) +
                   dx * dx / 12.0 * (sol.fpp[i] - sol.fpp[i + 1]);
  for (std::size_t i = half; i > 0; --i)
    sol.f[i - 1] = sol.f[i] - 0.5 * dx * (sol.fp[i] + sol.fp[i - 1]) -
                   dx * dx / 12.0 * (sol.fpp[i] - sol.fpp[i - 1]);

  for (std::size_t i = 2; i + 2 <= n; ++i) {
    if (!sol.in_interior(i)) continue;
    const double x = dens.grid[i];
    const double b = spec.drift_1d(x), s = spec.diffusion_1d(x);
    const double g = h.at(x) - sol.nu_h;
    const double dfp = fourth_order_derivative(sol.fp, i, dx);
    const double dfpp = fourth_order_derivative(sol.fpp, i, dx);
    sol.residual_sup = std::max(sol.residual_sup, std::abs(b * sol.fp[i] + 0.5 * s * s * sol.fpp[i] - g));
    sol.discrete_residual_sup = std::max(sol.discrete_residual_sup, std::abs(b * sol.fp[i] + 0.5 * s * s * dfp - g));
    sol.fpp_consistency = std::max(sol.fpp_consistency, std::abs(dfp - sol.fpp[i]));
    sol.fppp_consistency = std::max(sol.fppp_consistency, std::abs(dfpp - sol.fppp[i]));
  }
  return sol;
}

std::array<double, 3> SteinSolution1D::derivatives_at(double x) const {
  if (!(std::abs(x) <= radius)) throw DomainError("x = " + std::to_string(x) + " lies outside the Stein domain");
  const std::size_t n = grid.size() - 1;
  std::size_t i = static_cast<std::size_t>(std::floor((x + radius) / spacing));
  i = std::min(i, n - 1);
  const double t = (x - grid[i]) / spacing;
  const double t2 = t * t, t3 = t2 * t;
  const double d1 = (2 * t3 - 3 * t2 + 1) * fp[i] + (t3 - 2 * t2 + t) * spacing * fpp[i] +
                    (-2 * t3 + 3 * t2) * fp[i + 1] + (t3 - t2) * spacing * fpp[i + 1];
  const double b = spec->drift_1d(x), s = spec->diffusion_1d(x);
  const double s2 = s * s;
  const double d2 = 2.0 * (h.at(x) - nu_h - b * d1) / s2;
  const double d3 = 2.0 * (h.derivative_1d(x) - spec->drift_derivative_1d(x) * d1 - b * d2 -
                           s * spec->diffusion_derivative_1d(x) * d2) /
                    s2;
  return {d1, d2, d3};
}

// ---- Regularity ---------------------------------------------------------

GrowthReport verify_regularity_growth(const SteinSolution1D& sol) {
  GrowthReport r;
  const std::array<const std::vector<double>*, 4> fns = {&sol.f, &sol.fp, &sol.fpp, &sol.fppp};
  const double edge = 0.9 * (sol.radius - sol.boundary_layer);
  for (int k = 0; k < 4; ++k) {
    const int order = k + 2;
    double best = 0.0, arg = 0.0;
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
      if (!sol.in_interior(i)) continue;
      const double x = sol.grid[i];
      const double v = std::abs((*fns[k])[i]) / (1.0 + std::pow(std::abs(x), order));
      if (v > best) {
        best = v;
        arg = x;
      }
    }
    r.sup_ratio[k] = best;
    r.argmax[k] = arg;
    r.interior[k] = best <= 1e-9 || std::abs(arg) <= edge;
    r.passed = r.passed && r.interior[k] && std::isfinite(best);
  }
  return r;
}

DomainStabilityReport regularity_domain_stability(const ModelSpec& spec, const TestFunction& h,
                                                  std::optional<double> radius, double factor,
                                                  double spacing) {
  if (!(factor > 1.0)) throw ArgumentError("domain factor must exceed 1");
  if (!(spacing > 0.0)) throw ArgumentError("spacing must be positive");
  const double R = radius.value_or(default_stein_radius(spec));
  auto solve = [&](double r) {
    auto dens = invariant_density_1d(spec, r, grid_size_for(r, spacing));
    return verify_regularity_growth(solve_stein_1d(spec, dens, h));
  };
  DomainStabilityReport rep;
  rep.base = solve(R);
  rep.extended = solve(factor * R);
  rep.passed = rep.base.passed && rep.extended.passed;
  for (int k = 0; k < 4; ++k) {
    const double a = rep.base.sup_ratio[k], b = rep.extended.sup_ratio[k];
    rep.relative_change[k] = (a <= 1e-9 && b <= 1e-9) ? 0.0 : std::abs(b - a) / std::max(a, 1e-300);
    rep.passed = rep.passed && rep.relative_change[k] <= 0.2;
  }
  return rep;
}

ModulusReport hessian_log_modulus_check(const SteinSolution1D& sol) {
  if (sol.spacing > 1.0 / 64.0 + 1e-15)
    throw PreconditionError("log-modulus check needs grid spacing <= 1/64");
  ModulusReport r;
  const std::size_t n = sol.grid.size();
  const std::size_t reach = static_cast<std::size_t>(std::floor(0.125 / sol.spacing + 1e-9));
  for (std::size_t i = 0; i < n; ++i) {
    if (!sol.in_interior(i)) continue;
    for (std::size_t j = i + 1; j < n && j <= i + reach; ++j) {
      if (!sol.in_interior(j)) break;
      const double dist = sol.grid[j] - sol.grid[i];
      const double ax = std::min(std::abs(sol.grid[i]), std::abs(sol.grid[j]));
      const double v = std::abs(sol.fpp[j] - sol.fpp[i]) /
                       (dist * std::abs(std::log(dist)) * (1.0 + std::pow(ax, 5)));
      ++r.pairs;
      if (v > r.sup) {
        r.sup = v;
        r.x = sol.grid[i];
        r.y = sol.grid[j];
      }
    }
  }
  return r;
}

ModulusRefinementReport hessian_modulus_refinement(const ModelSpec& spec, const TestFunction& h,
                                                   std::optional<double> radius, double spacing) {
  const double R = radius.value_or(default_stein_radius(spec));
  auto solve = [&](double s) {
    auto dens = invariant_density_1d(spec, R, grid_size_for(R, s));
    return hessian_log_modulus_check(solve_stein_1d(spec, dens, h));
  };
  ModulusRefinementReport rep;
  rep.coarse = solve(spacing);
  rep.fine = solve(0.5 * spacing);
  const double a = rep.coarse.sup, b = rep.fine.sup;
  rep.relative_change = (a <= 1e-9 && b <= 1e-9) ? 0.0 : std::abs(b - a) / std::max(a, 1e-300);
  rep.passed = std::isfinite(a) && std::isfinite(b) && rep.relative_change <= 0.2;
  return rep;
}

// ---- Stationary identities ----------------------------------------------

StationaryIdentityReport stationary_identity_check(const EmpiricalMeasure& samples,
                                                   const SteinSolution1D& sol) {
  require_kinetic_samples(samples);
  const double m = samples.provenance().m;
  if (samples.provenance().limit || !(m > 0.0))
    throw PreconditionError("stationary identities need kinetic samples with m > 0");
  const std::size_t n = samples.size();
  std::vector<double> yf(n), zero(n, 0.0), gap(n), phi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = samples.position(i)[0], y = samples.velocity(i)[0];
    const auto d = sol.derivatives_at(x);
    const double s = sol.spec->diffusion_1d(x);
    yf[i] = y * d[0];
    gap[i] = sol.h.at(x) - sol.nu_h;
    phi[i] = 0.5 * s * s * d[1] - m * y * y * d[1];
  }
  StationaryIdentityReport r;
  r.m = m;
  r.velocity_gradient = paired_check(yf, zero, samples.chain_lengths());
  r.gap_phi = paired_check(gap, phi, samples.chain_lengths());
  return r;
}

RemainderReport stein_remainder_check(const EmpiricalMeasure& samples,
                                      const SteinSolution1D& sol, double m) {
  require_kinetic_samples(samples);
  if (!(m > 0.0)) throw ArgumentError("mass must be positive");
  const std::size_t n = samples.size();
  std::vector<double> gap(n), rem(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = samples.position(i)[0], y = samples.velocity(i)[0];
    const auto d = sol.derivatives_at(x);
    gap[i] = sol.h.at(x) - sol.nu_h;
    rem[i] = -(0.5 * m * m * y * y * y * d[2] + m * sol.spec->drift_1d(x) * d[1] * y);
  }
  RemainderReport r;
  r.m = m;
  r.gap_remainder = paired_check(gap, rem, samples.chain_lengths());
  return r;
}

RemainderScaling fit_remainder_scaling(std::vector<RemainderReport> rows) {
  if (rows.size() < 2) throw ArgumentError("remainder scaling needs at least two masses");
  RemainderScaling out;
  std::vector<double> design, y, w;
  for (const auto& r : rows) {
    const auto& e = r.gap_remainder.rhs;
    if (!(std::abs(e.mean) > 0.0) || !(r.m > 0.0))
      throw ArgumentError("remainder estimate vanishes at m = " + std::to_string(r.m));
    design.push_back(1.0);
    design.push_back(std::log(r.m));
    y.push_back(std::log(std::abs(e.mean)));
    const double rel = e.se / std::abs(e.mean);
    w.push_back(rel > 0.0 ? 1.0 / (rel * rel) : 1e12);
    out.agreement = out.agreement && r.gap_remainder.passed;
  }
  auto fit = stats::weighted_least_squares(design, 2, y, w, false);
  out.slope = fit.coef[1];
  out.slope_se = std::sqrt(fit.cov[3] * std::max(1.0, fit.residual_variance));
  out.rows = std::move(rows);
  return out;
}

void write_stein_csv(const std::string& path, const SteinSolution1D& sol) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  out << "x,f,fp,fpp,fppp,p\n" << std::setprecision(17);
  for (std::size_t i = 0; i < sol.grid.size(); ++i)
    out << sol.grid[i] << ',' << sol.f[i] << ',' << sol.fp[i] << ',' << sol.fpp[i] << ','
        << sol.fppp[i] << ',' << sol.p[i] << '\n';
  if (!out) throw ArgumentError("failed writing '" + path + "'");
}

}  // namespace kramers

#ifndef KRAMERS_STEIN1D_HPP_
#define KRAMERS_STEIN1D_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kramers/ergodic.hpp"
#include "kramers/model.hpp"
#include "kramers/stats.hpp"

namespace kramers {

// Stationary density of dX = b dt + sigma dB on [-R, R], p proportional to
// sigma^{-2} exp(int_0^x 2b/sigma^2). Grid x_i = -R + i h, i = 0..n, with
// x_{n/2} = 0. Integrals use 8-point Gauss-Legendre on every panel.
struct Density1D {
  double radius = 0.0;
  double spacing = 0.0;
  std::vector<double> grid;
  std::vector<double> values;      // normalized density
  std::vector<double> log_values;  // log of the unnormalized density
  double log_normalization = 0.0;  // values = exp(log_values - log_normalization)
  std::vector<double> cdf;         // at grid points
  std::vector<double> node_x, node_weight, node_values;  // quadrature nodes
  double tail_mass_estimate = 0.0;
};

// R with c1 - c2 R^2 = -40 max(1, sigma_sup^2).
double default_stein_radius(const ModelSpec& spec);
inline constexpr double kDefaultSteinSpacing = 1.0 / 128.0;

// Throws ArgumentError for d != 1, R <= 0 or n_grid < 8 (n_grid is rounded
// up to even), DomainError when the density is not integrable or the tail
// mass beyond R exceeds 1e-10, and also when p underflows on the grid.
Density1D invariant_density_1d(const ModelSpec& spec, std::optional<double> radius = {},
                               std::optional<int> n_grid = {});

// Quadrature of h against the density. Throws ModelEvaluationError when h is
// not finite on the nodes.
double nu_expectation(const Density1D& dens, const TestFunction& h);

// Draws n i.i.d. points from the density by inverting its CDF.
EmpiricalMeasure sample_density_1d(const Density1D& dens, std::size_t n, std::uint64_t seed);

struct SteinSolution1D {
  std::shared_ptr<const ModelSpec> spec;
  TestFunction h;
  double nu_h = 0.0;
  double radius = 0.0;
  double spacing = 0.0;
  double boundary_layer = 0.0;  // R / 10, excluded from every sup-norm
  std::vector<double> grid, f, fp, fpp, fppp, p;
  bool analytic_model_derivatives = false;
  // sup over the interior of |b f' + sigma^2 f''/2 - (h - nu(h))| with f''
  // from the algebraic formula and with f'' from differencing f'.
  double residual_sup = 0.0;
  double discrete_residual_sup = 0.0;
  // sup |D f' - f''| and |D f'' - f'''| with fourth-order differences.
  double fpp_consistency = 0.0;
  double fppp_consistency = 0.0;

  bool in_interior(std::size_t i) const {
    return std::abs(grid[i]) <= radius - boundary_layer;
  }
  // f', f'', f''' at an arbitrary point: Hermite interpolation of f' and the
  // Stein equation for the higher derivatives. Throws DomainError outside
  // [-R, R].
  std::array<double, 3> derivatives_at(double x) const;
};

inline constexpr double kSteinResidualTolerance = 1e-8;

// f' = 2 G / (sigma^2 p) with G the integral of (h - nu(h)) p from the
// nearer end of the domain; f'' and f''' from the equation and its
// derivative; f from f' with f(0) = 0.
SteinSolution1D solve_stein_1d(const ModelSpec& spec, const Density1D& dens,
                               const TestFunction& h);

struct GrowthReport {
  // sup over the interior of |f|/(1+x^2), |f'|/(1+|x|^3), |f''|/(1+x^4),
  // |f'''|/(1+|x|^5).
  std::array<double, 4> sup_ratio{};
  std::array<double, 4> argmax{};
  std::array<bool, 4> interior{};  // argmax inside 90% of the interior
  bool passed = true;
};

GrowthReport verify_regularity_growth(const SteinSolution1D& sol);

struct DomainStabilityReport {
  GrowthReport base, extended;
  std::array<double, 4> relative_change{};
  bool passed = true;  // interior maxima and every change within 20%
};

// Solves on [-R, R] and [-factor R, factor R] at equal spacing and compares
// the growth ratios.
DomainStabilityReport regularity_domain_stability(const ModelSpec& spec, const TestFunction& h,
                                                  std::optional<double> radius = {},
                                                  double factor = 1.5,
                                                  double spacing = kDefaultSteinSpacing);

struct ModulusReport {
  double sup = 0.0;
  double x = 0.0, y = 0.0;
  std::size_t pairs = 0;
};

// sup over interior grid pairs 0 < |x-y| <= 1/8 of
// |f''(x) - f''(y)| / (|x-y| |ln|x-y|| (1+|x|^5)). Throws PreconditionError
// when the spacing exceeds 1/64.
ModulusReport hessian_log_modulus_check(const SteinSolution1D& sol);

struct ModulusRefinementReport {
  ModulusReport coarse, fine;
  double relative_change = 0.0;
  bool passed = true;  // finite and within 20%
};

ModulusRefinementReport hessian_modulus_refinement(const ModelSpec& spec, const TestFunction& h,
                                                   std::optional<double> radius = {},
                                                   double spacing = 1.0 / 64.0);

struct IdentityCheck {
  stats::MeanEstimate lhs, rhs;
  stats::MeanEstimate difference;  // paired lhs - rhs per sample
  double z = 0.0;                  // |difference| / se
  bool passed = true;              // z <= 4
};

struct StationaryIdentityReport {
  double m = 0.0;
  IdentityCheck velocity_gradient;  // E[Y f'(X)] against 0
  IdentityCheck gap_phi;            // E h(X) - nu(h) against E[sigma^2 f''/2 - m Y^2 f'']
};

// Throws PreconditionError when the samples carry no velocities or are not
// one-dimensional kinetic samples (m taken from the provenance).
StationaryIdentityReport stationary_identity_check(const EmpiricalMeasure& samples,
                                                   const SteinSolution1D& sol);

struct RemainderReport {
  double m = 0.0;
  IdentityCheck gap_remainder;  // E h(X) - nu(h) against -E[m^2 Y^3 f'''/2 + m b f'' Y]
};

RemainderReport stein_remainder_check(const EmpiricalMeasure& samples,
                                      const SteinSolution1D& sol, double m);

struct RemainderScaling {
  std::vector<RemainderReport> rows;
  double slope = 0.0, slope_se = 0.0;  // log |remainder| against log m
  bool agreement = true;               // every row within 4 se
};

// Fits log |remainder| on log m, weights from the delta method.
RemainderScaling fit_remainder_scaling(std::vector<RemainderReport> rows);

// Columns x, f, fp, fpp, fppp, p. Throws ArgumentError when the file cannot
// be written.
void write_stein_csv(const std::string& path, const SteinSolution1D& sol);

}  // namespace kramers

#endif  // KRAMERS_STEIN1D_HPP_

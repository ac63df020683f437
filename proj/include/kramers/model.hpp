#ifndef KRAMERS_MODEL_HPP_
#define KRAMERS_MODEL_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kramers {

// x -> b(x), written into `out` (size d).
using VectorField =
    std::function<void(std::span<const double> x, std::span<double> out)>;
// x -> sigma(x), written row-major into `out` (size d*d).
using MatrixField =
    std::function<void(std::span<const double> x, std::span<double> out)>;
using ScalarMap = std::function<double(double)>;

// Declared constants of the standing assumptions:
//   |b(x)-b(y)| + ||sigma(x)-sigma(y)|| <= L |x-y|,  |b(x)|^2 <= Lb (1+|x|^2)
//   sigma sigma^T >= sigma0 I,  ||sigma(x)|| <= sigma_sup
//   <x, b(x)> <= c1 - c2 |x|^2
// Norms on matrices are Hilbert-Schmidt.
struct AssumptionConstants {
  double lipschitz_L = 0.0;
  double growth_Lb = 0.0;
  double ellipticity_sigma0 = 0.0;
  double dissipative_c1 = 0.0;
  double dissipative_c2 = 0.0;
  double sigma_sup = 0.0;

  bool operator==(const AssumptionConstants&) const = default;
};

// Immutable description of a diffusion model: drift, diffusion, declared
// constants and, for d = 1, optional analytic derivatives b' and sigma'.
class ModelSpec {
 public:
  struct Options {
    std::string family = "custom";
    std::map<std::string, double> params;
    ScalarMap drift_derivative_1d;      // b'(x), d = 1 only
    ScalarMap diffusion_derivative_1d;  // sigma'(x), d = 1 only
    bool gradient_drift = false;
    bool constant_diffusion = false;
  };

  // Throws ArgumentError on d < 1 or constants outside their domains
  // (c2, sigma0, sigma_sup must be positive; L, Lb, c1 non-negative).
  ModelSpec(int dimension, VectorField drift, MatrixField diffusion,
            AssumptionConstants constants, Options options);
  ModelSpec(int dimension, VectorField drift, MatrixField diffusion,
            AssumptionConstants constants)
      : ModelSpec(dimension, std::move(drift), std::move(diffusion), constants,
                  Options{}) {}

  int dimension() const { return dimension_; }
  const AssumptionConstants& constants() const { return constants_; }
  const std::string& family() const { return options_.family; }
  const std::map<std::string, double>& params() const { return options_.params; }
  bool gradient_drift() const { return options_.gradient_drift; }
  bool constant_diffusion() const { return options_.constant_diffusion; }

  void drift(std::span<const double> x, std::span<double> out) const {
    drift_(x, out);
  }
  void diffusion(std::span<const double> x, std::span<double> out) const {
    diffusion_(x, out);
  }

  // Scalar conveniences for d = 1.
  double drift_1d(double x) const;
  double diffusion_1d(double x) const;
  bool has_analytic_derivatives_1d() const {
    return static_cast<bool>(options_.drift_derivative_1d) &&
           static_cast<bool>(options_.diffusion_derivative_1d);
  }
  // Analytic when supplied, otherwise central differences with relative step.
  double drift_derivative_1d(double x) const;
  double diffusion_derivative_1d(double x) const;

  // min{c2 / (2 Lb), 2 / c2, 1}: the mass range of the kinetic moment and
  // drift estimates.
  double admissible_mass() const;

  // Stable 64-bit fingerprint of family, dimension, params and constants.
  std::uint64_t fingerprint() const;

 private:
  int dimension_;
  VectorField drift_;
  MatrixField diffusion_;
  AssumptionConstants constants_;
  Options options_;
};

struct KineticState {
  std::vector<double> x;
  std::vector<double> y;
  double m = 1.0;

  // Throws ArgumentError when m <= 0, sizes differ or a coordinate is
  // non-finite.
  void validate() const;
};

struct LimitState {
  std::vector<double> x;
  void validate() const;
};

// Test function h for the dual form of W1 and the Stein equation.
struct TestFunction {
  std::string name;
  std::function<double(std::span<const double>)> value;
  std::function<void(std::span<const double>, std::span<double>)> gradient;
  std::function<void(std::span<const double>, std::span<double>)> hessian;
  double lipschitz_bound = 1.0;
  bool vanishes_at_origin = true;

  double operator()(std::span<const double> x) const { return value(x); }
  double at(double x) const { return value(std::span<const double>(&x, 1)); }
  // h'(x) for d = 1: analytic when `gradient` is set, else central difference.
  double derivative_1d(double x) const;
  bool declared_lip0_1() const {
    return lipschitz_bound <= 1.0 && vanishes_at_origin;
  }
};

// Built-in one-dimensional test functions.
TestFunction identity_test_function();     // h(x) = x
TestFunction tanh_test_function();         // h(x) = tanh x
TestFunction smoothed_abs_test_function(double eps = 0.1);  // sqrt(x^2+eps^2)-eps
TestFunction sine_test_function();          // h(x) = sin x
TestFunction constant_test_function(double c);
TestFunction cubic_test_function();         // h(x) = x^3, not Lipschitz

// Checks |h(x)-h(y)| <= |x-y| (+1e-12) on sampled pairs and |h(0)| <= 1e-12.
bool check_lip0_1(const TestFunction& h, int dimension, double radius,
                  int count, std::uint64_t seed);

// Scalar function on phase space with optional analytic derivatives. Missing
// derivatives fall back to central differences.
struct PhaseFunction {
  std::function<double(std::span<const double> x, std::span<const double> y)>
      value;
  std::function<void(std::span<const double> x, std::span<const double> y,
                     std::span<double> out)>
      grad_x;
  std::function<void(std::span<const double> x, std::span<const double> y,
                     std::span<double> out)>
      grad_y;
  std::function<void(std::span<const double> x, std::span<const double> y,
                     std::span<double> out)>
      hess_yy;
};

// Scalar function on position space with optional analytic derivatives.
struct SpaceFunction {
  std::function<double(std::span<const double> x)> value;
  std::function<void(std::span<const double> x, std::span<double> out)> grad;
  std::function<void(std::span<const double> x, std::span<double> out)> hess;
};

struct ProbePlan {
  double radius = 20.0;
  int count = 4096;
  std::uint64_t seed = 0x5eed;

  bool operator==(const ProbePlan&) const = default;
};

// Uniform draws in the ball of radius R plus deterministic axis points
// (+-R k/8 along every axis and the origin).
std::vector<std::vector<double>> probe_points(int dimension,
                                              const ProbePlan& plan);

struct AssumptionCheck {
  std::string name;
  double worst_margin = 0.0;  // max of (lhs - rhs); <= 0 means satisfied
  std::vector<double> witness;
  std::vector<double> witness_pair;  // second point for two-point conditions
  bool passed = true;
};

struct ValidationReport {
  std::vector<AssumptionCheck> checks;
  bool passed = true;
  const AssumptionCheck& find(const std::string& name) const;
};

inline constexpr double kViolationTolerance = 1e-12;

// Samples every assumption and records the worst margin. Throws
// ArgumentError for n < 1 or R <= 0 and ModelEvaluationError when the drift
// or diffusion is non-finite at a probe point.
ValidationReport validate_model(const ModelSpec& spec, const ProbePlan& probe);

// V_m(x, y) = 2|x|^2 + 6 m^2 |y|^2 + 4 m <x, y>.
double lyapunov_vm(const KineticState& state);
// V_m with analytic derivatives, as a phase function for generator tests.
PhaseFunction lyapunov_phase_function(double m);

// A_m g = <y, grad_x g> + (1/m) <b - y, grad_y g>
//         + (1/(2 m^2)) <sigma sigma^T, hess_yy g>_HS.
double generator_kinetic_apply(const ModelSpec& spec, const PhaseFunction& g,
                               const KineticState& state);

// A g = <b, grad g> + 1/2 <sigma sigma^T, hess g>_HS.
double generator_limit_apply(const ModelSpec& spec, const SpaceFunction& g,
                             const LimitState& state);

// ---- Built-in model registry -------------------------------------------

// Families:
//   linear       b = -theta x, sigma = s I                     (theta, sigma)
//   linear_trig  d=1: b = -x + a cos x; d>=2: b_i = -x_i + a trig(x_{i+1})
//                sigma = (s0 + s1 / (1 + |x|^2)) I             (a, s0, s1)
//   double_well  b = -theta x + a tanh(x) componentwise, sigma = s I
//                                                     (theta, a, sigma)
std::vector<std::string> builtin_families();
bool is_builtin_family(const std::string& family);

// Parameters filled with family defaults; unknown keys -> ArgumentError.
std::map<std::string, double> builtin_params(
    const std::string& family, const std::map<std::string, double>& given);

// Constants that provably satisfy the assumptions for the family.
AssumptionConstants builtin_constants(const std::string& family, int dimension,
                                      const std::map<std::string, double>& params);

ModelSpec make_builtin_model(const std::string& family, int dimension,
                             const std::map<std::string, double>& params,
                             const AssumptionConstants& constants);
ModelSpec make_builtin_model(const std::string& family, int dimension,
                             const std::map<std::string, double>& params = {});

// b = -x + cos(x)/4, sigma = 1 + (1/2)/(1+x^2) with declared constants
// L = 1.6, Lb = 17/16, sigma0 = 1, c1 = 1, c2 = 1/2, sigma_sup = 3/2.
ModelSpec reference_model_1d();
// b = -theta x, sigma = s I.
ModelSpec linear_model(int dimension, double theta = 1.0, double sigma = 1.4142135623730951);

}  // namespace kramers

#endif  // KRAMERS_MODEL_HPP_

#include "kramers/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "kramers/errors.hpp"
#include "kramers/rng.hpp"

namespace kramers {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::string format_point(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

void require_finite(std::span<const double> values, std::span<const double> at,
                    const char* what) {
  for (double v : values)
    if (!std::isfinite(v))
      throw ModelEvaluationError(std::string("non-finite ") + what + " at x = " +
                                 format_point(at));
}

// Central-difference step relative to the point size.
double gradient_step(std::span<const double> x, std::span<const double> y = {}) {
  return 1e-5 * (1.0 + std::sqrt(norm2(x) + norm2(y)));
}
// Second differences use a larger step: the optimum for O(h^2) central
// second differences sits near eps^(1/4).
double hessian_step(std::span<const double> x, std::span<const double> y = {}) {
  return 1e-4 * (1.0 + std::sqrt(norm2(x) + norm2(y)));
}

double frobenius(std::span<const double> m) { return std::sqrt(norm2(m)); }

double min_eig_sigma_sigma_t(std::span<const double> sigma, int d) {
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      s(sigma.data(), d, d);
  Eigen::MatrixXd a = s * s.transpose();
  if (d == 1) return a(0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// sigma sigma^T, row-major.
void sigma_sigma_t(std::span<const double> sigma, int d, std::span<double> out) {
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += sigma[i * d + k] * sigma[j * d + k];
      out[i * d + j] = s;
    }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

// ---- ModelSpec ----------------------------------------------------------

ModelSpec::ModelSpec(int dimension, VectorField drift, MatrixField diffusion,
                     AssumptionConstants constants, Options options)
    : dimension_(dimension),
      drift_(std::move(drift)),
      diffusion_(std::move(diffusion)),
      constants_(constants),
      options_(std::move(options)) {
  if (dimension_ < 1) throw ArgumentError("model dimension must be >= 1");
  if (!drift_ || !diffusion_) throw ArgumentError("model needs drift and diffusion");
  const auto& c = constants_;
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(c.lipschitz_L) || c.lipschitz_L < 0.0)
    throw ArgumentError("lipschitz_L must be a non-negative real");
  if (!finite(c.growth_Lb) || c.growth_Lb < 0.0)
    throw ArgumentError("growth_Lb must be a non-negative real");
  if (!finite(c.ellipticity_sigma0) || c.ellipticity_sigma0 <= 0.0)
    throw ArgumentError("ellipticity_sigma0 must be positive");
  if (!finite(c.dissipative_c1) || c.dissipative_c1 < 0.0)
    throw ArgumentError("dissipative_c1 must be a non-negative real");
  if (!finite(c.dissipative_c2) || c.dissipative_c2 <= 0.0)
    throw ArgumentError("dissipative_c2 must be positive");
  if (!finite(c.sigma_sup) || c.sigma_sup <= 0.0)
    throw ArgumentError("sigma_sup must be positive");
}

double ModelSpec::drift_1d(double x) const {
  double out = 0.0;
  drift_(std::span<const double>(&x, 1), std::span<double>(&out, 1));
  return out;
}

double ModelSpec::diffusion_1d(double x) const {
  double out = 0.0;
  diffusion_(std::span<const double>(&x, 1), std::span<double>(&out, 1));
  return out;
}

double ModelSpec::drift_derivative_1d(double x) const {
  if (options_.drift_derivative_1d) return options_.drift_derivative_1d(x);
  const double h = 1e-5 * (1.0 + std::abs(x));
  return (drift_1d(x + h) - drift_1d(x - h)) / (2.0 * h);
}

double ModelSpec::diffusion_derivative_1d(double x) const {
  if (options_.diffusion_derivative_1d) return options_.diffusion_derivative_1d(x);
  const double h = 1e-5 * (1.0 + std::abs(x));
  return (diffusion_1d(x + h) - diffusion_1d(x - h)) / (2.0 * h);
}

double ModelSpec::admissible_mass() const {
  const auto& c = constants_;
  double bound = std::min(2.0 / c.dissipative_c2, 1.0);
  if (c.growth_Lb > 0.0) bound = std::min(bound, c.dissipative_c2 / (2.0 * c.growth_Lb));
  return bound;
}

std::uint64_t ModelSpec::fingerprint() const {
  std::ostringstream os;
  os.precision(17);
  os << options_.family << '|' << dimension_;
  for (const auto& [k, v] : options_.params) os << '|' << k << '=' << v;
  const auto& c = constants_;
  os << '|' << c.lipschitz_L << '|' << c.growth_Lb << '|' << c.ellipticity_sigma0
     << '|' << c.dissipative_c1 << '|' << c.dissipative_c2 << '|' << c.sigma_sup;
  return fnv1a(os.str());
}

// ---- States -------------------------------------------------------------

void KineticState::validate() const {
  if (!(m > 0.0) || !std::isfinite(m)) throw ArgumentError("mass must be positive");
  if (x.size() != y.size() || x.empty())
    throw ArgumentError("kinetic state needs matching non-empty x and y");
  for (double v : x)
    if (!std::isfinite(v)) throw ArgumentError("non-finite position coordinate");
  for (double v : y)
    if (!std::isfinite(v)) throw ArgumentError("non-finite velocity coordinate");
}

void LimitState::validate() const {
  if (x.empty()) throw ArgumentError("limit state needs a position");
  for (double v : x)
    if (!std::isfinite(v)) throw ArgumentError("non-finite position coordinate");
}

// ---- Test functions -----------------------------------------------------

double TestFunction::derivative_1d(double x) const {
  if (gradient) {
    double g = 0.0;
    gradient(std::span<const double>(&x, 1), std::span<double>(&g, 1));
    return g;
  }
  const double h = 1e-5 * (1.0 + std::abs(x));
  return (at(x + h) - at(x - h)) / (2.0 * h);
}

TestFunction identity_test_function() {
  TestFunction h;
  h.name = "x";
  h.value = [](std::span<const double> x) { return x[0]; };
  h.gradient = [](std::span<const double>, std::span<double> g) { g[0] = 1.0; };
  h.hessian = [](std::span<const double>, std::span<double> H) { H[0] = 0.0; };
  return h;
}

TestFunction tanh_test_function() {
  TestFunction h;
  h.name = "tanh";
  h.value = [](std::span<const double> x) { return std::tanh(x[0]); };
  h.gradient = [](std::span<const double> x, std::span<double> g) {
    double c = std::cosh(x[0]);
    g[0] = 1.0 / (c * c);
  };
  h.hessian = [](std::span<const double> x, std::span<double> H) {
    double t = std::tanh(x[0]);
    H[0] = -2.0 * t * (1.0 - t * t);
  };
  return h;
}

TestFunction smoothed_abs_test_function(double eps) {
  TestFunction h;
  h.name = "smooth_abs";
  h.value = [eps](std::span<const double> x) {
    return std::sqrt(x[0] * x[0] + eps * eps) - eps;
  };
  h.gradient = [eps](std::span<const double> x, std::span<double> g) {
    g[0] = x[0] / std::sqrt(x[0] * x[0] + eps * eps);
  };
  h.hessian = [eps](std::span<const double> x, std::span<double> H) {
    double r = std::sqrt(x[0] * x[0] + eps * eps);
    H[0] = eps * eps / (r * r * r);
  };
  return h;
}

TestFunction sine_test_function() {
  TestFunction h;
  h.name = "sin";
  h.value = [](std::span<const double> x) { return std::sin(x[0]); };
  h.gradient = [](std::span<const double> x, std::span<double> g) {
    g[0] = std::cos(x[0]);
  };
  h.hessian = [](std::span<const double> x, std::span<double> H) {
    H[0] = -std::sin(x[0]);
  };
  return h;
}

TestFunction constant_test_function(double c) {
  TestFunction h;
  h.name = "constant";
  h.value = [c](std::span<const double>) { return c; };
  h.gradient = [](std::span<const double>, std::span<double> g) { g[0] = 0.0; };
  h.hessian = [](std::span<const double>, std::span<double> H) { H[0] = 0.0; };
  h.lipschitz_bound = 0.0;
  h.vanishes_at_origin = (c == 0.0);
  return h;
}

TestFunction cubic_test_function() {
  TestFunction h;
  h.name = "cubic";
  h.value = [](std::span<const double> x) { return x[0] * x[0] * x[0]; };
  h.gradient = [](std::span<const double> x, std::span<double> g) {
    g[0] = 3.0 * x[0] * x[0];
  };
  h.hessian = [](std::span<const double> x, std::span<double> H) {
    H[0] = 6.0 * x[0];
  };
  h.lipschitz_bound = std::numeric_limits<double>::infinity();
  return h;
}

bool check_lip0_1(const TestFunction& h, int dimension, double radius, int count,
                  std::uint64_t seed) {
  std::vector<double> origin(dimension, 0.0);
  if (std::abs(h(origin)) > kViolationTolerance) return false;
  auto pts = probe_points(dimension, ProbePlan{radius, count, seed});
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto& a = pts[i];
    const auto& b = pts[i + 1];
    double dist = 0.0;
    for (int k = 0; k < dimension; ++k) dist += (a[k] - b[k]) * (a[k] - b[k]);
    dist = std::sqrt(dist);
    if (std::abs(h(a) - h(b)) > dist + kViolationTolerance) return false;
  }
  return true;
}

// ---- Probing and validation ---------------------------------------------

std::vector<std::vector<double>> probe_points(int dimension, const ProbePlan& plan) {
  if (plan.count < 1) throw ArgumentError("probe count must be >= 1");
  if (!(plan.radius > 0.0)) throw ArgumentError("probe radius must be positive");
  std::vector<std::vector<double>> pts;
  pts.reserve(plan.count + 16 * dimension + 1);
  Rng rng(derive_seed(plan.seed, {stream_tag::kProbe}));
  for (int i = 0; i < plan.count; ++i) {
    std::vector<double> dir(dimension);
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (auto& v : dir) {
        v = rng.normal();
        n2 += v * v;
      }
    } while (n2 == 0.0);
    double r = plan.radius * std::pow(rng.uniform(), 1.0 / dimension);
    double scale = r / std::sqrt(n2);
    for (auto& v : dir) v *= scale;
    pts.push_back(std::move(dir));
  }
  pts.emplace_back(dimension, 0.0);
  for (int axis = 0; axis < dimension; ++axis)
    for (int k = 1; k <= 8; ++k)
      for (double sign : {-1.0, 1.0}) {
        std::vector<double> p(dimension, 0.0);
        p[axis] = sign * plan.radius * k / 8.0;
        pts.push_back(std::move(p));
      }
  return pts;
}

const AssumptionCheck& ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw ArgumentError("no assumption check named " + name);
}

ValidationReport validate_model(const ModelSpec& spec, const ProbePlan& probe) {
  const int d = spec.dimension();
  const auto& c = spec.constants();
  auto pts = probe_points(d, probe);

  AssumptionCheck lip{"lipschitz", -std::numeric_limits<double>::infinity(), {}, {}, true};
  AssumptionCheck growth{"linear_growth", -std::numeric_limits<double>::infinity(), {}, {}, true};
  AssumptionCheck ellip{"ellipticity", -std::numeric_limits<double>::infinity(), {}, {}, true};
  AssumptionCheck bound{"diffusion_bound", -std::numeric_limits<double>::infinity(), {}, {}, true};
  AssumptionCheck diss{"dissipativity", -std::numeric_limits<double>::infinity(), {}, {}, true};

  std::vector<double> bx(d), by(d), sx(d * d), sy(d * d), q(d);
  auto eval = [&](std::span<const double> x, std::span<double> b, std::span<double> s) {
    spec.drift(x, b);
    require_finite(b, x, "drift");
    spec.diffusion(x, s);
    require_finite(s, x, "diffusion");
  };
  auto update = [](AssumptionCheck& chk, double margin, std::span<const double> x,
                   std::span<const double> y = {}) {
    if (margin > chk.worst_margin) {
      chk.worst_margin = margin;
      chk.witness.assign(x.begin(), x.end());
      chk.witness_pair.assign(y.begin(), y.end());
    }
  };
  auto lipschitz_margin = [&](std::span<const double> x, std::span<const double> y) {
    eval(x, bx, sx);
    eval(y, by, sy);
    double db = 0.0, ds = 0.0, dx = 0.0;
    for (int i = 0; i < d; ++i) {
      db += (bx[i] - by[i]) * (bx[i] - by[i]);
      dx += (x[i] - y[i]) * (x[i] - y[i]);
    }
    for (int i = 0; i < d * d; ++i) ds += (sx[i] - sy[i]) * (sx[i] - sy[i]);
    return std::sqrt(db) + std::sqrt(ds) - c.lipschitz_L * std::sqrt(dx);
  };

  Rng rng(derive_seed(probe.seed, {stream_tag::kProbe, 1}));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& x = pts[i];
    eval(x, bx, sx);
    const double r2 = norm2(x);
    update(growth, norm2(bx) - c.growth_Lb * (1.0 + r2), x);
    update(ellip, c.ellipticity_sigma0 - min_eig_sigma_sigma_t(sx, d), x);
    update(bound, frobenius(sx) - c.sigma_sup, x);
    update(diss, dot(x, bx) - (c.dissipative_c1 - c.dissipative_c2 * r2), x);

    // Far pair with the next probe point, and a near pair resolving the
    // local slope.
    const auto& far = pts[(i + 1) % pts.size()];
    update(lip, lipschitz_margin(x, far), x, far);
    double delta = 1e-3 * (1.0 + std::sqrt(r2));
    double qn = 0.0;
    for (auto& v : q) {
      v = rng.normal();
      qn += v * v;
    }
    qn = std::sqrt(qn);
    for (int k = 0; k < d; ++k) q[k] = x[k] + delta * q[k] / qn;
    update(lip, lipschitz_margin(x, q), x, q);
  }

  ValidationReport report;
  for (auto* chk : {&lip, &growth, &ellip, &bound, &diss}) {
    chk->passed = chk->worst_margin <= kViolationTolerance;
    report.passed = report.passed && chk->passed;
    report.checks.push_back(*chk);
  }
  return report;
}

// ---- Lyapunov function and generators -----------------------------------

double lyapunov_vm(const KineticState& s) {
  const double m = s.m;
  return 2.0 * norm2(s.x) + 6.0 * m * m * norm2(s.y) + 4.0 * m * dot(s.x, s.y);
}

PhaseFunction lyapunov_phase_function(double m) {
  PhaseFunction g;
  g.value = [m](std::span<const double> x, std::span<const double> y) {
    return 2.0 * norm2(x) + 6.0 * m * m * norm2(y) + 4.0 * m * dot(x, y);
  };
  g.grad_x = [m](std::span<const double> x, std::span<const double> y,
                 std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = 4.0 * x[i] + 4.0 * m * y[i];
  };
  g.grad_y = [m](std::span<const double> x, std::span<const double> y,
                 std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] = 12.0 * m * m * y[i] + 4.0 * m * x[i];
  };
  g.hess_yy = [m](std::span<const double> x, std::span<const double>,
                  std::span<double> out) {
    const std::size_t d = x.size();
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) out[i * d + i] = 12.0 * m * m;
  };
  return g;
}

double generator_kinetic_apply(const ModelSpec& spec, const PhaseFunction& g,
                               const KineticState& state) {
  state.validate();
  const int d = spec.dimension();
  if (static_cast<int>(state.x.size()) != d)
    throw ArgumentError("state dimension does not match the model");
  const double m = state.m;
  std::span<const double> x(state.x), y(state.y);

  std::vector<double> gx(d), gy(d), hyy(d * d);
  if (g.grad_x) {
    g.grad_x(x, y, gx);
  } else {
    const double h = gradient_step(x, y);
    std::vector<double> xp(x.begin(), x.end());
    for (int i = 0; i < d; ++i) {
      xp[i] = x[i] + h;
      double up = g.value(xp, y);
      xp[i] = x[i] - h;
      double dn = g.value(xp, y);
      xp[i] = x[i];
      gx[i] = (up - dn) / (2.0 * h);
    }
  }
  if (g.grad_y) {
    g.grad_y(x, y, gy);
  } else {
    const double h = gradient_step(x, y);
    std::vector<double> yp(y.begin(), y.end());
    for (int i = 0; i < d; ++i) {
      yp[i] = y[i] + h;
      double up = g.value(x, yp);
      yp[i] = y[i] - h;
      double dn = g.value(x, yp);
      yp[i] = y[i];
      gy[i] = (up - dn) / (2.0 * h);
    }
  }
  if (g.hess_yy) {
    g.hess_yy(x, y, hyy);
  } else {
    const double h = hessian_step(x, y);
    std::vector<double> yp(y.begin(), y.end());
    const double g0 = g.value(x, y);
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        double v;
        if (i == j) {
          yp[i] = y[i] + h;
          double up = g.value(x, yp);
          yp[i] = y[i] - h;
          double dn = g.value(x, yp);
          yp[i] = y[i];
          v = (up - 2.0 * g0 + dn) / (h * h);
        } else {
          double acc = 0.0;
          for (double si : {1.0, -1.0})
            for (double sj : {1.0, -1.0}) {
              yp[i] = y[i] + si * h;
              yp[j] = y[j] + sj * h;
              acc += si * sj * g.value(x, yp);
              yp[i] = y[i];
              yp[j] = y[j];
            }
          v = acc / (4.0 * h * h);
        }
        hyy[i * d + j] = v;
        hyy[j * d + i] = v;
      }
    }
  }
  for (double v : gx)
    if (!std::isfinite(v)) throw ModelEvaluationError("non-finite x-gradient");
  for (double v : gy)
    if (!std::isfinite(v)) throw ModelEvaluationError("non-finite y-gradient");
  for (double v : hyy)
    if (!std::isfinite(v)) throw ModelEvaluationError("non-finite y-Hessian");

  std::vector<double> b(d), sigma(d * d), a(d * d);
  spec.drift(x, b);
  require_finite(b, x, "drift");
  spec.diffusion(x, sigma);
  require_finite(sigma, x, "diffusion");
  sigma_sigma_t(sigma, d, a);

  double transport = dot(y, gx);
  double friction = 0.0;
  for (int i = 0; i < d; ++i) friction += (b[i] - y[i]) * gy[i];
  double noise = 0.0;
  for (int i = 0; i < d * d; ++i) noise += a[i] * hyy[i];
  return transport + friction / m + noise / (2.0 * m * m);
}

double generator_limit_apply(const ModelSpec& spec, const SpaceFunction& g,
                             const LimitState& state) {
  state.validate();
  const int d = spec.dimension();
  if (static_cast<int>(state.x.size()) != d)
    throw ArgumentError("state dimension does not match the model");
  std::span<const double> x(state.x);

  std::vector<double> grad(d), hess(d * d);
  if (g.grad) {
    g.grad(x, grad);
  } else {
    const double h = gradient_step(x);
    std::vector<double> xp(x.begin(), x.end());
    for (int i = 0; i < d; ++i) {
      xp[i] = x[i] + h;
      double up = g.value(xp);
      xp[i] = x[i] - h;
      double dn = g.value(xp);
      xp[i] = x[i];
      grad[i] = (up - dn) / (2.0 * h);
    }
  }
  if (g.hess) {
    g.hess(x, hess);
  } else {
    const double h = hessian_step(x);
    std::vector<double> xp(x.begin(), x.end());
    const double g0 = g.value(x);
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        double v;
        if (i == j) {
          xp[i] = x[i] + h;
          double up = g.value(xp);
          xp[i] = x[i] - h;
          double dn = g.value(xp);
          xp[i] = x[i];
          v = (up - 2.0 * g0 + dn) / (h * h);
        } else {
          double acc = 0.0;
          for (double si : {1.0, -1.0})
            for (double sj : {1.0, -1.0}) {
              xp[i] = x[i] + si * h;
              xp[j] = x[j] + sj * h;
              acc += si * sj * g.value(xp);
              xp[i] = x[i];
              xp[j] = x[j];
            }
          v = acc / (4.0 * h * h);
        }
        hess[i * d + j] = v;
        hess[j * d + i] = v;
      }
    }
  }
  for (double v : grad)
    if (!std::isfinite(v)) throw ModelEvaluationError("non-finite gradient");
  for (double v : hess)
    if (!std::isfinite(v)) throw ModelEvaluationError("non-finite Hessian");

  std::vector<double> b(d), sigma(d * d), a(d * d);
  spec.drift(x, b);
  require_finite(b, x, "drift");
  spec.diffusion(x, sigma);
  require_finite(sigma, x, "diffusion");
  sigma_sigma_t(sigma, d, a);
  double noise = 0.0;
  for (int i = 0; i < d * d; ++i) noise += a[i] * hess[i];
  return dot(b, grad) + 0.5 * noise;
}

// ---- Registry -----------------------------------------------------------

namespace {

// max_r 2r/(1+r^2)^2, the Lipschitz constant of r -> 1/(1+r^2).
constexpr double kBumpSlope = 0.649519052838329;  // 3*sqrt(3)/8

const std::map<std::string, std::map<std::string, double>>& family_defaults() {
  static const std::map<std::string, std::map<std::string, double>> defaults = {
      {"linear", {{"theta", 1.0}, {"sigma", std::sqrt(2.0)}}},
      {"linear_trig", {{"a", 0.25}, {"s0", 1.0}, {"s1", 0.5}}},
      {"double_well", {{"theta", 1.0}, {"a", 2.0}, {"sigma", 1.0}}},
  };
  return defaults;
}

}  // namespace

std::vector<std::string> builtin_families() {
  std::vector<std::string> out;
  for (const auto& [k, v] : family_defaults()) out.push_back(k);
  return out;
}

bool is_builtin_family(const std::string& family) {
  return family_defaults().count(family) > 0;
}

std::map<std::string, double> builtin_params(
    const std::string& family, const std::map<std::string, double>& given) {
  auto it = family_defaults().find(family);
  if (it == family_defaults().end())
    throw ArgumentError("unknown model family '" + family + "'");
  auto params = it->second;
  for (const auto& [k, v] : given) {
    if (!params.count(k))
      throw ArgumentError("family '" + family + "' has no parameter '" + k + "'");
    if (!std::isfinite(v)) throw ArgumentError("parameter '" + k + "' is not finite");
    params[k] = v;
  }
  return params;
}

AssumptionConstants builtin_constants(const std::string& family, int d,
                                      const std::map<std::string, double>& given) {
  auto p = builtin_params(family, given);
  const double rd = std::sqrt(static_cast<double>(d));
  AssumptionConstants c;
  if (family == "linear") {
    const double theta = p["theta"], s = std::abs(p["sigma"]);
    if (!(theta > 0.0)) throw ArgumentError("linear: theta must be positive");
    c.lipschitz_L = theta;
    c.growth_Lb = theta * theta;
    c.ellipticity_sigma0 = s * s;
    c.dissipative_c1 = 0.0;
    c.dissipative_c2 = theta;
    c.sigma_sup = s * rd;
  } else if (family == "linear_trig") {
    const double a = std::abs(p["a"]), s0 = p["s0"], s1 = p["s1"];
    const double smin = std::min(s0, s0 + s1), smax = std::max(s0, s0 + s1);
    if (!(smin > 0.0)) throw ArgumentError("linear_trig: diffusion must stay positive");
    c.lipschitz_L = 1.0 + a + kBumpSlope * std::abs(s1) * rd;
    c.growth_Lb = 1.0 + a * a * d;
    c.ellipticity_sigma0 = smin * smin;
    c.dissipative_c1 = a * a * d / 2.0;
    c.dissipative_c2 = 0.5;
    c.sigma_sup = smax * rd;
  } else {  // double_well
    const double theta = p["theta"], a = p["a"], s = std::abs(p["sigma"]);
    if (!(theta > 0.0)) throw ArgumentError("double_well: theta must be positive");
    c.lipschitz_L = std::max(theta, std::abs(a - theta));
    c.growth_Lb = theta * theta + a * a * d;
    c.ellipticity_sigma0 = s * s;
    if (a <= 0.0) {
      c.dissipative_c1 = 0.0;
      c.dissipative_c2 = theta;
    } else {
      c.dissipative_c1 = a * a * d / (2.0 * theta);
      c.dissipative_c2 = theta / 2.0;
    }
    c.sigma_sup = s * rd;
  }
  // Round-off headroom so declared constants are not violated by a few ulps.
  c.lipschitz_L *= 1.0 + 1e-12;
  c.growth_Lb *= 1.0 + 1e-12;
  c.ellipticity_sigma0 *= 1.0 - 1e-12;
  c.sigma_sup *= 1.0 + 1e-12;
  return c;
}

ModelSpec make_builtin_model(const std::string& family, int d,
                             const std::map<std::string, double>& given,
                             const AssumptionConstants& constants) {
  if (d < 1) throw ArgumentError("model dimension must be >= 1");
  auto p = builtin_params(family, given);
  ModelSpec::Options opt;
  opt.family = family;
  opt.params = p;

  VectorField drift;
  MatrixField diffusion;
  if (family == "linear") {
    const double theta = p["theta"], s = p["sigma"];
    drift = [theta](std::span<const double> x, std::span<double> out) {
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = -theta * x[i];
    };
    diffusion = [s, d](std::span<const double>, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
      for (int i = 0; i < d; ++i) out[i * d + i] = s;
    };
    opt.drift_derivative_1d = [theta](double) { return -theta; };
    opt.diffusion_derivative_1d = [](double) { return 0.0; };
    opt.gradient_drift = true;
    opt.constant_diffusion = true;
  } else if (family == "linear_trig") {
    const double a = p["a"], s0 = p["s0"], s1 = p["s1"];
    if (d == 1) {
      drift = [a](std::span<const double> x, std::span<double> out) {
        out[0] = -x[0] + a * std::cos(x[0]);
      };
      opt.drift_derivative_1d = [a](double x) { return -1.0 - a * std::sin(x); };
    } else {
      drift = [a, d](std::span<const double> x, std::span<double> out) {
        for (int i = 0; i < d; ++i) {
          const double nb = x[(i + 1) % d];
          out[i] = -x[i] + a * ((i % 2 == 0) ? std::sin(nb) : std::cos(nb));
        }
      };
    }
    diffusion = [s0, s1, d](std::span<const double> x, std::span<double> out) {
      double r2 = 0.0;
      for (double v : x) r2 += v * v;
      const double s = s0 + s1 / (1.0 + r2);
      std::fill(out.begin(), out.end(), 0.0);
      for (int i = 0; i < d; ++i) out[i * d + i] = s;
    };
    opt.diffusion_derivative_1d = [s1](double x) {
      const double q = 1.0 + x * x;
      return -2.0 * s1 * x / (q * q);
    };
    opt.gradient_drift = (d == 1);
    opt.constant_diffusion = (s1 == 0.0);
  } else if (family == "double_well") {
    const double theta = p["theta"], a = p["a"], s = p["sigma"];
    drift = [theta, a](std::span<const double> x, std::span<double> out) {
      for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = -theta * x[i] + a * std::tanh(x[i]);
    };
    diffusion = [s, d](std::span<const double>, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
      for (int i = 0; i < d; ++i) out[i * d + i] = s;
    };
    opt.drift_derivative_1d = [theta, a](double x) {
      const double c = std::cosh(x);
      return -theta + a / (c * c);
    };
    opt.diffusion_derivative_1d = [](double) { return 0.0; };
    opt.gradient_drift = true;
    opt.constant_diffusion = true;
  } else {
    throw ArgumentError("unknown model family '" + family + "'");
  }
  if (d != 1) {
    opt.drift_derivative_1d = nullptr;
    opt.diffusion_derivative_1d = nullptr;
  }
  return ModelSpec(d, std::move(drift), std::move(diffusion), constants, std::move(opt));
}

ModelSpec make_builtin_model(const std::string& family, int d,
                             const std::map<std::string, double>& params) {
  return make_builtin_model(family, d, params, builtin_constants(family, d, params));
}

ModelSpec reference_model_1d() {
  AssumptionConstants c;
  c.lipschitz_L = 1.6;
  c.growth_Lb = 17.0 / 16.0;
  c.ellipticity_sigma0 = 1.0;
  c.dissipative_c1 = 1.0;
  c.dissipative_c2 = 0.5;
  c.sigma_sup = 1.5;
  return make_builtin_model("linear_trig", 1, {{"a", 0.25}, {"s0", 1.0}, {"s1", 0.5}}, c);
}

ModelSpec linear_model(int d, double theta, double sigma) {
  return make_builtin_model("linear", d, {{"theta", theta}, {"sigma", sigma}});
}

}  // namespace kramers

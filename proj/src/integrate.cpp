#include "kramers/integrate.hpp"

#include <cmath>
#include <string>

#include "kramers/errors.hpp"

namespace kramers {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ArgumentError(std::string(what) + " must be positive and finite, got " +
                        std::to_string(v));
  }
}

// tau - 2 (1 - e^{-tau}) + (1 - e^{-2 tau}) / 2 without cancellation.
double position_variance_factor(double tau) {
  if (tau < 1.0) {
    // sum_{k>=3} (-1)^k (2 - 2^{k-1}) tau^k / k!
    double sum = 0.0;
    double pow_tau_over_fact = tau * tau / 2.0;  // tau^k / k! at k = 2
    double two_pow = 2.0;                        // 2^{k-1} at k = 2
    for (int k = 3; k < 40; ++k) {
      pow_tau_over_fact *= tau / k;
      two_pow *= 2.0;
      const double term = ((k % 2 == 0) ? 1.0 : -1.0) * (2.0 - two_pow) * pow_tau_over_fact;
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  const double one_minus = -std::expm1(-tau);
  const double one_minus_sq = -std::expm1(-2.0 * tau);
  return tau - 2.0 * one_minus + 0.5 * one_minus_sq;
}

// tau - (1 - e^{-tau}) without cancellation.
double drift_integral_factor(double tau) {
  if (tau < 1.0) {
    double sum = 0.0;
    double term = tau;
    for (int k = 2; k < 40; ++k) {
      term *= -tau / k;
      sum -= term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return tau + std::expm1(-tau);
}

}  // namespace

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::kinetic_exponential:
      return "kinetic_exponential";
    case Scheme::kinetic_euler:
      return "kinetic_euler";
    case Scheme::limit_euler:
      return "limit_euler";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "kinetic_exponential") return Scheme::kinetic_exponential;
  if (s == "kinetic_euler") return Scheme::kinetic_euler;
  if (s == "limit_euler") return Scheme::limit_euler;
  throw ArgumentError("unknown scheme '" + s + "'");
}

void IntegratorConfig::validate() const {
  require_positive(dt_max, "dt_max");
  if (!(mass_cfl > 0.0 && mass_cfl <= 1.0)) {
    throw ArgumentError("mass_cfl must lie in (0, 1], got " + std::to_string(mass_cfl));
  }
}

double IntegratorConfig::kinetic_dt(double m) const {
  require_positive(m, "m");
  return std::min(dt_max, mass_cfl * m);
}

ExponentialNoiseCovariance exponential_noise_covariance(double m, double dt) {
  require_positive(m, "m");
  require_positive(dt, "dt");
  const double tau = dt / m;
  const double one_minus = -std::expm1(-tau);
  const double one_minus_sq = -std::expm1(-2.0 * tau);
  ExponentialNoiseCovariance c;
  c.xx = m * position_variance_factor(tau);
  c.xy = 0.5 * one_minus * one_minus;
  c.yy = one_minus_sq / (2.0 * m);
  return c;
}

ExponentialKineticStepper::ExponentialKineticStepper(const ModelSpec& spec, double m,
                                                     double dt)
    : spec_(&spec), d_(spec.dimension()), m_(m), dt_(dt) {
  cov_ = exponential_noise_covariance(m, dt);
  const double one_minus = -std::expm1(-dt / m);
  decay_ = 1.0 - one_minus;
  y_from_b_ = one_minus;
  x_from_y_ = m * one_minus;
  x_from_b_ = m * drift_integral_factor(dt / m);
  l11_ = std::sqrt(cov_.xx);
  l21_ = l11_ > 0.0 ? cov_.xy / l11_ : 0.0;
  l22_ = std::sqrt(std::max(0.0, cov_.yy - l21_ * l21_));
  b_.resize(d_);
  sigma_.resize(static_cast<std::size_t>(d_) * d_);
  wx_.resize(d_);
  wy_.resize(d_);
}

void ExponentialKineticStepper::advance(std::span<double> x, std::span<double> y,
                                        Rng& rng) {
  spec_->drift(x, b_);
  spec_->diffusion(x, sigma_);
  if (d_ == 1) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double s = sigma_[0];
    const double nx = s * l11_ * z1;
    const double ny = s * (l21_ * z1 + l22_ * z2);
    const double y0 = y[0];
    x[0] += x_from_y_ * y0 + x_from_b_ * b_[0] + nx;
    y[0] = decay_ * y0 + y_from_b_ * b_[0] + ny;
    return;
  }
  for (int k = 0; k < d_; ++k) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    wx_[k] = l11_ * z1;
    wy_[k] = l21_ * z1 + l22_ * z2;
  }
  for (int i = 0; i < d_; ++i) {
    double nx = 0.0, ny = 0.0;
    for (int j = 0; j < d_; ++j) {
      nx += sigma_[i * d_ + j] * wx_[j];
      ny += sigma_[i * d_ + j] * wy_[j];
    }
    const double y0 = y[i];
    x[i] += x_from_y_ * y0 + x_from_b_ * b_[i] + nx;
    y[i] = decay_ * y0 + y_from_b_ * b_[i] + ny;
  }
}

EulerKineticStepper::EulerKineticStepper(const ModelSpec& spec, double m, double dt,
                                         double mass_cfl)
    : spec_(&spec), d_(spec.dimension()), m_(m), dt_(dt), sqrt_dt_(std::sqrt(dt)) {
  require_positive(m, "m");
  require_positive(dt, "dt");
  if (dt > mass_cfl * m * (1.0 + 1e-12)) {
    throw StabilityError("explicit kinetic step needs dt <= " + std::to_string(mass_cfl) +
                         " * m; got dt = " + std::to_string(dt) +
                         ", m = " + std::to_string(m));
  }
  b_.resize(d_);
  sigma_.resize(static_cast<std::size_t>(d_) * d_);
  xi_.resize(d_);
}

void EulerKineticStepper::advance(std::span<double> x, std::span<double> y, Rng& rng) {
  spec_->drift(x, b_);
  spec_->diffusion(x, sigma_);
  for (int k = 0; k < d_; ++k) xi_[k] = rng.normal();
  const double a = dt_ / m_;
  const double c = sqrt_dt_ / m_;
  for (int i = 0; i < d_; ++i) {
    double noise = 0.0;
    for (int j = 0; j < d_; ++j) noise += sigma_[i * d_ + j] * xi_[j];
    const double y0 = y[i];
    x[i] += y0 * dt_;
    y[i] = y0 + a * (b_[i] - y0) + c * noise;
  }
}

EulerLimitStepper::EulerLimitStepper(const ModelSpec& spec, double dt)
    : spec_(&spec), d_(spec.dimension()), dt_(dt), sqrt_dt_(std::sqrt(dt)) {
  require_positive(dt, "dt");
  b_.resize(d_);
  sigma_.resize(static_cast<std::size_t>(d_) * d_);
  xi_.resize(d_);
}

void EulerLimitStepper::advance(std::span<double> x, Rng& rng) {
  spec_->drift(x, b_);
  spec_->diffusion(x, sigma_);
  for (int k = 0; k < d_; ++k) xi_[k] = rng.normal();
  for (int i = 0; i < d_; ++i) {
    double noise = 0.0;
    for (int j = 0; j < d_; ++j) noise += sigma_[i * d_ + j] * xi_[j];
    x[i] += b_[i] * dt_ + sqrt_dt_ * noise;
  }
}

KineticState step_kinetic_exponential(const ModelSpec& spec, const KineticState& s,
                                      double dt, Rng& rng) {
  require_positive(dt, "dt");
  s.validate();
  if (static_cast<int>(s.x.size()) != spec.dimension()) {
    throw ArgumentError("state dimension does not match the model");
  }
  ExponentialKineticStepper stepper(spec, s.m, dt);
  KineticState out = s;
  stepper.advance(out.x, out.y, rng);
  return out;
}

KineticState step_kinetic_euler(const ModelSpec& spec, const KineticState& s, double dt,
                                Rng& rng, double mass_cfl) {
  require_positive(dt, "dt");
  s.validate();
  if (static_cast<int>(s.x.size()) != spec.dimension()) {
    throw ArgumentError("state dimension does not match the model");
  }
  EulerKineticStepper stepper(spec, s.m, dt, mass_cfl);
  KineticState out = s;
  stepper.advance(out.x, out.y, rng);
  return out;
}

LimitState step_limit_euler(const ModelSpec& spec, const LimitState& s, double dt,
                            Rng& rng) {
  require_positive(dt, "dt");
  s.validate();
  if (static_cast<int>(s.x.size()) != spec.dimension()) {
    throw ArgumentError("state dimension does not match the model");
  }
  EulerLimitStepper stepper(spec, dt);
  LimitState out = s;
  stepper.advance(out.x, rng);
  return out;
}

namespace {

std::variant<ExponentialKineticStepper, EulerKineticStepper, EulerLimitStepper>
make_stepper(const ModelSpec& spec, const IntegratorConfig& cfg, double m, double dt) {
  switch (cfg.scheme) {
    case Scheme::kinetic_exponential:
      require_positive(m, "m");
      require_positive(dt, "dt");
      return ExponentialKineticStepper(spec, m, dt);
    case Scheme::kinetic_euler:
      return EulerKineticStepper(spec, m, dt, cfg.mass_cfl);
    case Scheme::limit_euler:
      return EulerLimitStepper(spec, dt);
  }
  throw ArgumentError("unknown scheme");
}

}  // namespace

ChainRunner::ChainRunner(const ModelSpec& spec, const IntegratorConfig& cfg, double m,
                         double dt, std::uint64_t seed, std::uint64_t chain)
    : scheme_(cfg.scheme),
      dt_(dt),
      seed_(seed),
      chain_(chain),
      stepper_(make_stepper(spec, cfg, m, dt)) {}

void ChainRunner::advance(std::span<double> x, std::span<double> y,
                          std::uint64_t steps) {
  const std::uint64_t tag =
      is_kinetic(scheme_) ? stream_tag::kKinetic : stream_tag::kLimit;
  const std::size_t d = x.size();
  std::uint64_t done = 0;
  while (done < steps) {
    if (step_ % kStepsPerRngBlock == 0) {
      rng_.reseed(derive_seed(seed_, {tag, chain_, step_ / kStepsPerRngBlock}));
    }
    const std::uint64_t block_left = kStepsPerRngBlock - step_ % kStepsPerRngBlock;
    const std::uint64_t n = std::min(block_left, steps - done);
    std::visit(
        [&](auto& stepper) {
          using T = std::decay_t<decltype(stepper)>;
          for (std::uint64_t k = 0; k < n; ++k) {
            if constexpr (std::is_same_v<T, EulerLimitStepper>) {
              stepper.advance(x, rng_);
            } else {
              stepper.advance(x, y, rng_);
            }
            double check = 0.0;
            for (std::size_t i = 0; i < d; ++i) check += x[i];
            if constexpr (!std::is_same_v<T, EulerLimitStepper>) {
              for (std::size_t i = 0; i < d; ++i) check += y[i];
            }
            if (!std::isfinite(check)) {
              const std::uint64_t at = step_ + k + 1;
              throw BlowUpError("state became non-finite at t = " +
                                    std::to_string(static_cast<double>(at) * dt_) +
                                    " (step " + std::to_string(at) + ")",
                                static_cast<double>(at) * dt_, at);
            }
          }
        },
        stepper_);
    step_ += n;
    done += n;
  }
}

KineticState PathSample::kinetic_state(std::size_t i) const {
  if (!kinetic) throw PreconditionError("path was generated by the limit equation");
  KineticState s;
  s.m = m;
  s.x.assign(positions.begin() + i * dimension, positions.begin() + (i + 1) * dimension);
  s.y.assign(velocities.begin() + i * dimension, velocities.begin() + (i + 1) * dimension);
  return s;
}

LimitState PathSample::limit_state(std::size_t i) const {
  LimitState s;
  s.x.assign(positions.begin() + i * dimension, positions.begin() + (i + 1) * dimension);
  return s;
}

namespace {

PathSample run_path(const ModelSpec& spec, const IntegratorConfig& cfg,
                    std::vector<double> x, std::vector<double> y, double m, double T,
                    std::size_t stride, std::uint64_t chain) {
  cfg.validate();
  if (!(T >= 0.0) || !std::isfinite(T)) throw ArgumentError("T must be non-negative");
  if (stride == 0) throw ArgumentError("record_stride must be at least 1");
  const bool kinetic = is_kinetic(cfg.scheme);
  const double dt_target = kinetic ? cfg.kinetic_dt(m) : cfg.dt_max;
  const std::uint64_t steps =
      T > 0.0 ? static_cast<std::uint64_t>(std::ceil(T / dt_target - 1e-9)) : 0;
  const double dt = steps > 0 ? T / static_cast<double>(steps) : dt_target;

  PathSample path;
  path.dimension = spec.dimension();
  path.kinetic = kinetic;
  path.m = kinetic ? m : 0.0;
  path.seed = {cfg.rng_seed, chain, cfg.scheme, dt};
  auto record = [&](std::uint64_t k) {
    path.times.push_back(static_cast<double>(k) * dt);
    path.positions.insert(path.positions.end(), x.begin(), x.end());
    if (kinetic) path.velocities.insert(path.velocities.end(), y.begin(), y.end());
  };
  record(0);
  ChainRunner runner(spec, cfg, m, dt, cfg.rng_seed, chain);
  std::uint64_t k = 0;
  while (k < steps) {
    const std::uint64_t n = std::min<std::uint64_t>(stride, steps - k);
    runner.advance(x, y, n);
    k += n;
    record(k);
  }
  return path;
}

}  // namespace

PathSample simulate_path(const ModelSpec& spec, const IntegratorConfig& cfg,
                         const KineticState& s0, double T, std::size_t record_stride,
                         std::uint64_t chain) {
  s0.validate();
  if (static_cast<int>(s0.x.size()) != spec.dimension()) {
    throw ArgumentError("state dimension does not match the model");
  }
  return run_path(spec, cfg, s0.x, s0.y, s0.m, T, record_stride, chain);
}

PathSample simulate_path(const ModelSpec& spec, const IntegratorConfig& cfg,
                         const LimitState& s0, double T, std::size_t record_stride,
                         std::uint64_t chain) {
  s0.validate();
  if (static_cast<int>(s0.x.size()) != spec.dimension()) {
    throw ArgumentError("state dimension does not match the model");
  }
  if (is_kinetic(cfg.scheme)) {
    throw ArgumentError("a limit state needs the limit_euler scheme");
  }
  return run_path(spec, cfg, s0.x, std::vector<double>(s0.x.size(), 0.0), 1.0, T,
                  record_stride, chain);
}

}  // namespace kramers

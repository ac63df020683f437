#ifndef KRAMERS_INTEGRATE_HPP_
#define KRAMERS_INTEGRATE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "kramers/model.hpp"
#include "kramers/rng.hpp"

namespace kramers {

enum class Scheme { kinetic_exponential, kinetic_euler, limit_euler };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);
inline bool is_kinetic(Scheme s) { return s != Scheme::limit_euler; }

struct IntegratorConfig {
  Scheme scheme = Scheme::kinetic_exponential;
  double dt_max = 1e-2;
  double mass_cfl = 0.2;  // kinetic dt = min(dt_max, mass_cfl * m)
  std::uint64_t rng_seed = 0;

  void validate() const;  // dt_max > 0, mass_cfl in (0, 1]
  double kinetic_dt(double m) const;

  bool operator==(const IntegratorConfig&) const = default;
};

// Steps between RNG re-derivations. Every block of this many steps draws from
// its own stream derive_seed(seed, {module, chain, block}).
inline constexpr std::uint64_t kStepsPerRngBlock = 1 << 16;

// Covariance of the pair
//   (int_0^dt (1 - e^{-(dt-s)/m}) dB_s,  (1/m) int_0^dt e^{-(dt-s)/m} dB_s)
// for a scalar Brownian motion.
struct ExponentialNoiseCovariance {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;
};
ExponentialNoiseCovariance exponential_noise_covariance(double m, double dt);

// Frozen-coefficient exponential step for m dY = (b - Y) dt + sigma dB,
// dX = Y dt with b, sigma held at the start point. Coefficients depend only
// on (m, dt) and are computed once.
class ExponentialKineticStepper {
 public:
  ExponentialKineticStepper(const ModelSpec& spec, double m, double dt);

  void advance(std::span<double> x, std::span<double> y, Rng& rng);
  double m() const { return m_; }
  double dt() const { return dt_; }
  const ExponentialNoiseCovariance& covariance() const { return cov_; }

 private:
  const ModelSpec* spec_;
  int d_;
  double m_, dt_;
  double decay_;       // e^{-dt/m}
  double x_from_y_;    // m (1 - e^{-dt/m})
  double x_from_b_;    // dt - m (1 - e^{-dt/m})
  double y_from_b_;    // 1 - e^{-dt/m}
  ExponentialNoiseCovariance cov_;
  double l11_, l21_, l22_;
  std::vector<double> b_, sigma_, wx_, wy_;
};

// Euler-Maruyama on the kinetic system; requires dt <= mass_cfl * m.
class EulerKineticStepper {
 public:
  EulerKineticStepper(const ModelSpec& spec, double m, double dt, double mass_cfl);
  void advance(std::span<double> x, std::span<double> y, Rng& rng);
  double dt() const { return dt_; }

 private:
  const ModelSpec* spec_;
  int d_;
  double m_, dt_, sqrt_dt_;
  std::vector<double> b_, sigma_, xi_;
};

// Euler-Maruyama on the limit equation.
class EulerLimitStepper {
 public:
  EulerLimitStepper(const ModelSpec& spec, double dt);
  void advance(std::span<double> x, Rng& rng);
  double dt() const { return dt_; }

 private:
  const ModelSpec* spec_;
  int d_;
  double dt_, sqrt_dt_;
  std::vector<double> b_, sigma_, xi_;
};

// Value-returning single steps. Throw ArgumentError for dt <= 0 or m <= 0;
// the Euler kinetic step throws StabilityError when dt > mass_cfl * m.
KineticState step_kinetic_exponential(const ModelSpec& spec, const KineticState& s,
                                      double dt, Rng& rng);
KineticState step_kinetic_euler(const ModelSpec& spec, const KineticState& s,
                                double dt, Rng& rng, double mass_cfl = 0.2);
LimitState step_limit_euler(const ModelSpec& spec, const LimitState& s, double dt,
                            Rng& rng);

// Advances one chain with block-derived RNG streams; shared by path
// simulation and invariant-measure sampling.
class ChainRunner {
 public:
  // Kinetic chain (x, y sized d) for kinetic schemes; `y` ignored for the
  // limit scheme.
  ChainRunner(const ModelSpec& spec, const IntegratorConfig& cfg, double m,
              double dt, std::uint64_t seed, std::uint64_t chain);

  // Advances `steps` steps in place. Throws BlowUpError (with time and step)
  // as soon as a coordinate becomes non-finite.
  void advance(std::span<double> x, std::span<double> y, std::uint64_t steps);
  std::uint64_t steps_taken() const { return step_; }
  double time() const { return static_cast<double>(step_) * dt_; }
  double dt() const { return dt_; }

 private:
  Scheme scheme_;
  double dt_;
  std::uint64_t seed_, chain_, step_ = 0;
  Rng rng_;
  std::variant<ExponentialKineticStepper, EulerKineticStepper, EulerLimitStepper>
      stepper_;
};

struct SeedRecord {
  std::uint64_t master_seed = 0;
  std::uint64_t chain = 0;
  Scheme scheme = Scheme::kinetic_exponential;
  double dt = 0.0;
};

// Recorded trajectory. Positions and velocities are stored row-major
// (one row of d values per recorded time); velocities are empty for the
// limit equation.
struct PathSample {
  int dimension = 0;
  bool kinetic = true;
  double m = 0.0;
  std::vector<double> times;
  std::vector<double> positions;
  std::vector<double> velocities;
  SeedRecord seed;

  std::size_t size() const { return times.size(); }
  KineticState kinetic_state(std::size_t i) const;
  LimitState limit_state(std::size_t i) const;
};

// Iterates the configured scheme up to time T with dt = min(dt_max,
// mass_cfl m) for kinetic schemes (dt_max for the limit), shrunk so that an
// integer number of steps lands on T. Records s0 and every
// record_stride-th state. For the limit scheme only s0.x is used.
PathSample simulate_path(const ModelSpec& spec, const IntegratorConfig& cfg,
                         const KineticState& s0, double T, std::size_t record_stride,
                         std::uint64_t chain = 0);
PathSample simulate_path(const ModelSpec& spec, const IntegratorConfig& cfg,
                         const LimitState& s0, double T, std::size_t record_stride,
                         std::uint64_t chain = 0);

}  // namespace kramers

#endif  // KRAMERS_INTEGRATE_HPP_

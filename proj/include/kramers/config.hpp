#ifndef KRAMERS_CONFIG_HPP_
#define KRAMERS_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kramers/ergodic.hpp"
#include "kramers/integrate.hpp"
#include "kramers/model.hpp"
#include "kramers/transport.hpp"

namespace kramers {

struct ModelSection {
  std::string family = "linear_trig";
  int dimension = 1;
  std::map<std::string, double> params;  // missing keys take family defaults
  std::optional<AssumptionConstants> constants;  // absent: registry constants
  bool analytic_derivatives = true;  // false drops b' and sigma' (d = 1)
  ProbePlan probe;

  bool operator==(const ModelSection&) const = default;
};

struct SweepSection {
  std::vector<double> m_grid;  // empty: 2^-4 .. 2^-9
  std::string transport = "auto";  // auto | sorted_1d | assignment_lp | sliced
  bool with_log_correction = false;
  int n_proj = 128;
  std::size_t crosscheck_n = kDefaultAssignmentCap;
  int n_boot = 2000;

  bool operator==(const SweepSection&) const = default;
};

struct SteinSection {
  std::string h = "x";  // x | tanh | smoothed_abs | sine
  std::optional<double> radius;
  double spacing = 1.0 / 128.0;
  std::vector<double> m_grid = {1.0 / 16.0, 1.0 / 64.0};  // identity checks
  std::size_t n_samples = 200000;

  bool operator==(const SteinSection&) const = default;
};

struct SimulateSection {
  std::optional<double> m;  // absent: limit equation
  double t_end = 10.0;
  std::size_t record_stride = 1;
  std::vector<double> x0, y0;  // empty: origin

  bool operator==(const SimulateSection&) const = default;
};

struct ExperimentConfig {
  ModelSection model;
  IntegratorConfig integrator;  // rng_seed mirrors master_seed
  SamplingPlan sampling;
  SweepSection sweep;
  SteinSection stein;
  SimulateSection simulate;
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";

  void set_seed(std::uint64_t seed);
  std::vector<double> sweep_masses() const;
  std::optional<TransportMethod> transport_method() const;

  bool operator==(const ExperimentConfig&) const = default;
};

// JSON text. Unknown keys, wrong types and out-of-domain values raise
// ConfigError with the line of the offending key and its dotted path.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical JSON with every field present; parse_config inverts it exactly.
std::string serialize_config(const ExperimentConfig& cfg);

ModelSpec build_model(const ModelSection& model);
TestFunction build_test_function(const std::string& name);

}  // namespace kramers

#endif  // KRAMERS_CONFIG_HPP_

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "kramers/config.hpp"
#include "kramers/errors.hpp"

using namespace kramers;

namespace {

const char* kReference = R"({
  "model": {
    "family": "linear_trig",
    "params": {"a": 0.25, "s0": 1.0, "s1": 0.5},
    "constants": {"L": 1.6, "Lb": 1.0625, "sigma0": 1.0, "c1": 1.0, "c2": 0.5,
                  "sigma_sup": 1.5}
  },
  "sweep": {"m_grid": [0.0625, 0.03125], "transport": "sorted_1d"},
  "master_seed": 42
})";

ConfigError parse_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("no ConfigError for: " << text);
  return ConfigError("", 0, "");
}

}  // namespace

TEST_CASE("empty object yields the defaults") {
  const ExperimentConfig c = parse_config("{}");
  CHECK(c.model.family == "linear_trig");
  CHECK(c.model.dimension == 1);
  CHECK(c.model.params.at("a") == 0.25);
  CHECK_FALSE(c.model.constants.has_value());
  CHECK(c.integrator.scheme == Scheme::kinetic_exponential);
  CHECK(c.integrator.dt_max == 1e-2);
  CHECK(c.integrator.mass_cfl == 0.2);
  CHECK(c.sampling.n_samples == 10000);
  CHECK(c.sweep_masses().size() == 6);
  CHECK(c.sweep_masses().front() == 0.0625);
  CHECK(c.sweep_masses().back() == std::ldexp(1.0, -9));
  CHECK_FALSE(c.transport_method().has_value());
  CHECK(c.output_dir == "out");
}

TEST_CASE("parse, serialize, parse is the identity") {
  const ExperimentConfig a = parse_config(kReference);
  const std::string text = serialize_config(a);
  const ExperimentConfig b = parse_config(text);
  CHECK(a == b);
  CHECK(serialize_config(b) == text);

  ExperimentConfig full = a;
  full.model.family = "double_well";
  full.model.dimension = 3;
  full.model.params = builtin_params("double_well", {{"a", 1.5}});
  full.model.constants.reset();
  full.model.analytic_derivatives = false;
  full.model.probe.radius = 12.5;
  full.model.probe.count = 100;
  full.model.probe.seed = 0xffffffffffffffffULL;
  full.integrator.scheme = Scheme::kinetic_euler;
  full.integrator.dt_max = 1.0 / 3.0;
  full.sampling.burn_in = 7.25;
  full.sampling.thinning = 0.1;
  full.sampling.n_chains = 3;
  full.sampling.wallclock_cap_seconds = 60;
  full.sweep.m_grid = {0.1, 0.01};
  full.sweep.transport = "sliced";
  full.sweep.with_log_correction = true;
  full.sweep.n_proj = 64;
  full.sweep.crosscheck_n = 0;
  full.sweep.n_boot = 50;
  full.stein.h = "tanh";
  full.stein.radius = 9.0;
  full.stein.spacing = 1.0 / 64.0;
  full.stein.m_grid = {};
  full.stein.n_samples = 500;
  full.simulate.m = 0.01;
  full.simulate.t_end = 2.0;
  full.simulate.record_stride = 10;
  full.simulate.x0 = {1, 2, 3};
  full.set_seed(18446744073709551557ULL);
  full.output_dir = "results/run 1";
  const ExperimentConfig back = parse_config(serialize_config(full));
  CHECK(back == full);
  CHECK(back.integrator.rng_seed == full.master_seed);
}

TEST_CASE("malformed JSON reports its line") {
  const ConfigError e = parse_error("{\n  \"model\": {\n    \"family\": \"linear\",,\n  }\n}");
  CHECK(e.line() == 3);
  CHECK(std::string(e.what()).find("line 3") != std::string::npos);
}

TEST_CASE("non-positive c2 is rejected at parse time with line and field") {
  const ConfigError e = parse_error(R"({
  "model": {
    "family": "linear",
    "constants": {"L": 1, "Lb": 1, "sigma0": 2, "c1": 0,
                  "c2": 0, "sigma_sup": 1.5}
  }
})");
  CHECK(e.field() == "model.constants.c2");
  CHECK(e.line() == 5);
  CHECK(parse_error(R"({"model": {"constants": {"L": 1, "Lb": 1, "sigma0": 1, "c1": 0,
      "c2": -0.5, "sigma_sup": 1}}})").field() == "model.constants.c2");
}

TEST_CASE("field diagnostics") {
  CHECK(parse_error(R"({"model": {"family": "quartic"}})").field() == "model.family");
  CHECK(parse_error(R"({"model": {"params": {"theta": 1}}})").field() == "model.params");
  CHECK(parse_error(R"({"model": {"family": "linear", "params": {"theta": -1}}})").field() ==
        "model.params");
  CHECK(parse_error(R"({"model": {"constants": {"L": 1}}})").field() == "model.constants.Lb");
  CHECK(parse_error(R"({"model": {"dimension": 0}})").field() == "model.dimension");
  CHECK(parse_error(R"({"model": {"dimension": 1.5}})").field() == "model.dimension");
  CHECK(parse_error(R"({"modle": {}})").field() == "modle");
  CHECK(parse_error(R"({"sampling": {"n": "many"}})").field() == "sampling.n");
  CHECK(parse_error(R"({"sampling": {"thinning": 0}})").field() == "sampling.thinning");
  CHECK(parse_error(R"({"integrator": {"scheme": "rk4"}})").field() == "integrator.scheme");
  CHECK(parse_error(R"({"integrator": {"mass_cfl": 2}})").field() == "integrator.mass_cfl");
  CHECK(parse_error(R"({"sweep": {"m_grid": [0.1, -0.1]}})").field() == "sweep.m_grid");
  CHECK(parse_error(R"({"sweep": {"m_grid": [0.1, "x"]}})").field() == "sweep.m_grid[1]");
  CHECK(parse_error(R"({"sweep": {"transport": "emd"}})").field() == "sweep.transport");
  CHECK(parse_error(R"({"sweep": {"n_boot": 5}})").field() == "sweep.n_boot");
  CHECK(parse_error(R"({"stein": {"h": "x^3"}})").field() == "stein.h");
  CHECK(parse_error(R"({"simulate": {"x0": [1, 2]}})").field() == "simulate.x0");
  CHECK(parse_error(R"({"master_seed": -1})").field() == "master_seed");
  CHECK(parse_error("[1, 2]").field().empty());
}

TEST_CASE("lines of nested keys follow the enclosing section") {
  const ConfigError e = parse_error(R"({
  "sweep": {"m_grid": [0.1]},
  "stein": {
    "m_grid": [0.1, 0]
  }
})");
  CHECK(e.field() == "stein.m_grid");
  CHECK(e.line() == 4);
}

TEST_CASE("build_model reproduces the registry model") {
  const ExperimentConfig c = parse_config(kReference);
  const ModelSpec spec = build_model(c.model);
  CHECK(spec.fingerprint() == reference_model_1d().fingerprint());
  CHECK(spec.has_analytic_derivatives_1d());
  CHECK(*c.transport_method() == TransportMethod::sorted_1d);

  const ExperimentConfig d = parse_config(R"({"model": {"family": "linear", "dimension": 2}})");
  const ModelSpec lin = build_model(d.model);
  CHECK(lin.dimension() == 2);
  CHECK(lin.constants() == builtin_constants("linear", 2, lin.params()));
}

TEST_CASE("dropping analytic derivatives keeps the coefficients") {
  ExperimentConfig c = parse_config(kReference);
  c.model.analytic_derivatives = false;
  const ModelSpec fd = build_model(c.model);
  const ModelSpec ref = reference_model_1d();
  CHECK_FALSE(fd.has_analytic_derivatives_1d());
  CHECK(fd.fingerprint() == ref.fingerprint());
  CHECK(fd.gradient_drift() == ref.gradient_drift());
  for (double x : {-3.0, -0.5, 0.0, 1.25, 4.0}) {
    CHECK(fd.drift_1d(x) == ref.drift_1d(x));
    CHECK(fd.diffusion_1d(x) == ref.diffusion_1d(x));
    CHECK(fd.drift_derivative_1d(x) == doctest::Approx(ref.drift_derivative_1d(x)).epsilon(1e-7));
    CHECK(fd.diffusion_derivative_1d(x) ==
          doctest::Approx(ref.diffusion_derivative_1d(x)).epsilon(1e-6));
  }
}

TEST_CASE("test function names") {
  for (const char* name : {"x", "tanh", "smoothed_abs", "sine"}) {
    const TestFunction h = build_test_function(name);
    CHECK(h.declared_lip0_1());
  }
  CHECK(build_test_function("x").at(0.3) == 0.3);
  CHECK_THROWS_AS(build_test_function("cubic"), ArgumentError);
}

TEST_CASE("seed override tracks the integrator stream") {
  ExperimentConfig c = parse_config(kReference);
  CHECK(c.integrator.rng_seed == 42);
  c.set_seed(9);
  CHECK(c.master_seed == 9);
  CHECK(c.integrator.rng_seed == 9);
}

TEST_CASE("load_config reports unreadable files") {
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

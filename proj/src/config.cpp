#include "kramers/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "kramers/errors.hpp"

namespace kramers {

namespace {

using json = nlohmann::json;
using Path = std::vector<std::string>;

std::string dotted(const Path& path) {
  std::string out;
  for (const auto& p : path) {
    if (!out.empty() && p.front() != '[') out += '.';
    out += p;
  }
  return out;
}

int line_at(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
}

// Line of the last key of `path` found by searching the keys in order.
int line_of(const std::string& text, const Path& path) {
  std::size_t pos = 0;
  bool found = false;
  for (const auto& key : path) {
    if (key.front() == '[') continue;
    const auto q = text.find("\"" + key + "\"", pos);
    if (q == std::string::npos) break;
    pos = q;
    found = true;
  }
  return found ? line_at(text, pos) : 0;
}

class Section {
 public:
  Section(const std::string& text, const json& j, Path path)
      : text_(&text), j_(&j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] void fail(const Path& path, const std::string& what) const {
    const int line = line_of(*text_, path);
    std::string msg = "config: " + dotted(path) + ": " + what;
    if (line > 0) msg = "config line " + std::to_string(line) + ": " + dotted(path) + ": " + what;
    throw ConfigError(msg, line, dotted(path));
  }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    fail(at(key), what);
  }

  Path at(const std::string& key) const {
    Path p = path_;
    p.push_back(key);
    return p;
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }

  Section child(const std::string& key) {
    static const json empty = json::object();
    const json* v = get(key);
    return Section(*text_, v ? *v : empty, at(key));
  }
  bool has(const std::string& key) const { return j_->contains(key); }

  double number(const std::string& key, double def) {
    const json* v = get(key);
    if (!v) return def;
    return as_number(*v, at(key));
  }
  std::optional<double> optional_number(const std::string& key,
                                        std::optional<double> def = {}) {
    const json* v = get(key);
    if (!v) return def;
    if (v->is_null()) return std::nullopt;
    return as_number(*v, at(key));
  }
  long long integer(const std::string& key, long long def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_number_integer()) fail(key, "expected an integer");
    return v->get<long long>();
  }
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
    const json* v = get(key);
    if (!v) return def;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer() && v->get<long long>() >= 0)
      return static_cast<std::uint64_t>(v->get<long long>());
    fail(key, "expected a non-negative integer");
  }
  bool boolean(const std::string& key, bool def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_boolean()) fail(key, "expected true or false");
    return v->get<bool>();
  }
  std::string string(const std::string& key, const std::string& def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_string()) fail(key, "expected a string");
    return v->get<std::string>();
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      Path p = at(key);
      p.push_back("[" + std::to_string(i) + "]");
      out.push_back(as_number((*v)[i], p));
    }
    return out;
  }
  std::map<std::string, double> number_map(const std::string& key) {
    Section s = child(key);
    std::map<std::string, double> out;
    for (auto it = s.j_->begin(); it != s.j_->end(); ++it)
      out[it.key()] = s.number(it.key(), 0.0);
    return out;
  }

  void finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!seen_.count(it.key())) fail(it.key(), "unknown key");
  }

 private:
  double as_number(const json& v, const Path& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, "expected a finite number");
    return x;
  }

  const std::string* text_;
  const json* j_;
  Path path_;
  std::set<std::string> seen_;
};

const std::vector<std::string> kTestFunctions = {"x", "tanh", "smoothed_abs", "sine"};
const std::vector<std::string> kTransport = {"auto", "sorted_1d", "assignment_lp", "sliced"};

template <class T>
bool contains(const std::vector<T>& v, const T& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

std::vector<double> default_mass_grid() {
  std::vector<double> g;
  for (int k = 4; k <= 9; ++k) g.push_back(std::ldexp(1.0, -k));
  return g;
}

void parse_model(Section s, ModelSection& m) {
  m.family = s.string("family", m.family);
  if (!is_builtin_family(m.family)) {
    std::string known;
    for (const auto& f : builtin_families()) known += (known.empty() ? "" : ", ") + f;
    s.fail("family", "unknown family '" + m.family + "' (known: " + known + ")");
  }
  const long long d = s.integer("dimension", m.dimension);
  if (d < 1 || d > 1024) s.fail("dimension", "dimension must lie in [1, 1024]");
  m.dimension = static_cast<int>(d);

  const auto given = s.number_map("params");
  try {
    m.params = builtin_params(m.family, given);
  } catch (const ArgumentError& e) {
    s.fail("params", e.what());
  }

  if (s.has("constants") && !s.get("constants")->is_null()) {
    Section c = s.child("constants");
    const char* keys[] = {"L", "Lb", "sigma0", "c1", "c2", "sigma_sup"};
    for (const char* k : keys)
      if (!c.has(k)) c.fail(k, "missing declared constant");
    AssumptionConstants k;
    k.lipschitz_L = c.number("L", 0.0);
    k.growth_Lb = c.number("Lb", 0.0);
    k.ellipticity_sigma0 = c.number("sigma0", 0.0);
    k.dissipative_c1 = c.number("c1", 0.0);
    k.dissipative_c2 = c.number("c2", 0.0);
    k.sigma_sup = c.number("sigma_sup", 0.0);
    if (!(k.dissipative_c2 > 0.0)) c.fail("c2", "dissipativity constant c2 must be positive");
    if (!(k.ellipticity_sigma0 > 0.0)) c.fail("sigma0", "must be positive");
    if (!(k.sigma_sup > 0.0)) c.fail("sigma_sup", "must be positive");
    if (k.lipschitz_L < 0.0) c.fail("L", "must be non-negative");
    if (k.growth_Lb < 0.0) c.fail("Lb", "must be non-negative");
    if (k.dissipative_c1 < 0.0) c.fail("c1", "must be non-negative");
    c.finish();
    m.constants = k;
  } else {
    s.get("constants");
    m.constants.reset();
    try {
      builtin_constants(m.family, m.dimension, m.params);
    } catch (const ArgumentError& e) {
      s.fail("params", std::string(e.what()) + "; declare model.constants explicitly");
    }
  }
  m.analytic_derivatives = s.boolean("analytic_derivatives", m.analytic_derivatives);

  Section p = s.child("probe");
  m.probe.radius = p.number("radius", m.probe.radius);
  if (!(m.probe.radius > 0.0)) p.fail("radius", "must be positive");
  const long long count = p.integer("count", m.probe.count);
  if (count < 1 || count > (1 << 24)) p.fail("count", "must lie in [1, 2^24]");
  m.probe.count = static_cast<int>(count);
  m.probe.seed = p.unsigned_integer("seed", m.probe.seed);
  p.finish();
  s.finish();
}

void parse_integrator(Section s, IntegratorConfig& c) {
  try {
    c.scheme = scheme_from_string(s.string("scheme", to_string(c.scheme)));
  } catch (const ArgumentError& e) {
    s.fail("scheme", e.what());
  }
  c.dt_max = s.number("dt_max", c.dt_max);
  if (!(c.dt_max > 0.0)) s.fail("dt_max", "must be positive");
  c.mass_cfl = s.number("mass_cfl", c.mass_cfl);
  if (!(c.mass_cfl > 0.0 && c.mass_cfl <= 1.0)) s.fail("mass_cfl", "must lie in (0, 1]");
  s.finish();
}

void parse_sampling(Section s, SamplingPlan& p) {
  p.burn_in = s.optional_number("burn_in", p.burn_in);
  if (p.burn_in && *p.burn_in < 0.0) s.fail("burn_in", "must be non-negative");
  p.thinning = s.optional_number("thinning", p.thinning);
  if (p.thinning && !(*p.thinning > 0.0)) s.fail("thinning", "must be positive");
  const long long n = s.integer("n", static_cast<long long>(p.n_samples));
  if (n < 1) s.fail("n", "must be at least 1");
  p.n_samples = static_cast<std::size_t>(n);
  const long long chains = s.integer("chains", p.n_chains);
  if (chains < 1 || chains > 65536) s.fail("chains", "must lie in [1, 65536]");
  p.n_chains = static_cast<int>(chains);
  p.wallclock_cap_seconds = s.number("wallclock_cap_seconds", p.wallclock_cap_seconds);
  if (p.wallclock_cap_seconds < 0.0) s.fail("wallclock_cap_seconds", "must be non-negative");
  s.finish();
}

void check_masses(Section& s, const std::string& key, const std::vector<double>& g) {
  for (double m : g)
    if (!(m > 0.0)) s.fail(key, "masses must be positive");
}

void parse_sweep(Section s, SweepSection& w) {
  w.m_grid = s.numbers("m_grid", w.m_grid);
  check_masses(s, "m_grid", w.m_grid);
  w.transport = s.string("transport", w.transport);
  if (!contains(kTransport, w.transport))
    s.fail("transport", "expected auto, sorted_1d, assignment_lp or sliced");
  w.with_log_correction = s.boolean("with_log_correction", w.with_log_correction);
  const long long np = s.integer("n_proj", w.n_proj);
  if (np < 1 || np > 1 << 20) s.fail("n_proj", "must lie in [1, 2^20]");
  w.n_proj = static_cast<int>(np);
  const long long cc = s.integer("crosscheck_n", static_cast<long long>(w.crosscheck_n));
  if (cc < 0) s.fail("crosscheck_n", "must be non-negative");
  w.crosscheck_n = static_cast<std::size_t>(cc);
  const long long nb = s.integer("n_boot", w.n_boot);
  if (nb < 10 || nb > 1 << 24) s.fail("n_boot", "must lie in [10, 2^24]");
  w.n_boot = static_cast<int>(nb);
  s.finish();
}

void parse_stein(Section s, SteinSection& t) {
  t.h = s.string("h", t.h);
  if (!contains(kTestFunctions, t.h)) s.fail("h", "expected x, tanh, smoothed_abs or sine");
  t.radius = s.optional_number("R", t.radius);
  if (t.radius && !(*t.radius > 0.0)) s.fail("R", "must be positive");
  t.spacing = s.number("spacing", t.spacing);
  if (!(t.spacing > 0.0)) s.fail("spacing", "must be positive");
  t.m_grid = s.numbers("m_grid", t.m_grid);
  check_masses(s, "m_grid", t.m_grid);
  const long long n = s.integer("n", static_cast<long long>(t.n_samples));
  if (n < 100) s.fail("n", "must be at least 100");
  t.n_samples = static_cast<std::size_t>(n);
  s.finish();
}

void parse_simulate(Section s, SimulateSection& p, int d) {
  p.m = s.optional_number("m", p.m);
  if (p.m && !(*p.m > 0.0)) s.fail("m", "must be positive");
  p.t_end = s.number("t_end", p.t_end);
  if (!(p.t_end >= 0.0)) s.fail("t_end", "must be non-negative");
  const long long stride = s.integer("record_stride", static_cast<long long>(p.record_stride));
  if (stride < 1) s.fail("record_stride", "must be at least 1");
  p.record_stride = static_cast<std::size_t>(stride);
  p.x0 = s.numbers("x0", p.x0);
  p.y0 = s.numbers("y0", p.y0);
  const auto dim = static_cast<std::size_t>(d);
  if (!p.x0.empty() && p.x0.size() != dim) s.fail("x0", "length must equal the model dimension");
  if (!p.y0.empty() && p.y0.size() != dim) s.fail("y0", "length must equal the model dimension");
  s.finish();
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

void ExperimentConfig::set_seed(std::uint64_t seed) {
  master_seed = seed;
  integrator.rng_seed = seed;
}

std::vector<double> ExperimentConfig::sweep_masses() const {
  return sweep.m_grid.empty() ? default_mass_grid() : sweep.m_grid;
}

std::optional<TransportMethod> ExperimentConfig::transport_method() const {
  if (sweep.transport == "auto") return std::nullopt;
  return transport_method_from_string(sweep.transport);
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const int line = line_at(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string what = e.what();
    const auto colon = what.find("syntax error");
    if (colon != std::string::npos) what = what.substr(colon);
    throw ConfigError("config line " + std::to_string(line) + ": " + what, line, "");
  }

  ExperimentConfig cfg;
  Section s(text, root, {});
  parse_model(s.child("model"), cfg.model);
  parse_integrator(s.child("integrator"), cfg.integrator);
  parse_sampling(s.child("sampling"), cfg.sampling);
  parse_sweep(s.child("sweep"), cfg.sweep);
  parse_stein(s.child("stein"), cfg.stein);
  parse_simulate(s.child("simulate"), cfg.simulate, cfg.model.dimension);
  cfg.set_seed(s.unsigned_integer("master_seed", 0));
  cfg.output_dir = s.string("output_dir", cfg.output_dir);
  if (cfg.output_dir.empty()) s.fail("output_dir", "must not be empty");
  s.finish();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'", 0, "");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  using oj = nlohmann::ordered_json;
  oj model;
  model["family"] = cfg.model.family;
  model["dimension"] = cfg.model.dimension;
  model["params"] = oj::object();
  for (const auto& [k, v] : cfg.model.params) model["params"][k] = v;
  if (cfg.model.constants) {
    const auto& c = *cfg.model.constants;
    model["constants"] = {{"L", c.lipschitz_L},          {"Lb", c.growth_Lb},
                          {"sigma0", c.ellipticity_sigma0}, {"c1", c.dissipative_c1},
                          {"c2", c.dissipative_c2},      {"sigma_sup", c.sigma_sup}};
  } else {
    model["constants"] = nullptr;
  }
  model["analytic_derivatives"] = cfg.model.analytic_derivatives;
  model["probe"] = {{"radius", cfg.model.probe.radius},
                    {"count", cfg.model.probe.count},
                    {"seed", cfg.model.probe.seed}};

  oj root;
  root["model"] = model;
  root["integrator"] = {{"scheme", to_string(cfg.integrator.scheme)},
                        {"dt_max", cfg.integrator.dt_max},
                        {"mass_cfl", cfg.integrator.mass_cfl}};
  root["sampling"] = {{"burn_in", optional_json(cfg.sampling.burn_in)},
                      {"thinning", optional_json(cfg.sampling.thinning)},
                      {"n", cfg.sampling.n_samples},
                      {"chains", cfg.sampling.n_chains},
                      {"wallclock_cap_seconds", cfg.sampling.wallclock_cap_seconds}};
  root["sweep"] = {{"m_grid", cfg.sweep.m_grid},
                   {"transport", cfg.sweep.transport},
                   {"with_log_correction", cfg.sweep.with_log_correction},
                   {"n_proj", cfg.sweep.n_proj},
                   {"crosscheck_n", cfg.sweep.crosscheck_n},
                   {"n_boot", cfg.sweep.n_boot}};
  root["stein"] = {{"h", cfg.stein.h},
                   {"R", optional_json(cfg.stein.radius)},
                   {"spacing", cfg.stein.spacing},
                   {"m_grid", cfg.stein.m_grid},
                   {"n", cfg.stein.n_samples}};
  root["simulate"] = {{"m", optional_json(cfg.simulate.m)},
                      {"t_end", cfg.simulate.t_end},
                      {"record_stride", cfg.simulate.record_stride},
                      {"x0", cfg.simulate.x0},
                      {"y0", cfg.simulate.y0}};
  root["master_seed"] = cfg.master_seed;
  root["output_dir"] = cfg.output_dir;
  return root.dump(2) + "\n";
}

ModelSpec build_model(const ModelSection& model) {
  const AssumptionConstants c =
      model.constants ? *model.constants
                      : builtin_constants(model.family, model.dimension, model.params);
  ModelSpec spec = make_builtin_model(model.family, model.dimension, model.params, c);
  if (model.analytic_derivatives || model.dimension != 1) return spec;

  auto base = std::make_shared<const ModelSpec>(std::move(spec));
  ModelSpec::Options opt;
  opt.family = base->family();
  opt.params = base->params();
  opt.gradient_drift = base->gradient_drift();
  opt.constant_diffusion = base->constant_diffusion();
  return ModelSpec(
      base->dimension(),
      [base](std::span<const double> x, std::span<double> out) { base->drift(x, out); },
      [base](std::span<const double> x, std::span<double> out) { base->diffusion(x, out); },
      c, opt);
}

TestFunction build_test_function(const std::string& name) {
  if (name == "x") return identity_test_function();
  if (name == "tanh") return tanh_test_function();
  if (name == "smoothed_abs") return smoothed_abs_test_function();
  if (name == "sine") return sine_test_function();
  throw ArgumentError("unknown test function '" + name + "'");
}

}  // namespace kramers

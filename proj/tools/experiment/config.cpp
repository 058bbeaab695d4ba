#include "config.hpp"

#include <cmath>
#include <map>
#include <set>

#include <yaml-cpp/yaml.h>

#include "vdlab/error.hpp"
#include "vdlab/hamiltonian.hpp"
#include "vdlab/io.hpp"

namespace vdlab::experiment {
namespace {

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

/// One YAML mapping with its keys checked against a fixed vocabulary.
class Section {
 public:
  Section(const YAML::Node& node, std::string prefix, std::set<std::string> allowed)
      : prefix_(std::move(prefix)) {
    if (!node.IsMap())
      throw ConfigError("'" + (prefix_.empty() ? std::string("document") : prefix_) +
                            "' must be a mapping",
                        prefix_, line_of(node));
    for (auto it = node.begin(); it != node.end(); ++it) {
      const std::string key = it->first.as<std::string>();
      const std::string full = name(key);
      if (!allowed.count(key)) throw ConfigError("unknown key '" + full + "'", full, line_of(it->first));
      if (entries_.count(key))
        throw ConfigError("duplicate key '" + full + "' at line " + std::to_string(line_of(it->first)),
                          full, line_of(it->first));
      entries_.emplace(key, it->second);
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const YAML::Node& node(const std::string& key) const { return entries_.at(key); }

  std::string name(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  template <class T>
  void get(const std::string& key, T& out, const char* type) const {
    if (!has(key)) return;
    const YAML::Node& n = entries_.at(key);
    try {
      if (!n.IsScalar()) throw YAML::Exception(n.Mark(), "not a scalar");
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("key '" + name(key) + "' expects " + type, name(key), line_of(n));
    }
  }

  void get_number(const std::string& key, double& out) const {
    if (!has(key)) return;
    const YAML::Node& n = entries_.at(key);
    std::string text;
    get(key, text, "a number");
    try {
      out = parse_double_strict(text);
    } catch (const std::exception&) {
      throw ConfigError("key '" + name(key) + "' expects a number", name(key), line_of(n));
    }
  }

  std::vector<double> get_numbers(const std::string& key) const {
    const YAML::Node& n = entries_.at(key);
    if (!n.IsSequence())
      throw ConfigError("key '" + name(key) + "' expects a list of numbers", name(key), line_of(n));
    std::vector<double> out;
    for (const auto& e : n) {
      try {
        out.push_back(parse_double_strict(e.as<std::string>()));
      } catch (const std::exception&) {
        throw ConfigError("key '" + name(key) + "' expects a list of numbers", name(key), line_of(e));
      }
    }
    return out;
  }

  template <class T>
  std::vector<T> get_list(const std::string& key, const char* type) const {
    const YAML::Node& n = entries_.at(key);
    if (!n.IsSequence())
      throw ConfigError("key '" + name(key) + "' expects a list of " + type, name(key), line_of(n));
    std::vector<T> out;
    for (const auto& e : n) {
      try {
        out.push_back(e.as<T>());
      } catch (const YAML::Exception&) {
        throw ConfigError("key '" + name(key) + "' expects a list of " + type, name(key), line_of(e));
      }
    }
    return out;
  }

  int line(const std::string& key) const { return has(key) ? line_of(entries_.at(key)) : 0; }

 private:
  std::string prefix_;
  std::map<std::string, YAML::Node> entries_;
};

SolveMethod parse_method(const std::string& s, const std::string& key) {
  if (s == "automatic") return SolveMethod::automatic;
  if (s == "explicit") return SolveMethod::explicit_march;
  if (s == "implicit") return SolveMethod::implicit_march;
  throw ConfigError("key '" + key + "' expects one of automatic, explicit, implicit", key);
}

SigmaPolicy parse_sigma(const std::string& s, const std::string& key) {
  if (s == "local") return SigmaPolicy::local_auto();
  if (s == "global") return SigmaPolicy::global_auto();
  try {
    const double v = parse_double_strict(s);
    if (v > 0.0) return SigmaPolicy::fixed(v);
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "' expects local, global or a positive number", key);
}

EtaSpec parse_eta(const std::string& s) {
  EtaSpec e;
  auto fail = [&] {
    return ConfigError("key 'eta' expects power:<p>[:<scale>] or const:<value>", "eta");
  };
  const auto c1 = s.find(':');
  if (c1 == std::string::npos) throw fail();
  const std::string kind = s.substr(0, c1);
  const std::string rest = s.substr(c1 + 1);
  try {
    if (kind == "const") {
      e.kind = EtaSpec::Kind::constant;
      e.scale = parse_double_strict(rest);
      if (!(e.scale >= 0.0)) throw fail();
      return e;
    }
    if (kind != "power") throw fail();
    const auto c2 = rest.find(':');
    e.power = parse_double_strict(rest.substr(0, c2));
    if (c2 != std::string::npos) e.scale = parse_double_strict(rest.substr(c2 + 1));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw fail();
  }
  if (!(e.power > 0.0) || !(e.scale > 0.0)) throw fail();
  return e;
}

}  // namespace

EtaRule EtaSpec::rule() const {
  return kind == Kind::constant ? eta_constant_rule(scale) : eta_power_rule(power, scale);
}

std::string EtaSpec::describe() const {
  if (kind == Kind::constant) return "const:" + format_double(scale);
  return "power:" + format_double(power) + ":" + format_double(scale);
}

std::vector<std::size_t> ExperimentConfig::sources() const {
  if (!x0.empty()) return x0;
  const TorusGrid g(dim, N);
  const int k = std::min(sources_per_axis, N);
  std::vector<std::size_t> out;
  const int ky = dim == 2 ? k : 1;
  for (int j = 0; j < ky; ++j)
    for (int i = 0; i < k; ++i) out.push_back(g.flat_index({i * N / k, j * N / k}));
  return out;
}

void validate(const ExperimentConfig& cfg) {
  try {
    make_model(cfg.model, cfg.alpha, cfg.dim);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), e.key().empty() ? "model" : e.key());
  } catch (const Error& e) {
    throw ConfigError(e.what(), "model");
  }
  if (cfg.dim != 1 && cfg.dim != 2) throw ConfigError("key 'dim' must be 1 or 2", "dim");
  if (cfg.N < 8) throw ConfigError("key 'N' must be an integer >= 8", "N");
  if (cfg.lambdas.empty()) throw ConfigError("key 'lambdas' must list at least one value", "lambdas");
  for (std::size_t k = 0; k < cfg.lambdas.size(); ++k) {
    if (!(cfg.lambdas[k] > 0.0) || !std::isfinite(cfg.lambdas[k]))
      throw ConfigError("lambdas must be positive", "lambdas");
    if (k > 0 && !(cfg.lambdas[k] < cfg.lambdas[k - 1]))
      throw ConfigError("lambdas must be descending", "lambdas");
  }
  const std::size_t nodes = TorusGrid(cfg.dim, cfg.N).size();
  for (std::size_t x : cfg.x0)
    if (x >= nodes) throw ConfigError("x0 entry " + std::to_string(x) + " is not a grid node", "x0");
  if (cfg.sources_per_axis < 1) throw ConfigError("key 'sources_per_axis' must be positive", "sources_per_axis");
  if (cfg.threads < 1) throw ConfigError("key 'threads' must be positive", "threads");
  if (cfg.output.empty()) throw ConfigError("key 'output' must not be empty", "output");
  if (cfg.lp.modes < 1) throw ConfigError("key 'lp.modes' must be positive", "lp.modes");
  if (cfg.lp.grid != 0 && cfg.lp.grid < 8) throw ConfigError("key 'lp.grid' must be 0 or >= 8", "lp.grid");
  if (cfg.lp.velocity.points < 1 || cfg.lp.velocity.points % 2 == 0)
    throw ConfigError("key 'lp.points' must be a positive odd integer", "lp.points");
  if (!(cfg.lp.velocity.p_radius > 0.0)) throw ConfigError("key 'lp.p_radius' must be positive", "lp.p_radius");
  if (!(cfg.lp.velocity.v_max >= 0.0)) throw ConfigError("key 'lp.v_max' must be >= 0", "lp.v_max");
  if (!(cfg.solver.ergodic_eta >= 0.0)) throw ConfigError("key 'solver.ergodic_eta' must be >= 0", "solver.ergodic_eta");
  try {
    cfg.solver.discounted.validate();
    cfg.solver.critical.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what(), "solver");
  }
  const auto& d = cfg.solver.ergodic.deltas;
  if (d.empty()) throw ConfigError("key 'solver.deltas' must list at least one value", "solver.deltas");
  for (std::size_t k = 0; k < d.size(); ++k)
    if (!(d[k] > 0.0) || (k > 0 && !(d[k] < d[k - 1])))
      throw ConfigError("solver.deltas must be positive and descending", "solver.deltas");
  if (cfg.solver.ergodic.richardson_order < 0 ||
      static_cast<std::size_t>(cfg.solver.ergodic.richardson_order) >= d.size())
    throw ConfigError("solver.richardson_order must be below the number of deltas",
                      "solver.richardson_order");
  if (cfg.selection.seeds.empty()) throw ConfigError("key 'selection.seeds' must not be empty", "selection.seeds");
  const TorusGrid tiny(1, 8);
  for (const auto& s : cfg.selection.seeds)
    if (s != "discounted") make_seed(tiny, s);
  const auto& sel = cfg.selection;
  for (auto [v, key] : {std::pair{sel.candidates.residual_threshold, "selection.residual_threshold"},
                        std::pair{sel.candidates.admissibility_tol, "selection.admissibility_tol"},
                        std::pair{sel.convergence_tol, "selection.convergence_tol"},
                        std::pair{sel.convergence_slack, "selection.convergence_slack"},
                        std::pair{sel.upper_tol, "selection.upper_tol"},
                        std::pair{sel.lower_tol, "selection.lower_tol"}})
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string("key '") + key + "' must be >= 0", key);
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node doc;
  try {
    doc = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("malformed config: " + e.msg, "", e.mark.line + 1);
  }
  ExperimentConfig cfg;
  cfg.solver.critical.tolerance = 1e-6;
  const Section top(doc, "",
                    {"model", "alpha", "dim", "N", "lambdas", "eta", "x0", "sources_per_axis", "lp",
                     "solver", "selection", "adjoint_mode", "h6_variant", "seed", "threads", "output"});
  top.get("model", cfg.model, "a model id");
  top.get("alpha", cfg.alpha, "an alpha selector");
  top.get("dim", cfg.dim, "an integer");
  top.get("N", cfg.N, "an integer");
  if (!top.has("model")) throw ConfigError("missing required key 'model'", "model");
  if (!top.has("N")) throw ConfigError("missing required key 'N'", "N");
  if (!top.has("lambdas")) throw ConfigError("missing required key 'lambdas'", "lambdas");
  cfg.lambdas = top.get_numbers("lambdas");
  if (top.has("eta")) {
    std::string s;
    top.get("eta", s, "a string");
    cfg.eta = parse_eta(s);
  }
  if (top.has("x0")) cfg.x0 = top.get_list<std::size_t>("x0", "node indices");
  top.get("sources_per_axis", cfg.sources_per_axis, "an integer");
  if (top.has("adjoint_mode")) {
    std::string s;
    top.get("adjoint_mode", s, "a string");
    if (s == "frozen") cfg.adjoint_mode = AdjointMode::frozen;
    else if (s == "jacobian") cfg.adjoint_mode = AdjointMode::jacobian;
    else throw ConfigError("key 'adjoint_mode' expects frozen or jacobian", "adjoint_mode", top.line("adjoint_mode"));
  }
  top.get("h6_variant", cfg.h6_variant, "a boolean");
  top.get("seed", cfg.seed, "an unsigned integer");
  top.get("threads", cfg.threads, "an integer");
  top.get("output", cfg.output, "a path");

  if (top.has("lp")) {
    const Section lp(top.node("lp"), "lp", {"enabled", "grid", "v_max", "points", "p_radius", "modes"});
    lp.get("enabled", cfg.lp.enabled, "a boolean");
    lp.get("grid", cfg.lp.grid, "an integer");
    lp.get_number("v_max", cfg.lp.velocity.v_max);
    lp.get("points", cfg.lp.velocity.points, "an integer");
    lp.get_number("p_radius", cfg.lp.velocity.p_radius);
    lp.get("modes", cfg.lp.modes, "an integer");
  }
  if (top.has("solver")) {
    const Section s(top.node("solver"), "solver",
                    {"tolerance", "critical_tolerance", "max_iterations", "cfl", "method",
                     "critical_method", "sigma", "ergodic_eta", "deltas", "richardson_order"});
    auto& dsc = cfg.solver.discounted;
    auto& crt = cfg.solver.critical;
    s.get_number("tolerance", dsc.tolerance);
    s.get_number("critical_tolerance", crt.tolerance);
    s.get("max_iterations", dsc.max_iterations, "an integer");
    crt.max_iterations = dsc.max_iterations;
    s.get_number("cfl", dsc.cfl);
    crt.cfl = dsc.cfl;
    std::string text;
    if (s.has("method")) {
      s.get("method", text, "a string");
      dsc.method = parse_method(text, "solver.method");
    }
    if (s.has("critical_method")) {
      s.get("critical_method", text, "a string");
      crt.method = parse_method(text, "solver.critical_method");
    }
    if (s.has("sigma")) {
      s.get("sigma", text, "a string");
      dsc.sigma = parse_sigma(text, "solver.sigma");
      crt.sigma = dsc.sigma;
    }
    s.get_number("ergodic_eta", cfg.solver.ergodic_eta);
    if (s.has("deltas")) cfg.solver.ergodic.deltas = s.get_numbers("deltas");
    s.get("richardson_order", cfg.solver.ergodic.richardson_order, "an integer");
  }
  if (top.has("selection")) {
    const Section s(top.node("selection"), "selection",
                    {"seeds", "residual_threshold", "admissibility_tol", "augment_translates",
                     "convergence_tol", "convergence_slack", "upper_tol", "lower_tol"});
    if (s.has("seeds")) cfg.selection.seeds = s.get_list<std::string>("seeds", "seed names");
    s.get_number("residual_threshold", cfg.selection.candidates.residual_threshold);
    s.get_number("admissibility_tol", cfg.selection.candidates.admissibility_tol);
    s.get("augment_translates", cfg.selection.candidates.augment_translates, "a boolean");
    s.get_number("convergence_tol", cfg.selection.convergence_tol);
    s.get_number("convergence_slack", cfg.selection.convergence_slack);
    s.get_number("upper_tol", cfg.selection.upper_tol);
    s.get_number("lower_tol", cfg.selection.lower_tol);
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("cannot read config '" + path + "': " + e.what());
  }
  return parse_config(text);
}

}  // namespace vdlab::experiment

#include "pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <Eigen/Core>

#include "vdlab/audit.hpp"
#include "vdlab/error.hpp"
#include "vdlab/io.hpp"

#ifndef VDLAB_VERSION
#define VDLAB_VERSION "unknown"
#endif

namespace vdlab::experiment {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            f(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
  }
  if (failure) std::rethrow_exception(failure);
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string method_name(SolveMethod m) {
  switch (m) {
    case SolveMethod::automatic: return "automatic";
    case SolveMethod::explicit_march: return "explicit";
    case SolveMethod::implicit_march: return "implicit";
  }
  return "automatic";
}

std::string sigma_name(const SigmaPolicy& s) {
  switch (s.kind) {
    case SigmaPolicy::Kind::local: return "local";
    case SigmaPolicy::Kind::global: return "global";
    case SigmaPolicy::Kind::fixed: return format_double(s.value);
  }
  return "local";
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["model"] = c.model;
  j["alpha"] = c.alpha;
  j["dim"] = c.dim;
  j["N"] = c.N;
  j["lambdas"] = c.lambdas;
  j["eta"] = c.eta.describe();
  j["sources"] = c.sources();
  j["lp"] = {{"enabled", c.lp.enabled}, {"grid", c.lp.grid}, {"v_max", c.lp.velocity.v_max},
             {"points", c.lp.velocity.points}, {"p_radius", c.lp.velocity.p_radius},
             {"modes", c.lp.modes}};
  j["solver"] = {{"tolerance", c.solver.discounted.tolerance},
                 {"critical_tolerance", c.solver.critical.tolerance},
                 {"max_iterations", c.solver.discounted.max_iterations},
                 {"cfl", c.solver.discounted.cfl},
                 {"method", method_name(c.solver.discounted.method)},
                 {"critical_method", method_name(c.solver.critical.method)},
                 {"sigma", sigma_name(c.solver.discounted.sigma)},
                 {"ergodic_eta", c.solver.ergodic_eta},
                 {"deltas", c.solver.ergodic.deltas},
                 {"richardson_order", c.solver.ergodic.richardson_order}};
  const auto& s = c.selection;
  j["selection"] = {{"seeds", s.seeds},
                    {"residual_threshold", s.candidates.residual_threshold},
                    {"admissibility_tol", s.candidates.admissibility_tol},
                    {"augment_translates", s.candidates.augment_translates},
                    {"convergence_tol", s.convergence_tol},
                    {"convergence_slack", s.convergence_slack},
                    {"upper_tol", s.upper_tol},
                    {"lower_tol", s.lower_tol}};
  j["adjoint_mode"] = c.adjoint_mode == AdjointMode::frozen ? "frozen" : "jacobian";
  j["h6_variant"] = c.h6_variant;
  j["seed"] = c.seed;
  j["output"] = c.output;
  return j;
}

json fingerprint(const ExperimentConfig& c) {
  return {{"model", c.model}, {"alpha", c.alpha}, {"dim", c.dim}, {"N", c.N}};
}

json solve_json(const SolveResult& r) {
  return {{"lambda", r.lambda},
          {"eta", r.eta},
          {"residual", r.residual},
          {"iterations", r.iterations},
          {"settled", r.settled},
          {"method", r.method},
          {"sup_norm", r.field.max_abs()},
          {"lipschitz", discrete_lipschitz(r.field)},
          {"warnings", r.warnings}};
}

/// Loaded products of the ergodic stage.
struct ErgodicState {
  double c = 0.0;
  double eta = 0.0;
  std::vector<double> sigma;
};

}  // namespace

std::string to_string(Stage s) {
  switch (s) {
    case Stage::audit: return "audit";
    case Stage::ergodic: return "ergodic";
    case Stage::solve: return "solve";
    case Stage::sweep: return "sweep";
    case Stage::adjoint: return "adjoint";
    case Stage::mather: return "mather";
    case Stage::select: return "select";
    case Stage::run: return "run";
  }
  return "run";
}

Stage parse_stage(const std::string& name) {
  for (Stage s : {Stage::audit, Stage::ergodic, Stage::solve, Stage::sweep, Stage::adjoint,
                  Stage::mather, Stage::select, Stage::run})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown subcommand '" + name + "'", "subcommand");
}

std::string u_column(double lambda) { return "u_lambda_" + format_double(lambda); }
std::string theta_column(std::size_t source) { return "theta_" + std::to_string(source); }

Pipeline::Pipeline(ExperimentConfig cfg) : cfg_(std::move(cfg)) { validate(cfg_); }

std::string Pipeline::path(const char* name) const { return (fs::path(cfg_.output) / name).string(); }

void Pipeline::prepare_output() const {
  std::error_code ec;
  fs::create_directories(cfg_.output, ec);
  if (ec || !fs::is_directory(cfg_.output))
    throw Error("output directory '" + cfg_.output + "' cannot be created");
  const std::string probe = path(".write_probe");
  try {
    write_file_atomic(probe, "ok\n");
  } catch (const std::exception&) {
    throw Error("output directory '" + cfg_.output + "' is not writable");
  }
  fs::remove(probe, ec);
}

void Pipeline::record(const std::string& stage, double seconds, const std::string& status) {
  json j;
  const std::string p = path(artifact::run);
  if (fs::exists(p)) {
    try {
      j = read_json(p);
    } catch (const std::exception&) {
      j = json::object();
    }
  }
  j["version"] = VDLAB_VERSION;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["config"] = config_json(cfg_);
  j["seed"] = cfg_.seed;
  j["threads"] = cfg_.threads;
  j["stages"][stage] = {{"status", status}, {"seconds", seconds}};
  write_json(p, j);
}

namespace {

FieldTable load_fields(const std::string& p, const TorusGrid& g) {
  if (!fs::exists(p)) return FieldTable(g);
  FieldTable t = FieldTable::read(p);
  if (!(t.grid() == g)) throw PrerequisiteError("fields.csv was written for a different grid", "ergodic");
  return t;
}

json require_json(const std::string& p, const std::string& stage) {
  if (!fs::exists(p))
    throw PrerequisiteError("missing artifact " + fs::path(p).filename().string() + "; run '" +
                                stage + "' first",
                            stage);
  return read_json(p);
}

void check_fingerprint(const json& j, const ExperimentConfig& cfg, const std::string& stage) {
  if (!j.contains("fingerprint") || j["fingerprint"] != fingerprint(cfg))
    throw PrerequisiteError("artifacts in '" + cfg.output +
                                "' belong to a different model or grid; rerun '" + stage + "'",
                            stage);
}

ErgodicState load_ergodic(const std::string& dir, const ExperimentConfig& cfg, const TorusGrid& g) {
  const json j = require_json((fs::path(dir) / artifact::ergodic).string(), "ergodic");
  check_fingerprint(j, cfg, "ergodic");
  const FieldTable t = load_fields((fs::path(dir) / artifact::fields).string(), g);
  if (!t.has("sigma")) throw PrerequisiteError("fields.csv lacks the sigma column; run 'ergodic' first", "ergodic");
  return {j.at("c").get<double>(), j.at("eta").get<double>(), t.column("sigma")};
}

SolveConfig frozen(const SolveConfig& base, const ErgodicState& e) {
  SolveConfig c = base;
  c.sigma = SigmaPolicy::fixed_nodes(e.sigma);
  return c;
}

std::vector<PhaseMeasure> read_measures(const std::string& p, int dim, std::vector<std::string>& kinds,
                                        std::vector<long>& sources) {
  if (!fs::exists(p)) throw PrerequisiteError("missing artifact measures.csv; run 'mather' first", "mather");
  std::istringstream in(read_file(p));
  std::string line;
  std::getline(in, line);
  std::vector<PhaseMeasure> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cell;
    std::stringstream ss(line);
    for (std::string s; std::getline(ss, s, ',');) cell.push_back(s);
    if (cell.size() != static_cast<std::size_t>(5 + 2 * dim))
      throw InvariantError("measures.csv row has " + std::to_string(cell.size()) + " columns");
    const std::size_t m = std::stoul(cell[0]);
    if (m >= out.size()) {
      out.resize(m + 1, PhaseMeasure{dim, {}});
      kinds.resize(m + 1);
      sources.resize(m + 1, -1);
    }
    kinds[m] = cell[1];
    sources[m] = std::stol(cell[2]);
    PhaseAtom a;
    a.node = std::stoul(cell[3]);
    for (int k = 0; k < dim; ++k) {
      a.x[k] = parse_double_strict(cell[4 + k]);
      a.v[k] = parse_double_strict(cell[4 + dim + k]);
    }
    a.weight = parse_double_strict(cell[4 + 2 * dim]);
    out[m].atoms.push_back(a);
  }
  return out;
}

std::string measures_csv(const std::vector<PhaseMeasure>& mus, const std::vector<std::string>& kinds,
                         const std::vector<long>& sources, int dim) {
  std::string s = "measure,kind,source,node";
  for (int k = 0; k < dim; ++k) s += ",x" + std::to_string(k);
  for (int k = 0; k < dim; ++k) s += ",v" + std::to_string(k);
  s += ",weight\n";
  for (std::size_t m = 0; m < mus.size(); ++m)
    for (const auto& a : mus[m].atoms) {
      s += std::to_string(m) + "," + kinds[m] + "," + std::to_string(sources[m]) + "," +
           std::to_string(a.node);
      for (int k = 0; k < dim; ++k) s += "," + format_double(a.x[k]);
      for (int k = 0; k < dim; ++k) s += "," + format_double(a.v[k]);
      s += "," + format_double(a.weight) + "\n";
    }
  return s;
}

}  // namespace

StageResult Pipeline::audit() {
  const auto model = make_model(cfg_.model, cfg_.alpha, cfg_.dim);
  SampleSpec spec;
  spec.seed = cfg_.seed;
  spec.audit_h6 = cfg_.h6_variant;
  const AuditReport rep = audit_assumptions(model, spec);
  json j;
  j["model"] = rep.model_id;
  j["fingerprint"] = fingerprint(cfg_);
  j["all_pass"] = rep.all_pass();
  j["entries"] = json::array();
  std::string line = "audit";
  for (const auto& e : rep.entries) {
    j["entries"].push_back({{"name", e.name}, {"pass", e.pass}, {"margin", e.margin},
                            {"fitted", e.fitted}, {"witness", e.witness}});
    line += " " + e.name + "=" + (e.pass ? "PASS" : "FAIL");
  }
  write_json(path(artifact::audit), j);
  return {rep.all_pass() ? kExitOk : kExitVerdict, line};
}

StageResult Pipeline::ergodic() {
  const auto model = make_model(cfg_.model, cfg_.alpha, cfg_.dim);
  const TorusGrid g(cfg_.dim, cfg_.N);
  const ErgodicResult e =
      compute_ergodic_constant(model, g, cfg_.solver.ergodic_eta, cfg_.solver.discounted, cfg_.solver.ergodic);
  std::vector<double> sigma = e.sigma.nodes;
  if (sigma.empty()) sigma.assign(g.size(), e.sigma.value);
  FieldTable t = load_fields(path(artifact::fields), g);
  t.set("sigma", sigma);
  t.set("ergodic_corrector", e.corrector.data());
  t.write(path(artifact::fields));
  json j;
  j["fingerprint"] = fingerprint(cfg_);
  j["c"] = e.c;
  j["eta"] = e.eta;
  j["deltas"] = e.deltas;
  j["c_per_delta"] = e.c_per_delta;
  j["richardson_order"] = cfg_.solver.ergodic.richardson_order;
  j["sigma_max"] = *std::max_element(sigma.begin(), sigma.end());
  j["solves"] = json::array();
  for (const auto& s : e.solves) j["solves"].push_back(solve_json(s));
  write_json(path(artifact::ergodic), j);
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << e.c;
  return {kExitOk, os.str()};
}

StageResult Pipeline::solve() {
  const auto model = make_model(cfg_.model, cfg_.alpha, cfg_.dim);
  const TorusGrid g(cfg_.dim, cfg_.N);
  const ErgodicState e = load_ergodic(cfg_.output, cfg_, g);
  const double lambda = cfg_.lambdas.back();
  const SolveResult r = solve_discounted(model, g, lambda, cfg_.eta.rule()(lambda), e.c,
                                         frozen(cfg_.solver.discounted, e));
  FieldTable t = load_fields(path(artifact::fields), g);
  t.set(u_column(lambda), r.field.data());
  t.write(path(artifact::fields));
  json j = solve_json(r);
  j["fingerprint"] = fingerprint(cfg_);
  write_json(path(artifact::solve), j);
  std::ostringstream os;
  os << "lambda " << format_double(lambda) << " residual " << r.residual << " sup " << r.field.max_abs();
  return {kExitOk, os.str()};
}

StageResult Pipeline::sweep() {
  const auto model = make_model(cfg_.model, cfg_.alpha, cfg_.dim);
  const TorusGrid g(cfg_.dim, cfg_.N);
  const ErgodicState e = load_ergodic(cfg_.output, cfg_, g);
  const auto family =
      lambda_sweep(model, g, cfg_.lambdas, cfg_.eta.rule(), e.c, frozen(cfg_.solver.discounted, e));
  FieldTable t = load_fields(path(artifact::fields), g);
  t.erase_prefix("u_lambda_");
  json j;
  j["fingerprint"] = fingerprint(cfg_);
  j["c"] = e.c;
  j["members"] = json::array();
  double cmin = family.front().field.max_abs(), cmax = cmin;
  double lmin = discrete_lipschitz(family.front().field), lmax = lmin;
  for (const auto& r : family) {
    t.set(u_column(r.lambda), r.field.data());
    j["members"].push_back(solve_json(r));
    cmin = std::min(cmin, r.field.max_abs());
    cmax = std::max(cmax, r.field.max_abs());
    lmin = std::min(lmin, discrete_lipschitz(r.field));
    lmax = std::max(lmax, discrete_lipschitz(r.field));
  }
  j["sup_ratio"] = cmin > 0.0 ? cmax / cmin : 1.0;
  j["lipschitz_ratio"] = lmin > 0.0 ? lmax / lmin : 1.0;
  t.write(path(artifact::fields));
  write_json(path(artifact::sweep), j);
  std::ostringstream os;
  os << "sweep " << family.size() << " members, sup ratio " << j["sup_ratio"].get<double>()
     << ", lipschitz ratio " << j["lipschitz_ratio"].get<double>();
  return {kExitOk, os.str()};
}

StageResult Pipeline::adjoint() {
  const auto model = make_model(cfg_.model, cfg_.alpha, cfg_.dim);
  const TorusGrid g(cfg_.dim, cfg_.N);
  const ErgodicState e = load_ergodic(cfg_.output, cfg_, g);
  const double lambda = cfg_.lambdas.back();
  const double eta = cfg_.eta.rule()(lambda);
  FieldTable t = load_fields(path(artifact::fields), g);
  if (!t.has(u_column(lambda)))
    throw PrerequisiteError("fields.csv lacks " + u_column(lambda) + "; run 'sweep' first", "sweep");
  const GridField u(g, t.column(u_column(lambda)));
  const auto sources = cfg_.sources();
  SchemeParams sp;
  sp.lambda = lambda;
  sp.eta = eta;
  sp.c = e.c;
  sp.sigma_nodes = e.sigma;
  std::vector<std::optional<StateMeasure>> th(sources.size());
  parallel_for(sources.size(), cfg_.threads, [&](std::size_t k) {
    th[k] = solve_adjoint(model, u, lambda, eta, sources[k], cfg_.adjoint_mode, sp);
  });
  t.erase_prefix("theta_");
  json j;
  j["fingerprint"] = fingerprint(cfg_);
  j["lambda"] = lambda;
  j["eta"] = eta;
  j["mode"] = cfg_.adjoint_mode == AdjointMode::frozen ? "frozen" : "jacobian";
  j["sources"] = json::array();
  double worst = 0.0, min_theta = 0.0;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const StateMeasure& s = *th[k];
    t.set(theta_column(sources[k]), s.theta.data());
    j["sources"].push_back({{"x0", sources[k]},
                            {"normalization", s.normalization},
                            {"mass", s.mass},
                            {"min_theta", s.min_theta},
                            {"relative_residual", s.relative_residual}});
    worst = std::max(worst, std::abs(s.normalization - 1.0));
    min_theta = std::min(min_theta, s.min_theta);
  }
  t.set("beta", th.front()->beta);
  t.write(path(artifact::fields));
  write_json(path(artifact::adjoint), j);
  std::ostringstream os;
  os << "adjoint " << sources.size() << " sources, max |normalization - 1| " << worst
     << ", min theta " << min_theta;
  return {kExitOk, os.str()};
}

StageResult Pipeline::mather() {
  const auto model = make_model(cfg_.model, cfg_.alpha, cfg_.dim);
  const TorusGrid g(cfg_.dim, cfg_.N);
  const ErgodicState e = load_ergodic(cfg_.output, cfg_, g);
  const json adj = require_json(path(artifact::adjoint), "adjoint");
  check_fingerprint(adj, cfg_, "adjoint");
  const double lambda = adj.at("lambda").get<double>();
  const FieldTable t = load_fields(path(artifact::fields), g);
  if (!t.has(u_column(lambda)) || !t.has("beta"))
    throw PrerequisiteError("fields.csv lacks the adjoint inputs; run 'adjoint' first", "adjoint");
  const GridField u(g, t.column(u_column(lambda)));
  std::vector<PhaseMeasure> mus;
  std::vector<std::string> kinds;
  std::vector<long> srcs;
  json j;
  j["fingerprint"] = fingerprint(cfg_);
  j["c"] = e.c;
  j["modes"] = cfg_.lp.modes;
  j["measures"] = json::array();
  double worst_action = 0.0, worst_hol = 0.0;
  std::vector<double> actions;
  for (const auto& s : adj.at("sources")) {
    const std::size_t x0 = s.at("x0").get<std::size_t>();
    if (!t.has(theta_column(x0)))
      throw PrerequisiteError("fields.csv lacks " + theta_column(x0) + "; run 'adjoint' first", "adjoint");
    StateMeasure th{.theta = GridField(g, t.column(theta_column(x0)))};
    th.source = x0;
    th.lambda = lambda;
    const PhaseMeasure mu = build_phase_measure(model, u, th);
    const MatherResiduals r = mather_residuals(model, mu, e.c, cfg_.lp.modes);
    j["measures"].push_back({{"index", mus.size()}, {"kind", "adjoint"}, {"source", x0},
                             {"action", r.action}, {"raw_action", r.raw_action},
                             {"holonomy", r.holonomy}, {"max_holonomy", r.max_holonomy()}});
    worst_action = std::max(worst_action, std::abs(r.action));
    worst_hol = std::max(worst_hol, r.max_holonomy());
    actions.push_back(r.action);
    mus.push_back(mu);
    kinds.push_back("adjoint");
    srcs.push_back(static_cast<long>(x0));
  }
  std::ostringstream os;
  os << "mather " << mus.size() << " measures, max |action| " << worst_action << ", max holonomy "
     << worst_hol;
  if (cfg_.lp.enabled) {
    int n_lp = cfg_.lp.grid;
    if (n_lp == 0) n_lp = std::min(cfg_.N, cfg_.dim == 1 ? 128 : 16);
    const TorusGrid glp(cfg_.dim, n_lp);
    const LpMatherResult lp = lp_mather_oracle(model, glp, cfg_.lp.velocity, e.c, cfg_.lp.modes);
    double gap = 0.0;
    for (double a : actions) gap = std::max(gap, std::abs(lp.shifted - a));
    PhaseMeasure mapped{cfg_.dim, {}};
    for (auto a : lp.mu.atoms) {
      a.node = g.nearest_node(a.x);
      mapped.atoms.push_back(a);
    }
    const MatherResiduals r = mather_residuals(model, lp.mu, e.c, cfg_.lp.modes);
    j["measures"].push_back({{"index", mus.size()}, {"kind", "lp"}, {"source", -1},
                             {"action", r.action}, {"raw_action", r.raw_action},
                             {"holonomy", r.holonomy}, {"max_holonomy", r.max_holonomy()}});
    j["lp"] = {{"grid", n_lp}, {"min_action", lp.min_action}, {"shifted", lp.shifted},
               {"v_max", lp.v_max}, {"points", cfg_.lp.velocity.points}, {"iterations", lp.iterations},
               {"variables", lp.variables}, {"action_gap", gap}, {"duals", lp.duals}};
    mus.push_back(mapped);
    kinds.push_back("lp");
    srcs.push_back(-1);
    os << ", LP min action " << lp.min_action << ", gap " << gap;
  }
  write_file_atomic(path(artifact::measures), measures_csv(mus, kinds, srcs, cfg_.dim));
  write_json(path(artifact::residuals), j);
  return {kExitOk, os.str()};
}

StageResult Pipeline::select() {
  const auto model = make_model(cfg_.model, cfg_.alpha, cfg_.dim);
  const TorusGrid g(cfg_.dim, cfg_.N);
  const ErgodicState e = load_ergodic(cfg_.output, cfg_, g);
  const json sw = require_json(path(artifact::sweep), "sweep");
  check_fingerprint(sw, cfg_, "sweep");
  const json adj = require_json(path(artifact::adjoint), "adjoint");
  std::vector<std::string> kinds;
  std::vector<long> srcs;
  const auto all = read_measures(path(artifact::measures), cfg_.dim, kinds, srcs);
  std::vector<PhaseMeasure> adjoint_mus, lp_mus;
  std::vector<std::size_t> adjoint_idx;
  for (std::size_t m = 0; m < all.size(); ++m) {
    if (kinds[m] == "adjoint") {
      adjoint_mus.push_back(all[m]);
      adjoint_idx.push_back(m);
    } else {
      lp_mus.push_back(all[m]);
    }
  }
  if (adjoint_mus.empty()) throw PrerequisiteError("measures.csv holds no adjoint measure; run 'mather'", "mather");

  FieldTable t = load_fields(path(artifact::fields), g);
  std::vector<SolveResult> family;
  for (const auto& m : sw.at("members")) {
    const double lambda = m.at("lambda").get<double>();
    if (!t.has(u_column(lambda)))
      throw PrerequisiteError("fields.csv lacks " + u_column(lambda) + "; run 'sweep' first", "sweep");
    SolveResult r{.field = GridField(g, t.column(u_column(lambda)))};
    r.lambda = lambda;
    r.eta = m.at("eta").get<double>();
    family.push_back(std::move(r));
  }
  const SolveResult& limit = family.back();

  std::vector<std::pair<std::string, GridField>> seeds;
  for (const auto& s : cfg_.selection.seeds)
    seeds.emplace_back(s, s == "discounted" ? limit.field : make_seed(g, s));
  const SolveConfig crit = frozen(cfg_.solver.critical, e);
  std::vector<std::optional<SolveResult>> solved(seeds.size());
  parallel_for(seeds.size(), cfg_.threads, [&](std::size_t k) {
    try {
      solved[k] = solve_critical(model, g, e.eta, e.c, seeds[k].second, crit);
    } catch (const NumericalError& err) {
      SolveResult r{.field = err.best_iterate().size() == g.size() ? GridField(g, err.best_iterate())
                                                                     : GridField(g, 0.0)};
      r.residual = err.best_iterate().size() == g.size() ? err.last_residual()
                                                          : std::numeric_limits<double>::infinity();
      solved[k] = std::move(r);
    }
  });
  CandidateSet set;
  set.options = cfg_.selection.candidates;
  for (std::size_t k = 0; k < seeds.size(); ++k)
    add_candidate(set, model, seeds[k].first, solved[k]->field, solved[k]->residual, solved[k]->settled,
                  adjoint_mus);

  SelectionReport rep;
  rep.candidates = set.members;
  std::optional<GridField> u0;
  std::string failure;
  try {
    u0 = select_u0(set);
  } catch (const SelectionError& err) {
    failure = err.what();
  }

  std::optional<GridField> u0_h6;
  if (cfg_.h6_variant && !lp_mus.empty()) {
    CandidateSet h6;
    h6.options = cfg_.selection.candidates;
    for (std::size_t k = 0; k < seeds.size(); ++k)
      add_candidate(h6, model, seeds[k].first, solved[k]->field, solved[k]->residual,
                    solved[k]->settled, lp_mus);
    try {
      u0_h6 = select_u0(h6);
    } catch (const SelectionError&) {
    }
  }

  if (u0) {
    rep.convergence = convergence_comparator(family, *u0, cfg_.selection.convergence_tol,
                                             cfg_.selection.convergence_slack,
                                             u0_h6 ? &*u0_h6 : nullptr);
    rep.upper = check_upper_estimate(limit.field, adjoint_mus, model, cfg_.selection.upper_tol);

    std::vector<std::size_t> sources;
    std::vector<StateMeasure> thetas;
    if (!t.has("beta")) throw PrerequisiteError("fields.csv lacks beta; run 'adjoint' first", "adjoint");
    const std::vector<double> beta = t.column("beta");
    for (const auto& s : adj.at("sources")) {
      const std::size_t x0 = s.at("x0").get<std::size_t>();
      StateMeasure th{.theta = GridField(g, t.column(theta_column(x0)))};
      th.source = x0;
      th.lambda = adj.at("lambda").get<double>();
      th.eta = adj.at("eta").get<double>();
      th.beta = beta;
      sources.push_back(x0);
      thetas.push_back(std::move(th));
    }
    const double lam = adj.at("lambda").get<double>();
    const double eta = adj.at("eta").get<double>();
    for (const auto& c : set.members) {
      if (!c.admissible) continue;
      auto lo = check_lower_estimate(model, c.field, limit.field, lam, eta, sources,
                                     cfg_.selection.lower_tol, &thetas);
      if (!rep.lower || lo.worst_slack > rep.lower->worst_slack) rep.lower = std::move(lo);
    }
  }

  t.erase_prefix("candidate_");
  t.erase_prefix("u0");
  for (std::size_t k = 0; k < set.members.size(); ++k)
    t.set("candidate_" + std::to_string(k), set.members[k].field.data());
  if (u0) t.set("u0", u0->data());
  if (u0_h6) t.set("u0_h6", u0_h6->data());
  t.write(path(artifact::fields));

  json j = to_json(rep);
  j["fingerprint"] = fingerprint(cfg_);
  j["measures"] = adjoint_idx;
  j["excluded"] = json::array();
  for (const auto& [seed, res] : set.excluded) j["excluded"].push_back({{"seed", seed}, {"residual", res}});
  if (!u0) {
    j["error"] = failure;
    j["verdicts"]["convergence"] = "FAIL";
  }
  double spread = 0.0;
  for (const auto& a : set.members)
    for (const auto& b : set.members)
      if (a.admissible && b.admissible) spread = std::max(spread, sup_distance(a.field, b.field));
  j["admissible_spread"] = spread;
  write_json(path(artifact::selection), j);

  const bool pass = u0 && rep.all_pass();
  std::ostringstream os;
  os << "select " << set.admissible_count() << "/" << set.members.size() << " admissible";
  if (u0) os << ", final distance " << rep.convergence.sup_distance.back();
  os << ", verdict " << (pass ? "PASS" : "FAIL");
  if (!u0) os << " (" << failure << ")";
  return {pass ? kExitOk : kExitVerdict, os.str()};
}

StageResult Pipeline::run() {
  StageResult last;
  int code = kExitOk;
  std::string lines;
  for (Stage s : {Stage::audit, Stage::ergodic, Stage::sweep, Stage::adjoint, Stage::mather, Stage::select}) {
    last = execute(s);
    lines += (lines.empty() ? "" : "\n") + to_string(s) + ": " + last.summary;
    code = std::max(code, last.exit_code);
  }
  return {code, lines};
}

StageResult Pipeline::execute(Stage s) {
  if (s == Stage::run) return run();
  current_ = to_string(s);
  Timer timer;
  StageResult r;
  try {
    switch (s) {
      case Stage::audit: r = audit(); break;
      case Stage::ergodic: r = ergodic(); break;
      case Stage::solve: r = solve(); break;
      case Stage::sweep: r = sweep(); break;
      case Stage::adjoint: r = adjoint(); break;
      case Stage::mather: r = mather(); break;
      case Stage::select: r = select(); break;
      case Stage::run: break;
    }
  } catch (...) {
    record(to_string(s), timer.seconds(), "error");
    throw;
  }
  record(to_string(s), timer.seconds(), r.exit_code == kExitOk ? "ok" : "fail");
  return r;
}

int run_stage(const ExperimentConfig& cfg, Stage s, std::ostream& out, std::ostream& err) {
  std::string current = to_string(s);
  std::optional<Pipeline> p;
  try {
    p.emplace(cfg);
    p->prepare_output();
    const StageResult r = p->execute(s);
    out << r.summary << "\n";
    return r.exit_code;
  } catch (const ConfigError& e) {
    err << "config error";
    if (!e.key().empty()) err << " [" << e.key() << "]";
    if (e.line() > 0) err << " line " << e.line();
    err << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const PrerequisiteError& e) {
    if (p && !p->current_stage().empty()) current = p->current_stage();
    err << "stage " << current << " failed: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    if (p && !p->current_stage().empty()) current = p->current_stage();
    err << "stage " << current << " failed: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace vdlab::experiment

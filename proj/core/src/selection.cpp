#include "vdlab/selection.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "vdlab/error.hpp"
#include "vdlab/scheme.hpp"

namespace vdlab {
namespace {

struct KernelEntry {
  MultiIndex offset{};
  double weight = 0.0;
};

std::vector<KernelEntry> bump_kernel(const TorusGrid& grid, double eta_m) {
  const double h = grid.spacing();
  const int r = static_cast<int>(std::floor(eta_m / h));
  const int ry = grid.dim() == 2 ? r : 0;
  std::vector<KernelEntry> k;
  double total = 0.0;
  for (int j = -ry; j <= ry; ++j)
    for (int i = -r; i <= r; ++i) {
      const double rho = std::hypot(i * h, j * h) / eta_m;
      if (rho >= 1.0) continue;
      const double w = std::exp(-1.0 / (1.0 - rho * rho));
      k.push_back({{i, j}, w});
      total += w;
    }
  for (auto& e : k) e.weight /= total;
  return k;
}

}  // namespace

GridField mollify(const GridField& field, double eta_m) {
  const TorusGrid& g = field.grid();
  if (!std::isfinite(eta_m) || eta_m < 2.0 * g.spacing())
    throw ResolutionError("mollifier radius " + std::to_string(eta_m) + " is below 2h = " +
                          std::to_string(2.0 * g.spacing()));
  const auto kernel = bump_kernel(g, eta_m);
  GridField out(g, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const MultiIndex mi = g.multi_index(i);
    double s = 0.0;
    for (const auto& e : kernel) {
      MultiIndex q = mi;
      for (int a = 0; a < g.dim(); ++a) q[a] -= e.offset[a];
      s += e.weight * field[g.flat_index(q)];
    }
    out[i] = s;
  }
  return out;
}

MollifiedResidual mollify_and_residual(const HamiltonianModel& model, const GridField& field,
                                       const GridField& u_for_contact, double lambda,
                                       double eta_m, double c,
                                       std::span<const double> sigma_nodes) {
  if (!(field.grid() == u_for_contact.grid()))
    throw DomainError("mollify_and_residual: fields live on different grids");
  MollifiedResidual r{.smoothed = mollify(field, eta_m), .residual = GridField(field.grid())};
  r.eta_m = eta_m;
  const TorusGrid& g = field.grid();
  GridField w = lambda * u_for_contact;
  std::vector<double> est;
  if (sigma_nodes.empty()) {
    est = estimate_local_sigma(model, r.smoothed, w);
    sigma_nodes = est;
  }
  GridField hh = lf_hamiltonian(model, r.smoothed, w, sigma_nodes);
  GridField lap = laplacian(r.smoothed);
  double pos = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double s = hh[i] - model.alpha(g.coords(i)) * lap[i] - c;
    r.residual[i] = s;
    r.sup_residual = std::max(r.sup_residual, std::abs(s));
    pos += std::max(s, 0.0);
  }
  r.mean_positive = pos / static_cast<double>(g.size());
  return r;
}

double residual_bound(const HamiltonianModel& model, const TorusGrid& grid, double lip, double c,
                      double sigma_max) {
  constexpr int kSamples = 41;
  const int n = grid.dim();
  double hmax = 0.0;
  double amax = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec x = grid.coords(i);
    amax = std::max(amax, model.alpha(x));
    const int jmax = n == 2 ? kSamples : 1;
    for (int j = 0; j < jmax; ++j)
      for (int k = 0; k < kSamples; ++k) {
        Vec p{};
        p[0] = -lip + 2.0 * lip * k / (kSamples - 1);
        if (n == 2) p[1] = -lip + 2.0 * lip * j / (kSamples - 1);
        hmax = std::max(hmax, std::abs(model.H(x, p, 0.0) - c));
      }
  }
  return hmax + n * sigma_max * lip + 2.0 * n * amax * lip / grid.spacing();
}

double admissibility_margin(const HamiltonianModel& model, const GridField& omega,
                            const PhaseMeasure& mu) {
  const LagrangianView lag(model);
  double m = 0.0;
  for (const auto& a : mu.atoms) m += a.weight * lag.dL_du(a.x, a.v, 0.0) * omega[a.node];
  return m;
}

double constant_margin(const HamiltonianModel& model, const PhaseMeasure& mu) {
  const LagrangianView lag(model);
  double m = 0.0;
  for (const auto& a : mu.atoms) m += a.weight * lag.dL_du(a.x, a.v, 0.0);
  return m;
}

Admissibility admissibility_test(const HamiltonianModel& model, const GridField& omega,
                                 const std::vector<PhaseMeasure>& measures, double tol) {
  if (measures.empty()) throw DomainError("admissibility_test needs at least one measure");
  Admissibility out{.admissible = true, .margins = {}};
  for (const auto& mu : measures) {
    const double m = admissibility_margin(model, omega, mu);
    out.margins.push_back(m);
    if (!(m >= -tol)) out.admissible = false;
  }
  return out;
}

GridField make_seed(const TorusGrid& grid, const std::string& spec) {
  if (spec == "zero") return GridField(grid, 0.0);
  std::string s = spec;
  double sign = 1.0;
  if (!s.empty() && s[0] == '-') {
    sign = -1.0;
    s.erase(0, 1);
  }
  const auto colon = s.find(':');
  const std::string kind = s.substr(0, colon);
  int k = 0;
  if (colon != std::string::npos) {
    const char* b = s.data() + colon + 1;
    const char* e = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(b, e, k);
    if (ec != std::errc() || ptr != e) k = 0;
  }
  if ((kind != "cos" && kind != "sin") || k <= 0)
    throw ConfigError("unknown seed '" + spec + "'", "seeds");
  const bool use_cos = kind == "cos";
  return GridField::from_function(grid, [&](const Vec& x) {
    double v = 0.0;
    for (int a = 0; a < grid.dim(); ++a) v += use_cos ? std::cos(k * x[a]) : std::sin(k * x[a]);
    return sign * v;
  });
}

std::size_t CandidateSet::admissible_count() const {
  return static_cast<std::size_t>(
      std::count_if(members.begin(), members.end(), [](const Candidate& c) { return c.admissible; }));
}

void add_candidate(CandidateSet& set, const HamiltonianModel& model, std::string seed,
                   GridField field, double residual, bool settled,
                   const std::vector<PhaseMeasure>& measures) {
  if (!(residual <= set.options.residual_threshold)) {
    set.excluded.emplace_back(std::move(seed), residual);
    return;
  }
  Candidate raw{.seed = seed, .field = std::move(field), .residual = residual, .settled = settled};
  if (!measures.empty()) {
    const auto adm = admissibility_test(model, raw.field, measures, set.options.admissibility_tol);
    raw.margins = adm.margins;
    raw.admissible = adm.admissible;
  }
  if (!set.options.augment_translates || measures.empty()) {
    set.members.push_back(std::move(raw));
    return;
  }
  // margin(w + k) = margin(w) + k * b with b < 0, so the largest admissible k is min m / (-b).
  double kmax = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < measures.size(); ++j) {
    const double b = constant_margin(model, measures[j]);
    if (b < 0.0) kmax = std::min(kmax, raw.margins[j] / -b);
  }
  Candidate shifted{.seed = seed + "+translate", .field = raw.field + kmax,
                    .residual = residual, .settled = settled};
  shifted.shift = kmax;
  const auto adm = admissibility_test(model, shifted.field, measures, set.options.admissibility_tol);
  shifted.margins = adm.margins;
  shifted.admissible = adm.admissible;
  set.members.push_back(std::move(raw));
  if (std::isfinite(kmax)) set.members.push_back(std::move(shifted));
}

CandidateSet build_candidates(const HamiltonianModel& model, const TorusGrid& grid, double eta,
                              double c, const std::vector<std::pair<std::string, GridField>>& seeds,
                              const std::vector<PhaseMeasure>& measures, const SolveConfig& cfg,
                              const CandidateOptions& opts) {
  CandidateSet set;
  set.options = opts;
  for (const auto& [name, seed] : seeds) {
    SolveResult r = [&] {
      try {
        return solve_critical(model, grid, eta, c, seed, cfg);
      } catch (const NumericalError& e) {
        if (e.best_iterate().size() != grid.size()) throw;
        return SolveResult{.field = GridField(grid, e.best_iterate()), .residual = e.last_residual()};
      }
    }();
    add_candidate(set, model, name, std::move(r.field), r.residual, r.settled, measures);
  }
  return set;
}

GridField select_u0(const CandidateSet& candidates) {
  std::optional<GridField> u0;
  for (const auto& c : candidates.members) {
    if (!c.admissible) continue;
    if (!u0) {
      u0 = c.field;
      continue;
    }
    for (std::size_t i = 0; i < u0->size(); ++i) (*u0)[i] = std::max((*u0)[i], c.field[i]);
  }
  if (!u0)
    throw SelectionError("no admissible candidate among " +
                         std::to_string(candidates.members.size()) +
                         " members; enlarge the seed family");
  return *u0;
}

EstimateCheck check_upper_estimate(const GridField& limit_field,
                                   const std::vector<PhaseMeasure>& measures,
                                   const HamiltonianModel& model, double tol) {
  EstimateCheck out{.tol = tol, .pass = true};
  out.worst = -std::numeric_limits<double>::infinity();
  for (const auto& mu : measures) {
    const double v = -admissibility_margin(model, limit_field, mu);
    out.values.push_back(v);
    out.worst = std::max(out.worst, v);
    if (!(v <= tol)) out.pass = false;
  }
  if (measures.empty()) out.worst = 0.0;
  return out;
}

LowerEstimateReport check_lower_estimate(const HamiltonianModel& model, const GridField& omega,
                                         const GridField& u_lambda, double lambda, double eta,
                                         const std::vector<std::size_t>& x0_set, double tol,
                                         const std::vector<StateMeasure>* thetas) {
  const TorusGrid& g = omega.grid();
  if (thetas && thetas->size() != x0_set.size())
    throw DomainError("check_lower_estimate: one adjoint solution per source is required");
  LowerEstimateReport out{.sources = x0_set, .tol = tol};
  out.mollified = eta >= 2.0 * g.spacing();
  const GridField w = out.mollified ? mollify(omega, eta) : omega;
  for (std::size_t k = 0; k < x0_set.size(); ++k) {
    const StateMeasure th =
        thetas ? (*thetas)[k] : solve_adjoint(model, u_lambda, lambda, eta, x0_set[k]);
    double pair = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) pair += w[i] * th.beta[i] * th.theta[i];
    pair *= g.cell_volume();
    const std::size_t x0 = x0_set[k];
    const double lhs = u_lambda[x0] - w[x0] + pair;
    out.lhs.push_back(lhs);
    out.needed_slack.push_back(std::max(0.0, -lhs));
    out.worst_slack = std::max(out.worst_slack, -lhs);
  }
  out.worst_slack = std::max(out.worst_slack, 0.0);
  out.pass = out.worst_slack <= tol;
  return out;
}

ConvergenceTable convergence_comparator(const std::vector<SolveResult>& family,
                                        const GridField& u0, double tol, double slack,
                                        const GridField* h6_u0) {
  ConvergenceTable t{.tol = tol};
  t.nonincreasing = true;
  for (const auto& r : family) {
    t.lambdas.push_back(r.lambda);
    const double d = sup_distance(r.field, u0);
    if (!t.sup_distance.empty() && d > (1.0 + slack) * t.sup_distance.back()) t.nonincreasing = false;
    t.sup_distance.push_back(d);
    if (h6_u0) t.h6_distance.push_back(sup_distance(r.field, *h6_u0));
  }
  t.final_within_tol = !t.sup_distance.empty() && t.sup_distance.back() <= tol;
  t.pass = t.nonincreasing && t.final_within_tol;
  return t;
}

bool SelectionReport::all_pass() const {
  return convergence.pass && (!upper || upper->pass) && (!lower || lower->pass);
}

nlohmann::json to_json(const SelectionReport& r) {
  nlohmann::json j;
  j["lambda"] = r.convergence.lambdas;
  j["sup_distance"] = r.convergence.sup_distance;
  if (!r.convergence.h6_distance.empty()) j["h6_sup_distance"] = r.convergence.h6_distance;
  j["candidates"] = nlohmann::json::array();
  for (const auto& c : r.candidates)
    j["candidates"].push_back({{"seed", c.seed},
                               {"residual", c.residual},
                               {"admissible", c.admissible},
                               {"margins", c.margins},
                               {"shift", c.shift}});
  auto verdict = [](bool present, bool pass) { return present ? (pass ? "PASS" : "FAIL") : "SKIPPED"; };
  j["verdicts"] = {{"upper_estimate", verdict(r.upper.has_value(), r.upper && r.upper->pass)},
                   {"lower_estimate", verdict(r.lower.has_value(), r.lower && r.lower->pass)},
                   {"convergence", r.convergence.pass ? "PASS" : "FAIL"}};
  if (r.upper) j["upper_estimate"] = {{"values", r.upper->values}, {"worst", r.upper->worst}, {"tol", r.upper->tol}};
  if (r.lower)
    j["lower_estimate"] = {{"sources", r.lower->sources}, {"lhs", r.lower->lhs},
                           {"worst_slack", r.lower->worst_slack}, {"tol", r.lower->tol},
                           {"mollified", r.lower->mollified}};
  j["convergence"] = {{"nonincreasing", r.convergence.nonincreasing},
                      {"final_within_tol", r.convergence.final_within_tol},
                      {"tol", r.convergence.tol}};
  return j;
}

}  // namespace vdlab

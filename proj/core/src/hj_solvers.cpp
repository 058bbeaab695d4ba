#include "vdlab/hj_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include <Eigen/SparseLU>

#include "vdlab/error.hpp"

namespace vdlab {
namespace {

constexpr int kSigmaRounds = 8;
constexpr double kSigmaRelTol = 0.02;
constexpr long kStallWindow = 500;
constexpr int kStallChecks = 5;
constexpr double kStallRatio = 0.999;

double alpha_max(const HamiltonianModel& model, const TorusGrid& g) {
  double m = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) m = std::max(m, model.alpha(g.coords(i)));
  return m;
}

double explicit_dt(const HamiltonianModel& model, const TorusGrid& g, const SchemeParams& s,
                   double cfl) {
  const double h = g.spacing();
  const double n = g.dim();
  double sigma = s.sigma;
  for (double v : s.sigma_nodes) sigma = std::max(sigma, v);
  const double denom = 2.0 * n * (alpha_max(model, g) + s.eta * s.eta) + 2.0 * n * sigma * h +
                       (s.lambda * model.monotonicity.rho_upper + s.discount) * h * h;
  if (denom <= 0.0) return cfl;
  return cfl * h * h / denom;
}

std::string describe(const SchemeParams& s) {
  std::ostringstream os;
  os << "lambda=" << s.lambda << " eta=" << s.eta << " discount=" << s.discount;
  return os.str();
}

struct MarchOutcome {
  GridField u;
  long iterations = 0;
  double residual = 0.0;
  double dt = 0.0;
  bool settled = false;
};

MarchOutcome march_explicit(const HamiltonianModel& model, GridField u, const SchemeParams& s,
                            const SolveConfig& cfg, bool allow_unsettled) {
  MarchOutcome out{u, 0, 0.0, explicit_dt(model, u.grid(), s, cfg.cfl), false};
  double last_check = std::numeric_limits<double>::infinity();
  int stalls = 0;
  double best = std::numeric_limits<double>::infinity();
  GridField best_u = u;
  for (long it = 0;; ++it) {
    GridField F = scheme_residual(model, u, s);
    const double r = F.max_abs();
    if (!std::isfinite(r) || !F.all_finite())
      throw NumericalError("non-finite residual (" + describe(s) + ")", best, best_u.data());
    out.iterations = it;
    if (r < best) {
      best = r;
      best_u = u;
    }
    if (r <= cfg.tolerance) {
      out.u = std::move(u);
      out.residual = r;
      out.settled = true;
      return out;
    }
    bool stop = it >= cfg.max_iterations;
    if (it > 0 && it % kStallWindow == 0) {
      stalls = r > kStallRatio * last_check ? stalls + 1 : 0;
      last_check = r;
      if (stalls >= kStallChecks) stop = true;
    }
    if (stop) {
      if (!allow_unsettled) {
        std::ostringstream os;
        os << "explicit march did not reach tolerance after " << it << " iterations ("
           << describe(s) << "), residual " << r;
        throw NumericalError(os.str(), r, u.data());
      }
      out.u = std::move(best_u);
      out.residual = best;
      return out;
    }
    for (std::size_t i = 0; i < u.size(); ++i) u[i] -= out.dt * F[i];
  }
}

// Pseudo-transient continuation: (I/tau + J) du = -F with switched evolution
// relaxation of tau and a residual-decrease safeguard.
MarchOutcome march_implicit(const HamiltonianModel& model, GridField u, const SchemeParams& s,
                            const SolveConfig& cfg, bool allow_unsettled) {
  using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
  const bool singular = s.discount == 0.0 && s.lambda == 0.0;
  const double tau_max = singular ? 1e4 : 1e12;
  double tau = explicit_dt(model, u.grid(), s, 1.0) * 10.0;
  MarchOutcome out{u, 0, 0.0, tau, false};
  GridField F = scheme_residual(model, u, s);
  double r = F.max_abs();
  Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
  int rejects = 0;
  int stalls = 0;
  double last_check = r;
  const long cap = std::min<long>(cfg.max_iterations, 5000);
  for (long it = 0;; ++it) {
    if (!std::isfinite(r))
      throw NumericalError("non-finite residual (" + describe(s) + ")", r, u.data());
    out.iterations = it;
    if (r <= cfg.tolerance) {
      out.settled = true;
      break;
    }
    bool stop = it >= cap || rejects > 60;
    if (it > 0 && it % 50 == 0) {
      stalls = r > kStallRatio * last_check ? stalls + 1 : 0;
      last_check = r;
      if (stalls >= 4) stop = true;
    }
    if (stop) {
      if (!allow_unsettled) {
        std::ostringstream os;
        os << "implicit march did not reach tolerance after " << it << " iterations ("
           << describe(s) << "), residual " << r;
        throw NumericalError(os.str(), r, u.data());
      }
      break;
    }
    ColMatrix J = scheme_jacobian(model, u, s).matrix();
    for (Eigen::Index k = 0; k < J.rows(); ++k) J.coeffRef(k, k) += 1.0 / tau;
    J.makeCompressed();
    if (!analyzed) {
      lu.analyzePattern(J);
      analyzed = true;
    }
    lu.factorize(J);
    if (lu.info() != Eigen::Success) {
      tau *= 0.25;
      ++rejects;
      continue;
    }
    Eigen::Map<const Eigen::VectorXd> Fv(F.data().data(), static_cast<Eigen::Index>(F.size()));
    Eigen::VectorXd du = lu.solve(-Fv);
    GridField trial = u;
    for (std::size_t i = 0; i < u.size(); ++i) trial[i] += du[static_cast<Eigen::Index>(i)];
    GridField Ft = scheme_residual(model, trial, s);
    const double rt = Ft.max_abs();
    if (!std::isfinite(rt) || rt >= r) {
      tau *= 0.25;
      ++rejects;
      continue;
    }
    rejects = 0;
    tau = std::min(tau_max, tau * std::clamp(r / rt, 2.0, 100.0));
    u = std::move(trial);
    F = std::move(Ft);
    r = rt;
  }
  out.u = std::move(u);
  out.residual = r;
  out.dt = tau;
  return out;
}

MarchOutcome march(const HamiltonianModel& model, const GridField& init, const SchemeParams& s,
                   const SolveConfig& cfg, bool critical) {
  bool use_implicit = false;
  switch (cfg.method) {
    case SolveMethod::automatic: use_implicit = !critical; break;
    case SolveMethod::implicit_march: use_implicit = true; break;
    case SolveMethod::explicit_march: use_implicit = false; break;
  }
  return use_implicit ? march_implicit(model, init, s, cfg, critical)
                      : march_explicit(model, init, s, cfg, critical);
}

bool uses_implicit(const SolveConfig& cfg, bool critical) {
  return cfg.method == SolveMethod::implicit_march ||
         (cfg.method == SolveMethod::automatic && !critical);
}

bool local_sigma_consistent(const std::vector<double>& sigma, const std::vector<double>& next) {
  double top = 0.0;
  for (double v : next) top = std::max(top, v);
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (sigma[i] * kSigmaSafety < next[i]) return false;
    if (sigma[i] > 1.1 * next[i] + kSigmaRelTol * top) return false;
  }
  return true;
}

SolveResult solve_with_policy(const HamiltonianModel& model, const GridField& init,
                              SchemeParams s, const SolveConfig& cfg, bool critical) {
  cfg.validate();
  const TorusGrid& g = init.grid();
  if (!init.all_finite()) throw DomainError("initial field must be finite");
  if (model.dim != g.dim()) throw DomainError("model and grid dimensions differ");
  std::vector<double> nodes;
  std::optional<MarchOutcome> mo;
  auto run = [&](const GridField& start) {
    s.sigma_nodes = nodes;
    mo = march(model, start, s, cfg, critical);
  };
  switch (cfg.sigma.kind) {
    case SigmaPolicy::Kind::fixed:
      s.sigma = cfg.sigma.value;
      nodes = cfg.sigma.nodes;
      if (!nodes.empty() && nodes.size() != g.size())
        throw DomainError("fixed sigma field does not match the grid");
      run(init);
      break;
    case SigmaPolicy::Kind::global: {
      s.sigma = initial_sigma_bound(model, g);
      GridField u = init;
      for (int round = 0; round < kSigmaRounds; ++round) {
        run(u);
        const double next = estimate_sigma(model, mo->u, s.lambda * mo->u);
        const bool close = std::abs(next - s.sigma) <= kSigmaRelTol * std::max(s.sigma, 1e-12);
        u = mo->u;
        if (close) break;
        s.sigma = next;
        if (round + 1 == kSigmaRounds) run(u);
      }
      break;
    }
    case SigmaPolicy::Kind::local: {
      nodes.assign(g.size(), initial_sigma_bound(model, g));
      GridField u = init;
      for (int round = 0; round < kSigmaRounds; ++round) {
        run(u);
        std::vector<double> next = estimate_local_sigma(model, mo->u, s.lambda * mo->u);
        u = mo->u;
        if (local_sigma_consistent(nodes, next)) break;
        if (round + 1 == kSigmaRounds) {
          for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = std::max(nodes[i], next[i]);
          run(u);
        } else {
          nodes = std::move(next);
        }
      }
      break;
    }
  }
  const MarchOutcome& m = *mo;
  SolveResult r{.field = m.u};
  r.iterations = m.iterations;
  r.residual = m.residual;
  r.c_used = s.c;
  r.lambda = s.lambda;
  r.eta = s.eta;
  r.sigma = s.sigma;
  if (!nodes.empty()) {
    r.sigma = *std::max_element(nodes.begin(), nodes.end());
    r.sigma_nodes = nodes;
  }
  r.dt = m.dt;
  r.settled = m.settled;
  r.method = uses_implicit(cfg, critical) ? "implicit" : "explicit";
  if (nodes.empty())
    lf_hamiltonian(model, r.field, s.lambda * r.field, s.sigma, &r.warnings);
  else
    lf_hamiltonian(model, r.field, s.lambda * r.field, std::span<const double>(nodes), &r.warnings);
  if (!r.settled) r.warnings.push_back("UNSETTLED");
  return r;
}

// Neville evaluation at delta = 0 of the polynomial through (d_k, c_k).
double extrapolate_to_zero(std::vector<double> d, std::vector<double> c) {
  const std::size_t n = d.size();
  for (std::size_t level = 1; level < n; ++level)
    for (std::size_t k = 0; k + level < n; ++k)
      c[k] = (d[k] * c[k + 1] - d[k + level] * c[k]) / (d[k] - d[k + level]);
  return c[0];
}

}  // namespace

void SolveConfig::validate() const {
  if (!(tolerance > 0.0)) throw DomainError("solver tolerance must be positive");
  if (max_iterations < 1) throw DomainError("max_iterations must be at least 1");
  if (!(cfl > 0.0 && cfl <= 1.0)) throw DomainError("cfl factor must lie in (0, 1]");
  if (sigma.kind == SigmaPolicy::Kind::fixed) {
    if (!(sigma.value >= 0.0 && std::isfinite(sigma.value)))
      throw DomainError("fixed sigma must be finite and nonnegative");
    for (double v : sigma.nodes)
      if (!(v >= 0.0 && std::isfinite(v))) throw DomainError("fixed sigma must be finite and nonnegative");
  }
}

SigmaPolicy frozen_sigma(const SolveResult& r) {
  return r.sigma_nodes.empty() ? SigmaPolicy::fixed(r.sigma) : SigmaPolicy::fixed_nodes(r.sigma_nodes);
}

double initial_sigma_bound(const HamiltonianModel& model, const TorusGrid& g) {
  double hmax = 0.0;
  double hmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double h0 = model.H(g.coords(i), Vec{}, 0.0);
    hmax = std::max(hmax, h0);
    hmin = std::min(hmin, h0);
  }
  const auto& gr = model.growth;
  const auto& mo = model.monotonicity;
  const double spread = std::max(std::abs(hmax), std::abs(hmin)) +
                        (mo.rho_upper / mo.rho_star) * (hmax - hmin);
  const double pb = std::pow((spread + gr.M_m) / gr.K_m, 1.0 / gr.m);
  double m = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (int a = 0; a < g.dim(); ++a) {
      for (double sgn : {-1.0, 1.0}) {
        Vec p{};
        p[a] = sgn * pb;
        m = std::max(m, max_abs(model.dH_dp(g.coords(i), p, 0.0), g.dim()));
      }
    }
  }
  return kSigmaSafety * m;
}

ErgodicResult compute_ergodic_constant(const HamiltonianModel& model, const TorusGrid& grid,
                                       double eta, const SolveConfig& cfg,
                                       const ErgodicOptions& opts) {
  if (!(eta >= 0.0)) throw DomainError("eta must be nonnegative");
  std::vector<double> deltas = opts.deltas;
  if (deltas.size() < 2) throw DomainError("ergodic extrapolation needs at least two deltas");
  std::sort(deltas.begin(), deltas.end(), std::greater<>());
  if (std::adjacent_find(deltas.begin(), deltas.end()) != deltas.end() || deltas.back() <= 0.0)
    throw DomainError("deltas must be distinct and positive");
  const int order = std::clamp<int>(opts.richardson_order, 0, static_cast<int>(deltas.size()) - 1);

  ErgodicResult res{.corrector = GridField(grid)};
  res.eta = eta;
  SolveConfig local = cfg;
  GridField w(grid);
  double prev_delta = 0.0;
  for (double delta : deltas) {
    if (prev_delta > 0.0) {
      // Keep the oscillating part and move the mean to the expected -c/delta level.
      const double mean = w.mean();
      w += mean * (prev_delta / delta) - mean;
    }
    SchemeParams s{delta, 0.0, eta, 0.0, 0.0};
    SolveResult r = [&] {
      try {
        return solve_with_policy(model, w, s, local, false);
      } catch (const NumericalError& e) {
        std::ostringstream os;
        os << "ergodic auxiliary failed at delta=" << delta << ": " << e.what();
        throw NumericalError(os.str(), e.last_residual(), e.best_iterate());
      }
    }();
    local.sigma = frozen_sigma(r);
    w = r.field;
    res.deltas.push_back(delta);
    res.c_per_delta.push_back(-delta * w.mean());
    res.solves.push_back(std::move(r));
    prev_delta = delta;
  }
  const std::size_t k = static_cast<std::size_t>(order) + 1;
  std::vector<double> d(res.deltas.end() - static_cast<long>(k), res.deltas.end());
  std::vector<double> c(res.c_per_delta.end() - static_cast<long>(k), res.c_per_delta.end());
  res.c = order == 0 ? c.back() : extrapolate_to_zero(d, c);
  res.sigma = local.sigma;
  res.corrector = w + (-w.mean());
  return res;
}

SolveResult solve_discounted(const HamiltonianModel& model, const TorusGrid& grid, double lambda,
                             double eta, double c, const SolveConfig& cfg,
                             const GridField* initial) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be positive");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw DomainError("eta must be nonnegative");
  if (!std::isfinite(c)) throw DomainError("c must be finite");
  if (initial && !(initial->grid() == grid)) throw DomainError("initial field is on another grid");
  const GridField init = initial ? *initial : GridField(grid);
  return solve_with_policy(model, init, SchemeParams{0.0, lambda, eta, c, 0.0}, cfg, false);
}

SolveResult solve_critical(const HamiltonianModel& model, const TorusGrid& grid, double eta,
                           double c, const GridField& seed, const SolveConfig& cfg) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw DomainError("eta must be nonnegative");
  if (!std::isfinite(c)) throw DomainError("c must be finite");
  if (!(seed.grid() == grid)) throw DomainError("seed is on another grid");
  return solve_with_policy(model, seed, SchemeParams{0.0, 0.0, eta, c, 0.0}, cfg, true);
}

EtaRule eta_power_rule(double power, double scale) {
  return [power, scale](double lambda) { return scale * std::pow(lambda, power); };
}

EtaRule eta_constant_rule(double eta) {
  return [eta](double) { return eta; };
}

std::vector<SolveResult> lambda_sweep(const HamiltonianModel& model, const TorusGrid& grid,
                                      const std::vector<double>& lambdas, const EtaRule& eta_rule,
                                      double c, const SolveConfig& cfg) {
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (!(lambdas[k] > 0.0)) throw DomainError("sweep lambdas must be positive");
    if (k > 0 && !(lambdas[k] < lambdas[k - 1]))
      throw DomainError("sweep lambdas must be strictly descending");
  }
  std::vector<SolveResult> out;
  out.reserve(lambdas.size());
  for (double lambda : lambdas) {
    const GridField* warm = out.empty() ? nullptr : &out.back().field;
    try {
      out.push_back(solve_discounted(model, grid, lambda, eta_rule(lambda), c, cfg, warm));
    } catch (const NumericalError& e) {
      std::ostringstream os;
      os << "sweep failed at lambda=" << lambda << ": " << e.what();
      throw NumericalError(os.str(), e.last_residual(), e.best_iterate());
    }
  }
  return out;
}

}  // namespace vdlab

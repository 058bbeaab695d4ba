#include "vdlab/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SparseLU>

#include "vdlab/error.hpp"

namespace vdlab {
namespace {

// b - A^T theta in long double, with the diagonal of A rebuilt as
// reaction - (sum of off-diagonals) so that A 1 = reaction holds exactly.
std::vector<long double> adjoint_residual(const LinearizedOperator& lin,
                                          const Eigen::VectorXd& rhs,
                                          const Eigen::VectorXd& theta) {
  const auto& m = lin.op.matrix();
  const std::size_t n = lin.reaction.size();
  std::vector<long double> acc(n, 0.0L);
  for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
    long double off = 0.0L;
    const long double ti = theta[i];
    for (SparseOperator::Matrix::InnerIterator it(m, i); it; ++it) {
      if (it.col() == i) continue;
      off += it.value();
      acc[static_cast<std::size_t>(it.col())] += static_cast<long double>(it.value()) * ti;
    }
    acc[static_cast<std::size_t>(i)] +=
        (static_cast<long double>(lin.reaction[static_cast<std::size_t>(i)]) - off) * ti;
  }
  for (std::size_t j = 0; j < n; ++j) acc[j] = rhs[static_cast<Eigen::Index>(j)] - acc[j];
  return acc;
}

}  // namespace

StateMeasure solve_adjoint(const HamiltonianModel& model, const GridField& u, double lambda,
                           double eta, std::size_t x0, AdjointMode mode,
                           const SchemeParams& sigma) {
  const TorusGrid& g = u.grid();
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("adjoint needs lambda > 0");
  if (x0 >= g.size()) throw DomainError("source node out of range");
  if (!u.all_finite()) throw DomainError("primal field must be finite");
  LinearizedOperator lin = assemble_linearized(model, u, lambda, eta, mode, sigma);

  using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
  ColMatrix at = lin.op.matrix().transpose();
  at.makeCompressed();
  Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(at);
  if (lu.info() != Eigen::Success)
    throw NumericalError("adjoint factorization failed: " + lu.lastErrorMessage(), 0.0);

  const double hn = g.cell_volume();
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[static_cast<Eigen::Index>(x0)] = lambda / hn;
  Eigen::VectorXd th = lu.solve(rhs);
  std::vector<long double> res = adjoint_residual(lin, rhs, th);
  Eigen::VectorXd corr(n);
  for (int step = 0; step < 4; ++step) {
    for (Eigen::Index j = 0; j < n; ++j) corr[j] = static_cast<double>(res[static_cast<std::size_t>(j)]);
    th += lu.solve(corr);
    res = adjoint_residual(lin, rhs, th);
  }
  long double res_max = 0.0L;
  for (long double r : res) res_max = std::max(res_max, std::abs(r));

  StateMeasure out{GridField(g, std::vector<double>(th.data(), th.data() + n))};
  if (!out.theta.all_finite()) throw NumericalError("adjoint solution is not finite", 0.0);
  out.source = x0;
  out.lambda = lambda;
  out.eta = eta;
  out.mode = mode;
  // Normwise backward error ||b - A^T theta|| / (||A^T|| ||theta|| + ||b||).
  std::vector<double> col_abs(g.size(), 0.0);
  for (Eigen::Index i = 0; i < lin.op.matrix().outerSize(); ++i)
    for (SparseOperator::Matrix::InnerIterator it(lin.op.matrix(), i); it; ++it)
      col_abs[static_cast<std::size_t>(it.col())] += std::abs(it.value());
  const double at_norm = *std::max_element(col_abs.begin(), col_abs.end());
  out.relative_residual = static_cast<double>(res_max) /
                          (at_norm * th.lpNorm<Eigen::Infinity>() + rhs.lpNorm<Eigen::Infinity>());
  out.beta = lin.beta;
  long double norm = 0.0L;
  for (std::size_t i = 0; i < g.size(); ++i)
    norm += static_cast<long double>(lin.beta[i]) * out.theta[i];
  out.normalization = static_cast<double>(norm * hn);
  out.mass = out.theta.sum() * hn;
  out.min_theta = out.theta.min();
  if (std::abs(out.normalization - 1.0) > 1e-8) {
    std::ostringstream os;
    os << "adjoint normalization " << out.normalization << " differs from 1";
    throw InvariantError(os.str());
  }
  return out;
}

double PhaseMeasure::total_weight() const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.weight;
  return s;
}

double PhaseMeasure::mass_on(const std::vector<std::size_t>& nodes) const {
  double s = 0.0;
  for (const auto& a : atoms)
    if (std::find(nodes.begin(), nodes.end(), a.node) != nodes.end()) s += a.weight;
  return s;
}

PhaseMeasure build_phase_measure(const HamiltonianModel& model, const GridField& u,
                                 const StateMeasure& theta) {
  const TorusGrid& g = u.grid();
  if (!(theta.theta.grid() == g)) throw DomainError("theta and u live on different grids");
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (theta.theta[i] < -1e-12) throw InvariantError("theta has a negative entry");
    total += std::max(theta.theta[i], 0.0);
  }
  if (!(total > 0.0)) throw InvariantError("theta has zero mass");
  PhaseMeasure mu;
  mu.dim = g.dim();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double w = std::max(theta.theta[i], 0.0) / total;
    if (w <= 0.0) continue;
    const Vec x = g.coords(i);
    mu.atoms.push_back({i, x, model.dH_dp(x, centered_gradient(u, i), 0.0), w});
  }
  return mu;
}

FourierBasis::FourierBasis(int dim, int K) : dim_(dim), K_(K) {
  if (dim < 1 || dim > kMaxDim) throw DomainError("basis dimension must be 1 or 2");
  if (K < 1) throw DomainError("basis needs K >= 1");
}

std::string FourierBasis::label(std::size_t idx) const {
  const std::size_t per_axis = 2 * static_cast<std::size_t>(K_);
  const std::size_t axis = idx / per_axis;
  const std::size_t r = idx % per_axis;
  const std::size_t k = r / 2 + 1;
  std::ostringstream os;
  os << (r % 2 == 0 ? "sin(" : "cos(") << k << "*x" << axis << ")";
  return os.str();
}

std::string FourierBasis::description() const { return "fourier:" + std::to_string(K_); }

void FourierBasis::holonomy_row(const Vec& x, const Vec& v, double alpha,
                                std::vector<double>& out) const {
  out.resize(size());
  std::size_t idx = 0;
  for (int a = 0; a < dim_; ++a) {
    for (int k = 1; k <= K_; ++k) {
      const double s = std::sin(k * x[a]);
      const double c = std::cos(k * x[a]);
      const double k2 = static_cast<double>(k) * k;
      out[idx++] = v[a] * k * c + alpha * k2 * s;   // phi = sin(k x_a)
      out[idx++] = -v[a] * k * s + alpha * k2 * c;  // phi = cos(k x_a)
    }
  }
}

double MatherResiduals::max_holonomy() const {
  double m = 0.0;
  for (double h : holonomy) m = std::max(m, std::abs(h));
  return m;
}

MatherResiduals mather_residuals(const HamiltonianModel& model, const PhaseMeasure& mu, double c,
                                 int K) {
  FourierBasis basis(model.dim, K);
  MatherResiduals r;
  r.basis = basis.description();
  r.holonomy.assign(basis.size(), 0.0);
  std::vector<double> row;
  for (const auto& atom : mu.atoms) {
    r.raw_action += atom.weight * eval_L(model, atom.x, atom.v, 0.0);
    basis.holonomy_row(atom.x, atom.v, model.alpha(atom.x), row);
    for (std::size_t k = 0; k < row.size(); ++k) r.holonomy[k] += atom.weight * row[k];
  }
  r.action = r.raw_action + c;
  return r;
}

double LpMatherResult::dual_bound(const std::vector<double>& holonomy) const {
  double s = duals.empty() ? 0.0 : duals[0];
  for (std::size_t k = 0; k < holonomy.size() && k + 1 < duals.size(); ++k)
    s += duals[k + 1] * holonomy[k];
  return s;
}

double default_v_max(const HamiltonianModel& model, const TorusGrid& grid, double p_radius) {
  double m = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec x = grid.coords(i);
    for (int a = 0; a < grid.dim(); ++a)
      for (double sgn : {-1.0, 1.0}) {
        Vec p{};
        p[a] = sgn * p_radius;
        m = std::max(m, max_abs(model.dH_dp(x, p, 0.0), grid.dim()));
      }
  }
  return 1.05 * m;
}

std::vector<Vec> velocity_nodes(const VelocityGrid& vel, int dim, double v_max) {
  if (vel.points < 1 || vel.points % 2 == 0)
    throw DomainError("velocity grid needs an odd number of points per axis");
  const int half = vel.points / 2;
  const double dv = half == 0 ? 0.0 : v_max / half;
  std::vector<Vec> out;
  if (dim == 1) {
    for (int j = -half; j <= half; ++j) out.push_back({j * dv, 0.0});
  } else {
    for (int j1 = -half; j1 <= half; ++j1)
      for (int j0 = -half; j0 <= half; ++j0) out.push_back({j0 * dv, j1 * dv});
  }
  return out;
}

LpMatherResult lp_mather_oracle(const HamiltonianModel& model, const TorusGrid& grid,
                                const VelocityGrid& vel, double c, int K,
                                const SimplexOptions& opts) {
  if (model.dim != grid.dim()) throw DomainError("model and grid dimensions differ");
  LpMatherResult res;
  res.v_max = vel.v_max > 0.0 ? vel.v_max : default_v_max(model, grid, vel.p_radius);
  const std::vector<Vec> vs = velocity_nodes(vel, grid.dim(), res.v_max);
  const std::size_t nvar = grid.size() * vs.size();
  if (nvar > 200000) throw DomainError("LP has more than 2e5 variables; reduce N or M");
  FourierBasis basis(grid.dim(), K);
  const std::size_t m = 1 + basis.size();
  LinearProgram lp(m, nvar);
  lp.b[0] = 1.0;
  std::vector<double> row;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec x = grid.coords(i);
    const double a = model.alpha(x);
    for (std::size_t j = 0; j < vs.size(); ++j) {
      const std::size_t col = i * vs.size() + j;
      lp.c[col] = eval_L(model, x, vs[j], 0.0);
      lp.at(0, col) = 1.0;
      basis.holonomy_row(x, vs[j], a, row);
      for (std::size_t k = 0; k < row.size(); ++k) lp.at(k + 1, col) = row[k];
    }
  }
  LpSolution sol = solve_lp(lp, opts);
  if (sol.status == LpStatus::infeasible)
    throw InvariantError("Mather LP reported infeasible; constraint assembly is inconsistent");
  if (sol.status == LpStatus::unbounded)
    throw InvariantError("Mather LP reported unbounded; the Lagrangian is not coercive on the grid");
  if (sol.status != LpStatus::optimal)
    throw NumericalError("Mather LP hit the iteration limit", sol.objective);
  res.min_action = sol.objective;
  res.shifted = sol.objective + c;
  res.duals = sol.duals;
  res.iterations = sol.iterations;
  res.variables = nvar;
  res.mu.dim = grid.dim();
  for (std::size_t col = 0; col < nvar; ++col) {
    if (sol.x[col] <= 0.0) continue;
    const std::size_t i = col / vs.size();
    res.mu.atoms.push_back({i, grid.coords(i), vs[col % vs.size()], sol.x[col]});
  }
  return res;
}

}  // namespace vdlab

#include "vdlab/scheme.hpp"

#include <cmath>
#include <sstream>

#include "vdlab/error.hpp"

namespace vdlab {
namespace {

using Triplet = SparseOperator::Triplet;

// Second difference along one axis at one node (unscaled by h^2).
double second_difference(const GridField& u, std::size_t i, int axis) {
  const TorusGrid& g = u.grid();
  return u[g.neighbor(i, axis, +1)] - 2.0 * u[i] + u[g.neighbor(i, axis, -1)];
}

// Appends the off-diagonal entries of one row and a diagonal equal to minus
// their sum, so the row annihilates constants.
void push_conservative_row(std::vector<Triplet>& out, std::size_t row,
                           const std::vector<std::pair<std::size_t, double>>& off) {
  double diag = 0.0;
  for (const auto& [col, v] : off) {
    out.emplace_back(static_cast<int>(row), static_cast<int>(col), v);
    diag -= v;
  }
  out.emplace_back(static_cast<int>(row), static_cast<int>(row), diag);
}

struct RowCoefficients {
  Vec b{};           // transport velocity
  double nu = 0.0;   // physical + regularizing diffusion
};

// Centered + Lax-Friedrichs transport and diffusion at one node (scheme Jacobian).
std::vector<std::pair<std::size_t, double>> centered_row(const TorusGrid& g, std::size_t i,
                                                         const RowCoefficients& rc, double sigma) {
  const double h = g.spacing();
  const double inv_h2 = 1.0 / (h * h);
  std::vector<std::pair<std::size_t, double>> off;
  off.reserve(4);
  for (int a = 0; a < g.dim(); ++a) {
    off.emplace_back(g.neighbor(i, a, +1), rc.b[a] / (2.0 * h) - sigma / (2.0 * h) - rc.nu * inv_h2);
    off.emplace_back(g.neighbor(i, a, -1), -rc.b[a] / (2.0 * h) - sigma / (2.0 * h) - rc.nu * inv_h2);
  }
  return off;
}

// Flux-split upwind transport: along axis a the backward neighbour receives
// max(b_a^-, 0)/h and the forward one max(-b_a^+, 0)/h, where b^-/b^+ are dH/dp
// at the gradient with its a-component replaced by D-u/D+u. Reduces to plain
// upwinding where u is smooth.
std::vector<std::pair<std::size_t, double>> upwind_row(const HamiltonianModel& model,
                                                       const GridField& u, std::size_t i,
                                                       double nu) {
  const TorusGrid& g = u.grid();
  const double h = g.spacing();
  const double inv_h2 = 1.0 / (h * h);
  const Vec x = g.coords(i);
  const Vec pc = centered_gradient(u, i);
  std::vector<std::pair<std::size_t, double>> off;
  off.reserve(4);
  for (int a = 0; a < g.dim(); ++a) {
    const std::size_t ip = g.neighbor(i, a, +1);
    const std::size_t im = g.neighbor(i, a, -1);
    Vec pm = pc;
    Vec pp = pc;
    pm[a] = (u[i] - u[im]) / h;
    pp[a] = (u[ip] - u[i]) / h;
    const double bm = model.dH_dp(x, pm, 0.0)[a];
    const double bp = model.dH_dp(x, pp, 0.0)[a];
    off.emplace_back(ip, std::min(bp, 0.0) / h - nu * inv_h2);
    off.emplace_back(im, -std::max(bm, 0.0) / h - nu * inv_h2);
  }
  return off;
}

}  // namespace

double estimate_sigma(const HamiltonianModel& model, const GridField& u, const GridField& w) {
  const TorusGrid& g = u.grid();
  double m = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec b = model.dH_dp(g.coords(i), centered_gradient(u, i), w[i]);
    m = std::max(m, max_abs(b, g.dim()));
  }
  return kSigmaSafety * m;
}

std::vector<double> estimate_local_sigma(const HamiltonianModel& model, const GridField& u,
                                         const GridField& w) {
  const TorusGrid& g = u.grid();
  std::vector<double> b(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    b[i] = max_abs(model.dH_dp(g.coords(i), centered_gradient(u, i), w[i]), g.dim());
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    double m = b[i];
    for (int a = 0; a < g.dim(); ++a)
      m = std::max({m, b[g.neighbor(i, a, 1)], b[g.neighbor(i, a, -1)]});
    out[i] = kSigmaSafety * m;
  }
  return out;
}

namespace {

GridField lf_hamiltonian_impl(const HamiltonianModel& model, const GridField& u, const GridField& w,
                              const SchemeParams& s, std::vector<std::string>* warnings) {
  const TorusGrid& g = u.grid();
  const double h = g.spacing();
  GridField out(g);
  double worst = 0.0;
  std::size_t worst_node = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec x = g.coords(i);
    const Vec p = centered_gradient(u, i);
    double visc = 0.0;
    for (int a = 0; a < g.dim(); ++a) visc += second_difference(u, i, a);
    const double sig = s.sigma_at(i);
    out[i] = model.H(x, p, w[i]) - 0.5 * sig * visc / h;
    const double gap = max_abs(model.dH_dp(x, p, w[i]), g.dim()) - sig;
    if (gap > worst) {
      worst = gap;
      worst_node = i;
    }
  }
  if (warnings && worst > 0.0) {
    std::ostringstream os;
    os << "sigma " << s.sigma_at(worst_node) << " below |dH/dp| = " << s.sigma_at(worst_node) + worst
       << " at node " << worst_node << "; scheme not monotone";
    warnings->push_back(os.str());
  }
  return out;
}

}  // namespace

GridField lf_hamiltonian(const HamiltonianModel& model, const GridField& u, const GridField& w,
                         double sigma, std::vector<std::string>* warnings) {
  SchemeParams s;
  s.sigma = sigma;
  return lf_hamiltonian_impl(model, u, w, s, warnings);
}

GridField lf_hamiltonian(const HamiltonianModel& model, const GridField& u, const GridField& w,
                         std::span<const double> sigma_nodes, std::vector<std::string>* warnings) {
  if (sigma_nodes.size() != u.size()) throw DomainError("sigma field size mismatch");
  SchemeParams s;
  s.sigma_nodes = sigma_nodes;
  return lf_hamiltonian_impl(model, u, w, s, warnings);
}

GridField scheme_residual(const HamiltonianModel& model, const GridField& u, const SchemeParams& s) {
  const TorusGrid& g = u.grid();
  const double h = g.spacing();
  const double inv_h2 = 1.0 / (h * h);
  GridField out(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec x = g.coords(i);
    const Vec p = centered_gradient(u, i);
    double d2 = 0.0;
    for (int a = 0; a < g.dim(); ++a) d2 += second_difference(u, i, a);
    const double nu = model.alpha(x) + s.eta * s.eta;
    out[i] = s.discount * u[i] + model.H(x, p, s.lambda * u[i]) - 0.5 * s.sigma_at(i) * d2 / h -
             nu * d2 * inv_h2 - s.c;
  }
  return out;
}

SparseOperator scheme_jacobian(const HamiltonianModel& model, const GridField& u,
                               const SchemeParams& s) {
  const TorusGrid& g = u.grid();
  std::vector<Triplet> entries;
  entries.reserve(g.size() * (2 * g.dim() + 2));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec x = g.coords(i);
    const Vec p = centered_gradient(u, i);
    const double w = s.lambda * u[i];
    RowCoefficients rc{model.dH_dp(x, p, w), model.alpha(x) + s.eta * s.eta};
    push_conservative_row(entries, i, centered_row(g, i, rc, s.sigma_at(i)));
    const double react = s.discount + s.lambda * model.dH_du(x, p, w);
    entries.emplace_back(static_cast<int>(i), static_cast<int>(i), react);
  }
  return SparseOperator::from_triplets(g.size(), entries);
}

LinearizedOperator assemble_linearized(const HamiltonianModel& model, const GridField& u,
                                       double lambda, double eta, AdjointMode mode,
                                       const SchemeParams& sigma) {
  if (lambda < 0.0 || eta < 0.0) throw DomainError("lambda and eta must be nonnegative");
  const TorusGrid& g = u.grid();
  const bool frozen = mode == AdjointMode::frozen;
  LinearizedOperator lin;
  lin.mode = mode;
  lin.reaction.resize(g.size());
  lin.beta.resize(g.size());
  std::vector<Triplet> td;
  td.reserve(g.size() * (2 * g.dim() + 1));
  std::vector<Triplet> diag;
  diag.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec x = g.coords(i);
    const Vec p = centered_gradient(u, i);
    const double w = frozen ? 0.0 : lambda * u[i];
    const double nu = model.alpha(x) + eta * eta;
    if (frozen) {
      push_conservative_row(td, i, upwind_row(model, u, i, nu));
    } else {
      RowCoefficients rc{model.dH_dp(x, p, w), nu};
      push_conservative_row(td, i, centered_row(g, i, rc, sigma.sigma_at(i)));
    }
    lin.beta[i] = model.dH_du(x, p, w);
    lin.reaction[i] = lambda * lin.beta[i];
    diag.emplace_back(static_cast<int>(i), static_cast<int>(i), lin.reaction[i]);
  }
  lin.transport_diffusion = SparseOperator::from_triplets(g.size(), td);
  lin.op = lin.transport_diffusion + SparseOperator::from_triplets(g.size(), diag);
  return lin;
}

}  // namespace vdlab

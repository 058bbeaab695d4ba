#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vdlab/hamiltonian.hpp"
#include "vdlab/scheme.hpp"
#include "vdlab/simplex.hpp"
#include "vdlab/torus_grid.hpp"

namespace vdlab {

/// Adjoint density theta and its bookkeeping.
struct StateMeasure {
  GridField theta;
  std::size_t source = 0;
  double lambda = 0.0;
  double eta = 0.0;
  AdjointMode mode = AdjointMode::frozen;
  double normalization = 0.0;  ///< sum beta theta h^n, equal to 1 by duality
  double mass = 0.0;           ///< sum theta h^n
  double min_theta = 0.0;
  double relative_residual = 0.0;  ///< normwise backward error of the solve
  std::vector<double> beta{};  ///< dH/du coefficient of the assembled operator
};

/// Solves A^T theta = lambda e_{x0} / h^n for the operator of assemble_linearized.
/// `sigma` is only used in jacobian mode. Throws NumericalError when the sparse
/// factorization fails and InvariantError when the duality normalization is off
/// by more than 1e-8.
StateMeasure solve_adjoint(const HamiltonianModel& model, const GridField& u, double lambda,
                           double eta, std::size_t x0, AdjointMode mode = AdjointMode::frozen,
                           const SchemeParams& sigma = {});

struct PhaseAtom {
  std::size_t node = 0;
  Vec x{};
  Vec v{};
  double weight = 0.0;
};

/// Finitely supported probability measure on positions x velocities.
struct PhaseMeasure {
  int dim = 1;
  std::vector<PhaseAtom> atoms;

  double total_weight() const;
  /// Sum of weights on the given nodes.
  double mass_on(const std::vector<std::size_t>& nodes) const;
};

/// Pushes theta forward to (x_i, dH/dp(x_i, Du_i, 0)) with weights
/// theta_i h^n / sum theta h^n. Zero-weight nodes are dropped.
PhaseMeasure build_phase_measure(const HamiltonianModel& model, const GridField& u,
                                 const StateMeasure& theta);

/// sin(k x_a) and cos(k x_a) for k = 1..K on every axis, in that order.
class FourierBasis {
 public:
  FourierBasis(int dim, int K);

  std::size_t size() const noexcept { return static_cast<std::size_t>(2 * dim_ * K_); }
  int dim() const noexcept { return dim_; }
  int modes() const noexcept { return K_; }
  std::string label(std::size_t idx) const;
  std::string description() const;
  /// <v, grad phi_idx(x)> - alpha * Lap phi_idx(x) for every basis function.
  void holonomy_row(const Vec& x, const Vec& v, double alpha, std::vector<double>& out) const;

 private:
  int dim_;
  int K_;
};

struct MatherResiduals {
  /// sum w L(x, v, 0) + c; zero for a Mather measure.
  double action = 0.0;
  double raw_action = 0.0;  ///< sum w L(x, v, 0)
  std::vector<double> holonomy;
  std::string basis;

  double max_holonomy() const;
};

MatherResiduals mather_residuals(const HamiltonianModel& model, const PhaseMeasure& mu, double c,
                                 int K);

struct VelocityGrid {
  /// Half-width of the symmetric velocity box; <= 0 selects the default
  /// 1.05 * max |dH/dp| over nodes and |p| <= p_radius.
  double v_max = 0.0;
  int points = 33;  ///< per axis, odd so that v = 0 is a node
  double p_radius = 10.0;
};

struct LpMatherResult {
  double min_action = 0.0;  ///< before the shift by c
  double shifted = 0.0;     ///< min_action + c
  PhaseMeasure mu;
  double v_max = 0.0;
  std::vector<double> duals;  ///< [mass row, holonomy rows...]
  long iterations = 0;
  std::size_t variables = 0;
  /// Lower bound on sum w L for any probability measure on the LP support:
  /// duals[0] + sum_k duals[k+1] * holonomy_k.
  double dual_bound(const std::vector<double>& holonomy) const;
};

/// Minimizes sum mu L(x_i, v_j, 0) over probability measures on grid x
/// velocity-grid subject to the K-mode holonomy constraints.
LpMatherResult lp_mather_oracle(const HamiltonianModel& model, const TorusGrid& grid,
                                const VelocityGrid& vel, double c, int K,
                                const SimplexOptions& opts = {});

/// Velocity nodes of `vel` for a model of dimension `dim` (v = 0 included).
std::vector<Vec> velocity_nodes(const VelocityGrid& vel, int dim, double v_max);

/// Default v_max: 1.05 * max |dH/dp(x_i, p, 0)| over nodes and |p_a| <= p_radius.
double default_v_max(const HamiltonianModel& model, const TorusGrid& grid, double p_radius);

}  // namespace vdlab

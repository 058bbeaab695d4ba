#pragma once

#include <span>
#include <string>
#include <vector>

#include "vdlab/hamiltonian.hpp"
#include "vdlab/sparse_operator.hpp"
#include "vdlab/torus_grid.hpp"

namespace vdlab {

/// Safety factor applied to max |dH/dp| when sigma is auto-estimated.
inline constexpr double kSigmaSafety = 1.05;

/// Parameters of the monotone residual
///   F_i(u) = discount*u_i + H(x_i, Du_i, lambda*u_i) - (sigma h/2) sum_a D2_a u_i
///            - (alpha_i + eta^2) Lap u_i - c,
/// with Du the centered gradient. discount > 0, lambda = 0 is the classical
/// discounted auxiliary; discount = 0, lambda > 0 the contact equation;
/// both zero the critical equation.
/// When `sigma_nodes` is non-empty it replaces `sigma` node by node (local
/// Lax-Friedrichs); the caller keeps the storage alive.
struct SchemeParams {
  double discount = 0.0;
  double lambda = 0.0;
  double eta = 0.0;
  double c = 0.0;
  double sigma = 0.0;
  std::span<const double> sigma_nodes{};

  double sigma_at(std::size_t i) const { return sigma_nodes.empty() ? sigma : sigma_nodes[i]; }
};

/// max over nodes of |dH/dp| at (x_i, Du_i, w_i), scaled by the safety factor.
double estimate_sigma(const HamiltonianModel& model, const GridField& u, const GridField& w);

/// Per node: safety factor times the largest |dH/dp| over the node and its
/// stencil neighbours.
std::vector<double> estimate_local_sigma(const HamiltonianModel& model, const GridField& u,
                                         const GridField& w);

/// Lax-Friedrichs numerical Hamiltonian
///   H(x_i, (D-u + D+u)/2, w_i) - (sigma/2) sum_a (D+u - D-u)_a.
/// If sigma is below the auto-estimate a warning is appended to `warnings` (when given).
GridField lf_hamiltonian(const HamiltonianModel& model, const GridField& u, const GridField& w,
                         double sigma, std::vector<std::string>* warnings = nullptr);
/// Local variant: sigma_nodes[i] is used at node i.
GridField lf_hamiltonian(const HamiltonianModel& model, const GridField& u, const GridField& w,
                         std::span<const double> sigma_nodes,
                         std::vector<std::string>* warnings = nullptr);

GridField scheme_residual(const HamiltonianModel& model, const GridField& u, const SchemeParams& s);

/// Exact Jacobian dF/du of scheme_residual.
SparseOperator scheme_jacobian(const HamiltonianModel& model, const GridField& u,
                               const SchemeParams& s);

enum class AdjointMode {
  /// Coefficients frozen at u-slot 0, upwind transport.
  frozen,
  /// Exact Jacobian of the Lax-Friedrichs scheme (coefficients at lambda*u).
  jacobian,
};

/// Linearized operator A = reaction + transport_diffusion. The transport and
/// diffusion part annihilates constants; `reaction` is lambda * beta with beta
/// the dH/du coefficient.
struct LinearizedOperator {
  SparseOperator op;
  SparseOperator transport_diffusion;
  std::vector<double> reaction;
  std::vector<double> beta;
  AdjointMode mode = AdjointMode::frozen;
};

/// A phi = lambda beta phi + <b, grad phi> - (alpha + eta^2) Lap phi, with
/// beta = dH/du(x, Du, 0), b = dH/dp(x, ., 0) and flux-split upwind transport in
/// frozen mode (b taken at the one-sided gradients, so concave kinks of u push
/// mass to both sides); in jacobian mode the LF scheme Jacobian with
/// coefficients at lambda*u.
/// `sigma` is only read in jacobian mode.
LinearizedOperator assemble_linearized(const HamiltonianModel& model, const GridField& u,
                                       double lambda, double eta,
                                       AdjointMode mode = AdjointMode::frozen,
                                       const SchemeParams& sigma = {});

}  // namespace vdlab

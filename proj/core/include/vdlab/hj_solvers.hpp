#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vdlab/hamiltonian.hpp"
#include "vdlab/scheme.hpp"
#include "vdlab/torus_grid.hpp"

namespace vdlab {

enum class SolveMethod {
  /// implicit pseudo-time for discounted problems, explicit for critical ones
  automatic,
  explicit_march,
  implicit_march,
};

/// Lax-Friedrichs viscosity coefficient. `local` re-estimates a per-node sigma
/// (stencil max of |dH/dp| times 1.05), `global` a single scalar, until the
/// estimate is consistent with the converged field. `fixed` uses `value`, or
/// `nodes` when non-empty.
struct SigmaPolicy {
  enum class Kind { local, global, fixed };
  Kind kind = Kind::local;
  double value = 0.0;
  std::vector<double> nodes{};

  bool automatic() const { return kind != Kind::fixed; }
  static SigmaPolicy local_auto() { return {Kind::local, 0.0, {}}; }
  static SigmaPolicy global_auto() { return {Kind::global, 0.0, {}}; }
  static SigmaPolicy fixed(double v) { return {Kind::fixed, v, {}}; }
  static SigmaPolicy fixed_nodes(std::vector<double> v) { return {Kind::fixed, 0.0, std::move(v)}; }
};

struct SolveConfig {
  double tolerance = 1e-9;   ///< infinity norm of the scheme residual
  long max_iterations = 200000;
  double cfl = 0.8;          ///< explicit step factor, in (0, 1]
  SigmaPolicy sigma{};
  SolveMethod method = SolveMethod::automatic;

  void validate() const;
};

struct SolveResult {
  GridField field;
  long iterations = 0;
  double residual = 0.0;
  double c_used = 0.0;
  double lambda = 0.0;
  double eta = 0.0;
  double sigma = 0.0;                   ///< max over nodes
  std::vector<double> sigma_nodes{};    ///< empty when sigma is a scalar
  /// explicit: CFL step; implicit: final pseudo-time step
  double dt = 0.0;
  bool settled = false;
  std::string method{};
  std::vector<std::string> warnings{};
};

/// The sigma a result was computed with, as a fixed policy.
SigmaPolicy frozen_sigma(const SolveResult& r);

struct ErgodicOptions {
  std::vector<double> deltas{1e-2, 5e-3, 2.5e-3};
  /// Richardson extrapolation in delta using the order+1 smallest deltas.
  int richardson_order = 2;
};

struct ErgodicResult {
  double c = 0.0;
  /// Corrector w at the smallest delta, shifted to zero mean.
  GridField corrector;
  SigmaPolicy sigma{};  ///< frozen, for reuse by later solves
  double eta = 0.0;
  std::vector<double> deltas{};
  std::vector<double> c_per_delta{};  ///< -delta * mean(w_delta)
  std::vector<SolveResult> solves{};
};

/// Ergodic constant of H(x, p, 0) = (alpha + eta^2) Lap u + c via the classical
/// discounted auxiliary delta w + H(x, Dw, 0) = (alpha + eta^2) Lap w.
ErgodicResult compute_ergodic_constant(const HamiltonianModel& model, const TorusGrid& grid,
                                       double eta, const SolveConfig& cfg,
                                       const ErgodicOptions& opts = {});

/// Fixed point of H(x, Du, lambda u) = (alpha + eta^2) Lap u + c. Throws
/// NumericalError when the iteration cap is hit or the iterate becomes NaN.
SolveResult solve_discounted(const HamiltonianModel& model, const TorusGrid& grid, double lambda,
                             double eta, double c, const SolveConfig& cfg,
                             const GridField* initial = nullptr);

/// Relaxes H(x, Dw, 0) = (alpha + eta^2) Lap w + c from `seed`. Returns with
/// settled == false when the residual stagnates above tolerance.
SolveResult solve_critical(const HamiltonianModel& model, const TorusGrid& grid, double eta,
                           double c, const GridField& seed, const SolveConfig& cfg);

using EtaRule = std::function<double(double lambda)>;

/// eta(lambda) = scale * lambda^power; the default is lambda^2.
EtaRule eta_power_rule(double power = 2.0, double scale = 1.0);
EtaRule eta_constant_rule(double eta);

/// Solves for each lambda (strictly descending), warm-starting from the previous member.
std::vector<SolveResult> lambda_sweep(const HamiltonianModel& model, const TorusGrid& grid,
                                      const std::vector<double>& lambdas, const EtaRule& eta_rule,
                                      double c, const SolveConfig& cfg);

/// A priori bound on |Du| from the growth constants, scaled into a starting sigma.
double initial_sigma_bound(const HamiltonianModel& model, const TorusGrid& grid);

}  // namespace vdlab

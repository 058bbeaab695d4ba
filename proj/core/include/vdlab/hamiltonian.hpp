#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "vdlab/types.hpp"

namespace vdlab {

using ScalarEvaluator = std::function<double(const Vec& x, const Vec& p, double u)>;
using VectorEvaluator = std::function<Vec(const Vec& x, const Vec& p, double u)>;
using DiffusionCoefficient = std::function<double(const Vec& x)>;

struct GrowthConstants {
  double m = 2.0;
  double K_m = 0.5;
  double M_m = 1.0;
};

struct MonotonicityConstants {
  double rho_star = 1.0;
  double rho_upper = 1.0;
};

/// Contact Hamiltonian H(x, p, u) on the torus together with its diffusion
/// coefficient alpha(x) and the structural constants the theory relies on.
/// Evaluators are pure; a model may be shared across threads.
struct HamiltonianModel {
  std::string id;
  std::string alpha_id;
  int dim = 1;
  ScalarEvaluator H;
  VectorEvaluator dH_dp;
  ScalarEvaluator dH_du;
  VectorEvaluator dH_dx;
  DiffusionCoefficient alpha;
  GrowthConstants growth;
  MonotonicityConstants monotonicity;
  /// Lagrangian L(x, v, u) when known analytically (arguments are x, v, u).
  std::optional<ScalarEvaluator> closed_form_L;
};

enum class LagrangianEval { automatic, numeric };

struct LegendreMaximizer {
  Vec p{};
  double value = 0.0;
  int iterations = 0;
};

/// Catalog lookup. `id` is one of "Q", "A", "A2", "B"; `alpha` is "zero",
/// "const:<value>" or "degenerate". Throws ConfigError on unknown selectors.
HamiltonianModel make_model(std::string_view id, std::string_view alpha = "zero", int dim = 1);

DiffusionCoefficient make_alpha(std::string_view selector, int dim);

double eval_H(const HamiltonianModel& model, const Vec& x, const Vec& p, double u);

/// L(x,v,u) = max_p <v,p> - H(x,p,u). Uses the closed form when present unless
/// `mode` is numeric, in which case the maximum is found by damped ascent.
double eval_L(const HamiltonianModel& model, const Vec& x, const Vec& v, double u,
              LagrangianEval mode = LagrangianEval::automatic);

/// Damped gradient ascent for p -> <v,p> - H(x,p,u), started at p = 0.
/// Throws NumericalError (carrying the best iterate) past the iteration cap.
LegendreMaximizer maximize_legendre(const HamiltonianModel& model, const Vec& x, const Vec& v,
                                    double u, double tol = 1e-10, int max_iter = 10000);

/// Lagrangian side of a model: L, its u-derivative and the Legendre maps.
class LagrangianView {
 public:
  explicit LagrangianView(const HamiltonianModel& model) : model_(&model) {}

  double L(const Vec& x, const Vec& v, double u) const { return eval_L(*model_, x, v, u); }
  /// Envelope identity: dL/du(x,v,u) = -dH/du(x, p*(x,v,u), u).
  double dL_du(const Vec& x, const Vec& v, double u) const;
  Vec legendre_v(const Vec& x, const Vec& p, double u = 0.0) const;
  Vec legendre_p(const Vec& x, const Vec& v, double u = 0.0) const;

 private:
  const HamiltonianModel* model_;
};

}  // namespace vdlab

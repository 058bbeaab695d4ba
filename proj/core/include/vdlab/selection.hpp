#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vdlab/adjoint.hpp"
#include "vdlab/hamiltonian.hpp"
#include "vdlab/hj_solvers.hpp"
#include "vdlab/torus_grid.hpp"

namespace vdlab {

/// Discrete bump kernel exp(-1/(1-r^2)), r = |offset| h / eta_m, unit mass.
/// Throws ResolutionError when eta_m < 2h.
GridField mollify(const GridField& field, double eta_m);

struct MollifiedResidual {
  GridField smoothed;
  GridField residual;  ///< S_i
  double eta_m = 0.0;
  double sup_residual = 0.0;
  double mean_positive = 0.0;  ///< mean over nodes of max(S_i, 0)
};

/// S_i = H^LF(x_i, D smoothed, lambda u_i) - alpha_i Lap smoothed_i - c, with
/// u = u_for_contact. An empty `sigma_nodes` re-estimates local sigma on the
/// smoothed field.
MollifiedResidual mollify_and_residual(const HamiltonianModel& model, const GridField& field,
                                       const GridField& u_for_contact, double lambda,
                                       double eta_m, double c,
                                       std::span<const double> sigma_nodes = {});

/// Bound on |S| valid for every field with discrete Lipschitz constant <= lip:
/// max over nodes and the box |p_a| <= lip of |H(x,p,0) - c|, plus n sigma_max lip
/// and 2n alpha_max lip / h.
double residual_bound(const HamiltonianModel& model, const TorusGrid& grid, double lip, double c,
                      double sigma_max);

/// sum_atoms w dL/du(x, v, 0) omega(node).
double admissibility_margin(const HamiltonianModel& model, const GridField& omega,
                            const PhaseMeasure& mu);
/// sum_atoms w dL/du(x, v, 0): the margin of the constant field 1.
double constant_margin(const HamiltonianModel& model, const PhaseMeasure& mu);

struct Admissibility {
  bool admissible = false;
  std::vector<double> margins;
};

Admissibility admissibility_test(const HamiltonianModel& model, const GridField& omega,
                                 const std::vector<PhaseMeasure>& measures, double tol = 1e-3);

/// "zero", "cos:k", "-cos:k", "sin:k", "-sin:k" (k a positive integer, applied
/// on every axis and summed). Throws ConfigError otherwise.
GridField make_seed(const TorusGrid& grid, const std::string& spec);

struct Candidate {
  std::string seed;
  GridField field;
  double residual = 0.0;
  bool settled = false;
  std::vector<double> margins{};
  bool admissible = false;
  /// Vertical translate added to the solver output (0 for raw members).
  double shift = 0.0;
};

struct CandidateOptions {
  double residual_threshold = 5e-2;
  double admissibility_tol = 1e-3;
  /// Adds, for every accepted solution, its largest admissible translate.
  bool augment_translates = true;
};

struct CandidateSet {
  std::vector<Candidate> members;
  /// Seeds dropped by the residual filter, with their residuals.
  std::vector<std::pair<std::string, double>> excluded;
  CandidateOptions options{};

  std::size_t admissible_count() const;
};

/// Critical solves from every seed, residual filter, admissibility against
/// `measures`. Members appear in seed order, each translate right after its source.
CandidateSet build_candidates(const HamiltonianModel& model, const TorusGrid& grid, double eta,
                              double c, const std::vector<std::pair<std::string, GridField>>& seeds,
                              const std::vector<PhaseMeasure>& measures, const SolveConfig& cfg,
                              const CandidateOptions& opts = {});

/// Classifies an already computed field and appends it (and its translate).
void add_candidate(CandidateSet& set, const HamiltonianModel& model, std::string seed,
                   GridField field, double residual, bool settled,
                   const std::vector<PhaseMeasure>& measures);

/// Pointwise max over admissible members. Throws SelectionError when none is admissible.
GridField select_u0(const CandidateSet& candidates);

struct EstimateCheck {
  std::vector<double> values{};  ///< per measure (upper) or per source point (lower)
  double worst = 0.0;
  double tol = 0.0;
  bool pass = false;
};

/// -margin of limit_field for each measure; passes iff every entry <= tol.
EstimateCheck check_upper_estimate(const GridField& limit_field,
                                   const std::vector<PhaseMeasure>& measures,
                                   const HamiltonianModel& model, double tol = 1e-2);

struct LowerEstimateReport {
  std::vector<std::size_t> sources{};
  /// u(x0) - w(x0) + sum_i w_i beta_i theta_i h^n, w the (mollified) candidate
  std::vector<double> lhs{};
  std::vector<double> needed_slack{};  ///< max(0, -lhs)
  double worst_slack = 0.0;
  double tol = 0.0;
  bool mollified = false;
  bool pass = false;
};

/// Evaluates the lower estimate for u_lambda at every source node. omega is
/// mollified with radius eta when eta >= 2h and used as is otherwise. Adjoint
/// solves are done here unless `thetas` (one per source) is supplied.
LowerEstimateReport check_lower_estimate(const HamiltonianModel& model, const GridField& omega,
                                         const GridField& u_lambda, double lambda, double eta,
                                         const std::vector<std::size_t>& x0_set,
                                         double tol = 1e-2,
                                         const std::vector<StateMeasure>* thetas = nullptr);

struct ConvergenceTable {
  std::vector<double> lambdas{};
  std::vector<double> sup_distance{};
  std::vector<double> h6_distance{};  ///< against the H6 proxy when given
  bool nonincreasing = false;
  bool final_within_tol = false;
  double tol = 0.0;
  bool pass = false;
};

/// ||u_lambda - u0|| along the sweep. Passes iff d_{k+1} <= (1 + slack) d_k
/// throughout and the last distance is <= tol.
ConvergenceTable convergence_comparator(const std::vector<SolveResult>& family,
                                        const GridField& u0, double tol = 5e-2,
                                        double slack = 0.1,
                                        const GridField* h6_u0 = nullptr);

struct SelectionReport {
  ConvergenceTable convergence;
  std::vector<Candidate> candidates;
  std::optional<EstimateCheck> upper{};
  std::optional<LowerEstimateReport> lower{};

  bool all_pass() const;
};

/// {lambda, sup_distance, candidates: [{seed, residual, admissible, margins}],
///  verdicts: {upper_estimate, lower_estimate, convergence}}
nlohmann::json to_json(const SelectionReport& r);

}  // namespace vdlab

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace vdlab {

/// min c^T x  s.t.  A x = b, x >= 0.  A is dense, stored column by column
/// (entry (i, j) at a[j * rows + i]).
struct LinearProgram {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> c;

  LinearProgram(std::size_t m, std::size_t n) : rows(m), cols(n), a(m * n, 0.0), b(m, 0.0), c(n, 0.0) {}
  double& at(std::size_t i, std::size_t j) { return a[j * rows + i]; }
  double at(std::size_t i, std::size_t j) const { return a[j * rows + i]; }
};

struct SimplexOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  long max_iterations = 200000;
  /// Consecutive degenerate pivots before switching to Bland's rule.
  int degenerate_switch = 1000;
  int refactor_every = 50;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

std::string to_string(LpStatus s);

struct LpSolution {
  LpStatus status = LpStatus::iteration_limit;
  double objective = 0.0;
  std::vector<double> x;
  /// Row multipliers y with c - A^T y >= 0 at optimality.
  std::vector<double> duals;
  long iterations = 0;
};

/// Two-phase revised simplex with an explicit basis inverse. Dantzig pricing,
/// Bland's rule after a run of degenerate pivots.
LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& opts = {});

}  // namespace vdlab

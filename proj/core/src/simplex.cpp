#include "vdlab/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vdlab/error.hpp"

namespace vdlab {
namespace {

class Simplex {
 public:
  Simplex(const LinearProgram& lp, const SimplexOptions& opts)
      : lp_(lp), opts_(opts), m_(lp.rows), n_(lp.cols), sign_(m_, 1.0), basis_(m_), xb_(m_),
        binv_(m_ * m_, 0.0) {
    for (std::size_t i = 0; i < m_; ++i) {
      if (lp.b[i] < 0.0) sign_[i] = -1.0;
      basis_[i] = n_ + i;
      xb_[i] = sign_[i] * lp.b[i];
      binv_[i * m_ + i] = 1.0;
    }
  }

  LpSolution run() {
    LpSolution sol;
    std::vector<double> cost1(n_ + m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) cost1[n_ + i] = 1.0;
    LpStatus st = iterate(cost1, true, sol.iterations);
    if (st == LpStatus::iteration_limit) return finish(sol, st, cost1);
    double infeas = 0.0;
    double bscale = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] >= n_) infeas += xb_[i];
      bscale = std::max(bscale, std::abs(lp_.b[i]));
    }
    if (infeas > opts_.feasibility_tol * bscale) return finish(sol, LpStatus::infeasible, cost1);
    drive_out_artificials();
    std::vector<double> cost2(n_ + m_, 0.0);
    std::copy(lp_.c.begin(), lp_.c.end(), cost2.begin());
    st = iterate(cost2, false, sol.iterations);
    return finish(sol, st, cost2);
  }

 private:
  // Column j of the sign-adjusted constraint matrix, artificials included.
  double entry(std::size_t i, std::size_t j) const {
    if (j >= n_) return j - n_ == i ? 1.0 : 0.0;
    return sign_[i] * lp_.a[j * m_ + i];
  }

  void column(std::size_t j, std::vector<double>& out) const {
    out.assign(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) out[i] = entry(i, j);
  }

  // alpha = B^{-1} A_j
  void ftran(std::size_t j, std::vector<double>& alpha) const {
    alpha.assign(m_, 0.0);
    if (j >= n_) {
      const std::size_t r = j - n_;
      for (std::size_t i = 0; i < m_; ++i) alpha[i] = binv_[i * m_ + r];
      return;
    }
    const double* col = &lp_.a[j * m_];
    for (std::size_t i = 0; i < m_; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < m_; ++k) s += binv_[i * m_ + k] * sign_[k] * col[k];
      alpha[i] = s;
    }
  }

  void refactor() {
    std::vector<double> bmat(m_ * m_);
    std::vector<double> col;
    for (std::size_t k = 0; k < m_; ++k) {
      column(basis_[k], col);
      for (std::size_t i = 0; i < m_; ++i) bmat[i * m_ + k] = col[i];
    }
    std::vector<double> inv(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) inv[i * m_ + i] = 1.0;
    for (std::size_t c = 0; c < m_; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < m_; ++r)
        if (std::abs(bmat[r * m_ + c]) > std::abs(bmat[piv * m_ + c])) piv = r;
      if (std::abs(bmat[piv * m_ + c]) < 1e-14) throw NumericalError("singular simplex basis", 0.0);
      if (piv != c)
        for (std::size_t k = 0; k < m_; ++k) {
          std::swap(bmat[c * m_ + k], bmat[piv * m_ + k]);
          std::swap(inv[c * m_ + k], inv[piv * m_ + k]);
        }
      const double d = bmat[c * m_ + c];
      for (std::size_t k = 0; k < m_; ++k) {
        bmat[c * m_ + k] /= d;
        inv[c * m_ + k] /= d;
      }
      for (std::size_t r = 0; r < m_; ++r) {
        if (r == c) continue;
        const double f = bmat[r * m_ + c];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < m_; ++k) {
          bmat[r * m_ + k] -= f * bmat[c * m_ + k];
          inv[r * m_ + k] -= f * inv[c * m_ + k];
        }
      }
    }
    binv_ = std::move(inv);
    // Recompute x_B = B^{-1} b to shed accumulated drift.
    for (std::size_t i = 0; i < m_; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < m_; ++k) s += binv_[i * m_ + k] * sign_[k] * lp_.b[k];
      xb_[i] = std::max(s, 0.0);
    }
  }

  void pivot(std::size_t r, std::size_t q, const std::vector<double>& alpha, double t) {
    for (std::size_t i = 0; i < m_; ++i) xb_[i] = std::max(xb_[i] - t * alpha[i], 0.0);
    xb_[r] = t;
    const double ar = alpha[r];
    for (std::size_t k = 0; k < m_; ++k) binv_[r * m_ + k] /= ar;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r || alpha[i] == 0.0) continue;
      for (std::size_t k = 0; k < m_; ++k) binv_[i * m_ + k] -= alpha[i] * binv_[r * m_ + k];
    }
    basis_[r] = q;
    if (++since_refactor_ >= opts_.refactor_every) {
      refactor();
      since_refactor_ = 0;
    }
  }

  void duals(const std::vector<double>& cost, std::vector<double>& y) const {
    y.assign(m_, 0.0);
    for (std::size_t k = 0; k < m_; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < m_; ++i) s += cost[basis_[i]] * binv_[i * m_ + k];
      y[k] = s;
    }
  }

  double reduced_cost(std::size_t j, const std::vector<double>& cost,
                      const std::vector<double>& y) const {
    double s = cost[j];
    if (j >= n_) return s - y[j - n_];
    const double* col = &lp_.a[j * m_];
    for (std::size_t k = 0; k < m_; ++k) s -= y[k] * sign_[k] * col[k];
    return s;
  }

  LpStatus iterate(const std::vector<double>& cost, bool phase1, long& iterations) {
    std::vector<char> in_basis(n_ + m_, 0);
    for (std::size_t j : basis_) in_basis[j] = 1;
    std::vector<double> y;
    std::vector<double> alpha;
    int degenerate = 0;
    const std::size_t ncand = phase1 ? n_ + m_ : n_;
    while (true) {
      if (iterations >= opts_.max_iterations) return LpStatus::iteration_limit;
      duals(cost, y);
      const bool bland = degenerate >= opts_.degenerate_switch;
      std::size_t q = ncand;
      double best = -opts_.optimality_tol;
      for (std::size_t j = 0; j < ncand; ++j) {
        if (in_basis[j]) continue;
        const double d = reduced_cost(j, cost, y);
        if (d < best) {
          q = j;
          if (bland) break;
          best = d;
        }
      }
      if (q == ncand) return LpStatus::optimal;
      ftran(q, alpha);
      std::size_t r = m_;
      double tmin = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m_; ++i) {
        if (alpha[i] <= opts_.pivot_tol) continue;
        const double t = xb_[i] / alpha[i];
        const bool better = t < tmin - 1e-12;
        const bool tie = !better && t <= tmin + 1e-12 && r < m_;
        if (better || (tie && (bland ? basis_[i] < basis_[r] : alpha[i] > alpha[r]))) {
          tmin = t;
          r = i;
        }
      }
      if (r == m_) return LpStatus::unbounded;
      degenerate = tmin <= 1e-12 ? degenerate + 1 : 0;
      in_basis[basis_[r]] = 0;
      in_basis[q] = 1;
      pivot(r, q, alpha, tmin);
      ++iterations;
    }
  }

  // Pivot zero-level artificials out of the basis where a real column allows it.
  // Artificials left behind sit on redundant rows and never move again.
  void drive_out_artificials() {
    std::vector<char> in_basis(n_ + m_, 0);
    for (std::size_t j : basis_) in_basis[j] = 1;
    std::vector<double> alpha;
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] < n_) continue;
      for (std::size_t j = 0; j < n_; ++j) {
        if (in_basis[j]) continue;
        double rowval = 0.0;
        const double* col = &lp_.a[j * m_];
        for (std::size_t k = 0; k < m_; ++k) rowval += binv_[r * m_ + k] * sign_[k] * col[k];
        if (std::abs(rowval) <= opts_.pivot_tol) continue;
        ftran(j, alpha);
        in_basis[basis_[r]] = 0;
        in_basis[j] = 1;
        pivot(r, j, alpha, 0.0);
        break;
      }
    }
  }

  LpSolution& finish(LpSolution& sol, LpStatus st, const std::vector<double>& cost) {
    sol.status = st;
    sol.x.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] < n_) sol.x[basis_[i]] = xb_[i];
    sol.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) sol.objective += lp_.c[j] * sol.x[j];
    std::vector<double> y;
    duals(cost, y);
    sol.duals.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) sol.duals[i] = sign_[i] * y[i];
    return sol;
  }

  const LinearProgram& lp_;
  SimplexOptions opts_;
  std::size_t m_;
  std::size_t n_;
  std::vector<double> sign_;
  std::vector<std::size_t> basis_;
  std::vector<double> xb_;
  std::vector<double> binv_;  // row-major m x m
  int since_refactor_ = 0;
};

}  // namespace

std::string to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& opts) {
  if (lp.a.size() != lp.rows * lp.cols || lp.b.size() != lp.rows || lp.c.size() != lp.cols)
    throw DomainError("linear program dimensions are inconsistent");
  if (lp.rows == 0) throw DomainError("linear program has no constraints");
  for (double v : lp.a)
    if (!std::isfinite(v)) throw DomainError("non-finite constraint coefficient");
  for (double v : lp.b)
    if (!std::isfinite(v)) throw DomainError("non-finite right-hand side");
  for (double v : lp.c)
    if (!std::isfinite(v)) throw DomainError("non-finite objective coefficient");
  return Simplex(lp, opts).run();
}

}  // namespace vdlab

#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "vdlab/simplex.hpp"

using namespace vdlab;

namespace {

// min c^T x, A x = b, x >= 0, by enumerating all bases (tiny problems only).
double brute_force_min(const LinearProgram& lp) {
  const std::size_t m = lp.rows, n = lp.cols;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pick(m);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t k, std::size_t start) {
    if (k == m) {
      std::vector<double> M(m * (m + 1));
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) M[i * (m + 1) + j] = lp.at(i, pick[j]);
        M[i * (m + 1) + m] = lp.b[i];
      }
      for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col; r < m; ++r)
          if (std::abs(M[r * (m + 1) + col]) > std::abs(M[piv * (m + 1) + col])) piv = r;
        if (std::abs(M[piv * (m + 1) + col]) < 1e-12) return;
        for (std::size_t j = 0; j <= m; ++j) std::swap(M[col * (m + 1) + j], M[piv * (m + 1) + j]);
        for (std::size_t r = 0; r < m; ++r) {
          if (r == col) continue;
          const double f = M[r * (m + 1) + col] / M[col * (m + 1) + col];
          for (std::size_t j = 0; j <= m; ++j) M[r * (m + 1) + j] -= f * M[col * (m + 1) + j];
        }
      }
      double obj = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double xi = M[i * (m + 1) + m] / M[i * (m + 1) + i];
        if (xi < -1e-9) return;
        obj += lp.c[pick[i]] * xi;
      }
      best = std::min(best, obj);
      return;
    }
    for (std::size_t j = start; j < n; ++j) {
      pick[k] = j;
      rec(k + 1, j + 1);
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace

TEST_CASE("textbook LP") {
  // min -x - y, x + 2y + s1 = 4, 3x + y + s2 = 6 -> x = 1.6, y = 1.2
  LinearProgram lp(2, 4);
  lp.at(0, 0) = 1; lp.at(0, 1) = 2; lp.at(0, 2) = 1;
  lp.at(1, 0) = 3; lp.at(1, 1) = 1; lp.at(1, 3) = 1;
  lp.b = {4, 6};
  lp.c = {-1, -1, 0, 0};
  auto s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::optimal);
  CHECK(s.objective == doctest::Approx(-2.8));
  CHECK(s.x[0] == doctest::Approx(1.6));
  CHECK(s.x[1] == doctest::Approx(1.2));
  // dual feasibility c - A^T y >= 0 and strong duality b^T y = c^T x
  double by = 0.0;
  for (std::size_t i = 0; i < 2; ++i) by += lp.b[i] * s.duals[i];
  CHECK(by == doctest::Approx(s.objective));
  for (std::size_t j = 0; j < 4; ++j) {
    double r = lp.c[j];
    for (std::size_t i = 0; i < 2; ++i) r -= lp.at(i, j) * s.duals[i];
    CHECK(r >= -1e-9);
  }
}

TEST_CASE("infeasible and unbounded") {
  LinearProgram inf(2, 2);
  inf.at(0, 0) = 1; inf.at(0, 1) = 1; inf.at(1, 0) = 1; inf.at(1, 1) = 1;
  inf.b = {1, 2};
  CHECK(solve_lp(inf).status == LpStatus::infeasible);

  LinearProgram unb(1, 2);
  unb.at(0, 0) = 1; unb.at(0, 1) = -1;
  unb.b = {1};
  unb.c = {0, -1};
  CHECK(solve_lp(unb).status == LpStatus::unbounded);
  CHECK(to_string(LpStatus::unbounded) == "unbounded");
}

TEST_CASE("random feasible LPs match basis enumeration") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 3, n = 7;
    LinearProgram lp(m, n);
    std::vector<double> x0(n);
    for (auto& v : x0) v = std::abs(U(rng));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) lp.at(i, j) = U(rng);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) lp.b[i] += lp.at(i, j) * x0[j];
    // a probability-simplex row keeps the problem bounded
    for (std::size_t j = 0; j < n; ++j) lp.at(0, j) = 1.0;
    lp.b[0] = 0.0;
    for (double v : x0) lp.b[0] += v;
    for (auto& c : lp.c) c = U(rng);
    auto s = solve_lp(lp);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(s.objective == doctest::Approx(brute_force_min(lp)).epsilon(1e-8));
    for (double v : s.x) CHECK(v >= -1e-9);
  }
}

TEST_CASE("degenerate LP terminates") {
  // Many ties in the ratio test; Bland's rule must avoid cycling.
  LinearProgram lp(3, 7);
  const double A[3][4] = {{0.5, -5.5, -2.5, 9}, {0.5, -1.5, -0.5, 1}, {1, 0, 0, 0}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) lp.at(i, j) = A[i][j];
    lp.at(i, 4 + i) = 1;
  }
  lp.b = {0, 0, 1};
  lp.c = {-10, 57, 9, 24, 0, 0, 0};
  SimplexOptions opts;
  opts.degenerate_switch = 1;
  auto s = solve_lp(lp, opts);
  REQUIRE(s.status == LpStatus::optimal);
  CHECK(s.objective == doctest::Approx(-1.0));
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vdlab/error.hpp"
#include "vdlab/hj_solvers.hpp"
#include "vdlab/selection.hpp"

using namespace vdlab;

namespace {

constexpr double kPi = std::numbers::pi;

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

struct Setup {
  TorusGrid grid;
  HamiltonianModel model;
  ErgodicResult ergodic;
  SolveConfig cfg;
};

Setup make_setup(const std::string& id, const std::string& alpha = "zero", int n = 256) {
  TorusGrid g(1, n);
  auto m = make_model(id, alpha, 1);
  auto e = compute_ergodic_constant(m, g, 1e-4, SolveConfig{});
  SolveConfig cfg;
  cfg.sigma = e.sigma;
  return {g, m, e, cfg};
}

// sup_x |H(x, 0, 0) - c|
double perron_numerator(const Setup& s, double c) {
  double r = 0.0;
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    r = std::max(r, std::abs(eval_H(s.model, s.grid.coords(i), Vec{}, 0.0) - c));
  return r;
}

}  // namespace

TEST_CASE("ModelQ: zero solution and zero ergodic constant") {
  for (const char* alpha : {"zero", "const:0.1", "degenerate"}) {
    auto s = make_setup("Q", alpha, 64);
    CHECK(std::abs(s.ergodic.c) <= 1e-6);
    auto r = solve_discounted(s.model, s.grid, 1e-2, 1e-4, 0.0, s.cfg);
    CHECK(r.residual <= 1e-12);
    CHECK(r.field.max_abs() <= 1e-12);
  }
}

TEST_CASE("ergodic constant of ModelA and ModelA2 against max W = 1") {
  for (const char* id : {"A", "A2"}) {
    CAPTURE(id);
    auto s = make_setup(id);
    CHECK(s.ergodic.c == doctest::Approx(1.0).epsilon(2e-2));
    CHECK(s.ergodic.c_per_delta.size() == s.ergodic.deltas.size());
    CHECK(std::abs(s.ergodic.corrector.mean()) <= 1e-10);
  }
}

TEST_CASE("ergodic constant in 2D approaches 1 under refinement") {
  auto m = make_model("A", "zero", 2);
  double prev_err = 1.0;
  for (int n : {16, 32}) {
    TorusGrid g(2, n);
    const double err = std::abs(compute_ergodic_constant(m, g, 1e-4, SolveConfig{}).c - 1.0);
    CHECK(err < prev_err);
    prev_err = err;
  }
  CHECK(prev_err <= 0.1);
}

TEST_CASE("Perron bound ||lambda u|| <= ||H(., 0, 0) - c|| / rho_*") {
  for (const char* id : {"Q", "A", "A2", "B"}) {
    CAPTURE(id);
    auto s = make_setup(id);
    const double c = s.ergodic.c;
    for (double lambda : {1e-1, 1e-2, 1e-3}) {
      auto r = solve_discounted(s.model, s.grid, lambda, 0.0, c, s.cfg);
      CHECK(lambda * r.field.max_abs() <=
            perron_numerator(s, c) / s.model.monotonicity.rho_star + 1e-9);
    }
  }
}

TEST_CASE("ModelA: u_lambda approaches the analytic limit 4(1 - sin(x/2))") {
  auto s = make_setup("A");
  auto r = solve_discounted(s.model, s.grid, 1e-3, 0.0, s.ergodic.c, s.cfg);
  auto exact = GridField::from_function(s.grid, [](const Vec& x) { return 4.0 * (1.0 - std::sin(x[0] / 2)); });
  const double d = sup_distance(r.field, exact);
  MESSAGE("||u_1e-3 - u0_exact|| = " << d);
  CHECK(d <= 5e-2);
}

TEST_CASE("ModelA: ||u_lambda|| <= 2.1 at lambda = 1e-3" * doctest::may_fail()) {
  auto s = make_setup("A");
  auto r = solve_discounted(s.model, s.grid, 1e-3, 0.0, s.ergodic.c, s.cfg);
  MESSAGE("max |u| = " << r.field.max_abs() << " (analytic limit has sup 4)");
  CHECK(r.field.max_abs() <= 2.1);
}

TEST_CASE("comparison: shifting c by kappa moves u by at most kappa / (lambda rho_*)") {
  auto s = make_setup("A");
  const double kappa = 1e-3;
  for (double lambda : {1e-1, 1e-2}) {
    auto r0 = solve_discounted(s.model, s.grid, lambda, 0.0, s.ergodic.c, s.cfg);
    auto r1 = solve_discounted(s.model, s.grid, lambda, 0.0, s.ergodic.c + kappa, s.cfg);
    CHECK(sup_distance(r0.field, r1.field) <= kappa / (lambda * s.model.monotonicity.rho_star) * (1 + 1e-6));
    for (std::size_t i = 0; i < r0.field.size(); ++i) CHECK(r1.field[i] >= r0.field[i] - 1e-9);
  }
}

TEST_CASE("ModelA: continuity in lambda") {
  auto s = make_setup("A");
  auto a = solve_discounted(s.model, s.grid, 1e-2, 0.0, s.ergodic.c, s.cfg);
  auto b = solve_discounted(s.model, s.grid, 5e-3, 0.0, s.ergodic.c, s.cfg);
  const double cp = std::max(a.field.max_abs(), b.field.max_abs());
  CHECK(sup_distance(a.field, b.field) <= 2 * cp * (1e-2 - 5e-3) / 5e-3);
}

TEST_CASE("sweep: uniform sup and Lipschitz bounds for the catalog") {
  const std::vector<double> lambdas{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  for (const char* id : {"Q", "A", "A2", "B"}) {
    CAPTURE(id);
    auto s = make_setup(id);
    auto fam = lambda_sweep(s.model, s.grid, lambdas, eta_power_rule(), s.ergodic.c, s.cfg);
    REQUIRE(fam.size() == lambdas.size());
    std::vector<double> sup, lip;
    for (const auto& r : fam) {
      CHECK(r.settled);
      sup.push_back(r.field.max_abs());
      lip.push_back(discrete_lipschitz(r.field));
    }
    auto ratio = [](const std::vector<double>& v) {
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      return *hi <= 1e-12 ? 1.0 : *hi / *lo;
    };
    MESSAGE(id << ": sup ratio " << ratio(sup) << ", Lipschitz ratio " << ratio(lip));
    CHECK(ratio(sup) <= 1.25);
    CHECK(ratio(lip) <= 1.25);
  }
}

TEST_CASE("ModelB: sup over the sweep within 15% of the lambda = 1e-1 value") {
  auto s = make_setup("B");
  auto fam = lambda_sweep(s.model, s.grid, {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}, eta_power_rule(),
                          s.ergodic.c, s.cfg);
  const double cp = fam.front().field.max_abs();
  double worst = 0.0;
  for (const auto& r : fam) worst = std::max(worst, r.field.max_abs() / cp - 1.0);
  MESSAGE("ModelB excess over C_p(1e-1): " << worst);
  CHECK(worst <= 0.15);
}

TEST_CASE("ModelB: sup over the sweep within 5% of the lambda = 1e-1 value" * doctest::may_fail()) {
  auto s = make_setup("B");
  auto fam = lambda_sweep(s.model, s.grid, {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}, eta_power_rule(),
                          s.ergodic.c, s.cfg);
  const double cp = fam.front().field.max_abs();
  for (const auto& r : fam) CHECK(r.field.max_abs() <= 1.05 * cp);
}

TEST_CASE("ModelA: sweep is Cauchy as lambda decreases") {
  auto s = make_setup("A");
  auto fam = lambda_sweep(s.model, s.grid, {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}, eta_power_rule(),
                          s.ergodic.c, s.cfg);
  std::vector<double> gaps;
  for (std::size_t k = 1; k < fam.size(); ++k) gaps.push_back(sup_distance(fam[k].field, fam[k - 1].field));
  for (std::size_t k = 1; k < gaps.size(); ++k) CHECK(gaps[k] < gaps[k - 1]);
  for (std::size_t k = 0; k < fam.size(); ++k) {
    CHECK(fam[k].lambda == doctest::Approx(std::vector<double>{1e-1, 3e-2, 1e-2, 3e-3, 1e-3}[k]));
    CHECK(fam[k].eta == doctest::Approx(fam[k].lambda * fam[k].lambda));
  }
}

TEST_CASE("sweep rejects lambdas that are not strictly descending") {
  auto s = make_setup("Q", "zero", 16);
  CHECK_THROWS_AS(lambda_sweep(s.model, s.grid, {1e-2, 1e-1}, eta_power_rule(), 0.0, s.cfg), DomainError);
  CHECK_THROWS_AS(lambda_sweep(s.model, s.grid, {1e-2, 1e-2}, eta_power_rule(), 0.0, s.cfg), DomainError);
  CHECK_THROWS_AS(lambda_sweep(s.model, s.grid, {-1e-2}, eta_power_rule(), 0.0, s.cfg), DomainError);
}

TEST_CASE("regularization error ||u^eta - u^eta_ref|| <= C' eta / lambda with C' independent of lambda") {
  auto s = make_setup("A");
  const std::vector<double> etas{1e-1, 3e-2, 1e-2};
  std::vector<double> constants;
  for (double lambda : {1e-1, 1e-2}) {
    auto ref = solve_discounted(s.model, s.grid, lambda, 1e-4, s.ergodic.c, s.cfg);
    std::vector<double> d;
    for (double eta : etas)
      d.push_back(sup_distance(solve_discounted(s.model, s.grid, lambda, eta, s.ergodic.c, s.cfg).field, ref.field));
    const double sl = slope(etas, d);
    CHECK(sl >= 0.8);
    // fitted C' in ||u^eta - u|| <= C' eta / lambda
    double cmax = 0.0;
    for (std::size_t k = 0; k < etas.size(); ++k) cmax = std::max(cmax, d[k] * lambda / etas[k]);
    MESSAGE("lambda " << lambda << ": slope " << sl << ", C' = " << cmax);
    constants.push_back(cmax);
  }
  const auto [lo, hi] = std::minmax_element(constants.begin(), constants.end());
  CHECK(*hi <= 2.0 * *lo);
}

TEST_CASE("critical solves") {
  SUBCASE("ModelA from zero") {
    auto s = make_setup("A");
    SolveConfig cc = s.cfg;
    cc.tolerance = 1e-6;
    auto w = solve_critical(s.model, s.grid, 1e-4, s.ergodic.c, GridField(s.grid), cc);
    CHECK(w.residual <= 5e-2);
    // Critical solutions of ModelA have their minimum at the Mather point pi.
    std::size_t imin = 0;
    for (std::size_t i = 0; i < w.field.size(); ++i)
      if (w.field[i] < w.field[imin]) imin = i;
    CHECK(std::abs(s.grid.coords(imin)[0] - kPi) <= 2 * s.grid.spacing());
  }
  SUBCASE("ModelA2 from +sin and -sin differ after alignment at pi/2") {
    auto s = make_setup("A2");
    SolveConfig cc = s.cfg;
    cc.tolerance = 1e-6;
    auto a = solve_critical(s.model, s.grid, 1e-4, s.ergodic.c, make_seed(s.grid, "sin:1"), cc);
    auto b = solve_critical(s.model, s.grid, 1e-4, s.ergodic.c, make_seed(s.grid, "-sin:1"), cc);
    const std::size_t i0 = s.grid.nearest_node(Vec{kPi / 2});
    double d = 0.0;
    for (std::size_t i = 0; i < a.field.size(); ++i)
      d = std::max(d, std::abs((a.field[i] - a.field[i0]) - (b.field[i] - b.field[i0])));
    MESSAGE("aligned difference " << d);
    CHECK(d >= 0.1);
  }
  SUBCASE("ModelQ keeps a constant seed") {
    TorusGrid g(1, 64);
    auto w = solve_critical(make_model("Q"), g, 0.0, 0.0, GridField(g, -0.7), SolveConfig{});
    CHECK(w.settled);
    CHECK(w.residual <= 1e-12);
    CHECK(w.field.min() == doctest::Approx(-0.7));
    CHECK(w.field.max() == doctest::Approx(-0.7));
  }
  SUBCASE("iteration cap reports UNSETTLED") {
    auto s = make_setup("A", "zero", 64);
    SolveConfig cc = s.cfg;
    cc.tolerance = 1e-12;
    cc.max_iterations = 5;
    auto w = solve_critical(s.model, s.grid, 1e-4, s.ergodic.c, GridField(s.grid), cc);
    CHECK_FALSE(w.settled);
    CHECK_FALSE(w.warnings.empty());
  }
}

TEST_CASE("discounted solve throws NumericalError at the iteration cap") {
  auto s = make_setup("A", "zero", 64);
  SolveConfig cc = s.cfg;
  cc.tolerance = 1e-14;
  cc.max_iterations = 2;
  try {
    solve_discounted(s.model, s.grid, 1e-3, 0.0, s.ergodic.c, cc);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("lambda") != std::string::npos);
    CHECK(e.last_residual() > 0.0);
  }
}

TEST_CASE("solver config validation") {
  SolveConfig cc;
  cc.cfl = 1.5;
  CHECK_THROWS_AS(cc.validate(), DomainError);
  cc.cfl = 0.5;
  cc.tolerance = -1;
  CHECK_THROWS_AS(cc.validate(), DomainError);
}

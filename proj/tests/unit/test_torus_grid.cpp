#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "vdlab/error.hpp"
#include "vdlab/scheme.hpp"
#include "vdlab/sparse_operator.hpp"
#include "vdlab/torus_grid.hpp"

using namespace vdlab;
using std::numbers::pi;

namespace {

GridField random_field(const TorusGrid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  GridField f(g);
  for (std::size_t i = 0; i < g.size(); ++i) f[i] = d(rng);
  return f;
}

double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a, sy += b, sxx += a * a, sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("grid geometry and periodic indexing") {
  const TorusGrid g(2, 16);
  CHECK(g.size() == 256);
  CHECK(g.spacing() * 16 == doctest::Approx(2 * pi));
  CHECK(g.cell_volume() == doctest::Approx(g.spacing() * g.spacing()));
  CHECK(g.neighbor(0, 0, -1) == 15);
  CHECK(g.neighbor(0, 1, -1) == 15 * 16);
  CHECK(g.flat_index({-1, 17}) == g.flat_index({15, 1}));
  CHECK(g.nearest_node({2 * pi - 1e-9, 0.0}) == 0);
  CHECK_THROWS(TorusGrid(3, 16));
  CHECK_THROWS(TorusGrid(1, 4));
}

TEST_CASE("differences of a constant vanish") {
  const TorusGrid g(2, 12);
  const GridField c(g, 3.5);
  CHECK(diff_forward(c, 0).max_abs() == 0.0);
  CHECK(diff_backward(c, 1).max_abs() == 0.0);
  CHECK(laplacian(c).max_abs() == 0.0);
}

TEST_CASE("forward difference of sin is cos at the midpoint") {
  const TorusGrid g(1, 256);
  const auto f = GridField::from_function(g, [](const Vec& x) { return std::sin(x[0]); });
  const auto d = diff_forward(f, 0);
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    err = std::max(err, std::abs(d[i] - std::cos(g.coords(i)[0] + g.spacing() / 2)));
  CHECK(err <= g.spacing() * g.spacing() / 6);
  CHECK(err <= 1e-3);
}

TEST_CASE("sawtooth wraps at the seam") {
  const TorusGrid g(1, 10);
  GridField f(g);
  for (std::size_t i = 0; i < g.size(); ++i) f[i] = static_cast<double>(i);
  CHECK(diff_forward(f, 0)[9] == doctest::Approx((f[0] - f[9]) / g.spacing()));
  CHECK(diff_backward(f, 0)[0] == doctest::Approx((f[0] - f[9]) / g.spacing()));
}

TEST_CASE("laplacian of cos and conservativity") {
  const TorusGrid g(1, 256);
  const auto f = GridField::from_function(g, [](const Vec& x) { return std::cos(x[0]); });
  const auto l = laplacian(f);
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(l[i] + f[i]));
  CHECK(err <= 1e-3);
  for (int dim : {1, 2}) {
    const TorusGrid gg(dim, 32);
    CHECK(std::abs(laplacian(random_field(gg, 9)).sum()) <= 1e-10 * 32);
  }
}

TEST_CASE("refinement: laplacian is second order") {
  std::vector<double> hs, errs;
  for (int n : {32, 64, 128, 256}) {
    const TorusGrid g(1, n);
    const auto f = GridField::from_function(g, [](const Vec& x) { return std::exp(std::sin(x[0])); });
    const auto l = laplacian(f);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.coords(i)[0];
      const double exact = std::exp(std::sin(x)) * (std::cos(x) * std::cos(x) - std::sin(x));
      err = std::max(err, std::abs(l[i] - exact));
    }
    hs.push_back(g.spacing());
    errs.push_back(err);
  }
  CHECK(log_slope(hs, errs) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("lf_hamiltonian: constant field on ModelQ is zero") {
  const TorusGrid g(2, 8);
  const auto h = lf_hamiltonian(make_model("Q", "zero", 2), GridField(g, 1.0), GridField(g), 0.5);
  CHECK(h.max_abs() == 0.0);
}

TEST_CASE("refinement: lf_hamiltonian is first order on sin x") {
  const auto m = make_model("A");
  std::vector<double> hs, errs;
  for (int n : {64, 128, 256, 512}) {
    const TorusGrid g(1, n);
    const auto u = GridField::from_function(g, [](const Vec& x) { return std::sin(x[0]); });
    const GridField w(g, 0.2);
    const auto h = lf_hamiltonian(m, u, w, 1.05);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Vec x = g.coords(i);
      err = std::max(err, std::abs(h[i] - eval_H(m, x, {std::cos(x[0]), 0.0}, 0.2)));
    }
    hs.push_back(g.spacing());
    errs.push_back(err);
  }
  const double slope = log_slope(hs, errs);
  MESSAGE("fitted C = " << errs.back() / hs.back() << ", slope = " << slope);
  CHECK(slope == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("lf_hamiltonian is monotone in neighbours when sigma covers dH/dp") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> bump(1e-4, 1e-1);
  const auto m = make_model("A2", "zero", 2);
  const TorusGrid g(2, 16);
  const GridField u = random_field(g, 1);
  const GridField w(g);
  const double sigma = estimate_sigma(m, u, w);
  const auto base = lf_hamiltonian(m, u, w, sigma);
  std::uniform_int_distribution<std::size_t> node(0, g.size() - 1);
  std::uniform_int_distribution<int> axis(0, 1), side(0, 1);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t i = node(rng);
    const std::size_t j = g.neighbor(i, axis(rng), side(rng) ? 1 : -1);
    GridField v = u;
    v[j] += bump(rng);
    if (lf_hamiltonian(m, v, w, sigma)[i] > base[i] + 1e-12) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("lf_hamiltonian warns when sigma is too small") {
  const TorusGrid g(1, 32);
  const auto u = GridField::from_function(g, [](const Vec& x) { return std::sin(x[0]); });
  std::vector<std::string> warnings;
  lf_hamiltonian(make_model("A"), u, GridField(g), 0.1, &warnings);
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("assemble_linearized: ModelQ at zero is lambda times identity") {
  const TorusGrid g(1, 16);
  const auto lin = assemble_linearized(make_model("Q"), GridField(g), 1.0, 0.0);
  const auto ones = std::vector<double>(g.size(), 1.0);
  const auto a1 = lin.op.apply(ones);
  for (double v : a1) CHECK(v == doctest::Approx(1.0));
  CHECK(lin.op.nonzeros() >= g.size());
  CHECK(lin.op.max_offdiagonal() <= 0.0);
}

TEST_CASE("assemble_linearized: constants, transpose and M-matrix structure") {
  for (const char* id : {"A", "A2", "B"})
    for (int dim : {1, 2})
      for (AdjointMode mode : {AdjointMode::frozen, AdjointMode::jacobian}) {
        const auto m = make_model(id, "degenerate", dim);
        const TorusGrid g(dim, dim == 1 ? 64 : 12);
        const GridField u = random_field(g, 2);
        SchemeParams sp;
        const auto sig = estimate_local_sigma(m, u, GridField(g));
        sp.sigma_nodes = sig;
        const double lambda = 0.05;
        const auto lin = assemble_linearized(m, u, lambda, 0.1, mode, sp);
        const auto a1 = lin.op.apply(std::vector<double>(g.size(), 1.0));
        double worst = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(a1[i] - lambda * lin.beta[i]));
        CHECK(worst <= 1e-12);
        for (double s : lin.transport_diffusion.row_sums()) CHECK(std::abs(s) <= 1e-12 * 1e3);
        if (mode == AdjointMode::frozen) {
          CHECK(lin.op.max_offdiagonal() <= 0.0);
          const auto u0 = GridField(g);
          for (std::size_t i = 0; i < g.size(); ++i) {
            const Vec p = centered_gradient(u, i);
            CHECK(lin.beta[i] == doctest::Approx(m.dH_du(g.coords(i), p, 0.0)));
          }
        }
        std::mt19937 rng(5);
        std::normal_distribution<double> nd;
        const auto at = lin.op.transpose();
        for (int t = 0; t < 100; ++t) {
          std::vector<double> th(g.size()), f(g.size());
          for (auto& v : th) v = nd(rng);
          for (auto& v : f) v = nd(rng);
          const auto af = lin.op.apply(f);
          const auto atth = lin.op.apply_transpose(th);
          const auto atth2 = at.apply(th);
          double l = 0, r = 0, r2 = 0, scale = 0;
          for (std::size_t i = 0; i < g.size(); ++i) {
            l += th[i] * af[i];
            r += atth[i] * f[i];
            r2 += atth2[i] * f[i];
            scale += std::abs(th[i] * af[i]);
          }
          CHECK(std::abs(l - r) <= 1e-12 * scale);
          CHECK(std::abs(l - r2) <= 1e-12 * scale);
        }
      }
}

TEST_CASE("sparse operator transpose equals entrywise transpose") {
  const auto op = SparseOperator::from_triplets(3, {{0, 1, 2.0}, {1, 2, -1.0}, {2, 0, 4.0}, {0, 1, 1.0}});
  const auto t = op.transpose();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(t.coeff(i, j) == op.coeff(j, i));
  CHECK(op.coeff(0, 1) == 3.0);
  CHECK(op.column_sums()[0] == 4.0);
}

TEST_CASE("field CSV round trip is exact") {
  const TorusGrid g(2, 8);
  const GridField f = random_field(g, 3);
  const auto path = (std::filesystem::temp_directory_path() / "vdlab_field_roundtrip.csv").string();
  write_field_csv(path, f);
  const GridField back = read_field_csv(path);
  CHECK(back.grid() == g);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(back[i] == f[i]);
  std::filesystem::remove(path);
}

TEST_CASE("GridField rejects non-finite values") {
  const TorusGrid g(1, 8);
  CHECK_THROWS_AS(GridField(g, std::vector<double>(8, NAN)), DomainError);
  CHECK_THROWS_AS(GridField(g, std::vector<double>(7, 0.0)), DomainError);
}

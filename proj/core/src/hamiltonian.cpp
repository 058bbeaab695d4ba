#include "vdlab/hamiltonian.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "vdlab/error.hpp"

namespace vdlab {
namespace {

bool finite(const Vec& a, int dim) {
  for (int k = 0; k < dim; ++k)
    if (!std::isfinite(a[k])) return false;
  return true;
}

// Potential W(x) = -(1/n) sum_a cos(f x_a), maximum value 1.
double potential(const Vec& x, int dim, double freq) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += std::cos(freq * x[k]);
  return -s / dim;
}

Vec potential_gradient(const Vec& x, int dim, double freq) {
  Vec g{};
  for (int k = 0; k < dim; ++k) g[k] = freq * std::sin(freq * x[k]) / dim;
  return g;
}

double parse_double(std::string_view text, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
    throw ConfigError("invalid number '" + std::string(text) + "' in " + std::string(what),
                      std::string(what));
  return v;
}

}  // namespace

DiffusionCoefficient make_alpha(std::string_view selector, int dim) {
  if (selector == "zero") return [](const Vec&) { return 0.0; };
  if (selector == "degenerate") {
    // (1/n) sum_a (1 - cos x_a)/2: vanishes only at the origin.
    return [dim](const Vec& x) {
      double s = 0.0;
      for (int k = 0; k < dim; ++k) s += 0.5 * (1.0 - std::cos(x[k]));
      return s / dim;
    };
  }
  if (selector.starts_with("const:")) {
    const double value = parse_double(selector.substr(6), "alpha");
    if (value < 0.0) throw ConfigError("alpha constant must be nonnegative", "alpha");
    return [value](const Vec&) { return value; };
  }
  throw ConfigError("unknown alpha selector '" + std::string(selector) +
                        "' (expected zero, const:<value>, degenerate)",
                    "alpha");
}

HamiltonianModel make_model(std::string_view id, std::string_view alpha, int dim) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("dim must be 1 or 2", "dim");

  HamiltonianModel m;
  m.id = std::string(id);
  m.alpha_id = std::string(alpha);
  m.dim = dim;
  m.alpha = make_alpha(alpha, dim);
  m.growth = {2.0, 0.5, 1.0};
  m.dH_dp = [dim](const Vec&, const Vec& p, double) {
    Vec v{};
    for (int k = 0; k < dim; ++k) v[k] = p[k];
    return v;
  };

  if (id == "Q") {
    m.H = [dim](const Vec&, const Vec& p, double u) { return 0.5 * dot(p, p, dim) + u; };
    m.dH_du = [](const Vec&, const Vec&, double) { return 1.0; };
    m.dH_dx = [](const Vec&, const Vec&, double) { return Vec{}; };
    m.monotonicity = {1.0, 1.0};
    m.closed_form_L = [dim](const Vec&, const Vec& v, double u) {
      return 0.5 * dot(v, v, dim) - u;
    };
    return m;
  }

  if (id == "A" || id == "A2") {
    const double freq = id == "A" ? 1.0 : 2.0;
    m.H = [dim, freq](const Vec& x, const Vec& p, double u) {
      return 0.5 * dot(p, p, dim) + potential(x, dim, freq) + u;
    };
    m.dH_du = [](const Vec&, const Vec&, double) { return 1.0; };
    m.dH_dx = [dim, freq](const Vec& x, const Vec&, double) {
      return potential_gradient(x, dim, freq);
    };
    m.monotonicity = {1.0, 1.0};
    m.closed_form_L = [dim, freq](const Vec& x, const Vec& v, double u) {
      return 0.5 * dot(v, v, dim) - potential(x, dim, freq) - u;
    };
    return m;
  }

  if (id == "B") {
    m.H = [dim](const Vec& x, const Vec& p, double u) {
      return 0.5 * dot(p, p, dim) + potential(x, dim, 1.0) + u + 0.5 * std::sin(u);
    };
    m.dH_du = [](const Vec&, const Vec&, double u) { return 1.0 + 0.5 * std::cos(u); };
    m.dH_dx = [dim](const Vec& x, const Vec&, double) {
      return potential_gradient(x, dim, 1.0);
    };
    m.monotonicity = {0.5, 1.5};
    m.closed_form_L = [dim](const Vec& x, const Vec& v, double u) {
      return 0.5 * dot(v, v, dim) - potential(x, dim, 1.0) - u - 0.5 * std::sin(u);
    };
    return m;
  }

  throw ConfigError("unknown model '" + std::string(id) + "' (expected Q, A, A2, B)", "model");
}

double eval_H(const HamiltonianModel& model, const Vec& x, const Vec& p, double u) {
  if (!finite(x, model.dim) || !finite(p, model.dim) || !std::isfinite(u))
    throw DomainError("eval_H: non-finite argument");
  return model.H(wrap_point(x, model.dim), p, u);
}

LegendreMaximizer maximize_legendre(const HamiltonianModel& model, const Vec& x, const Vec& v,
                                    double u, double tol, int max_iter) {
  const int n = model.dim;
  if (!finite(x, n) || !finite(v, n) || !std::isfinite(u))
    throw DomainError("eval_L: non-finite argument");
  const Vec xw = wrap_point(x, n);
  auto objective = [&](const Vec& p) { return dot(v, p, n) - model.H(xw, p, u); };

  LegendreMaximizer best;
  best.value = objective(best.p);
  double step = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const Vec slope = model.dH_dp(xw, best.p, u);
    Vec g{};
    for (int k = 0; k < n; ++k) g[k] = v[k] - slope[k];
    const double g2 = dot(g, g, n);
    if (std::sqrt(g2) <= tol) {
      best.iterations = it;
      return best;
    }
    // Armijo backtracking; the step may grow again after an accepted move.
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      Vec trial = best.p;
      for (int k = 0; k < n; ++k) trial[k] += step * g[k];
      const double f = objective(trial);
      if (f >= best.value + 1e-4 * step * g2) {
        best.p = trial;
        best.value = f;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No ascent possible at machine precision: the gradient is at rounding level.
      best.iterations = it;
      if (std::sqrt(g2) <= 1e3 * tol) return best;
      break;
    }
    step = std::min(2.0 * step, 1e6);
  }
  throw NumericalError("Legendre ascent did not converge", best.value,
                       std::vector<double>(best.p.begin(), best.p.begin() + n));
}

double eval_L(const HamiltonianModel& model, const Vec& x, const Vec& v, double u,
              LagrangianEval mode) {
  if (mode == LagrangianEval::automatic && model.closed_form_L) {
    if (!finite(x, model.dim) || !finite(v, model.dim) || !std::isfinite(u))
      throw DomainError("eval_L: non-finite argument");
    return (*model.closed_form_L)(wrap_point(x, model.dim), v, u);
  }
  return maximize_legendre(model, x, v, u).value;
}

double LagrangianView::dL_du(const Vec& x, const Vec& v, double u) const {
  const Vec p = legendre_p(x, v, u);
  return -model_->dH_du(wrap_point(x, model_->dim), p, u);
}

Vec LagrangianView::legendre_v(const Vec& x, const Vec& p, double u) const {
  return model_->dH_dp(wrap_point(x, model_->dim), p, u);
}

Vec LagrangianView::legendre_p(const Vec& x, const Vec& v, double u) const {
  return maximize_legendre(*model_, x, v, u).p;
}

}  // namespace vdlab

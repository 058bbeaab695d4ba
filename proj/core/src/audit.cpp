#include "vdlab/audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "vdlab/error.hpp"

namespace vdlab {
namespace {

std::string describe(const char* label, const Vec& a, int dim) {
  std::ostringstream os;
  os.precision(6);
  os << label << "=(";
  for (int k = 0; k < dim; ++k) os << (k ? "," : "") << a[k];
  os << ")";
  return os.str();
}

double torus_distance(const Vec& x, const Vec& y, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) {
    double d = std::abs(wrap_angle(x[k]) - wrap_angle(y[k]));
    d = std::min(d, kTwoPi - d);
    s += d * d;
  }
  return std::sqrt(s);
}

class Sampler {
 public:
  Sampler(const SampleSpec& spec, int dim) : spec_(spec), dim_(dim), rng_(spec.seed) {}

  Vec x() {
    std::uniform_int_distribution<int> node(0, spec_.x_grid - 1);
    Vec out{};
    for (int k = 0; k < dim_; ++k) out[k] = kTwoPi * node(rng_) / spec_.x_grid;
    return out;
  }
  Vec p() {
    std::uniform_real_distribution<double> d(-spec_.p_radius, spec_.p_radius);
    Vec out{};
    for (int k = 0; k < dim_; ++k) out[k] = d(rng_);
    return out;
  }
  Vec direction() {
    std::normal_distribution<double> d(0.0, 1.0);
    Vec out{};
    double n = 0.0;
    while (n < 1e-8) {
      for (int k = 0; k < dim_; ++k) out[k] = d(rng_);
      n = norm(out, dim_);
    }
    for (int k = 0; k < dim_; ++k) out[k] /= n;
    return out;
  }
  double u() { return std::uniform_real_distribution<double>(-spec_.u_range, spec_.u_range)(rng_); }
  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

 private:
  const SampleSpec& spec_;
  int dim_;
  std::mt19937_64 rng_;
};

AuditEntry audit_alpha(const HamiltonianModel& m, const SampleSpec& spec) {
  AuditEntry e{"alpha", true, std::numeric_limits<double>::infinity(), {}, {}};
  const int n = m.dim;
  const int total = n == 1 ? spec.x_grid : spec.x_grid * spec.x_grid;
  for (int flat = 0; flat < total; ++flat) {
    Vec x{};
    x[0] = kTwoPi * (flat % spec.x_grid) / spec.x_grid;
    if (n == 2) x[1] = kTwoPi * (flat / spec.x_grid) / spec.x_grid;
    const double a = m.alpha(x);
    if (a < e.margin) e.margin = a;
    if (!(a >= 0.0) && e.witness.empty()) {
      e.pass = false;
      e.witness = describe("x", x, n);
    }
  }
  e.fitted["alpha_min"] = e.margin;
  return e;
}

AuditEntry audit_h1(const HamiltonianModel& m, const SampleSpec& spec, Sampler& s) {
  AuditEntry e{"H1", true, std::numeric_limits<double>::infinity(), {}, {}};
  const int n = m.dim;
  for (int i = 0; i < spec.samples; ++i) {
    const Vec x = s.x(), p = s.p(), d = s.direction();
    const double u = s.u();
    const double step = 1e-2 * (1.0 + norm(p, n));
    Vec pp = p, pm = p;
    for (int k = 0; k < n; ++k) {
      pp[k] += step * d[k];
      pm[k] -= step * d[k];
    }
    const double second = (m.H(x, pp, u) - 2.0 * m.H(x, p, u) + m.H(x, pm, u)) / (step * step);
    if (second < e.margin) e.margin = second;
    if (!(second > 0.0) && e.witness.empty()) {
      e.pass = false;
      e.witness = describe("x", x, n) + " " + describe("p", p, n) + " " + describe("dir", d, n);
    }
  }
  e.fitted["min_curvature"] = e.margin;
  return e;
}

AuditEntry audit_h2(const HamiltonianModel& m, const SampleSpec& spec, Sampler& s) {
  AuditEntry e{"H2", true, std::numeric_limits<double>::infinity(), {}, {}};
  const int n = m.dim;
  const auto& g = m.growth;
  double smallest_M = -std::numeric_limits<double>::infinity();
  if (!(g.m > 1.0 && g.K_m > 0.0 && g.M_m > 0.0)) {
    e.pass = false;
    e.witness = "declared growth constants out of range";
  }
  for (int i = 0; i < spec.samples; ++i) {
    const Vec x = s.x(), p = s.p();
    const double lower = g.K_m * std::pow(norm(p, n), g.m);
    const double h0 = m.H(x, p, 0.0);
    const double margin = h0 - (lower - g.M_m);
    smallest_M = std::max(smallest_M, lower - h0);
    e.margin = std::min(e.margin, margin);
    if (margin < -1e-12 && e.witness.empty()) {
      e.pass = false;
      e.witness = describe("x", x, n) + " " + describe("p", p, n);
    }
  }
  e.fitted["M_m_smallest"] = smallest_M;
  e.fitted["K_m"] = g.K_m;
  e.fitted["m"] = g.m;
  return e;
}

AuditEntry audit_h3(const HamiltonianModel& m, const SampleSpec& spec, Sampler& s) {
  AuditEntry e{"H3", true, std::numeric_limits<double>::infinity(), {}, {}};
  const int n = m.dim;
  const auto& mono = m.monotonicity;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < spec.samples; ++i) {
    // The first probe is pinned to (x, p) = 0, (u1, u2) = (0, 1).
    Vec x{}, p{};
    double u1 = 0.0, u2 = 1.0;
    if (i > 0) {
      x = s.x();
      p = s.p();
      u1 = s.u();
      u2 = s.u();
      if (u2 < u1) std::swap(u1, u2);
      if (u2 - u1 < 1e-6) u2 = u1 + 1e-6;
    }
    const double slope = (m.H(x, p, u2) - m.H(x, p, u1)) / (u2 - u1);
    lo = std::min(lo, slope);
    hi = std::max(hi, slope);
    const double margin = std::min(slope - mono.rho_star, mono.rho_upper - slope);
    e.margin = std::min(e.margin, margin);
    if ((margin < -1e-9 || !(slope > 0.0)) && e.witness.empty()) {
      e.pass = false;
      std::ostringstream os;
      os << describe("x", x, n) << " " << describe("p", p, n) << " u1=" << u1 << " u2=" << u2
         << " slope=" << slope;
      e.witness = os.str();
    }
  }
  if (!(mono.rho_star > 0.0 && mono.rho_upper >= mono.rho_star)) e.pass = false;
  e.fitted["rho_star"] = lo;
  e.fitted["rho_upper"] = hi;
  return e;
}

// (H4) and (H5) quantify over existential constants; the audit fits the
// smallest values consistent with the samples and fails only if no finite
// constant exists on them.
AuditEntry audit_h4(const HamiltonianModel& m, const SampleSpec& spec, Sampler& s) {
  AuditEntry e{"H4", true, 0.0, {}, {}};
  const int n = m.dim;
  struct Probe { Vec x, y, p; double u; };
  std::vector<Probe> probes;
  probes.reserve(spec.samples);
  double min_h0 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < spec.samples; ++i) {
    Probe pr{s.x(), {}, s.p(), s.u()};
    for (int k = 0; k < n; ++k) pr.y[k] = pr.x[k] + 0.5 * (2.0 * s.unit() - 1.0);
    min_h0 = std::min(min_h0, m.H(pr.x, pr.p, 0.0));
    probes.push_back(pr);
  }
  const double varsigma = std::max(0.0, -min_h0) + 1.0;
  double kappa = 0.0;
  for (const auto& pr : probes) {
    const double dist = torus_distance(pr.x, pr.y, n);
    if (dist < 1e-12) continue;
    const double denom = (m.H(pr.x, pr.p, 0.0) + varsigma) * dist;
    const double ratio = std::abs(m.H(pr.x, pr.p, pr.u) - m.H(pr.y, pr.p, pr.u)) / denom;
    if (!std::isfinite(ratio) && e.witness.empty()) {
      e.pass = false;
      e.witness = describe("x", pr.x, n) + " " + describe("y", pr.y, n);
    }
    kappa = std::max(kappa, ratio);
  }
  e.fitted["kappa"] = kappa;
  e.fitted["varsigma"] = varsigma;
  e.margin = e.pass ? 1.0 / (1.0 + kappa) : -1.0;
  return e;
}

AuditEntry audit_h5(const HamiltonianModel& m, const SampleSpec& spec, Sampler& s) {
  AuditEntry e{"H5", true, 0.0, {}, {}};
  const int n = m.dim;
  struct Probe { Vec x, p, q; double u; };
  std::vector<Probe> probes;
  probes.reserve(spec.samples);
  double min_h = std::numeric_limits<double>::infinity();
  for (int i = 0; i < spec.samples; ++i) {
    Probe pr{s.x(), s.p(), {}, s.u()};
    // q uniform in the ball |q| <= 2|p|
    const Vec d = s.direction();
    const double r = 2.0 * norm(pr.p, n) * s.unit();
    for (int k = 0; k < n; ++k) pr.q[k] = r * d[k];
    min_h = std::min(min_h, m.H(pr.x, pr.p, pr.u));
    probes.push_back(pr);
  }
  const double eta = std::max(0.0, -min_h) + 1.0;
  double xi = 0.0;
  for (const auto& pr : probes) {
    Vec diff{};
    for (int k = 0; k < n; ++k) diff[k] = pr.p[k] - pr.q[k];
    const double dp = norm(diff, n);
    if (dp < 1e-12) continue;
    const double denom = (m.H(pr.x, pr.p, pr.u) + eta) * dp / (norm(pr.p, n) + 1.0);
    const double ratio = std::abs(m.H(pr.x, pr.p, pr.u) - m.H(pr.x, pr.q, pr.u)) / denom;
    if (!std::isfinite(ratio) && e.witness.empty()) {
      e.pass = false;
      e.witness = describe("x", pr.x, n) + " " + describe("p", pr.p, n);
    }
    xi = std::max(xi, ratio);
  }
  e.fitted["xi"] = xi;
  e.fitted["eta"] = eta;
  e.margin = e.pass ? 1.0 / (1.0 + xi) : -1.0;
  return e;
}

AuditEntry audit_h6(const HamiltonianModel& m, const SampleSpec& spec, Sampler& s) {
  AuditEntry e{"H6", true, 0.0, {}, {}};
  const int n = m.dim;
  double bound = 0.0;
  for (int i = 0; i < spec.samples; ++i) {
    const Vec x = s.x(), p = s.p();
    const double u = s.u();
    if (std::abs(u) < 1e-9) continue;
    const double ratio = std::abs(m.dH_du(x, p, u) - m.dH_du(x, p, 0.0)) / std::abs(u);
    if (!std::isfinite(ratio) && e.witness.empty()) {
      e.pass = false;
      e.witness = describe("x", x, n) + " " + describe("p", p, n);
    }
    bound = std::max(bound, ratio);
  }
  e.fitted["B_R"] = bound;
  e.fitted["R"] = spec.u_range;
  e.margin = e.pass ? 1.0 / (1.0 + bound) : -1.0;
  return e;
}

}  // namespace

bool AuditReport::all_pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const AuditEntry& e) { return e.pass; });
}

const AuditEntry& AuditReport::entry(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw std::out_of_range("assumption not audited: " + name);
}

AuditReport audit_assumptions(const HamiltonianModel& model, const SampleSpec& spec) {
  if (spec.x_grid < 1 || spec.samples < 1 || !(spec.p_radius > 0.0) || !(spec.u_range > 0.0) ||
      !std::isfinite(spec.p_radius) || !std::isfinite(spec.u_range))
    throw DomainError("audit sample specification must be finite and positive");

  AuditReport report;
  report.model_id = model.id;
  Sampler sampler(spec, model.dim);
  report.entries.push_back(audit_alpha(model, spec));
  report.entries.push_back(audit_h1(model, spec, sampler));
  report.entries.push_back(audit_h2(model, spec, sampler));
  report.entries.push_back(audit_h3(model, spec, sampler));
  report.entries.push_back(audit_h4(model, spec, sampler));
  report.entries.push_back(audit_h5(model, spec, sampler));
  if (spec.audit_h6) report.entries.push_back(audit_h6(model, spec, sampler));
  return report;
}

}  // namespace vdlab

#include "vdlab/torus_grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vdlab/error.hpp"
#include "vdlab/io.hpp"

namespace vdlab {

TorusGrid::TorusGrid(int dim, int nodes_per_axis) : dim_(dim), n_(nodes_per_axis) {
  if (dim < 1 || dim > kMaxDim) throw DomainError("grid dimension must be 1 or 2");
  if (nodes_per_axis < 8) throw DomainError("grid needs at least 8 nodes per axis");
  h_ = kTwoPi / n_;
  size_ = dim_ == 1 ? static_cast<std::size_t>(n_) : static_cast<std::size_t>(n_) * n_;
}

MultiIndex TorusGrid::multi_index(std::size_t flat) const noexcept {
  MultiIndex idx{};
  idx[0] = static_cast<int>(flat % n_);
  if (dim_ == 2) idx[1] = static_cast<int>(flat / n_);
  return idx;
}

std::size_t TorusGrid::flat_index(MultiIndex idx) const noexcept {
  std::size_t flat = 0;
  std::size_t stride = 1;
  for (int k = 0; k < dim_; ++k) {
    int i = idx[k] % n_;
    if (i < 0) i += n_;
    flat += stride * static_cast<std::size_t>(i);
    stride *= static_cast<std::size_t>(n_);
  }
  return flat;
}

std::size_t TorusGrid::neighbor(std::size_t flat, int axis, int offset) const noexcept {
  MultiIndex idx = multi_index(flat);
  idx[axis] += offset;
  return flat_index(idx);
}

Vec TorusGrid::coords(std::size_t flat) const noexcept {
  const MultiIndex idx = multi_index(flat);
  Vec x{};
  for (int k = 0; k < dim_; ++k) x[k] = h_ * idx[k];
  return x;
}

std::size_t TorusGrid::nearest_node(const Vec& x) const noexcept {
  MultiIndex idx{};
  for (int k = 0; k < dim_; ++k)
    idx[k] = static_cast<int>(std::lround(wrap_angle(x[k]) / h_)) % n_;
  return flat_index(idx);
}

GridField::GridField(const TorusGrid& grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

GridField::GridField(const TorusGrid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw DomainError("field length does not match the grid node count");
  if (!all_finite()) throw DomainError("field has non-finite entries");
}

GridField GridField::from_function(const TorusGrid& grid,
                                   const std::function<double(const Vec&)>& f) {
  GridField out(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = f(grid.coords(i));
  return out;
}

double GridField::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}
double GridField::min() const noexcept { return *std::min_element(values_.begin(), values_.end()); }
double GridField::max() const noexcept { return *std::max_element(values_.begin(), values_.end()); }
double GridField::sum() const noexcept { return std::accumulate(values_.begin(), values_.end(), 0.0); }
bool GridField::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

GridField& GridField::operator+=(const GridField& o) {
  if (!(o.grid_ == grid_)) throw DomainError("field grids differ");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}
GridField& GridField::operator-=(const GridField& o) {
  if (!(o.grid_ == grid_)) throw DomainError("field grids differ");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}
GridField& GridField::operator+=(double c) {
  for (double& v : values_) v += c;
  return *this;
}
GridField& GridField::operator*=(double c) {
  for (double& v : values_) v *= c;
  return *this;
}

GridField operator+(GridField a, const GridField& b) { return a += b; }
GridField operator-(GridField a, const GridField& b) { return a -= b; }
GridField operator+(GridField a, double c) { return a += c; }
GridField operator*(double c, GridField a) { return a *= c; }

double sup_distance(const GridField& a, const GridField& b) { return (a - b).max_abs(); }

GridField diff_forward(const GridField& f, int axis) {
  const TorusGrid& g = f.grid();
  if (axis < 0 || axis >= g.dim()) throw DomainError("axis out of range");
  GridField out(g);
  for (std::size_t i = 0; i < g.size(); ++i)
    out[i] = (f[g.neighbor(i, axis, +1)] - f[i]) / g.spacing();
  return out;
}

GridField diff_backward(const GridField& f, int axis) {
  const TorusGrid& g = f.grid();
  if (axis < 0 || axis >= g.dim()) throw DomainError("axis out of range");
  GridField out(g);
  for (std::size_t i = 0; i < g.size(); ++i)
    out[i] = (f[i] - f[g.neighbor(i, axis, -1)]) / g.spacing();
  return out;
}

GridField laplacian(const GridField& f) {
  const TorusGrid& g = f.grid();
  const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
  GridField out(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double s = 0.0;
    for (int a = 0; a < g.dim(); ++a)
      s += f[g.neighbor(i, a, +1)] - 2.0 * f[i] + f[g.neighbor(i, a, -1)];
    out[i] = s * inv_h2;
  }
  return out;
}

Vec centered_gradient(const GridField& f, std::size_t node) {
  const TorusGrid& g = f.grid();
  Vec p{};
  for (int a = 0; a < g.dim(); ++a)
    p[a] = (f[g.neighbor(node, a, +1)] - f[g.neighbor(node, a, -1)]) / (2.0 * g.spacing());
  return p;
}

double discrete_lipschitz(const GridField& f) {
  const TorusGrid& g = f.grid();
  double m = 0.0;
  for (int a = 0; a < g.dim(); ++a) m = std::max(m, diff_forward(f, a).max_abs());
  return m;
}

void write_field_csv(const std::string& path, const GridField& f) {
  FieldTable table(f.grid());
  table.set("value", f.data());
  table.write(path);
}

GridField read_field_csv(const std::string& path) {
  const FieldTable table = FieldTable::read(path);
  return GridField(table.grid(), table.column("value"));
}

}  // namespace vdlab

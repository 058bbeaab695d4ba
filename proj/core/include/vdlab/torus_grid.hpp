#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vdlab/types.hpp"

namespace vdlab {

using MultiIndex = std::array<int, kMaxDim>;

/// Uniform periodic lattice on [0, 2π)^n with N nodes per axis. Flat index
/// i0 + N*i1 (axis 0 fastest).
class TorusGrid {
 public:
  TorusGrid(int dim, int nodes_per_axis);

  int dim() const noexcept { return dim_; }
  int nodes_per_axis() const noexcept { return n_; }
  double spacing() const noexcept { return h_; }
  /// h^n, the quadrature weight of one node.
  double cell_volume() const noexcept { return dim_ == 1 ? h_ : h_ * h_; }
  std::size_t size() const noexcept { return size_; }

  MultiIndex multi_index(std::size_t flat) const noexcept;
  /// Wraps every component modulo N before flattening.
  std::size_t flat_index(MultiIndex idx) const noexcept;
  /// Neighbour `offset` steps along `axis`, periodic.
  std::size_t neighbor(std::size_t flat, int axis, int offset) const noexcept;
  Vec coords(std::size_t flat) const noexcept;
  std::size_t nearest_node(const Vec& x) const noexcept;

  friend bool operator==(const TorusGrid&, const TorusGrid&) = default;

 private:
  int dim_;
  int n_;
  double h_;
  std::size_t size_;
};

/// One finite scalar per grid node.
class GridField {
 public:
  explicit GridField(const TorusGrid& grid, double fill = 0.0);
  GridField(const TorusGrid& grid, std::vector<double> values);

  static GridField from_function(const TorusGrid& grid, const std::function<double(const Vec&)>& f);

  const TorusGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& data() noexcept { return values_; }
  const std::vector<double>& data() const noexcept { return values_; }

  double max_abs() const noexcept;
  double min() const noexcept;
  double max() const noexcept;
  double sum() const noexcept;
  double mean() const noexcept { return sum() / static_cast<double>(size()); }
  bool all_finite() const noexcept;

  GridField& operator+=(const GridField& o);
  GridField& operator-=(const GridField& o);
  GridField& operator+=(double c);
  GridField& operator*=(double c);

 private:
  TorusGrid grid_;
  std::vector<double> values_;
};

GridField operator+(GridField a, const GridField& b);
GridField operator-(GridField a, const GridField& b);
GridField operator+(GridField a, double c);
GridField operator*(double c, GridField a);

double sup_distance(const GridField& a, const GridField& b);

/// (f(x + h e_axis) - f(x)) / h, periodic.
GridField diff_forward(const GridField& f, int axis);
/// (f(x) - f(x - h e_axis)) / h, periodic.
GridField diff_backward(const GridField& f, int axis);
/// Standard (2n+1)-point periodic Laplacian. Its node sum telescopes to zero.
GridField laplacian(const GridField& f);

/// Centered gradient (D+ + D-)/2 at one node.
Vec centered_gradient(const GridField& f, std::size_t node);
/// max over nodes and axes of |D+ f|.
double discrete_lipschitz(const GridField& f);

/// Serialization with columns (i0[,i1], x0[,x1], value), lexicographic row order.
void write_field_csv(const std::string& path, const GridField& f);
GridField read_field_csv(const std::string& path);

}  // namespace vdlab

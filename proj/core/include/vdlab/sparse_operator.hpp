#pragma once

#include <span>
#include <vector>

#include <Eigen/SparseCore>

namespace vdlab {

/// Square sparse matrix over grid nodes. Immutable once built.
class SparseOperator {
 public:
  using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  using Triplet = Eigen::Triplet<double>;

  SparseOperator() = default;
  explicit SparseOperator(Matrix m);
  /// Duplicate (row, col) entries are summed.
  static SparseOperator from_triplets(std::size_t n, const std::vector<Triplet>& entries);

  std::size_t size() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  std::size_t nonzeros() const noexcept { return static_cast<std::size_t>(m_.nonZeros()); }
  double coeff(std::size_t row, std::size_t col) const;
  const Matrix& matrix() const noexcept { return m_; }

  std::vector<double> apply(std::span<const double> x) const;
  std::vector<double> apply_transpose(std::span<const double> x) const;
  std::vector<double> row_sums() const;
  std::vector<double> column_sums() const;
  /// Explicit transpose, stored as its own matrix.
  SparseOperator transpose() const;
  /// Largest off-diagonal entry; an M-matrix candidate has this <= 0.
  double max_offdiagonal() const;

 private:
  Matrix m_;
};

SparseOperator operator+(const SparseOperator& a, const SparseOperator& b);

}  // namespace vdlab

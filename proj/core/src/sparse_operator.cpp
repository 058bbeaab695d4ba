#include "vdlab/sparse_operator.hpp"

#include <algorithm>
#include <limits>

#include "vdlab/error.hpp"

namespace vdlab {

SparseOperator::SparseOperator(Matrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) throw DomainError("operator must be square");
  m_.makeCompressed();
}

SparseOperator SparseOperator::from_triplets(std::size_t n, const std::vector<Triplet>& entries) {
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.setFromTriplets(entries.begin(), entries.end());
  return SparseOperator(std::move(m));
}

double SparseOperator::coeff(std::size_t row, std::size_t col) const {
  return m_.coeff(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
}

std::vector<double> SparseOperator::apply(std::span<const double> x) const {
  if (x.size() != size()) throw DomainError("operator/vector size mismatch");
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd y = m_ * xv;
  return {y.data(), y.data() + y.size()};
}

std::vector<double> SparseOperator::apply_transpose(std::span<const double> x) const {
  if (x.size() != size()) throw DomainError("operator/vector size mismatch");
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd y = m_.transpose() * xv;
  return {y.data(), y.data() + y.size()};
}

std::vector<double> SparseOperator::row_sums() const {
  std::vector<double> s(size(), 0.0);
  for (Eigen::Index r = 0; r < m_.outerSize(); ++r)
    for (Matrix::InnerIterator it(m_, r); it; ++it) s[static_cast<std::size_t>(r)] += it.value();
  return s;
}

std::vector<double> SparseOperator::column_sums() const {
  std::vector<double> s(size(), 0.0);
  for (Eigen::Index r = 0; r < m_.outerSize(); ++r)
    for (Matrix::InnerIterator it(m_, r); it; ++it) s[static_cast<std::size_t>(it.col())] += it.value();
  return s;
}

SparseOperator SparseOperator::transpose() const {
  Matrix t = m_.transpose();
  return SparseOperator(std::move(t));
}

double SparseOperator::max_offdiagonal() const {
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < m_.outerSize(); ++r)
    for (Matrix::InnerIterator it(m_, r); it; ++it)
      if (it.col() != r) m = std::max(m, it.value());
  return m;
}

SparseOperator operator+(const SparseOperator& a, const SparseOperator& b) {
  SparseOperator::Matrix sum = a.matrix() + b.matrix();
  return SparseOperator(std::move(sum));
}

}  // namespace vdlab

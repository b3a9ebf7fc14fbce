#pragma once

#include <cstddef>
#include <vector>

#include "luq/domain.hpp"

namespace luq {

/// Dense row-major matrix for the small spectral problems used here (m <= ~50).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  Matrix transpose() const;
  Matrix operator*(const Matrix& rhs) const;
  double max_abs_diff(const Matrix& rhs) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Eigenpairs of a symmetric matrix. Eigenvalues ascend; column k of
/// `eigenvectors` is the unit eigenvector for eigenvalues[k], signed so its
/// largest-magnitude entry is positive (on ties, its first nonzero entry).
struct SpectralDecomposition {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

/// Cyclic Jacobi rotations; stops once the off-diagonal Frobenius mass drops
/// below `tolerance` (scaled by the matrix norm when that exceeds one).
SpectralDecomposition symmetric_eigen(const Matrix& a, double tolerance = 1e-12, int max_sweeps = 100);

/// Applies the sign convention of SpectralDecomposition to one column in place.
void canonicalize_sign(Matrix& vectors, std::size_t column);

/// L = I - D^{-1/2} S D^{-1/2} with D_ii the row sums of S.
/// Throws Error(zero_row_sum).
Matrix laplacian(const SimilarityMatrix& s);

}  // namespace luq

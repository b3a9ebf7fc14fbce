#include "luq/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "luq/error.hpp"

namespace luq {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
  if (cols_ != rhs.rows_) throw Error(ErrorCode::invalid_argument, "matrix shape mismatch");
  Matrix out(rows_, rhs.cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = 0; k < cols_; ++k) {
      const double a = (*this)(r, k);
      for (std::size_t c = 0; c < rhs.cols_; ++c) out(r, c) += a * rhs(k, c);
    }
  return out;
}

double Matrix::max_abs_diff(const Matrix& rhs) const {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) throw Error(ErrorCode::invalid_argument, "matrix shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) worst = std::max(worst, std::abs(data_[i] - rhs.data_[i]));
  return worst;
}

void canonicalize_sign(Matrix& vectors, std::size_t column) {
  const std::size_t n = vectors.rows();
  constexpr double kTie = 1e-12;
  double peak = 0.0;
  for (std::size_t r = 0; r < n; ++r) peak = std::max(peak, std::abs(vectors(r, column)));
  if (peak == 0.0) return;
  std::size_t at_peak = 0;
  std::size_t peak_row = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (std::abs(std::abs(vectors(r, column)) - peak) <= kTie) {
      if (at_peak++ == 0) peak_row = r;
    }
  }
  std::size_t pivot = peak_row;
  if (at_peak > 1) {
    for (std::size_t r = 0; r < n; ++r) {
      if (std::abs(vectors(r, column)) > kTie) {
        pivot = r;
        break;
      }
    }
  }
  if (vectors(pivot, column) < 0.0)
    for (std::size_t r = 0; r < n; ++r) vectors(r, column) = -vectors(r, column);
}

SpectralDecomposition symmetric_eigen(const Matrix& input, double tolerance, int max_sweeps) {
  const std::size_t n = input.rows();
  if (input.cols() != n) throw Error(ErrorCode::invalid_argument, "eigensolver needs a square matrix");
  Matrix a = input;
  Matrix v = Matrix::identity(n);

  double frob = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) frob += a(i, j) * a(i, j);
  const double threshold = tolerance * std::max(1.0, std::sqrt(frob));

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
    if (std::sqrt(off) < threshold) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 1.0 / (2.0 * theta);
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  SpectralDecomposition out;
  out.eigenvalues.reserve(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues.push_back(a(order[k], order[k]));
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = v(r, order[k]);
    canonicalize_sign(out.eigenvectors, k);
  }
  return out;
}

Matrix laplacian(const SimilarityMatrix& s) {
  const std::size_t m = s.size();
  std::vector<double> inv_sqrt_degree(m);
  for (std::size_t i = 0; i < m; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < m; ++j) d += s(i, j);
    if (!(d > 0.0)) throw Error(ErrorCode::zero_row_sum, "row " + std::to_string(i) + " of S sums to zero");
    inv_sqrt_degree[i] = 1.0 / std::sqrt(d);
  }
  Matrix l(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      l(i, j) = (i == j ? 1.0 : 0.0) - s(i, j) * inv_sqrt_degree[i] * inv_sqrt_degree[j];
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const double avg = 0.5 * (l(i, j) + l(j, i));
      l(i, j) = avg;
      l(j, i) = avg;
    }
  return l;
}

}  // namespace luq

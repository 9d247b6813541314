#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sncpd/errors.hpp"

namespace sncpd {

// Dense row-major matrix of doubles. Sized for the model and statistics in
// this project (hundreds of rows), not for general numerics.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Mat from_rows(const std::vector<std::vector<double>>& rows);

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  Mat transposed() const;
  double frobenius_norm() const;
  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Mat matmul(const Mat& a, const Mat& b);
std::vector<double> matvec(const Mat& a, std::span<const double> x);
// y = A^T x without forming the transpose.
std::vector<double> matvec_t(const Mat& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
// Euclidean distance between two vectors of equal length.
double dist2(std::span<const double> a, std::span<const double> b);

// Lower-triangular Cholesky factor of an SPD matrix. Throws
// DecompositionError when a pivot is not positive.
Mat cholesky(const Mat& spd);
// log det(A) given its Cholesky factor L (A = L L^T).
double cholesky_logdet(const Mat& l);
// Solves A x = b given the Cholesky factor of A.
std::vector<double> cholesky_solve(const Mat& l, std::span<const double> b);

// General square solve via partially pivoted LU. Throws DecompositionError
// on (numerically) singular input.
std::vector<double> lu_solve(Mat a, std::vector<double> b);

}  // namespace sncpd

#pragma once

// Row-major dense storage used across the simulator. Heavy decompositions go
// through Eigen maps; the per-iteration arithmetic goes through simd::.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace byzsim {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  Matrix transpose() const;

  bool operator==(const Matrix&) const = default;

  using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const EigenRowMajor> as_eigen() const { return {data_.data(), Eigen::Index(rows_), Eigen::Index(cols_)}; }
  Eigen::Map<EigenRowMajor> as_eigen() { return {data_.data(), Eigen::Index(rows_), Eigen::Index(cols_)}; }
  static Matrix from_eigen(const Eigen::MatrixXd& m);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// a * b, skipping zero entries of a (mixing matrices are sparse-ish after pruning).
Matrix multiply(const Matrix& a, const Matrix& b);

// a^k by repeated squaring; k = 0 gives the identity.
Matrix power(const Matrix& a, std::size_t k);

// Largest singular value.
double spectral_norm(const Matrix& a);

// Principal sub-matrix on the given (sorted) index set.
Matrix submatrix(const Matrix& a, std::span<const std::size_t> idx);

Vector mean_of(std::span<const Vector> vs);
double norm(std::span<const double> v);

}  // namespace byzsim

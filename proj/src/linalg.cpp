#include "byzsim/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "byzsim/simd.hpp"

namespace byzsim {

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

Matrix Matrix::from_eigen(const Eigen::MatrixXd& m) {
  Matrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  out.as_eigen() = m;
  return out;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("multiply: dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double w = a(i, k);
      if (w != 0.0) simd::axpy(w, b.row(k), dst);
    }
  }
  return out;
}

Matrix power(const Matrix& a, std::size_t k) {
  if (a.rows() != a.cols()) throw std::invalid_argument("power: matrix not square");
  Matrix result = Matrix::identity(a.rows());
  Matrix base = a;
  while (k > 0) {
    if (k & 1U) result = multiply(result, base);
    k >>= 1U;
    if (k > 0) base = multiply(base, base);
  }
  return result;
}

double spectral_norm(const Matrix& a) {
  if (a.empty()) return 0.0;
  const Eigen::MatrixXd gram = a.as_eigen().transpose() * a.as_eigen();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

Matrix submatrix(const Matrix& a, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < idx.size(); ++c) out(r, c) = a(idx[r], idx[c]);
  return out;
}

Vector mean_of(std::span<const Vector> vs) {
  if (vs.empty()) throw std::invalid_argument("mean_of: empty input");
  Vector m(vs.front().size(), 0.0);
  for (const auto& v : vs) simd::axpy(1.0, v, m);
  simd::scale(1.0 / static_cast<double>(vs.size()), m);
  return m;
}

double norm(std::span<const double> v) { return std::sqrt(simd::squared_norm(v)); }

}  // namespace byzsim

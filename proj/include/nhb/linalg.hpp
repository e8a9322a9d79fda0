#pragma once

// Small dense linear algebra over any scalar type with + - * / (double and
// the Dual family).  Everything here is at most 2n x 2n with n <= 10, so the
// only factorization is LU with partial pivoting; pivots are chosen on the
// plain value slot.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nhb/dual.hpp"
#include "nhb/errors.hpp"

namespace nhb {

template <class S>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, S(0.0)) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = S(1.0);
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  S& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const S& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::vector<S> row(std::size_t i) const {
    return {data_.begin() + static_cast<std::ptrdiff_t>(i * cols_),
            data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols_)};
  }
  std::vector<S> col(std::size_t j) const {
    std::vector<S> out;
    out.reserve(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out.push_back((*this)(i, j));
    return out;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<S> data_;
};

template <class S>
Matrix<S> operator*(const Matrix<S>& a, const Matrix<S>& b) {
  if (a.cols() != b.rows()) throw std::logic_error("matrix product shape mismatch");
  Matrix<S> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const S& aik = a(i, k);
      if (value_of(aik) == 0.0 && dual_depth<S> == 0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

template <class S>
Matrix<S> operator-(const Matrix<S>& a, const Matrix<S>& b) {
  Matrix<S> c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) - b(i, j);
  return c;
}

template <class S>
std::vector<S> operator*(const Matrix<S>& a, std::span<const S> x) {
  if (a.cols() != x.size()) throw std::logic_error("matrix-vector shape mismatch");
  std::vector<S> y(a.rows(), S(0.0));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
  return y;
}

template <class S>
std::vector<S> operator*(const Matrix<S>& a, const std::vector<S>& x) {
  return a * std::span<const S>(x);
}

template <class S>
S dot(std::span<const S> a, std::span<const S> b) {
  S s(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <class S>
S dot(const std::vector<S>& a, const std::vector<S>& b) {
  return dot(std::span<const S>(a), std::span<const S>(b));
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs(const Matrix<double>& m) {
  double r = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) r = std::max(r, std::abs(m(i, j)));
  return r;
}

/// LU factorization with partial pivoting, PA = LU.
template <class S>
class Lu {
 public:
  explicit Lu(Matrix<S> a) : lu_(std::move(a)), perm_(lu_.rows()) {
    const std::size_t n = lu_.rows();
    if (lu_.cols() != n) throw std::logic_error("LU of a non-square matrix");
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(value_of(lu_(i, j))));
    min_pivot_ = n == 0 ? 1.0 : std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      double best = std::abs(value_of(lu_(k, k)));
      for (std::size_t i = k + 1; i < n; ++i) {
        double v = std::abs(value_of(lu_(i, k)));
        if (v > best) {
          best = v;
          piv = i;
        }
      }
      min_pivot_ = std::min(min_pivot_, scale > 0.0 ? best / scale : 0.0);
      if (best == 0.0) {
        singular_ = true;
        continue;
      }
      if (piv != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
        std::swap(perm_[k], perm_[piv]);
      }
      for (std::size_t i = k + 1; i < n; ++i) {
        S f = lu_(i, k) / lu_(k, k);
        lu_(i, k) = f;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
      }
    }
  }

  /// Smallest |pivot| relative to the largest |entry| of the input.
  double min_relative_pivot() const noexcept { return min_pivot_; }
  bool singular() const noexcept { return singular_; }

  std::vector<S> solve(std::span<const S> b) const {
    if (singular_) throw SingularMatrix("solve with a singular matrix");
    const std::size_t n = lu_.rows();
    std::vector<S> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
      x[i] = x[i] / lu_(i, i);
    }
    return x;
  }
  std::vector<S> solve(const std::vector<S>& b) const { return solve(std::span<const S>(b)); }

  /// Solves A X = B column by column.
  Matrix<S> solve(const Matrix<S>& b) const {
    Matrix<S> x(b.rows(), b.cols());
    for (std::size_t j = 0; j < b.cols(); ++j) {
      auto c = solve(b.col(j));
      for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = c[i];
    }
    return x;
  }

  Matrix<S> inverse() const { return solve(Matrix<S>::identity(lu_.rows())); }

 private:
  Matrix<S> lu_;
  std::vector<std::size_t> perm_;
  double min_pivot_ = 1.0;
  bool singular_ = false;
};

/// Cholesky test on plain values: true iff the symmetric matrix is positive definite.
inline bool is_positive_definite(const Matrix<double>& a) {
  const std::size_t n = a.rows();
  Matrix<double> l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) return false;
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return true;
}

template <class S>
Matrix<double> values_of(const Matrix<S>& m) {
  Matrix<double> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = value_of(m(i, j));
  return out;
}

template <class S>
std::vector<double> values_of(std::span<const S> v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(value_of(x));
  return out;
}

template <class S>
std::vector<double> values_of(const std::vector<S>& v) {
  return values_of(std::span<const S>(v));
}

}  // namespace nhb

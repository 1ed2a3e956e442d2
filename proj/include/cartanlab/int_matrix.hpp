#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "cartanlab/errors.hpp"
#include "cartanlab/torus.hpp"

namespace cartanlab {

namespace detail {

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw LabError(ErrorCode::Overflow, "integer matrix addition");
  return r;
}

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw LabError(ErrorCode::Overflow, "integer matrix product");
  return r;
}

inline std::int64_t narrow128(__int128 v) {
  if (v > INT64_MAX || v < INT64_MIN) throw LabError(ErrorCode::Overflow, "integer determinant");
  return static_cast<std::int64_t>(v);
}

}  // namespace detail

/// Square integer matrix with overflow-checked arithmetic.
class IntMatrix {
 public:
  IntMatrix() = default;
  explicit IntMatrix(int n) : n_(n), a_(static_cast<std::size_t>(n) * n, 0) {
    require(n > 0, ErrorCode::InvalidInput, "matrix dimension must be positive");
  }

  IntMatrix(std::initializer_list<std::initializer_list<std::int64_t>> rows)
      : IntMatrix(static_cast<int>(rows.size())) {
    int i = 0;
    for (const auto& row : rows) {
      require(static_cast<int>(row.size()) == n_, ErrorCode::DimensionMismatch, "matrix is not square");
      int j = 0;
      for (auto v : row) (*this)(i, j++) = v;
      ++i;
    }
  }

  static IntMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows) {
    IntMatrix m(static_cast<int>(rows.size()));
    for (int i = 0; i < m.n_; ++i) {
      require(static_cast<int>(rows[i].size()) == m.n_, ErrorCode::DimensionMismatch,
              "matrix is not square");
      for (int j = 0; j < m.n_; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  static IntMatrix identity(int n) {
    IntMatrix m(n);
    for (int i = 0; i < n; ++i) m(i, i) = 1;
    return m;
  }

  int size() const { return n_; }
  std::int64_t& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  std::int64_t operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }

  std::vector<std::vector<std::int64_t>> rows() const {
    std::vector<std::vector<std::int64_t>> out(n_, std::vector<std::int64_t>(n_));
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) out[i][j] = (*this)(i, j);
    return out;
  }

  friend bool operator==(const IntMatrix& a, const IntMatrix& b) { return a.n_ == b.n_ && a.a_ == b.a_; }

  friend IntMatrix operator*(const IntMatrix& a, const IntMatrix& b) {
    require(a.n_ == b.n_, ErrorCode::DimensionMismatch, "matrix product dimensions");
    IntMatrix c(a.n_);
    for (int i = 0; i < a.n_; ++i)
      for (int j = 0; j < a.n_; ++j) {
        std::int64_t s = 0;
        for (int k = 0; k < a.n_; ++k) s = detail::checked_add(s, detail::checked_mul(a(i, k), b(k, j)));
        c(i, j) = s;
      }
    return c;
  }

  friend IntMatrix operator+(const IntMatrix& a, const IntMatrix& b) {
    require(a.n_ == b.n_, ErrorCode::DimensionMismatch, "matrix sum dimensions");
    IntMatrix c(a.n_);
    for (std::size_t i = 0; i < a.a_.size(); ++i) c.a_[i] = detail::checked_add(a.a_[i], b.a_[i]);
    return c;
  }

  friend IntMatrix operator-(const IntMatrix& a, const IntMatrix& b) {
    IntMatrix nb = b;
    for (auto& v : nb.a_) v = detail::checked_mul(v, -1);
    return a + nb;
  }

  IntMatrix scaled(std::int64_t s) const {
    IntMatrix c = *this;
    for (auto& v : c.a_) v = detail::checked_mul(v, s);
    return c;
  }

  std::int64_t trace() const {
    std::int64_t t = 0;
    for (int i = 0; i < n_; ++i) t = detail::checked_add(t, (*this)(i, i));
    return t;
  }

  /// Exact determinant by fraction-free (Bareiss) elimination.
  std::int64_t determinant() const {
    std::vector<__int128> m(a_.begin(), a_.end());
    auto at = [&](int i, int j) -> __int128& { return m[static_cast<std::size_t>(i) * n_ + j]; };
    __int128 prev = 1;
    int sign = 1;
    for (int k = 0; k < n_ - 1; ++k) {
      if (at(k, k) == 0) {
        int p = k + 1;
        while (p < n_ && at(p, k) == 0) ++p;
        if (p == n_) return 0;
        for (int j = 0; j < n_; ++j) std::swap(at(k, j), at(p, j));
        sign = -sign;
      }
      for (int i = k + 1; i < n_; ++i)
        for (int j = k + 1; j < n_; ++j) at(i, j) = (at(i, j) * at(k, k) - at(i, k) * at(k, j)) / prev;
      prev = at(k, k);
    }
    return detail::narrow128(sign * at(n_ - 1, n_ - 1));
  }

  IntMatrix minor_matrix(int row, int col) const {
    IntMatrix m(n_ - 1);
    for (int i = 0, r = 0; i < n_; ++i) {
      if (i == row) continue;
      for (int j = 0, c = 0; j < n_; ++j) {
        if (j == col) continue;
        m(r, c++) = (*this)(i, j);
      }
      ++r;
    }
    return m;
  }

  /// Inverse of a unimodular matrix (|det| = 1) via the adjugate.
  IntMatrix unimodular_inverse() const {
    std::int64_t det = determinant();
    require(det == 1 || det == -1, ErrorCode::InvalidInput, "matrix is not unimodular");
    if (n_ == 1) return IntMatrix{{det}};
    IntMatrix inv(n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        std::int64_t cof = minor_matrix(j, i).determinant();
        if ((i + j) % 2) cof = -cof;
        inv(i, j) = cof * det;
      }
    return inv;
  }

  /// A^e for any integer e; negative powers need |det| = 1.
  IntMatrix power(std::int64_t e) const {
    IntMatrix base = e < 0 ? unimodular_inverse() : *this;
    std::uint64_t k = e < 0 ? static_cast<std::uint64_t>(-e) : static_cast<std::uint64_t>(e);
    IntMatrix result = identity(n_);
    while (k) {
      if (k & 1) result = result * base;
      k >>= 1;
      if (k) base = base * base;
    }
    return result;
  }

  template <int Dim>
  Mat<Dim> to_real() const {
    Mat<Dim> m(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) m(i, j) = static_cast<double>((*this)(i, j));
    return m;
  }

  Eigen::MatrixXd to_dynamic() const { return to_real<Eigen::Dynamic>(); }

 private:
  int n_ = 0;
  std::vector<std::int64_t> a_;
};

/// A torus point with rational coordinates num[i]/den, 0 <= num[i] < den.
struct RationalPoint {
  std::vector<std::int64_t> num;
  std::int64_t den = 1;
};

/// Automorphism of the torus given by a unimodular integer matrix.
class ToralAutomorphism {
 public:
  ToralAutomorphism() = default;
  explicit ToralAutomorphism(IntMatrix m) : m_(std::move(m)), det_(m_.determinant()) {
    require(det_ == 1 || det_ == -1, ErrorCode::InvalidInput,
            "toral automorphism needs |det| = 1, got det = " + std::to_string(det_));
  }

  const IntMatrix& matrix() const { return m_; }
  std::int64_t det() const { return det_; }
  int dim() const { return m_.size(); }

  ToralAutomorphism inverse() const { return ToralAutomorphism(m_.unimodular_inverse()); }

  friend ToralAutomorphism operator*(const ToralAutomorphism& a, const ToralAutomorphism& b) {
    return ToralAutomorphism(a.m_ * b.m_);
  }

  template <int Dim>
  TorusPoint<Dim> apply(const TorusPoint<Dim>& x) const {
    require(dim() == x.coords().size(), ErrorCode::DimensionMismatch, "automorphism/point dimension");
    Vec<Dim> y = Vec<Dim>::Zero(dim());
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j < dim(); ++j) y[i] += static_cast<double>(m_(i, j)) * x[j];
    return TorusPoint<Dim>::reduce(y);
  }

  /// Exact image of a rational point; denominators up to 2^32 keep every
  /// intermediate inside 128-bit arithmetic.
  RationalPoint apply_exact(const RationalPoint& x) const {
    require(static_cast<int>(x.num.size()) == dim(), ErrorCode::DimensionMismatch, "rational point dimension");
    require(x.den > 0 && x.den <= (std::int64_t{1} << 32), ErrorCode::InvalidInput,
            "denominator must lie in [1, 2^32]");
    RationalPoint y{std::vector<std::int64_t>(dim()), x.den};
    for (int i = 0; i < dim(); ++i) {
      __int128 s = 0;
      for (int j = 0; j < dim(); ++j) s += static_cast<__int128>(m_(i, j)) * x.num[j];
      __int128 r = s % x.den;
      if (r < 0) r += x.den;
      y.num[i] = static_cast<std::int64_t>(r);
    }
    return y;
  }

 private:
  IntMatrix m_;
  std::int64_t det_ = 0;
};

}  // namespace cartanlab

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "cartanlab/int_matrix.hpp"

namespace cartanlab {

/// Polynomial coefficients, lowest degree first.
using Poly = std::vector<double>;

/// Characteristic polynomial det(xI - A) by Faddeev-LeVerrier; every division
/// is exact over the integers. Coefficients lowest degree first, monic.
inline std::vector<std::int64_t> characteristic_polynomial(const IntMatrix& a) {
  const int n = a.size();
  std::vector<std::int64_t> c(n + 1, 0);
  c[n] = 1;
  IntMatrix m(n);
  for (int k = 1; k <= n; ++k) {
    m = a * m + IntMatrix::identity(n).scaled(c[n - k + 1]);
    std::int64_t t = (a * m).trace();
    require(t % k == 0, ErrorCode::Overflow, "non-integral Faddeev-LeVerrier step");
    c[n - k] = -t / k;
  }
  return c;
}

inline double poly_eval(const Poly& p, double x) {
  double v = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) v = v * x + *it;
  return v;
}

/// Sum of |c_i| |x|^i, the natural scale for judging a residual p(x).
inline double poly_scale(const Poly& p, double x) {
  double v = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) v = v * std::abs(x) + std::abs(*it);
  return v;
}

inline Poly poly_derivative(const Poly& p) {
  Poly d(p.size() > 1 ? p.size() - 1 : 1, 0.0);
  for (std::size_t i = 1; i < p.size(); ++i) d[i - 1] = p[i] * static_cast<double>(i);
  return d;
}

namespace detail {

inline double bisect_root(const Poly& p, double lo, double hi) {
  double flo = poly_eval(p, lo);
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    double fm = poly_eval(p, mid);
    if (fm == 0.0) return mid;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Real roots of p when they are all real and pairwise distinct, ascending.
/// Roots of p' interlace those of p (Rolle), so each gap between consecutive
/// critical points must carry a strict sign change; a missing one means a
/// complex pair or a repeated root and yields nullopt. Brackets are refined
/// by bisection and polished with Newton steps; a root is accepted only if
/// |p(r)| <= tol * sum |c_i||r|^i.
inline std::optional<std::vector<double>> distinct_real_roots(Poly p, double tol = 1e-12) {
  while (p.size() > 1 && p.back() == 0.0) p.pop_back();
  const int n = static_cast<int>(p.size()) - 1;
  if (n < 1) return std::nullopt;
  if (n == 1) return std::vector<double>{-p[0] / p[1]};

  auto crit = distinct_real_roots(poly_derivative(p), tol);
  if (!crit) return std::nullopt;

  double bound = 1.0;
  for (int i = 0; i < n; ++i) bound = std::max(bound, 1.0 + std::abs(p[i] / p[n]));
  std::vector<double> edges;
  edges.push_back(-bound);
  edges.insert(edges.end(), crit->begin(), crit->end());
  edges.push_back(bound);

  Poly dp = poly_derivative(p);
  std::vector<double> roots;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    double a = edges[i], b = edges[i + 1];
    double fa = poly_eval(p, a), fb = poly_eval(p, b);
    if (!(fa < 0 && fb > 0) && !(fa > 0 && fb < 0)) return std::nullopt;
    double r = detail::bisect_root(p, a, b);
    for (int it = 0; it < 3; ++it) {
      double d = poly_eval(dp, r);
      if (d == 0.0) break;
      double next = r - poly_eval(p, r) / d;
      if (!(next > a && next < b)) break;
      r = next;
    }
    if (std::abs(poly_eval(p, r)) > tol * poly_scale(p, r)) return std::nullopt;
    roots.push_back(r);
  }
  return roots;
}

/// All complex roots by Durand-Kerner iteration; used only for the
/// hyperbolicity flag of matrices outside the real-spectrum setting.
inline std::vector<std::complex<double>> complex_roots(Poly p) {
  while (p.size() > 1 && p.back() == 0.0) p.pop_back();
  const int n = static_cast<int>(p.size()) - 1;
  std::vector<std::complex<double>> z(n);
  if (n < 1) return z;
  const std::complex<double> seed(0.4, 0.9);
  for (int i = 0; i < n; ++i) z[i] = std::pow(seed, i);
  auto eval = [&](std::complex<double> x) {
    std::complex<double> v = 0.0;
    for (auto it = p.rbegin(); it != p.rend(); ++it) v = v * x + *it;
    return v / p[n];
  };
  for (int it = 0; it < 2000; ++it) {
    double change = 0.0;
    for (int i = 0; i < n; ++i) {
      std::complex<double> den = 1.0;
      for (int j = 0; j < n; ++j)
        if (j != i) den *= z[i] - z[j];
      std::complex<double> step = eval(z[i]) / den;
      z[i] -= step;
      change = std::max(change, std::abs(step));
    }
    if (change < 1e-15) break;
  }
  return z;
}

/// True when no eigenvalue of the integer matrix lies within `margin` of the
/// unit circle.
inline bool is_hyperbolic(const IntMatrix& a, double margin = 1e-9) {
  auto c = characteristic_polynomial(a);
  Poly p(c.begin(), c.end());
  for (auto z : complex_roots(p))
    if (std::abs(std::abs(z) - 1.0) < margin) return false;
  return true;
}

}  // namespace cartanlab

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cartanlab/torus.hpp"

namespace cartanlab {

enum class Interpolation : std::uint8_t { Linear = 0, Cubic = 1 };

inline std::string to_string(Interpolation i) { return i == Interpolation::Linear ? "linear" : "cubic"; }

inline Interpolation interpolation_from_string(const std::string& s) {
  if (s == "linear") return Interpolation::Linear;
  if (s == "cubic") return Interpolation::Cubic;
  throw LabError(ErrorCode::Config, "interpolation must be 'linear' or 'cubic', got '" + s + "'");
}

/// Regular N^d grid on the torus holding a Vec<Dim> per node, stored row-major
/// (last axis fastest) with the components of each node contiguous.
/// Sampling is periodic tensor-product interpolation: 2-point linear or
/// 4-point cubic Lagrange per axis.
template <int Dim>
class VectorGridField {
 public:
  VectorGridField() = default;
  VectorGridField(int n, Interpolation interp) : n_(n), interp_(interp) {
    require(n >= 4, ErrorCode::InvalidInput, "grid needs at least 4 nodes per axis");
    std::size_t total = 1;
    for (int i = 0; i < Dim; ++i) total *= static_cast<std::size_t>(n);
    nodes_ = total;
    data_.assign(total * Dim, 0.0);
  }

  int resolution() const { return n_; }
  std::size_t node_count() const { return nodes_; }
  Interpolation interpolation() const { return interp_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Vec<Dim> node_point(std::size_t idx) const {
    Vec<Dim> x;
    for (int a = Dim - 1; a >= 0; --a) {
      x[a] = static_cast<double>(idx % n_) / n_;
      idx /= n_;
    }
    return x;
  }

  Vec<Dim> node(std::size_t idx) const { return Eigen::Map<const Vec<Dim>>(&data_[idx * Dim]); }
  void set_node(std::size_t idx, const Vec<Dim>& v) { Eigen::Map<Vec<Dim>> m(&data_[idx * Dim]); m = v; }

  /// Interpolated value at any real x (coordinates taken mod 1).
  Vec<Dim> sample(const Vec<Dim>& x) const {
    return interp_ == Interpolation::Cubic ? sample_impl<4>(x) : sample_impl<2>(x);
  }

  /// Derivative of the interpolant by central differences.
  Mat<Dim> derivative(const Vec<Dim>& x, double step = 1e-5) const {
    Mat<Dim> d;
    for (int a = 0; a < Dim; ++a) {
      Vec<Dim> e = Vec<Dim>::Zero();
      e[a] = step;
      d.col(a) = (sample(x + e) - sample(x - e)) / (2.0 * step);
    }
    return d;
  }

  double sup_norm() const {
    double m = 0.0;
    for (std::size_t i = 0; i < nodes_; ++i) m = std::max(m, node(i).norm());
    return m;
  }

 private:
  template <int P>
  Vec<Dim> sample_impl(const Vec<Dim>& x) const {
    std::array<std::array<std::size_t, P>, Dim> idx;
    std::array<std::array<double, P>, Dim> w;
    for (int a = 0; a < Dim; ++a) {
      double g = frac(x[a]) * n_;
      double fl = std::floor(g);
      double t = g - fl;
      long base = static_cast<long>(fl);
      if constexpr (P == 2) {
        w[a] = {1.0 - t, t};
        for (int q = 0; q < 2; ++q) idx[a][q] = static_cast<std::size_t>((base + q) % n_);
      } else {
        double tm1 = t - 1.0, tm2 = t - 2.0, tp1 = t + 1.0;
        w[a] = {-t * tm1 * tm2 / 6.0, tp1 * tm1 * tm2 / 2.0, -tp1 * t * tm2 / 2.0, tp1 * t * tm1 / 6.0};
        for (int q = 0; q < 4; ++q) idx[a][q] = static_cast<std::size_t>((base - 1 + q + n_) % n_);
      }
    }
    Vec<Dim> acc = Vec<Dim>::Zero();
    accumulate<P, 0>(idx, w, 0, 1.0, acc);
    return acc;
  }

  template <int P, int Axis>
  void accumulate(const std::array<std::array<std::size_t, P>, Dim>& idx, const std::array<std::array<double, P>, Dim>& w,
                  std::size_t offset, double weight, Vec<Dim>& acc) const {
    for (int q = 0; q < P; ++q) {
      std::size_t o = offset * n_ + idx[Axis][q];
      double wq = weight * w[Axis][q];
      if constexpr (Axis + 1 == Dim) {
        acc += wq * Eigen::Map<const Vec<Dim>>(&data_[o * Dim]);
      } else {
        accumulate<P, Axis + 1>(idx, w, o, wq, acc);
      }
    }
  }

  int n_ = 0;
  Interpolation interp_ = Interpolation::Cubic;
  std::size_t nodes_ = 0;
  std::vector<double> data_;
};

}  // namespace cartanlab

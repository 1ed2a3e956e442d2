#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cartanlab/errors.hpp"

namespace cartanlab {

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

/// Fractional part in [0,1). Guards the x - floor(x) == 1 rounding case for
/// tiny negative inputs.
inline double frac(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

/// Nearest-image representative of a torus displacement, in [-1/2, 1/2).
inline double wrap_half(double x) { return x - std::floor(x + 0.5); }

template <int Dim>
Vec<Dim> reduce_lift(const Vec<Dim>& lift) {
  Vec<Dim> out = lift;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = frac(lift[i]);
  return out;
}

template <int Dim>
Vec<Dim> wrap_displacement(const Vec<Dim>& d) {
  Vec<Dim> out = d;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = wrap_half(d[i]);
  return out;
}

/// Euclidean distance on the flat torus R^d / Z^d.
template <int Dim>
double torus_distance(const Vec<Dim>& a, const Vec<Dim>& b) {
  return wrap_displacement<Dim>(a - b).norm();
}

/// A point of the (k+1)-torus; coordinates always lie in [0,1).
template <int Dim>
class TorusPoint {
 public:
  TorusPoint() : coords_(Vec<Dim>::Zero()) {}

  /// Reduces an arbitrary lift. Non-finite entries are rejected.
  static TorusPoint reduce(const Vec<Dim>& lift) {
    for (Eigen::Index i = 0; i < lift.size(); ++i)
      require(std::isfinite(lift[i]), ErrorCode::InvalidInput, "non-finite torus coordinate");
    TorusPoint p;
    p.coords_ = reduce_lift<Dim>(lift);
    return p;
  }

  static TorusPoint reduce(std::span<const double> lift) {
    require(lift.size() == static_cast<std::size_t>(Dim), ErrorCode::DimensionMismatch,
            "expected " + std::to_string(Dim) + " coordinates");
    Vec<Dim> v;
    for (int i = 0; i < Dim; ++i) v[i] = lift[i];
    return reduce(v);
  }

  const Vec<Dim>& coords() const { return coords_; }
  double operator[](int i) const { return coords_[i]; }
  static constexpr int dim() { return Dim; }

  friend bool operator==(const TorusPoint& a, const TorusPoint& b) { return a.coords_ == b.coords_; }

 private:
  Vec<Dim> coords_;
};

/// Runtime-sized reduction, used where the dimension is data (JSON input).
inline std::vector<double> reduce(std::span<const double> lift) {
  std::vector<double> out(lift.size());
  for (std::size_t i = 0; i < lift.size(); ++i) {
    require(std::isfinite(lift[i]), ErrorCode::InvalidInput, "non-finite torus coordinate");
    out[i] = frac(lift[i]);
  }
  return out;
}

}  // namespace cartanlab

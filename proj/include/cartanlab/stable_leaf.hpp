#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "cartanlab/perturbed_action.hpp"

namespace cartanlab {

/// Forward orbit of f = alpha(m) from x with the stable line field along it.
/// points[j] = f^j x (reduced), directions[j] the unit stable vector at
/// points[j] for j <= length, and expansion[j] = ||Df(points[j]) directions[j]||
/// for j < length. Directions are chained: Df directions[j] is a positive
/// multiple of directions[j+1].
template <int Dim>
struct OrbitFrame {
  std::vector<Vec<Dim>> points;
  std::vector<Vec<Dim>> directions;
  std::vector<double> expansion;
  int length = 0;
};

/// Angle between two lines, robust for tiny angles.
template <int Dim>
double line_angle(const Vec<Dim>& a, const Vec<Dim>& b) {
  Vec<Dim> an = a.normalized(), bn = b.normalized();
  double s = an.dot(bn) >= 0 ? 1.0 : -1.0;
  double chord = (an - s * bn).norm();
  return 2.0 * std::asin(std::min(1.0, chord / 2.0));
}

/// Stable line field of the element alpha(m), which must have exactly one
/// contracting direction. Directions are oriented to have nonnegative inner
/// product with the stable eigenvector of the linear part.
template <int Dim>
class StableLineField {
 public:
  struct Certified {
    Vec<Dim> direction;
    double angle_change = 0.0;
  };

  StableLineField(const PerturbedAction<Dim>& alpha, std::vector<std::int64_t> m, int pullback = 60)
      : alpha_(&alpha), m_(std::move(m)), word_(alpha.word(m_)), pullback_(pullback) {
    require(pullback_ >= 6, ErrorCode::InvalidInput, "stable direction needs at least 6 pull-back steps");
    IntMatrix lin = IntMatrix::identity(Dim);
    for (const auto& l : word_) {
      const ToralAutomorphism& g = alpha.linear_generator(l.generator);
      lin = (l.sign > 0 ? g.matrix() : g.inverse().matrix()) * lin;
    }
    require(!word_.empty(), ErrorCode::InvalidInput, "the identity element has no stable direction");
    auto es = eigenstructure(ToralAutomorphism(lin));
    int contracting = 0;
    for (double v : es.values) contracting += std::abs(v) < 1.0;
    require(contracting == 1, ErrorCode::InvalidInput,
            "alpha(m) must have exactly one contracting direction, found " + std::to_string(contracting));
    linear_eigenvalue_ = es.values.back();
    for (int i = 0; i < Dim; ++i) reference_[i] = es.vectors(i, Dim - 1);
  }

  const PerturbedAction<Dim>& action() const { return *alpha_; }
  const std::vector<std::int64_t>& element() const { return m_; }
  const std::vector<Letter>& word() const { return word_; }
  int pullback() const { return pullback_; }
  /// Stable eigenvector and eigenvalue of the linear part alpha0(m).
  const Vec<Dim>& linear_direction() const { return reference_; }
  double linear_eigenvalue() const { return linear_eigenvalue_; }

  typename PerturbedAction<Dim>::Step step(const Vec<Dim>& x) const { return alpha_->eval_with_jacobian(word_, x); }

  /// Stable directions along the orbit of x, valid for j <= length.
  OrbitFrame<Dim> frame(const Vec<Dim>& x, int length) const {
    std::vector<Vec<Dim>> pts{x};
    std::vector<Mat<Dim>> jac;
    const int total = length + pullback_;
    pts.reserve(total + 1);
    jac.reserve(total);
    for (int j = 0; j < total; ++j) {
      auto s = step(pts.back());
      jac.push_back(s.jacobian);
      pts.push_back(s.point);
    }
    return pull_back(std::move(pts), jac, length);
  }

  /// Same as frame() for an orbit the caller already computed.
  OrbitFrame<Dim> pull_back(std::vector<Vec<Dim>> pts, const std::vector<Mat<Dim>>& jac, int length) const {
    const int total = static_cast<int>(jac.size());
    require(total >= length + 1, ErrorCode::InvalidInput, "orbit too short for the requested frame");
    OrbitFrame<Dim> f;
    f.length = length;
    f.directions.assign(length + 1, Vec<Dim>::Zero());
    f.expansion.assign(length, 0.0);
    Vec<Dim> w = generic_vector();
    for (int j = total - 1; j >= 0; --j) {
      Vec<Dim> back = jac[j].partialPivLu().solve(w);
      double n = back.norm();
      require(std::isfinite(n) && n > 0, ErrorCode::NoConvergence, "stable pull-back degenerated");
      if (j < length) f.expansion[j] = 1.0 / n;
      w = back / n;
      if (j <= length) f.directions[j] = w;
    }
    if (w.dot(reference_) < 0) {
      for (auto& d : f.directions) d = -d;
    }
    pts.resize(length + 1);
    f.points = std::move(pts);
    return f;
  }

  /// Unit stable vector at x (no certification).
  Vec<Dim> direction(const Vec<Dim>& x) const { return frame(x, 0).directions[0]; }

  /// Unit stable vector at x, certified by pull-backs started at
  /// N, N-1, ..., N-4 agreeing in angle within `tol`.
  Certified certified_direction(const Vec<Dim>& x, double tol = 1e-10) const {
    std::vector<Vec<Dim>> pts{x};
    std::vector<Mat<Dim>> jac;
    for (int j = 0; j < pullback_; ++j) {
      auto s = step(pts.back());
      jac.push_back(s.jacobian);
      pts.push_back(s.point);
    }
    Certified c;
    c.direction = pull_back(pts, jac, 0).directions[0];
    for (int drop = 1; drop <= 4; ++drop) {
      std::vector<Mat<Dim>> shorter(jac.begin(), jac.end() - drop);
      Vec<Dim> v = pull_back(pts, shorter, 0).directions[0];
      c.angle_change = std::max(c.angle_change, line_angle<Dim>(v, c.direction));
    }
    require(c.angle_change < tol, ErrorCode::NoConvergence,
            "stable direction not stabilized: angle change " + std::to_string(c.angle_change));
    return c;
  }

  /// ||Df(x) v(x)|| for the unit stable vector v(x).
  double expansion(const Vec<Dim>& x) const { return frame(x, 1).expansion[0]; }

 private:
  static Vec<Dim> generic_vector() {
    Vec<Dim> g;
    for (int i = 0; i < Dim; ++i) g[i] = i == 0 ? 1.0 : std::sqrt(static_cast<double>(i + 1)) - 1.0;
    return g.normalized();
  }

  const PerturbedAction<Dim>* alpha_;
  std::vector<std::int64_t> m_;
  std::vector<Letter> word_;
  int pullback_;
  Vec<Dim> reference_;
  double linear_eigenvalue_ = 0.0;
};

/// Arclength-sampled stable leaf through a center point. Samples are lifts
/// (no reduction), ordered by s = (i - center) * ds.
template <int Dim>
struct Leaf {
  std::vector<Vec<Dim>> points;
  std::vector<Vec<Dim>> tangents;
  double ds = 0.0;
  int center = 0;
  int flips = 0;

  std::size_t size() const { return points.size(); }
  double arclength(std::size_t i) const { return (static_cast<double>(i) - center) * ds; }
  double min_s() const { return arclength(0); }
  double max_s() const { return arclength(points.size() - 1); }
  const Vec<Dim>& origin() const { return points[center]; }

  /// Cubic Hermite position at arclength s (tangents as derivatives).
  Vec<Dim> position(double s, Vec<Dim>* velocity = nullptr) const {
    auto [i, t] = cell(s);
    double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t), h01 = t * t * (3 - 2 * t),
           h11 = t * t * (t - 1);
    if (velocity) {
      double d00 = 6 * t * t - 6 * t, d10 = 3 * t * t - 4 * t + 1, d01 = -d00, d11 = 3 * t * t - 2 * t;
      *velocity = (d00 * points[i] + d01 * points[i + 1]) / ds + d10 * tangents[i] + d11 * tangents[i + 1];
    }
    return h00 * points[i] + h01 * points[i + 1] + ds * (h10 * tangents[i] + h11 * tangents[i + 1]);
  }

  /// Arclength of the leaf point closest to p (p taken mod 1 against the
  /// leaf lift); `distance` receives the residual distance.
  double locate(const Vec<Dim>& p, double* distance = nullptr) const {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
      double d = wrap_displacement<Dim>(p - points[i]).norm();
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    Vec<Dim> lift = points[best] + wrap_displacement<Dim>(p - points[best]);
    double s = arclength(best);
    for (int it = 0; it < 20; ++it) {
      Vec<Dim> vel;
      Vec<Dim> q = position(s, &vel);
      double step = (lift - q).dot(vel) / vel.squaredNorm();
      s = std::clamp(s + step, min_s(), max_s());
      if (std::abs(step) < 1e-15) break;
    }
    if (distance) *distance = (lift - position(s)).norm();
    return s;
  }

  std::pair<std::size_t, double> cell(double s) const {
    double g = (s - min_s()) / ds;
    auto i = static_cast<std::size_t>(std::clamp(std::floor(g), 0.0, static_cast<double>(points.size() - 2)));
    return {i, g - static_cast<double>(i)};
  }
};

/// Integrates the unit stable line field from x out to arclength r in both
/// directions with classical RK4 at step ds. Each stage is oriented against
/// the previous tangent; reversals are re-aligned and counted in `flips`.
template <int Dim>
Leaf<Dim> trace_leaf(const StableLineField<Dim>& field, const Vec<Dim>& x, double r = 0.1, double ds = 1e-3) {
  require(r > 0 && ds > 0 && ds <= r, ErrorCode::InvalidInput, "leaf needs 0 < ds <= r");
  const int n = static_cast<int>(std::llround(r / ds));
  Leaf<Dim> leaf;
  leaf.ds = ds;
  leaf.center = n;
  leaf.points.assign(2 * n + 1, x);
  leaf.tangents.assign(2 * n + 1, Vec<Dim>::Zero());
  const Vec<Dim> v0 = field.direction(x);
  leaf.tangents[n] = v0;

  auto oriented = [&](const Vec<Dim>& p, const Vec<Dim>& prev) {
    Vec<Dim> v = field.direction(p);
    if (v.dot(prev) < 0) {
      ++leaf.flips;
      v = -v;
    }
    return v;
  };
  for (int side : {1, -1}) {
    Vec<Dim> p = x, prev = v0;
    for (int i = 1; i <= n; ++i) {
      const double h = side * ds;
      Vec<Dim> k1 = prev;
      Vec<Dim> k2 = oriented(p + 0.5 * h * k1, prev);
      Vec<Dim> k3 = oriented(p + 0.5 * h * k2, prev);
      Vec<Dim> k4 = oriented(p + h * k3, prev);
      p += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      prev = oriented(p, prev);
      leaf.points[n + side * i] = p;
      leaf.tangents[n + side * i] = prev;
    }
  }
  return leaf;
}

}  // namespace cartanlab

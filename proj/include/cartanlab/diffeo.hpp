#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cartanlab/trig_field.hpp"

namespace cartanlab {

/// phi(x) = x + eps v(x), a diffeomorphism of the torus homotopic to the
/// identity as long as eps * sup||Dv|| < 1.
template <int Dim>
class TorusDiffeo {
 public:
  struct Inverse {
    Vec<Dim> lift;      ///< x with phi(x) = y, on the lift closest to y
    Mat<Dim> jacobian;  ///< Dphi(x)
    int iterations = 0;
  };

  TorusDiffeo() : TorusDiffeo(TrigField<Dim>{}, 0.0) {}

  TorusDiffeo(TrigField<Dim> displacement, double epsilon)
      : field_(std::move(displacement)), epsilon_(epsilon), bound_(field_.derivative_bound()) {
    require(std::isfinite(epsilon_) && epsilon_ >= 0.0, ErrorCode::InvalidInput, "epsilon must be finite and >= 0");
    require(epsilon_ * bound_ < 1.0, ErrorCode::InvalidInput,
            "eps * sup||Dv|| = " + std::to_string(epsilon_ * bound_) + " is not < 1; phi may fail to be invertible");
  }

  const TrigField<Dim>& displacement() const { return field_; }
  double epsilon() const { return epsilon_; }
  double derivative_bound() const { return bound_; }
  /// 1 - eps * sup||Dv||, positive by construction.
  double margin() const { return 1.0 - epsilon_ * bound_; }

  Vec<Dim> eval_lift(const Vec<Dim>& x) const {
    if (epsilon_ == 0.0) return x;
    return x + epsilon_ * field_.value(x);
  }

  TorusPoint<Dim> eval(const TorusPoint<Dim>& x) const { return TorusPoint<Dim>::reduce(eval_lift(x.coords())); }

  Mat<Dim> jacobian(const Vec<Dim>& x) const {
    Mat<Dim> id = Mat<Dim>::Identity(x.size(), x.size());
    if (epsilon_ == 0.0) return id;
    return id + epsilon_ * field_.jacobian(x);
  }

  /// Lift-level value and Jacobian in one pass.
  void eval_with_jacobian(const Vec<Dim>& x, Vec<Dim>& value, Mat<Dim>& jac) const {
    if (epsilon_ == 0.0) {
      value = x;
      jac = Mat<Dim>::Identity(x.size(), x.size());
      return;
    }
    Vec<Dim> v;
    field_.evaluate(x, v, jac);
    value = x + epsilon_ * v;
    jac = Mat<Dim>::Identity(x.size(), x.size()) + epsilon_ * jac;
  }

  /// Newton solve of x + eps v(x) = y on the lift, started from y - eps v(y).
  /// Throws NoConvergence if the residual does not reach 1e-13 in 50 steps.
  Inverse invert_lift(const Vec<Dim>& y) const {
    Inverse out{y, Mat<Dim>::Identity(y.size(), y.size()), 0};
    if (epsilon_ == 0.0) return out;
    Vec<Dim> x = y - epsilon_ * field_.value(y);
    const double floor = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, y.cwiseAbs().maxCoeff());
    Vec<Dim> fx;
    Mat<Dim> jac;
    double res = 0.0;
    for (int it = 1; it <= 50; ++it) {
      eval_with_jacobian(x, fx, jac);
      Vec<Dim> r = fx - y;
      res = r.cwiseAbs().maxCoeff();
      out.iterations = it;
      if (res <= floor) break;
      Vec<Dim> dx = jac.inverse() * r;
      x -= dx;
      if (dx.cwiseAbs().maxCoeff() <= floor) {
        eval_with_jacobian(x, fx, jac);
        res = (fx - y).cwiseAbs().maxCoeff();
        break;
      }
    }
    require(res < 1e-13, ErrorCode::NoConvergence, "Newton inversion of phi stalled at residual " + std::to_string(res));
    out.lift = x;
    out.jacobian = jac;
    return out;
  }

  TorusPoint<Dim> invert(const TorusPoint<Dim>& y) const {
    return TorusPoint<Dim>::reduce(invert_lift(y.coords()).lift);
  }

  /// Inverse by the contraction x <- y - eps v(x) (rate eps * sup||Dv||).
  Vec<Dim> invert_fixed_point_lift(const Vec<Dim>& y, int max_iterations = 500) const {
    Vec<Dim> x = y;
    for (int it = 0; it < max_iterations; ++it) {
      Vec<Dim> next = y - epsilon_ * field_.value(x);
      double change = (next - x).cwiseAbs().maxCoeff();
      x = next;
      if (change <= 1e-17) break;
    }
    return x;
  }

 private:
  TrigField<Dim> field_;
  double epsilon_;
  double bound_;
};

template <int Dim>
Json to_json(const TorusDiffeo<Dim>& phi) {
  return Json{{"epsilon", phi.epsilon()}, {"modes", to_json(phi.displacement())}};
}

template <int Dim>
TorusDiffeo<Dim> torus_diffeo_from_json(const Json& j) {
  require(j.is_object(), ErrorCode::Config, "perturbation must be an object");
  for (const auto& item : j.items())
    require(item.key() == "epsilon" || item.key() == "modes", ErrorCode::Config,
            "unknown perturbation key '" + item.key() + "'");
  double eps = 0.0;
  try {
    eps = j.at("epsilon").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw LabError(ErrorCode::Config, std::string("perturbation.epsilon: ") + e.what());
  }
  TrigField<Dim> field = j.contains("modes") ? trig_field_from_json<Dim>(j.at("modes")) : cyclic_sine_field<Dim>();
  return TorusDiffeo<Dim>(std::move(field), eps);
}

}  // namespace cartanlab

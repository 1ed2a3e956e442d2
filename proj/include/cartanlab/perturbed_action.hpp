#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "cartanlab/cartan_action.hpp"
#include "cartanlab/diffeo.hpp"

namespace cartanlab {

/// One letter of a word in the generators: generator index and +1/-1.
struct Letter {
  int generator;
  int sign;
};

/// Canonical expansion of m: all powers of generator 1 first, then 2, ...
inline std::vector<Letter> canonical_word(const std::vector<std::int64_t>& m, int max_length) {
  std::int64_t len = 0;
  for (auto v : m) len += v < 0 ? -v : v;
  require(len <= max_length, ErrorCode::WordTooLong,
          "||m||_1 = " + std::to_string(len) + " exceeds the word limit " + std::to_string(max_length));
  std::vector<Letter> word;
  for (std::size_t j = 0; j < m.size(); ++j)
    for (std::int64_t r = 0; r < std::abs(m[j]); ++r) word.push_back({static_cast<int>(j), m[j] > 0 ? 1 : -1});
  return word;
}

/// A smooth Z^k action homotopic to a linear one. Two families:
///  - Conjugated: f_j = phi o A_j o phi^{-1}; the semiconjugacy (phi^{-1}) and
///    the invariant density are known in closed form.
///  - SingleMap: f = A + eps p with p a periodic trig field (rank 1); no
///    oracle beyond the homotopy class.
template <int Dim>
class PerturbedAction {
 public:
  enum class Kind { Conjugated, SingleMap };

  struct Step {
    Vec<Dim> point;
    Mat<Dim> jacobian;
  };

  static PerturbedAction conjugated(TorusDiffeo<Dim> phi, CartanAction base) {
    require(base.dim() == Dim, ErrorCode::DimensionMismatch,
            "action dimension " + std::to_string(base.dim()) + " vs compiled dimension " + std::to_string(Dim));
    PerturbedAction a;
    a.kind_ = Kind::Conjugated;
    a.phi_ = std::move(phi);
    for (const auto& g : base.generators()) {
      a.integer_.push_back(g);
      a.linear_.push_back(g.matrix().template to_real<Dim>());
      a.linear_inv_.push_back(g.inverse().matrix().template to_real<Dim>());
    }
    a.base_ = std::move(base);
    return a;
  }

  static PerturbedAction single_map(ToralAutomorphism a_lin, TrigField<Dim> p, double epsilon) {
    require(a_lin.dim() == Dim, ErrorCode::DimensionMismatch, "automorphism dimension");
    require(std::isfinite(epsilon), ErrorCode::InvalidInput, "epsilon must be finite");
    PerturbedAction a;
    a.kind_ = Kind::SingleMap;
    a.linear_.push_back(a_lin.matrix().template to_real<Dim>());
    a.linear_inv_.push_back(a_lin.inverse().matrix().template to_real<Dim>());
    a.integer_.push_back(std::move(a_lin));
    a.p_ = std::move(p);
    a.p_eps_ = epsilon;
    return a;
  }

  Kind kind() const { return kind_; }
  int rank() const { return static_cast<int>(linear_.size()); }
  const ToralAutomorphism& linear_generator(int j) const { return integer_.at(j); }
  const Mat<Dim>& linear_matrix(int j, int sign = 1) const { return sign > 0 ? linear_[j] : linear_inv_[j]; }
  const TorusDiffeo<Dim>& phi() const { return phi_; }
  const std::optional<CartanAction>& base() const { return base_; }
  double epsilon() const { return kind_ == Kind::Conjugated ? phi_.epsilon() : p_eps_; }

  int max_word_length() const { return max_word_; }
  void set_max_word_length(int n) { max_word_ = n; }

  /// Exact lift of generator j (or its inverse): F(x + n) = F(x) + A n.
  Vec<Dim> generator_lift(int j, int sign, const Vec<Dim>& x) const {
    if (kind_ == Kind::Conjugated) {
      Vec<Dim> y = phi_.invert_lift(x).lift;
      return phi_.eval_lift(linear_matrix(j, sign) * y);
    }
    if (sign > 0) return linear_[0] * x + p_eps_ * p_.value(x);
    return single_inverse(x).point;
  }

  Step generator_step(int j, int sign, const Vec<Dim>& x) const {
    if (kind_ == Kind::Conjugated) {
      auto inv = phi_.invert_lift(x);
      Vec<Dim> z = linear_matrix(j, sign) * inv.lift;
      Step s;
      Mat<Dim> dz;
      phi_.eval_with_jacobian(z, s.point, dz);
      s.jacobian = dz * linear_matrix(j, sign) * inv.jacobian.inverse();
      return s;
    }
    if (sign > 0) {
      Step s;
      if (p_eps_ == 0.0 || p_.empty()) {
        s.point = linear_[0] * x;
        s.jacobian = linear_[0];
        return s;
      }
      Vec<Dim> v;
      Mat<Dim> dv;
      p_.evaluate(x, v, dv);
      s.point = linear_[0] * x + p_eps_ * v;
      s.jacobian = linear_[0] + p_eps_ * dv;
      return s;
    }
    return single_inverse(x);
  }

  std::vector<Letter> word(const std::vector<std::int64_t>& m) const {
    require(static_cast<int>(m.size()) == rank(), ErrorCode::DimensionMismatch,
            "element has " + std::to_string(m.size()) + " entries, action rank is " + std::to_string(rank()));
    return canonical_word(m, max_word_);
  }

  /// alpha(m) x, reduced to [0,1) between letters.
  Vec<Dim> eval(const std::vector<Letter>& w, const Vec<Dim>& x) const {
    Vec<Dim> y = x;
    for (const auto& l : w) y = reduce_lift<Dim>(generator_lift(l.generator, l.sign, y));
    return y;
  }

  /// alpha(m) x together with D alpha(m)(x) by the chain rule along the word.
  Step eval_with_jacobian(const std::vector<Letter>& w, const Vec<Dim>& x) const {
    Step out{x, Mat<Dim>::Identity(x.size(), x.size())};
    for (const auto& l : w) {
      Step s = generator_step(l.generator, l.sign, out.point);
      out.point = reduce_lift<Dim>(s.point);
      out.jacobian = s.jacobian * out.jacobian;
    }
    return out;
  }

  TorusPoint<Dim> eval(const std::vector<std::int64_t>& m, const TorusPoint<Dim>& x) const {
    return TorusPoint<Dim>::reduce(eval(word(m), x.coords()));
  }

  Mat<Dim> jacobian(const std::vector<std::int64_t>& m, const TorusPoint<Dim>& x) const {
    return eval_with_jacobian(word(m), x.coords()).jacobian;
  }

  /// Linear part alpha0(m) as a real matrix.
  Mat<Dim> linear_element(const std::vector<Letter>& w) const {
    Mat<Dim> a = Mat<Dim>::Identity();
    for (const auto& l : w) a = linear_matrix(l.generator, l.sign) * a;
    return a;
  }

  /// Conjugated family only: the semiconjugacy h = phi^{-1} on the lift near x.
  Vec<Dim> oracle_semiconjugacy_lift(const Vec<Dim>& x) const {
    require(kind_ == Kind::Conjugated, ErrorCode::InvalidInput, "oracle needs the conjugated family");
    return phi_.invert_lift(x).lift;
  }

  /// Conjugated family only: density of mu = phi_* Lebesgue,
  /// g(x) = 1 / |det Dphi(phi^{-1} x)|.
  double oracle_density(const Vec<Dim>& x) const {
    require(kind_ == Kind::Conjugated, ErrorCode::InvalidInput, "oracle needs the conjugated family");
    return 1.0 / std::abs(phi_.invert_lift(x).jacobian.determinant());
  }

  /// Draws a point distributed by the invariant measure from a uniform point
  /// u: x = phi(u) for the conjugated family (exact), u itself otherwise.
  Vec<Dim> sample_from_uniform(const Vec<Dim>& u) const {
    if (kind_ == Kind::Conjugated) return reduce_lift<Dim>(phi_.eval_lift(u));
    return u;
  }

 private:
  PerturbedAction() = default;

  /// f^{-1}(y) for the single map by Newton on a lift from A^{-1} y.
  Step single_inverse(const Vec<Dim>& y) const {
    Vec<Dim> x = linear_inv_[0] * y;
    Step s{x, linear_inv_[0]};
    if (p_eps_ == 0.0 || p_.empty()) return s;
    double res = 0.0;
    Mat<Dim> df;
    for (int it = 0; it < 50; ++it) {
      Vec<Dim> v;
      Mat<Dim> dv;
      p_.evaluate(x, v, dv);
      Vec<Dim> r = linear_[0] * x + p_eps_ * v - y;
      df = linear_[0] + p_eps_ * dv;
      res = r.cwiseAbs().maxCoeff();
      if (res <= 1e-15 * std::max(1.0, y.cwiseAbs().maxCoeff())) break;
      x -= df.inverse() * r;
    }
    require(res < 1e-12, ErrorCode::NoConvergence, "Newton inversion of f stalled");
    s.point = x;
    s.jacobian = df.inverse();
    return s;
  }

  Kind kind_ = Kind::Conjugated;
  std::vector<ToralAutomorphism> integer_;
  std::vector<Mat<Dim>> linear_;
  std::vector<Mat<Dim>> linear_inv_;
  TorusDiffeo<Dim> phi_;
  std::optional<CartanAction> base_;
  TrigField<Dim> p_;
  double p_eps_ = 0.0;
  int max_word_ = 64;
};

template <int Dim>
PerturbedAction<Dim> make_conjugated_action(TorusDiffeo<Dim> phi, CartanAction base) {
  return PerturbedAction<Dim>::conjugated(std::move(phi), std::move(base));
}

}  // namespace cartanlab

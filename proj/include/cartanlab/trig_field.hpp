#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "cartanlab/json_io.hpp"
#include "cartanlab/torus.hpp"

namespace cartanlab {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// One Fourier mode: a cos(2 pi n.x) + b sin(2 pi n.x), scaled by 1/(2 pi).
template <int Dim>
struct TrigMode {
  Eigen::Matrix<int, Dim, 1> freq;
  Vec<Dim> cos_coeff;
  Vec<Dim> sin_coeff;
};

/// Periodic vector field T^d -> R^d given by finitely many modes,
///   v(x) = (1/2pi) sum_modes [a cos(2 pi n.x) + b sin(2 pi n.x)],
/// so that Dv(x) = sum_modes [-a sin + b cos] n^T has no 2pi factors.
template <int Dim>
class TrigField {
 public:
  TrigField() = default;
  explicit TrigField(std::vector<TrigMode<Dim>> modes) : modes_(std::move(modes)) {}

  const std::vector<TrigMode<Dim>>& modes() const { return modes_; }
  bool empty() const { return modes_.empty(); }

  Vec<Dim> value(const Vec<Dim>& x) const {
    Vec<Dim> v = Vec<Dim>::Zero(x.size());
    for (const auto& m : modes_) {
      double th = kTwoPi * m.freq.template cast<double>().dot(x);
      v += m.cos_coeff * std::cos(th) + m.sin_coeff * std::sin(th);
    }
    return v / kTwoPi;
  }

  Mat<Dim> jacobian(const Vec<Dim>& x) const {
    Mat<Dim> d = Mat<Dim>::Zero(x.size(), x.size());
    for (const auto& m : modes_) {
      double th = kTwoPi * m.freq.template cast<double>().dot(x);
      d += (m.sin_coeff * std::cos(th) - m.cos_coeff * std::sin(th)) * m.freq.template cast<double>().transpose();
    }
    return d;
  }

  /// Value and Jacobian sharing one sin/cos evaluation per mode.
  void evaluate(const Vec<Dim>& x, Vec<Dim>& value, Mat<Dim>& jac) const {
    value.setZero(x.size());
    jac.setZero(x.size(), x.size());
    for (const auto& m : modes_) {
      Vec<Dim> n = m.freq.template cast<double>();
      double th = kTwoPi * n.dot(x);
      double s = std::sin(th), c = std::cos(th);
      value += m.cos_coeff * c + m.sin_coeff * s;
      jac += (m.sin_coeff * c - m.cos_coeff * s) * n.transpose();
    }
    value /= kTwoPi;
  }

  /// Upper bound on sup_x ||Dv(x)||_2. Entry (i, j) of Dv is bounded by
  /// E_ij = sum_modes |n_j| sqrt(a_i^2 + b_i^2); the operator norm is then at
  /// most min(sqrt(||E||_1 ||E||_inf), ||E||_F).
  double derivative_bound() const {
    if (modes_.empty()) return 0.0;
    const auto d = modes_.front().freq.size();
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(d, d);
    for (const auto& m : modes_)
      for (Eigen::Index i = 0; i < d; ++i) {
        double amp = std::hypot(m.cos_coeff[i], m.sin_coeff[i]);
        for (Eigen::Index j = 0; j < d; ++j) e(i, j) += std::abs(m.freq[j]) * amp;
      }
    double col = e.cwiseAbs().colwise().sum().maxCoeff();
    double row = e.cwiseAbs().rowwise().sum().maxCoeff();
    return std::min(std::sqrt(col * row), e.norm());
  }

 private:
  std::vector<TrigMode<Dim>> modes_;
};

template <int Dim>
Json to_json(const TrigField<Dim>& f) {
  Json modes = Json::array();
  for (const auto& m : f.modes()) {
    Json freq = Json::array(), c = Json::array(), s = Json::array();
    for (Eigen::Index i = 0; i < m.freq.size(); ++i) {
      freq.push_back(m.freq[i]);
      c.push_back(m.cos_coeff[i]);
      s.push_back(m.sin_coeff[i]);
    }
    modes.push_back(Json{{"freq", freq}, {"cos", c}, {"sin", s}});
  }
  return modes;
}

template <int Dim>
TrigField<Dim> trig_field_from_json(const Json& modes) {
  std::vector<TrigMode<Dim>> out;
  try {
    for (const auto& m : modes) {
      for (const auto& key : m.items())
        require(key.key() == "freq" || key.key() == "cos" || key.key() == "sin", ErrorCode::Config,
                "unknown mode key '" + key.key() + "'");
      auto freq = m.at("freq").get<std::vector<int>>();
      auto c = m.contains("cos") ? m.at("cos").get<std::vector<double>>() : std::vector<double>(Dim, 0.0);
      auto s = m.contains("sin") ? m.at("sin").get<std::vector<double>>() : std::vector<double>(Dim, 0.0);
      require(freq.size() == Dim && c.size() == Dim && s.size() == Dim, ErrorCode::Config,
              "mode vectors must have length " + std::to_string(Dim));
      TrigMode<Dim> tm;
      for (int i = 0; i < Dim; ++i) {
        tm.freq[i] = freq[i];
        tm.cos_coeff[i] = c[i];
        tm.sin_coeff[i] = s[i];
      }
      out.push_back(tm);
    }
  } catch (const nlohmann::json::exception& e) {
    throw LabError(ErrorCode::Config, std::string("mode list: ") + e.what());
  }
  return TrigField<Dim>(std::move(out));
}

/// The default displacement v(x) = (sin 2pi x2, sin 2pi x3, ..., sin 2pi x1)/(2pi):
/// component i is driven by coordinate i+1 (cyclically).
template <int Dim>
TrigField<Dim> cyclic_sine_field() {
  std::vector<TrigMode<Dim>> modes;
  for (int i = 0; i < Dim; ++i) {
    TrigMode<Dim> m;
    m.freq.setZero();
    m.freq[(i + 1) % Dim] = 1;
    m.cos_coeff.setZero();
    m.sin_coeff.setZero();
    m.sin_coeff[i] = 1.0;
    modes.push_back(m);
  }
  return TrigField<Dim>(std::move(modes));
}

}  // namespace cartanlab

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cartanlab/int_matrix.hpp"
#include "cartanlab/json_io.hpp"
#include "cartanlab/polynomial.hpp"

namespace cartanlab {

/// Real spectrum of an automorphism, sorted by decreasing modulus (ties by
/// decreasing value). Column i of `vectors` is a unit eigenvector for
/// `values[i]`, signed so that its largest-magnitude entry is positive.
struct Eigenstructure {
  std::vector<double> values;
  Eigen::MatrixXd vectors;
};

/// Eigen-decomposition from the characteristic polynomial; throws
/// NotCartanEligible unless the roots are real and distinct.
inline Eigenstructure eigenstructure(const ToralAutomorphism& a) {
  const int n = a.dim();
  auto c = characteristic_polynomial(a.matrix());
  auto roots = distinct_real_roots(Poly(c.begin(), c.end()));
  require(roots.has_value(), ErrorCode::NotCartanEligible,
          "characteristic polynomial has complex or repeated roots");
  std::vector<double> vals = *roots;
  std::sort(vals.begin(), vals.end(), [](double x, double y) {
    return std::abs(x) != std::abs(y) ? std::abs(x) > std::abs(y) : x > y;
  });

  Eigen::MatrixXd m = a.matrix().to_dynamic();
  Eigenstructure out{vals, Eigen::MatrixXd(n, n)};
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd shifted = m - vals[i] * Eigen::MatrixXd::Identity(n, n);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(shifted, Eigen::ComputeFullV);
    Eigen::VectorXd v = svd.matrixV().col(n - 1);
    // One inverse-iteration step sharpens the null vector.
    Eigen::MatrixXd near = shifted - 1e-9 * std::max(1.0, std::abs(vals[i])) * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd w = near.fullPivLu().solve(v);
    if (w.allFinite() && w.norm() > 0) v = w;
    v.normalize();
    Eigen::Index k;
    v.cwiseAbs().maxCoeff(&k);
    if (v[k] < 0) v = -v;
    require((m * v - vals[i] * v).norm() < 1e-10 * std::max(1.0, m.norm()), ErrorCode::NotCartanEligible,
            "eigenvector residual too large");
    out.vectors.col(i) = v;
  }
  return out;
}

/// The k+1 Lyapunov functionals chi_i(m) = <c_i, m> of a linear Cartan action.
struct LyapunovSpectrum {
  /// Row i holds c_i in R^k.
  Eigen::MatrixXd coefficients;
  /// Entry (i, j): signed eigenvalue of generator j on shared eigenvector i.
  Eigen::MatrixXd eigenvalues;

  int rank() const { return static_cast<int>(coefficients.cols()); }
  int count() const { return static_cast<int>(coefficients.rows()); }

  double functional(int i, const Eigen::VectorXd& m) const { return coefficients.row(i).dot(m); }

  Eigen::VectorXd values(const Eigen::VectorXd& m) const { return coefficients * m; }

  /// log|det Dalpha0(m)|, which vanishes for unimodular generators.
  double trace_sum(const Eigen::VectorXd& m) const { return values(m).sum(); }
};

class CartanAction {
 public:
  const std::vector<ToralAutomorphism>& generators() const { return generators_; }
  int rank() const { return static_cast<int>(generators_.size()); }
  int dim() const { return rank() + 1; }
  const Eigen::MatrixXd& eigenbasis() const { return basis_; }
  const LyapunovSpectrum& spectrum() const { return spectrum_; }

  /// alpha0(m) as an exact integer matrix, generator 1 powers applied first.
  IntMatrix element(const std::vector<std::int64_t>& m) const {
    require(static_cast<int>(m.size()) == rank(), ErrorCode::DimensionMismatch, "element index length");
    IntMatrix out = IntMatrix::identity(dim());
    for (int j = 0; j < rank(); ++j) out = generators_[j].matrix().power(m[j]) * out;
    return out;
  }

  /// Signed eigenvalue of alpha0(m) on shared eigenvector i.
  double eigenvalue(int i, const std::vector<std::int64_t>& m) const {
    double v = 1.0;
    for (int j = 0; j < rank(); ++j) v *= std::pow(spectrum_.eigenvalues(i, j), static_cast<double>(m[j]));
    return v;
  }

  friend CartanAction build_cartan_action(const std::vector<IntMatrix>&, int);

 private:
  std::vector<ToralAutomorphism> generators_;
  Eigen::MatrixXd basis_;
  LyapunovSpectrum spectrum_;
};

namespace detail {

/// Visits every m in Z^k with ||m||_inf <= radius, lexicographically.
template <class F>
void for_each_box_point(int k, int radius, F&& f) {
  std::vector<std::int64_t> m(k, -radius);
  while (true) {
    f(m);
    int j = k - 1;
    while (j >= 0 && m[j] == radius) m[j--] = -radius;
    if (j < 0) return;
    ++m[j];
  }
}

}  // namespace detail

/// Validates and assembles a linear Cartan action: exact pairwise
/// commutation, a shared real eigenbasis, non-proportional functionals, and
/// hyperbolicity with simple real spectrum of every alpha0(m) with
/// 0 < ||m||_inf <= box_radius.
inline CartanAction build_cartan_action(const std::vector<IntMatrix>& gens, int box_radius = 3) {
  const int k = static_cast<int>(gens.size());
  require(k >= 2, ErrorCode::InvalidInput, "a Cartan action needs at least two generators");
  CartanAction act;
  for (const auto& g : gens) {
    require(g.size() == k + 1, ErrorCode::DimensionMismatch,
            "generators must be (k+1)x(k+1) = " + std::to_string(k + 1) + "x" + std::to_string(k + 1));
    act.generators_.emplace_back(g);
  }
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      require(gens[a] * gens[b] == gens[b] * gens[a], ErrorCode::NonCommuting,
              "generators " + std::to_string(a + 1) + " and " + std::to_string(b + 1) + " do not commute");

  const int n = k + 1;
  Eigenstructure base = eigenstructure(act.generators_[0]);
  act.basis_ = base.vectors;
  act.spectrum_.eigenvalues.resize(n, k);
  for (int j = 0; j < k; ++j) {
    Eigenstructure ej = j == 0 ? base : eigenstructure(act.generators_[j]);
    std::vector<int> used(n, 0);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd cosines = (ej.vectors.transpose() * base.vectors.col(i)).cwiseAbs();
      Eigen::Index best;
      double top = cosines.maxCoeff(&best);
      double second = 0.0;
      for (int q = 0; q < n; ++q)
        if (q != best) second = std::max(second, cosines[q]);
      require(top > second + 1e-6 && !used[best], ErrorCode::NotCartanEligible,
              "eigenvectors of generator " + std::to_string(j + 1) + " do not match the shared basis");
      used[best] = 1;
      Eigen::MatrixXd aj = gens[j].to_dynamic();
      double lambda = ej.values[best];
      require((aj * base.vectors.col(i) - lambda * base.vectors.col(i)).norm() < 1e-8 * std::max(1.0, aj.norm()),
              ErrorCode::NotCartanEligible, "generators do not share an eigenbasis");
      act.spectrum_.eigenvalues(i, j) = lambda;
    }
  }
  act.spectrum_.coefficients = act.spectrum_.eigenvalues.cwiseAbs().array().log().matrix();

  const auto& c = act.spectrum_.coefficients;
  for (int i = 0; i < n; ++i) {
    require(c.row(i).norm() > 1e-12, ErrorCode::ProportionalExponents, "a Lyapunov functional vanishes");
    for (int q = i + 1; q < n; ++q) {
      double cross = c.row(i).norm() * c.row(q).norm() - std::abs(c.row(i).dot(c.row(q)));
      require(cross > 1e-9 * c.row(i).norm() * c.row(q).norm(), ErrorCode::ProportionalExponents,
              "functionals " + std::to_string(i + 1) + " and " + std::to_string(q + 1) + " are proportional");
    }
  }

  detail::for_each_box_point(k, box_radius, [&](const std::vector<std::int64_t>& m) {
    if (std::all_of(m.begin(), m.end(), [](auto v) { return v == 0; })) return;
    IntMatrix e = act.element(m);
    eigenstructure(ToralAutomorphism(e));
    Eigen::VectorXd mv(k);
    for (int j = 0; j < k; ++j) mv[j] = static_cast<double>(m[j]);
    require((c * mv).cwiseAbs().minCoeff() > 1e-9, ErrorCode::NotCartanEligible, "non-hyperbolic element");
  });
  return act;
}

inline CartanAction build_cartan_action(const std::vector<ToralAutomorphism>& gens, int box_radius = 3) {
  std::vector<IntMatrix> ms;
  for (const auto& g : gens) ms.push_back(g.matrix());
  return build_cartan_action(ms, box_radius);
}

/// chi_i(m) = <c_i, m>, defined for real m (linear extension).
inline double lyapunov_functional(const CartanAction& action, int i, const Eigen::VectorXd& m) {
  require(i >= 0 && i < action.dim(), ErrorCode::InvalidInput, "functional index out of range");
  require(m.size() == action.rank(), ErrorCode::DimensionMismatch, "element length");
  return action.spectrum().functional(i, m);
}

inline Json to_json(const CartanAction& action) {
  Json gens = Json::array();
  for (const auto& g : action.generators()) gens.push_back(g.matrix().rows());
  Json coeffs = Json::array();
  const auto& c = action.spectrum().coefficients;
  for (int i = 0; i < c.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < c.cols(); ++j) row.push_back(c(i, j));
    coeffs.push_back(row);
  }
  Json j;
  j["k"] = action.rank();
  j["dim"] = action.dim();
  j["generators"] = gens;
  j["spectrum"] = Json{{"coefficients", coeffs}};
  return j;
}

/// Rebuilds (and so re-validates) an action from its JSON form. Stored
/// coefficients, when present, must agree with the recomputed ones.
inline CartanAction cartan_action_from_json(const Json& j) {
  try {
    std::vector<IntMatrix> gens;
    for (const auto& g : j.at("generators")) gens.push_back(IntMatrix::from_rows(g.get<std::vector<std::vector<std::int64_t>>>()));
    if (j.contains("k"))
      require(j.at("k").get<int>() == static_cast<int>(gens.size()), ErrorCode::Config, "k does not match generators");
    CartanAction a = build_cartan_action(gens);
    if (j.contains("dim")) require(j.at("dim").get<int>() == a.dim(), ErrorCode::Config, "dim does not match generators");
    if (j.contains("spectrum")) {
      auto rows = j.at("spectrum").at("coefficients").get<std::vector<std::vector<double>>>();
      const auto& c = a.spectrum().coefficients;
      require(static_cast<int>(rows.size()) == c.rows(), ErrorCode::Config, "coefficient rows");
      for (int r = 0; r < c.rows(); ++r)
        for (int q = 0; q < c.cols(); ++q)
          require(std::abs(rows[r].at(q) - c(r, q)) < 1e-9, ErrorCode::Config, "stored spectrum disagrees with generators");
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw LabError(ErrorCode::Config, std::string("Cartan action JSON: ") + e.what());
  }
}

}  // namespace cartanlab

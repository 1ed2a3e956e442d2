#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cartanlab/cartan_action.hpp"

namespace cartanlab {

/// Strict sign vector in {+,-}^{k+1}, one entry per Lyapunov functional.
struct SignPattern {
  std::vector<int> signs;

  std::string str() const {
    std::string s;
    for (int v : signs) s += v > 0 ? '+' : '-';
    return s;
  }

  static SignPattern parse(const std::string& s) {
    SignPattern p;
    for (char ch : s) {
      require(ch == '+' || ch == '-', ErrorCode::InvalidInput, "sign pattern must use '+' and '-'");
      p.signs.push_back(ch == '+' ? 1 : -1);
    }
    return p;
  }

  friend bool operator==(const SignPattern&, const SignPattern&) = default;
  friend auto operator<=>(const SignPattern& a, const SignPattern& b) { return a.str() <=> b.str(); }
};

inline constexpr double kDegenerateCutoff = 1e-9;

/// Signs of chi_i(m); nullopt (degenerate) when some |chi_i(m)| < cutoff.
inline std::optional<SignPattern> sign_pattern(const LyapunovSpectrum& spectrum, const Eigen::VectorXd& m,
                                               double cutoff = kDegenerateCutoff) {
  require(m.size() == spectrum.rank(), ErrorCode::DimensionMismatch, "element length");
  Eigen::VectorXd v = spectrum.values(m);
  SignPattern p;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) < cutoff) return std::nullopt;
    p.signs.push_back(v[i] > 0 ? 1 : -1);
  }
  return p;
}

inline Eigen::VectorXd to_real(const std::vector<std::int64_t>& m) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i) v[static_cast<Eigen::Index>(i)] = static_cast<double>(m[i]);
  return v;
}

struct Chamber {
  SignPattern pattern;
  std::vector<std::int64_t> representative;
};

struct ChamberArrangement {
  /// Row i is the normal c_i of the i-th Lyapunov hyperplane.
  Eigen::MatrixXd hyperplanes;
  std::vector<Chamber> chambers;

  int rank() const { return static_cast<int>(hyperplanes.cols()); }

  const Chamber* find(const SignPattern& p) const {
    for (const auto& c : chambers)
      if (c.pattern == p) return &c;
    return nullptr;
  }
};

namespace detail {

inline std::int64_t l1(const std::vector<std::int64_t>& m) {
  std::int64_t s = 0;
  for (auto v : m) s += v < 0 ? -v : v;
  return s;
}

/// Sign patterns of all chambers of a central arrangement, found without
/// sampling. Every chamber is a pointed cone whose extreme rays are lines
/// where k-1 hyperplanes meet; nudging such a ray off each of those
/// hyperplanes in every sign combination reaches every adjacent chamber.
inline std::set<SignPattern> exact_chamber_patterns(const Eigen::MatrixXd& normals, double cutoff) {
  const int n = static_cast<int>(normals.rows());
  const int k = static_cast<int>(normals.cols());
  std::set<SignPattern> found;
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + (k - 1), true);
  do {
    std::vector<int> s;
    for (int i = 0; i < n; ++i)
      if (pick[i]) s.push_back(i);
    Eigen::MatrixXd sub(k - 1, k);
    for (int r = 0; r < k - 1; ++r) sub.row(r) = normals.row(s[r]);
    Eigen::VectorXd ray;
    if (k - 1 == 0) {
      ray = Eigen::VectorXd::Unit(k, 0);
    } else {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(sub, Eigen::ComputeFullV);
      ray = svd.matrixV().col(k - 1);
    }
    Eigen::MatrixXd pinv = k - 1 > 0 ? Eigen::MatrixXd(sub.completeOrthogonalDecomposition().pseudoInverse())
                                     : Eigen::MatrixXd(k, 0);
    for (int dir : {1, -1}) {
      Eigen::VectorXd r = dir * ray;
      double gap = std::numeric_limits<double>::infinity();
      for (int t = 0; t < n; ++t)
        if (!pick[t]) gap = std::min(gap, std::abs(normals.row(t).dot(r)));
      for (int mask = 0; mask < (1 << (k - 1)); ++mask) {
        Eigen::VectorXd eps(k - 1);
        for (int q = 0; q < k - 1; ++q) eps[q] = (mask >> q) & 1 ? 1.0 : -1.0;
        Eigen::VectorXd q = pinv * eps;
        double qn = 0.0;
        for (int t = 0; t < n; ++t) qn = std::max(qn, std::abs(normals.row(t).dot(q)));
        double eta = qn > 0 ? 0.25 * gap / qn : 1.0;
        Eigen::VectorXd p = r + eta * q;
        Eigen::VectorXd v = normals * p;
        SignPattern pat;
        bool ok = true;
        for (int t = 0; t < n; ++t) {
          if (std::abs(v[t]) < cutoff * 1e-3) ok = false;
          pat.signs.push_back(v[t] > 0 ? 1 : -1);
        }
        if (ok) found.insert(pat);
      }
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return found;
}

}  // namespace detail

/// Realizable sign patterns of the Lyapunov arrangement with integer
/// representatives. Patterns come from exact ray reasoning and are
/// cross-checked by scanning ||m||_inf <= radius; each representative
/// minimizes ||m||_1 with lexicographic tie-break. Throws
/// IncompleteEnumeration if fewer than 2^{k+1}-2 chambers get a
/// representative.
inline ChamberArrangement enumerate_chambers(const LyapunovSpectrum& spectrum, int search_radius,
                                             double cutoff = kDegenerateCutoff) {
  const int k = spectrum.rank();
  const int n = spectrum.count();
  require(search_radius >= 1, ErrorCode::InvalidInput, "search radius must be positive");
  ChamberArrangement arr;
  arr.hyperplanes = spectrum.coefficients;

  std::map<SignPattern, std::vector<std::int64_t>> best;
  detail::for_each_box_point(k, search_radius, [&](const std::vector<std::int64_t>& m) {
    auto p = sign_pattern(spectrum, to_real(m), cutoff);
    if (!p) return;
    auto it = best.find(*p);
    if (it == best.end()) {
      best.emplace(*p, m);
      return;
    }
    auto a = detail::l1(m), b = detail::l1(it->second);
    if (a < b || (a == b && m < it->second)) it->second = m;
  });

  std::set<SignPattern> patterns = detail::exact_chamber_patterns(spectrum.coefficients, cutoff);
  for (const auto& [p, m] : best) patterns.insert(p);

  for (const auto& p : patterns) {
    auto it = best.find(p);
    if (it != best.end()) arr.chambers.push_back({p, it->second});
  }
  const std::size_t expected = (std::size_t{1} << n) - 2;
  require(arr.chambers.size() == expected && patterns.size() == expected, ErrorCode::IncompleteEnumeration,
          "found " + std::to_string(arr.chambers.size()) + " of " + std::to_string(expected) +
              " chambers with representatives at radius " + std::to_string(search_radius));
  return arr;
}

/// Property (C): for each i an integer m with chi_i(m) < 0 and all other
/// functionals positive.
inline std::vector<std::vector<std::int64_t>> property_c_witnesses(const ChamberArrangement& arr) {
  const int n = static_cast<int>(arr.hyperplanes.rows());
  std::vector<std::vector<std::int64_t>> out;
  for (int i = 0; i < n; ++i) {
    SignPattern p;
    p.signs.assign(n, 1);
    p.signs[i] = -1;
    const Chamber* c = arr.find(p);
    require(c != nullptr, ErrorCode::MissingChamber, "no chamber with pattern " + p.str());
    out.push_back(c->representative);
  }
  return out;
}

/// Real elements t_i, t_i strictly inside the chamber where only chi_i is
/// negative, with sum t_i = 0. Solving <c_j, t_i> = 1 for all j != i gives
/// <c_i, t_i> = -k (the functionals sum to zero), and sum_i t_i is
/// orthogonal to every c_j, hence zero.
inline std::vector<Eigen::VectorXd> zero_sum_chamber_elements(const ChamberArrangement& arr,
                                                              double cutoff = kDegenerateCutoff) {
  property_c_witnesses(arr);
  const auto& c = arr.hyperplanes;
  const int n = static_cast<int>(c.rows());
  const int k = static_cast<int>(c.cols());
  std::vector<Eigen::VectorXd> ts;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd sys(k, k);
    for (int j = 0, r = 0; j < n; ++j)
      if (j != i) sys.row(r++) = c.row(j);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
    require(lu.isInvertible(), ErrorCode::Infeasible, "functionals are not in general position");
    Eigen::VectorXd t = lu.solve(Eigen::VectorXd::Ones(k));
    Eigen::VectorXd vals = c * t;
    for (int j = 0; j < n; ++j) {
      bool inside = j == i ? vals[j] < -cutoff : vals[j] > cutoff;
      require(inside, ErrorCode::Infeasible, "zero-sum element left its chamber");
    }
    sum += t;
    ts.push_back(t);
  }
  require(sum.norm() < 1e-9, ErrorCode::Infeasible, "chamber elements do not sum to zero");
  return ts;
}

inline Json to_json(const ChamberArrangement& arr) {
  Json chambers = Json::array();
  for (const auto& c : arr.chambers) chambers.push_back(Json{{"pattern", c.pattern.str()}, {"representative", c.representative}});
  return Json{{"chambers", chambers}};
}

}  // namespace cartanlab

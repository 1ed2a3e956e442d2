#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "cartanlab/parallel.hpp"
#include "cartanlab/perturbed_action.hpp"
#include "cartanlab/random.hpp"

namespace cartanlab {

struct ExponentOptions {
  std::int64_t steps = 1000000;
  int trials = 16;
  /// Steps discarded before accumulation so the frame aligns with the
  /// Oseledets splitting.
  std::int64_t burn_in = 1000;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// Exponent estimates of alpha(m), sorted descending.
struct ExponentEstimate {
  std::vector<std::int64_t> m;
  std::vector<double> mean;
  std::vector<double> stderr_;
  std::vector<std::vector<double>> per_trial;
  /// Index of the linear functional matched to each sorted estimate.
  std::vector<int> functional;
  double sum() const { return std::accumulate(mean.begin(), mean.end(), 0.0); }
};

/// Modified Gram-Schmidt in place; returns the diagonal of R.
template <int Dim>
Vec<Dim> gram_schmidt(Mat<Dim>& q) {
  Vec<Dim> r;
  for (int j = 0; j < Dim; ++j) {
    for (int i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
    r[j] = q.col(j).norm();
    require(std::isfinite(r[j]) && r[j] > 0.0, ErrorCode::DegenerateQR, "QR lost rank along the orbit");
    q.col(j) /= r[j];
  }
  return r;
}

/// Benettin estimate on one orbit from x: (1/T) sum log |R_ii| with QR every step.
template <int Dim>
std::vector<double> orbit_exponents(const PerturbedAction<Dim>& alpha, const std::vector<Letter>& word, Vec<Dim> x,
                                    std::int64_t steps, std::int64_t burn_in) {
  Mat<Dim> q = Mat<Dim>::Identity();
  for (std::int64_t t = 0; t < burn_in; ++t) {
    auto s = alpha.eval_with_jacobian(word, x);
    x = s.point;
    q = s.jacobian * q;
    gram_schmidt(q);
  }
  std::array<double, Dim> acc{};
  for (std::int64_t t = 0; t < steps; ++t) {
    auto s = alpha.eval_with_jacobian(word, x);
    x = s.point;
    q = s.jacobian * q;
    Vec<Dim> r = gram_schmidt(q);
    for (int i = 0; i < Dim; ++i) acc[i] += std::log(r[i]);
  }
  std::vector<double> out(Dim);
  for (int i = 0; i < Dim; ++i) out[i] = acc[i] / static_cast<double>(steps);
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

/// Mean and standard error over R trials; trial r starts at a point drawn by
/// alpha's measure sampler from sub-seed (seed, stream, r).
template <int Dim>
ExponentEstimate estimate_exponents(const PerturbedAction<Dim>& alpha, const std::vector<std::int64_t>& m,
                                    const ExponentOptions& opt) {
  require(opt.steps > 0 && opt.trials > 0 && opt.burn_in >= 0, ErrorCode::InvalidInput, "steps and trials must be positive");
  auto word = alpha.word(m);
  ExponentEstimate est;
  est.m = m;
  est.per_trial.resize(opt.trials);
  parallel_for(static_cast<std::size_t>(opt.trials), [&](std::size_t r) {
    Rng rng(sub_seed(opt.seed, opt.stream, r));
    Vec<Dim> u;
    for (int i = 0; i < Dim; ++i) u[i] = rng.uniform();
    est.per_trial[r] = orbit_exponents(alpha, word, alpha.sample_from_uniform(u), opt.steps, opt.burn_in);
  });
  est.mean.assign(Dim, 0.0);
  est.stderr_.assign(Dim, 0.0);
  for (int i = 0; i < Dim; ++i) {
    double s = 0.0;
    for (const auto& tr : est.per_trial) s += tr[i];
    est.mean[i] = s / opt.trials;
    if (opt.trials > 1) {
      double v = 0.0;
      for (const auto& tr : est.per_trial) v += (tr[i] - est.mean[i]) * (tr[i] - est.mean[i]);
      est.stderr_[i] = std::sqrt(v / (opt.trials - 1) / opt.trials);
    }
  }
  for (int i = 0; i + 1 < Dim; ++i)
    require(est.mean[i] - est.mean[i + 1] > 1e-9, ErrorCode::DegenerateQR, "estimated exponents collide");
  if (alpha.base()) {
    Eigen::VectorXd mv(m.size());
    for (std::size_t j = 0; j < m.size(); ++j) mv[j] = static_cast<double>(m[j]);
    Eigen::VectorXd lin = alpha.base()->spectrum().values(mv);
    est.functional.resize(Dim);
    std::iota(est.functional.begin(), est.functional.end(), 0);
    std::stable_sort(est.functional.begin(), est.functional.end(), [&](int a, int b) { return lin[a] > lin[b]; });
  }
  return est;
}

/// Estimate for functional i (0-based), via the descending-order matching.
inline double estimate_for_functional(const ExponentEstimate& e, int i, double* err = nullptr) {
  for (std::size_t r = 0; r < e.functional.size(); ++r)
    if (e.functional[r] == i) {
      if (err) *err = e.stderr_[r];
      return e.mean[r];
    }
  throw LabError(ErrorCode::InvalidInput, "no functional matching for this estimate");
}

struct PesinReport {
  double positive_sum = 0.0;
  double negative_sum_abs = 0.0;
  double linear_positive_sum = 0.0;
  double linear_negative_sum_abs = 0.0;
  /// max_i |log|rho_i(alpha0(m))||, the entropy lower bound for alpha0(m).
  double max_abs_log_eigenvalue = 0.0;
  double sum_gap() const { return std::abs(positive_sum - negative_sum_abs); }
  bool dominates() const {
    return positive_sum >= max_abs_log_eigenvalue - 1e-12 && negative_sum_abs >= max_abs_log_eigenvalue - 1e-12;
  }
};

inline PesinReport pesin_sums(const std::vector<double>& exponents, const LyapunovSpectrum& spectrum,
                              const std::vector<std::int64_t>& m) {
  PesinReport p;
  for (double e : exponents) (e > 0 ? p.positive_sum : p.negative_sum_abs) += std::abs(e);
  Eigen::VectorXd mv(m.size());
  for (std::size_t j = 0; j < m.size(); ++j) mv[j] = static_cast<double>(m[j]);
  Eigen::VectorXd lin = spectrum.values(mv);
  for (Eigen::Index i = 0; i < lin.size(); ++i) {
    (lin[i] > 0 ? p.linear_positive_sum : p.linear_negative_sum_abs) += std::abs(lin[i]);
    p.max_abs_log_eigenvalue = std::max(p.max_abs_log_eigenvalue, std::abs(lin[i]));
  }
  return p;
}

}  // namespace cartanlab

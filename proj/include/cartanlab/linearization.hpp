#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cartanlab/parallel.hpp"
#include "cartanlab/semiconjugacy.hpp"
#include "cartanlab/stable_leaf.hpp"

namespace cartanlab {

struct DensityOptions {
  /// Required geometric tail bound on the truncated product.
  double tail_tol = 1e-10;
  int min_cutoff = 2;
  int max_cutoff = 60;
  /// Extra factors kept beyond the chosen cutoff for stability checks.
  int extra = 10;
  /// Once f^j z is this close to f^j x it is snapped to the stable line
  /// through f^j x, so rounding in unstable directions cannot grow.
  double projection_radius = 1e-6;
  /// Trailing factors that feed the tail envelope.
  int window = 4;
};

/// Leafwise density rho_x and chart H_x on a traced leaf.
template <int Dim>
struct LinearizationChart {
  Leaf<Dim> leaf;
  std::vector<double> rho;
  std::vector<double> H;
  int cutoff = 0;
  double tail_bound = 0.0;
  /// Geometric mean of the stable expansion along the orbit of the center.
  double rate = 0.0;
  /// ||Df(x) v(x)|| at the center.
  double center_expansion = 1.0;
  /// log(J(z_j)/J(x_j)) for every sample, j < cutoff + extra.
  std::vector<std::vector<double>> log_ratios;

  const Vec<Dim>& center() const { return leaf.origin(); }

  /// H at arclength s by cubic Hermite interpolation with H' = rho.
  double H_at(double s) const {
    auto [i, t] = leaf.cell(s);
    double h = leaf.ds;
    double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t), h01 = t * t * (3 - 2 * t),
           h11 = t * t * (t - 1);
    return h00 * H[i] + h01 * H[i + 1] + h * (h10 * rho[i] + h11 * rho[i + 1]);
  }

  /// s with H_at(s) = u. H is increasing since rho > 0.
  double inverse(double u) const {
    auto it = std::lower_bound(H.begin(), H.end(), u);
    std::size_t i = std::clamp<std::size_t>(static_cast<std::size_t>(it - H.begin()), 1, H.size() - 1) - 1;
    double s = leaf.arclength(i) + leaf.ds * (u - H[i]) / (H[i + 1] - H[i]);
    for (int k = 0; k < 30; ++k) {
      auto [c, t] = leaf.cell(s);
      double slope = (1 - t) * rho[c] + t * rho[c + 1];
      double step = (u - H_at(s)) / slope;
      s = std::clamp(s + step, leaf.min_s(), leaf.max_s());
      if (std::abs(step) < 1e-16) break;
    }
    return s;
  }
};

namespace detail {

/// log(J(z_j) / J(x_j)) for j < count along a forward orbit of z shadowing
/// the frame of x.
template <int Dim>
std::vector<double> log_ratios(const StableLineField<Dim>& field, const OrbitFrame<Dim>& fx, const Vec<Dim>& z, int count,
                               double projection_radius) {
  std::vector<Vec<Dim>> pts;
  std::vector<Mat<Dim>> jac;
  const int total = count + field.pullback();
  pts.reserve(total + 1);
  jac.reserve(total);
  Vec<Dim> zj = fx.points[0] + wrap_displacement<Dim>(z - fx.points[0]);
  for (int j = 0; j < total; ++j) {
    if (j <= fx.length) {
      Vec<Dim> d = wrap_displacement<Dim>(zj - fx.points[j]);
      if (d.norm() < projection_radius) d = d.dot(fx.directions[j]) * fx.directions[j];
      zj = fx.points[j] + d;
    }
    pts.push_back(zj);
    auto s = field.step(zj);
    jac.push_back(s.jacobian);
    zj = s.point;
  }
  pts.push_back(zj);
  auto fz = field.pull_back(std::move(pts), jac, count);
  std::vector<double> out(count);
  for (int j = 0; j < count; ++j) out[j] = std::log(fz.expansion[j]) - std::log(fx.expansion[j]);
  return out;
}

/// Cumulative 4th-order quadrature of uniformly spaced values, zero at `origin`.
inline std::vector<double> cumulative_integral(const std::vector<double>& f, double h, std::size_t origin) {
  const std::size_t n = f.size();
  require(n >= 4, ErrorCode::InvalidInput, "quadrature needs at least 4 samples");
  std::vector<double> cell(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (i == 0) cell[i] = h / 24.0 * (9 * f[0] + 19 * f[1] - 5 * f[2] + f[3]);
    else if (i == n - 2) cell[i] = h / 24.0 * (f[n - 4] - 5 * f[n - 3] + 19 * f[n - 2] + 9 * f[n - 1]);
    else cell[i] = h / 24.0 * (-f[i - 1] + 13 * f[i] + 13 * f[i + 1] - f[i + 2]);
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t i = origin; i + 1 < n; ++i) out[i + 1] = out[i] + cell[i];
  for (std::size_t i = origin; i-- > 0;) out[i] = out[i + 1] - cell[i];
  return out;
}

}  // namespace detail

/// rho with a different cutoff n (n <= cutoff + extra), from the stored factors.
template <int Dim>
std::vector<double> density_with_cutoff(const LinearizationChart<Dim>& c, int n) {
  std::vector<double> rho(c.log_ratios.size());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    require(n <= static_cast<int>(c.log_ratios[i].size()), ErrorCode::InvalidInput, "cutoff beyond stored factors");
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += c.log_ratios[i][j];
    rho[i] = static_cast<int>(i) == c.leaf.center ? 1.0 : std::exp(s);
  }
  return rho;
}

/// rho_x(z) = prod_{j<N} J(f^j z) / J(f^j x) on every leaf sample, where
/// J(y) = ||Df(y) v(y)|| for the unit stable vector v. The cutoff N is the
/// smallest one (shared by the whole leaf) whose geometric tail estimate
/// 2 q / (1 - q) max_{N-w <= j < N} |r_j - 1| q^{N-1-j} is below tail_tol,
/// q being the measured contraction rate. The chart H_x is the signed integral of rho_x.
template <int Dim>
LinearizationChart<Dim> linearization_chart(const StableLineField<Dim>& field, Leaf<Dim> leaf, const DensityOptions& opt = {}) {
  require(opt.min_cutoff >= 1 && opt.max_cutoff >= opt.min_cutoff && opt.extra >= 0, ErrorCode::InvalidInput,
          "bad product cutoff range");
  LinearizationChart<Dim> c;
  const int count = opt.max_cutoff + opt.extra;
  auto fx = field.frame(leaf.origin(), count);
  double mean_log = 0.0;
  for (int j = 0; j < count; ++j) mean_log += std::log(fx.expansion[j]);
  c.rate = std::exp(mean_log / count);
  c.center_expansion = fx.expansion[0];
  require(c.rate < 1.0, ErrorCode::TailNotBounded, "measured stable rate " + std::to_string(c.rate) + " is not < 1");

  c.log_ratios.assign(leaf.size(), {});
  parallel_for(leaf.size(), [&](std::size_t i) {
    if (static_cast<int>(i) == leaf.center) c.log_ratios[i].assign(count, 0.0);
    else c.log_ratios[i] = detail::log_ratios(field, fx, leaf.points[i], count, opt.projection_radius);
  });

  // A single factor can sit near 1 by accident, so the envelope is the
  // largest of the last few factors carried forward at rate q.
  const double factor = 2.0 * c.rate / (1.0 - c.rate);
  auto tail_at = [&](int n) {
    double t = 0.0;
    for (const auto& lr : c.log_ratios)
      for (int j = std::max(0, n - opt.window); j < n; ++j)
        t = std::max(t, factor * std::abs(std::expm1(lr[j])) * std::pow(c.rate, n - 1 - j));
    return t;
  };
  int n = opt.min_cutoff;
  while (n < opt.max_cutoff && tail_at(n) >= opt.tail_tol) ++n;
  c.tail_bound = tail_at(n);
  require(c.tail_bound < opt.tail_tol, ErrorCode::TailNotBounded,
          "tail bound " + std::to_string(c.tail_bound) + " above tolerance at cutoff " + std::to_string(n));
  c.cutoff = n;
  c.leaf = std::move(leaf);
  c.rho = density_with_cutoff(c, n);
  for (double r : c.rho) require(r > 0.0 && std::isfinite(r), ErrorCode::NonMonotoneChart, "density is not positive");
  c.H = detail::cumulative_integral(c.rho, c.leaf.ds, c.leaf.center);
  return c;
}

struct CutoffStability {
  int cutoff = 0;
  int extended = 0;
  double max_rho_change = 0.0;
  double max_H_change = 0.0;
  /// Allowed H change: tail bound times leaf radius plus rounding.
  double allowed_H_change = 0.0;
  bool ok() const { return max_H_change <= allowed_H_change; }
};

/// Compares the chart at its cutoff N against cutoff N + extra.
template <int Dim>
CutoffStability cutoff_stability(const LinearizationChart<Dim>& c, int extra = 10) {
  CutoffStability out;
  out.cutoff = c.cutoff;
  out.extended = c.cutoff + extra;
  auto rho = density_with_cutoff(c, out.extended);
  auto H = detail::cumulative_integral(rho, c.leaf.ds, c.leaf.center);
  double radius = std::max(std::abs(c.leaf.min_s()), c.leaf.max_s());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    out.max_rho_change = std::max(out.max_rho_change, std::abs(rho[i] - c.rho[i]));
    out.max_H_change = std::max(out.max_H_change, std::abs(H[i] - c.H[i]));
  }
  out.allowed_H_change = c.tail_bound * radius + 64 * std::numeric_limits<double>::epsilon() * radius;
  return out;
}

struct ChartEquivariance {
  double residual = 0.0;
  /// Largest distance from f(y) to the traced leaf of f(x).
  double leaf_distance = 0.0;
  double sigma = 1.0;
  double expansion = 1.0;
  std::size_t checked = 0;
};

/// sup_y |H_{fx}(f y) - sigma J(x) H_x(y)| over the samples of chart_x whose
/// images land inside the leaf of chart_fx; sigma = +-1 accounts for the
/// orientation of the two leaves.
template <int Dim>
ChartEquivariance chart_equivariance(const StableLineField<Dim>& field, const LinearizationChart<Dim>& cx,
                                     const LinearizationChart<Dim>& cfx) {
  ChartEquivariance out;
  auto s0 = field.step(cx.center());
  out.sigma = (s0.jacobian * cx.leaf.tangents[cx.leaf.center]).dot(cfx.leaf.tangents[cfx.leaf.center]) >= 0 ? 1.0 : -1.0;
  out.expansion = cx.center_expansion;
  std::vector<double> res(cx.leaf.size(), 0.0), dist(cx.leaf.size(), 0.0);
  std::vector<char> used(cx.leaf.size(), 0);
  parallel_for(cx.leaf.size(), [&](std::size_t i) {
    Vec<Dim> fy = field.step(cx.leaf.points[i]).point;
    double d = 0.0;
    double s = cfx.leaf.locate(fy, &d);
    if (s <= cfx.leaf.min_s() || s >= cfx.leaf.max_s()) return;
    used[i] = 1;
    dist[i] = d;
    res[i] = std::abs(cfx.H_at(s) - out.sigma * out.expansion * cx.H[i]);
  });
  for (std::size_t i = 0; i < res.size(); ++i)
    if (used[i]) {
      ++out.checked;
      out.residual = std::max(out.residual, res[i]);
      out.leaf_distance = std::max(out.leaf_distance, dist[i]);
    }
  return out;
}

struct AffinityReport {
  double max_second_difference = 0.0;
  double slope = 1.0;
  /// prod_{j<N} J(f^j x) / J(f^j y) = 1 / rho_x(y).
  double product_slope = 1.0;
  std::size_t grid_points = 0;
  double slope_error() const { return std::abs(slope - product_slope); }
};

/// H_y o H_x^{-1} sampled on a grid of spacing `spacing` in the H_x
/// parameter, where y is sample `iy` of chart_x's leaf and chart_y is a chart
/// traced from y. Reports the largest second divided difference and the
/// fitted slope against the product formula.
template <int Dim>
AffinityReport affinity_check(const LinearizationChart<Dim>& cx, std::size_t iy, const LinearizationChart<Dim>& cy,
                              double spacing = 0.01) {
  for (const auto* c : {&cx, &cy})
    for (std::size_t i = 0; i + 1 < c->H.size(); ++i)
      require(c->H[i + 1] > c->H[i], ErrorCode::NonMonotoneChart, "chart is not strictly increasing");
  AffinityReport out;
  out.product_slope = 1.0 / cx.rho.at(iy);
  const double sy = cx.leaf.arclength(iy);
  const double margin = 2.0 * cx.leaf.ds;
  // cy's leaf starts at y and may be oriented either way along cx's leaf.
  double sign = cy.leaf.tangents[cy.leaf.center].dot(cx.leaf.tangents[iy]) >= 0 ? 1.0 : -1.0;
  double lo = std::max(cx.leaf.min_s(), sy + std::min(sign * cy.leaf.min_s(), sign * cy.leaf.max_s())) + margin;
  double hi = std::min(cx.leaf.max_s(), sy + std::max(sign * cy.leaf.min_s(), sign * cy.leaf.max_s())) - margin;
  require(hi > lo, ErrorCode::InvalidInput, "charts do not overlap");
  double u0 = cx.H_at(lo), u1 = cx.H_at(hi);
  auto count = static_cast<std::size_t>(std::floor((u1 - u0) / spacing)) + 1;
  require(count >= 3, ErrorCode::InvalidInput, "overlap too short for second differences");
  std::vector<double> g(count);
  parallel_for(count, [&](std::size_t k) {
    double s = cx.inverse(u0 + spacing * static_cast<double>(k));
    g[k] = sign * cy.H_at(cy.leaf.locate(cx.leaf.position(s)));
  });
  for (std::size_t k = 1; k + 1 < count; ++k)
    out.max_second_difference =
        std::max(out.max_second_difference, std::abs(g[k + 1] - 2 * g[k] + g[k - 1]) / (spacing * spacing));
  out.slope = (g[count - 1] - g[0]) / (spacing * static_cast<double>(count - 1));
  out.grid_points = count;
  return out;
}

struct ComparabilityReport {
  /// max over pairs of max(r, 1/r), r = ||D alpha(t) v_x|| / ||D alpha(t) v_y||.
  double max_ratio = 1.0;
  /// Same with t replaced by 2t.
  double max_ratio_doubled = 1.0;
  /// Range of ||D alpha(t) v|| / exp(chi(t)) over the sampled points.
  double min_normalized = 1.0;
  double max_normalized = 1.0;
  bool cocycle_bound_holds() const { return max_ratio_doubled <= max_ratio * max_ratio * (1.0 + 1e-9); }
};

/// Stable-direction derivative norms of alpha(t) for t = power * m at pairs
/// (x, y) with y on the leaf of x; chi(m) is the contracting Lyapunov value
/// of the linear part.
template <int Dim>
ComparabilityReport derivative_comparability(const StableLineField<Dim>& field, const std::vector<Leaf<Dim>>& leaves,
                                             int power = 1) {
  require(power >= 1, ErrorCode::InvalidInput, "power must be positive");
  const double chi = std::log(std::abs(field.linear_eigenvalue()));
  auto norm_of = [&](const Vec<Dim>& x, int p) {
    auto f = field.frame(x, p);
    double logn = 0.0;
    for (int j = 0; j < p; ++j) logn += std::log(f.expansion[j]);
    return logn;
  };
  ComparabilityReport out;
  out.min_normalized = std::numeric_limits<double>::infinity();
  out.max_normalized = 0.0;
  for (const auto& leaf : leaves) {
    std::vector<double> l1(leaf.size()), l2(leaf.size());
    parallel_for(leaf.size(), [&](std::size_t i) {
      l1[i] = norm_of(leaf.points[i], power);
      l2[i] = norm_of(leaf.points[i], 2 * power);
    });
    const std::size_t c = leaf.center;
    for (std::size_t i = 0; i < leaf.size(); ++i) {
      out.max_ratio = std::max(out.max_ratio, std::exp(std::abs(l1[i] - l1[c])));
      out.max_ratio_doubled = std::max(out.max_ratio_doubled, std::exp(std::abs(l2[i] - l2[c])));
      double nv = std::exp(l1[i] - power * chi);
      out.min_normalized = std::min(out.min_normalized, nv);
      out.max_normalized = std::max(out.max_normalized, nv);
    }
  }
  return out;
}

/// Largest distance from h(y), y on the leaf, to the stable line of A through
/// h(x) (x the leaf center).
template <int Dim>
double leaf_line_distance(const SemiconjugacyField<Dim>& h, const Leaf<Dim>& leaf, const Vec<Dim>& stable_direction) {
  Vec<Dim> e = stable_direction.normalized();
  Vec<Dim> hx = h.h_lift(leaf.origin());
  double worst = 0.0;
  for (const auto& y : leaf.points) {
    Vec<Dim> d = h.h_lift(y) - hx;
    worst = std::max(worst, (d - d.dot(e) * e).norm());
  }
  return worst;
}

}  // namespace cartanlab

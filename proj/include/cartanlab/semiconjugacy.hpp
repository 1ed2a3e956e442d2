#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "cartanlab/grid_field.hpp"
#include "cartanlab/parallel.hpp"
#include "cartanlab/perturbed_action.hpp"
#include "cartanlab/random.hpp"

namespace cartanlab {

struct FranksOptions {
  int grid = 64;
  double tol = 1e-6;
  Interpolation interpolation = Interpolation::Cubic;
  int max_iterations = 400;
  std::size_t test_points = 10007;
};

/// h = id + u on a periodic grid, solving A o h = h o f for one generator.
template <int Dim>
struct SemiconjugacyField {
  VectorGridField<Dim> u;
  int generator = 0;
  Mat<Dim> target = Mat<Dim>::Identity();
  double residual = 0.0;
  int iterations = 0;
  double contraction_rate = 0.0;
  /// Successive-iterate sup differences and off-grid residuals per iteration.
  std::vector<double> differences;
  std::vector<double> residuals;

  Vec<Dim> correction(const Vec<Dim>& x) const { return u.sample(x); }
  /// h(x) on the lift through x.
  Vec<Dim> h_lift(const Vec<Dim>& x) const { return x + u.sample(x); }
  TorusPoint<Dim> h(const TorusPoint<Dim>& x) const { return TorusPoint<Dim>::reduce(h_lift(x.coords())); }

  static SemiconjugacyField identity(int n, Interpolation interp = Interpolation::Cubic) {
    SemiconjugacyField f;
    f.u = VectorGridField<Dim>(n, interp);
    return f;
  }
};

namespace detail {

/// Test set for off-grid certification: low-discrepancy points with their
/// images and the displacement p = F(x) - A x.
template <int Dim>
struct ForwardSamples {
  std::vector<Vec<Dim>> x, fx, p;
};

template <int Dim>
ForwardSamples<Dim> forward_samples(const PerturbedAction<Dim>& alpha, int gen, std::size_t count) {
  KroneckerSequence seq(Dim);
  ForwardSamples<Dim> s;
  s.x.resize(count);
  s.fx.resize(count);
  s.p.resize(count);
  const Mat<Dim>& a = alpha.linear_matrix(gen);
  parallel_for(count, [&](std::size_t i) {
    Vec<Dim> x;
    for (int d = 0; d < Dim; ++d) x[d] = seq.coord(i, d);
    Vec<Dim> fx = alpha.generator_lift(gen, 1, x);
    s.x[i] = x;
    s.fx[i] = fx;
    s.p[i] = fx - a * x;
  });
  return s;
}

template <int Dim>
double equivariance_residual(const VectorGridField<Dim>& u, const Mat<Dim>& a, const ForwardSamples<Dim>& s) {
  std::vector<double> r(s.x.size());
  parallel_for(s.x.size(), [&](std::size_t i) { r[i] = (a * u.sample(s.x[i]) - s.p[i] - u.sample(s.fx[i])).norm(); });
  return r.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
}

}  // namespace detail

/// Franks fixed-point solve of A o h = h o f, f = generator `gen` of alpha and
/// A its linear part. In the eigenbasis of A the correction u splits into
/// scalar coordinates w_i, each solved by its own contraction:
///   |lambda_i| > 1:  w_i(x) <- (w_i(f x) + p_i(x)) / lambda_i
///   |lambda_i| < 1:  w_i(x) <- lambda_i w_i(f^{-1} x) - p_i(f^{-1} x)
/// with p = f - A on the lift. Iterates are double-buffered. Converged when
/// the sup change is <= tol/10 and below a tenth of the off-grid residual,
/// and that residual is < tol.
template <int Dim>
SemiconjugacyField<Dim> solve_franks(const PerturbedAction<Dim>& alpha, int gen, const FranksOptions& opt,
                                     const std::function<Vec<Dim>(const Vec<Dim>&)>& initial = {}) {
  require(gen >= 0 && gen < alpha.rank(), ErrorCode::InvalidInput, "generator index out of range");
  require(opt.tol > 0.0, ErrorCode::InvalidInput, "tolerance must be positive");
  const ToralAutomorphism& a_int = alpha.linear_generator(gen);
  Eigenstructure es;
  try {
    es = eigenstructure(a_int);
  } catch (const LabError&) {
    throw LabError(ErrorCode::NoContraction, "target automorphism lacks a real hyperbolic splitting");
  }
  for (double l : es.values)
    require(std::abs(std::abs(l) - 1.0) > 1e-9, ErrorCode::NoContraction, "target automorphism is not hyperbolic");

  const Mat<Dim>& a = alpha.linear_matrix(gen);
  Mat<Dim> basis = es.vectors;
  Mat<Dim> dual = basis.inverse();
  Vec<Dim> lambda;
  for (int i = 0; i < Dim; ++i) lambda[i] = es.values[i];

  SemiconjugacyField<Dim> out;
  out.generator = gen;
  out.target = a;
  VectorGridField<Dim> w(opt.grid, opt.interpolation);
  const std::size_t nodes = w.node_count();

  // Forward and backward images of every node, with p in eigencoordinates.
  std::vector<Vec<Dim>> fwd(nodes), bwd(nodes), pf(nodes), pb(nodes);
  parallel_for(nodes, [&](std::size_t g) {
    Vec<Dim> x = w.node_point(g);
    Vec<Dim> fx = alpha.generator_lift(gen, 1, x);
    Vec<Dim> bx = alpha.generator_lift(gen, -1, x);
    fwd[g] = reduce_lift<Dim>(fx);
    bwd[g] = reduce_lift<Dim>(bx);
    pf[g] = dual * (fx - a * x);
    pb[g] = dual * (x - a * bx);
  });
  if (initial)
    for (std::size_t g = 0; g < nodes; ++g) w.set_node(g, dual * initial(w.node_point(g)));

  auto samples = detail::forward_samples(alpha, gen, opt.test_points);
  auto to_u = [&](const VectorGridField<Dim>& coords) {
    VectorGridField<Dim> u(opt.grid, opt.interpolation);
    for (std::size_t g = 0; g < nodes; ++g) u.set_node(g, basis * coords.node(g));
    return u;
  };

  VectorGridField<Dim> next = w;
  std::vector<double> change(nodes);
  int stagnant = 0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    parallel_for(nodes, [&](std::size_t g) {
      Vec<Dim> wf = w.sample(fwd[g]);
      Vec<Dim> wb = w.sample(bwd[g]);
      Vec<Dim> nw;
      for (int i = 0; i < Dim; ++i)
        nw[i] = std::abs(lambda[i]) > 1.0 ? (wf[i] + pf[g][i]) / lambda[i] : lambda[i] * wb[i] - pb[g][i];
      change[g] = (basis * (nw - w.node(g))).norm();
      next.set_node(g, nw);
    });
    std::swap(w, next);
    double diff = *std::max_element(change.begin(), change.end());
    out.u = to_u(w);
    double res = detail::equivariance_residual(out.u, a, samples);
    out.differences.push_back(diff);
    out.residuals.push_back(res);
    out.iterations = it;
    out.residual = res;

    if (it > 1 && diff >= 0.999 * out.differences[it - 2]) ++stagnant;
    else stagnant = 0;
    bool small = diff <= opt.tol / 10.0;
    if (small && res < opt.tol && (diff <= 0.1 * res || diff < 1e-15 || stagnant >= 3)) break;
    if (stagnant >= 5 || it == opt.max_iterations) {
      require(small && res < opt.tol, ErrorCode::StalledResidual,
              "residual " + std::to_string(res) + " stalled above tol " + std::to_string(opt.tol) +
                  "; the interpolation floor suggests a finer grid");
      break;
    }
  }

  // Median successive-difference ratio over the geometric phase.
  std::vector<double> ratios;
  for (std::size_t i = 1; i < out.differences.size(); ++i)
    if (out.differences[i] > 1e-13 && out.differences[i - 1] > 0) ratios.push_back(out.differences[i] / out.differences[i - 1]);
  if (!ratios.empty()) {
    std::nth_element(ratios.begin(), ratios.begin() + ratios.size() / 2, ratios.end());
    out.contraction_rate = ratios[ratios.size() / 2];
  }
  return out;
}

/// sup_x |A_j h(x) - h(f_j x)| for every generator j, on the off-grid test set.
template <int Dim>
std::vector<double> check_equivariance(const SemiconjugacyField<Dim>& h, const PerturbedAction<Dim>& alpha,
                                       std::size_t test_points = 10007) {
  std::vector<double> out;
  for (int j = 0; j < alpha.rank(); ++j) {
    auto s = detail::forward_samples(alpha, j, test_points);
    out.push_back(detail::equivariance_residual(h.u, alpha.linear_matrix(j), s));
  }
  return out;
}

/// Conjugated family: sup distance between the computed h and phi^{-1}.
template <int Dim>
double oracle_distance(const SemiconjugacyField<Dim>& h, const PerturbedAction<Dim>& alpha,
                       std::size_t test_points = 10007) {
  KroneckerSequence seq(Dim);
  std::vector<double> d(test_points);
  parallel_for(test_points, [&](std::size_t i) {
    Vec<Dim> x;
    for (int k = 0; k < Dim; ++k) x[k] = seq.coord(i, k);
    d[i] = wrap_displacement<Dim>(h.h_lift(x) - alpha.oracle_semiconjugacy_lift(x)).norm();
  });
  return d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
}

/// Fraction of the bins of a coarse grid hit by h-images of `samples`
/// low-discrepancy points.
template <int Dim>
double surjectivity_diagnostic(const SemiconjugacyField<Dim>& h, std::size_t samples, int bins_per_axis = 8) {
  std::size_t bins = 1;
  for (int i = 0; i < Dim; ++i) bins *= static_cast<std::size_t>(bins_per_axis);
  if (samples == 0) return 0.0;
  KroneckerSequence seq(Dim);
  std::vector<std::size_t> bin_of(samples);
  parallel_for(samples, [&](std::size_t n) {
    Vec<Dim> x;
    for (int k = 0; k < Dim; ++k) x[k] = seq.coord(n, k);
    Vec<Dim> y = reduce_lift<Dim>(h.h_lift(x));
    std::size_t b = 0;
    for (int k = 0; k < Dim; ++k) b = b * bins_per_axis + std::min<std::size_t>(bins_per_axis - 1, static_cast<std::size_t>(y[k] * bins_per_axis));
    bin_of[n] = b;
  });
  std::vector<char> hit(bins, 0);
  for (auto b : bin_of) hit[b] = 1;
  return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / static_cast<double>(bins);
}

/// Estimated size of h^{-1}(y): Newton on h(x) = y from every node of a
/// seed grid, keep solutions with torus distance < delta, and count clusters
/// under single linkage at radius 2 delta. A diagnostic, not a proof.
template <int Dim>
int fiber_cardinality(const SemiconjugacyField<Dim>& h, const TorusPoint<Dim>& y, double delta, int seeds_per_axis = 12) {
  require(delta > 0.0, ErrorCode::InvalidInput, "delta must be positive");
  std::size_t count = 1;
  for (int i = 0; i < Dim; ++i) count *= static_cast<std::size_t>(seeds_per_axis);
  std::vector<Vec<Dim>> found(count);
  std::vector<char> ok(count, 0);
  parallel_for(count, [&](std::size_t s) {
    Vec<Dim> x;
    std::size_t idx = s;
    for (int a = Dim - 1; a >= 0; --a) {
      x[a] = (static_cast<double>(idx % seeds_per_axis) + 0.5) / seeds_per_axis;
      idx /= seeds_per_axis;
    }
    Vec<Dim> best = x;
    double best_d = torus_distance<Dim>(h.h_lift(x), y.coords());
    for (int it = 0; it < 30 && best_d > 1e-13; ++it) {
      Vec<Dim> g = wrap_displacement<Dim>(h.h_lift(x) - y.coords());
      Mat<Dim> jac = Mat<Dim>::Identity() + h.u.derivative(x);
      Vec<Dim> step = jac.partialPivLu().solve(g);
      if (!step.allFinite()) break;
      double len = step.norm();
      if (len > 0.25) step *= 0.25 / len;
      x = reduce_lift<Dim>(x - step);
      double d = torus_distance<Dim>(h.h_lift(x), y.coords());
      if (d < best_d) {
        best_d = d;
        best = x;
      }
    }
    if (best_d < delta) {
      found[s] = best;
      ok[s] = 1;
    }
  });
  std::vector<Vec<Dim>> pts;
  for (std::size_t s = 0; s < count; ++s)
    if (ok[s]) pts.push_back(found[s]);
  std::vector<std::size_t> parent(pts.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> root = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (torus_distance<Dim>(pts[i], pts[j]) < 2.0 * delta) parent[root(i)] = root(j);
  int clusters = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (root(i) == i) ++clusters;
  return clusters;
}

// Binary layout: "FRNK", u32 version, u32 dim, u32 N, u8 interpolation,
// then N^dim nodes x dim components as little-endian float64, row-major.
inline constexpr std::uint32_t kFieldFormatVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

inline void put_f64(std::string& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, sizeof v);
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

inline std::uint64_t get_le(const std::string& in, std::size_t& pos, int bytes) {
  require(pos + bytes <= in.size(), ErrorCode::Io, "truncated semiconjugacy file");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += bytes;
  return v;
}

}  // namespace detail

template <int Dim>
std::string encode_field(const SemiconjugacyField<Dim>& h) {
  std::string out = "FRNK";
  detail::put_u32(out, kFieldFormatVersion);
  detail::put_u32(out, Dim);
  detail::put_u32(out, static_cast<std::uint32_t>(h.u.resolution()));
  out += static_cast<char>(h.u.interpolation());
  for (double v : h.u.data()) detail::put_f64(out, v);
  return out;
}

template <int Dim>
SemiconjugacyField<Dim> decode_field(const std::string& in) {
  require(in.size() >= 17 && in.compare(0, 4, "FRNK") == 0, ErrorCode::Io, "not a FRNK semiconjugacy file");
  std::size_t pos = 4;
  auto version = detail::get_le(in, pos, 4);
  require(version == kFieldFormatVersion, ErrorCode::Io, "unsupported FRNK version " + std::to_string(version));
  auto dim = detail::get_le(in, pos, 4);
  require(dim == Dim, ErrorCode::DimensionMismatch, "FRNK file has dim " + std::to_string(dim));
  auto n = static_cast<int>(detail::get_le(in, pos, 4));
  auto interp = static_cast<std::uint8_t>(detail::get_le(in, pos, 1));
  require(interp <= 1, ErrorCode::Io, "unknown interpolation tag");
  SemiconjugacyField<Dim> h;
  h.u = VectorGridField<Dim>(n, static_cast<Interpolation>(interp));
  require(in.size() == pos + h.u.data().size() * 8, ErrorCode::Io, "FRNK payload size mismatch");
  for (auto& v : h.u.data()) {
    std::uint64_t bits = detail::get_le(in, pos, 8);
    std::memcpy(&v, &bits, sizeof v);
  }
  return h;
}

template <int Dim>
Json field_sidecar(const SemiconjugacyField<Dim>& h, const FranksOptions& opt, const Json& provenance) {
  Json target = Json::array();
  for (int i = 0; i < Dim; ++i) {
    Json row = Json::array();
    for (int j = 0; j < Dim; ++j) row.push_back(static_cast<std::int64_t>(std::llround(h.target(i, j))));
    target.push_back(row);
  }
  return Json{{"format", "FRNK"},
              {"version", kFieldFormatVersion},
              {"dim", Dim},
              {"grid", h.u.resolution()},
              {"interpolation", to_string(h.u.interpolation())},
              {"generator", h.generator + 1},
              {"target", target},
              {"tol", opt.tol},
              {"residual", h.residual},
              {"iterations", h.iterations},
              {"contraction_rate", h.contraction_rate},
              {"provenance", provenance}};
}

}  // namespace cartanlab

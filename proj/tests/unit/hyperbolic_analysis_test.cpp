#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "fixtures.hpp"

using namespace cartanlab;

namespace {

// Linear exponents of m for the preset, sorted descending, from the closed-form roots.
std::vector<double> linear_exponents(std::int64_t m1, std::int64_t m2) {
  std::vector<double> out;
  for (double r : fixtures::cubic_roots())
    out.push_back(m1 * std::log(std::abs(r)) + m2 * std::log(std::abs(r * r - 2)));
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

double stable_root() {
  for (double r : fixtures::cubic_roots())
    if (std::abs(r) < 1) return r;
  return 0;
}

ExponentOptions short_run(std::uint64_t seed) {
  ExponentOptions o;
  o.steps = 20000;
  o.trials = 2;
  o.seed = seed;
  return o;
}

}  // namespace

TEST(Exponents, GramSchmidtFactorization) {
  Mat<3> a;
  a << 2, 1, 0, 0.5, 3, 1, 1, 0, 1;
  Mat<3> q = a;
  Vec<3> r = gram_schmidt<3>(q);
  EXPECT_LT((q.transpose() * q - Mat<3>::Identity()).norm(), 1e-14);
  EXPECT_NEAR(r.prod(), std::abs(a.determinant()), 1e-12);
  Mat<3> singular = Mat<3>::Zero();
  EXPECT_THROW(gram_schmidt<3>(singular), LabError);
}

TEST(Exponents, LinearActionIsExact) {
  auto alpha = fixtures::conjugated(0.0);
  for (auto m : std::vector<std::vector<std::int64_t>>{{1, 0}, {0, 1}, {1, 1}}) {
    auto e = estimate_exponents(alpha, m, short_run(3));
    auto want = linear_exponents(m[0], m[1]);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(e.mean[i], want[i], 1e-10);
  }
}

TEST(Exponents, PerturbedMatchesLinearValues) {
  auto alpha = fixtures::conjugated(0.05);
  auto e = estimate_exponents(alpha, {1, 1}, short_run(5));
  auto want = linear_exponents(1, 1);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(e.mean[i], want[i], 1e-3);
  EXPECT_NEAR(e.sum(), 0.0, 1e-3);
  // matching by descending order recovers the functional values
  CartanAction a = fixtures::preset_action();
  Eigen::VectorXd lin = a.spectrum().values(Eigen::Vector2d(1, 1));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(estimate_for_functional(e, i), lin[i], 1e-3);
}

TEST(Exponents, SeedDeterminesResultAcrossThreadCounts) {
  auto alpha = fixtures::conjugated(0.05);
  auto o = short_run(9);
  o.steps = 2000;
  o.trials = 3;
  auto a = estimate_exponents(alpha, {1, 0}, o);
  unsigned before = thread_override();
  thread_override() = 3;
  auto b = estimate_exponents(alpha, {1, 0}, o);
  thread_override() = before;
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.stderr_, b.stderr_);
  o.seed = 10;
  EXPECT_NE(estimate_exponents(alpha, {1, 0}, o).mean, a.mean);
}

TEST(Exponents, PesinSums) {
  CartanAction a = fixtures::preset_action();
  auto lin = linear_exponents(1, 0);
  auto p = pesin_sums(lin, a.spectrum(), {1, 0});
  EXPECT_NEAR(p.positive_sum, p.negative_sum_abs, 1e-14);
  EXPECT_NEAR(p.positive_sum, p.linear_positive_sum, 1e-14);
  EXPECT_NEAR(p.max_abs_log_eigenvalue, -lin.back(), 1e-14);
  EXPECT_TRUE(p.dominates());
}

TEST(StableField, MatchesConjugatedOracle) {
  auto alpha = fixtures::conjugated(0.05);
  StableLineField<3> field(alpha, {1, 0});
  Vec<3> es = fixtures::companion_eigenvector(stable_root());
  EXPECT_NEAR(std::abs(field.linear_direction().dot(es)), 1.0, 1e-13);
  TorusDiffeo<3> phi(cyclic_sine_field<3>(), 0.05);
  for (Vec<3> x : {Vec<3>(0.1, 0.2, 0.3), Vec<3>(0.77, 0.05, 0.5)}) {
    Vec<3> pre = phi.invert_fixed_point_lift(x);
    Vec<3> oracle = (Mat<3>::Identity() + 0.05 * cyclic_sine_field<3>().jacobian(pre)) * es;
    auto c = field.certified_direction(x);
    EXPECT_LT(line_angle<3>(c.direction, oracle), 1e-12);
    EXPECT_LT(c.angle_change, 1e-10);
  }
}

TEST(StableField, RejectsElementWithTwoContractingDirections) {
  auto alpha = fixtures::conjugated(0.05);
  // only elements with exactly one contracting direction are accepted
  CartanAction a = fixtures::preset_action();
  for (auto m : std::vector<std::vector<std::int64_t>>{{1, 0}, {0, 1}, {1, 1}, {-1, 0}}) {
    int neg = 0;
    for (int i = 0; i < 3; ++i) neg += a.spectrum().functional(i, to_real(m)) < 0;
    if (neg == 1) {
      EXPECT_NO_THROW(StableLineField<3>(alpha, m));
    } else {
      EXPECT_THROW(StableLineField<3>(alpha, m), LabError);
    }
  }
}

TEST(StableLeaf, LiesOnImageOfLinearLine) {
  auto alpha = fixtures::conjugated(0.05);
  StableLineField<3> field(alpha, {1, 0});
  Vec<3> x(0.31, 0.62, 0.17);
  auto leaf = trace_leaf(field, x, 0.05, 1e-3);
  EXPECT_EQ(leaf.size(), 101u);
  EXPECT_EQ(leaf.flips, 0);
  TorusDiffeo<3> phi(cyclic_sine_field<3>(), 0.05);
  Vec<3> es = fixtures::companion_eigenvector(stable_root());
  Vec<3> base = phi.invert_fixed_point_lift(x);
  double worst = 0.0;
  for (const auto& p : leaf.points) {
    Vec<3> d = phi.invert_fixed_point_lift(p) - base;
    worst = std::max(worst, (d - d.dot(es) * es).norm());
  }
  EXPECT_LT(worst, 1e-12);
  // arclength parametrization
  for (std::size_t i = 0; i + 1 < leaf.size(); ++i) EXPECT_NEAR((leaf.points[i + 1] - leaf.points[i]).norm(), 1e-3, 1e-7);
  double dist = 1.0;
  double s = leaf.locate(leaf.position(0.0123), &dist);
  EXPECT_NEAR(s, 0.0123, 1e-10);
  EXPECT_LT(dist, 1e-12);
}

TEST(Linearization, LinearCaseIsArclength) {
  auto alpha = fixtures::conjugated(0.0);
  StableLineField<3> field(alpha, {1, 0});
  auto leaf = trace_leaf(field, Vec<3>(0.4, 0.4, 0.1), 0.05, 1e-3);
  auto c = linearization_chart(field, leaf);
  for (std::size_t i = 0; i < c.rho.size(); ++i) {
    EXPECT_EQ(c.rho[i], 1.0);
    EXPECT_NEAR(c.H[i], c.leaf.arclength(i), 1e-15);
  }
}

TEST(Linearization, ChartMatchesConjugatedOracle) {
  // Along phi of a linear stable line, the linear parameter t is affine for
  // f, so H_x(y) = |Dphi e_s| at phi^{-1} x times t(y).
  auto alpha = fixtures::conjugated(0.05);
  StableLineField<3> field(alpha, {1, 0});
  Vec<3> x(0.21, 0.83, 0.44);
  auto c = linearization_chart(field, trace_leaf(field, x, 0.05, 1e-3));
  EXPECT_EQ(c.rho[c.leaf.center], 1.0);
  EXPECT_LT(c.tail_bound, 1e-10);
  TorusDiffeo<3> phi(cyclic_sine_field<3>(), 0.05);
  Vec<3> es = fixtures::companion_eigenvector(stable_root());
  Vec<3> base = phi.invert_fixed_point_lift(x);
  Vec<3> tangent = (Mat<3>::Identity() + 0.05 * cyclic_sine_field<3>().jacobian(base)) * es;
  double scale = tangent.norm();
  double sign = tangent.dot(c.leaf.tangents[c.leaf.center]) >= 0 ? 1.0 : -1.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < c.leaf.size(); ++i) {
    double t = (phi.invert_fixed_point_lift(c.leaf.points[i]) - base).dot(es);
    worst = std::max(worst, std::abs(c.H[i] - sign * scale * t));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Linearization, EquivarianceAffinityAndCutoff) {
  auto alpha = fixtures::conjugated(0.05);
  StableLineField<3> field(alpha, {1, 0});
  Vec<3> x(0.55, 0.12, 0.9);
  auto cx = linearization_chart(field, trace_leaf(field, x, 0.1, 1e-3));
  auto cfx = linearization_chart(field, trace_leaf(field, field.step(x).point, 0.1, 1e-3));
  auto eq = chart_equivariance(field, cx, cfx);
  EXPECT_GT(eq.checked, 10u);
  EXPECT_LT(eq.residual, 1e-6);
  EXPECT_LT(eq.leaf_distance, 1e-8);

  std::size_t iy = cx.leaf.center + 30;
  auto cy = linearization_chart(field, trace_leaf(field, Vec<3>(cx.leaf.points[iy]), 0.1, 1e-3));
  auto af = affinity_check(cx, iy, cy, 0.01);
  EXPECT_LT(af.max_second_difference, 1e-5);
  EXPECT_LT(af.slope_error(), 1e-6);
  // slope of H_y o H_x^{-1} is 1/rho_x(y), checked here straight from rho
  EXPECT_NEAR(af.slope, 1.0 / cx.rho[iy], 1e-6);

  auto st = cutoff_stability(cx);
  EXPECT_TRUE(st.ok()) << st.max_H_change << " > " << st.allowed_H_change;
}

TEST(Linearization, DerivativeComparability) {
  auto alpha = fixtures::conjugated(0.05);
  StableLineField<3> field(alpha, {1, 0});
  std::vector<Leaf<3>> leaves{trace_leaf(field, Vec<3>(0.3, 0.3, 0.3), 0.05, 5e-3)};
  auto r = derivative_comparability(field, leaves, 1);
  EXPECT_GE(r.max_ratio, 1.0);
  EXPECT_LT(r.max_ratio, 1.1);
  EXPECT_TRUE(r.cocycle_bound_holds());
  EXPECT_GT(r.min_normalized, 0.5);
  EXPECT_LT(r.max_normalized, 2.0);
}

TEST(LeafInclusion, SemiconjugacyMapsLeafToLinearLine) {
  auto alpha = fixtures::conjugated(0.05);
  FranksOptions o;
  o.grid = 32;
  o.tol = 2e-6;
  o.test_points = 2003;
  auto h = solve_franks(alpha, 0, o);
  StableLineField<3> field(alpha, {1, 0});
  auto leaf = trace_leaf(field, Vec<3>(0.6, 0.2, 0.45), 0.1, 1e-3);
  EXPECT_LT(leaf_line_distance(h, leaf, field.linear_direction()), 10 * h.residual);
  // a leaf of a different element is not mapped onto this stable line
  StableLineField<3> other(alpha, {0, 1});
  auto wrong = trace_leaf(other, Vec<3>(0.6, 0.2, 0.45), 0.1, 1e-3);
  EXPECT_GT(leaf_line_distance(h, wrong, field.linear_direction()), 1e-3);
}

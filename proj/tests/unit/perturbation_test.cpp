#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"

using namespace cartanlab;

TEST(TrigField, DefaultFieldClosedForm) {
  auto v = cyclic_sine_field<3>();
  Vec<3> x(0.1, 0.37, 0.8);
  const double tp = 2 * std::numbers::pi;
  Vec<3> want(std::sin(tp * x[1]), std::sin(tp * x[2]), std::sin(tp * x[0]));
  EXPECT_LT((v.value(x) - want / tp).norm(), 1e-15);
  Mat<3> d = Mat<3>::Zero();
  d(0, 1) = std::cos(tp * x[1]);
  d(1, 2) = std::cos(tp * x[2]);
  d(2, 0) = std::cos(tp * x[0]);
  EXPECT_LT((v.jacobian(x) - d).norm(), 1e-14);
  EXPECT_NEAR(v.derivative_bound(), 1.0, 1e-15);
}

TEST(TrigField, JacobianMatchesFiniteDifference) {
  std::vector<TrigMode<3>> modes(2);
  modes[0].freq = Eigen::Vector3i(1, -2, 0);
  modes[0].cos_coeff = Vec<3>(0.3, 0.0, -0.2);
  modes[0].sin_coeff = Vec<3>(0.1, 0.5, 0.0);
  modes[1].freq = Eigen::Vector3i(0, 1, 3);
  modes[1].cos_coeff = Vec<3>(0.0, 0.2, 0.0);
  modes[1].sin_coeff = Vec<3>(0.4, 0.0, 0.1);
  TrigField<3> f(modes);
  Vec<3> x(0.21, 0.64, 0.05);
  const double h = 1e-6;
  for (int j = 0; j < 3; ++j) {
    Vec<3> e = Vec<3>::Zero();
    e[j] = h;
    Vec<3> fd = (f.value(x + e) - f.value(x - e)) / (2 * h);
    EXPECT_LT((fd - f.jacobian(x).col(j)).norm(), 1e-8);
  }
  // bound dominates a sampled operator norm
  double sampled = 0.0;
  KroneckerSequence seq(3);
  for (int k = 0; k < 2000; ++k) {
    Vec<3> y(seq.coord(k, 0), seq.coord(k, 1), seq.coord(k, 2));
    sampled = std::max(sampled, f.jacobian(y).operatorNorm());
  }
  EXPECT_LE(sampled, f.derivative_bound() + 1e-12);
}

TEST(TrigField, JsonRoundTripAndRejectsUnknownKeys) {
  auto v = cyclic_sine_field<3>();
  auto w = trig_field_from_json<3>(to_json(v));
  Vec<3> x(0.3, 0.2, 0.9);
  EXPECT_EQ(v.value(x), w.value(x));
  Json bad = Json::array({Json{{"freq", {1, 0, 0}}, {"phase", 1.0}}});
  try {
    trig_field_from_json<3>(bad);
    FAIL();
  } catch (const LabError& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
  }
}

TEST(TorusDiffeo, MarginAndInverse) {
  TorusDiffeo<3> phi(cyclic_sine_field<3>(), 0.05);
  EXPECT_NEAR(phi.margin(), 0.95, 1e-15);
  KroneckerSequence seq(3);
  for (int k = 0; k < 200; ++k) {
    Vec<3> y(seq.coord(k, 0), seq.coord(k, 1), seq.coord(k, 2));
    Vec<3> x = phi.invert_lift(y).lift;
    EXPECT_LT((phi.eval_lift(x) - y).norm(), 1e-14);
    // independent inverse by the plain contraction
    EXPECT_LT((x - phi.invert_fixed_point_lift(y)).norm(), 1e-14);
  }
}

TEST(TorusDiffeo, RejectsNonInvertibleEpsilon) {
  try {
    TorusDiffeo<3> phi(cyclic_sine_field<3>(), 1.0);
    FAIL();
  } catch (const LabError& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidInput);
  }
}

TEST(PerturbedAction, ConjugatedGeneratorsCommute) {
  auto alpha = fixtures::conjugated(0.05);
  KroneckerSequence seq(3);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    Vec<3> x(seq.coord(k, 0), seq.coord(k, 1), seq.coord(k, 2));
    Vec<3> ab = alpha.eval(std::vector<Letter>{{0, 1}, {1, 1}}, x);
    Vec<3> ba = alpha.eval(std::vector<Letter>{{1, 1}, {0, 1}}, x);
    worst = std::max(worst, wrap_displacement<3>(ab - ba).norm());
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(PerturbedAction, ConjugatedMatchesDirectComposition) {
  // f = phi A phi^{-1}, evaluated here without the class
  TorusDiffeo<3> phi(cyclic_sine_field<3>(), 0.05);
  auto alpha = fixtures::conjugated(0.05);
  Mat<3> a = fixtures::companion().to_real<3>();
  Vec<3> x(0.12, 0.55, 0.71);
  Vec<3> direct = phi.eval_lift(a * phi.invert_fixed_point_lift(x));
  EXPECT_LT(wrap_displacement<3>(alpha.generator_lift(0, 1, x) - direct).norm(), 1e-13);
  // Jacobian by central differences
  auto st = alpha.generator_step(0, 1, x);
  const double h = 1e-6;
  for (int j = 0; j < 3; ++j) {
    Vec<3> e = Vec<3>::Zero();
    e[j] = h;
    Vec<3> fd = (alpha.generator_lift(0, 1, x + e) - alpha.generator_lift(0, 1, x - e)) / (2 * h);
    EXPECT_LT((fd - st.jacobian.col(j)).norm(), 1e-7);
  }
  EXPECT_GT(st.jacobian.determinant(), 0);
}

TEST(PerturbedAction, InverseLetterUndoesGenerator) {
  auto alpha = fixtures::conjugated(0.05);
  Vec<3> x(0.3, 0.4, 0.5);
  for (int j = 0; j < 2; ++j) {
    Vec<3> y = alpha.generator_lift(j, 1, x);
    EXPECT_LT(wrap_displacement<3>(alpha.generator_lift(j, -1, y) - x).norm(), 1e-13);
  }
}

TEST(PerturbedAction, SingleMapInverse) {
  auto f = PerturbedAction<3>::single_map(ToralAutomorphism(fixtures::companion()), cyclic_sine_field<3>(), 0.05);
  EXPECT_EQ(f.rank(), 1);
  Vec<3> x(0.7, 0.1, 0.25);
  Vec<3> y = f.generator_lift(0, 1, x);
  Vec<3> back = f.generator_lift(0, -1, y);
  EXPECT_LT(wrap_displacement<3>(back - x).norm(), 1e-13);
  // A x + eps v(x) by hand
  Vec<3> hand = fixtures::companion().to_real<3>() * x + 0.05 * cyclic_sine_field<3>().value(x);
  EXPECT_LT((y - hand).norm(), 1e-15);
  EXPECT_THROW(f.oracle_semiconjugacy_lift(x), LabError);
}

TEST(PerturbedAction, WordLengthGuard) {
  auto alpha = fixtures::conjugated(0.05);
  alpha.set_max_word_length(4);
  try {
    alpha.word({3, 2});
    FAIL();
  } catch (const LabError& e) {
    EXPECT_EQ(e.code(), ErrorCode::WordTooLong);
  }
}

TEST(InvariantDensity, TransferIdentityAndMass) {
  auto alpha = fixtures::conjugated(0.05);
  auto d = invariant_density_check(alpha, 50000);
  EXPECT_LT(d.transfer_residual, 1e-12);
  EXPECT_NEAR(d.integral, 1.0, 1e-4);
  // the oracle density is 1/det(I + eps Dv), computed by hand at one point
  TorusDiffeo<3> phi(cyclic_sine_field<3>(), 0.05);
  Vec<3> y(0.2, 0.3, 0.6);
  Vec<3> x = phi.invert_fixed_point_lift(y);
  double g = 1.0 / (Mat<3>::Identity() + 0.05 * cyclic_sine_field<3>().jacobian(x)).determinant();
  EXPECT_NEAR(alpha.oracle_density(y), g, 1e-13);
}

TEST(InvariantDensity, SamplerPushesLebesgueForward) {
  auto alpha = fixtures::conjugated(0.05);
  // E_mu[1/g] = integral of 1 over Lebesgue pulled back, which is 1
  KroneckerSequence seq(3);
  double s = 0.0;
  const int n = 40000;
  for (int k = 0; k < n; ++k) {
    Vec<3> u(seq.coord(k, 0), seq.coord(k, 1), seq.coord(k, 2));
    s += 1.0 / alpha.oracle_density(alpha.sample_from_uniform(u));
  }
  EXPECT_NEAR(s / n, 1.0, 1e-4);
}

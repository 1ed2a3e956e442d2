#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fixtures.hpp"

using namespace cartanlab;

TEST(IntMatrix, DeterminantAndUnimodularInverse) {
  IntMatrix c = fixtures::companion();
  EXPECT_EQ(c.determinant(), 1);
  IntMatrix ci = c.unimodular_inverse();
  EXPECT_EQ(c * ci, IntMatrix::identity(3));
  EXPECT_EQ(ci * c, IntMatrix::identity(3));
  EXPECT_EQ(fixtures::second().determinant(), -1);
}

TEST(IntMatrix, PowerMatchesRepeatedProduct) {
  IntMatrix c = fixtures::companion();
  EXPECT_EQ(c.power(3), c * c * c);
  EXPECT_EQ(c.power(-2), c.unimodular_inverse() * c.unimodular_inverse());
  EXPECT_EQ(c.power(0), IntMatrix::identity(3));
}

TEST(IntMatrix, OverflowIsReported) {
  IntMatrix c = fixtures::companion();
  try {
    c.power(200);
    FAIL() << "expected overflow";
  } catch (const LabError& e) {
    EXPECT_EQ(e.code(), ErrorCode::Overflow);
  }
}

TEST(Polynomial, CompanionCharacteristicPolynomial) {
  // x^3 - 3x - 1, constant term first
  auto p = characteristic_polynomial(fixtures::companion());
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(p[0], -1);
  EXPECT_EQ(p[1], -3);
  EXPECT_EQ(p[2], 0);
  EXPECT_EQ(p[3], 1);
}

TEST(Polynomial, RootsAgainstClosedForm) {
  auto c = characteristic_polynomial(fixtures::companion());
  auto roots = distinct_real_roots(Poly(c.begin(), c.end()));
  ASSERT_TRUE(roots.has_value());
  auto expect = fixtures::cubic_roots();
  std::sort(expect.begin(), expect.end());
  std::vector<double> got = *roots;
  std::sort(got.begin(), got.end());
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(got[i], expect[i], 1e-14);
}

TEST(Polynomial, ComplexRootsDetected) {
  // rotation-like x^2 + 1 has no real roots
  EXPECT_FALSE(distinct_real_roots(Poly{1, 0, 1}).has_value());
  EXPECT_FALSE(is_hyperbolic(IntMatrix{{0, -1}, {1, 0}}));
  EXPECT_TRUE(is_hyperbolic(IntMatrix{{2, 1}, {1, 1}}));
}

TEST(Eigenstructure, ValuesAndVectorsOfCompanion) {
  auto es = eigenstructure(ToralAutomorphism(fixtures::companion()));
  ASSERT_EQ(es.values.size(), 3u);
  EXPECT_TRUE(std::abs(es.values[0]) > std::abs(es.values[1]) && std::abs(es.values[1]) > std::abs(es.values[2]));
  for (int i = 0; i < 3; ++i) {
    Vec<3> oracle = fixtures::companion_eigenvector(es.values[i]);
    Vec<3> v = es.vectors.col(i);
    EXPECT_NEAR(std::abs(v.dot(oracle)), 1.0, 1e-13);
  }
}

TEST(CartanAction, SpectrumOfPreset) {
  CartanAction a = fixtures::preset_action();
  EXPECT_EQ(a.rank(), 2);
  EXPECT_EQ(a.dim(), 3);
  // functional values at (1,0) and (0,1) are log|r| and log|r^2 - 2|
  std::multiset<long long> want10, want01, got10, got01;
  auto key = [](double v) { return std::llround(v * 1e9); };
  for (double r : fixtures::cubic_roots()) {
    want10.insert(key(std::log(std::abs(r))));
    want01.insert(key(std::log(std::abs(r * r - 2))));
  }
  Eigen::VectorXd v10 = a.spectrum().values(Eigen::Vector2d(1, 0));
  Eigen::VectorXd v01 = a.spectrum().values(Eigen::Vector2d(0, 1));
  for (int i = 0; i < 3; ++i) {
    got10.insert(key(v10[i]));
    got01.insert(key(v01[i]));
  }
  EXPECT_EQ(got10, want10);
  EXPECT_EQ(got01, want01);
  EXPECT_NEAR(v10.sum(), 0.0, 1e-13);
  EXPECT_NEAR(v01.sum(), 0.0, 1e-13);
}

TEST(CartanAction, FunctionalsAreLinear) {
  CartanAction a = fixtures::preset_action();
  const auto& s = a.spectrum();
  for (int i = 0; i < 3; ++i) {
    double lhs = s.functional(i, Eigen::Vector2d(2, -3));
    double rhs = 2 * s.functional(i, Eigen::Vector2d(1, 0)) - 3 * s.functional(i, Eigen::Vector2d(0, 1));
    EXPECT_NEAR(lhs, rhs, 1e-13);
    // matches the eigenvalue of the integer element
    EXPECT_NEAR(std::exp(s.functional(i, Eigen::Vector2d(2, -3))), std::abs(a.eigenvalue(i, {2, -3})), 1e-9);
  }
}

TEST(CartanAction, RejectsNonCommutingGenerators) {
  IntMatrix other{{2, 1, 0}, {1, 1, 0}, {0, 0, 1}};
  try {
    build_cartan_action(std::vector<IntMatrix>{fixtures::companion(), other});
    FAIL();
  } catch (const LabError& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonCommuting);
  }
}

TEST(CartanAction, RejectsProportionalFunctionals) {
  // C and C^2 commute but their functionals are proportional
  IntMatrix c = fixtures::companion();
  try {
    build_cartan_action(std::vector<IntMatrix>{c, c * c});
    FAIL();
  } catch (const LabError& e) {
    EXPECT_TRUE(e.code() == ErrorCode::ProportionalExponents || e.code() == ErrorCode::NotCartanEligible);
  }
}

TEST(CartanAction, RejectsWrongSize) {
  try {
    build_cartan_action(std::vector<IntMatrix>{IntMatrix{{2, 1}, {1, 1}}, IntMatrix{{2, 1}, {1, 1}}});
    FAIL();
  } catch (const LabError& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(CartanAction, JsonRoundTrip) {
  CartanAction a = fixtures::preset_action();
  CartanAction b = cartan_action_from_json(to_json(a));
  EXPECT_EQ(b.generators()[0].matrix(), a.generators()[0].matrix());
  EXPECT_EQ(b.generators()[1].matrix(), a.generators()[1].matrix());
  EXPECT_NEAR((b.spectrum().coefficients - a.spectrum().coefficients).norm(), 0.0, 1e-15);
}

TEST(Torus, ExactRationalOrbitIsPeriodic) {
  // rational points are preperiodic; with det = +-1 they are periodic
  ToralAutomorphism c(fixtures::companion());
  RationalPoint x{{1, 2, 3}, 7};
  RationalPoint y = x;
  int period = 0;
  do {
    y = c.apply_exact(y);
    ++period;
  } while (y.num != x.num && period < 1000);
  EXPECT_EQ(y.num, x.num);
  EXPECT_LT(period, 7 * 7 * 7);
}

TEST(Torus, FloatingApplyAgreesWithExact) {
  ToralAutomorphism c(fixtures::companion());
  RationalPoint x{{5, 11, 2}, 13};
  TorusPoint<3> p = TorusPoint<3>::reduce(Vec<3>(5.0 / 13, 11.0 / 13, 2.0 / 13));
  for (int i = 0; i < 5; ++i) {
    x = c.apply_exact(x);
    p = c.apply(p);
  }
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], static_cast<double>(x.num[i]) / 13, 1e-12);
}

TEST(Torus, ReductionAndWrap) {
  auto p = TorusPoint<3>::reduce(Vec<3>(-0.25, 1.5, 3.0));
  EXPECT_DOUBLE_EQ(p[0], 0.75);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
  EXPECT_DOUBLE_EQ(p[2], 0.0);
  Vec<3> d = wrap_displacement<3>(Vec<3>(0.9, -0.8, 0.1));
  EXPECT_NEAR(d[0], -0.1, 1e-15);
  EXPECT_NEAR(d[1], 0.2, 1e-15);
  EXPECT_NEAR(d[2], 0.1, 1e-15);
  EXPECT_THROW(TorusPoint<3>::reduce(Vec<3>(NAN, 0, 0)), LabError);
}

TEST(Random, SubSeedsAreDistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s)
    for (std::uint64_t i = 0; i < 64; ++i) seen.insert(sub_seed(7, s, i));
  EXPECT_EQ(seen.size(), 4u * 64u);
  EXPECT_EQ(sub_seed(7, 1, 2), sub_seed(7, 1, 2));
  Rng a(sub_seed(7, 1, 2)), b(sub_seed(7, 1, 2));
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.uniform(), b.uniform());
}

TEST(Random, KroneckerSequenceFillsCube) {
  KroneckerSequence seq(3);
  int counts[8] = {};
  const int n = 8000;
  for (int k = 0; k < n; ++k) {
    int cell = 0;
    for (int i = 0; i < 3; ++i) cell = 2 * cell + (seq.coord(k, i) >= 0.5);
    ++counts[cell];
  }
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / n, 0.125, 0.01);
}

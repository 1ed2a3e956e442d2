#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"

using namespace cartanlab;

namespace {

FranksOptions small_grid(int n, double tol) {
  FranksOptions o;
  o.grid = n;
  o.tol = tol;
  o.test_points = 3001;
  return o;
}

// sup |h - phi^{-1}| with phi^{-1} from the plain contraction, not Newton.
double distance_to_inverse(const SemiconjugacyField<3>& h, double eps) {
  TorusDiffeo<3> phi(cyclic_sine_field<3>(), eps);
  double worst = 0.0;
  for (int k = 0; k < 500; ++k) {
    Vec<3> x(std::fmod(0.137 * k + 0.01, 1.0), std::fmod(0.291 * k + 0.4, 1.0), std::fmod(0.533 * k + 0.7, 1.0));
    worst = std::max(worst, wrap_displacement<3>(h.h_lift(x) - phi.invert_fixed_point_lift(x)).norm());
  }
  return worst;
}

}  // namespace

TEST(GridField, CubicInterpolationReproducesTrigPolynomial) {
  VectorGridField<3> f(16, Interpolation::Cubic);
  for (std::size_t g = 0; g < f.node_count(); ++g) {
    Vec<3> p = f.node_point(g);
    f.set_node(g, Vec<3>(std::sin(2 * M_PI * p[0]), std::cos(2 * M_PI * p[1]), 0.0));
  }
  Vec<3> x(0.123, 0.456, 0.789);
  Vec<3> v = f.sample(x);
  EXPECT_NEAR(v[0], std::sin(2 * M_PI * x[0]), 1e-3);
  EXPECT_NEAR(v[1], std::cos(2 * M_PI * x[1]), 1e-3);
  // periodic
  EXPECT_LT((f.sample(x + Vec<3>(1, -2, 3)) - v).norm(), 1e-12);
}

TEST(Franks, LinearCaseIsIdentity) {
  auto alpha = fixtures::conjugated(0.0);
  auto h = solve_franks(alpha, 0, small_grid(8, 1e-8));
  EXPECT_EQ(h.u.sup_norm(), 0.0);
  EXPECT_EQ(h.residual, 0.0);
}

TEST(Franks, RecoversInverseConjugacy) {
  auto alpha = fixtures::conjugated(0.05);
  auto h = solve_franks(alpha, 0, small_grid(32, 2e-6));
  EXPECT_LT(h.residual, 2e-6);
  EXPECT_LT(distance_to_inverse(h, 0.05), 5e-6);
  // equivariance also holds for the generator it was not solved against
  auto eq = check_equivariance(h, alpha, 3001);
  EXPECT_LT(eq[1], 2e-5);
  // slowest factor of the split iteration: max(1/|lambda_u|, |lambda_s|)
  double slowest = 0.0;
  for (double r : fixtures::cubic_roots()) slowest = std::max(slowest, std::abs(r) > 1 ? 1 / std::abs(r) : std::abs(r));
  EXPECT_LT(h.contraction_rate, slowest + 0.05);
}

TEST(Franks, ResidualDetectsWrongField) {
  auto alpha = fixtures::conjugated(0.05);
  auto id = SemiconjugacyField<3>::identity(16);
  auto eq = check_equivariance(id, alpha, 3001);
  // |A x - f x| is of order eps * sup|v| ~ 0.05/(2pi) * |A|
  EXPECT_GT(eq[0], 1e-3);
  EXPECT_GT(eq[1], 1e-3);
}

TEST(Franks, StallsWhenTolBelowInterpolationFloor) {
  auto alpha = fixtures::conjugated(0.05);
  auto o = small_grid(8, 1e-10);
  o.max_iterations = 60;
  try {
    solve_franks(alpha, 0, o);
    FAIL();
  } catch (const LabError& e) {
    EXPECT_EQ(e.code(), ErrorCode::StalledResidual);
  }
}

TEST(Franks, SingleMapHasSemiconjugacy) {
  auto f = PerturbedAction<3>::single_map(ToralAutomorphism(fixtures::companion()), cyclic_sine_field<3>(), 0.05);
  // h is only Holder here, so the residual sits on the interpolation floor
  // and must shrink under refinement
  auto coarse = solve_franks(f, 0, small_grid(16, 1e-1));
  auto fine = solve_franks(f, 0, small_grid(32, 1e-1));
  EXPECT_LT(fine.residual, 0.7 * coarse.residual);
  EXPECT_LT(fine.residual, 1e-2);
  EXPECT_EQ(surjectivity_diagnostic(fine, 20000), 1.0);
}

TEST(Franks, SurjectiveAndInjectiveForConjugate) {
  auto alpha = fixtures::conjugated(0.05);
  auto h = solve_franks(alpha, 0, small_grid(24, 1e-5));
  EXPECT_EQ(surjectivity_diagnostic(h, 20000), 1.0);
  for (int t = 0; t < 3; ++t) {
    auto y = TorusPoint<3>::reduce(Vec<3>(0.1 + 0.3 * t, 0.7 - 0.2 * t, 0.33));
    EXPECT_EQ(fiber_cardinality(h, y, 1e-3, 6), 1);
  }
}

TEST(FieldCodec, RoundTripIsBitExact) {
  auto alpha = fixtures::conjugated(0.05);
  auto h = solve_franks(alpha, 0, small_grid(12, 1e-3));
  std::string bytes = encode_field(h);
  EXPECT_EQ(bytes.substr(0, 4), "FRNK");
  EXPECT_EQ(bytes.size(), 17u + 12u * 12u * 12u * 3u * 8u);
  auto back = decode_field<3>(bytes);
  EXPECT_EQ(back.u.data(), h.u.data());
  EXPECT_EQ(back.u.resolution(), 12);
  EXPECT_EQ(encode_field(back), bytes);
}

TEST(FieldCodec, RejectsCorruptInput) {
  auto h = SemiconjugacyField<3>::identity(4);
  std::string bytes = encode_field(h);
  EXPECT_THROW(decode_field<3>("JUNK" + bytes.substr(4)), LabError);
  EXPECT_THROW(decode_field<3>(bytes.substr(0, bytes.size() - 1)), LabError);
  EXPECT_THROW(decode_field<4>(bytes), LabError);
}

TEST(FieldCodec, SidecarDescribesField) {
  auto h = SemiconjugacyField<3>::identity(4);
  h.target = fixtures::companion().to_real<3>();
  Json s = field_sidecar(h, FranksOptions{}, Json{{"note", "x"}});
  EXPECT_EQ(s["grid"], 4);
  EXPECT_EQ(s["dim"], 3);
  EXPECT_EQ(s["target"][2][1], 3);
  EXPECT_EQ(s["format"], "FRNK");
}

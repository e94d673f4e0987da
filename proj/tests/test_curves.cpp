#include <gtest/gtest.h>

#include "support.hpp"

using namespace basinforge;

namespace {

// The example map (z/2 + w^2, w/9) with bounds valid on the half ball.
SequenceSpec example_spec() { return bftest::constant_spec(bftest::example_map(), 0.1, 0.7, 2); }

SequenceSpec linear_spec() {
  return bftest::constant_spec(JetMap2::linear_map(2, Mat2{0.5, 0.0, 0.0, 0.3}), 0.2, 0.6, 2);
}

double sup_on_circle(Sequence& seq, const DiskMap& F, const DiskMap& G, double r) {
  double s = 0.0;
  for (cplx u : detail::circle(r)) s = std::max(s, distance(evaluate(seq, F, u), evaluate(seq, G, u)));
  return s;
}

}  // namespace

TEST(Je1Constants, ClosedFormCases) {
  const auto b = je1_constants(2.0, 0.5, 0.5);
  EXPECT_EQ(b.L, 2);
  EXPECT_LT(std::pow(0.5, b.L), 0.5);
  EXPECT_LT(std::pow(1.0 + b.delta, b.L), 2.0);
  EXPECT_LE(b.delta, std::sqrt(2.0) - 1.0);
  EXPECT_GT(b.delta, std::sqrt(2.0) - 1.0 - 1e-4);
  EXPECT_EQ(je1_constants(2.0, 0.5, 0.01).L, 1);
  EXPECT_EQ(je1_constants(1.0 / 0.5, 0.13 / 0.5, 0.5).L, 2);
  ASSERT_TRUE(b.N_min.has_value());
  const double N = static_cast<double>(*b.N_min);
  // ((1+delta)^{LN+1} - 1)/delta < 2^N, compared in log space.
  const double x = (b.L * N + 1) * std::log1p(b.delta);
  EXPECT_LT(x + std::log1p(-std::exp(-x)) - std::log(b.delta), N * std::log(2.0));
}

TEST(Je1Constants, BudgetInvariantOnGrid) {
  for (double R : {1.05, 1.5, 3.0, 10.0})
    for (double c : {0.05, 0.3, 0.9})
      for (double r : {0.1, 0.5, 0.95}) {
        const auto b = je1_constants(R, c, r, 1.0, 10);
        EXPECT_LT(std::pow(r, b.L), c);
        EXPECT_LT(std::pow(1.0 + b.delta, b.L), R);
        EXPECT_GT(b.delta, 0.0);
      }
}

TEST(Psh, BoundAndChain) {
  EXPECT_NEAR(psh_bound(0.13, 0.5), 0.3397, 1e-4);
  EXPECT_NEAR(psh_bound(0.13, 0.5), std::log(2.0) / std::log(1 / 0.13), 1e-15);
  EXPECT_NEAR(psh_bound(0.5 - 1e-9, 0.5), 1.0, 1e-8);
  EXPECT_NEAR(psh_chain(0.13, 0.5, 100, 10), 0.9 * psh_bound(0.13, 0.5), 1e-15);
  EXPECT_NEAR(psh_chain(0.13, 0.5, 100, 10), 0.3057, 1e-4);
  double prev = 0.0;
  for (double n = 11; n <= 1e6; n *= 1.7) {
    const double v = psh_chain(0.13, 0.5, n, 10);
    EXPECT_GT(v, prev);
    EXPECT_LT(v, psh_bound(0.13, 0.5));
    prev = v;
  }
  // Exact gap: closed form minus chain is (k/n) times the closed form.
  EXPECT_NEAR(psh_bound(0.13, 0.5) - psh_chain(0.13, 0.5, 1e6, 10), 1e-5 * psh_bound(0.13, 0.5), 1e-15);
}

TEST(ExtendDisk, ConstantMapIsFixed) {
  Sequence seq(example_spec());
  const DiskMap F{{0.01, 0.02}, {{0.01, 0.02}}, 1.0, 0};
  const auto [G, rec] = extend_disk(seq, F, 0.5, 1e-3);
  EXPECT_EQ(sup_on_circle(seq, F, G, 0.5), 0.0);
  EXPECT_EQ(rec.pin_value, 0.0);
}

TEST(ExtendDisk, LinearDiskOnGlobalBasinIsUnchanged) {
  Sequence seq(linear_spec());
  const DiskMap F{{}, {{}, {0.05, 0.0}}, 1.0, 0};
  const auto [G, rec] = extend_disk(seq, F, 0.5, 1e-3);
  EXPECT_LE(sup_on_circle(seq, F, G, 0.5), 1e-12);
  EXPECT_GT(G.radius, 1.0);
}

TEST(ExtendDisk, QuadraticDiskIntoExampleBasin) {
  Sequence seq(example_spec());
  const DiskMap F{{}, {{}, {0.3, 0.0}, {0.0, 0.2}}, 1.0, 0};
  const auto [G, rec] = extend_disk(seq, F, 0.5, 1e-3);
  EXPECT_LT(rec.sup_error, 1e-3);
  EXPECT_LT(sup_on_circle(seq, F, G, 0.5), 1e-3);
  EXPECT_LE(rec.pin_value, 1e-12);
  EXPECT_LE(rec.pin_derivative, 1e-12);
  EXPECT_LT(rec.containment, kHalfBall);
  EXPECT_GE(rec.N, 1u);
}

TEST(EntireCurve, ExampleBasinToRadiusFour) {
  Sequence seq(example_spec());
  const Point p{0.01, 0.01}, v{1.0, 0.0};
  const auto res = entire_curve(seq, p, v, 4.0);
  EXPECT_GE(res.map.radius, 4.0);
  EXPECT_EQ(res.samples, 200u);
  EXPECT_EQ(res.members, 200u);
  EXPECT_LE(res.pin_value, 1e-12);
  EXPECT_LE(res.pin_derivative, 1e-10);
  for (const auto& r : res.rounds) EXPECT_LT(r.sup_error, 1e-3);
}

TEST(EntireCurve, ZeroRoundsWhenAlreadyLargeEnough) {
  Sequence seq(linear_spec());
  const auto start = affine_disk(seq, {0.1, 0.0}, {1.0, 0.0});
  const auto res = entire_curve(seq, {0.1, 0.0}, {1.0, 0.0}, start.radius * 0.5);
  EXPECT_TRUE(res.rounds.empty());
  EXPECT_EQ(res.members, res.samples);
}

TEST(EntireCurve, RejectsZeroTangentAndNonMember) {
  Sequence seq(example_spec());
  EXPECT_THROW(entire_curve(seq, {0.0, 0.0}, {0.0, 0.0}, 2.0), std::invalid_argument);
  SequenceSpec esc;
  esc.kind = SequenceKind::fornaess_short;
  esc.C = 0.01;
  esc.D = 0.99;
  Sequence escaping(esc);
  EXPECT_THROW(entire_curve(escaping, {100.0, 0.0}, {1.0, 0.0}, 2.0), PreconditionError);
}

TEST(ExtendBall, OneRoundMatchesExactChart) {
  Sequence seq(example_spec());
  const BallMap U{{}, JetMap2::identity(1), 1.0, 2};
  const auto [G, rec] = extend_ball(seq, U, 0.5, 1e-3);
  double sup = 0.0;
  for (std::size_t i = 0; i < 200; ++i) {
    const Point u = ball_sample(i, 1.0);
    sup = std::max(sup, distance(evaluate(seq, G, u), pull_back_point(seq, 2, u)));
  }
  EXPECT_LE(sup, 1e-2);
  EXPECT_LE(rec.pin_value, 1e-12);
}

TEST(EntireMap, LinearSpecAndOrigin) {
  Sequence seq(linear_spec());
  const auto res = entire_map(seq, {0.0, 0.0}, Mat2::identity(), 1.0);
  EXPECT_LE(evaluate(seq, res.map, {}).norm(), 1e-15);
  EXPECT_GE(res.det, kDetFloor);
  EXPECT_EQ(res.members, res.samples);
}

TEST(CurveJson, DiskRoundTrip) {
  const DiskMap F{{0.1, 0.2}, {{0.1, 0.2}, {cplx(0.3, 0.1), 0.0}}, 1.5, 3};
  const DiskMap G = disk_from_json(nlohmann::json::parse(to_json(F).dump()));
  EXPECT_EQ(to_json(G), to_json(F));
}

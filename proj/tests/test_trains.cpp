#include <gtest/gtest.h>

#include "support.hpp"

using namespace basinforge;

namespace {

void expect_matches_oracle(const std::vector<double>& steps, int k) {
  const TrainPartition part = select_trains(steps, k);
  const auto oracle = bftest::brute_force_trains(steps, k);
  ASSERT_EQ(part.trains.size(), oracle.size());
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    EXPECT_EQ(part.trains[i].p, oracle[i].p) << "train " << i;
    EXPECT_EQ(part.trains[i].q, oracle[i].q) << "train " << i;
    EXPECT_EQ(part.trains[i].end, oracle[i].end) << "train " << i;
    EXPECT_EQ(part.trains[i].closed, oracle[i].closed) << "train " << i;
  }
}

SequenceSpec constant_diag(cplx a, cplx b, double C, double D, int k, std::initializer_list<std::tuple<int, int, int, cplx>> terms) {
  JetMap2 f = JetMap2::linear_map(k, Mat2{a, 0.0, 0.0, b});
  for (auto [comp, i, j, c] : terms) (comp == 0 ? f.first : f.second).at(i, j) = c;
  return bftest::constant_spec(f, C, D, k);
}

}  // namespace

TEST(SelectTrains, ConstantStepClosesFirstTildeIntervalAtTwo) {
  const TrainPartition part = select_trains(std::vector<double>(50, std::log(4.5)), 2);
  ASSERT_EQ(part.trains.size(), 1u);
  EXPECT_EQ(part.trains[0].q, 2u);
  EXPECT_FALSE(part.trains[0].closed);
  EXPECT_EQ(part.trains[0].end, 50u);
}

TEST(SelectTrains, SymmetricSequenceHasOneOpenTrain) {
  const TrainPartition part = select_trains(std::vector<double>(100, 0.0), 2);
  ASSERT_EQ(part.trains.size(), 1u);
  EXPECT_FALSE(part.trains[0].tilde_closed);
  EXPECT_EQ(part.trains[0].q, 100u);
}

TEST(SelectTrains, PeriodicPatternMatchesBruteForce) {
  std::vector<double> steps;
  for (int rep = 0; rep < 40; ++rep) {
    for (int i = 0; i < 3; ++i) steps.push_back(1.6);
    for (int i = 0; i < 20; ++i) steps.push_back(-1.6);
    for (int i = 0; i < 50; ++i) steps.push_back(1.6);
  }
  expect_matches_oracle(steps, 2);
  EXPECT_GE(select_trains(steps, 2).closed_count(), 1u);
}

TEST(SelectTrains, RandomSpecsMatchBruteForceAndSatisfyInequalities) {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto spec = bftest::random_diagonal_spec(seed);
    Sequence seq(spec);
    const auto steps = sigma_steps(seq, 10000);
    expect_matches_oracle(steps, 2);
    const auto rep = check_partition(select_trains(steps, 2), steps, spec.C);
    EXPECT_EQ(rep.violations(), 0u) << (rep.messages.empty() ? "" : rep.messages.front());
  }
}

TEST(SelectTrains, RandomWalksMatchBruteForceForLargerK) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.4, 1.4);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> steps(3000);
    for (auto& s : steps) s = u(rng) + (t % 2 ? 0.05 : -0.05);
    expect_matches_oracle(steps, 2 + t % 3);
  }
}

TEST(SparseCheck, PartialSumsAreIncreasing) {
  std::vector<double> steps;
  for (int rep = 0; rep < 40; ++rep) {
    for (int i = 0; i < 3; ++i) steps.push_back(1.6);
    for (int i = 0; i < 20; ++i) steps.push_back(-1.6);
    for (int i = 0; i < 50; ++i) steps.push_back(1.6);
  }
  const auto rep = sparse_check(select_trains(steps, 2), 0.13, 0.5);
  ASSERT_TRUE(rep.meaningful);
  for (std::size_t i = 1; i < rep.terms.size(); ++i) EXPECT_GT(rep.terms[i].partial_sum, rep.terms[i - 1].partial_sum);
}

TEST(Prepare, RemovableMonomialFixedPoints) {
  Sequence s1(constant_diag(0.3, 0.2, 0.15, 0.35, 2, {{0, 1, 1, 1.0}}));
  const auto p1 = prepare(s1, 2, 200);
  EXPECT_NEAR(std::abs(p1.shears[0].first(1, 1) - 25.0 / 6.0), 0.0, 1e-12);
  Sequence s2(constant_diag(0.3, 0.2, 0.15, 0.35, 2, {{1, 1, 1, 1.0}}));
  const auto p2 = prepare(s2, 2, 200);
  EXPECT_NEAR(std::abs(p2.shears[0].second(1, 1) - (1.0 / 0.2) / (1.0 - 0.3)), 0.0, 1e-12);
  for (double r : p1.residuals) EXPECT_LE(r, 1e-12);
  for (double r : p2.residuals) EXPECT_LE(r, 1e-12);
}

TEST(Prepare, PreparedInputNeedsNoShears) {
  Sequence seq(constant_diag(0.5, 1.0 / 3.0, 0.13, 0.5, 2, {{0, 0, 2, 1.0}, {1, 2, 0, 0.5}}));
  const auto prep = prepare(seq, 2, 50);
  for (const auto& h : prep.shears) EXPECT_EQ(jet_distance(h, JetMap2::identity(2), 2), 0.0);
  for (double r : prep.residuals) EXPECT_EQ(r, 0.0);
}

TEST(Direct, ThetaConstantWhenFirstCoordinateDominates) {
  TrainPartition part;
  part.k = 2;
  part.trains.push_back({1, 0, 10, 10, true, false});
  std::vector<PreparedStep> steps(10, PreparedStep{0.5, 0.3, 0.0, 0.0});
  const auto dc = direct_trains(part, steps);
  for (double lt : dc.log_theta) EXPECT_EQ(lt, dc.log_theta[0]);
  // tau grows by |a/b| until capped at theta^k.
  for (std::size_t n = 0; n < 10; ++n) {
    const double expect = std::min(dc.log_tau[n] + std::log(0.5 / 0.3), 2 * dc.log_theta[n + 1]);
    EXPECT_NEAR(dc.log_tau[n + 1], expect, 1e-15);
  }
  EXPECT_NEAR(dc.log_tau.back(), 2 * dc.log_theta.back(), 1e-15);
}

TEST(Direct, ThetaDoublesOnReversedStep) {
  TrainPartition part;
  part.k = 2;
  part.trains.push_back({1, 0, 3, 3, true, false});
  // Two dominated steps first lift tau far enough that theta <= tau^k survives.
  const auto dc = direct_trains(part, {PreparedStep{0.5, 0.25, 0.0, 0.0}, PreparedStep{0.5, 0.25, 0.0, 0.0},
                                       PreparedStep{0.2, 0.4, 0.0, 0.0}});
  EXPECT_EQ(dc.log_theta[2], dc.log_theta[0]);
  EXPECT_NEAR(dc.log_theta[3] - dc.log_theta[2], std::log(2.0), 1e-15);
  EXPECT_LE(std::abs(dc.directed[2].b), std::abs(dc.directed[2].a) * (1 + 1e-15));
}

TEST(Direct, RandomSpecsHaveNoContractViolations) {
  for (std::uint64_t seed = 200; seed < 205; ++seed) {
    const auto spec = bftest::random_diagonal_spec(seed);
    Sequence seq(spec);
    const auto part = select_trains(seq, 2, 10000);
    const auto prep = prepare(seq, 2, 10000);
    const auto dc = direct_trains(part, prep.steps);
    const auto rep = check_directing(dc, part, prep.steps, spec.C, spec.D);
    EXPECT_EQ(rep.violations(), 0u);
  }
}

TEST(Connect, AffineFixedPoint) {
  DirectingChain dc;
  dc.k = 2;
  const std::size_t N = 200;
  dc.log_theta.assign(N + 1, 0.0);
  dc.log_tau.assign(N + 1, 0.0);
  dc.axis.assign(N, 1);
  dc.directed.assign(N, PreparedStep{0.5, 1.0 / 3.0, 1.0, 0.0});
  ConjugacyChain ch;
  ch.k = 2;
  connect_trains(ch, dc);
  EXPECT_NEAR(std::abs(ch.shear[0] - 18.0 / 7.0), 0.0, 1e-12);
  EXPECT_LE(ch.max_residual(), 1e-10);
}

TEST(Connect, ZeroCoefficientsGiveIdentityShears) {
  DirectingChain dc;
  dc.k = 2;
  dc.log_theta.assign(21, 0.0);
  dc.log_tau.assign(21, 0.0);
  dc.axis.assign(20, 1);
  dc.directed.assign(20, PreparedStep{0.5, 0.3, 0.0, 0.0});
  ConjugacyChain ch;
  ch.k = 2;
  connect_trains(ch, dc);
  for (auto a : ch.shear) EXPECT_EQ(a, cplx(0.0));
}

TEST(Connect, JunctionBetweenOddAndEvenTrains) {
  DirectingChain dc;
  dc.k = 2;
  const std::size_t r = 30;
  dc.log_theta.assign(2 * r + 1, 0.0);
  dc.log_tau.assign(2 * r + 1, 0.0);
  for (std::size_t n = 0; n < 2 * r; ++n) {
    dc.axis.push_back(n < r ? 1 : -1);
    dc.directed.push_back(n < r ? PreparedStep{0.5, 0.3, cplx(0.7, 0.2), cplx(-0.4, 0.1)}
                                : PreparedStep{0.3, 0.5, cplx(0.2, -0.6), cplx(0.9, 0.0)});
  }
  ConjugacyChain ch;
  ch.k = 2;
  connect_trains(ch, dc);
  const JetMap2 f = prepared_jet(dc.directed[r - 1], 2);
  const double direct = jet_distance(compose(ch.g(r - 1), ch.h(r - 1), 2), compose(ch.h(r), f, 2), 2);
  EXPECT_LE(direct, 1e-10);
  EXPECT_LE(ch.max_residual(), 1e-10);
}

TEST(Chain, RandomSpecResidualsAndShearBound) {
  const auto spec = bftest::random_diagonal_spec(301);
  Sequence seq(spec);
  const auto ch = build_chain(seq, 2, 3000);
  EXPECT_GT(ch.horizon, ch.n_max);
  EXPECT_LE(ch.max_residual(), 1e-10);
  for (double r : ch.prep_residuals) EXPECT_LE(r, 1e-10);
  const auto prep = prepare(seq, 2, ch.horizon);
  const auto dc = direct_trains(ch.partition, prep.steps);
  double ra = 0.0, rb = 0.0;
  for (const auto& t : dc.directed) {
    ra = std::max(ra, std::abs(t.c / t.a));
    rb = std::max(rb, std::abs(t.d / t.b));
  }
  const auto [sa, sb] = ch.shear_sup();
  EXPECT_LE(sa, ra / (1.0 - spec.D) * (1 + 1e-12));
  EXPECT_LE(sb, rb / (1.0 - spec.D) * (1 + 1e-12));
}

TEST(Chain, PreconditionRejected) {
  Sequence seq(bftest::random_diagonal_spec(1, 0.1, 0.5));
  EXPECT_THROW(build_chain(seq, 2, 100), PreconditionError);
  EXPECT_THROW(wold_fastpath(seq, 2, 100), PreconditionError);
}

TEST(Chain, JsonRoundTripReproducesEvaluation) {
  Sequence seq(bftest::random_diagonal_spec(302));
  const auto ch = build_chain(seq, 2, 500);
  const auto back = chain_from_json(nlohmann::json::parse(to_json(ch).dump()));
  const Point p{0.2, cplx(0.1, -0.1)};
  EXPECT_EQ(to_json(back).dump(), to_json(ch).dump());
  EXPECT_LE(distance(biholo_eval(seq, ch, p, 100), biholo_eval(seq, back, p, 100)), 1e-14);
}

TEST(Biholo, IncrementsDecreaseOnRandomSpec) {
  Sequence seq(bftest::random_diagonal_spec(303));
  const auto ch = build_chain(seq, 2, 400);
  for (std::uint64_t i = 0; i < 5; ++i) {
    const auto tr = biholo_trajectory(seq, ch, halton_sphere_point(i, 0.6), 200);
    EXPECT_FALSE(tr.nonconvergent);
    EXPECT_TRUE(tr.eventually_decreasing());
    EXPECT_LE(tr.last_increment(), 1e-8);
  }
}

TEST(Biholo, AutonomousCaseMatchesNormalForm) {
  const auto spec = constant_diag(0.5, 0.3, 0.13, 0.5, 2, {{0, 0, 2, 1.0}});
  Sequence seq(spec);
  const auto ch = build_chain(seq, 2, 300);
  const auto nf = rosay_rudin(spec.steps[0], 2);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Point p = halton_sphere_point(i, 0.1);
    EXPECT_LE(distance(biholo_eval(seq, ch, p, 200), phi_n(nf, 200, p)), 1e-8) << "point " << i;
  }
}

TEST(Wold, FastPathHasLinearTargets) {
  Sequence seq(bftest::random_diagonal_spec(304, 0.3, 0.5));
  const auto ch = wold_fastpath(seq, 2, 500);
  for (std::size_t n = 0; n < 500; ++n) EXPECT_EQ(ch.g(n).effective_degree(), 1);
  const auto tr = biholo_trajectory(seq, ch, {0.3, 0.2}, 150);
  EXPECT_LE(tr.last_increment(), 1e-8);
}

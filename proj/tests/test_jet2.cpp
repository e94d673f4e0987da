#include <gtest/gtest.h>

#include "support.hpp"

using namespace basinforge;
using bftest::random_germ;

namespace {

JetMap2 from_lists(int K, std::initializer_list<std::tuple<int, int, cplx>> a,
                   std::initializer_list<std::tuple<int, int, cplx>> b) {
  JetMap2 f = JetMap2::zero(K);
  for (auto [i, j, c] : a) f.first.at(i, j) = c;
  for (auto [i, j, c] : b) f.second.at(i, j) = c;
  return f;
}

}  // namespace

TEST(Jet2Scalar, StoresExactlyOneCoefficientPerMonomial) {
  for (int K = 1; K <= 9; ++K) {
    Jet2Scalar s(K);
    EXPECT_EQ(s.coefficients().size(), static_cast<std::size_t>((K + 1) * (K + 2) / 2));
    std::vector<int> hits(s.coefficients().size(), 0);
    for (int d = 0; d <= K; ++d)
      for (int i = 0; i <= d; ++i) ++hits[Jet2Scalar::index(i, d - i)];
    for (int h : hits) EXPECT_EQ(h, 1);
  }
}

TEST(Jet2Scalar, TruncatedProductDropsHighDegrees) {
  const auto z = Jet2Scalar::z_coordinate(3);
  const auto w = Jet2Scalar::w_coordinate(3);
  const auto zw = z * w;
  const auto p = zw * zw;  // degree 4, truncated away
  EXPECT_EQ(zw(1, 1), cplx(1.0));
  EXPECT_EQ(p.max_abs(), 0.0);
}

TEST(Compose, IdentityIsNeutral) {
  std::mt19937_64 rng(1);
  const JetMap2 f = random_germ(rng, 4);
  EXPECT_EQ(jet_distance(compose(JetMap2::identity(4), f, 4), f, 4), 0.0);
  EXPECT_EQ(jet_distance(compose(f, JetMap2::identity(4), 4), f, 4), 0.0);
}

TEST(Compose, HandExpansionOfSquare) {
  const JetMap2 outer = from_lists(2, {{2, 0, 1.0}}, {{0, 1, 1.0}});
  const JetMap2 inner = from_lists(2, {{1, 0, 1.0}, {0, 1, 1.0}}, {{0, 1, 1.0}});
  const JetMap2 h = compose(outer, inner, 2);
  EXPECT_EQ(h.first(2, 0), cplx(1.0));
  EXPECT_EQ(h.first(1, 1), cplx(2.0));
  EXPECT_EQ(h.first(0, 2), cplx(1.0));
  EXPECT_EQ(h.first(1, 0), cplx(0.0));
}

TEST(Compose, RejectsConstantTermAndExcessDegree) {
  JetMap2 inner = JetMap2::identity(3);
  inner.first.at(0, 0) = 0.1;
  EXPECT_THROW(compose(JetMap2::identity(3), inner, 3), std::invalid_argument);
  EXPECT_THROW(compose(JetMap2::identity(2), JetMap2::identity(3), 3), std::invalid_argument);
}

TEST(Compose, RandomAssociativity) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const int K = 2 + t % 5;
    const JetMap2 f = random_germ(rng, K), g = random_germ(rng, K), h = random_germ(rng, K);
    const JetMap2 a = compose(compose(f, g, K), h, K);
    const JetMap2 b = compose(f, compose(g, h, K), K);
    EXPECT_LE(jet_distance(a, b, K), 1e-12 * std::max(1.0, a.max_abs()));
  }
}

TEST(Compose, AgreesWithEvaluationForPolynomials) {
  // outer ∘ inner is a polynomial of degree <= 9 when both have degree 3.
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const JetMap2 f = random_germ(rng, 3), g = random_germ(rng, 3);
    const JetMap2 h = compose(f.resized(9), g.resized(9), 9);
    const Point p = bftest::random_point(rng, 0.3);
    EXPECT_LE(distance(h.evaluate(p), f.evaluate(g.evaluate(p))), 1e-13);
  }
}

TEST(Invert, ClosedForms) {
  EXPECT_EQ(jet_distance(invert(JetMap2::identity(4)), JetMap2::identity(4), 4), 0.0);
  const JetMap2 lin = from_lists(3, {{1, 0, 2.0}}, {{0, 1, 3.0}});
  const JetMap2 inv = invert(lin);
  EXPECT_NEAR(std::abs(inv.first(1, 0) - 0.5), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(inv.second(0, 1) - 1.0 / 3.0), 0.0, 1e-15);
  const JetMap2 shear = from_lists(2, {{1, 0, 1.0}, {0, 2, 1.0}}, {{0, 1, 1.0}});
  const JetMap2 expected = from_lists(2, {{1, 0, 1.0}, {0, 2, -1.0}}, {{0, 1, 1.0}});
  EXPECT_LE(jet_distance(invert(shear), expected, 2), 1e-15);
}

TEST(Invert, RandomRoundTrip) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const int K = 2 + t % 6;
    const JetMap2 f = random_germ(rng, K);
    const JetMap2 g = invert(f);
    EXPECT_LE(jet_distance(compose(g, f, K), JetMap2::identity(K), K), 1e-10);
    EXPECT_LE(jet_distance(compose(f, g, K), JetMap2::identity(K), K), 1e-10);
  }
}

TEST(Invert, SingularLinearPartNamesDeterminant) {
  const JetMap2 f = from_lists(2, {{1, 0, 1.0}}, {{1, 0, 1.0}});
  try {
    invert(f);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("det"), std::string::npos);
  }
}

TEST(Evaluate, HornerMatchesNaiveSum) {
  std::mt19937_64 rng(5);
  const JetMap2 f = random_germ(rng, 6);
  const Point p = bftest::random_point(rng, 0.7);
  cplx s = 0.0;
  for (int d = 0; d <= 6; ++d)
    for (int i = 0; i <= d; ++i) s += f.first(i, d - i) * std::pow(p.z, i) * std::pow(p.w, d - i);
  EXPECT_LE(std::abs(s - f.evaluate(p).z), 1e-14);
}

TEST(Evaluate, JacobianMatchesFiniteDifference) {
  std::mt19937_64 rng(6);
  const JetMap2 f = random_germ(rng, 4);
  const Point p = bftest::random_point(rng, 0.4);
  const Mat2 J = f.jacobian(p);
  const double h = 1e-6;
  const Point dz = (1.0 / (2 * h)) * (f.evaluate(p + Point{h, 0.0}) - f.evaluate(p - Point{h, 0.0}));
  EXPECT_LE(std::abs(dz.z - J.a11), 1e-8);
  EXPECT_LE(std::abs(dz.w - J.a21), 1e-8);
}

TEST(Json, RoundTripIsLossless) {
  std::mt19937_64 rng(7);
  const JetMap2 f = random_germ(rng, 5);
  const JetMap2 g = jet_from_json(nlohmann::json::parse(to_json(f).dump()));
  EXPECT_EQ(f, g);
}

TEST(Json, MalformedMonomialRejected) {
  const auto bad = nlohmann::json::parse(R"({"K":2,"first":[[3,0,1,0]],"second":[]})");
  EXPECT_THROW(jet_from_json(bad), std::invalid_argument);
}

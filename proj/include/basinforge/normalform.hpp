#pragma once

// Autonomous triangular normal forms X_k ∘ F = G ∘ X_k + O(|z|^{k+1}), the
// limit maps Phi_n = G^{-n} ∘ X_k ∘ F^n, diagram residuals and the unitary
// chain that makes cumulative linear parts lower triangular.

#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "basinforge/autoseq.hpp"
#include "basinforge/jet2.hpp"

namespace basinforge {

inline constexpr double kResonanceFloor = 1e-8;

struct AutonomousNormalForm {
  JetMap2 F;  // input map, exact polynomial
  JetMap2 X;  // Id + higher order terms, truncated at k
  JetMap2 G;  // lower triangular: (l1 z, l2 w + mu z + H(z))
  int k = 2;
  cplx lambda1{}, lambda2{};

  /// jet_distance(X ∘ F, G ∘ X, k).
  double residual() const {
    return jet_distance(compose(X, F.resized(k), k), compose(G, X, k), k);
  }
};

namespace detail {

inline double binomial(int n, int r) {
  double b = 1.0;
  for (int i = 1; i <= r; ++i) b = b * (n - r + i) / i;
  return b;
}

inline std::string monomial_name(int comp, int i, int j) {
  std::ostringstream os;
  os << "component " << comp << " monomial z^" << i << " w^" << j;
  return os.str();
}

}  // namespace detail

/// Solves degree by degree for X_k and G. Monomials whose homological factor
/// (l1^i l2^j - l_target) is below `floor` go into G when they may legally live
/// there (z^d in the second component); otherwise the call fails.
inline AutonomousNormalForm rosay_rudin(const JetMap2& F, int k, double floor = kResonanceFloor) {
  if (k < 1) throw std::invalid_argument("rosay_rudin: k must be >= 1");
  if (!F.fixes_origin()) throw PreconditionError("rosay_rudin: F does not fix the origin");
  const Mat2 L = F.linear();
  if (std::abs(L.a12) > 1e-14)
    throw PreconditionError("rosay_rudin: linear part of F is not lower triangular");
  const cplx l1 = L.a11, l2 = L.a22, mu = L.a21;
  if (!(std::abs(l1) > 0.0 && std::abs(l1) < 1.0 && std::abs(l2) > 0.0 && std::abs(l2) < 1.0))
    throw PreconditionError("rosay_rudin: linear part is not contracting");
  if (std::abs(l1) < std::abs(l2))
    throw PreconditionError("rosay_rudin: eigenvalues must satisfy |lambda1| >= |lambda2|");

  const int K = k;
  const JetMap2 Fk = F.resized(std::max(K, F.degree())).resized(K);
  AutonomousNormalForm nf;
  nf.F = F;
  nf.k = k;
  nf.lambda1 = l1;
  nf.lambda2 = l2;
  nf.X = JetMap2::identity(K);
  nf.G = JetMap2::linear_map(K, Mat2{l1, 0.0, mu, l2});

  std::vector<cplx> l1p(static_cast<std::size_t>(K + 1)), l2p(static_cast<std::size_t>(K + 1)),
      mup(static_cast<std::size_t>(K + 1));
  l1p[0] = l2p[0] = mup[0] = 1.0;
  for (int i = 1; i <= K; ++i) {
    l1p[static_cast<std::size_t>(i)] = l1p[static_cast<std::size_t>(i - 1)] * l1;
    l2p[static_cast<std::size_t>(i)] = l2p[static_cast<std::size_t>(i - 1)] * l2;
    mup[static_cast<std::size_t>(i)] = mup[static_cast<std::size_t>(i - 1)] * mu;
  }
  // Coefficient of z^i w^{d-i} in (x ∘ L) for x homogeneous of degree d.
  auto compose_linear = [&](const Jet2Scalar& x, int d, int i) {
    cplx s = 0.0;
    for (int a = 0; a <= i; ++a)
      s += x(a, d - a) * l1p[static_cast<std::size_t>(a)] * detail::binomial(d - a, i - a) *
           mup[static_cast<std::size_t>(i - a)] * l2p[static_cast<std::size_t>(d - i)];
    return s;
  };

  for (int d = 2; d <= K; ++d) {
    const JetMap2 E = compose(nf.X, Fk, K) - compose(nf.G, nf.X, K);
    // Component 1: (x1 ∘ L) - l1 x1 = -R1.
    for (int i = 0; i <= d; ++i) {
      const int j = d - i;
      const cplx factor = l1p[static_cast<std::size_t>(i)] * l2p[static_cast<std::size_t>(j)] - l1;
      const cplx known = compose_linear(nf.X.first, d, i);  // x(i, j) is still zero here
      const cplx rhs = -E.first(i, j) - known;
      if (std::abs(factor) < floor) {
        if (std::abs(rhs) <= 1e-14) continue;
        throw NumericError("rosay_rudin: resonance at " + detail::monomial_name(1, i, j) +
                           " (factor modulus " + std::to_string(std::abs(factor)) + ")");
      }
      nf.X.first.at(i, j) = rhs / factor;
    }
    // Component 2: (x2 ∘ L) - mu x1 - l2 x2 = G2 - R2.
    for (int i = 0; i <= d; ++i) {
      const int j = d - i;
      const cplx factor = l1p[static_cast<std::size_t>(i)] * l2p[static_cast<std::size_t>(j)] - l2;
      const cplx known = compose_linear(nf.X.second, d, i) - mu * nf.X.first(i, j);
      const cplx rhs = -E.second(i, j) - known;
      if (std::abs(factor) < floor) {
        if (j == 0) {
          nf.G.second.at(i, 0) = -rhs;
          continue;
        }
        if (std::abs(rhs) <= 1e-14) continue;
        throw NumericError("rosay_rudin: resonance at " + detail::monomial_name(2, i, j) +
                           " (factor modulus " + std::to_string(std::abs(factor)) + ")");
      }
      nf.X.second.at(i, j) = rhs / factor;
    }
  }
  return nf;
}

/// Closed-form inverse of a triangular polynomial map: either
/// (a z, b w + H(z)) or (a z + H(w), b w).
inline Point triangular_inverse(const JetMap2& g, Point y) {
  const int K = g.degree();
  bool first_only_z = true, second_only_w = true;
  for (int d = 0; d <= K; ++d)
    for (int i = 0; i <= d; ++i) {
      const int j = d - i;
      if (g.first(i, j) != cplx{} && !(i == 1 && j == 0)) first_only_z = false;
      if (g.second(i, j) != cplx{} && !(i == 0 && j == 1)) second_only_w = false;
    }
  if (first_only_z) {
    const cplx z = y.z / g.first(1, 0);
    cplx h = 0.0, zp = 1.0;
    for (int i = 0; i <= K; ++i, zp *= z) h += g.second(i, 0) * zp;
    return {z, (y.w - h) / g.second(0, 1)};
  }
  if (second_only_w) {
    const cplx w = y.w / g.second(0, 1);
    cplx h = 0.0, wp = 1.0;
    for (int j = 0; j <= K; ++j, wp *= w) h += g.first(0, j) * wp;
    return {(y.z - h) / g.first(1, 0), w};
  }
  throw NumericError("triangular_inverse: map is not triangular");
}

inline constexpr double kJetValidityRadius = 0.5;

/// Phi_n(p) = G^{-n}(X_k(F^n(p))).
inline Point phi_n(const AutonomousNormalForm& nf, std::size_t n, Point p, double validity_radius = kJetValidityRadius) {
  Point x = p;
  for (std::size_t t = 0; t < n; ++t) x = nf.F.evaluate(x);
  if (!(x.norm() <= validity_radius))
    throw NumericError("phi_n: F^n(p) has norm " + std::to_string(x.norm()) +
                       ", outside the jet validity ball; use a larger n");
  Point y = nf.X.evaluate(x);
  for (std::size_t t = 0; t < n; ++t) y = triangular_inverse(nf.G, y);
  return y;
}

/// Residual of the square g ∘ h_n = h_{n+1} ∘ f up to degree K.
inline double check_diagram(const JetMap2& h_n, const JetMap2& h_next, const JetMap2& f, const JetMap2& g, int K) {
  return jet_distance(compose(g, h_n, K), compose(h_next, f, K), K);
}

inline nlohmann::json to_json(const AutonomousNormalForm& nf) {
  auto c = [](cplx v) { return nlohmann::json{v.real(), v.imag()}; };
  return {{"k", nf.k},           {"F", to_json(nf.F)},        {"X", to_json(nf.X)}, {"G", to_json(nf.G)},
          {"lambda1", c(nf.lambda1)}, {"lambda2", c(nf.lambda2)}, {"residual", nf.residual()}};
}

// ---------------------------------------------------------------------------
// Unitary triangularization of cumulative linear parts.

struct UnitaryChain {
  Point v0;
  std::vector<Mat2> U;                  // U_0 .. U_{n_max+1}
  std::vector<cplx> lambdas;            // lambda_0 .. lambda_{n_max}
  std::vector<double> log_abs_lambdas;  // log|lambda_n|, immune to underflow
  std::vector<Mat2> conjugated;         // U_{n+1} L_n U_n^{-1}
};

/// Unitary with U u = |u| e^{i chi} [0,1]; row 1 has its first nonzero entry
/// real positive (top-left real nonnegative), row 2 has U_22 real nonnegative.
inline Mat2 unitary_to_second_axis(Point u) {
  const double n = u.norm();
  const cplx u1 = u.z / n, u2 = u.w / n;
  Mat2 U;
  if (std::abs(u2) > 0.0) {
    const cplx ph = std::conj(u2) / std::abs(u2);
    U.a11 = std::abs(u2);
    U.a12 = -ph * u1;
    const cplx chi = u2 / std::abs(u2);
    U.a21 = chi * std::conj(u1);
    U.a22 = chi * std::conj(u2);
  } else {
    const cplx ph = -std::conj(u1) / std::abs(u1);  // makes a12 = |u1|
    U.a11 = 0.0;
    U.a12 = -ph * u1;
    const cplx chi = u1 / std::abs(u1);
    U.a21 = chi * std::conj(u1);
    U.a22 = 0.0;
  }
  return U;
}

inline UnitaryChain qr_direct(Sequence& seq, Point v0, std::size_t n_max) {
  if (std::abs(v0.norm() - 1.0) > 1e-12) throw std::invalid_argument("qr_direct: v0 must be a unit vector");
  UnitaryChain ch;
  ch.v0 = v0;
  ch.U.push_back(unitary_to_second_axis(v0));
  Point u = v0;
  double log_len = 0.0;
  for (std::size_t n = 0; n <= n_max; ++n) {
    const Mat2 L = seq[n].jet.linear();
    const Point image = L.apply(u);
    const double len = image.norm();
    if (!(len > 1e-300)) throw NumericError("qr_direct: degenerate direction at step " + std::to_string(n));
    log_len += std::log(len);
    u = (1.0 / len) * image;
    const Mat2 Unext = unitary_to_second_axis(u);
    // U u = chi [0,1] with |chi| = 1.
    const cplx chi = Unext.apply(u).w;
    ch.lambdas.push_back(chi * std::exp(log_len));
    ch.log_abs_lambdas.push_back(log_len);
    ch.conjugated.push_back(Unext * L * ch.U.back().adjoint());
    ch.U.push_back(Unext);
  }
  return ch;
}

}  // namespace basinforge

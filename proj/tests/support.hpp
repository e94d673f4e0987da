#pragma once

// Shared generators and brute-force oracles for the test binaries.

#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <vector>

#include "basinforge/basinforge.hpp"

namespace bftest {

using namespace basinforge;

inline cplx random_cplx(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {scale * u(rng), scale * u(rng)};
}

/// Random jet fixing the origin; the linear part is near a diagonal with
/// moduli in [0.5, 1.5] so inversion is well conditioned.
inline JetMap2 random_germ(std::mt19937_64& rng, int K, double scale = 0.5) {
  JetMap2 f = JetMap2::zero(K);
  std::uniform_real_distribution<double> m(0.5, 1.5);
  f.first.at(1, 0) = m(rng);
  f.second.at(0, 1) = m(rng);
  f.first.at(0, 1) = random_cplx(rng, 0.2);
  f.second.at(1, 0) = random_cplx(rng, 0.2);
  for (int d = 2; d <= K; ++d)
    for (int i = 0; i <= d; ++i) {
      f.first.at(i, d - i) = random_cplx(rng, scale);
      f.second.at(i, d - i) = random_cplx(rng, scale);
    }
  return f;
}

/// Random germ whose linear part is a rotation times diag(s1, s2) with
/// singular values in [0.8, 1.25].
inline JetMap2 well_conditioned_germ(std::mt19937_64& rng, int K, double scale = 0.3) {
  JetMap2 f = random_germ(rng, K, scale);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double th = 6.283185307179586 * u(rng);
  const double s1 = 0.8 + 0.45 * u(rng), s2 = 0.8 + 0.45 * u(rng);
  const Mat2 L = Mat2{std::cos(th), -std::sin(th), std::sin(th), std::cos(th)} * Mat2{s1, 0.0, 0.0, s2};
  f.first.at(1, 0) = L.a11;
  f.first.at(0, 1) = L.a12;
  f.second.at(1, 0) = L.a21;
  f.second.at(0, 1) = L.a22;
  return f;
}

/// Sum of coefficient moduli above degree K, per component, maximized.
inline double tail_weight(const JetMap2& f, int K) {
  double a = 0.0, b = 0.0;
  for (int d = K + 1; d <= f.degree(); ++d)
    for (int i = 0; i <= d; ++i) {
      a += std::abs(f.first(i, d - i));
      b += std::abs(f.second(i, d - i));
    }
  return std::max(a, b);
}

inline Point random_point(std::mt19937_64& rng, double scale) { return {random_cplx(rng, scale), random_cplx(rng, scale)}; }

struct OracleTrain {
  std::size_t p, q, end;
  bool closed;
};

/// All-pairs scan: train j closes at the first s >= q admitting some r in
/// [q, s] with (-1)^j (S_s - S_r) >= k^{j+1}; r is the first index attaining
/// the largest such value at that s.
inline std::vector<OracleTrain> brute_force_trains(const std::vector<double>& steps, int k, double tol = 1e-9) {
  const std::size_t N = steps.size();
  std::vector<double> S(N + 1, 0.0);
  for (std::size_t n = 0; n < N; ++n) S[n + 1] = S[n] + steps[n];
  std::vector<OracleTrain> out;
  std::size_t l = 0;
  for (std::size_t n = 1; n <= N; ++n)
    if (S[n] >= k - tol) {
      l = n;
      break;
    }
  if (l == 0) {
    out.push_back({0, N, N, false});
    return out;
  }
  std::size_t p = 0, q = l;
  double thr = k;
  for (int j = 1;; ++j) {
    const double sgn = j % 2 == 0 ? 1.0 : -1.0;
    thr *= k;
    bool found = false;
    for (std::size_t s = q; s <= N && !found; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t r = q; r <= s; ++r) best = std::max(best, sgn * (S[s] - S[r]));
      if (best < thr - tol) continue;
      std::size_t r = q;
      while (sgn * (S[s] - S[r]) < best - tol) ++r;
      out.push_back({p, q, r, true});
      p = r;
      q = s;
      found = true;
    }
    if (!found) {
      out.push_back({p, q, N, false});
      return out;
    }
  }
}

inline SequenceSpec random_diagonal_spec(std::uint64_t seed, double C = 0.13, double D = 0.5, int k = 2) {
  SequenceSpec s;
  s.kind = SequenceKind::random_diagonal;
  s.k = k;
  s.C = C;
  s.D = D;
  s.seed = seed;
  return s;
}

inline SequenceSpec constant_spec(const JetMap2& f, double C, double D, int k) {
  SequenceSpec s;
  s.kind = SequenceKind::constant;
  s.k = k;
  s.C = C;
  s.D = D;
  s.steps = {f};
  return s;
}

/// (z/2 + w^2, w/9).
inline JetMap2 example_map() {
  JetMap2 f = JetMap2::zero(2);
  f.first.at(1, 0) = 0.5;
  f.first.at(0, 2) = 1.0;
  f.second.at(0, 1) = 1.0 / 9.0;
  return f;
}

}  // namespace bftest

#pragma once

// Truncated bivariate power series and germs of maps C^2 -> C^2 at the origin.
//
// A Jet2Scalar of truncation K stores one coefficient for every monomial
// z^i w^j with i + j <= K, in graded lexicographic order (total degree first,
// then i). A polynomial of degree <= K is represented exactly, so the same
// type doubles as the exact evaluator of polynomial automorphisms.

#include <cassert>
#include <cstddef>
#include <sstream>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "basinforge/common.hpp"

namespace basinforge {

class Jet2Scalar {
 public:
  Jet2Scalar() : Jet2Scalar(1) {}
  explicit Jet2Scalar(int K) : K_(K), coeffs_(size_for(K)) {
    if (K < 0) throw std::invalid_argument("jet truncation degree must be >= 0");
  }

  static constexpr std::size_t size_for(int K) {
    return static_cast<std::size_t>((K + 1) * (K + 2) / 2);
  }
  static constexpr std::size_t index(int i, int j) {
    const int d = i + j;
    return static_cast<std::size_t>(d * (d + 1) / 2 + i);
  }

  static Jet2Scalar constant(int K, cplx c) {
    Jet2Scalar s(K);
    s.coeffs_[0] = c;
    return s;
  }
  static Jet2Scalar z_coordinate(int K) {
    Jet2Scalar s(K);
    if (K >= 1) s.at(1, 0) = 1.0;
    return s;
  }
  static Jet2Scalar w_coordinate(int K) {
    Jet2Scalar s(K);
    if (K >= 1) s.at(0, 1) = 1.0;
    return s;
  }

  int degree() const { return K_; }
  const std::vector<cplx>& coefficients() const { return coeffs_; }

  /// Coefficient of z^i w^j; zero for monomials above the truncation.
  cplx operator()(int i, int j) const {
    if (i < 0 || j < 0 || i + j > K_) return 0.0;
    return coeffs_[index(i, j)];
  }
  cplx& at(int i, int j) {
    assert(i >= 0 && j >= 0 && i + j <= K_);
    return coeffs_[index(i, j)];
  }

  /// Copy truncated (or zero-padded) to degree K.
  Jet2Scalar resized(int K) const {
    Jet2Scalar out(K);
    const int top = std::min(K, K_);
    for (int d = 0; d <= top; ++d)
      for (int i = 0; i <= d; ++i) out.at(i, d - i) = (*this)(i, d - i);
    return out;
  }

  /// Homogeneous part of degree d, as a jet of the same truncation.
  Jet2Scalar homogeneous(int d) const {
    Jet2Scalar out(K_);
    if (d <= K_)
      for (int i = 0; i <= d; ++i) out.at(i, d - i) = (*this)(i, d - i);
    return out;
  }

  /// Largest total degree carrying a nonzero coefficient (-1 for the zero jet).
  int effective_degree() const {
    for (int d = K_; d >= 0; --d)
      for (int i = 0; i <= d; ++i)
        if ((*this)(i, d - i) != cplx{}) return d;
    return -1;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& c : coeffs_) m = std::max(m, std::abs(c));
    return m;
  }

  cplx evaluate(Point p) const {
    // Horner in w for each power of z.
    cplx acc = 0.0;
    cplx zp = 1.0;
    for (int i = 0; i <= K_; ++i) {
      cplx inner = 0.0;
      for (int j = K_ - i; j >= 0; --j) inner = inner * p.w + coeffs_[index(i, j)];
      acc += zp * inner;
      zp *= p.z;
    }
    return acc;
  }

  /// (d/dz, d/dw) at p.
  std::pair<cplx, cplx> gradient(Point p) const {
    cplx dz = 0.0, dw = 0.0;
    std::vector<cplx> zp(static_cast<std::size_t>(K_ + 1)), wp(static_cast<std::size_t>(K_ + 1));
    zp[0] = wp[0] = 1.0;
    for (int i = 1; i <= K_; ++i) {
      zp[static_cast<std::size_t>(i)] = zp[static_cast<std::size_t>(i - 1)] * p.z;
      wp[static_cast<std::size_t>(i)] = wp[static_cast<std::size_t>(i - 1)] * p.w;
    }
    for (int d = 1; d <= K_; ++d)
      for (int i = 0; i <= d; ++i) {
        const int j = d - i;
        const cplx c = coeffs_[index(i, j)];
        if (c == cplx{}) continue;
        if (i > 0) dz += c * static_cast<double>(i) * zp[static_cast<std::size_t>(i - 1)] * wp[static_cast<std::size_t>(j)];
        if (j > 0) dw += c * static_cast<double>(j) * zp[static_cast<std::size_t>(i)] * wp[static_cast<std::size_t>(j - 1)];
      }
    return {dz, dw};
  }

  Jet2Scalar& operator+=(const Jet2Scalar& o) {
    check_same(o);
    for (std::size_t n = 0; n < coeffs_.size(); ++n) coeffs_[n] += o.coeffs_[n];
    return *this;
  }
  Jet2Scalar& operator-=(const Jet2Scalar& o) {
    check_same(o);
    for (std::size_t n = 0; n < coeffs_.size(); ++n) coeffs_[n] -= o.coeffs_[n];
    return *this;
  }
  Jet2Scalar& operator*=(cplx s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
  }
  friend Jet2Scalar operator+(Jet2Scalar a, const Jet2Scalar& b) { return a += b; }
  friend Jet2Scalar operator-(Jet2Scalar a, const Jet2Scalar& b) { return a -= b; }
  friend Jet2Scalar operator*(cplx s, Jet2Scalar a) { return a *= s; }

  /// Truncated product; both factors must share the truncation degree.
  friend Jet2Scalar operator*(const Jet2Scalar& a, const Jet2Scalar& b) {
    a.check_same(b);
    const int K = a.K_;
    Jet2Scalar out(K);
    for (int d1 = 0; d1 <= K; ++d1)
      for (int i1 = 0; i1 <= d1; ++i1) {
        const cplx x = a.coeffs_[index(i1, d1 - i1)];
        if (x == cplx{}) continue;
        for (int d2 = 0; d1 + d2 <= K; ++d2)
          for (int i2 = 0; i2 <= d2; ++i2) {
            const cplx y = b.coeffs_[index(i2, d2 - i2)];
            if (y == cplx{}) continue;
            out.coeffs_[index(i1 + i2, d1 + d2 - i1 - i2)] += x * y;
          }
      }
    return out;
  }

  friend bool operator==(const Jet2Scalar&, const Jet2Scalar&) = default;

 private:
  void check_same(const Jet2Scalar& o) const {
    if (o.K_ != K_) throw std::invalid_argument("jet truncation degrees differ");
  }

  int K_;
  std::vector<cplx> coeffs_;
};

/// Germ of a map C^2 -> C^2 as two truncated components.
struct JetMap2 {
  Jet2Scalar first{1};
  Jet2Scalar second{1};

  JetMap2() = default;
  JetMap2(Jet2Scalar f, Jet2Scalar s) : first(std::move(f)), second(std::move(s)) {
    if (first.degree() != second.degree())
      throw std::invalid_argument("jet components must share the truncation degree");
  }

  static JetMap2 identity(int K) {
    return {Jet2Scalar::z_coordinate(K), Jet2Scalar::w_coordinate(K)};
  }
  static JetMap2 linear_map(int K, const Mat2& m) {
    JetMap2 out = zero(K);
    out.first.at(1, 0) = m.a11;
    out.first.at(0, 1) = m.a12;
    out.second.at(1, 0) = m.a21;
    out.second.at(0, 1) = m.a22;
    return out;
  }
  static JetMap2 zero(int K) { return {Jet2Scalar(K), Jet2Scalar(K)}; }

  int degree() const { return first.degree(); }

  /// Degree-one coefficients as a matrix.
  Mat2 linear() const {
    if (degree() < 1) return Mat2::diagonal(0.0, 0.0);
    return {first(1, 0), first(0, 1), second(1, 0), second(0, 1)};
  }

  bool fixes_origin() const { return first(0, 0) == cplx{} && second(0, 0) == cplx{}; }

  JetMap2 resized(int K) const { return {first.resized(K), second.resized(K)}; }

  Point evaluate(Point p) const { return {first.evaluate(p), second.evaluate(p)}; }

  /// Jacobian matrix at p.
  Mat2 jacobian(Point p) const {
    const auto [fz, fw] = first.gradient(p);
    const auto [sz, sw] = second.gradient(p);
    return {fz, fw, sz, sw};
  }

  int effective_degree() const {
    return std::max(first.effective_degree(), second.effective_degree());
  }
  double max_abs() const { return std::max(first.max_abs(), second.max_abs()); }

  friend JetMap2 operator+(const JetMap2& a, const JetMap2& b) {
    return {a.first + b.first, a.second + b.second};
  }
  friend JetMap2 operator-(const JetMap2& a, const JetMap2& b) {
    return {a.first - b.first, a.second - b.second};
  }
  friend bool operator==(const JetMap2&, const JetMap2&) = default;
};

/// Evaluates the polynomial `p` on ring elements x, y (jets, series, scalars).
/// Only the powers actually needed are formed.
template <class Ring>
Ring substitute(const Jet2Scalar& p, const Ring& x, const Ring& y, const Ring& one) {
  const int K = p.effective_degree();
  Ring acc = 0.0 * one;
  if (K < 0) return acc;
  std::vector<Ring> xp{one}, yp{one};
  for (int i = 1; i <= K; ++i) {
    xp.push_back(xp.back() * x);
    yp.push_back(yp.back() * y);
  }
  for (int d = 0; d <= K; ++d)
    for (int i = 0; i <= d; ++i) {
      const cplx c = p(i, d - i);
      if (c == cplx{}) continue;
      acc = acc + c * (xp[static_cast<std::size_t>(i)] * yp[static_cast<std::size_t>(d - i)]);
    }
  return acc;
}

/// Truncation to degree K of outer ∘ inner.
inline JetMap2 compose(const JetMap2& outer, const JetMap2& inner, int K) {
  if (!inner.fixes_origin())
    throw std::invalid_argument("compose: inner jet has a nonzero constant term");
  if (K > outer.degree() || K > inner.degree())
    throw std::invalid_argument("compose: requested degree exceeds a truncation");
  const Jet2Scalar x = inner.first.resized(K);
  const Jet2Scalar y = inner.second.resized(K);
  const Jet2Scalar one = Jet2Scalar::constant(K, 1.0);
  return {substitute(outer.first.resized(K), x, y, one), substitute(outer.second.resized(K), x, y, one)};
}

inline JetMap2 compose(const JetMap2& outer, const JetMap2& inner) {
  return compose(outer, inner, std::min(outer.degree(), inner.degree()));
}

inline constexpr double kDeterminantFloor = 1e-12;

/// Inverse germ, built one degree per fixed-point sweep g <- L^{-1}(Id - N∘g).
inline JetMap2 invert(const JetMap2& f, double det_floor = kDeterminantFloor) {
  if (!f.fixes_origin()) throw std::invalid_argument("invert: jet does not fix the origin");
  const int K = f.degree();
  const Mat2 L = f.linear();
  const double det = std::abs(L.det());
  if (!(det > det_floor)) {
    std::ostringstream msg;
    msg << "invert: linear part is singular (|det| = " << det << ")";
    throw NumericError(msg.str());
  }
  const Mat2 Linv = L.inverse();
  const JetMap2 nonlinear = f - JetMap2::linear_map(K, L);
  const JetMap2 Linv_jet = JetMap2::linear_map(K, Linv);
  JetMap2 g = Linv_jet;
  for (int sweep = 2; sweep <= K; ++sweep)
    g = compose(Linv_jet, JetMap2::identity(K) - compose(nonlinear, g, K), K);
  return g;
}

/// Max coefficient difference over all monomials of degree <= K.
inline double jet_distance(const JetMap2& f, const JetMap2& g, int K) {
  double m = 0.0;
  for (int d = 0; d <= K; ++d)
    for (int i = 0; i <= d; ++i) {
      m = std::max(m, std::abs(f.first(i, d - i) - g.first(i, d - i)));
      m = std::max(m, std::abs(f.second(i, d - i) - g.second(i, d - i)));
    }
  return m;
}

// JSON: { "K": int, "first": [[i, j, re, im], ...], "second": [...] }.
// Only nonzero coefficients are written; readers accept any listing.

inline nlohmann::json monomials_to_json(const Jet2Scalar& s) {
  auto arr = nlohmann::json::array();
  for (int d = 0; d <= s.degree(); ++d)
    for (int i = 0; i <= d; ++i) {
      const cplx c = s(i, d - i);
      if (c != cplx{}) arr.push_back({i, d - i, c.real(), c.imag()});
    }
  return arr;
}

inline Jet2Scalar monomials_from_json(const nlohmann::json& arr, int K) {
  Jet2Scalar s(K);
  for (const auto& m : arr) {
    if (!m.is_array() || m.size() != 4) throw std::invalid_argument("monomial entries are [i, j, re, im]");
    const int i = m[0].get<int>();
    const int j = m[1].get<int>();
    if (i < 0 || j < 0 || i + j > K) throw std::invalid_argument("monomial exceeds jet truncation");
    s.at(i, j) += cplx{m[2].get<double>(), m[3].get<double>()};
  }
  return s;
}

/// Highest total degree appearing in a monomial listing.
inline int monomials_degree(const nlohmann::json& arr) {
  int d = 0;
  for (const auto& m : arr) d = std::max(d, m[0].get<int>() + m[1].get<int>());
  return d;
}

inline nlohmann::json to_json(const JetMap2& f) {
  return {{"K", f.degree()}, {"first", monomials_to_json(f.first)}, {"second", monomials_to_json(f.second)}};
}

inline JetMap2 jet_from_json(const nlohmann::json& j) {
  const int K = j.contains("K") ? j.at("K").get<int>()
                                : std::max({1, monomials_degree(j.at("first")), monomials_degree(j.at("second"))});
  return {monomials_from_json(j.at("first"), K), monomials_from_json(j.at("second"), K)};
}

}  // namespace basinforge

#pragma once

// Entire curves and maps into a basin by repeated disk extension, the
// budget constants that drive the truncation, and the psh bound.
//
// A disk map is stored as psi(z) = (f^M)^{-1}(P(z / rho)) with P a polynomial
// in the unit variable u = z / rho. Such a psi is entire; an extension round
// pushes P forward, truncates, and checks that the truncated image stays in
// the half ball on the larger disk.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "basinforge/autoseq.hpp"
#include "basinforge/basin.hpp"
#include "basinforge/jet2.hpp"

namespace basinforge {

inline constexpr double kTwoPi = 6.283185307179586;
inline constexpr std::size_t kCircleSamples = 720;
inline constexpr double kDeltaGrid = 1e-4;
inline constexpr double kPinTolerance = 1e-12;
inline constexpr double kHalfBall = 0.5;

// ---------------------------------------------------------------------------
// Budget constants.

struct ExtensionBudget {
  int L = 1;
  double delta = 0.0;
  double R = 2.0, c = 0.5, r = 0.5;
  double eps = 1.0;
  std::size_t horizon = 0;
  std::optional<std::size_t> N_min;  // smallest N meeting both coefficient bounds
};

/// L: smallest integer with r^L < c. delta: largest multiple of 1e-4 with
/// (1+delta)^L < R. N_min: smallest N <= horizon with
/// ((1+delta)^{LN+1} - 1)/delta < R^N and r^{LN}/(1-r) < c^N eps.
inline ExtensionBudget je1_constants(double R, double c, double r, double eps = 1.0, std::size_t horizon = 100000) {
  if (!(R > 1.0) || !(c > 0.0 && c < 1.0) || !(r > 0.0 && r < 1.0) || !(eps > 0.0))
    throw std::invalid_argument("je1_constants: need R > 1, 0 < c < 1, 0 < r < 1, eps > 0");
  ExtensionBudget b;
  b.R = R;
  b.c = c;
  b.r = r;
  b.eps = eps;
  b.horizon = horizon;
  while (!(std::pow(r, b.L) < c)) ++b.L;
  const double root = std::pow(R, 1.0 / b.L);
  b.delta = std::floor((root - 1.0) / kDeltaGrid) * kDeltaGrid;
  if (!(std::pow(1.0 + b.delta, b.L) < R)) b.delta -= kDeltaGrid;
  if (!(b.delta > 0.0)) b.delta = (root - 1.0) / 2.0;  // R too close to 1 for the grid
  const double lg = std::log1p(b.delta);
  for (std::size_t N = 1; N <= horizon; ++N) {
    const double m = static_cast<double>(b.L) * static_cast<double>(N) + 1.0;
    const double lhs1 = m * lg + std::log(-std::expm1(-m * lg)) - std::log(b.delta);
    const double lhs2 = (m - 1.0) * std::log(r) - std::log1p(-r);
    if (lhs1 < static_cast<double>(N) * std::log(R) && lhs2 < static_cast<double>(N) * std::log(c) + std::log(eps)) {
      b.N_min = N;
      break;
    }
  }
  return b;
}

inline ExtensionBudget budget_for(const SequenceSpec& spec, double r) { return je1_constants(1.0 / spec.D, spec.C / spec.D, r); }

// ---------------------------------------------------------------------------
// Pluri-subharmonic bound.

/// Size of the gap log D / log C in (0, 1): a bounded psh function on the
/// basin is at most minus this value, which forces it to be constant.
inline double psh_bound(double C, double D) {
  if (!(C > 0.0 && C < D && D < 1.0)) throw std::invalid_argument("psh_bound: need 0 < C < D < 1");
  return std::log(D) / std::log(C);
}

/// Gap obtained on B_k from step n > k: (n-k) log D / (n log C).
inline double psh_chain(double C, double D, double n, double k) {
  if (!(n > k)) throw std::invalid_argument("psh_chain: need n > k");
  return (n - k) / n * psh_bound(C, D);
}

// ---------------------------------------------------------------------------
// Truncated one-variable series.

class USeries {
 public:
  explicit USeries(int T = 0) : c_(static_cast<std::size_t>(T + 1)) {}
  static USeries constant(int T, cplx v) {
    USeries s(T);
    s.c_[0] = v;
    return s;
  }

  int degree() const { return static_cast<int>(c_.size()) - 1; }
  const std::vector<cplx>& coefficients() const { return c_; }
  cplx& operator[](std::size_t n) { return c_[n]; }
  cplx operator[](std::size_t n) const { return n < c_.size() ? c_[n] : cplx{}; }

  cplx evaluate(cplx u) const {
    cplx acc = 0.0;
    for (std::size_t n = c_.size(); n-- > 0;) acc = acc * u + c_[n];
    return acc;
  }

  friend USeries operator+(USeries a, const USeries& b) {
    for (std::size_t n = 0; n < a.c_.size(); ++n) a.c_[n] += b[n];
    return a;
  }
  friend USeries operator*(cplx s, USeries a) {
    for (auto& v : a.c_) v *= s;
    return a;
  }
  friend USeries operator*(const USeries& a, const USeries& b) {
    const int T = std::min(a.degree(), b.degree());
    USeries out(T);
    for (int i = 0; i <= T; ++i) {
      if (a.c_[static_cast<std::size_t>(i)] == cplx{}) continue;
      for (int j = 0; i + j <= T; ++j)
        out.c_[static_cast<std::size_t>(i + j)] += a.c_[static_cast<std::size_t>(i)] * b.c_[static_cast<std::size_t>(j)];
    }
    return out;
  }

 private:
  std::vector<cplx> c_;
};

// ---------------------------------------------------------------------------
// Inverse steps.

/// Solves f(x) = y by Newton iteration from the linear guess.
inline Point newton_inverse(const JetMap2& f, Point y, int max_iter = 80) {
  Point x = f.linear().inverse().apply(y);
  const double scale = std::max(y.norm(), 1e-300);
  for (int it = 0; it < max_iter; ++it) {
    const Point r = f.evaluate(x) - y;
    if (r.norm() <= 1e-16 * scale) return x;
    const Point dx = f.jacobian(x).inverse().apply(r);
    x = x - dx;
    if (!x.finite()) break;
    if (dx.norm() <= 1e-16 * std::max(x.norm(), 1e-300)) return x;
  }
  const Point r = f.evaluate(x) - y;
  if (x.finite() && r.norm() <= 1e-12 * scale) return x;
  throw NumericError("newton_inverse: no convergence (residual " + std::to_string(r.norm()) + ")");
}

/// (f^level)^{-1}(y). When `ball_from` is set, every intermediate point at a
/// level >= ball_from must stay inside the unit ball.
inline Point pull_back_point(Sequence& seq, std::size_t level, Point y, std::optional<std::size_t> ball_from = {}) {
  for (std::size_t t = level; t-- > 0;) {
    y = newton_inverse(seq[t].evaluator, y);
    if (ball_from && t >= *ball_from && !(y.norm() < 1.0))
      throw NumericError("pull back left the unit ball at level " + std::to_string(t) + "; use a larger N");
  }
  return y;
}

/// Pulls back y together with tangent columns.
inline std::pair<Point, Mat2> pull_back_frame(Sequence& seq, std::size_t level, Point y, Mat2 frame) {
  for (std::size_t t = level; t-- > 0;) {
    y = newton_inverse(seq[t].evaluator, y);
    frame = seq[t].evaluator.jacobian(y).inverse() * frame;
  }
  return {y, frame};
}

// ---------------------------------------------------------------------------
// Disk maps.

struct DiskMap {
  Point center;               // intended psi(0)
  std::vector<Point> coeffs;  // P(u) = sum coeffs[n] u^n
  double radius = 1.0;        // rho: psi is certified on |z| < rho
  std::size_t level = 0;      // M

  Point chart(cplx u) const {
    Point acc;
    for (std::size_t n = coeffs.size(); n-- > 0;) acc = u * acc + coeffs[n];
    return acc;
  }
  USeries component(int comp, int T) const {
    USeries s(T);
    for (std::size_t n = 0; n < coeffs.size() && static_cast<int>(n) <= T; ++n) s[n] = comp == 0 ? coeffs[n].z : coeffs[n].w;
    return s;
  }
};

inline Point evaluate(Sequence& seq, const DiskMap& F, cplx z) { return pull_back_point(seq, F.level, F.chart(z / F.radius)); }

/// psi'(0) with respect to z.
inline Point derivative0(Sequence& seq, const DiskMap& F) {
  const Point d = F.coeffs.size() > 1 ? (1.0 / F.radius) * F.coeffs[1] : Point{};
  const auto [x, m] = pull_back_frame(seq, F.level, F.chart(0.0), Mat2{d.z, 0.0, d.w, 0.0});
  (void)x;
  return {m.a11, m.a21};
}

/// Affine start p + z v, taken at the first level where the orbit of p is in
/// the half ball so that the initial disk lies in the basin.
inline DiskMap affine_disk(Sequence& seq, Point p, Point v, std::size_t max_iter = kDefaultMaxIter) {
  if (!(v.norm() > 0.0)) throw std::invalid_argument("affine_disk: tangent vector must be nonzero");
  Point x = p, dv = v;
  std::size_t n = 0;
  while (!(x.norm() < kHalfBall)) {
    if (n >= max_iter || !x.finite()) throw PreconditionError("affine_disk: point is not in the basin");
    dv = seq[n].evaluator.jacobian(x).apply(dv);
    x = seq[n].evaluator.evaluate(x);
    ++n;
  }
  const double rho = 0.99 * (kHalfBall - x.norm()) / dv.norm();
  return {p, {x, rho * dv}, rho, n};
}

struct ExtensionRecord {
  std::size_t n0 = 0;       // first level with the boundary image in the half ball
  std::size_t N = 0;
  std::size_t level = 0;    // n0 + N
  int T = 0;                // truncation degree L N
  double delta = 0.0;
  double eps = 0.0;
  double sup_error = 0.0;   // sampled sup |F - G| on |u| = r
  double containment = 0.0; // sampled sup |Q| on |u| = 1 + delta
  double eta = 0.0;         // sup |f^M' F - Q| / C^N
  double pin_value = 0.0;
  double pin_derivative = 0.0;
};

namespace detail {

inline std::vector<cplx> circle(double radius, std::size_t count = kCircleSamples) {
  std::vector<cplx> pts(count);
  for (std::size_t i = 0; i < count; ++i) pts[i] = std::polar(radius, kTwoPi * static_cast<double>(i) / static_cast<double>(count));
  return pts;
}

/// f_{to-1} ∘ ... ∘ f_from applied to the series pair, truncated at T.
inline std::pair<USeries, USeries> push_series(Sequence& seq, USeries x, USeries y, std::size_t from, std::size_t to) {
  const int T = x.degree();
  const USeries one = USeries::constant(T, 1.0);
  for (std::size_t t = from; t < to; ++t) {
    const JetMap2& f = seq[t].evaluator;
    USeries nx = substitute(f.first, x, y, one);
    USeries ny = substitute(f.second, x, y, one);
    x = std::move(nx);
    y = std::move(ny);
  }
  return {std::move(x), std::move(y)};
}

inline std::size_t first_half_ball_level(Sequence& seq, std::vector<Point> pts, std::size_t level, std::size_t max_iter) {
  std::size_t n = level;
  auto worst = [&] {
    double m = 0.0;
    for (const auto& p : pts) m = std::max(m, p.finite() ? p.norm() : INFINITY);
    return m;
  };
  while (!(worst() < kHalfBall)) {
    if (n - level >= max_iter) throw NumericError("extend: the disk boundary does not enter the half ball; F is not in the basin");
    for (auto& p : pts) p = seq[n].evaluator.evaluate(p);
    ++n;
  }
  return n;
}

}  // namespace detail

inline constexpr int kCurveDegreeBudget = 2048;
inline constexpr int kMapDegreeBudget = 40;

/// One extension round: returns G on the disk of radius rho (1 + delta),
/// written in its own unit variable, with G(0) = F(0), G'(0) = F'(0).
inline std::pair<DiskMap, ExtensionRecord> extend_disk(Sequence& seq, const DiskMap& F, double r, double eps,
                                                       int degree_budget = kCurveDegreeBudget) {
  if (!(eps > 0.0)) throw std::invalid_argument("extend_disk: eps must be positive");
  const SequenceSpec& spec = seq.spec();
  const ExtensionBudget budget = budget_for(spec, r);
  const double grow = 1.0 + budget.delta;

  const auto unit = detail::circle(1.0);
  const auto inner = detail::circle(r);
  const auto outer = detail::circle(grow);
  std::vector<Point> boundary;
  for (cplx u : unit) boundary.push_back(F.chart(u));
  ExtensionRecord rec;
  rec.delta = budget.delta;
  rec.eps = eps;
  rec.n0 = detail::first_half_ball_level(seq, boundary, F.level, kDefaultMaxIter);

  std::vector<Point> F_inner, F_forward_base;
  for (cplx u : inner) {
    F_forward_base.push_back(F.chart(u));
    F_inner.push_back(pull_back_point(seq, F.level, F_forward_base.back()));
  }
  const Point F0 = evaluate(seq, F, 0.0);
  const Point F1 = derivative0(seq, F);

  std::string last_reason = "no candidate";
  for (std::size_t N = 1;; ++N) {
    const int T = budget.L * static_cast<int>(N);
    if (T > degree_budget)
      throw NumericError("extend_disk: truncation degree " + std::to_string(T) + " exceeds the budget (" + last_reason + ")");
    const std::size_t M2 = rec.n0 + N;
    auto [qx, qy] = detail::push_series(seq, F.component(0, T), F.component(1, T), F.level, M2);
    double contain = 0.0;
    for (cplx u : outer) contain = std::max(contain, Point{qx.evaluate(u), qy.evaluate(u)}.norm());
    if (!(contain < kHalfBall)) {
      last_reason = "image leaves the half ball";
      continue;
    }
    double err = 0.0, fwd = 0.0;
    try {
      for (std::size_t i = 0; i < inner.size(); ++i) {
        const Point q{qx.evaluate(inner[i]), qy.evaluate(inner[i])};
        err = std::max(err, distance(pull_back_point(seq, M2, q, rec.n0), F_inner[i]));
        Point exact = F_forward_base[i];
        for (std::size_t t = F.level; t < M2; ++t) exact = seq[t].evaluator.evaluate(exact);
        fwd = std::max(fwd, distance(exact, q));
      }
    } catch (const NumericError& e) {
      last_reason = e.what();
      continue;
    }
    if (!(err < eps)) {
      last_reason = "sup error " + std::to_string(err);
      continue;
    }
    DiskMap G;
    G.center = F.center;
    G.radius = F.radius * grow;
    G.level = M2;
    double scale = 1.0;
    for (int n = 0; n <= T; ++n, scale *= grow)
      G.coeffs.push_back(scale * Point{qx[static_cast<std::size_t>(n)], qy[static_cast<std::size_t>(n)]});
    while (G.coeffs.size() > 2 && G.coeffs.back() == Point{}) G.coeffs.pop_back();
    rec.N = N;
    rec.level = M2;
    rec.T = T;
    rec.sup_error = err;
    rec.containment = contain;
    rec.eta = fwd / std::pow(spec.C, static_cast<double>(N));
    rec.pin_value = distance(evaluate(seq, G, 0.0), F0);
    rec.pin_derivative = distance(derivative0(seq, G), F1);
    const double tol1 = kPinTolerance * std::max(1.0, F1.norm());
    if (rec.pin_value > kPinTolerance * std::max(1.0, F0.norm()) || rec.pin_derivative > tol1)
      throw NumericError("extend_disk: second-order pinning failed (value " + std::to_string(rec.pin_value) +
                         ", derivative " + std::to_string(rec.pin_derivative) + ")");
    return {std::move(G), rec};
  }
}

struct CurveResult {
  DiskMap map;
  ExtensionBudget budget;
  std::vector<ExtensionRecord> rounds;
  double target_radius = 0.0;
  double pin_value = 0.0;       // |psi(0) - p|
  double pin_derivative = 0.0;  // |psi'(0) - v|
  std::size_t samples = 0;
  std::size_t members = 0;
};

/// Quasi-random point of the disk of the given radius.
inline cplx disk_sample(std::size_t i, double radius) {
  return std::polar(radius * std::sqrt(radical_inverse(i + 1, 2)), kTwoPi * radical_inverse(i + 1, 3));
}

inline CurveResult entire_curve(Sequence& seq, Point p, Point v, double target_radius, double eps0 = 1e-3,
                                double r = 0.5, std::size_t samples = 200) {
  CurveResult res;
  res.target_radius = target_radius;
  res.budget = budget_for(seq.spec(), r);
  res.map = affine_disk(seq, p, v);
  double eps = eps0;
  for (std::size_t round = 0; res.map.radius < target_radius; ++round, eps *= 0.5) {
    try {
      auto [G, rec] = extend_disk(seq, res.map, r, eps);
      res.map = std::move(G);
      res.rounds.push_back(rec);
    } catch (const NumericError& e) {
      throw NumericError("entire_curve: round " + std::to_string(round) + ": " + e.what());
    }
  }
  res.pin_value = distance(evaluate(seq, res.map, 0.0), p);
  res.pin_derivative = distance(derivative0(seq, res.map), v);
  res.samples = samples;
  for (std::size_t i = 0; i < samples; ++i) {
    const Point x = evaluate(seq, res.map, disk_sample(i, std::min(target_radius, res.map.radius)));
    res.members += orbit(seq, x, kDefaultMaxIter, kHalfBall).member;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Ball maps: Phi(z) = (f^M)^{-1}(P(z / rho)) with P a two-variable polynomial.

struct BallMap {
  Point center;
  JetMap2 chart;          // P, constant term allowed
  double radius = 1.0;
  std::size_t level = 0;
};

inline Point evaluate(Sequence& seq, const BallMap& F, Point z) {
  return pull_back_point(seq, F.level, F.chart.evaluate((1.0 / F.radius) * z));
}

inline Mat2 derivative0(Sequence& seq, const BallMap& F) {
  const Mat2 d = F.chart.linear();
  const Mat2 scaled{d.a11 / F.radius, d.a12 / F.radius, d.a21 / F.radius, d.a22 / F.radius};
  return pull_back_frame(seq, F.level, F.chart.evaluate({}), scaled).second;
}

inline BallMap affine_ball(Sequence& seq, Point p, const Mat2& frame, std::size_t max_iter = kDefaultMaxIter) {
  Point x = p;
  Mat2 m = frame;
  std::size_t n = 0;
  while (!(x.norm() < kHalfBall)) {
    if (n >= max_iter || !x.finite()) throw PreconditionError("affine_ball: point is not in the basin");
    m = seq[n].evaluator.jacobian(x) * m;
    x = seq[n].evaluator.evaluate(x);
    ++n;
  }
  const double opnorm = std::sqrt(std::norm(m.a11) + std::norm(m.a12) + std::norm(m.a21) + std::norm(m.a22));
  if (!(opnorm > 0.0)) throw std::invalid_argument("affine_ball: frame must be nonzero");
  const double rho = 0.99 * (kHalfBall - x.norm()) / opnorm;
  BallMap B;
  B.center = p;
  B.radius = rho;
  B.level = n;
  B.chart = JetMap2::linear_map(1, Mat2{rho * m.a11, rho * m.a12, rho * m.a21, rho * m.a22});
  B.chart.first.at(0, 0) = x.z;
  B.chart.second.at(0, 0) = x.w;
  return B;
}

/// Two-variable extension round; samples spheres with Halton points.
inline std::pair<BallMap, ExtensionRecord> extend_ball(Sequence& seq, const BallMap& F, double r, double eps,
                                                       int degree_budget = kMapDegreeBudget) {
  const SequenceSpec& spec = seq.spec();
  const ExtensionBudget budget = budget_for(spec, r);
  const double grow = 1.0 + budget.delta;
  std::vector<Point> unit, inner, outer;
  for (std::size_t i = 0; i < kCircleSamples; ++i) {
    unit.push_back(halton_sphere_point(i, 1.0));
    inner.push_back(halton_sphere_point(i, r));
    outer.push_back(halton_sphere_point(i, grow));
  }
  std::vector<Point> boundary;
  for (const auto& u : unit) boundary.push_back(F.chart.evaluate(u));
  ExtensionRecord rec;
  rec.delta = budget.delta;
  rec.eps = eps;
  rec.n0 = detail::first_half_ball_level(seq, boundary, F.level, kDefaultMaxIter);
  std::vector<Point> F_inner;
  for (const auto& u : inner) F_inner.push_back(pull_back_point(seq, F.level, F.chart.evaluate(u)));
  const Point F0 = evaluate(seq, F, {});
  const Mat2 F1 = derivative0(seq, F);

  std::string last_reason = "no candidate";
  for (std::size_t N = 1;; ++N) {
    const int T = budget.L * static_cast<int>(N);
    if (T > degree_budget)
      throw NumericError("extend_ball: truncation degree " + std::to_string(T) + " exceeds the budget (" + last_reason + ")");
    const std::size_t M2 = rec.n0 + N;
    const Jet2Scalar one = Jet2Scalar::constant(T, 1.0);
    Jet2Scalar x = F.chart.first.resized(T), y = F.chart.second.resized(T);
    for (std::size_t t = F.level; t < M2; ++t) {
      Jet2Scalar nx = substitute(seq[t].evaluator.first, x, y, one);
      Jet2Scalar ny = substitute(seq[t].evaluator.second, x, y, one);
      x = std::move(nx);
      y = std::move(ny);
    }
    const JetMap2 Q{x, y};
    double contain = 0.0;
    for (const auto& u : outer) contain = std::max(contain, Q.evaluate(u).norm());
    if (!(contain < kHalfBall)) {
      last_reason = "image leaves the half ball";
      continue;
    }
    double err = 0.0;
    try {
      for (std::size_t i = 0; i < inner.size(); ++i)
        err = std::max(err, distance(pull_back_point(seq, M2, Q.evaluate(inner[i]), rec.n0), F_inner[i]));
    } catch (const NumericError& e) {
      last_reason = e.what();
      continue;
    }
    if (!(err < eps)) {
      last_reason = "sup error " + std::to_string(err);
      continue;
    }
    BallMap G;
    G.center = F.center;
    G.radius = F.radius * grow;
    G.level = M2;
    G.chart = Q;
    double scale = 1.0;
    for (int d = 0; d <= T; ++d, scale *= grow)
      for (int i = 0; i <= d; ++i) {
        G.chart.first.at(i, d - i) *= scale;
        G.chart.second.at(i, d - i) *= scale;
      }
    rec.N = N;
    rec.level = M2;
    rec.T = T;
    rec.sup_error = err;
    rec.containment = contain;
    rec.pin_value = distance(evaluate(seq, G, {}), F0);
    rec.pin_derivative = (derivative0(seq, G) - F1).max_abs();
    if (rec.pin_value > kPinTolerance * std::max(1.0, F0.norm()) ||
        rec.pin_derivative > kPinTolerance * std::max(1.0, F1.max_abs()))
      throw NumericError("extend_ball: second-order pinning failed");
    return {std::move(G), rec};
  }
}

struct MapResult {
  BallMap map;
  std::vector<ExtensionRecord> rounds;
  double target_radius = 0.0;
  double det = 0.0;  // |det D Phi(0)|
  std::size_t samples = 0;
  std::size_t members = 0;
};

inline constexpr double kDetFloor = 1e-8;

/// Halton point of the ball of the given radius in C^2.
inline Point ball_sample(std::size_t i, double radius) {
  const double s = std::pow(radical_inverse(i + 1, 7), 0.25);
  return halton_sphere_point(i, radius * s);
}

inline MapResult entire_map(Sequence& seq, const BallMap& start, double target_radius, double eps0 = 1e-3,
                            double r = 0.5, std::size_t samples = 200) {
  MapResult res;
  res.target_radius = target_radius;
  res.map = start;
  double eps = eps0;
  for (std::size_t round = 0; res.map.radius < target_radius; ++round, eps *= 0.5) {
    try {
      auto [G, rec] = extend_ball(seq, res.map, r, eps);
      res.map = std::move(G);
      res.rounds.push_back(rec);
    } catch (const NumericError& e) {
      throw NumericError("entire_map: round " + std::to_string(round) + ": " + e.what());
    }
  }
  res.det = std::abs(derivative0(seq, res.map).det());
  if (!(res.det >= kDetFloor)) throw NumericError("entire_map: derivative at the origin is singular");
  res.samples = samples;
  for (std::size_t i = 0; i < samples; ++i) {
    const Point x = evaluate(seq, res.map, ball_sample(i, std::min(target_radius, res.map.radius)));
    res.members += orbit(seq, x, kDefaultMaxIter, kHalfBall).member;
  }
  return res;
}

inline MapResult entire_map(Sequence& seq, Point p, const Mat2& frame, double target_radius, double eps0 = 1e-3,
                            double r = 0.5, std::size_t samples = 200) {
  return entire_map(seq, affine_ball(seq, p, frame), target_radius, eps0, r, samples);
}

// ---------------------------------------------------------------------------
// JSON.

inline nlohmann::json to_json(const ExtensionBudget& b) {
  nlohmann::json j{{"L", b.L}, {"delta", b.delta}, {"R", b.R}, {"c", b.c}, {"r", b.r}, {"eps", b.eps}, {"horizon", b.horizon}};
  j["N_min"] = b.N_min ? nlohmann::json(*b.N_min) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const ExtensionRecord& r) {
  return {{"n0", r.n0},         {"N", r.N},
          {"level", r.level},   {"T", r.T},
          {"delta", r.delta},   {"eps", r.eps},
          {"sup_error", r.sup_error}, {"containment", r.containment},
          {"eta", r.eta},       {"pin_value", r.pin_value},
          {"pin_derivative", r.pin_derivative}};
}

inline nlohmann::json to_json(const DiskMap& F) {
  nlohmann::json coeffs = nlohmann::json::array();
  for (const auto& c : F.coeffs) coeffs.push_back(point_to_json(c));
  return {{"center", point_to_json(F.center)}, {"radius", F.radius}, {"level", F.level}, {"coeffs", coeffs}};
}

inline DiskMap disk_from_json(const nlohmann::json& j) {
  DiskMap F;
  F.center = point_from_json(j.at("center"));
  F.radius = j.at("radius").get<double>();
  F.level = j.at("level").get<std::size_t>();
  for (const auto& c : j.at("coeffs")) F.coeffs.push_back(point_from_json(c));
  return F;
}

inline nlohmann::json to_json(const CurveResult& c) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : c.rounds) rounds.push_back(to_json(r));
  return {{"budget", to_json(c.budget)}, {"rounds", rounds},         {"map", to_json(c.map)},
          {"target_radius", c.target_radius}, {"pin_value", c.pin_value}, {"pin_derivative", c.pin_derivative},
          {"samples", c.samples},        {"members", c.members}};
}

}  // namespace basinforge

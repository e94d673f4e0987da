#pragma once

// Automorphism sequences (f_n) of C^2: generators, exact evaluators, degree-k
// jets, the uniform contraction verifier and the log-ratio cocycle sigma.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "basinforge/common.hpp"
#include "basinforge/jet2.hpp"

namespace basinforge {

enum class SequenceKind { constant, alternating, fornaess_short, random_diagonal, explicit_steps };

inline std::string to_string(SequenceKind k) {
  switch (k) {
    case SequenceKind::constant: return "constant";
    case SequenceKind::alternating: return "alternating";
    case SequenceKind::fornaess_short: return "fornaess_short";
    case SequenceKind::random_diagonal: return "random_diagonal";
    case SequenceKind::explicit_steps: return "explicit";
  }
  return "unknown";
}

inline SequenceKind sequence_kind_from_string(const std::string& s) {
  if (s == "constant") return SequenceKind::constant;
  if (s == "alternating") return SequenceKind::alternating;
  if (s == "fornaess_short") return SequenceKind::fornaess_short;
  if (s == "random_diagonal") return SequenceKind::random_diagonal;
  if (s == "explicit") return SequenceKind::explicit_steps;
  throw std::invalid_argument("unknown sequence kind '" + s + "'");
}

struct SequenceSpec {
  SequenceKind kind = SequenceKind::constant;
  int k = 2;            // order of contact
  double C = 0.1;       // lower contraction bound
  double D = 0.5;       // upper contraction bound
  std::uint64_t seed = 0;
  std::vector<JetMap2> steps;  // exact polynomial maps (constant/alternating/explicit)
  double short_a0 = 0.5;       // |a_0| for fornaess_short
  double coeff_bound = 1.0;    // modulus bound of random degree-k coefficients
};

/// One map f_n: the exact polynomial and its truncation to the working degree.
struct StepMap {
  JetMap2 jet;
  JetMap2 evaluator;
  std::optional<cplx> a;  // diagonal linear coefficients, when the linear part is diagonal
  std::optional<cplx> b;

  Point operator()(Point p) const { return evaluator.evaluate(p); }
  bool diagonal() const { return a.has_value(); }
};

namespace detail {

inline StepMap make_step(const JetMap2& exact, int jet_degree) {
  StepMap s;
  s.evaluator = exact;
  s.jet = exact.resized(jet_degree);
  const Mat2 L = exact.linear();
  if (L.a12 == cplx{} && L.a21 == cplx{}) {
    s.a = L.a11;
    s.b = L.a22;
  }
  return s;
}

inline JetMap2 random_diagonal_map(const SequenceSpec& spec, std::size_t n) {
  constexpr double two_pi = 6.283185307179586;
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(static_cast<std::uint64_t>(n) >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lo = std::log(spec.C), hi = std::log(spec.D);
  auto modulus = [&] { return std::exp(lo + (hi - lo) * unit(rng)); };
  const double ma = modulus();
  const double mb = modulus();
  const double pa = two_pi * unit(rng);
  const double pb = two_pi * unit(rng);
  JetMap2 f = JetMap2::zero(spec.k);
  f.first.at(1, 0) = std::polar(ma, pa);
  f.second.at(0, 1) = std::polar(mb, pb);
  for (Jet2Scalar* comp : {&f.first, &f.second})
    for (int i = 0; i <= spec.k; ++i) {
      const double r = spec.coeff_bound * std::sqrt(unit(rng));
      comp->at(i, spec.k - i) = std::polar(r, two_pi * unit(rng));
    }
  return f;
}

inline JetMap2 fornaess_map(double a) {
  JetMap2 f = JetMap2::zero(2);
  f.first.at(2, 0) = 1.0;
  f.first.at(0, 1) = a;
  f.second.at(1, 0) = a;
  return f;
}

}  // namespace detail

/// a_n = a_0^(2^n); equality in |a_{n+1}| <= |a_n|^2.
inline double fornaess_coefficient(double a0, std::size_t n) {
  double a = a0;
  for (std::size_t i = 0; i < n && a != 0.0; ++i) a *= a;
  return a;
}

/// The exact polynomial f_n.
inline JetMap2 step_polynomial(const SequenceSpec& spec, std::size_t n) {
  switch (spec.kind) {
    case SequenceKind::constant: return spec.steps.at(0);
    case SequenceKind::alternating: return spec.steps.at(n % spec.steps.size());
    case SequenceKind::explicit_steps: return spec.steps.at(std::min(n, spec.steps.size() - 1));
    case SequenceKind::fornaess_short: return detail::fornaess_map(fornaess_coefficient(spec.short_a0, n));
    case SequenceKind::random_diagonal: return detail::random_diagonal_map(spec, n);
  }
  throw std::logic_error("unreachable sequence kind");
}

/// f_n with its jet truncated at `jet_degree` (defaults to the order of contact k).
inline StepMap step(const SequenceSpec& spec, std::size_t n, int jet_degree = -1) {
  return detail::make_step(step_polynomial(spec, n), jet_degree < 0 ? spec.k : jet_degree);
}

/// Throws std::invalid_argument describing the first violated invariant.
inline void validate(const SequenceSpec& spec) {
  if (!(spec.C > 0.0 && spec.C < spec.D && spec.D < 1.0))
    throw std::invalid_argument("sequence bounds must satisfy 0 < C < D < 1");
  if (spec.k < 2) throw std::invalid_argument("order of contact k must be >= 2");
  const bool needs_steps = spec.kind == SequenceKind::constant || spec.kind == SequenceKind::alternating ||
                           spec.kind == SequenceKind::explicit_steps;
  if (needs_steps && spec.steps.empty()) throw std::invalid_argument("sequence kind requires a non-empty steps list");
  if (spec.kind == SequenceKind::fornaess_short) {
    if (spec.k != 2) throw std::invalid_argument("fornaess_short has order of contact 2");
    if (!(std::abs(spec.short_a0) < 1.0)) throw std::invalid_argument("fornaess_short needs |a_0| < 1");
  }
  if (spec.coeff_bound < 0.0) throw std::invalid_argument("coeff_bound must be nonnegative");
  for (std::size_t s = 0; s < spec.steps.size(); ++s) {
    const JetMap2& f = spec.steps[s];
    if (!f.fixes_origin()) throw std::invalid_argument("step " + std::to_string(s) + " does not fix the origin");
    for (int d = 2; d < spec.k && d <= f.degree(); ++d)
      for (int i = 0; i <= d; ++i)
        if (f.first(i, d - i) != cplx{} || f.second(i, d - i) != cplx{})
          throw std::invalid_argument("step " + std::to_string(s) + " has a monomial of degree " +
                                      std::to_string(d) + " below the order of contact");
    if (std::abs(f.linear().det()) == 0.0)
      throw std::invalid_argument("step " + std::to_string(s) + " has a singular linear part");
  }
}

/// Caches generated steps. Growth is single-threaded; concurrent readers use
/// `cached` after `prefetch` and fall back to pure regeneration otherwise.
class Sequence {
 public:
  explicit Sequence(SequenceSpec spec) : spec_(std::move(spec)) { validate(spec_); }

  const SequenceSpec& spec() const { return spec_; }

  const StepMap& operator[](std::size_t n) {
    prefetch(n + 1);
    return cache_[n];
  }
  void prefetch(std::size_t count) {
    while (cache_.size() < count) cache_.push_back(step(spec_, cache_.size()));
  }
  const StepMap* cached(std::size_t n) const { return n < cache_.size() ? &cache_[n] : nullptr; }

  /// f_n(p), safe to call concurrently.
  Point apply(std::size_t n, Point p) const {
    if (const StepMap* s = cached(n)) return (*s)(p);
    return step_polynomial(spec_, n).evaluate(p);
  }

 private:
  SequenceSpec spec_;
  std::vector<StepMap> cache_;
};

// ---------------------------------------------------------------------------
// Uniform contraction bounds C|z| <= |f_n(z)| <= D|z|.

inline constexpr std::array<double, 3> kBoundRadii{0.1, 0.5, 1.0};

struct StepBounds {
  std::size_t n = 0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  bool lower_violation = false;
  bool upper_violation = false;
};

struct RadiusBounds {
  double radius = 0.0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  bool violated = false;
};

struct UniformBoundsReport {
  double C = 0.0, D = 0.0;
  std::size_t samples = 0;
  std::vector<StepBounds> steps;
  std::vector<RadiusBounds> radii;
  bool any_lower_violation = false;
  bool any_upper_violation = false;
  std::optional<std::size_t> first_lower_violation;
  /// Largest sampled radius with no violation at any step.
  std::optional<double> clean_radius;
};

inline UniformBoundsReport verify_uniform_bounds(const SequenceSpec& spec, std::size_t n_max, std::size_t samples) {
  if (samples == 0) throw std::invalid_argument("verify_uniform_bounds needs at least one sample");
  UniformBoundsReport rep;
  rep.C = spec.C;
  rep.D = spec.D;
  rep.samples = samples;
  for (double r : kBoundRadii) rep.radii.push_back({r, INFINITY, 0.0, false});
  for (std::size_t n = 0; n <= n_max; ++n) {
    const JetMap2 f = step_polynomial(spec, n);
    StepBounds sb{n, INFINITY, 0.0, false, false};
    for (auto& rb : rep.radii) {
      double lo = INFINITY, hi = 0.0;
      for (std::size_t s = 0; s < samples; ++s) {
        const Point p = halton_sphere_point(s, rb.radius);
        const double ratio = f.evaluate(p).norm() / p.norm();
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
      rb.min_ratio = std::min(rb.min_ratio, lo);
      rb.max_ratio = std::max(rb.max_ratio, hi);
      if (lo < spec.C || hi > spec.D) rb.violated = true;
      sb.min_ratio = std::min(sb.min_ratio, lo);
      sb.max_ratio = std::max(sb.max_ratio, hi);
    }
    sb.lower_violation = sb.min_ratio < spec.C;
    sb.upper_violation = sb.max_ratio > spec.D;
    if (sb.lower_violation && !rep.first_lower_violation) rep.first_lower_violation = n;
    rep.any_lower_violation = rep.any_lower_violation || sb.lower_violation;
    rep.any_upper_violation = rep.any_upper_violation || sb.upper_violation;
    rep.steps.push_back(sb);
  }
  for (const auto& rb : rep.radii)
    if (!rb.violated) rep.clean_radius = rb.radius;
    else break;
  return rep;
}

inline nlohmann::json to_json(const UniformBoundsReport& rep) {
  nlohmann::json j;
  j["C"] = rep.C;
  j["D"] = rep.D;
  j["samples"] = rep.samples;
  j["any_lower_violation"] = rep.any_lower_violation;
  j["any_upper_violation"] = rep.any_upper_violation;
  j["first_lower_violation"] = rep.first_lower_violation ? nlohmann::json(*rep.first_lower_violation) : nlohmann::json();
  j["clean_radius"] = rep.clean_radius ? nlohmann::json(*rep.clean_radius) : nlohmann::json();
  j["note"] = "explicit maps are accepted as automorphisms without a global invertibility check";
  auto radii = nlohmann::json::array();
  for (const auto& r : rep.radii)
    radii.push_back({{"radius", r.radius}, {"min_ratio", r.min_ratio}, {"max_ratio", r.max_ratio}, {"violated", r.violated}});
  j["radii"] = radii;
  auto steps = nlohmann::json::array();
  for (const auto& s : rep.steps)
    steps.push_back({{"n", s.n}, {"min_ratio", s.min_ratio}, {"max_ratio", s.max_ratio},
                     {"lower_violation", s.lower_violation}, {"upper_violation", s.upper_violation}});
  j["steps"] = steps;
  return j;
}

// ---------------------------------------------------------------------------
// sigma_{m,n} = log|a_{m,n} / b_{m,n}|, accumulated in log space.

/// log|a_n| - log|b_n|; throws for a non-diagonal step.
inline double sigma_step(const StepMap& s, std::size_t n) {
  if (!s.diagonal()) throw NumericError("sigma: step " + std::to_string(n) + " has a non-diagonal linear part");
  return std::log(std::abs(*s.a)) - std::log(std::abs(*s.b));
}

inline double sigma(const SequenceSpec& spec, std::size_t m, std::size_t n) {
  if (m < n) throw std::invalid_argument("sigma requires m >= n");
  CompensatedSum acc;
  for (std::size_t j = n; j < m; ++j) acc.add(sigma_step(step(spec, j), j));
  return acc.value();
}

inline double sigma(Sequence& seq, std::size_t m, std::size_t n) {
  if (m < n) throw std::invalid_argument("sigma requires m >= n");
  CompensatedSum acc;
  for (std::size_t j = n; j < m; ++j) acc.add(sigma_step(seq[j], j));
  return acc.value();
}

/// Per-step increments log|a_n| - log|b_n| for n in [0, count).
inline std::vector<double> sigma_steps(Sequence& seq, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t n = 0; n < count; ++n) out[n] = sigma_step(seq[n], n);
  return out;
}

// ---------------------------------------------------------------------------
// SequenceSpec JSON: {kind, k, C, D, seed, steps[], short_a0, coeff_bound}.

inline nlohmann::json to_json(const SequenceSpec& spec) {
  nlohmann::json j;
  j["kind"] = to_string(spec.kind);
  j["k"] = spec.k;
  j["C"] = spec.C;
  j["D"] = spec.D;
  j["seed"] = spec.seed;
  j["short_a0"] = spec.short_a0;
  j["coeff_bound"] = spec.coeff_bound;
  auto steps = nlohmann::json::array();
  for (const auto& s : spec.steps) steps.push_back(to_json(s));
  j["steps"] = steps;
  return j;
}

inline SequenceSpec spec_from_json(const nlohmann::json& j) {
  SequenceSpec spec;
  spec.kind = sequence_kind_from_string(j.at("kind").get<std::string>());
  spec.k = j.value("k", 2);
  spec.C = j.at("C").get<double>();
  spec.D = j.at("D").get<double>();
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.short_a0 = j.value("short_a0", 0.5);
  spec.coeff_bound = j.value("coeff_bound", 1.0);
  if (j.contains("steps"))
    for (const auto& s : j.at("steps")) spec.steps.push_back(jet_from_json(s));
  validate(spec);
  return spec;
}

inline std::string spec_hash(const SequenceSpec& spec) { return hex64(fnv1a64(to_json(spec).dump())); }

}  // namespace basinforge

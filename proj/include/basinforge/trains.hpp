#pragma once

// Train pipeline for diagonal sequences: select the trains from sigma, prepare
// the degree-k terms, direct each train with diagonal rescalings, connect them
// with triangular shears and evaluate the resulting limit map.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "basinforge/autoseq.hpp"
#include "basinforge/basin.hpp"
#include "basinforge/jet2.hpp"
#include "basinforge/normalform.hpp"

namespace basinforge {

inline constexpr double kLogTolerance = 1e-9;
inline constexpr double kDiagramTolerance = 1e-10;
inline constexpr double kTailTolerance = 1e-14;
inline constexpr double kRatioGuard = 1e-9;

// ---------------------------------------------------------------------------
// Selection.

/// Ĩ_j = [p, q) and I_j = [p, end). j is 1-based; odd trains contract the
/// first coordinate less on average.
struct Train {
  int j = 1;
  std::size_t p = 0;
  std::size_t q = 0;
  std::size_t end = 0;
  bool tilde_closed = true;  // false only when Ĩ_1 never reached its threshold
  bool closed = true;        // false for the last train, which runs to n_max

  bool odd() const { return j % 2 == 1; }
  double sign() const { return odd() ? 1.0 : -1.0; }  // (-1)^{j+1}
};

struct TrainPartition {
  int k = 2;
  std::size_t n_max = 0;
  std::vector<Train> trains;
  double initial_dip = 0.0;  // max(0, -min sigma_{n,0}) over Ĩ_1

  std::vector<std::size_t> boundaries() const {
    std::vector<std::size_t> out;
    for (const auto& t : trains) out.push_back(t.p);
    return out;
  }
  std::size_t closed_count() const {
    return static_cast<std::size_t>(std::count_if(trains.begin(), trains.end(), [](const Train& t) { return t.closed; }));
  }
  /// Index into `trains` of the train containing n; indices past n_max belong to the last train.
  std::size_t train_of(std::size_t n) const {
    auto it = std::upper_bound(trains.begin(), trains.end(), n, [](std::size_t v, const Train& t) { return v < t.p; });
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - trains.begin() - 1));
  }
};

/// S_0 = 0, S_{n+1} = S_n + steps[n], compensated.
inline std::vector<double> prefix_sums(const std::vector<double>& steps) {
  std::vector<double> S(steps.size() + 1, 0.0);
  CompensatedSum acc;
  for (std::size_t n = 0; n < steps.size(); ++n) {
    acc.add(steps[n]);
    S[n + 1] = acc.value();
  }
  return S;
}

inline double ipow(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

/// Streaming selection over per-step sigma increments log|a_n/b_n|.
/// Ties within `tol` resolve to the smallest admissible r.
inline TrainPartition select_trains(const std::vector<double>& steps, int k, double tol = kLogTolerance) {
  if (k < 2) throw std::invalid_argument("select_trains: k must be >= 2");
  const std::size_t N = steps.size();
  const auto S = prefix_sums(steps);
  TrainPartition part;
  part.k = k;
  part.n_max = N;

  std::size_t l = 1;
  while (l <= N && S[l] < k - tol) ++l;
  if (l > N) {
    part.trains.push_back({1, 0, N, N, false, false});
    double lo = 0.0;
    for (double v : S) lo = std::min(lo, v);
    part.initial_dip = -lo;
    return part;
  }
  double lo = 0.0;
  for (std::size_t n = 0; n <= l; ++n) lo = std::min(lo, S[n]);
  part.initial_dip = -lo;

  std::size_t p = 0, q = l;
  for (int j = 1;; ++j) {
    const double sgn = (j % 2 == 0) ? 1.0 : -1.0;  // (-1)^j
    const double thr = ipow(k, j + 1);
    double best = -std::numeric_limits<double>::infinity();
    std::optional<std::size_t> r_found, s_found;
    for (std::size_t s = q; s <= N; ++s) {
      best = std::max(best, -sgn * S[s]);
      const double val = sgn * S[s] + best;
      if (val >= thr - tol) {
        for (std::size_t r = q; r <= s; ++r)
          if (sgn * (S[s] - S[r]) >= val - tol) {
            r_found = r;
            break;
          }
        s_found = s;
        break;
      }
    }
    if (!s_found) {
      part.trains.push_back({j, p, q, N, true, false});
      return part;
    }
    part.trains.push_back({j, p, q, *r_found, true, true});
    p = *r_found;
    q = *s_found;
  }
}

inline TrainPartition select_trains(Sequence& seq, int k, std::size_t n_max) {
  return select_trains(sigma_steps(seq, n_max), k);
}

struct PartitionReport {
  std::size_t eq14 = 0, eq15 = 0, eq16 = 0;
  std::vector<std::string> messages;  // first few violations

  std::size_t violations() const { return eq14 + eq15 + eq16; }
  bool ok() const { return violations() == 0; }
};

/// Checks the three families of train inequalities against stored sigma
/// values. The sign condition on Ĩ_1 is skipped: the selection rule does not
/// imply it, and directing absorbs the dip through `initial_dip`.
inline PartitionReport check_partition(const TrainPartition& part, const std::vector<double>& steps, double C,
                                       double tol = kLogTolerance) {
  const auto S = prefix_sums(steps);
  PartitionReport rep;
  auto flag = [&](std::size_t& counter, const std::string& msg) {
    ++counter;
    if (rep.messages.size() < 8) rep.messages.push_back(msg);
  };
  const int k = part.k;
  for (const auto& t : part.trains) {
    const double sg = t.sign();
    const std::string tag = "train " + std::to_string(t.j) + ": ";
    if (t.j >= 2)
      for (std::size_t n = t.p; n < t.q; ++n)
        if (sg * (S[n] - S[t.p]) < -tol) flag(rep.eq14, tag + "sign on tilde interval fails at n=" + std::to_string(n));
    if (!t.tilde_closed) continue;
    for (std::size_t n = t.p; n < t.q; ++n)
      if (sg * (S[t.q] - S[n]) < -tol) flag(rep.eq15, tag + "tail sign fails at n=" + std::to_string(n));
    const double span = sg * (S[t.q] - S[t.p]);
    const double kj = ipow(k, t.j);
    if (span < kj - tol || span > kj - std::log(C) + tol)
      flag(rep.eq15, tag + "tilde span " + std::to_string(span) + " outside [k^j, k^j - log C]");
    // Train lower bound on q <= l <= n <= end: min over l of sg*(S_n - S_l) = sg*S_n - max sg*S_l.
    const double thr = ipow(k, t.j + 1);
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t n = t.q; n <= t.end; ++n) {
      hi = std::max(hi, sg * S[n]);
      if (!(sg * S[n] - hi > -thr)) flag(rep.eq16, tag + "drop below -k^{j+1} at n=" + std::to_string(n));
    }
    if (t.closed && sg * (S[t.end] - S[t.q]) < -tol) flag(rep.eq16, tag + "end sign fails");
  }
  return rep;
}

struct SparseTerm {
  int j = 0;
  std::size_t length = 0;       // |I_j|
  double term = 0.0;            // |I_j| / k^j
  double partial_sum = 0.0;     // S_J
  std::size_t next_tilde = 0;   // |Ĩ_{j+1}|
  double next_tilde_bound = 0;  // k^{j+1} / log(D/C)
};

struct SparseReport {
  bool meaningful = false;  // false when no train closed
  std::vector<SparseTerm> terms;
};

/// Partial sums of |I_j|/k^j over the first J closed trains (all when J = 0).
inline SparseReport sparse_check(const TrainPartition& part, double C, double D, std::size_t J = 0) {
  SparseReport rep;
  CompensatedSum acc;
  for (std::size_t i = 0; i < part.trains.size(); ++i) {
    const auto& t = part.trains[i];
    if (!t.closed) break;
    if (J != 0 && rep.terms.size() >= J) break;
    SparseTerm st;
    st.j = t.j;
    st.length = t.end - t.p;
    st.term = static_cast<double>(st.length) / ipow(part.k, t.j);
    acc.add(st.term);
    st.partial_sum = acc.value();
    const auto& nxt = part.trains[i + 1];
    st.next_tilde = nxt.q - nxt.p;
    st.next_tilde_bound = ipow(part.k, t.j + 1) / std::log(D / C);
    rep.terms.push_back(st);
  }
  rep.meaningful = !rep.terms.empty();
  return rep;
}

inline nlohmann::json to_json(const TrainPartition& part) {
  nlohmann::json trains = nlohmann::json::array();
  for (const auto& t : part.trains)
    trains.push_back({{"j", t.j}, {"p", t.p}, {"q", t.q}, {"end", t.end},
                      {"tilde_closed", t.tilde_closed}, {"closed", t.closed}});
  return {{"k", part.k}, {"n_max", part.n_max}, {"initial_dip", part.initial_dip}, {"trains", trains}};
}

inline TrainPartition partition_from_json(const nlohmann::json& j) {
  TrainPartition part;
  part.k = j.at("k").get<int>();
  part.n_max = j.at("n_max").get<std::size_t>();
  part.initial_dip = j.at("initial_dip").get<double>();
  for (const auto& t : j.at("trains"))
    part.trains.push_back({t.at("j").get<int>(), t.at("p").get<std::size_t>(), t.at("q").get<std::size_t>(),
                           t.at("end").get<std::size_t>(), t.at("tilde_closed").get<bool>(),
                           t.at("closed").get<bool>()});
  return part;
}

// ---------------------------------------------------------------------------
// Preparation: remove degree-k monomials with non-autonomous shears.

/// Coefficients of a map of the form (a z + c w^k, b w + d z^k).
struct PreparedStep {
  cplx a{}, b{}, c{}, d{};
};

inline JetMap2 prepared_jet(const PreparedStep& s, int k) {
  JetMap2 f = JetMap2::linear_map(k, Mat2::diagonal(s.a, s.b));
  f.first.at(0, k) += s.c;
  f.second.at(k, 0) += s.d;
  return f;
}

struct Preparation {
  int k = 2;
  std::vector<JetMap2> shears;      // Id + P_n, n = 0..N
  std::vector<PreparedStep> steps;  // n = 0..N-1
  std::vector<double> residuals;    // diagram residual per step
  double max_ratio = 0.0;           // largest removable recursion ratio seen
};

/// Number of extra steps after n_max so that ratio^M * sup_start < kTailTolerance.
inline std::size_t tail_length(double ratio, double sup_start) {
  if (!(sup_start > 0.0) || !(ratio > 0.0)) return 1;
  if (ratio >= 1.0) throw NumericError("tail_length: recursion ratio is not contracting");
  const double m = std::log(kTailTolerance / sup_start) / std::log(ratio);
  return static_cast<std::size_t>(std::clamp(std::ceil(m), 1.0, 1e6));
}

namespace detail {

inline cplx monomial_ratio(cplx a, cplx b, int i, int j, cplx target) {
  cplx r = 1.0;
  for (int t = 0; t < i; ++t) r *= a;
  for (int t = 0; t < j; ++t) r *= b;
  return r / target;
}

inline void require_diagonal_contact(const StepMap& s, std::size_t n, int k) {
  if (!s.diagonal()) throw NumericError("step " + std::to_string(n) + " has a non-diagonal linear part");
  const JetMap2& f = s.jet;
  for (int d = 2; d < k && d <= f.degree(); ++d)
    for (int i = 0; i <= d; ++i)
      if (f.first(i, d - i) != cplx{} || f.second(i, d - i) != cplx{})
        throw PreconditionError("step " + std::to_string(n) + " has nonlinear terms below degree k");
}

}  // namespace detail

/// Solves p_n = ratio_n p_{n+1} + coeff_n / target_n backward from p_N = 0 for
/// every removable degree-k monomial. With keep_axes the monomials w^k in the
/// first and z^k in the second component survive; otherwise all are removed.
inline Preparation prepare(Sequence& seq, int k, std::size_t N, bool keep_axes = true) {
  Preparation prep;
  prep.k = k;
  seq.prefetch(N);
  for (std::size_t n = 0; n < N; ++n) detail::require_diagonal_contact(seq[n], n, k);

  auto coeff = [&](std::size_t n, int comp, int i) {
    const JetMap2& f = seq[n].jet;
    if (f.degree() < k) return cplx{};
    return comp == 0 ? f.first(i, k - i) : f.second(i, k - i);
  };

  prep.shears.assign(N + 1, JetMap2::identity(k));
  for (int comp = 0; comp < 2; ++comp)
    for (int i = 0; i <= k; ++i) {
      if (keep_axes && ((comp == 0 && i == 0) || (comp == 1 && i == k))) continue;
      cplx p = 0.0;
      for (std::size_t n = N; n-- > 0;) {
        const cplx a = *seq[n].a, b = *seq[n].b;
        const cplx target = comp == 0 ? a : b;
        const cplx ratio = detail::monomial_ratio(a, b, i, k - i, target);
        prep.max_ratio = std::max(prep.max_ratio, std::abs(ratio));
        if (std::abs(ratio) >= 1.0 - kRatioGuard)
          throw NumericError("prepare: recursion ratio " + std::to_string(std::abs(ratio)) + " at step " +
                             std::to_string(n) + " for " + detail::monomial_name(comp + 1, i, k - i));
        p = ratio * p + coeff(n, comp, i) / target;
        (comp == 0 ? prep.shears[n].first : prep.shears[n].second).at(i, k - i) = p;
      }
    }

  prep.steps.resize(N);
  prep.residuals.resize(N);
  for (std::size_t n = 0; n < N; ++n) {
    PreparedStep& s = prep.steps[n];
    s.a = *seq[n].a;
    s.b = *seq[n].b;
    if (keep_axes) {
      s.c = coeff(n, 0, 0);
      s.d = coeff(n, 1, k);
    }
    prep.residuals[n] =
        check_diagram(prep.shears[n], prep.shears[n + 1], seq[n].jet.resized(k), prepared_jet(s, k), k);
  }
  return prep;
}

/// Supremum of |coefficient / target| over the degree-k terms of f_0..f_{n-1}.
inline double max_scaled_coefficient(Sequence& seq, int k, std::size_t n_count) {
  double m = 0.0;
  for (std::size_t n = 0; n < n_count; ++n) {
    const StepMap& s = seq[n];
    if (s.jet.degree() < k || !s.diagonal()) continue;
    const double lo = std::min(std::abs(*s.a), std::abs(*s.b));
    for (int i = 0; i <= k; ++i)
      m = std::max({m, std::abs(s.jet.first(i, k - i)) / lo, std::abs(s.jet.second(i, k - i)) / lo});
  }
  return m;
}

// ---------------------------------------------------------------------------
// Directing: l_n(z, w) = (theta_n z, tau_n w), kept in log space.

struct DirectingChain {
  int k = 2;
  std::vector<double> log_theta;      // n = 0..N
  std::vector<double> log_tau;
  std::vector<int> axis;              // n = 0..N-1: +1 on odd trains, -1 on even trains
  std::vector<PreparedStep> directed; // transformed coefficients
};

/// Start values at p_1: the train-start hypothesis, lifted when sigma dips
/// below zero on Ĩ_1 so that theta <= tau^k survives the dip.
inline std::pair<double, double> initial_logs(int k, double dip) {
  const double kk = static_cast<double>(k);
  const double s = std::max(0.0, (dip - kk) / (kk - 1.0 / kk));
  return {kk * kk / (kk * kk - 1.0) + s, kk / (kk * kk - 1.0) + s / kk + dip};
}

/// Rule for step n is taken from the train containing n. Throws on a
/// violation of theta^k >= tau and theta <= tau^k.
inline DirectingChain direct_trains(const TrainPartition& part, const std::vector<PreparedStep>& steps,
                                    double tol = kLogTolerance) {
  const int k = part.k;
  const std::size_t N = steps.size();
  DirectingChain dc;
  dc.k = k;
  dc.log_theta.resize(N + 1);
  dc.log_tau.resize(N + 1);
  dc.axis.resize(N);
  dc.directed.resize(N);
  std::tie(dc.log_theta[0], dc.log_tau[0]) = initial_logs(k, part.initial_dip);

  auto check26 = [&](std::size_t n) {
    const double lt = dc.log_theta[n], lu = dc.log_tau[n];
    if (k * lt < lu - tol || lt > k * lu + tol)
      throw NumericError("direct_trains: distortion bound violated at n=" + std::to_string(n) +
                         " (log theta " + std::to_string(lt) + ", log tau " + std::to_string(lu) + ")");
  };
  check26(0);
  for (std::size_t n = 0; n < N; ++n) {
    const bool odd = part.trains[part.train_of(n)].odd();
    dc.axis[n] = odd ? 1 : -1;
    const double la = std::log(std::abs(steps[n].a)), lb = std::log(std::abs(steps[n].b));
    const double lt = dc.log_theta[n], lu = dc.log_tau[n];
    double lt1 = lt, lu1 = lu;
    if (odd) {
      if (la < lb) lt1 = lt + (lb - la);
      if (lb < la) lu1 = std::min(lu + (la - lb), k * lt1);
    } else {
      if (lb < la) lu1 = lu + (la - lb);
      if (la < lb) lt1 = std::min(lt + (lb - la), k * lu1);
    }
    dc.log_theta[n + 1] = lt1;
    dc.log_tau[n + 1] = lu1;
    check26(n + 1);
    const PreparedStep& s = steps[n];
    PreparedStep& t = dc.directed[n];
    t.a = s.a * std::exp(lt1 - lt);
    t.b = s.b * std::exp(lu1 - lu);
    t.c = s.c * std::exp(lt1 - k * lu);
    t.d = s.d * std::exp(lu1 - k * lt);
  }
  return dc;
}

struct DirectingReport {
  std::size_t distortion = 0;   // theta^k >= tau, theta <= tau^k
  std::size_t domination = 0;   // per-train sign of log|ã/b̃|
  std::size_t hypothesis = 0;   // train-start lower bounds
  std::size_t bounds = 0;       // coefficient moduli
  double max_linear = 0.0;      // sup |ã|, |b̃|
  double max_growth = 0.0;      // sup |c̃|/|c|, |d̃|/|d|

  std::size_t violations() const { return distortion + domination + hypothesis + bounds; }
};

/// Bounds checked: |ã|, |b̃| <= D and degree-k moduli grow by at most D/C.
inline DirectingReport check_directing(const DirectingChain& dc, const TrainPartition& part,
                                       const std::vector<PreparedStep>& steps, double C, double D,
                                       double tol = kLogTolerance) {
  DirectingReport rep;
  const int k = dc.k;
  const double kk = static_cast<double>(k);
  for (std::size_t n = 0; n < dc.log_theta.size(); ++n)
    if (k * dc.log_theta[n] < dc.log_tau[n] - tol || dc.log_theta[n] > k * dc.log_tau[n] + tol) ++rep.distortion;
  for (std::size_t n = 0; n < dc.directed.size(); ++n) {
    const auto& t = dc.directed[n];
    const double gap = std::log(std::abs(t.a)) - std::log(std::abs(t.b));
    if (dc.axis[n] * gap < -tol) ++rep.domination;
    rep.max_linear = std::max({rep.max_linear, std::abs(t.a), std::abs(t.b)});
    if (std::abs(t.a) > D * (1 + 1e-12) || std::abs(t.b) > D * (1 + 1e-12)) ++rep.bounds;
    const auto& s = steps[n];
    if (s.c != cplx{}) rep.max_growth = std::max(rep.max_growth, std::abs(t.c) / std::abs(s.c));
    if (s.d != cplx{}) rep.max_growth = std::max(rep.max_growth, std::abs(t.d) / std::abs(s.d));
  }
  if (rep.max_growth > (D / C) * (1 + 1e-12)) ++rep.bounds;
  for (const auto& t : part.trains) {
    if (t.p >= dc.log_theta.size()) break;
    const double kj = ipow(k, t.j);
    const double big = kk * kj / (kk * kk - 1.0) - tol, small = kj / (kk * kk - 1.0) - tol;
    const double lt = dc.log_theta[t.p], lu = dc.log_tau[t.p];
    if (t.odd() ? (lt < big || lu < small) : (lu < big || lt < small)) ++rep.hypothesis;
  }
  return rep;
}

/// l_{n+1} ∘ f ∘ l_n^{-1} for an exact polynomial f.
inline JetMap2 directed_map(const JetMap2& f, double lt, double lu, double lt1, double lu1) {
  JetMap2 out = f;
  for (int d = 0; d <= f.degree(); ++d)
    for (int i = 0; i <= d; ++i) {
      const double in = i * lt + (d - i) * lu;
      out.first.at(i, d - i) *= std::exp(lt1 - in);
      out.second.at(i, d - i) *= std::exp(lu1 - in);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Connecting and the assembled chain.

/// h_n = hc_n ∘ l_n ∘ hp_n conjugates f_n to the triangular g_n up to degree k.
struct ConjugacyChain {
  int k = 2;
  std::size_t n_max = 0;
  std::size_t horizon = 0;  // N: recursions start from zero here
  bool directed = true;     // false for the fast path
  TrainPartition partition;
  std::vector<JetMap2> prep;       // hp_n, n = 0..N
  std::vector<double> log_theta;   // n = 0..N
  std::vector<double> log_tau;
  std::vector<int> axis;           // n = 0..N: +1 shear in z, -1 shear in w, 0 none
  std::vector<cplx> shear;         // alpha_n or beta_n, n = 0..N
  std::vector<PreparedStep> target;  // g_n: a, b and the off-axis coefficient in c (n = 0..N-1)
  std::vector<double> residuals;       // connecting residual per step
  std::vector<double> prep_residuals;  // preparation residual per step

  JetMap2 h(std::size_t n) const {
    JetMap2 out = JetMap2::identity(k);
    if (axis[n] > 0) out.first.at(0, k) = shear[n];
    if (axis[n] < 0) out.second.at(k, 0) = shear[n];
    return out;
  }
  JetMap2 g(std::size_t n) const {
    JetMap2 out = JetMap2::linear_map(k, Mat2::diagonal(target[n].a, target[n].b));
    if (axis[n] > 0) out.second.at(k, 0) = target[n].c;
    if (axis[n] < 0) out.first.at(0, k) = target[n].c;
    return out;
  }
  double max_residual() const {
    double m = 0.0;
    for (double r : residuals) m = std::max(m, r);
    for (double r : prep_residuals) m = std::max(m, r);
    return m;
  }
  /// sup |alpha_n| over odd trains and sup |beta_n| over even trains.
  std::pair<double, double> shear_sup() const {
    double a = 0.0, b = 0.0;
    for (std::size_t n = 0; n + 1 < shear.size(); ++n)
      (axis[n] > 0 ? a : b) = std::max(axis[n] > 0 ? a : b, std::abs(shear[n]));
    return {a, b};
  }
};

/// Backward shear recursions on every train. At a junction the shear depends
/// only on the current step; the next train's shear moves into g.
inline void connect_trains(ConjugacyChain& ch, const DirectingChain& dc, double tol = kDiagramTolerance) {
  const int k = dc.k;
  const std::size_t N = dc.directed.size();
  ch.axis.assign(N + 1, 0);
  std::copy(dc.axis.begin(), dc.axis.end(), ch.axis.begin());
  ch.axis[N] = N > 0 ? dc.axis[N - 1] : 1;
  ch.shear.assign(N + 1, cplx{});
  ch.target.assign(N, PreparedStep{});
  ch.residuals.assign(N, 0.0);
  for (std::size_t n = N; n-- > 0;) {
    const PreparedStep& s = dc.directed[n];
    const int ax = ch.axis[n], next = ch.axis[n + 1];
    const cplx nxt = ch.shear[n + 1];
    PreparedStep& g = ch.target[n];
    g.a = s.a;
    g.b = s.b;
    if (ax > 0) {
      if (next > 0) {
        ch.shear[n] = std::pow(s.b, k) / s.a * nxt + s.c / s.a;
        g.c = s.d;
      } else {
        ch.shear[n] = s.c / s.a;
        g.c = s.d + nxt * std::pow(s.a, k);
      }
    } else {
      if (next < 0) {
        ch.shear[n] = std::pow(s.a, k) / s.b * nxt + s.d / s.b;
        g.c = s.c;
      } else {
        ch.shear[n] = s.d / s.b;
        g.c = s.c + nxt * std::pow(s.b, k);
      }
    }
  }
  for (std::size_t n = 0; n < N; ++n) {
    ch.residuals[n] = check_diagram(ch.h(n), ch.h(n + 1), prepared_jet(dc.directed[n], k), ch.g(n), k);
    if (!(ch.residuals[n] <= tol))
      throw NumericError("connect_trains: diagram residual " + std::to_string(ch.residuals[n]) + " at n=" +
                         std::to_string(n));
  }
}

inline void require_pipeline_precondition(const SequenceSpec& spec, int k) {
  if (!(std::pow(spec.D, k + 1) < spec.C))
    throw PreconditionError("trains: requires D^(k+1) < C (D=" + std::to_string(spec.D) +
                            ", C=" + std::to_string(spec.C) + ", k=" + std::to_string(k) + ")");
}

/// Full pipeline on [0, n_max), extended by a tail so every backward
/// recursion is converged to kTailTolerance on [0, n_max].
inline ConjugacyChain build_chain(Sequence& seq, int k, std::size_t n_max) {
  const SequenceSpec& spec = seq.spec();
  require_pipeline_precondition(spec, k);
  ConjugacyChain ch;
  ch.k = k;
  ch.n_max = n_max;
  ch.partition = select_trains(seq, k, n_max);

  const double ratio = std::pow(spec.D, k - 1);
  const double sup_start = max_scaled_coefficient(seq, k, n_max) * (spec.D / spec.C) / (1.0 - ratio);
  ch.horizon = n_max + tail_length(ratio, sup_start);

  Preparation prep = prepare(seq, k, ch.horizon, true);
  DirectingChain dc = direct_trains(ch.partition, prep.steps);
  ch.prep = std::move(prep.shears);
  ch.prep_residuals = std::move(prep.residuals);
  connect_trains(ch, dc);
  ch.log_theta = std::move(dc.log_theta);
  ch.log_tau = std::move(dc.log_tau);
  return ch;
}

/// Single-train chain when D^k < C: every degree-k monomial is removable and
/// g_n is the linear part of f_n.
inline ConjugacyChain wold_fastpath(Sequence& seq, int k, std::size_t n_max) {
  const SequenceSpec& spec = seq.spec();
  if (!(std::pow(spec.D, k) < spec.C))
    throw PreconditionError("wold_fastpath: requires D^k < C; use the full train pipeline");
  ConjugacyChain ch;
  ch.k = k;
  ch.n_max = n_max;
  ch.directed = false;
  const double ratio = std::pow(spec.D, k) / spec.C;
  const double sup_start = max_scaled_coefficient(seq, k, n_max) / (1.0 - ratio);
  ch.horizon = n_max + tail_length(ratio, sup_start);
  Preparation prep = prepare(seq, k, ch.horizon, false);
  const std::size_t N = ch.horizon;
  ch.prep = std::move(prep.shears);
  ch.prep_residuals = std::move(prep.residuals);
  ch.log_theta.assign(N + 1, 0.0);
  ch.log_tau.assign(N + 1, 0.0);
  ch.axis.assign(N + 1, 0);
  ch.shear.assign(N + 1, cplx{});
  ch.target.resize(N);
  for (std::size_t n = 0; n < N; ++n) ch.target[n] = {prep.steps[n].a, prep.steps[n].b, 0.0, 0.0};
  ch.residuals.assign(N, 0.0);
  for (std::size_t n = 0; n < N; ++n)
    if (!(ch.prep_residuals[n] <= kDiagramTolerance))
      throw NumericError("wold_fastpath: diagram residual " + std::to_string(ch.prep_residuals[n]) + " at n=" +
                         std::to_string(n));
  ch.partition.k = k;
  ch.partition.n_max = n_max;
  ch.partition.trains.push_back({1, 0, n_max, n_max, false, false});
  return ch;
}

// ---------------------------------------------------------------------------
// Evaluation of Phi_n = l_0^{-1} ∘ (g_{n-1} ∘ ... ∘ g_0)^{-1} ∘ h_n ∘ (f_{n-1} ∘ ... ∘ f_0).

/// h_n applied to a point x = f^n(p).
inline Point chain_apply(const ConjugacyChain& ch, std::size_t n, Point x) {
  Point y = ch.prep[n].evaluate(x);
  y = {std::exp(ch.log_theta[n]) * y.z, std::exp(ch.log_tau[n]) * y.w};
  y = ch.h(n).evaluate(y);
  if (!y.finite()) throw NumericError("biholo: overflow applying the conjugacy at n=" + std::to_string(n));
  return y;
}

/// (g_{n-1} ∘ ... ∘ g_0)^{-1} followed by l_0^{-1}. The derivative of the
/// unnormalized limit at 0 is exactly l_0, so the result has derivative Id.
inline Point pull_back(const ConjugacyChain& ch, std::size_t n, Point y) {
  for (std::size_t t = n; t-- > 0;) y = triangular_inverse(ch.g(t), y);
  return {std::exp(-ch.log_theta[0]) * y.z, std::exp(-ch.log_tau[0]) * y.w};
}

inline Point biholo_eval(const Sequence& seq, const ConjugacyChain& ch, Point p, std::size_t n) {
  if (n > ch.horizon) throw std::invalid_argument("biholo_eval: n exceeds the chain horizon");
  Point x = p;
  for (std::size_t t = 0; t < n; ++t) x = seq.apply(t, x);
  return pull_back(ch, n, chain_apply(ch, n, x));
}

inline constexpr std::size_t kNonconvergenceRun = 10;
inline constexpr double kIncrementFloor = 1e-11;

struct BiholoTrajectory {
  Point p;
  std::size_t entry = 0;     // first n with f^n(p) inside the membership ball
  std::vector<std::size_t> n;
  std::vector<Point> value;
  std::vector<double> increment;  // |Phi_n - Phi_{n-1}|; NaN for the first entry
  std::vector<double> floor;      // roundoff floor per n, relative to |Phi_n|
  bool nonconvergent = false;     // increments above the floor non-decreasing over 10 consecutive n

  double last_increment() const { return increment.empty() ? NAN : increment.back(); }

  /// From some n on, every increment is below its floor or smaller than the one before.
  /// First position from which every increment is below its floor or
  /// strictly smaller than the previous one.
  std::size_t decreasing_from() const {
    for (std::size_t i = increment.size(); i-- > 1;)
      if (increment[i] > floor[i] && !(increment[i] < increment[i - 1])) return i + 1;
    return 0;
  }
  bool eventually_decreasing() const { return increment.size() - decreasing_from() >= kNonconvergenceRun; }
};

/// Phi_n(p) for n from the entry index to n_last.
inline BiholoTrajectory biholo_trajectory(Sequence& seq, const ConjugacyChain& ch, Point p, std::size_t n_last,
                                          double radius = kFallbackRadius) {
  if (n_last > ch.horizon) throw std::invalid_argument("biholo: n exceeds the chain horizon");
  seq.prefetch(n_last + 1);
  const auto orb = orbit(seq, p, std::max<std::size_t>(n_last, 1), radius);
  if (!orb.member)
    throw PreconditionError("biholo: point is not in the basin within " + std::to_string(n_last) + " steps");
  BiholoTrajectory tr;
  tr.p = p;
  tr.entry = *orb.entry_index;
  Point x = p;
  std::size_t run = 0;
  for (std::size_t n = 0; n <= n_last; ++n) {
    if (n >= tr.entry) {
      const Point v = pull_back(ch, n, chain_apply(ch, n, x));
      const double inc = tr.value.empty() ? NAN : distance(v, tr.value.back());
      const double fl = kIncrementFloor * std::max(1.0, v.norm());
      if (tr.increment.size() >= 2 && inc > fl && inc >= tr.increment.back()) {
        if (++run + 1 >= kNonconvergenceRun) tr.nonconvergent = true;
      } else if (!std::isnan(inc)) {
        run = 0;
      }
      tr.n.push_back(n);
      tr.value.push_back(v);
      tr.increment.push_back(inc);
      tr.floor.push_back(fl);
    }
    if (n < n_last) x = seq.apply(n, x);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Chain JSON: enough to rebuild h_n and g_n without recomputation.

inline nlohmann::json to_json(const ConjugacyChain& ch) {
  auto c = [](cplx v) { return nlohmann::json{v.real(), v.imag()}; };
  nlohmann::json prep = nlohmann::json::array(), shear = nlohmann::json::array(), g = nlohmann::json::array();
  for (const auto& h : ch.prep) {
    const JetMap2 P = h - JetMap2::identity(ch.k);
    prep.push_back({monomials_to_json(P.first), monomials_to_json(P.second)});
  }
  for (cplx v : ch.shear) shear.push_back(c(v));
  for (const auto& t : ch.target)
    g.push_back({t.a.real(), t.a.imag(), t.b.real(), t.b.imag(), t.c.real(), t.c.imag()});
  return {{"k", ch.k},
          {"n_max", ch.n_max},
          {"horizon", ch.horizon},
          {"directed", ch.directed},
          {"partition", to_json(ch.partition)},
          {"boundaries", ch.partition.boundaries()},
          {"log_theta", ch.log_theta},
          {"log_tau", ch.log_tau},
          {"axis", ch.axis},
          {"shear", shear},
          {"g", g},
          {"prep_shears", prep},
          {"residuals", ch.residuals},
          {"prep_residuals", ch.prep_residuals}};
}

inline ConjugacyChain chain_from_json(const nlohmann::json& j) {
  ConjugacyChain ch;
  ch.k = j.at("k").get<int>();
  ch.n_max = j.at("n_max").get<std::size_t>();
  ch.horizon = j.at("horizon").get<std::size_t>();
  ch.directed = j.at("directed").get<bool>();
  ch.partition = partition_from_json(j.at("partition"));
  ch.log_theta = j.at("log_theta").get<std::vector<double>>();
  ch.log_tau = j.at("log_tau").get<std::vector<double>>();
  ch.axis = j.at("axis").get<std::vector<int>>();
  for (const auto& v : j.at("shear")) ch.shear.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
  for (const auto& v : j.at("g")) {
    const auto x = v.get<std::vector<double>>();
    if (x.size() != 6) throw std::invalid_argument("chain: g entries need 6 numbers");
    ch.target.push_back({{x[0], x[1]}, {x[2], x[3]}, {x[4], x[5]}, {}});
  }
  for (const auto& v : j.at("prep_shears")) {
    JetMap2 h = JetMap2::identity(ch.k);
    h.first = h.first + monomials_from_json(v.at(0), ch.k);
    h.second = h.second + monomials_from_json(v.at(1), ch.k);
    ch.prep.push_back(std::move(h));
  }
  ch.residuals = j.at("residuals").get<std::vector<double>>();
  ch.prep_residuals = j.at("prep_residuals").get<std::vector<double>>();
  const std::size_t N = ch.horizon;
  if (ch.log_theta.size() != N + 1 || ch.log_tau.size() != N + 1 || ch.axis.size() != N + 1 ||
      ch.shear.size() != N + 1 || ch.target.size() != N || ch.prep.size() != N + 1)
    throw std::invalid_argument("chain: array lengths do not match the horizon");
  return ch;
}

}  // namespace basinforge

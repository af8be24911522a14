#pragma once

// Verifier-side statistics and the closed-form bounds: payoffs and scores,
// Chernoff floors and Azuma ceilings, the sequential-repetition table,
// mismatch-detection probabilities, round budgets, the edge-removal and
// good-rounds combinatorics, the secure region of the lossy score, and the
// final accept/reject decision.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cqpv/protocol.hpp"

namespace cqpv::verdict {

enum class Model { S1, S2, S3 };

inline std::string to_string(Model m) { return m == Model::S1 ? "S1" : (m == Model::S2 ? "S2" : "S3"); }

inline Model parse_model(const std::string& s) {
  if (s == "S1") return Model::S1;
  if (s == "S2") return Model::S2;
  if (s == "S3") return Model::S3;
  throw std::invalid_argument("unknown security model '" + s + "'");
}

struct BoundParams {
  double p_attack = 0.5;  // bound on attacking the underlying protocol (external input)
  double p_err = 0.0;
  double eta_p = 1.0;
  double delta_margin = 0.5;
  double k = 10.0;
  Model model = Model::S1;

  double p_b() const { return model == Model::S1 ? p_attack : p_attack + 6.0 / k; }
  double mu() const { return 1.0 - p_b() - p_err; }

  void validate() const {
    if (!(p_attack > 0.0 && p_attack < 1.0)) throw std::invalid_argument("bounds: p_attack must be in (0, 1)");
    if (!(p_err >= 0.0 && p_err < 1.0)) throw std::invalid_argument("bounds: p_err must be in [0, 1)");
    if (!(eta_p > 0.0 && eta_p <= 1.0)) throw std::invalid_argument("bounds: eta_P must be in (0, 1]");
    if (!(delta_margin > 0.0 && delta_margin < 1.0)) throw std::invalid_argument("bounds: delta_margin must be in (0, 1)");
    if (model != Model::S1 && !(k >= 2.0)) throw std::invalid_argument("bounds: k must be at least 2");
  }
};

/// A probability bound together with a flag telling whether it is vacuous
/// (the formula's premise fails, so it says nothing).
struct Bound {
  double value = 0.0;
  bool vacuous = false;
};

//---------------------------------------------------------------------------
// Payoffs
//---------------------------------------------------------------------------

enum class Outcome { Correct, Bot, Incorrect };

inline double payoff(Outcome ans, double p_b) {
  if (!(p_b > 0.0 && p_b < 1.0)) throw std::invalid_argument("payoff: p_b must be in (0, 1)");
  switch (ans) {
    case Outcome::Correct: return 1.0 - p_b;
    case Outcome::Incorrect: return -p_b;
    case Outcome::Bot: break;
  }
  throw std::invalid_argument("payoff: loss answers are scored by lossy_payoff");
}

//---------------------------------------------------------------------------
// Secure region and the lossy payoff
//---------------------------------------------------------------------------

using Point = Eigen::Vector3d;  // (p_C, p_bot, p_I)

inline bool in_simplex(const Point& p, double tol = 1e-10) {
  return p.minCoeff() >= -tol && std::abs(p.sum() - 1.0) <= tol;
}

/// Piecewise-linear curve on the probability simplex and the cone it spans
/// with the origin. Each segment [g_j, g_{j+1}] contributes one planar
/// facet with unit normal g_j x g_{j+1}, oriented so that the honest point
/// scores positive.
class SecureRegion {
 public:
  SecureRegion(std::vector<Point> curve, const Point& honest) : curve_(std::move(curve)) {
    if (curve_.size() < 2) throw std::invalid_argument("secure region: need at least two curve points");
    for (const auto& g : curve_)
      if (!in_simplex(g)) throw std::invalid_argument("secure region: curve point outside the simplex");
    if (!in_simplex(honest)) throw std::invalid_argument("secure region: honest point outside the simplex");
    for (std::size_t j = 0; j + 1 < curve_.size(); ++j) {
      const Point n = curve_[j].cross(curve_[j + 1]);
      if (n.norm() < 1e-14) throw std::invalid_argument("secure region: degenerate facet");
      normals_.push_back(n.normalized());
    }
    const double s = honest.dot(normals_[facet_for(honest)]);
    if (s == 0.0) throw std::invalid_argument("secure region: honest point lies on the surface");
    if (s < 0.0)
      for (auto& n : normals_) n = -n;
  }

  /// Region whose single facet reproduces the loss-free payoff: the plane
  /// through the origin, (p_b, 0, 1 - p_b) and the loss vertex.
  static SecureRegion no_loss(double p_b, const Point& honest) {
    return SecureRegion({Point(p_b, 0.0, 1.0 - p_b), Point(0.0, 1.0, 0.0)}, honest);
  }

  std::size_t facets() const { return normals_.size(); }
  const std::vector<Point>& curve() const { return curve_; }
  const Point& normal(std::size_t j) const { return normals_.at(j); }

  /// Facet of the segment nearest to p; ties go to the lower index.
  std::size_t facet_for(const Point& p) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 1 < curve_.size(); ++j) {
      const Point a = curve_[j], ab = curve_[j + 1] - curve_[j];
      const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
      const double d = (p - (a + t * ab)).norm();
      if (d < best_d - 1e-15) {
        best_d = d;
        best = j;
      }
    }
    return best;
  }

  /// Normalized gradient of F at p.
  const Point& gradient(const Point& p) const { return normals_[facet_for(p)]; }

  /// Expected per-round lossy payoff of a strategy reproducing q.
  double expected_score(const Point& q) const { return q.dot(gradient(q)); }

 private:
  std::vector<Point> curve_;
  std::vector<Point> normals_;
};

inline double lossy_payoff(Outcome ans, const SecureRegion& region, const Point& eval_point) {
  if (!(eval_point.minCoeff() > 0.0 && std::abs(eval_point.sum() - 1.0) <= 1e-10))
    throw std::invalid_argument("lossy_payoff: evaluation point must lie strictly inside the simplex");
  return region.gradient(eval_point)(static_cast<int>(ans));
}

/// Honest distribution (eta_P (1 - p_err), 1 - eta_P, eta_P p_err).
inline Point honest_point(double eta_p, double p_err) { return {eta_p * (1.0 - p_err), 1.0 - eta_p, eta_p * p_err}; }

//---------------------------------------------------------------------------
// Concentration bounds
//---------------------------------------------------------------------------

/// Honest acceptance floor 1 - exp(-r delta^2 mu^2 / w^2); w = 1 for the
/// loss-free payoff, w = 2 for the lossy payoff.
inline double chernoff_accept_floor(double mu, double delta, double r, double w = 1.0) {
  if (!(mu > 0.0)) throw std::domain_error("chernoff_accept_floor: mu <= 0, honest prover cannot beat the bound");
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("chernoff_accept_floor: delta must be in [0, 1)");
  if (!(w > 0.0)) throw std::invalid_argument("chernoff_accept_floor: width must be positive");
  return -std::expm1(-r * delta * delta * mu * mu / (w * w));
}

/// Azuma ceiling on Pr[score >= r mu (1 - delta)]; S3 shifts the argument
/// by 1/k.
inline Bound attacker_score_ceiling(double mu, double delta, double r, double k, Model model) {
  double arg = mu * (1.0 - delta);
  if (model == Model::S3) arg -= 1.0 / k;
  if (!(arg > 0.0)) return {1.0, true};
  return {std::exp(-0.5 * r * arg * arg), false};
}

/// Loss-free, error-free S1: attackers are caught with probability at least 1 - p_attack^r.
inline double s1_catch_floor(double p_attack, double r) { return 1.0 - std::pow(p_attack, r); }

/// Bound on attacking the commit protocol given |Sigma_eps^c| <= c_tilde 2^{2n}.
inline double commit_attack_bound(double p_attack, double epsilon, double c_tilde) {
  return p_attack + (1.0 - 2.0 * c_tilde) * 8.0 * std::sqrt(epsilon) + 2.0 * c_tilde;
}

//---------------------------------------------------------------------------
// Sequential-repetition table
//---------------------------------------------------------------------------

struct Table1Row {
  Bound error_free;  // p_err = 0 column
  Bound with_error;  // p_err > 0 column
};

struct Table1 {
  double r = 0.0;
  double s2_additive = 0.0;  // 24 (5/r)^{1/3}
  double s3_additive = 0.0;  // 12 (20/r)^{1/4}
  double s3_exponent_factor = 0.0;  // 1 - 2 (20/r)^{1/4}
  double s3_shift = 0.0;     // (320/r)^{1/4}
  Table1Row honest, s1, s2, s3;
};

namespace detail {

inline Bound catch_floor(double base, double exponent) {
  if (!(base < 1.0) || !(exponent > 0.0)) return {0.0, true};
  return {1.0 - std::pow(std::max(base, 0.0), exponent), false};
}

inline Bound azuma(double arg, double r) {
  if (!(arg > 0.0)) return {1.0, true};
  return {std::exp(-0.5 * r * arg * arg), false};
}

}  // namespace detail

/// All cells of the sequential-repetition comparison at r committed rounds.
/// The honest p_err > 0 cell uses mu of `params.model`.
inline Table1 table1_bounds(const BoundParams& params, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("table1_bounds: r must be positive");
  const double pa = params.p_attack, pe = params.p_err, d = params.delta_margin;
  Table1 t;
  t.r = r;
  t.s2_additive = 24.0 * std::cbrt(5.0 / r);
  t.s3_additive = 12.0 * std::pow(20.0 / r, 0.25);
  t.s3_exponent_factor = 1.0 - 2.0 * std::pow(20.0 / r, 0.25);
  t.s3_shift = std::pow(320.0 / r, 0.25);

  double mu = 1.0 - pa - pe;
  if (params.model == Model::S2) mu -= t.s2_additive;
  if (params.model == Model::S3) mu -= t.s3_additive;
  t.honest.error_free = {1.0, false};
  t.honest.with_error = mu > 0.0 ? Bound{-std::expm1(-r * d * d * mu * mu), false} : Bound{0.0, true};

  t.s1.error_free = detail::catch_floor(pa, r);
  t.s1.with_error = detail::azuma((1.0 - pa - pe) * (1.0 - d), r);
  t.s2.error_free = detail::catch_floor(pa + t.s2_additive, r);
  t.s2.with_error = detail::azuma((1.0 - pa - t.s2_additive - pe) * (1.0 - d), r);
  t.s3.error_free = detail::catch_floor(pa + t.s3_additive, t.s3_exponent_factor * r);
  t.s3.with_error = detail::azuma((1.0 - pa - t.s3_additive - pe) * (1.0 - d) - t.s3_shift, r);
  return t;
}

//---------------------------------------------------------------------------
// Mismatch detection and budgets
//---------------------------------------------------------------------------

struct DetectionBound {
  double exact = 0.0;  // 1 - (1 - alpha)^R
  double loose = 0.0;  // 1 - exp(-alpha R)
};

inline DetectionBound detection_probability_nonadaptive(double alpha, double committed_rounds) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("detection: alpha must be in [0, 1]");
  if (alpha == 0.0) return {0.0, 0.0};
  return {-std::expm1(committed_rounds * std::log1p(-alpha)), -std::expm1(-alpha * committed_rounds)};
}

/// 1 - prod (1 - eps_i) for a round-indexed mismatch schedule.
inline double detection_probability_adaptive(const std::vector<double>& eps) {
  double log_undetected = 0.0;
  for (double e : eps) {
    if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("detection: epsilon outside [0, 1]");
    log_undetected += std::log1p(-e);
  }
  return -std::expm1(log_undetected);
}

struct RoundBudget {
  double committed_target = 0.0;
  double alpha = 0.0;
  double c_tilde = 0.0;
  double expected_total = 0.0;
  bool c_tilde_vacuous = false;  // c_tilde > 1/2, outside the edge-removal lemma
};

inline RoundBudget round_budget(double k, Model model, double p_commit = 1.0) {
  if (model == Model::S1) throw std::invalid_argument("round_budget: S1 has no commit-mismatch budget");
  if (!(k >= 2.0)) throw std::invalid_argument("round_budget: k must be at least 2 (alpha <= 1/64)");
  if (!(p_commit > 0.0 && p_commit <= 1.0)) throw std::invalid_argument("round_budget: p_commit must be in (0, 1]");
  RoundBudget b;
  b.committed_target = model == Model::S2 ? 320.0 * k * k * k : 320.0 * k * k * k * k;
  b.alpha = 1.0 / (16.0 * k * k);
  b.c_tilde = 2.0 / k;
  b.expected_total = b.committed_target / p_commit;
  b.c_tilde_vacuous = b.c_tilde > 0.5;
  return b;
}

/// Default adaptive preset: undetected probability delta = e^{-20} and a
/// good-round fraction q = 1 - 1/k.
struct AdaptivePreset {
  double delta = std::exp(-20.0);
  double q = 0.9;
  static AdaptivePreset for_k(double k) { return {std::exp(-20.0), 1.0 - 1.0 / k}; }
};

//---------------------------------------------------------------------------
// Combinatorics
//---------------------------------------------------------------------------

struct EdgeReach {
  std::size_t best_vertex = 0;
  std::size_t reach = 0;   // edges reachable in two steps from best_vertex
  double c_tilde = 0.0;
  double bound = 0.0;      // (1 - 2 c_tilde) 2^{2n}
  bool holds = false;
};

/// K_{2^n,2^n} minus the edges (l, r) with removed[l * 2^n + r] set. For
/// each left vertex l, counts the edges incident to its right neighbours.
inline EdgeReach edge_removal_reach(int n, const std::vector<bool>& removed) {
  if (n < 0 || n > 12) throw std::invalid_argument("edge_removal_reach: n out of range");
  const std::size_t side = std::size_t{1} << n;
  if (removed.size() != side * side) throw std::invalid_argument("edge_removal_reach: edge mask has wrong size");
  std::vector<std::size_t> right_deg(side, 0);
  std::size_t removed_count = 0;
  for (std::size_t l = 0; l < side; ++l)
    for (std::size_t r = 0; r < side; ++r) {
      if (removed[l * side + r]) ++removed_count;
      else ++right_deg[r];
    }
  EdgeReach out;
  for (std::size_t l = 0; l < side; ++l) {
    std::size_t reach = 0;
    for (std::size_t r = 0; r < side; ++r)
      if (!removed[l * side + r]) reach += right_deg[r];
    if (reach > out.reach || l == 0) {
      out.reach = reach;
      out.best_vertex = l;
    }
  }
  const double total = static_cast<double>(side * side);
  out.c_tilde = static_cast<double>(removed_count) / total;
  out.bound = (1.0 - 2.0 * out.c_tilde) * total;
  out.holds = static_cast<double>(out.reach) >= out.bound;
  return out;
}

struct GoodRounds {
  std::vector<std::size_t> indices;
  double threshold = 0.0;  // alpha_total / ((1 - q) r)
  bool floored = false;    // q r was not an integer
  bool holds = false;      // every selected epsilon is within the threshold
};

/// The floor(q r) rounds of smallest epsilon (stable order) and the
/// threshold they are guaranteed to meet when sum(eps) <= alpha_total.
inline GoodRounds good_rounds_subset(const std::vector<double>& eps, double q,
                                     std::optional<double> alpha_total = std::nullopt) {
  if (eps.empty()) throw std::invalid_argument("good_rounds_subset: empty epsilon list");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("good_rounds_subset: q must be in (0, 1)");
  const double r = static_cast<double>(eps.size());
  const double alpha = alpha_total.value_or(std::accumulate(eps.begin(), eps.end(), 0.0));
  const double qr = q * r;
  GoodRounds g;
  const double rounded = std::round(qr);
  std::size_t count;
  if (std::abs(qr - rounded) <= 1e-9 * std::max(1.0, qr)) {
    count = static_cast<std::size_t>(rounded);
  } else {
    count = static_cast<std::size_t>(std::floor(qr));
    g.floored = true;
  }
  std::vector<std::size_t> order(eps.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eps[a] < eps[b]; });
  g.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  g.threshold = alpha / ((1.0 - q) * r);
  g.holds = std::all_of(g.indices.begin(), g.indices.end(), [&](std::size_t i) { return eps[i] <= g.threshold; });
  return g;
}

//---------------------------------------------------------------------------
// Decision
//---------------------------------------------------------------------------

struct Decision {
  bool accept = false;
  std::string reason;  // "accept" or the rejection cause
  double score = 0.0;
  double threshold = 0.0;
  std::size_t scored_rounds = 0;
  double bot_rate = 0.0;
  double bot_band = 0.0;  // allowed deviation of the loss rate from 1 - eta_P
};

/// Accept iff no abort happened, the budget was reached, the score exceeds
/// its threshold and the loss rate among committed rounds is within
/// `rate_sigmas` binomial standard deviations of 1 - eta_P. Without a
/// region the loss-free payoff is used over the answered rounds; with a
/// region the lossy payoff is evaluated at the honest point.
inline Decision decide(const protocol::Transcript& t, const BoundParams& params, const SecureRegion* region = nullptr,
                       double rate_sigmas = 4.0) {
  using protocol::Verdict;
  Decision d;
  if (t.aborted) {
    d.reason = std::string(protocol::to_string(t.abort_reason));
    return d;
  }
  if (t.inconclusive) {
    d.reason = "inconclusive";
    return d;
  }
  const double n_c = static_cast<double>(t.count(Verdict::Accept));
  const double n_i = static_cast<double>(t.count(Verdict::Incorrect));
  const double n_bot = static_cast<double>(t.count(Verdict::Loss));
  const double n = n_c + n_i + n_bot;
  if (n == 0.0) {
    d.reason = "no_committed_rounds";
    return d;
  }
  d.bot_rate = n_bot / n;
  d.bot_band = rate_sigmas * std::sqrt(params.eta_p * (1.0 - params.eta_p) / n);
  const bool rate_ok = std::abs(d.bot_rate - (1.0 - params.eta_p)) <= d.bot_band + 1e-12;

  if (region) {
    const Point hp = honest_point(params.eta_p, params.p_err);
    const Point g = region->gradient(hp);
    const double mu_tilde = hp.dot(g);
    d.scored_rounds = static_cast<std::size_t>(n);
    d.score = n_c * g(0) + n_bot * g(1) + n_i * g(2);
    d.threshold = n * mu_tilde * (1.0 - params.delta_margin);
  } else {
    const double p_b = params.p_b();
    d.scored_rounds = static_cast<std::size_t>(n_c + n_i);
    d.score = n_c * (1.0 - p_b) - n_i * p_b;
    d.threshold = (n_c + n_i) * params.mu() * (1.0 - params.delta_margin);
  }
  if (!rate_ok) {
    d.reason = "loss_rate";
    return d;
  }
  if (!(d.score > d.threshold)) {
    d.reason = "score";
    return d;
  }
  d.accept = true;
  d.reason = "accept";
  return d;
}

}  // namespace cqpv::verdict

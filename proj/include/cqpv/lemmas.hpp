#pragma once

// Randomized checks of the quantum-information statements the security
// argument rests on: gentle measurement, instrument = measurement followed
// by a channel, its Stinespring form, closeness of post-commit states, and
// contractivity of the trace distance under channels. Also the
// edge-removal reach bound on bipartite input graphs.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <string>

#include "cqpv/qrandom.hpp"
#include "cqpv/verdict.hpp"

namespace cqpv::lemmas {

using namespace cqpv::qcore;

struct SuiteReport {
  std::string name;
  std::size_t instances = 0;
  std::size_t violations = 0;
  std::size_t nontrivial = 0;  // instances where the bound was below its trivial value
  double worst_slack = INFINITY;  // min over instances of (bound - observed)
  bool passed() const { return instances > 0 && violations == 0; }
};

namespace detail {

inline void record(SuiteReport& rep, double observed, double bound, double tol, bool nontrivial) {
  ++rep.instances;
  if (observed > bound + tol) ++rep.violations;
  if (nontrivial) ++rep.nontrivial;
  rep.worst_slack = std::min(rep.worst_slack, bound - observed);
}

inline Eigen::Index random_dim(Rng& rng, Eigen::Index lo, Eigen::Index hi) {
  return lo + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

/// Effect with spectrum in [1 - t, 1], t log-uniform in [1e-6, 1], so that
/// small-epsilon instances are well represented.
inline MeasurementOperator near_identity_effect(Eigen::Index dim, Rng& rng) {
  const double t = std::pow(10.0, -6.0 * rng.uniform());
  return random_effect(dim, rng, 1.0 - t, 1.0);
}

}  // namespace detail

/// tr(M rho) >= 1 - eps implies ||rho - rho'||_1 <= 2 sqrt(eps).
inline SuiteReport gentle_measurement_suite(std::size_t instances, Rng& rng, Eigen::Index min_dim = 2,
                                            Eigen::Index max_dim = 8) {
  SuiteReport rep{"gentle_measurement"};
  for (std::size_t i = 0; i < instances; ++i) {
    const Eigen::Index d = detail::random_dim(rng, min_dim, max_dim);
    const auto rho = random_density(d, rng, detail::random_dim(rng, 1, d));
    const auto m = (i % 2 == 0) ? random_effect(d, rng) : detail::near_identity_effect(d, rng);
    const double p = (m.matrix() * rho.matrix()).trace().real();
    if (p < kMinConditioningProb) continue;
    const double eps = std::max(0.0, 1.0 - p);
    const auto post = gentle_post_state(rho, m);
    const double bound = 2.0 * std::sqrt(eps);
    detail::record(rep, trace_norm_distance(rho, post.state), bound, 1e-10, bound < 2.0);
  }
  return rep;
}

struct InstrumentSuiteReport {
  SuiteReport reconstruction{"instrument_reconstruction"};
  SuiteReport channel_tp{"instrument_channel_trace_preserving"};
  SuiteReport dilation{"stinespring_recovery"};
  bool passed() const { return reconstruction.passed() && channel_tp.passed() && dilation.passed(); }
};

/// For random instruments: I_i(rho) = E_i(sqrt(M_i) rho sqrt(M_i)) and
/// I_i(rho) = Tr_E[U_i (sqrt(M_i) rho sqrt(M_i) (x) |0><0|) U_i^dag],
/// all entrywise within `tol`.
inline InstrumentSuiteReport instrument_suite(std::size_t instruments, Rng& rng, std::size_t states_per_outcome = 3,
                                              double tol = 1e-10) {
  InstrumentSuiteReport rep;
  for (std::size_t i = 0; i < instruments; ++i) {
    const Eigen::Index d = detail::random_dim(rng, 2, 8);
    const std::size_t kraus_per = 1 + rng.below(3);
    const auto inst = random_instrument(d, 2, kraus_per, rng);
    for (std::size_t outcome = 0; outcome < inst.outcomes(); ++outcome) {
      const auto dec = decompose_instrument(inst, outcome);
      detail::record(rep.channel_tp, trace_preservation_defect(dec.channel.kraus()), 0.0, tol, true);
      const auto dil = stinespring_dilate(dec.channel);
      const Matrix sqrt_m = psd_sqrt(dec.effect.matrix());
      for (std::size_t s = 0; s < states_per_outcome; ++s) {
        const auto rho = random_density(d, rng, detail::random_dim(rng, 1, d));
        const Matrix gentle = sqrt_m * rho.matrix() * sqrt_m;
        const Matrix direct = inst.apply(outcome, rho.matrix());
        detail::record(rep.reconstruction, (direct - dec.channel.apply(gentle)).cwiseAbs().maxCoeff(), 0.0, tol,
                       true);
        detail::record(rep.dilation, (direct - apply_dilation(dil, gentle)).cwiseAbs().maxCoeff(), 0.0, tol, true);
      }
    }
  }
  return rep;
}

/// Post-commit state of a product commit measurement on a bipartite state,
/// (sqrt(A) (x) sqrt(B)) rho (sqrt(A) (x) sqrt(B)) / tr((A (x) B) rho).
inline DensityMatrix post_commit_state(const DensityMatrix& rho, const Matrix& a, const Matrix& b) {
  return gentle_post_state(rho, MeasurementOperator(kron(a, b))).state;
}

struct CommitScenario {
  DensityMatrix rho;
  Eigen::Index dim_a, dim_b;
  Matrix ma_x, ma_xp, mb_y, mb_yp;  // commit elements for inputs x, x', y, y'
};

/// P[c_B = 0 | c_A = 1] and P[c_A = 0 | c_B = 1] for one input pair.
inline std::pair<double, double> conditional_mismatch(const DensityMatrix& rho, const Matrix& ma, const Matrix& mb) {
  const Eigen::Index da = ma.rows(), db = mb.rows();
  const Matrix ia = Matrix::Identity(da, da), ib = Matrix::Identity(db, db);
  const auto rho_a = gentle_post_state(rho, MeasurementOperator(kron(ma, ib))).state;
  const auto rho_b = gentle_post_state(rho, MeasurementOperator(kron(ia, mb))).state;
  const double b_given_a = (kron(ia, ib - mb) * rho_a.matrix()).trace().real();
  const double a_given_b = (kron(ia - ma, ib) * rho_b.matrix()).trace().real();
  return {std::max(0.0, b_given_a), std::max(0.0, a_given_b)};
}

/// Smallest eps for which the three pairs (x,y), (x',y), (x',y') all have
/// conditional mismatch at most eps.
inline double path_epsilon(const CommitScenario& s) {
  double eps = 0.0;
  for (auto [ma, mb] : {std::pair{&s.ma_x, &s.mb_y}, std::pair{&s.ma_xp, &s.mb_y}, std::pair{&s.ma_xp, &s.mb_yp}}) {
    const auto [p, q] = conditional_mismatch(s.rho, *ma, *mb);
    eps = std::max({eps, p, q});
  }
  return eps;
}

inline CommitScenario random_commit_scenario(Rng& rng) {
  const Eigen::Index da = detail::random_dim(rng, 2, 4), db = detail::random_dim(rng, 2, 4);
  auto effect = [&](Eigen::Index d) { return detail::near_identity_effect(d, rng).matrix(); };
  return {random_density(da * db, rng, detail::random_dim(rng, 1, da * db)), da, db, effect(da), effect(da),
          effect(db), effect(db)};
}

/// ||rho^{xy} - rho^{x'y'}||_1 <= 8 sqrt(eps) over random commit scenarios.
inline SuiteReport paths_between_strings_suite(std::size_t instances, Rng& rng) {
  SuiteReport rep{"paths_between_strings"};
  for (std::size_t i = 0; i < instances; ++i) {
    const auto s = random_commit_scenario(rng);
    const double eps = path_epsilon(s);
    const auto rho_xy = post_commit_state(s.rho, s.ma_x, s.mb_y);
    const auto rho_xpyp = post_commit_state(s.rho, s.ma_xp, s.mb_yp);
    const double bound = 8.0 * std::sqrt(eps);
    detail::record(rep, trace_norm_distance(rho_xy, rho_xpyp), bound, 1e-10, bound < 2.0);
  }
  return rep;
}

/// ||E(rho) - E(sigma)||_1 <= ||rho - sigma||_1 for random channels.
inline SuiteReport data_processing_suite(std::size_t instances, Rng& rng) {
  SuiteReport rep{"data_processing"};
  for (std::size_t i = 0; i < instances; ++i) {
    const Eigen::Index d = detail::random_dim(rng, 2, 8);
    const auto e = random_channel(d, 1 + rng.below(4), rng);
    const auto rho = random_density(d, rng), sigma = random_density(d, rng);
    const double before = trace_norm_distance(rho, sigma);
    const double after = trace_norm(e.apply(rho.matrix()) - e.apply(sigma.matrix()));
    detail::record(rep, after, before, 1e-10, true);
  }
  return rep;
}

/// Triangle inequality of the trace distance on random triples.
inline SuiteReport triangle_suite(std::size_t instances, Rng& rng) {
  SuiteReport rep{"trace_distance_triangle"};
  for (std::size_t i = 0; i < instances; ++i) {
    const Eigen::Index d = detail::random_dim(rng, 2, 8);
    const auto a = random_density(d, rng), b = random_density(d, rng), c = random_density(d, rng);
    detail::record(rep, trace_norm_distance(a, c), trace_norm_distance(a, b) + trace_norm_distance(b, c), 1e-10,
                   true);
  }
  return rep;
}

/// Every subset of edges of K_{2^n,2^n} with at most half the edges
/// removed (n <= 2).
inline SuiteReport edge_removal_exhaustive(int n) {
  if (n < 0 || n > 2) throw std::invalid_argument("edge_removal_exhaustive: n must be at most 2");
  SuiteReport rep{"edge_removal_exhaustive_n" + std::to_string(n)};
  const std::size_t edges = std::size_t{1} << (2 * n);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << edges); ++mask) {
    if (2 * static_cast<std::size_t>(std::popcount(mask)) > edges) continue;
    std::vector<bool> removed(edges);
    for (std::size_t e = 0; e < edges; ++e) removed[e] = (mask >> e) & 1U;
    const auto r = verdict::edge_removal_reach(n, removed);
    detail::record(rep, r.bound, static_cast<double>(r.reach), 0.0, r.c_tilde > 0.0);
  }
  return rep;
}

/// Uniformly random removal of round(c_tilde 4^n) edges.
inline SuiteReport edge_removal_sampled(int n, double c_tilde, std::size_t samples, Rng& rng) {
  SuiteReport rep{"edge_removal_n" + std::to_string(n) + "_c" + std::to_string(c_tilde)};
  const std::size_t edges = std::size_t{1} << (2 * n);
  const auto k = static_cast<std::size_t>(std::llround(c_tilde * static_cast<double>(edges)));
  std::vector<std::size_t> idx(edges);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t e = 0; e < edges; ++e) idx[e] = e;
    std::vector<bool> removed(edges, false);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t pick = j + rng.below(edges - j);
      std::swap(idx[j], idx[pick]);
      removed[idx[j]] = true;
    }
    const auto r = verdict::edge_removal_reach(n, removed);
    // observed = bound, "bound" = reach: a violation is reach < bound.
    detail::record(rep, r.bound, static_cast<double>(r.reach), 0.0, k > 0);
  }
  return rep;
}

}  // namespace cqpv::lemmas

#pragma once

// Round state machines and the sequential run. The machine owns the EPR
// pair, the inputs and the clock; strategies only ever see what the
// timetable allows them to see.

#include <cstddef>
#include <stdexcept>

#include "cqpv/error.hpp"
#include "cqpv/protocol.hpp"
#include "cqpv/strategies.hpp"

namespace cqpv::rounds {

using protocol::Answer;
using protocol::Mode;
using protocol::ProtocolConfig;
using protocol::RoundRecord;
using protocol::Transcript;
using protocol::Verdict;
using strategies::History;
using strategies::Strategy;

/// Time between consecutive round starts; long enough that rounds never
/// overlap.
inline double round_period(const ProtocolConfig& cfg) {
  const auto& g = cfg.geometry;
  return 2.0 * (g.v1 - g.v0) / g.quantum_speed_fraction + cfg.delay + 1.0;
}

namespace detail {

inline void check_latency(double latency) {
  if (!(latency >= 0.0)) throw CausalityError("strategy output scheduled before its inputs were available");
}

inline Verdict answer_verdict(const RoundRecord& r, double tol, double answer_latency) {
  if (answer_latency > tol) return Verdict::AbortTiming;
  if (r.answer_a != r.answer_b) return Verdict::AbortMismatchAnswer;
  if (r.answer == Answer::Bot) return Verdict::Loss;
  return static_cast<int>(r.answer) == r.v ? Verdict::Accept : Verdict::Incorrect;
}

}  // namespace detail

/// One round of either protocol variant against `s`.
inline RoundRecord run_round(const ProtocolConfig& cfg, Strategy& s, const History& history, Rng& rng) {
  const auto& g = cfg.geometry;
  const auto tt = protocol::schedule_round(cfg, static_cast<double>(history.rounds) * round_period(cfg));
  RoundRecord r;
  r.index = history.rounds;
  r.x = BitString::random(cfg.n, rng);
  r.y = BitString::random(cfg.n, rng);
  r.basis = protocol::eval_f(cfg.f_seed, r.x, r.y, cfg.m);
  r.q_arrival = tt.q_arrival;
  r.classical_arrival = tt.classical_arrival;
  auto pair = protocol::EprPair::phi_plus();

  double commit_latency = 0.0;
  if (cfg.mode == Mode::Commit) {
    strategies::CommitView cv;
    cv.round = r.index;
    cv.history = &history;
    cv.m = cfg.m;
    cv.quantum = &pair;
    if (s.attacker()) {
      // Alice's commit must leave by commit_due[0] - (alice - v0); x reaches
      // her at x_send + (alice - v0). Symmetrically for Bob and y.
      const double a = g.alice_pos() - g.v0, b = g.v1 - g.bob_pos();
      if (tt.x_send + a <= tt.commit_due[0] - a + g.timing_tolerance) cv.x_alice = &r.x;
      if (tt.y_send + b <= tt.commit_due[1] - b + g.timing_tolerance) cv.y_bob = &r.y;
    }
    const auto c = s.commit(cv, rng);
    detail::check_latency(c.latency);
    if ((c.c_a != 0 && c.c_a != 1) || (c.c_b != 0 && c.c_b != 1)) throw std::logic_error("commit bits must be 0 or 1");
    r.c_a = c.c_a;
    r.c_b = c.c_b;
    commit_latency = c.latency;
    for (int i = 0; i < 2; ++i)
      if ((i == 0 ? r.c_a : r.c_b) == 1) r.commit_received[static_cast<std::size_t>(i)] = tt.commit_due[static_cast<std::size_t>(i)] + c.latency;
  }

  strategies::AnswerView av;
  av.round = r.index;
  av.history = &history;
  av.mode = cfg.mode;
  av.m = cfg.m;
  av.c_a = r.c_a;
  av.c_b = r.c_b;
  av.x = &r.x;
  av.y = &r.y;
  av.basis = r.basis;
  av.quantum = &pair;
  const auto ans = s.answer(av, rng);
  detail::check_latency(ans.latency);
  if (cfg.mode == Mode::Commit && ((r.c_a == 0 && ans.a_a != Answer::Bot) || (r.c_b == 0 && ans.a_b != Answer::Bot)))
    throw CausalityError("answer given by a party that did not commit");
  r.answer_a = ans.a_a;
  r.answer_b = ans.a_b;
  r.answer = ans.a_a == ans.a_b ? ans.a_a : Answer::Bot;
  r.answer_received = {tt.answer_due[0] + ans.latency, tt.answer_due[1] + ans.latency};
  r.v = pair.measure(0, qcore::basis_angle(r.basis, cfg.m), rng);

  if (cfg.mode == Mode::Commit) {
    if (r.c_a == 0 && r.c_b == 0) r.verdict = Verdict::DiscardedNoCommit;
    else if (r.c_a != r.c_b) r.verdict = Verdict::AbortMismatchCommit;
    else if (commit_latency > g.timing_tolerance) r.verdict = Verdict::AbortTiming;
    else r.verdict = detail::answer_verdict(r, g.timing_tolerance, ans.latency);
  } else {
    r.verdict = detail::answer_verdict(r, g.timing_tolerance, ans.latency);
  }
  return r;
}

inline RoundRecord run_round_plain(const ProtocolConfig& cfg, Strategy& s, const History& h, Rng& rng) {
  if (cfg.mode != Mode::Plain) throw std::invalid_argument("run_round_plain: config is not in plain mode");
  return run_round(cfg, s, h, rng);
}

inline RoundRecord run_round_commit(const ProtocolConfig& cfg, Strategy& s, const History& h, Rng& rng) {
  if (cfg.mode != Mode::Commit) throw std::invalid_argument("run_round_commit: config is not in commit mode");
  return run_round(cfg, s, h, rng);
}

struct StopRule {
  std::size_t target_committed = 0;  // rounds with (c_A, c_B) != (0, 0); in plain mode, all rounds
  std::size_t max_rounds = 0;
  bool keep_records = false;
};

inline StopRule stop_rule(const ProtocolConfig& cfg, bool keep_records = false) {
  return {cfg.target_committed, cfg.max_rounds, keep_records};
}

/// Runs rounds until `target_committed` committed rounds are collected,
/// an abort occurs, or `max_rounds` is hit (inconclusive).
inline Transcript run_sequential(const ProtocolConfig& cfg, Strategy& s, const StopRule& stop, Rng& rng) {
  cfg.validate();
  Transcript t;
  History h;
  while (true) {
    if (t.committed >= stop.target_committed) break;
    if (t.rounds >= stop.max_rounds) {
      t.inconclusive = true;
      break;
    }
    auto rec = run_round(cfg, s, h, rng);
    t.add(rec, stop.keep_records);
    ++h.rounds;
    if (rec.committed()) ++h.committed;
    h.last = rec.verdict;
    if (t.aborted) break;
  }
  return t;
}

}  // namespace cqpv::rounds

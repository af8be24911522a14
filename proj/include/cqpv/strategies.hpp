#pragma once

// Prover and attacker behaviours. A strategy sees the round through two
// views built by the round machine: the commit view (before the classical
// inputs reach P) and the answer view (after). Attackers additionally see
// their local input in the commit view when it reaches them in time.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cqpv/devices.hpp"
#include "cqpv/protocol.hpp"

namespace cqpv::strategies {

using protocol::Answer;
using protocol::EprPair;
using protocol::Mode;

/// Summary of the run so far, visible to adaptive strategies.
struct History {
  std::size_t rounds = 0;
  std::size_t committed = 0;
  protocol::Verdict last = protocol::Verdict::DiscardedNoCommit;
};

struct CommitView {
  std::size_t round = 0;
  const History* history = nullptr;
  int m = 2;
  EprPair* quantum = nullptr;          // the travelling EPR half
  const BitString* x_alice = nullptr;  // Alice's input, when it reaches her before her commit leaves
  const BitString* y_bob = nullptr;    // Bob's input, likewise
};

struct CommitDecision {
  int c_a = 1, c_b = 1;
  double latency = 0.0;  // extra time after the nominal commit instant
};

struct AnswerView {
  std::size_t round = 0;
  const History* history = nullptr;
  Mode mode = Mode::Commit;
  int m = 2;
  int c_a = 1, c_b = 1;
  const BitString* x = nullptr;
  const BitString* y = nullptr;
  int basis = 0;  // f(x, y)
  EprPair* quantum = nullptr;
};

struct AnswerDecision {
  Answer a_a = Answer::Bot, a_b = Answer::Bot;
  double latency = 0.0;
};

class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual std::string name() const = 0;
  /// True for the two-party attacker family, which sits at the geometry's
  /// Alice/Bob positions instead of at P.
  virtual bool attacker() const = 0;
  virtual CommitDecision commit(const CommitView& view, Rng& rng) = 0;
  virtual AnswerDecision answer(const AnswerView& view, Rng& rng) = 0;
};

using StrategyFactory = std::function<std::unique_ptr<Strategy>()>;

/// Probability that exactly one of two independent flips with
/// probabilities a and b happens.
inline double xor_probability(double a, double b) { return a + b - 2.0 * a * b; }

//---------------------------------------------------------------------------
// Honest prover
//---------------------------------------------------------------------------

struct HonestParams {
  devices::DeviceParams device;
  double p_err = 0.0;          // intrinsic answer error
  double answer_latency = 0.0; // processing delay before answering
};

class HonestProver final : public Strategy {
 public:
  explicit HonestProver(HonestParams p) : p_(std::move(p)) { p_.device.validate(); }

  std::string name() const override { return "honest"; }
  bool attacker() const override { return false; }

  CommitDecision commit(const CommitView&, Rng& rng) override {
    lab_ = devices::prover_lab_pipeline(p_.device, rng.bernoulli(p_.device.eta_v), rng);
    const int c = lab_.commit ? 1 : 0;
    return {c, c, 0.0};
  }

  AnswerDecision answer(const AnswerView& view, Rng& rng) override {
    AnswerDecision d;
    d.latency = p_.answer_latency;
    if (view.mode == Mode::Plain) {
      lab_ = {};
      lab_.commit = true;
      if (rng.bernoulli(p_.device.eta_v) && rng.bernoulli(p_.device.eta_meas())) lab_.clicked = lab_.signal = true;
      else lab_.clicked = rng.bernoulli(p_.device.p_dc);
    }
    if (!lab_.commit || !lab_.clicked) return d;
    int bit;
    if (lab_.signal) {
      view.quantum->apply_pauli(1, lab_.actual);
      const auto [theta, flip] = protocol::corrected_measurement(lab_.correction, qcore::basis_angle(view.basis, view.m));
      bit = view.quantum->measure(1, theta, rng) ^ static_cast<int>(flip);
    } else {
      bit = rng.bit();
    }
    if (rng.bernoulli(xor_probability(p_.p_err, 1.0 - p_.device.fidelity))) bit ^= 1;
    d.a_a = d.a_b = protocol::answer_bit(bit);
    return d;
  }

 private:
  HonestParams p_;
  devices::PipelineResult lab_;
};

//---------------------------------------------------------------------------
// Basis-guess attacker
//---------------------------------------------------------------------------

/// Alice intercepts Q, measures it in a uniformly guessed basis and shares
/// guess and outcome with Bob. Both answer the outcome if the guess equals
/// f(x, y) and no photon otherwise. In commit mode both commit with
/// probability `commit_prob`.
class BasisGuessAttacker final : public Strategy {
 public:
  explicit BasisGuessAttacker(double commit_prob = 1.0) : commit_prob_(commit_prob) {
    if (!(commit_prob >= 0.0 && commit_prob <= 1.0)) throw std::invalid_argument("basis guess: commit_prob in [0, 1]");
  }

  std::string name() const override { return "basis_guess"; }
  bool attacker() const override { return true; }

  CommitDecision commit(const CommitView& view, Rng& rng) override {
    intercept(view.quantum, view.m, rng);
    const int c = rng.bernoulli(commit_prob_) ? 1 : 0;
    return {c, c, 0.0};
  }

  AnswerDecision answer(const AnswerView& view, Rng& rng) override {
    if (view.mode == Mode::Plain) intercept(view.quantum, view.m, rng);
    AnswerDecision d;
    if (guess_ == view.basis) {
      if (view.c_a) d.a_a = protocol::answer_bit(outcome_);
      if (view.c_b) d.a_b = protocol::answer_bit(outcome_);
    }
    return d;
  }

 private:
  void intercept(EprPair* q, int m, Rng& rng) {
    guess_ = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
    outcome_ = q->measure(1, qcore::basis_angle(guess_, m), rng);
  }

  double commit_prob_;
  int guess_ = 0;
  int outcome_ = 0;
};

//---------------------------------------------------------------------------
// Commit-mismatch attackers
//---------------------------------------------------------------------------

/// How committed rounds are answered: correct with p_correct, no photon
/// with p_bot, wrong otherwise. Both attackers give the same answer.
struct AnswerPolicy {
  double p_correct = 1.0;
  double p_bot = 0.0;

  void validate() const {
    if (!(p_correct >= 0.0 && p_bot >= 0.0 && p_correct + p_bot <= 1.0 + 1e-15))
      throw std::invalid_argument("answer policy: need p_correct, p_bot >= 0 and p_correct + p_bot <= 1");
  }

  /// Measures Q in the announced basis (equal to the verifier's outcome on
  /// an untouched EPR pair) and post-processes it.
  Answer draw(EprPair* q, int basis, int m, Rng& rng) const {
    const int v = q->measure(1, qcore::basis_angle(basis, m), rng);
    const double u = rng.uniform();
    if (u < p_correct) return protocol::answer_bit(v);
    if (u < p_correct + p_bot) return Answer::Bot;
    return protocol::answer_bit(v ^ 1);
  }
};

struct MismatchAttackSpec {
  double epsilon = 0.0;      // conditional mismatch on good inputs
  double bad_epsilon = 0.0;  // conditional mismatch on the bad subset
  double c_tilde = 0.0;      // expected fraction of bad inputs
  std::uint64_t bad_seed = 7;
  double p_play = 1.0;       // probability of attempting to commit at all
  AnswerPolicy policy;

  void validate() const {
    for (double v : {epsilon, bad_epsilon, p_play})
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("mismatch attack: probabilities must be in [0, 1]");
    if (!(c_tilde >= 0.0 && c_tilde <= 0.5)) throw std::invalid_argument("mismatch attack: c_tilde must be in [0, 1/2]");
    policy.validate();
  }
};

/// Shared randomness decides whether to play and which party is the flaky
/// one. The flaky party withholds its commit with probability epsilon (or
/// bad_epsilon when its own input lies in the keyed bad subset), so given
/// that someone commits the commits differ with exactly that probability.
class MismatchAttacker : public Strategy {
 public:
  explicit MismatchAttacker(MismatchAttackSpec spec) : spec_(spec) { spec_.validate(); }

  std::string name() const override { return "mismatch"; }
  bool attacker() const override { return true; }

  CommitDecision commit(const CommitView& view, Rng& rng) override {
    if (!rng.bernoulli(spec_.p_play)) return {0, 0, 0.0};
    const int flaky = rng.bit();
    const BitString* local = flaky == 0 ? view.x_alice : view.y_bob;
    const double eps = local_epsilon(view, local);
    const int withhold = rng.bernoulli(eps) ? 1 : 0;
    return flaky == 0 ? CommitDecision{1 - withhold, 1, 0.0} : CommitDecision{1, 1 - withhold, 0.0};
  }

  AnswerDecision answer(const AnswerView& view, Rng& rng) override {
    AnswerDecision d;
    if (!(view.c_a && view.c_b)) return d;
    d.a_a = d.a_b = spec_.policy.draw(view.quantum, view.basis, view.m, rng);
    return d;
  }

 protected:
  virtual double local_epsilon(const CommitView&, const BitString* local) const {
    if (local && protocol::keyed_subset(spec_.bad_seed, *local, spec_.c_tilde)) return spec_.bad_epsilon;
    return spec_.epsilon;
  }

  MismatchAttackSpec spec_;
};

/// Mismatch attacker whose epsilon for the i-th committed round is chosen
/// from the history.
class AdaptiveMismatchAttacker final : public MismatchAttacker {
 public:
  using Schedule = std::function<double(const History&)>;

  AdaptiveMismatchAttacker(Schedule schedule, AnswerPolicy policy)
      : MismatchAttacker(MismatchAttackSpec{0.0, 0.0, 0.0, 0, 1.0, policy}), schedule_(std::move(schedule)) {}

  /// epsilon_i read from a list indexed by committed rounds so far; zero
  /// past its end.
  static Schedule from_list(std::vector<double> eps) {
    return [eps = std::move(eps)](const History& h) { return h.committed < eps.size() ? eps[h.committed] : 0.0; };
  }

  std::string name() const override { return "adaptive_mismatch"; }

 protected:
  double local_epsilon(const CommitView& view, const BitString*) const override {
    const double e = schedule_(*view.history);
    if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("adaptive schedule produced epsilon outside [0, 1]");
    return e;
  }

 private:
  Schedule schedule_;
};

}  // namespace cqpv::strategies

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "cqpv/protocol.hpp"
#include "cqpv/qcore.hpp"

using namespace cqpv;
using namespace cqpv::protocol;

TEST(BitString, HexAndBytes) {
  const auto s = BitString::from_u64(12, 0xabc);
  EXPECT_EQ(s.to_hex(), "abc");
  EXPECT_EQ(s.byte(0), 0xbc);
  EXPECT_EQ(s.byte(1), 0x0a);
  EXPECT_TRUE(s.get(2));
  EXPECT_FALSE(s.get(0));
  auto t = BitString::from_u64(12, 0xfabc);  // bits above n are dropped
  EXPECT_EQ(t, s);
  t.flip(0);
  EXPECT_EQ(t.to_hex(), "abd");
  EXPECT_THROW(t.set(12, true), std::out_of_range);
  EXPECT_THROW(BitString(0), std::invalid_argument);
  EXPECT_THROW(BitString(257), std::invalid_argument);
}

TEST(BitString, RandomRespectsLength) {
  Rng rng(1);
  for (int n : {1, 7, 63, 64, 65, 200, 256}) {
    const auto s = BitString::random(n, rng);
    EXPECT_EQ(static_cast<int>(s.to_hex().size()), (n + 3) / 4);
    for (int w = s.words(); w < 4; ++w) EXPECT_EQ(s.word(w), 0u);
  }
}

TEST(Timetable, CommitAndAnswerDeadlines) {
  ProtocolConfig cfg;
  cfg.delay = 0.25;
  const auto t = schedule_round(cfg, 10.0);
  EXPECT_DOUBLE_EQ(t.x_send, 10.0);
  EXPECT_DOUBLE_EQ(t.classical_arrival, 11.0);
  EXPECT_DOUBLE_EQ(t.y_send, 10.0);
  EXPECT_DOUBLE_EQ(t.q_arrival, 10.75);
  EXPECT_DOUBLE_EQ(t.q_send, 9.75);
  EXPECT_DOUBLE_EQ(t.commit_due[0], 11.75);
  EXPECT_DOUBLE_EQ(t.commit_due[1], 11.75);
  EXPECT_DOUBLE_EQ(t.answer_due[0], 12.0);
  EXPECT_DOUBLE_EQ(t.answer_due[1], 12.0);
}

TEST(Timetable, AsymmetricGeometryAndSlowQubits) {
  ProtocolConfig cfg;
  cfg.geometry.v0 = 0;
  cfg.geometry.p = 3;
  cfg.geometry.v1 = 4;
  cfg.geometry.quantum_speed_fraction = 0.5;
  cfg.delay = 0.5;
  const auto t = schedule_round(cfg, 0.0);
  // x travels 3, y travels 1; both reach P at t = 3.
  EXPECT_DOUBLE_EQ(t.y_send + 1.0, t.classical_arrival);
  EXPECT_DOUBLE_EQ(t.q_send, 2.5 - 6.0);
  EXPECT_DOUBLE_EQ(t.commit_due[0], 5.5);
  EXPECT_DOUBLE_EQ(t.commit_due[1], 3.5);
}

TEST(Geometry, Validation) {
  ProtocolConfig cfg;
  cfg.geometry.p = 3.0;  // beyond V1
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.geometry.alice = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.delay = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.mode = Mode::Plain;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(KeyedFunction, DeterministicAndInRange) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto x = BitString::random(16, rng), y = BitString::random(16, rng);
    const int b = eval_f(42, x, y, 5);
    EXPECT_GE(b, 0);
    EXPECT_LT(b, 5);
    EXPECT_EQ(b, eval_f(42, x, y, 5));
  }
  EXPECT_THROW(eval_f(1, BitString(8), BitString(9), 2), std::invalid_argument);
}

TEST(KeyedFunction, RoughlyBalanced) {
  Rng rng(4);
  const int trials = 40000, m = 4;
  int counts[m] = {};
  for (int i = 0; i < trials; ++i) ++counts[eval_f(9, BitString::random(12, rng), BitString::random(12, rng), m)];
  for (int c : counts) EXPECT_NEAR(c, trials / m, 5 * std::sqrt(trials * 0.25 * 0.75));
}

TEST(KeyedFunction, SubsetFraction) {
  int hits = 0;
  for (std::uint64_t v = 0; v < 4096; ++v) hits += keyed_subset(7, BitString::from_u64(12, v), 0.25);
  EXPECT_NEAR(hits / 4096.0, 0.25, 5 * std::sqrt(0.25 * 0.75 / 4096));
  EXPECT_FALSE(keyed_subset(7, BitString::from_u64(12, 5), 0.0));
  EXPECT_TRUE(keyed_subset(7, BitString::from_u64(12, 5), 1.0));
}

TEST(EprPair, SameBasisOutcomesAgree) {
  Rng rng(5);
  for (int m : {2, 3, 5}) {
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < 50; ++i) {
        auto e = EprPair::phi_plus();
        const double th = qcore::basis_angle(j, m);
        const int a = e.measure(1, th, rng);
        EXPECT_EQ(e.measure(0, th, rng), a);
      }
    }
  }
}

TEST(EprPair, MatchesDensityMatrixMeasurement) {
  // Joint outcome frequencies from the amplitude fast path against the
  // density-matrix Born rule.
  const int m = 3, trials = 60000;
  Rng rng(6);
  for (int ja = 0; ja < m; ++ja) {
    const int jb = (ja + 1) % m;
    int agree_fast = 0;
    for (int i = 0; i < trials; ++i) {
      auto e = EprPair::phi_plus();
      const int b = e.measure(1, qcore::basis_angle(jb, m), rng);
      agree_fast += e.measure(0, qcore::basis_angle(ja, m), rng) == b;
    }
    int agree_dm = 0;
    for (int i = 0; i < trials / 4; ++i) {
      const auto first = qcore::measure_qubit_in_basis(qcore::bell_state(qcore::Bell::PhiPlus), jb, 1, m, rng);
      agree_dm += qcore::measure_qubit_in_basis(first.post_state, ja, 0, m, rng).outcome == first.outcome;
    }
    const double dtheta = qcore::basis_angle(ja, m) - qcore::basis_angle(jb, m);
    const double p = std::pow(std::cos(dtheta / 2), 2);
    EXPECT_NEAR(agree_fast / double(trials), p, 4 * std::sqrt(p * (1 - p) / trials));
    EXPECT_NEAR(agree_dm / double(trials / 4), p, 4 * std::sqrt(p * (1 - p) / (trials / 4)));
  }
}

TEST(EprPair, DensityIsBellState) {
  const auto e = EprPair::phi_plus();
  EXPECT_NEAR((e.density().matrix() - qcore::bell_state(qcore::Bell::PhiPlus).matrix()).norm(), 0.0, 1e-15);
}

TEST(CorrectedMeasurement, UndoesEveryPauli) {
  // For a Pauli P on the travelling half, measuring at the corrected angle
  // and flipping reproduces the uncorrupted outcome exactly (deterministic
  // because the verifier half is measured first in the same basis).
  Rng rng(8);
  for (Pauli p : {Pauli::I, Pauli::X, Pauli::Z, Pauli::XZ}) {
    for (int m : {2, 3, 4}) {
      for (int j = 0; j < m; ++j) {
        for (int i = 0; i < 40; ++i) {
          auto e = EprPair::phi_plus();
          e.apply_pauli(1, p);
          const double th = qcore::basis_angle(j, m);
          const int v = e.measure(0, th, rng);
          const auto [th2, flip] = corrected_measurement(p, th);
          EXPECT_EQ(e.measure(1, th2, rng) ^ static_cast<int>(flip), v);
        }
      }
    }
  }
}

TEST(CorrectedMeasurement, PauliActionOnDensity) {
  // Oracle: sigma |b(theta)> is again a basis vector at the claimed angle.
  const qcore::Matrix X = (qcore::Matrix(2, 2) << 0, 1, 1, 0).finished();
  const qcore::Matrix Z = (qcore::Matrix(2, 2) << 1, 0, 0, -1).finished();
  const std::pair<Pauli, qcore::Matrix> cases[] = {
      {Pauli::I, qcore::Matrix::Identity(2, 2)}, {Pauli::X, X}, {Pauli::Z, Z}, {Pauli::XZ, X * Z}};
  for (const auto& [p, mat] : cases) {
    for (double th : {0.0, 0.3, std::numbers::pi / 2, 2.0}) {
      const auto [th2, flip] = corrected_measurement(p, th);
      const qcore::Vector moved = mat * qcore::basis_vector(th, 0);
      const qcore::Vector target = qcore::basis_vector(th2, flip ? 1 : 0);
      EXPECT_NEAR(std::abs(moved.dot(target)), 1.0, 1e-12);
    }
  }
}

TEST(Transcript, CountsAndCsv) {
  Transcript t;
  RoundRecord r;
  r.x = BitString::from_u64(8, 0x1f);
  r.y = BitString::from_u64(8, 0xa0);
  r.verdict = Verdict::Accept;
  r.answer = Answer::One;
  r.v = 1;
  r.commit_received = {3.0, 3.5};
  r.answer_received = {4.0, kNever};
  t.add(r, true);
  r.index = 1;
  r.c_a = r.c_b = 0;
  r.verdict = Verdict::DiscardedNoCommit;
  r.commit_received = {kNever, kNever};
  t.add(r, true);
  EXPECT_EQ(t.rounds, 2u);
  EXPECT_EQ(t.committed, 1u);
  EXPECT_TRUE(t.consistent());
  EXPECT_FALSE(t.aborted);
  std::ostringstream os;
  write_transcript_csv(os, 4, t);
  EXPECT_EQ(os.str(), "4,0,1f,a0,1,1,1,1,accept,3.5,4\n4,1,1f,a0,0,0,1,1,discarded_no_commit,,4\n");
  r.verdict = Verdict::AbortTiming;
  t.add(r, false);
  EXPECT_TRUE(t.aborted);
  EXPECT_EQ(t.abort_reason, Verdict::AbortTiming);
  EXPECT_FALSE(t.consistent());
}

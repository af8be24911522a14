#pragma once

// Geometry, timing and round records for the plain and commit variants of
// the BB84-type position-verification protocol, plus the keyed basis
// function f and a two-qubit pure-state EPR pair used on the hot path.

#include <sodium.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cqpv/bitstring.hpp"
#include "cqpv/qcore.hpp"
#include "cqpv/rng.hpp"

namespace cqpv::protocol {

//---------------------------------------------------------------------------
// Geometry and configuration
//---------------------------------------------------------------------------

/// Positions on a line in distance units; classical signals travel one
/// distance unit per time unit.
struct Geometry {
  double v0 = 0.0;
  double p = 1.0;
  double v1 = 2.0;
  double quantum_speed_fraction = 1.0;
  double timing_tolerance = 1e-9;
  // Attacker positions; NaN selects the default, a tenth of the way from
  // each verifier towards P.
  double alice = std::numeric_limits<double>::quiet_NaN();
  double bob = std::numeric_limits<double>::quiet_NaN();

  double d0() const { return p - v0; }
  double d1() const { return v1 - p; }
  double alice_pos() const { return std::isnan(alice) ? v0 + 0.1 * d0() : alice; }
  double bob_pos() const { return std::isnan(bob) ? v1 - 0.1 * d1() : bob; }

  void validate() const {
    if (!(v0 < p && p < v1)) throw std::invalid_argument("geometry: need V0 < P < V1");
    if (!(quantum_speed_fraction > 0.0 && quantum_speed_fraction <= 1.0))
      throw std::invalid_argument("geometry: quantum speed fraction must be in (0, 1]");
    if (!(timing_tolerance >= 0.0)) throw std::invalid_argument("geometry: timing tolerance must be >= 0");
    if (!(alice_pos() >= v0 && alice_pos() <= p)) throw std::invalid_argument("geometry: Alice must sit in [V0, P]");
    if (!(bob_pos() >= p && bob_pos() <= v1)) throw std::invalid_argument("geometry: Bob must sit in [P, V1]");
  }
};

enum class Mode { Plain, Commit };

struct ProtocolConfig {
  int n = 8;                 // input bits per side
  int m = 2;                 // basis count
  std::uint64_t f_seed = 1;  // key of f
  double delay = 0.1;        // time between quantum and classical arrival at P
  Geometry geometry;
  Mode mode = Mode::Commit;
  std::size_t target_committed = 100;  // r
  std::size_t max_rounds = 1'000'000;  // cap before a run is inconclusive
  std::uint64_t seed = 1;

  void validate() const {
    if (n < 1 || n > BitString::kMaxBits) throw std::invalid_argument("protocol: n must be in [1, 256]");
    if (m < 2) throw std::invalid_argument("protocol: m must be at least 2");
    if (mode == Mode::Commit && !(delay > 0.0)) throw std::invalid_argument("protocol: delay must be > 0 in commit mode");
    if (mode == Mode::Plain && !(delay >= 0.0)) throw std::invalid_argument("protocol: delay must be >= 0");
    if (target_committed == 0) throw std::invalid_argument("protocol: target committed rounds must be positive");
    if (max_rounds < target_committed) throw std::invalid_argument("protocol: max rounds below target");
    geometry.validate();
  }
};

//---------------------------------------------------------------------------
// Timing
//---------------------------------------------------------------------------

/// Send, arrival and deadline instants of one round. Index 0 refers to V0,
/// index 1 to V1.
struct Timetable {
  double x_send;
  double y_send;
  double q_send;
  double q_arrival;          // t_Q at P
  double classical_arrival;  // t_Q + delay at P
  std::array<double, 2> commit_due;
  std::array<double, 2> answer_due;
};

/// t0 is the instant V0 sends x. Q reaches P `delay` before x and y do.
inline Timetable schedule_round(const ProtocolConfig& cfg, double t0) {
  const auto& g = cfg.geometry;
  const double d0 = g.d0(), d1 = g.d1();
  Timetable t{};
  t.x_send = t0;
  t.classical_arrival = t0 + d0;
  t.y_send = t.classical_arrival - d1;
  t.q_arrival = t.classical_arrival - cfg.delay;
  t.q_send = t.q_arrival - d0 / g.quantum_speed_fraction;
  t.commit_due = {t.q_arrival + d0, t.q_arrival + d1};
  t.answer_due = {t.classical_arrival + d0, t.classical_arrival + d1};
  return t;
}

//---------------------------------------------------------------------------
// Keyed functions of the inputs
//---------------------------------------------------------------------------

namespace detail {

inline void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}

inline std::array<unsigned char, crypto_shorthash_KEYBYTES> key_from_seed(std::uint64_t seed, std::uint64_t domain) {
  std::array<unsigned char, crypto_shorthash_KEYBYTES> key{};
  const std::uint64_t k0 = splitmix64(seed ^ splitmix64(domain));
  const std::uint64_t k1 = splitmix64(k0 + domain + 1);
  for (int i = 0; i < 8; ++i) {
    key[i] = static_cast<unsigned char>(k0 >> (8 * i));
    key[8 + i] = static_cast<unsigned char>(k1 >> (8 * i));
  }
  return key;
}

inline std::uint64_t siphash(const unsigned char* msg, std::size_t len,
                             const std::array<unsigned char, crypto_shorthash_KEYBYTES>& key) {
  ensure_sodium();
  unsigned char out[crypto_shorthash_BYTES];
  crypto_shorthash(out, msg, len, key.data());
  std::uint64_t h = 0;
  for (int i = 0; i < 8; ++i) h |= static_cast<std::uint64_t>(out[i]) << (8 * i);
  return h;
}

inline std::uint64_t hash_strings(std::uint64_t seed, std::uint64_t domain, const BitString* a, const BitString* b) {
  unsigned char buf[2 * (BitString::kMaxBits / 8) + 2];
  std::size_t len = 0;
  for (const BitString* s : {a, b}) {
    if (!s) continue;
    for (int i = 0; i < s->bytes(); ++i) buf[len++] = s->byte(i);
    buf[len++] = static_cast<unsigned char>(s->size() - 1);
  }
  return siphash(buf, len, key_from_seed(seed, domain));
}

inline std::uint64_t reduce(std::uint64_t h, std::uint64_t m) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(h) * m) >> 64);
}

}  // namespace detail

/// f(x, y) in {0, ..., m-1}: SipHash-2-4 keyed by `seed` over x || y.
inline int eval_f(std::uint64_t seed, const BitString& x, const BitString& y, int m) {
  if (x.size() != y.size()) throw std::invalid_argument("eval_f: |x| != |y|");
  if (m < 1) throw std::invalid_argument("eval_f: m must be positive");
  return static_cast<int>(detail::reduce(detail::hash_strings(seed, 0, &x, &y), static_cast<std::uint64_t>(m)));
}

/// Keyed membership test selecting an expected `fraction` of all strings.
inline bool keyed_subset(std::uint64_t seed, const BitString& s, double fraction) {
  if (fraction <= 0.0) return false;
  if (fraction >= 1.0) return true;
  const std::uint64_t h = detail::hash_strings(seed, 1, &s, nullptr);
  return static_cast<double>(h >> 11) * 0x1.0p-53 < fraction;
}

//---------------------------------------------------------------------------
// Two-qubit pure state
//---------------------------------------------------------------------------

enum class Pauli : std::uint8_t { I, X, Z, XZ };

/// Pure state of (verifier half, travelling half); amplitude index is
/// 2 * q0 + q1, matching kron(A, B).
class EprPair {
 public:
  using cplx = std::complex<double>;

  static EprPair phi_plus() {
    EprPair e;
    const double s = 1.0 / std::sqrt(2.0);
    e.a_ = {cplx(s), cplx(0), cplx(0), cplx(s)};
    return e;
  }

  const std::array<cplx, 4>& amplitudes() const noexcept { return a_; }

  qcore::DensityMatrix density() const {
    qcore::Vector v(4);
    for (int i = 0; i < 4; ++i) v(i) = a_[i];
    return qcore::DensityMatrix::pure(v);
  }

  /// Measure `qubit` in the basis at Bloch angle theta on the X-Z circle;
  /// the state collapses to the observed branch.
  int measure(int qubit, double theta, Rng& rng) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    // Outcome-0 projection leaves amplitudes alpha_j on the other qubit.
    cplx alpha[2];
    for (int j = 0; j < 2; ++j) alpha[j] = c * amp(qubit, 0, j) + s * amp(qubit, 1, j);
    const double p0 = std::norm(alpha[0]) + std::norm(alpha[1]);
    const int bit = rng.uniform() < p0 ? 0 : 1;
    if (bit == 1)
      for (int j = 0; j < 2; ++j) alpha[j] = -s * amp(qubit, 0, j) + c * amp(qubit, 1, j);
    const double norm = std::sqrt(std::norm(alpha[0]) + std::norm(alpha[1]));
    const double e[2] = {bit == 0 ? c : -s, bit == 0 ? s : c};
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < 2; ++j) amp(qubit, k, j) = e[k] * alpha[j] / norm;
    return bit;
  }

  void apply_pauli(int qubit, Pauli p) {
    if (p == Pauli::Z || p == Pauli::XZ)
      for (int j = 0; j < 2; ++j) amp(qubit, 1, j) = -amp(qubit, 1, j);
    if (p == Pauli::X || p == Pauli::XZ)
      for (int j = 0; j < 2; ++j) std::swap(amp(qubit, 0, j), amp(qubit, 1, j));
  }

 private:
  cplx& amp(int qubit, int bit, int other) { return qubit == 0 ? a_[2 * bit + other] : a_[2 * other + bit]; }

  std::array<cplx, 4> a_{};
};

/// Measuring P|psi> at angle theta' and flipping by `flip` is the same as
/// measuring |psi> at angle theta. Returns {theta', flip}.
inline std::pair<double, bool> corrected_measurement(Pauli p, double theta) {
  switch (p) {
    case Pauli::I: return {theta, false};
    case Pauli::Z: return {-theta, false};
    case Pauli::X: return {-theta, true};
    case Pauli::XZ: return {theta, true};
  }
  return {theta, false};
}

//---------------------------------------------------------------------------
// Round records and transcripts
//---------------------------------------------------------------------------

enum class Answer : std::int8_t { Zero = 0, One = 1, Bot = 2 };

inline Answer answer_bit(int b) { return b ? Answer::One : Answer::Zero; }

inline std::string_view to_string(Answer a) {
  switch (a) {
    case Answer::Zero: return "0";
    case Answer::One: return "1";
    case Answer::Bot: return "bot";
  }
  return "?";
}

enum class Verdict : std::uint8_t {
  Accept,
  Incorrect,
  Loss,
  AbortTiming,
  AbortMismatchAnswer,
  AbortMismatchCommit,
  DiscardedNoCommit,
};
inline constexpr std::size_t kVerdictCount = 7;

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Accept: return "accept";
    case Verdict::Incorrect: return "incorrect";
    case Verdict::Loss: return "loss";
    case Verdict::AbortTiming: return "abort_timing";
    case Verdict::AbortMismatchAnswer: return "abort_mismatch_answer";
    case Verdict::AbortMismatchCommit: return "abort_mismatch_commit";
    case Verdict::DiscardedNoCommit: return "discarded_no_commit";
  }
  return "?";
}

inline bool is_abort(Verdict v) {
  return v == Verdict::AbortTiming || v == Verdict::AbortMismatchAnswer || v == Verdict::AbortMismatchCommit;
}

inline constexpr double kNever = std::numeric_limits<double>::infinity();

struct RoundRecord {
  std::size_t index = 0;
  BitString x, y;
  int basis = 0;
  int c_a = 1, c_b = 1;
  Answer answer_a = Answer::Bot, answer_b = Answer::Bot;
  Answer answer = Answer::Bot;  // common answer when both verifiers agree
  int v = 0;
  double q_arrival = 0.0;
  double classical_arrival = 0.0;
  std::array<double, 2> commit_received{kNever, kNever};
  std::array<double, 2> answer_received{kNever, kNever};
  Verdict verdict = Verdict::Loss;

  bool committed() const { return c_a != 0 || c_b != 0; }
};

struct Transcript {
  std::vector<RoundRecord> records;  // filled only when requested
  std::array<std::size_t, kVerdictCount> counts{};
  std::size_t rounds = 0;
  std::size_t committed = 0;
  bool aborted = false;
  bool inconclusive = false;
  Verdict abort_reason = Verdict::Accept;

  std::size_t count(Verdict v) const { return counts[static_cast<std::size_t>(v)]; }

  void add(const RoundRecord& rec, bool keep) {
    ++rounds;
    ++counts[static_cast<std::size_t>(rec.verdict)];
    if (rec.committed()) ++committed;
    if (is_abort(rec.verdict) && !aborted) {
      aborted = true;
      abort_reason = rec.verdict;
    }
    if (keep) records.push_back(rec);
  }

  /// Counts agree with a recount of the stored records.
  bool consistent() const {
    if (records.size() != rounds) return false;
    std::array<std::size_t, kVerdictCount> c{};
    std::size_t com = 0;
    for (const auto& r : records) {
      ++c[static_cast<std::size_t>(r.verdict)];
      if (r.committed()) ++com;
    }
    return c == counts && com == committed;
  }
};

inline constexpr const char* kTranscriptCsvHeader =
    "trial_id,round_idx,x_hex,y_hex,c_A,c_B,answer,v,verdict,t_commit,t_answer\n";

namespace detail {
inline void write_time(std::ostream& os, double t) {
  if (std::isfinite(t)) os << t;
}
inline double latest(const std::array<double, 2>& t) {
  const bool a = std::isfinite(t[0]), b = std::isfinite(t[1]);
  if (a && b) return std::max(t[0], t[1]);
  return a ? t[0] : (b ? t[1] : kNever);
}
}  // namespace detail

/// One CSV row per stored record. Times are the later of the two verifier
/// receipt instants; empty when nothing was received.
inline void write_transcript_csv(std::ostream& os, std::size_t trial_id, const Transcript& t) {
  const auto old_prec = os.precision(12);
  for (const auto& r : t.records) {
    os << trial_id << ',' << r.index << ',' << r.x.to_hex() << ',' << r.y.to_hex() << ',' << r.c_a << ',' << r.c_b
       << ',' << to_string(r.answer) << ',' << r.v << ',' << to_string(r.verdict) << ',';
    detail::write_time(os, detail::latest(r.commit_received));
    os << ',';
    detail::write_time(os, detail::latest(r.answer_received));
    os << '\n';
  }
  os.precision(old_prec);
}

}  // namespace cqpv::protocol

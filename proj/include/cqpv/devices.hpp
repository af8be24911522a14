#pragma once

// Device and channel models of the prover laboratory: transmission loss,
// threshold detectors with dark counts, the linear-optics partial Bell
// measurement used as a presence detector, and an abstract QND presence
// detector. The pipeline turns an (arrived / not arrived) input into a
// commit decision, a measurement click and a teleportation correction.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "cqpv/error.hpp"
#include "cqpv/protocol.hpp"
#include "cqpv/rng.hpp"

namespace cqpv::devices {

using protocol::Pauli;

enum class PresenceModel { Qnd, PartialBsm };

struct DeviceParams {
  double eta_v = 1.0;        // verifier -> prover transmission
  double eta_det = 1.0;      // single-photon detector efficiency
  double p_dc = 0.0;         // measurement dark-count probability per window
  double eta_det_qnd = 1.0;  // presence-detection efficiency (QND model)
  double p_dc_qnd = 0.0;     // presence-detection dark-count probability (QND model)
  double eta_surv = 1.0;     // survival through presence detection
  double eta_equip = 1.0;    // transmission of the equipment after presence detection
  double eta_delay = 1.0;    // survival in the delay loop
  double fidelity = 1.0;     // output fidelity, applied as an answer flip
  PresenceModel model = PresenceModel::Qnd;

  /// All losses after presence detection, including detection itself.
  double eta_meas() const { return eta_det * eta_equip * eta_surv * eta_delay; }

  void validate() const {
    for (auto [name, v] : {std::pair{"eta_v", eta_v}, {"eta_det", eta_det}, {"p_dc", p_dc},
                           {"eta_det_qnd", eta_det_qnd}, {"p_dc_qnd", p_dc_qnd}, {"eta_surv", eta_surv},
                           {"eta_equip", eta_equip}, {"eta_delay", eta_delay}, {"fidelity", fidelity}})
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string("devices: ") + name + " must be in [0, 1]");
    if (model == PresenceModel::Qnd) {
      if (p_dc_qnd > 1.0 - eta_v * eta_det_qnd + 1e-15)
        throw std::invalid_argument("devices: p_dc_qnd exceeds the no-signal probability 1 - eta_v eta_det_qnd");
      if (eta_meas() < 1.0 && p_dc > 1.0 - eta_meas() + 1e-15)
        throw std::invalid_argument("devices: p_dc exceeds the no-photon probability 1 - eta_meas");
    }
  }
};

/// True-QND parameter block (atom-cavity presence detector).
struct QndParams {
  double eta_surv = 0.4;
  double p_dc_qnd = 0.03;
  double fidelity = 0.96;
};

inline bool sample_loss(double p_survive, Rng& rng) {
  if (!(p_survive >= 0.0 && p_survive <= 1.0)) throw std::invalid_argument("sample_loss: probability outside [0, 1]");
  return rng.bernoulli(p_survive);
}

/// Threshold detector: a present photon clicks with probability eta_det;
/// otherwise a click happens with probability p_dc.
inline bool detector_click(bool photon_present, double eta_det, double p_dc, Rng& rng) {
  return rng.bernoulli(photon_present ? eta_det : p_dc);
}

//---------------------------------------------------------------------------
// Partial Bell measurement
//---------------------------------------------------------------------------

/// Detectors D1..D4 (index 0..3). D1, D2 sit in one output arm, D3, D4 in
/// the other.
using ClickPattern = std::array<bool, 4>;

enum class BsmOutcome { PsiMinus, PsiPlus, Inconclusive };

inline BsmOutcome bsm_classify(const ClickPattern& c) {
  const int clicks = c[0] + c[1] + c[2] + c[3];
  if (clicks != 2) return BsmOutcome::Inconclusive;
  if ((c[0] && c[2]) || (c[1] && c[3])) return BsmOutcome::PsiMinus;
  if ((c[0] && c[1]) || (c[2] && c[3])) return BsmOutcome::PsiPlus;
  return BsmOutcome::Inconclusive;
}

/// Detectors hit by the two photons for each Bell outcome. Psi- sends one
/// photon to each arm, Psi+ both to one arm, Phi+- both to one detector.
inline std::array<int, 2> bsm_photon_ports(qcore::Bell bell, Rng& rng) {
  const int choice = rng.bit();
  switch (bell) {
    case qcore::Bell::PsiMinus: return choice ? std::array{1, 3} : std::array{0, 2};
    case qcore::Bell::PsiPlus: return choice ? std::array{2, 3} : std::array{0, 1};
    default: {
      const int d = static_cast<int>(rng.below(4));
      return {d, d};
    }
  }
}

/// Exact probability that the partial BSM heralds (classifies Psi+-) when
/// a photon arrives, by enumerating Bell outcomes, port choices, photon
/// detections and dark counts.
inline double bsm_conclusive_probability(double eta_det, double p_dc) {
  double total = 0.0;
  for (int b = 0; b < 4; ++b) {
    const auto bell = static_cast<qcore::Bell>(b);
    const bool same = bell == qcore::Bell::PhiPlus || bell == qcore::Bell::PhiMinus;
    const int choices = same ? 4 : 2;
    for (int c = 0; c < choices; ++c) {
      std::array<int, 2> ports;
      if (same) ports = {c, c};
      else if (bell == qcore::Bell::PsiMinus) ports = c ? std::array{1, 3} : std::array{0, 2};
      else ports = c ? std::array{2, 3} : std::array{0, 1};
      for (int det = 0; det < 4; ++det) {
        const double p_det = (det & 1 ? eta_det : 1 - eta_det) * (det & 2 ? eta_det : 1 - eta_det);
        ClickPattern lit{};
        if (det & 1) lit[static_cast<std::size_t>(ports[0])] = true;
        if (det & 2) lit[static_cast<std::size_t>(ports[1])] = true;
        for (int dark = 0; dark < 16; ++dark) {
          double p = 0.25 / choices * p_det;
          ClickPattern clicks = lit;
          for (std::size_t k = 0; k < 4; ++k) {
            const bool on = (dark >> k) & 1;
            p *= on ? p_dc : 1 - p_dc;
            if (on) clicks[k] = true;
          }
          if (p > 0.0 && bsm_classify(clicks) != BsmOutcome::Inconclusive) total += p;
        }
      }
    }
  }
  return total;
}

inline Pauli pauli_of(qcore::Bell b) {
  switch (b) {
    case qcore::Bell::PhiPlus: return Pauli::I;
    case qcore::Bell::PhiMinus: return Pauli::Z;
    case qcore::Bell::PsiPlus: return Pauli::X;
    case qcore::Bell::PsiMinus: return Pauli::XZ;
  }
  return Pauli::I;
}

//---------------------------------------------------------------------------
// Prover laboratory
//---------------------------------------------------------------------------

struct PipelineResult {
  bool commit = false;
  bool clicked = false;  // the measurement produced an outcome
  bool signal = false;   // the click came from the photon carrying the input
  Pauli correction = Pauli::I;  // label the prover applies
  Pauli actual = Pauli::I;      // Pauli actually acting on the input
};

namespace detail {

inline PipelineResult qnd_pipeline(const DeviceParams& d, bool input_arrived, Rng& rng) {
  PipelineResult r;
  const double eta_meas = d.eta_meas();
  const bool signal_herald = input_arrived && rng.bernoulli(d.eta_det_qnd);
  bool dark_herald = false;
  if (!signal_herald) {
    // Dark counts are absorbed into p_dc_qnd: overall false-herald rate is p_dc_qnd.
    const double no_signal = 1.0 - d.eta_v * d.eta_det_qnd;
    dark_herald = no_signal > 0.0 && rng.bernoulli(d.p_dc_qnd / no_signal);
  }
  r.commit = signal_herald || dark_herald;
  if (!r.commit) return r;
  if (signal_herald && rng.bernoulli(eta_meas)) {
    r.clicked = r.signal = true;
  } else {
    const double p = signal_herald ? (eta_meas < 1.0 ? d.p_dc / (1.0 - eta_meas) : 0.0) : d.p_dc;
    r.clicked = rng.bernoulli(p);
  }
  return r;
}

inline PipelineResult bsm_pipeline(const DeviceParams& d, bool input_arrived, Rng& rng) {
  PipelineResult r;
  ClickPattern clicks{};
  qcore::Bell bell = qcore::Bell::PhiPlus;
  if (input_arrived) {
    bell = static_cast<qcore::Bell>(rng.below(4));
    for (int port : bsm_photon_ports(bell, rng))
      if (rng.bernoulli(d.eta_det)) clicks[static_cast<std::size_t>(port)] = true;
  } else if (rng.bernoulli(d.eta_det)) {
    clicks[rng.below(4)] = true;
  }
  for (auto& c : clicks)
    if (rng.bernoulli(d.p_dc)) c = true;
  const auto outcome = bsm_classify(clicks);
  if (outcome == BsmOutcome::Inconclusive) return r;
  r.commit = true;
  r.correction = outcome == BsmOutcome::PsiPlus ? Pauli::X : Pauli::XZ;
  r.actual = pauli_of(bell);
  if (input_arrived && rng.bernoulli(d.eta_meas())) {
    r.clicked = r.signal = true;
  } else {
    r.clicked = rng.bernoulli(d.p_dc);
  }
  return r;
}

}  // namespace detail

/// One pass of the prover laboratory given whether the input photon made
/// it through the verifier -> prover channel.
inline PipelineResult prover_lab_pipeline(const DeviceParams& d, bool input_arrived, Rng& rng) {
  return d.model == PresenceModel::Qnd ? detail::qnd_pipeline(d, input_arrived, rng)
                                       : detail::bsm_pipeline(d, input_arrived, rng);
}

struct EtaEstimate {
  double eta_p = 0.0;
  double p_commit = 0.0;
  double se_eta_p = 0.0;
  double se_p_commit = 0.0;
  std::size_t trials = 0;
  std::size_t committed = 0;
  std::size_t measured = 0;
};

/// Monte Carlo estimate of eta_P = P[click | commit] and of p_commit.
inline EtaEstimate empirical_eta_p(const DeviceParams& d, std::size_t trials, Rng& rng) {
  d.validate();
  EtaEstimate e;
  e.trials = trials;
  for (std::size_t i = 0; i < trials; ++i) {
    const auto r = prover_lab_pipeline(d, rng.bernoulli(d.eta_v), rng);
    if (!r.commit) continue;
    ++e.committed;
    if (r.clicked) ++e.measured;
  }
  if (e.committed == 0) throw UndefinedEstimate("empirical_eta_p: no committed rounds");
  const double nc = static_cast<double>(e.committed), nt = static_cast<double>(trials);
  e.eta_p = static_cast<double>(e.measured) / nc;
  e.p_commit = nc / nt;
  e.se_eta_p = std::sqrt(e.eta_p * (1.0 - e.eta_p) / nc);
  e.se_p_commit = std::sqrt(e.p_commit * (1.0 - e.p_commit) / nt);
  return e;
}

/// Committed-round click probability of the QND pipeline (its exact value).
inline double qnd_eta_p(const DeviceParams& d) {
  const double s = d.eta_v * d.eta_det_qnd;
  const double den = s + d.p_dc_qnd;
  if (!(den > 0.0)) throw UndefinedEstimate("qnd_eta_p: no signal and no dark counts");
  return ((d.eta_meas() + d.p_dc) * s + d.p_dc * d.p_dc_qnd) / den;
}

/// Commit probability of the QND pipeline.
inline double qnd_p_commit(const DeviceParams& d) { return d.eta_v * d.eta_det_qnd + d.p_dc_qnd; }

}  // namespace cqpv::devices

#pragma once

// Closed-form engineering estimates: prover-laboratory transmission eta_P,
// presence-detection signal-to-noise ratio, reachable fiber length and the
// wall-clock duration of a full run.

#include <cmath>
#include <stdexcept>

#include "cqpv/error.hpp"
#include "cqpv/verdict.hpp"

namespace cqpv::estimate {

struct EstimateInputs {
  double eta_v = 1.0;
  double eta_det = 1.0;
  double eta_det_qnd = 1.0;
  double p_dc = 0.0;
  double p_dc_qnd = 0.0;
  double eta_surv = 1.0;
  double eta_equip = 1.0;
  double gamma_snr = 10.0;     // eta_V / p_dc_qnd
  double alpha_fiber = 0.2;    // dB/km
  double nu = 1e6;             // protocol frequency, Hz
  double p_commit = 1.0;
  double k = 10.0;

  double eta_meas() const { return eta_det * eta_equip * eta_surv; }
};

/// eta_P = ((eta_meas + p_dc) eta_V eta_det_qnd + p_dc p_dc_qnd) / (eta_V eta_det_qnd + p_dc_qnd).
inline double eta_p_closed_form(double eta_v, double eta_meas, double eta_det_qnd, double p_dc, double p_dc_qnd) {
  const double s = eta_v * eta_det_qnd;
  const double den = s + p_dc_qnd;
  if (!(den > 0.0)) throw UndefinedEstimate("eta_p_closed_form: no signal and no dark counts");
  return ((eta_meas + p_dc) * s + p_dc * p_dc_qnd) / den;
}

inline double eta_p_closed_form(const EstimateInputs& in) {
  return eta_p_closed_form(in.eta_v, in.eta_meas(), in.eta_det_qnd, in.p_dc, in.p_dc_qnd);
}

inline double snr_qnd(double gamma_snr, double eta_det_qnd) {
  if (!(gamma_snr >= 0.0)) throw std::invalid_argument("snr_qnd: gamma must be >= 0");
  if (std::isinf(gamma_snr)) return 1.0;
  const double g = gamma_snr * eta_det_qnd;
  return g / (g + 1.0);
}

/// Upper bound gamma eta_det^3 / (gamma eta_det^2 + 1) for the partial-BSM
/// presence detector, valid for p_dc = 0.
inline double eta_p_bsm_upper_bound(double gamma_snr, double eta_det) {
  const double e2 = eta_det * eta_det;
  return gamma_snr * e2 * eta_det / (gamma_snr * e2 + 1.0);
}

struct FiberLength {
  double km = 0.0;
  bool degenerate = false;  // gamma p_dc_qnd >= 1: no positive length
};

/// L = -(10 / alpha) log10(gamma p_dc_qnd).
inline FiberLength fiber_length(double alpha_fiber, double gamma_snr, double p_dc_qnd) {
  if (!(alpha_fiber > 0.0)) throw std::invalid_argument("fiber_length: attenuation must be positive");
  const double arg = gamma_snr * p_dc_qnd;
  if (!(arg > 0.0)) throw std::invalid_argument("fiber_length: gamma p_dc_qnd must be positive");
  if (arg >= 1.0) return {arg == 1.0 ? 0.0 : -(10.0 / alpha_fiber) * std::log10(arg), true};
  return {-(10.0 / alpha_fiber) * std::log10(arg), false};
}

/// Seconds needed to collect the committed-round budget of `model` at
/// protocol frequency nu: 320 k^4 / (p_commit nu) for S3, 320 k^3 / (p_commit nu) for S2.
inline double protocol_duration(double k, double p_commit, double nu, verdict::Model model) {
  if (!(p_commit > 0.0) || !(nu > 0.0)) throw std::invalid_argument("protocol_duration: p_commit and nu must be positive");
  if (model == verdict::Model::S1) throw std::invalid_argument("protocol_duration: S1 has no round budget");
  if (std::isinf(nu)) return 0.0;
  const double rounds = model == verdict::Model::S3 ? 320.0 * k * k * k * k : 320.0 * k * k * k;
  return rounds / (p_commit * nu);
}

}  // namespace cqpv::estimate

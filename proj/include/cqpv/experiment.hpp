#pragma once

// Experiment orchestration: JSON configuration, deterministic batch
// execution over trials, and report files. Every entry point takes the
// parsed configuration and returns an exit status; nothing here touches
// global state.

#include <json.hpp>
#include <sodium.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cqpv/devices.hpp"
#include "cqpv/error.hpp"
#include "cqpv/estimate.hpp"
#include "cqpv/lemmas.hpp"
#include "cqpv/parallel.hpp"
#include "cqpv/protocol.hpp"
#include "cqpv/rounds.hpp"
#include "cqpv/stats.hpp"
#include "cqpv/strategies.hpp"
#include "cqpv/verdict.hpp"

namespace cqpv::experiment {

using json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kConfigError = 2, kInconclusive = 3, kInvariantViolation = 4 };

//---------------------------------------------------------------------------
// Configuration
//---------------------------------------------------------------------------

struct StrategyConfig {
  std::string kind = "honest";  // honest | basis_guess | mismatch | adaptive_mismatch
  double p_err = 0.0;
  double answer_latency = 0.0;
  double commit_prob = 1.0;
  strategies::MismatchAttackSpec mismatch;
  std::vector<double> schedule;  // adaptive: epsilon per committed round
};

struct BoundsConfig {
  verdict::BoundParams params;
  bool eta_p_auto = false;
  bool lossy = false;
  std::vector<verdict::Point> curve;
  double rate_sigmas = 4.0;
};

struct SweepConfig {
  std::string parameter;  // JSON pointer into the configuration
  std::vector<json> values;
};

struct ExperimentConfig {
  std::string experiment = "simulate";
  std::uint64_t seed = 1;
  std::size_t trials = 100;
  unsigned workers = 1;
  protocol::ProtocolConfig protocol;
  devices::DeviceParams device;
  StrategyConfig strategy;
  BoundsConfig bounds;
  estimate::EstimateInputs estimate;
  SweepConfig estimate_sweep;
  json lemmas = json::object();
  SweepConfig sweep;
  std::size_t transcript_trials = 1;
  json effective;  // configuration after command-line overrides
};

namespace detail {

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "/" : path, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items())
    if (!ok.count(key)) throw ConfigError(path + "/" + key, "unknown field");
}

template <class T>
T get(const json& obj, const std::string& path, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path + "/" + key, "expected a boolean");
    } else if constexpr (std::is_arithmetic_v<T>) {
      if (!v.is_number()) throw ConfigError(path + "/" + key, "expected a number");
      if constexpr (std::is_integral_v<T>)
        if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError(path + "/" + key, "expected an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (v.is_number_integer() && v.get<long long>() < 0) throw ConfigError(path + "/" + key, "must be non-negative");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path + "/" + key, "expected a string");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + "/" + key, e.what());
  }
}

inline verdict::Point parse_point(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(path, "expected [p_C, p_bot, p_I]");
  verdict::Point p;
  for (int i = 0; i < 3; ++i) {
    if (!v[static_cast<std::size_t>(i)].is_number()) throw ConfigError(path, "expected numbers");
    p(i) = v[static_cast<std::size_t>(i)].get<double>();
  }
  return p;
}

inline SweepConfig parse_sweep(const json& s, const std::string& path) {
  check_keys(s, path, {"parameter", "values"});
  SweepConfig out;
  out.parameter = get<std::string>(s, path, "parameter", "");
  if (out.parameter.empty()) throw ConfigError(path + "/parameter", "required");
  if (!s.contains("values") || !s.at("values").is_array() || s.at("values").empty())
    throw ConfigError(path + "/values", "expected a non-empty array");
  for (const auto& v : s.at("values")) out.values.push_back(v);
  return out;
}

inline void parse_protocol(const json& p, protocol::ProtocolConfig& c) {
  const std::string path = "/protocol";
  check_keys(p, path, {"n", "m", "f_seed", "delay", "mode", "target_committed", "max_rounds", "geometry"});
  c.n = get(p, path, "n", c.n);
  c.m = get(p, path, "m", c.m);
  c.f_seed = get(p, path, "f_seed", c.f_seed);
  c.delay = get(p, path, "delay", c.delay);
  const auto mode = get<std::string>(p, path, "mode", "commit");
  if (mode == "commit") c.mode = protocol::Mode::Commit;
  else if (mode == "plain") c.mode = protocol::Mode::Plain;
  else throw ConfigError(path + "/mode", "expected 'plain' or 'commit'");
  c.target_committed = get(p, path, "target_committed", c.target_committed);
  c.max_rounds = get(p, path, "max_rounds", std::max(c.max_rounds, 100 * c.target_committed));
  if (p.contains("geometry")) {
    const auto& g = p.at("geometry");
    const std::string gp = path + "/geometry";
    check_keys(g, gp, {"v0", "p", "v1", "quantum_speed_fraction", "timing_tolerance", "alice", "bob"});
    auto& geo = c.geometry;
    geo.v0 = get(g, gp, "v0", geo.v0);
    geo.p = get(g, gp, "p", geo.p);
    geo.v1 = get(g, gp, "v1", geo.v1);
    geo.quantum_speed_fraction = get(g, gp, "quantum_speed_fraction", geo.quantum_speed_fraction);
    geo.timing_tolerance = get(g, gp, "timing_tolerance", geo.timing_tolerance);
    geo.alice = get(g, gp, "alice", geo.alice);
    geo.bob = get(g, gp, "bob", geo.bob);
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

inline void parse_devices(const json& d, devices::DeviceParams& dev) {
  const std::string path = "/devices";
  check_keys(d, path, {"eta_v", "eta_det", "p_dc", "eta_det_qnd", "p_dc_qnd", "eta_surv", "eta_equip", "eta_delay",
                       "fidelity", "model"});
  dev.eta_v = get(d, path, "eta_v", dev.eta_v);
  dev.eta_det = get(d, path, "eta_det", dev.eta_det);
  dev.p_dc = get(d, path, "p_dc", dev.p_dc);
  dev.eta_det_qnd = get(d, path, "eta_det_qnd", dev.eta_det_qnd);
  dev.p_dc_qnd = get(d, path, "p_dc_qnd", dev.p_dc_qnd);
  dev.eta_surv = get(d, path, "eta_surv", dev.eta_surv);
  dev.eta_equip = get(d, path, "eta_equip", dev.eta_equip);
  dev.eta_delay = get(d, path, "eta_delay", dev.eta_delay);
  dev.fidelity = get(d, path, "fidelity", dev.fidelity);
  const auto model = get<std::string>(d, path, "model", "qnd");
  if (model == "qnd") dev.model = devices::PresenceModel::Qnd;
  else if (model == "partial_bsm") dev.model = devices::PresenceModel::PartialBsm;
  else throw ConfigError(path + "/model", "expected 'qnd' or 'partial_bsm'");
  try {
    dev.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

inline void parse_strategy(const json& s, StrategyConfig& c) {
  const std::string path = "/strategy";
  check_keys(s, path, {"kind", "p_err", "answer_latency", "commit_prob", "epsilon", "bad_epsilon", "c_tilde",
                       "bad_seed", "p_play", "p_correct", "p_bot", "schedule"});
  c.kind = get<std::string>(s, path, "kind", c.kind);
  c.p_err = get(s, path, "p_err", c.p_err);
  c.answer_latency = get(s, path, "answer_latency", c.answer_latency);
  c.commit_prob = get(s, path, "commit_prob", c.commit_prob);
  auto& m = c.mismatch;
  m.epsilon = get(s, path, "epsilon", m.epsilon);
  m.bad_epsilon = get(s, path, "bad_epsilon", m.bad_epsilon);
  m.c_tilde = get(s, path, "c_tilde", m.c_tilde);
  m.bad_seed = get(s, path, "bad_seed", m.bad_seed);
  m.p_play = get(s, path, "p_play", m.p_play);
  m.policy.p_correct = get(s, path, "p_correct", m.policy.p_correct);
  m.policy.p_bot = get(s, path, "p_bot", m.policy.p_bot);
  if (s.contains("schedule")) {
    const auto& sch = s.at("schedule");
    const std::string sp = path + "/schedule";
    check_keys(sch, sp, {"type", "values", "epsilon", "rounds", "total"});
    const auto type = get<std::string>(sch, sp, "type", "list");
    if (type == "list") {
      if (!sch.contains("values") || !sch.at("values").is_array()) throw ConfigError(sp + "/values", "expected an array");
      for (const auto& v : sch.at("values")) {
        if (!v.is_number()) throw ConfigError(sp + "/values", "expected numbers");
        c.schedule.push_back(v.get<double>());
      }
    } else if (type == "front_loaded" || type == "constant") {
      // epsilon for the first `rounds` committed rounds, zero afterwards.
      const double e = get(sch, sp, "epsilon", 0.0);
      const auto n = get<std::size_t>(sch, sp, "rounds", 0);
      c.schedule.assign(n, e);
    } else if (type == "budget") {
      // `rounds` equal entries summing to `total`.
      const double total = get(sch, sp, "total", 0.0);
      const auto n = get<std::size_t>(sch, sp, "rounds", 0);
      if (n == 0) throw ConfigError(sp + "/rounds", "must be positive");
      c.schedule.assign(n, total / static_cast<double>(n));
    } else {
      throw ConfigError(sp + "/type", "expected list, front_loaded, constant or budget");
    }
  }
  static const std::set<std::string> kinds{"honest", "basis_guess", "mismatch", "adaptive_mismatch"};
  if (!kinds.count(c.kind)) throw ConfigError(path + "/kind", "unknown strategy '" + c.kind + "'");
  try {
    m.validate();
    if (!(c.p_err >= 0.0 && c.p_err <= 1.0)) throw std::invalid_argument("p_err must be in [0, 1]");
    if (!(c.answer_latency >= 0.0)) throw std::invalid_argument("answer_latency must be >= 0");
    if (!(c.commit_prob >= 0.0 && c.commit_prob <= 1.0)) throw std::invalid_argument("commit_prob must be in [0, 1]");
    for (double e : c.schedule)
      if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("schedule entries must be in [0, 1]");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

inline void parse_bounds(const json& b, BoundsConfig& c) {
  const std::string path = "/bounds";
  check_keys(b, path, {"p_attack", "p_err", "eta_p", "delta_margin", "k", "model", "lossy", "curve", "rate_sigmas"});
  auto& p = c.params;
  p.p_attack = get(b, path, "p_attack", p.p_attack);
  p.p_err = get(b, path, "p_err", p.p_err);
  if (b.contains("eta_p") && b.at("eta_p").is_string()) {
    if (b.at("eta_p").get<std::string>() != "auto") throw ConfigError(path + "/eta_p", "expected a number or 'auto'");
    c.eta_p_auto = true;
  } else {
    p.eta_p = get(b, path, "eta_p", p.eta_p);
  }
  p.delta_margin = get(b, path, "delta_margin", p.delta_margin);
  p.k = get(b, path, "k", p.k);
  try {
    p.model = verdict::parse_model(get<std::string>(b, path, "model", "S1"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + "/model", e.what());
  }
  c.lossy = get(b, path, "lossy", c.lossy);
  c.rate_sigmas = get(b, path, "rate_sigmas", c.rate_sigmas);
  if (b.contains("curve")) {
    const auto& cv = b.at("curve");
    if (!cv.is_array()) throw ConfigError(path + "/curve", "expected an array of points");
    for (std::size_t i = 0; i < cv.size(); ++i) c.curve.push_back(parse_point(cv[i], path + "/curve/" + std::to_string(i)));
  }
  if (c.lossy && c.curve.size() < 2) throw ConfigError(path + "/curve", "lossy scoring needs at least two curve points");
  if (!(c.rate_sigmas > 0.0)) throw ConfigError(path + "/rate_sigmas", "must be positive");
}

inline void parse_estimate(const json& e, estimate::EstimateInputs& in, SweepConfig& sweep) {
  const std::string path = "/estimate";
  check_keys(e, path, {"eta_v", "eta_det", "eta_det_qnd", "p_dc", "p_dc_qnd", "eta_surv", "eta_equip", "gamma_snr",
                       "alpha_fiber", "nu", "p_commit", "k", "sweep"});
  in.eta_v = get(e, path, "eta_v", in.eta_v);
  in.eta_det = get(e, path, "eta_det", in.eta_det);
  in.eta_det_qnd = get(e, path, "eta_det_qnd", in.eta_det_qnd);
  in.p_dc = get(e, path, "p_dc", in.p_dc);
  in.p_dc_qnd = get(e, path, "p_dc_qnd", in.p_dc_qnd);
  in.eta_surv = get(e, path, "eta_surv", in.eta_surv);
  in.eta_equip = get(e, path, "eta_equip", in.eta_equip);
  in.gamma_snr = get(e, path, "gamma_snr", in.gamma_snr);
  in.alpha_fiber = get(e, path, "alpha_fiber", in.alpha_fiber);
  in.nu = get(e, path, "nu", in.nu);
  in.p_commit = get(e, path, "p_commit", in.p_commit);
  in.k = get(e, path, "k", in.k);
  if (e.contains("sweep")) sweep = parse_sweep(e.at("sweep"), path + "/sweep");
}

inline std::string hex(const unsigned char* p, std::size_t n) {
  std::ostringstream os;
  for (std::size_t i = 0; i < n; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(p[i]);
  return os.str();
}

}  // namespace detail

/// BLAKE2b-256 of the canonical serialization of the effective
/// configuration, excluding the worker count.
inline std::string config_hash(const json& effective) {
  protocol::detail::ensure_sodium();
  json h = effective;
  h.erase("workers");
  const std::string s = h.dump();
  unsigned char out[crypto_generichash_BYTES];
  crypto_generichash(out, sizeof out, reinterpret_cast<const unsigned char*>(s.data()), s.size(), nullptr, 0);
  return detail::hex(out, sizeof out);
}

inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  detail::check_keys(j, "", {"experiment", "seed", "trials", "workers", "protocol", "devices", "strategy", "bounds",
                             "estimate", "lemmas", "sweep", "output"});
  c.experiment = detail::get<std::string>(j, "", "experiment", c.experiment);
  static const std::set<std::string> kinds{"simulate", "bounds", "estimate", "verify-lemmas", "sweep"};
  if (!kinds.count(c.experiment)) throw ConfigError("/experiment", "unknown experiment '" + c.experiment + "'");
  c.seed = detail::get(j, "", "seed", c.seed);
  c.trials = detail::get(j, "", "trials", c.trials);
  c.workers = detail::get(j, "", "workers", c.workers);
  if (c.workers == 0) throw ConfigError("/workers", "must be at least 1");
  if (j.contains("protocol")) detail::parse_protocol(j.at("protocol"), c.protocol);
  else c.protocol.validate();
  c.protocol.seed = c.seed;
  if (j.contains("devices")) detail::parse_devices(j.at("devices"), c.device);
  if (j.contains("strategy")) detail::parse_strategy(j.at("strategy"), c.strategy);
  if (j.contains("bounds")) detail::parse_bounds(j.at("bounds"), c.bounds);
  if (c.bounds.eta_p_auto) {
    if (c.device.model != devices::PresenceModel::Qnd)
      throw ConfigError("/bounds/eta_p", "'auto' is only available for the qnd presence model");
    try {
      c.bounds.params.eta_p = devices::qnd_eta_p(c.device);
    } catch (const std::exception& e) {
      throw ConfigError("/bounds/eta_p", e.what());
    }
  }
  try {
    c.bounds.params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("/bounds", e.what());
  }
  if (j.contains("estimate")) detail::parse_estimate(j.at("estimate"), c.estimate, c.estimate_sweep);
  if (j.contains("lemmas")) {
    c.lemmas = j.at("lemmas");
    detail::check_keys(c.lemmas, "/lemmas",
                       {"gentle", "instrument", "paths", "data_processing", "triangle", "edge_removal_samples"});
    for (const auto& [k, v] : c.lemmas.items())
      if (!v.is_number_unsigned() && !v.is_number_integer()) throw ConfigError("/lemmas/" + k, "expected an integer");
  }
  if (j.contains("sweep")) c.sweep = detail::parse_sweep(j.at("sweep"), "/sweep");
  if (c.experiment == "sweep" && c.sweep.parameter.empty()) throw ConfigError("/sweep", "required for a sweep experiment");
  if (j.contains("output")) {
    detail::check_keys(j.at("output"), "/output", {"transcript_trials"});
    c.transcript_trials = detail::get(j.at("output"), "/output", "transcript_trials", c.transcript_trials);
  }
  c.effective = j;
  return c;
}

/// Reads and parses a configuration file, applying command-line overrides.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<unsigned> workers;
};

inline json read_config_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open configuration file '" + path.string() + "'");
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "parse error in '" + path.string() + "' at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& o = {}) {
  json j = read_config_json(path);
  if (!j.is_object()) throw ConfigError("", "configuration must be a JSON object");
  if (o.seed) j["seed"] = *o.seed;
  if (o.trials) j["trials"] = *o.trials;
  if (o.workers) j["workers"] = *o.workers;
  return parse_config(j);
}

//---------------------------------------------------------------------------
// Simulation
//---------------------------------------------------------------------------

inline std::unique_ptr<strategies::Strategy> make_strategy(const ExperimentConfig& c) {
  const auto& s = c.strategy;
  if (s.kind == "honest") return std::make_unique<strategies::HonestProver>(strategies::HonestParams{c.device, s.p_err, s.answer_latency});
  if (s.kind == "basis_guess") return std::make_unique<strategies::BasisGuessAttacker>(s.commit_prob);
  if (s.kind == "mismatch") return std::make_unique<strategies::MismatchAttacker>(s.mismatch);
  return std::make_unique<strategies::AdaptiveMismatchAttacker>(strategies::AdaptiveMismatchAttacker::from_list(s.schedule),
                                                                s.mismatch.policy);
}

inline std::optional<verdict::SecureRegion> make_region(const ExperimentConfig& c) {
  if (!c.bounds.lossy) return std::nullopt;
  return verdict::SecureRegion(c.bounds.curve, verdict::honest_point(c.bounds.params.eta_p, c.bounds.params.p_err));
}

struct TrialResult {
  protocol::Transcript transcript;
  verdict::Decision decision;
};

inline std::vector<TrialResult> run_simulation(const ExperimentConfig& c) {
  const auto region = make_region(c);
  const verdict::SecureRegion* rp = region ? &*region : nullptr;
  return run_trials<TrialResult>(c.trials, c.seed, c.workers, [&](std::size_t i, Rng& rng) {
    auto strategy = make_strategy(c);
    TrialResult r;
    r.transcript = rounds::run_sequential(c.protocol, *strategy, rounds::stop_rule(c.protocol, i < c.transcript_trials), rng);
    r.decision = verdict::decide(r.transcript, c.bounds.params, rp, c.bounds.rate_sigmas);
    return r;
  });
}

inline json rate_json(std::size_t k, std::size_t n) {
  const auto w95 = stats::wilson(k, n);
  const auto w3 = stats::wilson(k, n, 3.0);
  return json{{"count", k}, {"of", n}, {"rate", stats::rate(k, n)}, {"wilson95_lo", w95.lo}, {"wilson95_hi", w95.hi},
              {"wilson3sigma_lo", w3.lo}, {"wilson3sigma_hi", w3.hi}};
}

/// Analytic reference values for the configured run.
inline json analytic_json(const ExperimentConfig& c) {
  const auto& p = c.bounds.params;
  json a;
  const double r = static_cast<double>(c.protocol.target_committed);
  a["p_b"] = p.p_b();
  a["mu"] = p.mu();
  if (c.bounds.lossy) {
    const auto region = *make_region(c);
    const auto hp = verdict::honest_point(p.eta_p, p.p_err);
    const double mu_t = region.expected_score(hp);
    a["mu_tilde"] = mu_t;
    a["chernoff_floor"] = mu_t > 0 ? json(verdict::chernoff_accept_floor(mu_t, p.delta_margin, r * p.eta_p, 2.0)) : json(nullptr);
    const auto az = verdict::attacker_score_ceiling(mu_t, p.delta_margin, r, p.k, p.model);
    a["azuma_ceiling"] = az.value;
    a["azuma_vacuous"] = az.vacuous;
  } else {
    a["chernoff_floor"] = p.mu() > 0 ? json(verdict::chernoff_accept_floor(p.mu(), p.delta_margin, r * p.eta_p)) : json(nullptr);
    const auto az = verdict::attacker_score_ceiling(p.mu(), p.delta_margin, r, p.k, p.model);
    a["azuma_ceiling"] = az.value;
    a["azuma_vacuous"] = az.vacuous;
  }
  if (c.strategy.kind == "mismatch") {
    const auto d = verdict::detection_probability_nonadaptive(c.strategy.mismatch.epsilon, r);
    a["detection_floor"] = d.exact;
    a["detection_floor_loose"] = d.loose;
  } else if (c.strategy.kind == "adaptive_mismatch") {
    std::vector<double> eps(c.strategy.schedule.begin(),
                            c.strategy.schedule.begin() +
                                static_cast<std::ptrdiff_t>(std::min(c.strategy.schedule.size(), c.protocol.target_committed)));
    a["detection_floor"] = verdict::detection_probability_adaptive(eps);
  }
  if (c.device.model == devices::PresenceModel::Qnd) {
    try {
      a["eta_p_closed_form"] = devices::qnd_eta_p(c.device);
      a["p_commit_closed_form"] = devices::qnd_p_commit(c.device);
    } catch (const UndefinedEstimate&) {
    }
  }
  return a;
}

struct SimulationSummary {
  json summary;
  bool inconclusive = false;
  bool invariant_violation = false;
  std::vector<std::string> violations;
};

inline SimulationSummary summarize(const ExperimentConfig& c, const std::vector<TrialResult>& results) {
  using protocol::Verdict;
  SimulationSummary s;
  std::size_t accepted = 0, aborted = 0, inconclusive = 0, rounds_total = 0, committed_total = 0;
  std::array<std::size_t, protocol::kVerdictCount> counts{};
  std::map<std::string, std::size_t> reasons;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (r.decision.accept) ++accepted;
    else ++reasons[r.decision.reason];
    if (r.transcript.aborted) ++aborted;
    if (r.transcript.inconclusive) ++inconclusive;
    rounds_total += r.transcript.rounds;
    committed_total += r.transcript.committed;
    for (std::size_t v = 0; v < counts.size(); ++v) counts[v] += r.transcript.counts[v];
    if (!r.transcript.records.empty() && !r.transcript.consistent())
      s.violations.push_back("transcript " + std::to_string(i) + " counts disagree with its records");
  }
  const std::size_t n = results.size();
  json j;
  j["experiment"] = "simulate";
  j["config_hash"] = config_hash(c.effective);
  j["seed"] = c.seed;
  j["trials"] = n;
  j["strategy"] = c.strategy.kind;
  j["mode"] = c.protocol.mode == protocol::Mode::Commit ? "commit" : "plain";
  j["target_committed"] = c.protocol.target_committed;
  j["accept"] = rate_json(accepted, n);
  j["detected_abort"] = rate_json(aborted, n);
  j["inconclusive"] = inconclusive;
  json rj = json::object();
  for (const auto& [k, v] : reasons) rj[k] = v;
  j["reject_reasons"] = rj;
  json vc = json::object();
  for (std::size_t v = 0; v < counts.size(); ++v) vc[std::string(protocol::to_string(static_cast<Verdict>(v)))] = counts[v];
  j["verdict_counts"] = vc;
  const std::size_t n_c = counts[static_cast<std::size_t>(Verdict::Accept)];
  const std::size_t n_i = counts[static_cast<std::size_t>(Verdict::Incorrect)];
  const std::size_t n_l = counts[static_cast<std::size_t>(Verdict::Loss)];
  j["rounds"] = {{"total", rounds_total},
                 {"committed", committed_total},
                 {"mean_per_trial", n ? static_cast<double>(rounds_total) / static_cast<double>(n) : 0.0},
                 {"commit_rate", stats::rate(committed_total, rounds_total)}};
  j["answers"] = {{"answer_rate", rate_json(n_c + n_i, n_c + n_i + n_l)}, {"correct_given_answered", rate_json(n_c, n_c + n_i)}};
  j["analytic"] = analytic_json(c);

  // Invariant: an honest prover must not fall below its acceptance floor.
  if (c.strategy.kind == "honest" && j["analytic"]["chernoff_floor"].is_number() && n > 0 && inconclusive == 0) {
    const double floor = j["analytic"]["chernoff_floor"].get<double>();
    if (stats::wilson(accepted, n, 3.0).hi < floor)
      s.violations.push_back("honest acceptance below the Chernoff floor");
  }
  j["invariant_violations"] = s.violations;
  s.summary = j;
  s.inconclusive = inconclusive > 0;
  s.invariant_violation = !s.violations.empty();
  return s;
}

//---------------------------------------------------------------------------
// Other experiments
//---------------------------------------------------------------------------

inline json bound_json(const verdict::Bound& b) { return {{"value", b.value}, {"vacuous", b.vacuous}}; }

inline json bounds_report(const ExperimentConfig& c) {
  const auto& p = c.bounds.params;
  json j;
  j["experiment"] = "bounds";
  j["config_hash"] = config_hash(c.effective);
  j["inputs"] = {{"p_attack", p.p_attack}, {"p_err", p.p_err}, {"eta_p", p.eta_p}, {"delta_margin", p.delta_margin},
                 {"k", p.k}, {"model", verdict::to_string(p.model)}};
  j["p_b"] = p.p_b();
  j["mu"] = p.mu();
  const double p_commit = c.device.model == devices::PresenceModel::Qnd ? devices::qnd_p_commit(c.device) : 1.0;
  json budgets = json::object();
  for (auto m : {verdict::Model::S2, verdict::Model::S3}) {
    const auto b = verdict::round_budget(p.k, m, p_commit > 0 ? p_commit : 1.0);
    budgets[verdict::to_string(m)] = {{"committed_target", b.committed_target}, {"alpha", b.alpha},
                                      {"c_tilde", b.c_tilde}, {"c_tilde_vacuous", b.c_tilde_vacuous},
                                      {"expected_total", b.expected_total}, {"p_commit", p_commit}};
  }
  j["budgets"] = budgets;
  const double r = p.model == verdict::Model::S1 ? static_cast<double>(c.protocol.target_committed)
                                                  : verdict::round_budget(p.k, p.model).committed_target;
  j["r"] = r;
  const auto t = verdict::table1_bounds(p, r);
  j["table1"] = {{"s2_additive", t.s2_additive},
                 {"s3_additive", t.s3_additive},
                 {"s3_exponent_factor", t.s3_exponent_factor},
                 {"s3_shift", t.s3_shift},
                 {"honest", {{"p_err_zero", bound_json(t.honest.error_free)}, {"p_err_positive", bound_json(t.honest.with_error)}}},
                 {"S1", {{"p_err_zero", bound_json(t.s1.error_free)}, {"p_err_positive", bound_json(t.s1.with_error)}}},
                 {"S2", {{"p_err_zero", bound_json(t.s2.error_free)}, {"p_err_positive", bound_json(t.s2.with_error)}}},
                 {"S3", {{"p_err_zero", bound_json(t.s3.error_free)}, {"p_err_positive", bound_json(t.s3.with_error)}}}};
  j["azuma_ceiling"] = bound_json(verdict::attacker_score_ceiling(p.mu(), p.delta_margin, r, p.k, p.model));
  if (p.mu() > 0) j["chernoff_floor"] = verdict::chernoff_accept_floor(p.mu(), p.delta_margin, r);
  const double alpha = 1.0 / (16.0 * p.k * p.k);
  json det = json::array();
  for (double rr : {5.0, 20.0}) {
    const auto d = verdict::detection_probability_nonadaptive(alpha, rr / alpha);
    det.push_back({{"r", rr}, {"alpha", alpha}, {"committed_rounds", rr / alpha}, {"exact", d.exact}, {"loose", d.loose}});
  }
  j["detection_floors"] = det;
  j["commit_attack_bound"] = verdict::commit_attack_bound(p.p_attack, alpha, std::min(0.5, 2.0 / p.k));
  if (p.model != verdict::Model::S1)
    j["duration_s"] = estimate::protocol_duration(p.k, p_commit > 0 ? p_commit : 1.0, c.estimate.nu, p.model);
  return j;
}

inline json estimate_row(const estimate::EstimateInputs& in) {
  json r;
  r["eta_meas"] = in.eta_meas();
  try {
    r["eta_p"] = estimate::eta_p_closed_form(in);
  } catch (const UndefinedEstimate&) {
    r["eta_p"] = nullptr;
  }
  r["snr_qnd"] = estimate::snr_qnd(in.gamma_snr, in.eta_det_qnd);
  if (in.gamma_snr * in.p_dc_qnd > 0) {
    const auto L = estimate::fiber_length(in.alpha_fiber, in.gamma_snr, in.p_dc_qnd);
    r["fiber_length_km"] = L.km;
    r["fiber_length_degenerate"] = L.degenerate;
  } else {
    r["fiber_length_km"] = nullptr;
    r["fiber_length_degenerate"] = true;
  }
  r["duration_s2_s"] = estimate::protocol_duration(in.k, in.p_commit, in.nu, verdict::Model::S2);
  r["duration_s3_s"] = estimate::protocol_duration(in.k, in.p_commit, in.nu, verdict::Model::S3);
  return r;
}

inline void set_estimate_field(estimate::EstimateInputs& in, const std::string& name, double v) {
  static const std::map<std::string, double estimate::EstimateInputs::*> fields{
      {"eta_v", &estimate::EstimateInputs::eta_v}, {"eta_det", &estimate::EstimateInputs::eta_det},
      {"eta_det_qnd", &estimate::EstimateInputs::eta_det_qnd}, {"p_dc", &estimate::EstimateInputs::p_dc},
      {"p_dc_qnd", &estimate::EstimateInputs::p_dc_qnd}, {"eta_surv", &estimate::EstimateInputs::eta_surv},
      {"eta_equip", &estimate::EstimateInputs::eta_equip}, {"gamma_snr", &estimate::EstimateInputs::gamma_snr},
      {"alpha_fiber", &estimate::EstimateInputs::alpha_fiber}, {"nu", &estimate::EstimateInputs::nu},
      {"p_commit", &estimate::EstimateInputs::p_commit}, {"k", &estimate::EstimateInputs::k}};
  const auto it = fields.find(name);
  if (it == fields.end()) throw ConfigError("/estimate/sweep/parameter", "unknown parameter '" + name + "'");
  in.*(it->second) = v;
}

inline json lemma_suite_json(const lemmas::SuiteReport& r) {
  return {{"name", r.name}, {"instances", r.instances}, {"violations", r.violations}, {"nontrivial", r.nontrivial},
          {"worst_slack", r.instances ? json(r.worst_slack) : json(nullptr)}, {"passed", r.passed()}};
}

inline json verify_lemmas_report(const ExperimentConfig& c, bool& all_passed) {
  auto count = [&](const char* key, std::size_t fallback) {
    return c.lemmas.contains(key) ? c.lemmas.at(key).get<std::size_t>() : fallback;
  };
  Rng master(c.seed);
  std::vector<lemmas::SuiteReport> reps;
  {
    Rng rng = master.child(0);
    reps.push_back(lemmas::gentle_measurement_suite(count("gentle", 10000), rng));
  }
  {
    Rng rng = master.child(1);
    const auto inst = lemmas::instrument_suite(count("instrument", 1000), rng);
    reps.push_back(inst.reconstruction);
    reps.push_back(inst.channel_tp);
    reps.push_back(inst.dilation);
  }
  {
    Rng rng = master.child(2);
    reps.push_back(lemmas::paths_between_strings_suite(count("paths", 1000), rng));
  }
  {
    Rng rng = master.child(3);
    reps.push_back(lemmas::data_processing_suite(count("data_processing", 1000), rng));
  }
  {
    Rng rng = master.child(4);
    reps.push_back(lemmas::triangle_suite(count("triangle", 1000), rng));
  }
  reps.push_back(lemmas::edge_removal_exhaustive(1));
  {
    Rng rng = master.child(5);
    for (int n : {2, 3})
      for (double ct : {0.125, 0.25, 0.5}) reps.push_back(lemmas::edge_removal_sampled(n, ct, count("edge_removal_samples", 1000), rng));
  }
  json j;
  j["experiment"] = "verify-lemmas";
  j["config_hash"] = config_hash(c.effective);
  j["seed"] = c.seed;
  json suites = json::array();
  all_passed = true;
  for (const auto& r : reps) {
    suites.push_back(lemma_suite_json(r));
    all_passed = all_passed && r.passed();
  }
  j["suites"] = suites;
  j["all_passed"] = all_passed;
  return j;
}

//---------------------------------------------------------------------------
// Entry point
//---------------------------------------------------------------------------

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << s;
  if (!out) throw std::runtime_error("write failed for '" + p.string() + "'");
}

inline void write_json(const std::filesystem::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

struct RunOptions {
  std::filesystem::path out_dir = "out";
  std::ostream* log = nullptr;
};

inline std::string sweep_csv_header() {
  return "parameter,value,trials,accept_rate,accept_lo,accept_hi,detect_rate,detect_lo,detect_hi,detection_floor,"
         "chernoff_floor,azuma_ceiling\n";
}

inline int run_experiment(const ExperimentConfig& c, const RunOptions& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(opt.out_dir);
  write_json(opt.out_dir / "config_effective.json", c.effective);
  auto log = [&](const std::string& s) {
    if (opt.log) *opt.log << s << '\n';
  };

  if (c.experiment == "simulate") {
    const auto results = run_simulation(c);
    const auto s = summarize(c, results);
    write_json(opt.out_dir / "summary.json", s.summary);
    std::ostringstream csv;
    csv << protocol::kTranscriptCsvHeader;
    for (std::size_t i = 0; i < results.size() && i < c.transcript_trials; ++i)
      protocol::write_transcript_csv(csv, i, results[i].transcript);
    write_text(opt.out_dir / "transcripts.csv", csv.str());
    log("accept rate " + std::to_string(s.summary["accept"]["rate"].get<double>()) + " over " + std::to_string(c.trials) +
        " trials");
    for (const auto& v : s.violations) log("invariant violation: " + v);
    if (s.invariant_violation) return kInvariantViolation;
    return s.inconclusive ? kInconclusive : kOk;
  }

  if (c.experiment == "bounds") {
    write_json(opt.out_dir / "bounds.json", bounds_report(c));
    log("bounds written");
    return kOk;
  }

  if (c.experiment == "estimate") {
    json j;
    j["experiment"] = "estimate";
    j["config_hash"] = config_hash(c.effective);
    j["base"] = estimate_row(c.estimate);
    std::ostringstream csv;
    csv << std::setprecision(12)
        << "parameter,value,eta_meas,eta_p,snr_qnd,fiber_length_km,duration_s2_s,duration_s3_s\n";
    auto emit = [&](const std::string& name, double value, const estimate::EstimateInputs& in) {
      const auto r = estimate_row(in);
      auto cell = [](const json& v) { return v.is_null() ? std::string() : v.dump(); };
      csv << name << ',' << value << ',' << cell(r["eta_meas"]) << ',' << cell(r["eta_p"]) << ',' << cell(r["snr_qnd"])
          << ',' << cell(r["fiber_length_km"]) << ',' << cell(r["duration_s2_s"]) << ',' << cell(r["duration_s3_s"])
          << '\n';
    };
    if (c.estimate_sweep.parameter.empty()) {
      emit("base", 0.0, c.estimate);
    } else {
      for (const auto& v : c.estimate_sweep.values) {
        if (!v.is_number()) throw ConfigError("/estimate/sweep/values", "expected numbers");
        auto in = c.estimate;
        set_estimate_field(in, c.estimate_sweep.parameter, v.get<double>());
        emit(c.estimate_sweep.parameter, v.get<double>(), in);
      }
    }
    write_json(opt.out_dir / "estimate.json", j);
    write_text(opt.out_dir / "estimate.csv", csv.str());
    return kOk;
  }

  if (c.experiment == "verify-lemmas") {
    bool ok = false;
    const auto j = verify_lemmas_report(c, ok);
    write_json(opt.out_dir / "lemmas.json", j);
    for (const auto& s : j["suites"])
      log(s["name"].get<std::string>() + ": " + std::to_string(s["instances"].get<std::size_t>()) + " instances, " +
          std::to_string(s["violations"].get<std::size_t>()) + " violations");
    return ok ? kOk : kInvariantViolation;
  }

  // sweep
  std::ostringstream csv;
  csv << std::setprecision(12) << sweep_csv_header();
  json rows = json::array();
  bool inconclusive = false, violation = false;
  for (const auto& v : c.sweep.values) {
    json point = c.effective;
    point["experiment"] = "simulate";
    point.erase("sweep");
    try {
      point[json::json_pointer(c.sweep.parameter)] = v;
    } catch (const json::exception& e) {
      throw ConfigError("/sweep/parameter", e.what());
    }
    auto pc = parse_config(point);
    pc.transcript_trials = 0;
    const auto s = summarize(pc, run_simulation(pc));
    inconclusive = inconclusive || s.inconclusive;
    violation = violation || s.invariant_violation;
    const auto& sj = s.summary;
    auto num = [](const json& x) { return x.is_number() ? x.dump() : std::string(); };
    const json& an = sj["analytic"];
    csv << c.sweep.parameter << ',' << v.dump() << ',' << pc.trials << ',' << sj["accept"]["rate"].dump() << ','
        << sj["accept"]["wilson95_lo"].dump() << ',' << sj["accept"]["wilson95_hi"].dump() << ','
        << sj["detected_abort"]["rate"].dump() << ',' << sj["detected_abort"]["wilson95_lo"].dump() << ','
        << sj["detected_abort"]["wilson95_hi"].dump() << ','
        << (an.contains("detection_floor") ? num(an["detection_floor"]) : std::string()) << ','
        << num(an["chernoff_floor"]) << ',' << num(an["azuma_ceiling"]) << '\n';
    rows.push_back({{"value", v}, {"summary", sj}});
  }
  json j;
  j["experiment"] = "sweep";
  j["config_hash"] = config_hash(c.effective);
  j["parameter"] = c.sweep.parameter;
  j["points"] = rows;
  write_json(opt.out_dir / "sweep.json", j);
  write_text(opt.out_dir / "sweep.csv", csv.str());
  if (violation) return kInvariantViolation;
  return inconclusive ? kInconclusive : kOk;
}

/// Loads the configuration at `path`, checks that it describes `command`,
/// runs it and maps failures to exit codes.
inline int execute(const std::string& command, const std::filesystem::path& path, const Overrides& o,
                   const RunOptions& opt, std::ostream& err) {
  try {
    auto c = load_config(path, o);
    if (c.experiment != command) {
      // The subcommand wins; the file may describe a different default.
      json j = c.effective;
      j["experiment"] = command;
      c = parse_config(j);
    }
    return run_experiment(c, opt);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace cqpv::experiment

#include <gtest/gtest.h>

#include <cmath>

#include "cqpv/devices.hpp"
#include "cqpv/estimate.hpp"

using namespace cqpv;
using namespace cqpv::devices;

namespace {

DeviceParams qnd(double eta_v, double eta_det, double p_dc, double eta_det_qnd, double p_dc_qnd) {
  DeviceParams d;
  d.eta_v = eta_v;
  d.eta_det = eta_det;
  d.p_dc = p_dc;
  d.eta_det_qnd = eta_det_qnd;
  d.p_dc_qnd = p_dc_qnd;
  return d;
}

}  // namespace

TEST(Detector, LossAndDarkCounts) {
  Rng rng(1);
  int clicks = 0, dark = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    clicks += detector_click(true, 0.7, 0.01, rng);
    dark += detector_click(false, 0.7, 0.01, rng);
  }
  EXPECT_NEAR(clicks / double(n), 0.7, 4 * std::sqrt(0.21 / n));
  EXPECT_NEAR(dark / double(n), 0.01, 4 * std::sqrt(0.0099 / n));
  EXPECT_THROW(sample_loss(1.5, rng), std::invalid_argument);
  EXPECT_FALSE(sample_loss(0.0, rng));
  EXPECT_TRUE(sample_loss(1.0, rng));
}

TEST(Bsm, ClassifyPatterns) {
  EXPECT_EQ(bsm_classify({true, false, true, false}), BsmOutcome::PsiMinus);
  EXPECT_EQ(bsm_classify({false, true, false, true}), BsmOutcome::PsiMinus);
  EXPECT_EQ(bsm_classify({true, true, false, false}), BsmOutcome::PsiPlus);
  EXPECT_EQ(bsm_classify({false, false, true, true}), BsmOutcome::PsiPlus);
  EXPECT_EQ(bsm_classify({true, false, false, true}), BsmOutcome::Inconclusive);
  EXPECT_EQ(bsm_classify({true, false, false, false}), BsmOutcome::Inconclusive);
  EXPECT_EQ(bsm_classify({true, true, true, false}), BsmOutcome::Inconclusive);
  EXPECT_EQ(bsm_classify({false, false, false, false}), BsmOutcome::Inconclusive);
}

TEST(Bsm, PerfectDetectorsHalfCeiling) {
  EXPECT_DOUBLE_EQ(bsm_conclusive_probability(1.0, 0.0), 0.5);
  // Independent oracle without dark counts: Psi+- (prob 1/2) needs both photons.
  for (double eta : {0.3, 0.8, 0.95}) EXPECT_NEAR(bsm_conclusive_probability(eta, 0.0), 0.5 * eta * eta, 1e-15);
}

TEST(Bsm, ExactEnumerationMatchesSampling) {
  Rng rng(2);
  for (auto [eta, pdc] : {std::pair{0.9, 0.0}, {0.7, 0.05}, {0.5, 0.2}}) {
    DeviceParams d;
    d.model = PresenceModel::PartialBsm;
    d.eta_det = eta;
    d.p_dc = pdc;
    const int n = 200000;
    int commits = 0;
    for (int i = 0; i < n; ++i) commits += detail::bsm_pipeline(d, true, rng).commit;
    const double p = bsm_conclusive_probability(eta, pdc);
    EXPECT_NEAR(commits / double(n), p, 4 * std::sqrt(p * (1 - p) / n)) << eta << " " << pdc;
  }
}

TEST(Bsm, CorrectionLabelMatchesActualWithoutDarkCounts) {
  Rng rng(3);
  DeviceParams d;
  d.model = PresenceModel::PartialBsm;
  int heralds = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto r = detail::bsm_pipeline(d, true, rng);
    if (!r.commit) continue;
    ++heralds;
    EXPECT_EQ(r.correction, r.actual);
    EXPECT_TRUE(r.clicked && r.signal);
  }
  EXPECT_NEAR(heralds / 20000.0, 0.5, 0.02);
  // No input, no dark counts: a single photon never heralds.
  for (int i = 0; i < 1000; ++i) EXPECT_FALSE(detail::bsm_pipeline(d, false, rng).commit);
}

TEST(Qnd, CommitProbabilityAndEtaP) {
  Rng rng(4);
  const auto d = qnd(0.4, 0.8, 0.02, 0.9, 0.05);
  const auto e = empirical_eta_p(d, 400000, rng);
  EXPECT_NEAR(e.p_commit, qnd_p_commit(d), 4 * e.se_p_commit);
  EXPECT_NEAR(e.eta_p, qnd_eta_p(d), 4 * e.se_eta_p);
}

TEST(Qnd, ValidationOfAbsorbedDarkCounts) {
  auto d = qnd(0.9, 1.0, 0.0, 1.0, 0.2);  // 1 - eta_v eta_qnd = 0.1 < 0.2
  EXPECT_THROW(d.validate(), std::invalid_argument);
  d.p_dc_qnd = 0.1;
  EXPECT_NO_THROW(d.validate());
  d.eta_det = 1.5;
  EXPECT_THROW(d.validate(), std::invalid_argument);
}

TEST(EtaP, EmpiricalMatchesClosedFormOnGrid) {
  Rng rng(5);
  int checked = 0;
  for (double eta_v : {0.05, 0.2, 0.5, 0.8, 1.0}) {
    for (double eta_det : {0.3, 0.5, 0.7, 0.85, 0.95}) {
      DeviceParams d = qnd(eta_v, eta_det, 0.01, 0.8, 0.01);
      d.eta_surv = 0.9;
      d.eta_equip = 0.95;
      const auto e = empirical_eta_p(d, 60000, rng);
      const double cf = estimate::eta_p_closed_form(eta_v, d.eta_meas(), d.eta_det_qnd, d.p_dc, d.p_dc_qnd);
      EXPECT_NEAR(e.eta_p, cf, 3.5 * e.se_eta_p + 1e-12) << eta_v << " " << eta_det;
      ++checked;
    }
  }
  EXPECT_EQ(checked, 25);
}

TEST(EtaP, LimitsAreExact) {
  EXPECT_DOUBLE_EQ(qnd_eta_p(qnd(0.0, 0.9, 0.03, 0.9, 0.01)), 0.03);
  auto d = qnd(0.5, 0.9, 0.0, 0.8, 0.0);
  d.eta_surv = 0.5;
  EXPECT_DOUBLE_EQ(qnd_eta_p(d), d.eta_meas());
  EXPECT_THROW(qnd_eta_p(qnd(0.0, 0.9, 0.0, 0.9, 0.0)), UndefinedEstimate);
  Rng rng(6);
  EXPECT_THROW(empirical_eta_p(qnd(0.0, 0.9, 0.0, 0.9, 0.0), 100, rng), UndefinedEstimate);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cqpv/lemmas.hpp"

using namespace cqpv;
using namespace cqpv::qcore;

namespace {

Vector ket(std::initializer_list<cplx> amps) {
  Vector v(static_cast<Eigen::Index>(amps.size()));
  Eigen::Index i = 0;
  for (auto a : amps) v(i++) = a;
  return v;
}

const double kS = 1.0 / std::sqrt(2.0);

}  // namespace

TEST(DensityMatrix, RejectsInvalidMatrices) {
  Matrix m = Matrix::Identity(2, 2);
  EXPECT_THROW(DensityMatrix{m}, std::invalid_argument);  // trace 2
  Matrix nh(2, 2);
  nh << 0.5, 0.1, 0.3, 0.5;
  EXPECT_THROW(DensityMatrix{nh}, std::invalid_argument);
  Matrix neg(2, 2);
  neg << 1.5, 0, 0, -0.5;
  EXPECT_THROW(DensityMatrix{neg}, std::invalid_argument);
  EXPECT_NO_THROW(DensityMatrix::maximally_mixed(4));
}

TEST(TraceNorm, OrthogonalAndIdenticalStates) {
  const auto zero = DensityMatrix::pure(ket({1, 0}));
  const auto one = DensityMatrix::pure(ket({0, 1}));
  EXPECT_NEAR(trace_norm_distance(zero, zero), 0.0, 1e-14);
  EXPECT_NEAR(trace_norm_distance(zero, one), 2.0, 1e-14);
}

TEST(TraceNorm, PureStateFormula) {
  const auto plus = DensityMatrix::pure(ket({kS, kS}));
  const auto zero = DensityMatrix::pure(ket({1, 0}));
  // 2 sqrt(1 - |<+|0>|^2) = 2 sqrt(1/2)
  EXPECT_NEAR(trace_norm_distance(plus, zero), std::sqrt(2.0), 1e-12);
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.below(7));
    Vector a = ginibre(d, 1, rng), b = ginibre(d, 1, rng);
    a.normalize();
    b.normalize();
    const double overlap = std::norm(a.dot(b));
    EXPECT_NEAR(trace_norm_distance(DensityMatrix::pure(a), DensityMatrix::pure(b)),
                2.0 * std::sqrt(std::max(0.0, 1.0 - overlap)), 1e-10);
  }
}

TEST(TraceNorm, DimensionMismatch) {
  EXPECT_THROW(trace_norm_distance(DensityMatrix::maximally_mixed(2), DensityMatrix::maximally_mixed(4)),
               DimensionError);
}

TEST(Gentle, IdentityMeasurement) {
  Rng rng(1);
  const auto rho = random_density(3, rng);
  const auto r = gentle_post_state(rho, MeasurementOperator::identity(3));
  EXPECT_NEAR(r.prob, 1.0, 1e-12);
  EXPECT_NEAR(trace_norm_distance(rho, r.state), 0.0, 1e-10);
}

TEST(Gentle, SaturationCase) {
  const auto plus = DensityMatrix::pure(ket({kS, kS}));
  const auto r = gentle_post_state(plus, MeasurementOperator::projector(ket({1, 0})));
  EXPECT_NEAR(r.prob, 0.5, 1e-14);
  EXPECT_NEAR(r.state.matrix()(0, 0).real(), 1.0, 1e-12);
  const double eps = 1.0 - r.prob;
  EXPECT_NEAR(trace_norm_distance(plus, r.state), 2.0 * std::sqrt(eps), 1e-10);
}

TEST(Gentle, DegenerateConditioning) {
  const auto one = DensityMatrix::pure(ket({0, 1}));
  EXPECT_THROW(gentle_post_state(one, MeasurementOperator::projector(ket({1, 0}))), DegenerateConditioning);
}

TEST(Gentle, RandomizedSweep) {
  Rng rng(2024);
  const auto rep = lemmas::gentle_measurement_suite(2000, rng);
  EXPECT_GT(rep.instances, 1900u);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_GT(rep.nontrivial, rep.instances / 2);
}

TEST(Instrument, ScalarLossMap) {
  const double eta = 0.3;
  QuantumInstrument inst({{std::sqrt(eta) * Matrix::Identity(2, 2)}, {std::sqrt(1 - eta) * Matrix::Identity(2, 2)}});
  const auto dec = decompose_instrument(inst, 0);
  EXPECT_TRUE(dec.effect.matrix().isApprox(eta * Matrix::Identity(2, 2), 1e-12));
  Rng rng(3);
  const auto rho = random_density(2, rng);
  const Matrix sm = psd_sqrt(dec.effect.matrix());
  EXPECT_LT((dec.channel.apply(sm * rho.matrix() * sm) - eta * rho.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(trace_preservation_defect(dec.channel.kraus()), 1e-12);
}

TEST(Instrument, ProjectiveInstrument) {
  const Matrix p0 = ket({1, 0}) * ket({1, 0}).adjoint();
  const Matrix p1 = ket({0, 1}) * ket({0, 1}).adjoint();
  QuantumInstrument inst({{p0}, {p1}});
  Rng rng(4);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto dec = decompose_instrument(inst, i);
    EXPECT_TRUE(dec.effect.matrix().isApprox(i == 0 ? p0 : p1, 1e-12));
    const Matrix sup = i == 0 ? p0 : p1;
    const auto rho = random_density(2, rng);
    const Matrix on_support = sup * rho.matrix() * sup;
    EXPECT_LT((dec.channel.apply(on_support) - on_support).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Instrument, RandomizedSweep) {
  Rng rng(77);
  const auto rep = lemmas::instrument_suite(200, rng);
  EXPECT_TRUE(rep.passed()) << rep.reconstruction.violations << " " << rep.channel_tp.violations << " "
                            << rep.dilation.violations;
}

TEST(Instrument, RejectsNonTracePreserving) {
  EXPECT_THROW(QuantumInstrument({{Matrix::Identity(2, 2)}, {Matrix::Identity(2, 2)}}), std::invalid_argument);
}

TEST(Stinespring, IdentityChannel) {
  const auto dil = stinespring_dilate(KrausChannel::identity(2));
  Rng rng(5);
  const auto rho = random_density(2, rng);
  EXPECT_LT((apply_dilation(dil, rho.matrix()) - rho.matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Stinespring, DepolarizingRecovery) {
  const auto ch = KrausChannel::depolarizing(0.37);
  const auto dil = stinespring_dilate(ch);
  EXPECT_EQ(dil.env_dim, 4);
  const Matrix u = dil.unitary;
  EXPECT_LT((u.adjoint() * u - Matrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff(), 1e-12);
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const auto rho = random_density(2, rng);
    // Oracle: depolarizing acts as (1-p) rho + p I/2.
    const Matrix expected = 0.63 * rho.matrix() + 0.37 * Matrix::Identity(2, 2) / 2.0;
    EXPECT_LT((apply_dilation(dil, rho.matrix()) - expected).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Stinespring, RejectsNonTracePreserving) {
  EXPECT_THROW(KrausChannel({0.5 * Matrix::Identity(2, 2)}), std::invalid_argument);
}

TEST(Bell, PhiPlusExact) {
  const Vector v = bell_vector(Bell::PhiPlus);
  EXPECT_DOUBLE_EQ(v(0).real(), kS);
  EXPECT_DOUBLE_EQ(v(3).real(), kS);
  EXPECT_EQ(v(1), cplx(0));
  EXPECT_NEAR(v.norm(), 1.0, 1e-15);
}

TEST(MeasureQubit, SameBasisCorrelation) {
  Rng rng(8);
  const auto phi = bell_state(Bell::PhiPlus);
  for (int basis = 0; basis < 2; ++basis) {
    for (int i = 0; i < 200; ++i) {
      const auto a = measure_qubit_in_basis(phi, basis, 0, 2, rng);
      const auto b = measure_qubit_in_basis(a.post_state, basis, 1, 2, rng);
      EXPECT_EQ(a.outcome, b.outcome);
    }
  }
}

TEST(MeasureQubit, AgreementIsCosSquared) {
  Rng rng(9);
  const auto phi = bell_state(Bell::PhiPlus);
  const int m = 3;
  const double dtheta = basis_angle(1, m);
  const double p = std::pow(std::cos(dtheta / 2), 2);
  const int n = 100000;
  int agree = 0;
  for (int i = 0; i < n; ++i) {
    const auto a = measure_qubit_in_basis(phi, 0, 0, m, rng);
    agree += a.outcome == measure_qubit_in_basis(a.post_state, 1, 1, m, rng).outcome;
  }
  EXPECT_NEAR(static_cast<double>(agree) / n, p, 3 * std::sqrt(p * (1 - p) / n));
}

TEST(MeasureQubit, InvalidBasis) {
  Rng rng(10);
  EXPECT_THROW(measure_qubit_in_basis(bell_state(Bell::PhiPlus), 2, 0, 2, rng), std::out_of_range);
}

TEST(Lemmas, PathsBetweenStrings) {
  Rng rng(12);
  const auto rep = lemmas::paths_between_strings_suite(300, rng);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_GT(rep.nontrivial, 0u);
}

TEST(Lemmas, DataProcessingAndTriangle) {
  Rng rng(13);
  EXPECT_TRUE(lemmas::data_processing_suite(300, rng).passed());
  EXPECT_TRUE(lemmas::triangle_suite(300, rng).passed());
}

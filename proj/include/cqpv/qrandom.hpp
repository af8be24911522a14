#pragma once

// Random quantum objects for randomized verification: Haar unitaries,
// Ginibre-distributed states, POVM elements with uniform spectra, and
// instruments/channels obtained by normalizing random Kraus stacks.

#include <cstddef>
#include <vector>

#include "cqpv/qcore.hpp"

namespace cqpv::qcore {

inline Matrix ginibre(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix g(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = cplx(rng.normal(), rng.normal());
  return g;
}

/// Haar-random unitary (QR of a Ginibre matrix with phase fix).
inline Matrix random_unitary(Eigen::Index dim, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(ginibre(dim, dim, rng));
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < dim; ++i) {
    const cplx d = r(i, i);
    q.col(i) *= std::abs(d) > 0 ? d / std::abs(d) : cplx(1.0);
  }
  return q;
}

/// Random state G G^dag / tr with G a dim x rank Ginibre matrix.
inline DensityMatrix random_density(Eigen::Index dim, Rng& rng, Eigen::Index rank = 0) {
  if (rank <= 0) rank = dim;
  const Matrix g = ginibre(dim, rank, rng);
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(rho);
}

inline DensityMatrix random_pure(Eigen::Index dim, Rng& rng) { return random_density(dim, rng, 1); }

/// U diag(lambda) U^dag with lambda_i uniform in [lo, hi].
inline MeasurementOperator random_effect(Eigen::Index dim, Rng& rng, double lo = 0.0, double hi = 1.0) {
  const Matrix u = random_unitary(dim, rng);
  Eigen::VectorXd vals(dim);
  for (Eigen::Index i = 0; i < dim; ++i) vals(i) = lo + (hi - lo) * rng.uniform();
  return MeasurementOperator(u * vals.cast<cplx>().asDiagonal() * u.adjoint());
}

/// Random Kraus stack K_j <- K_j S^{-1/2}, S = sum K^dag K, so that the
/// whole collection is trace preserving.
inline std::vector<Matrix> random_kraus_stack(Eigen::Index dim, std::size_t count, Rng& rng) {
  std::vector<Matrix> ks;
  ks.reserve(count);
  for (std::size_t j = 0; j < count; ++j) ks.push_back(ginibre(dim, dim, rng));
  const Matrix inv_sqrt = hermitian_function(kraus_gram(ks), [](double v) { return 1.0 / std::sqrt(v); });
  for (auto& k : ks) k = k * inv_sqrt;
  return ks;
}

inline KrausChannel random_channel(Eigen::Index dim, std::size_t kraus_count, Rng& rng) {
  return KrausChannel(random_kraus_stack(dim, kraus_count, rng));
}

/// Instrument with `outcomes` outcomes, each carrying `kraus_per_outcome`
/// Kraus operators.
inline QuantumInstrument random_instrument(Eigen::Index dim, std::size_t outcomes, std::size_t kraus_per_outcome,
                                           Rng& rng) {
  auto all = random_kraus_stack(dim, outcomes * kraus_per_outcome, rng);
  std::vector<std::vector<Matrix>> sets(outcomes);
  for (std::size_t i = 0; i < all.size(); ++i) sets[i / kraus_per_outcome].push_back(std::move(all[i]));
  return QuantumInstrument(std::move(sets));
}

}  // namespace cqpv::qcore

#pragma once

// Exact finite-dimensional quantum objects: density matrices, two-outcome
// measurement elements, instruments in Kraus form, channels, and the
// Stinespring dilation. Dimensions are small (at most 16), so everything is
// dense and eigen-decomposition based.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "cqpv/error.hpp"
#include "cqpv/rng.hpp"

namespace cqpv::qcore {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr std::size_t kMaxDim = 16;
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kPsdTol = 1e-10;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kEigenClamp = 1e-12;
inline constexpr double kMinConditioningProb = 1e-14;

namespace detail {

inline bool is_hermitian(const Matrix& m, double tol = kHermitianTol) {
  return m.rows() == m.cols() && (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline Eigen::SelfAdjointEigenSolver<Matrix> eig(const Matrix& h) {
  // Symmetrize first so round-off in the input never leaks into the solver.
  Matrix sym = 0.5 * (h + h.adjoint());
  return Eigen::SelfAdjointEigenSolver<Matrix>(sym);
}

inline void check_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw DimensionError(std::string(what) + ": matrix must be square and non-empty");
  if (static_cast<std::size_t>(m.rows()) > kMaxDim)
    throw DimensionError(std::string(what) + ": dimension exceeds " + std::to_string(kMaxDim));
}

}  // namespace detail

/// f(H) for Hermitian H via eigendecomposition.
template <class F>
Matrix hermitian_function(const Matrix& h, F&& f) {
  auto es = detail::eig(h);
  Eigen::VectorXd vals = es.eigenvalues();
  for (Eigen::Index i = 0; i < vals.size(); ++i) vals(i) = f(vals(i));
  return es.eigenvectors() * vals.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

/// Square root of a PSD matrix; negative round-off eigenvalues clamp to zero.
inline Matrix psd_sqrt(const Matrix& m) {
  return hermitian_function(m, [](double v) { return v > 0.0 ? std::sqrt(v) : 0.0; });
}

/// Moore-Penrose pseudo-inverse of a Hermitian matrix. Eigenvalues of
/// magnitude below `clamp` are treated as zero.
inline Matrix hermitian_pinv(const Matrix& h, double clamp = kEigenClamp) {
  return hermitian_function(h, [clamp](double v) { return std::abs(v) < clamp ? 0.0 : 1.0 / v; });
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Tr_B of an operator on A (x) B with dim(B) = `dim_b`.
inline Matrix partial_trace_second(const Matrix& m, Eigen::Index dim_b) {
  if (dim_b <= 0 || m.rows() % dim_b != 0)
    throw DimensionError("partial_trace_second: dimension does not factor");
  const Eigen::Index dim_a = m.rows() / dim_b;
  Matrix out = Matrix::Zero(dim_a, dim_a);
  for (Eigen::Index i = 0; i < dim_a; ++i)
    for (Eigen::Index j = 0; j < dim_a; ++j)
      for (Eigen::Index k = 0; k < dim_b; ++k) out(i, j) += m(i * dim_b + k, j * dim_b + k);
  return out;
}

//---------------------------------------------------------------------------
// DensityMatrix
//---------------------------------------------------------------------------

class DensityMatrix {
 public:
  /// Validates Hermiticity, positivity and (unless `allow_subnormalized`)
  /// unit trace.
  explicit DensityMatrix(Matrix entries, bool allow_subnormalized = false)
      : rho_(std::move(entries)), subnormalized_(allow_subnormalized) {
    detail::check_square(rho_, "DensityMatrix");
    if (!detail::is_hermitian(rho_, kHermitianTol * std::max<double>(1.0, rho_.cwiseAbs().maxCoeff())))
      throw std::invalid_argument("DensityMatrix: not Hermitian");
    rho_ = 0.5 * (rho_ + rho_.adjoint()).eval();
    const double min_eig = detail::eig(rho_).eigenvalues().minCoeff();
    if (min_eig < -kPsdTol) throw std::invalid_argument("DensityMatrix: not positive semidefinite");
    const double tr = rho_.trace().real();
    if (allow_subnormalized) {
      if (tr > 1.0 + kTraceTol) throw std::invalid_argument("DensityMatrix: trace exceeds 1");
    } else if (std::abs(tr - 1.0) > kTraceTol) {
      throw std::invalid_argument("DensityMatrix: trace is not 1");
    }
  }

  static DensityMatrix pure(const Vector& psi) {
    const double n = psi.norm();
    if (n == 0.0) throw std::invalid_argument("DensityMatrix::pure: zero vector");
    Vector v = psi / n;
    return DensityMatrix(v * v.adjoint());
  }

  static DensityMatrix maximally_mixed(std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    return DensityMatrix(Matrix::Identity(d, d) / static_cast<double>(dim));
  }

  Eigen::Index dim() const noexcept { return rho_.rows(); }
  const Matrix& matrix() const noexcept { return rho_; }
  bool subnormalized() const noexcept { return subnormalized_; }
  double trace() const { return rho_.trace().real(); }

 private:
  Matrix rho_;
  bool subnormalized_ = false;
};

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  return DensityMatrix(kron(a.matrix(), b.matrix()));
}

//---------------------------------------------------------------------------
// MeasurementOperator: a POVM element 0 <= M <= 1
//---------------------------------------------------------------------------

class MeasurementOperator {
 public:
  explicit MeasurementOperator(Matrix entries) : m_(std::move(entries)) {
    detail::check_square(m_, "MeasurementOperator");
    if (!detail::is_hermitian(m_, 1e-10)) throw std::invalid_argument("MeasurementOperator: not Hermitian");
    m_ = 0.5 * (m_ + m_.adjoint()).eval();
    const auto vals = detail::eig(m_).eigenvalues();
    if (vals.minCoeff() < -kPsdTol || vals.maxCoeff() > 1.0 + kPsdTol)
      throw std::invalid_argument("MeasurementOperator: eigenvalues outside [0,1]");
  }

  static MeasurementOperator identity(std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    return MeasurementOperator(Matrix::Identity(d, d));
  }

  static MeasurementOperator projector(const Vector& v) {
    Vector u = v / v.norm();
    return MeasurementOperator(u * u.adjoint());
  }

  Eigen::Index dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }

  /// The complementary element 1 - M.
  MeasurementOperator complement() const {
    return MeasurementOperator(Matrix::Identity(dim(), dim()) - m_);
  }

 private:
  Matrix m_;
};

//---------------------------------------------------------------------------
// KrausChannel
//---------------------------------------------------------------------------

inline Matrix kraus_gram(const std::vector<Matrix>& kraus) {
  if (kraus.empty()) throw std::invalid_argument("empty Kraus list");
  Matrix s = Matrix::Zero(kraus.front().cols(), kraus.front().cols());
  for (const auto& k : kraus) {
    if (k.cols() != s.cols()) throw DimensionError("Kraus operators have different input dimension");
    s += k.adjoint() * k;
  }
  return s;
}

/// Largest entrywise deviation of sum_j K_j^dag K_j from the identity.
inline double trace_preservation_defect(const std::vector<Matrix>& kraus) {
  Matrix s = kraus_gram(kraus);
  return (s - Matrix::Identity(s.rows(), s.cols())).cwiseAbs().maxCoeff();
}

class KrausChannel {
 public:
  explicit KrausChannel(std::vector<Matrix> kraus) : kraus_(std::move(kraus)) {
    if (trace_preservation_defect(kraus_) > kTraceTol)
      throw std::invalid_argument("KrausChannel: not trace preserving");
    const auto out = kraus_.front().rows();
    for (const auto& k : kraus_)
      if (k.rows() != out) throw DimensionError("KrausChannel: inconsistent output dimension");
  }

  static KrausChannel identity(std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    return KrausChannel({Matrix::Identity(d, d)});
  }

  /// rho -> (1-p) rho + p 1/d on a qubit.
  static KrausChannel depolarizing(double p) {
    Matrix x(2, 2), y(2, 2), z(2, 2);
    x << 0, 1, 1, 0;
    y << 0, cplx(0, -1), cplx(0, 1), 0;
    z << 1, 0, 0, -1;
    const double a = std::sqrt(1.0 - 3.0 * p / 4.0), b = std::sqrt(p / 4.0);
    return KrausChannel({a * Matrix::Identity(2, 2), b * x, b * y, b * z});
  }

  Eigen::Index input_dim() const noexcept { return kraus_.front().cols(); }
  Eigen::Index output_dim() const noexcept { return kraus_.front().rows(); }
  const std::vector<Matrix>& kraus() const noexcept { return kraus_; }

  /// Applies the map to any operator (states, sub-normalized states, or
  /// differences of states).
  Matrix apply(const Matrix& rho) const {
    if (rho.rows() != input_dim()) throw DimensionError("KrausChannel::apply: dimension mismatch");
    Matrix out = Matrix::Zero(output_dim(), output_dim());
    for (const auto& k : kraus_) out += k * rho * k.adjoint();
    return out;
  }

  DensityMatrix apply(const DensityMatrix& rho) const { return DensityMatrix(apply(rho.matrix())); }

 private:
  std::vector<Matrix> kraus_;
};

//---------------------------------------------------------------------------
// QuantumInstrument
//---------------------------------------------------------------------------

/// An instrument {I_i}: outcome i acts as rho -> sum_j K_ij rho K_ij^dag.
/// The sum over all outcomes is trace preserving.
class QuantumInstrument {
 public:
  explicit QuantumInstrument(std::vector<std::vector<Matrix>> kraus_sets)
      : sets_(std::move(kraus_sets)) {
    if (sets_.empty()) throw std::invalid_argument("QuantumInstrument: no outcomes");
    std::vector<Matrix> all;
    for (const auto& s : sets_) {
      if (s.empty()) throw std::invalid_argument("QuantumInstrument: outcome without Kraus operators");
      all.insert(all.end(), s.begin(), s.end());
    }
    if (trace_preservation_defect(all) > kTraceTol)
      throw std::invalid_argument("QuantumInstrument: outcomes do not sum to a trace-preserving map");
  }

  std::size_t outcomes() const noexcept { return sets_.size(); }
  Eigen::Index input_dim() const noexcept { return sets_.front().front().cols(); }
  const std::vector<Matrix>& kraus(std::size_t outcome) const { return sets_.at(outcome); }

  /// Unnormalized post-measurement operator I_i(rho).
  Matrix apply(std::size_t outcome, const Matrix& rho) const {
    const auto& ks = kraus(outcome);
    Matrix out = Matrix::Zero(ks.front().rows(), ks.front().rows());
    for (const auto& k : ks) out += k * rho * k.adjoint();
    return out;
  }

 private:
  std::vector<std::vector<Matrix>> sets_;
};

//---------------------------------------------------------------------------
// Bell states
//---------------------------------------------------------------------------

enum class Bell { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

/// Two-qubit Bell vector in the basis |00>,|01>,|10>,|11>.
inline Vector bell_vector(Bell which) {
  const double s = 1.0 / std::numbers::sqrt2;
  Vector v = Vector::Zero(4);
  switch (which) {
    case Bell::PhiPlus: v(0) = s; v(3) = s; break;
    case Bell::PhiMinus: v(0) = s; v(3) = -s; break;
    case Bell::PsiPlus: v(1) = s; v(2) = s; break;
    case Bell::PsiMinus: v(1) = s; v(2) = -s; break;
  }
  return v;
}

inline DensityMatrix bell_state(Bell which) { return DensityMatrix::pure(bell_vector(which)); }

//---------------------------------------------------------------------------
// Operations
//---------------------------------------------------------------------------

/// ||rho - sigma||_1, the sum of singular values of the difference.
inline double trace_norm(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().sum();
}

inline double trace_norm_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw DimensionError("trace_norm_distance: dimension mismatch");
  return trace_norm(rho.matrix() - sigma.matrix());
}

struct GentleResult {
  DensityMatrix state;
  double prob;
};

/// Post-measurement state sqrt(M) rho sqrt(M) / tr(M rho) for outcome M.
inline GentleResult gentle_post_state(const DensityMatrix& rho, const MeasurementOperator& m) {
  if (rho.dim() != m.dim()) throw DimensionError("gentle_post_state: dimension mismatch");
  const double p = (m.matrix() * rho.matrix()).trace().real();
  if (p < kMinConditioningProb)
    throw DegenerateConditioning("gentle_post_state: tr(M rho) is numerically zero");
  const Matrix s = psd_sqrt(m.matrix());
  Matrix post = s * rho.matrix() * s / p;
  post = 0.5 * (post + post.adjoint()).eval();
  return {DensityMatrix(post), p};
}

struct InstrumentDecomposition {
  MeasurementOperator effect;  // M = sum_j K_j^dag K_j
  KrausChannel channel;        // E with I(rho) = E(sqrt(M) rho sqrt(M))
};

/// Splits one outcome of an instrument into its POVM element and a
/// trace-preserving channel acting on the gently measured state.
inline InstrumentDecomposition decompose_instrument(const QuantumInstrument& inst, std::size_t outcome) {
  const auto& ks = inst.kraus(outcome);
  const Matrix m = kraus_gram(ks);
  const Matrix sqrt_m = psd_sqrt(m);
  const Matrix sqrt_m_pinv = hermitian_pinv(sqrt_m);
  const Matrix support = sqrt_m * sqrt_m_pinv;
  const Eigen::Index d = m.rows();

  std::vector<Matrix> e;
  e.reserve(ks.size() + 1);
  for (const auto& k : ks) e.push_back(k * sqrt_m_pinv);
  // Completion term 1 - P acts on the kernel of M. When the outcome maps
  // into a larger space it is embedded into the leading output dimensions.
  const Eigen::Index out = ks.front().rows();
  if (out < d) throw DimensionError("decompose_instrument: output dimension smaller than input");
  Matrix completion = Matrix::Zero(out, d);
  completion.topRows(d) = Matrix::Identity(d, d) - support;
  e.push_back(std::move(completion));
  return {MeasurementOperator(m), KrausChannel(std::move(e))};
}

struct Dilation {
  Matrix unitary;         // acts on system (x) environment
  Eigen::Index env_dim;
};

/// Stinespring dilation: V|psi> = sum_j K_j|psi> (x) |j>, completed to a
/// unitary by Gram-Schmidt over the remaining standard basis vectors.
inline Dilation stinespring_dilate(const KrausChannel& e) {
  const auto& ks = e.kraus();
  const Eigen::Index d = e.input_dim();
  if (e.output_dim() != d) throw DimensionError("stinespring_dilate: channel must map a space to itself");
  const auto r = static_cast<Eigen::Index>(ks.size());
  const Eigen::Index n = d * r;

  Matrix u = Matrix::Zero(n, n);
  std::vector<bool> filled(static_cast<std::size_t>(n), false);
  // Column (i, env=0) is V e_i.
  for (Eigen::Index i = 0; i < d; ++i) {
    Vector col = Vector::Zero(n);
    for (Eigen::Index j = 0; j < r; ++j)
      for (Eigen::Index a = 0; a < d; ++a) col(a * r + j) = ks[static_cast<std::size_t>(j)](a, i);
    u.col(i * r) = col;
    filled[static_cast<std::size_t>(i * r)] = true;
  }

  Eigen::Index candidate = 0;
  for (Eigen::Index c = 0; c < n; ++c) {
    if (filled[static_cast<std::size_t>(c)]) continue;
    for (;; ++candidate) {
      if (candidate >= n) throw std::runtime_error("stinespring_dilate: basis completion failed");
      Vector v = Vector::Zero(n);
      v(candidate) = 1.0;
      // Two passes of modified Gram-Schmidt for stability.
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index k = 0; k < n; ++k)
          if (filled[static_cast<std::size_t>(k)]) v -= u.col(k).dot(v) * u.col(k);
      const double norm = v.norm();
      if (norm > 1e-6) {
        u.col(c) = v / norm;
        filled[static_cast<std::size_t>(c)] = true;
        ++candidate;
        break;
      }
    }
  }
  return {std::move(u), r};
}

/// Tr_E[U (rho (x) |0><0|_E) U^dag].
inline Matrix apply_dilation(const Dilation& dil, const Matrix& rho) {
  const Eigen::Index r = dil.env_dim;
  Matrix env0 = Matrix::Zero(r, r);
  env0(0, 0) = 1.0;
  const Matrix big = dil.unitary * kron(rho, env0) * dil.unitary.adjoint();
  return partial_trace_second(big, r);
}

//---------------------------------------------------------------------------
// Single-qubit measurement bases
//---------------------------------------------------------------------------

/// Bloch angle of basis j out of m: the bases sit on the X-Z great circle
/// at theta_j = pi j / m, so j = 0 is computational and (m = 2, j = 1) is
/// Hadamard.
inline double basis_angle(int basis_index, int m) {
  if (m < 2) throw std::invalid_argument("basis count m must be at least 2");
  if (basis_index < 0 || basis_index >= m) throw std::out_of_range("basis index out of range");
  return std::numbers::pi * basis_index / m;
}

/// Basis vector for outcome `bit` at Bloch angle theta (real amplitudes).
inline Vector basis_vector(double theta, int bit) {
  Vector v(2);
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  if (bit == 0) v << c, s;
  else v << -s, c;
  return v;
}

struct QubitMeasurement {
  int outcome;
  DensityMatrix post_state;
};

/// Born-rule measurement of one qubit (`side` 0 or 1) of a two-qubit state
/// in basis `basis_index` of m.
inline QubitMeasurement measure_qubit_in_basis(const DensityMatrix& joint, int basis_index, int side, int m,
                                               Rng& rng) {
  if (joint.dim() != 4) throw DimensionError("measure_qubit_in_basis: expected a two-qubit state");
  if (side != 0 && side != 1) throw std::out_of_range("measure_qubit_in_basis: side must be 0 or 1");
  const double theta = basis_angle(basis_index, m);
  const Matrix id = Matrix::Identity(2, 2);
  Matrix proj[2];
  for (int b = 0; b < 2; ++b) {
    const Vector e = basis_vector(theta, b);
    const Matrix p = e * e.adjoint();
    proj[b] = side == 0 ? kron(p, id) : kron(id, p);
  }
  const double p0 = std::clamp((proj[0] * joint.matrix()).trace().real(), 0.0, 1.0);
  const int outcome = rng.uniform() < p0 ? 0 : 1;
  const double p = outcome == 0 ? p0 : 1.0 - p0;
  if (p < kMinConditioningProb) throw DegenerateConditioning("measure_qubit_in_basis: zero-probability outcome");
  Matrix post = proj[outcome] * joint.matrix() * proj[outcome] / p;
  post = 0.5 * (post + post.adjoint()).eval();
  return {outcome, DensityMatrix(post)};
}

}  // namespace cqpv::qcore

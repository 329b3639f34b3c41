#pragma once

// Dense complex kernels: Takagi factorization, projection onto the set of
// symmetric unitary matrices, and a bracketing root finder.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>

#include "milac/error.hpp"

namespace milac {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr Complex kJ{0.0, 1.0};

/// a = q * diag(sigma) * q^T with q unitary and sigma non-increasing.
struct TakagiFactorization {
  ComplexMatrix q;
  RealVector sigma;
};

namespace detail {

// Relative spread below which neighbouring singular values share a block.
inline constexpr double kClusterTol = 1e-8;
// Singular values below this fraction of the largest form the null block.
inline constexpr double kNullTol = 1e-12;

// Unitary r with r * r^T == z for a (numerically) symmetric unitary z.
//
// Re(z) and Im(z) are commuting real symmetric matrices, so a single real
// orthogonal o diagonalizes both and z = o * diag(e^{i phi}) * o^T.
inline ComplexMatrix symmetric_unitary_sqrt(const ComplexMatrix& z) {
  const Index m = z.rows();
  if (m == 1) {
    const double mag = std::abs(z(0, 0));
    const Complex phase = mag > 0.0 ? z(0, 0) / mag : Complex{1.0, 0.0};
    return ComplexMatrix::Constant(1, 1, std::sqrt(phase));
  }
  const ComplexMatrix zs = 0.5 * (z + z.transpose());
  // Irrational weight so that distinct joint eigenpairs stay separated.
  constexpr double kMix = 0.7548776662466927;
  const RealMatrix pencil = zs.real() + kMix * zs.imag();
  Eigen::SelfAdjointEigenSolver<RealMatrix> eig(0.5 * (pencil + pencil.transpose()));
  const RealMatrix& o = eig.eigenvectors();
  const ComplexMatrix oc = o.cast<Complex>();
  const ComplexMatrix d = oc.transpose() * zs * oc;
  ComplexVector half(m);
  for (Index i = 0; i < m; ++i) {
    const double mag = std::abs(d(i, i));
    const Complex phase = mag > 0.0 ? d(i, i) / mag : Complex{1.0, 0.0};
    half(i) = std::sqrt(phase);
  }
  return oc * half.asDiagonal();
}

}  // namespace detail

/// Takagi factorization of a complex symmetric matrix.
///
/// Built from the SVD a = U S V^H. For symmetric a the left basis equals the
/// conjugated right basis up to a block-diagonal symmetric unitary
/// Z = V^T U (one block per cluster of equal singular values); q = conj(V)
/// times the symmetric square root of Z. The null block keeps conj(V).
inline TakagiFactorization takagi(const ComplexMatrix& a) {
  if (a.rows() != a.cols()) fail(ErrorCode::DimensionMismatch, "takagi: matrix is not square");
  const Index n = a.rows();
  const double norm = a.norm();
  if ((a - a.transpose()).norm() > 1e-9 * norm) fail(ErrorCode::NotSymmetric, "takagi: input is not complex symmetric");
  if (norm == 0.0) return {ComplexMatrix::Identity(n, n), RealVector::Zero(n)};

  const ComplexMatrix sym = 0.5 * (a + a.transpose());
  Eigen::BDCSVD<ComplexMatrix> svd(sym, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const ComplexMatrix& u = svd.matrixU();
  const ComplexMatrix& v = svd.matrixV();
  RealVector sigma = svd.singularValues();

  ComplexMatrix q = v.conjugate();
  const double smax = sigma(0);
  Index begin = 0;
  while (begin < n) {
    if (sigma(begin) <= detail::kNullTol * smax) break;
    Index end = begin + 1;
    while (end < n && sigma(end) > detail::kNullTol * smax && sigma(end - 1) - sigma(end) <= detail::kClusterTol * smax) ++end;
    const Index m = end - begin;
    const ComplexMatrix z = v.middleCols(begin, m).transpose() * u.middleCols(begin, m);
    q.middleCols(begin, m) = q.middleCols(begin, m) * detail::symmetric_unitary_sqrt(z);
    begin = end;
  }
  for (Index i = begin; i < n; ++i) sigma(i) = std::max(sigma(i), 0.0);
  return {std::move(q), std::move(sigma)};
}

/// Closest symmetric unitary matrix to x in the sense of maximizing
/// Re tr(theta^H x). Only the symmetric part of x matters, so theta = q q^T
/// with q from the Takagi factorization of (x + x^T) / 2.
inline ComplexMatrix sym_unitary_project(const ComplexMatrix& x) {
  if (x.rows() != x.cols()) fail(ErrorCode::DimensionMismatch, "sym_unitary_project: matrix is not square");
  if (!x.allFinite()) fail(ErrorCode::InvalidScattering, "sym_unitary_project: non-finite input");
  const TakagiFactorization t = takagi(0.5 * (x + x.transpose()));
  const ComplexMatrix theta = t.q * t.q.transpose();
  return 0.5 * (theta + theta.transpose());
}

/// Root of a nonincreasing f on [lo, hi] with f(lo) >= 0 >= f(hi).
template <typename Fn>
double bisect_root(Fn&& f, double lo, double hi, double tol) {
  if (!(hi > lo) || !(tol > 0.0)) fail(ErrorCode::BracketInvalid, "bisect_root: need hi > lo and tol > 0");
  const double flo = f(lo);
  const double fhi = f(hi);
  if (!(flo >= 0.0) || !(fhi <= 0.0)) fail(ErrorCode::BracketInvalid, "bisect_root: f(lo) >= 0 >= f(hi) violated");
  if (std::abs(flo) <= tol) return lo;
  if (std::abs(fhi) <= tol) return hi;
  for (int iter = 0; iter < 400; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (std::abs(fm) <= tol) return mid;
    if (fm > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= tol * std::max(1.0, std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace milac

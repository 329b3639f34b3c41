#pragma once

// N-port lossless reciprocal network model: susceptance assembly and
// synthesis, S <-> B conversion, block partition, beamforming extraction and
// feasibility checks. Ports 0..K-1 face the RF chains, K..N-1 the antennas.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "milac/error.hpp"
#include "milac/linalg.hpp"

namespace milac {

inline constexpr double kDefaultZ0 = 50.0;
inline constexpr double kUnitaryTol = 1e-8;
inline constexpr double kSymmetricTol = 1e-10;

struct ReferenceImpedance {
  double ohms = kDefaultZ0;

  explicit ReferenceImpedance(double z0 = kDefaultZ0) : ohms(z0) {
    if (!(z0 > 0.0) || !std::isfinite(z0)) fail(ErrorCode::InvalidConfig, "reference impedance must be positive");
  }
};

/// Real symmetric susceptance matrix B, with Y = jB.
struct SusceptanceMatrix {
  RealMatrix b;
};

/// Symmetric unitary S-parameter matrix of a network with k input ports
/// followed by l output ports.
struct ScatteringMatrix {
  ComplexMatrix theta;
  Index k = 0;
  Index l = 0;

  Index ports() const { return theta.rows(); }
};

/// F = theta_21 / 2, an l-by-k map from RF-chain signals to antennas.
struct BeamformingMatrix {
  ComplexMatrix f;
};

struct ScatteringBlocks {
  ComplexMatrix t11;  // k x k, reflected back to the RF chains
  ComplexMatrix t21;  // l x k, RF chains to antennas
  ComplexMatrix t22;  // l x l
};

struct ValidationReport {
  bool pass = false;
  bool unitary = false;
  bool symmetric = false;
  double unitary_residual = 0.0;
  double symmetric_residual = 0.0;
};

inline ValidationReport validate_lossless_reciprocal(const ComplexMatrix& theta, double tol_unitary = kUnitaryTol,
                                                     double tol_symmetric = kSymmetricTol) {
  if (theta.rows() != theta.cols()) fail(ErrorCode::DimensionMismatch, "validate: matrix is not square");
  const Index n = theta.rows();
  ValidationReport r;
  r.unitary_residual = (theta.adjoint() * theta - ComplexMatrix::Identity(n, n)).norm();
  r.symmetric_residual = (theta - theta.transpose()).norm();
  const double dim = static_cast<double>(n);
  r.unitary = theta.allFinite() && r.unitary_residual <= tol_unitary * dim;
  r.symmetric = theta.allFinite() && r.symmetric_residual <= tol_symmetric * dim;
  r.pass = r.unitary && r.symmetric;
  return r;
}

namespace detail {

inline void require_symmetric(const RealMatrix& m, const char* who) {
  if (m.rows() != m.cols()) fail(ErrorCode::DimensionMismatch, std::string(who) + ": matrix is not square");
  if (!m.allFinite()) fail(ErrorCode::NotSymmetric, std::string(who) + ": non-finite entries");
  if ((m - m.transpose()).norm() > 1e-12 * m.norm()) fail(ErrorCode::NotSymmetric, std::string(who) + ": matrix is not symmetric");
}

}  // namespace detail

/// Network matrix from branch susceptances: off-diagonal entries are the
/// negated port-to-port branches, diagonal entries the column sums (ground
/// branch plus every branch touching the port).
inline SusceptanceMatrix assemble_susceptance(const RealMatrix& branch) {
  detail::require_symmetric(branch, "assemble_susceptance");
  const Index n = branch.rows();
  RealMatrix b = -branch;
  for (Index v = 0; v < n; ++v) b(v, v) = branch.col(v).sum();
  return {std::move(b)};
}

/// Inverse of assemble_susceptance: recovers the tunable branch values.
inline RealMatrix synthesize_branches(const SusceptanceMatrix& s) {
  detail::require_symmetric(s.b, "synthesize_branches");
  const Index n = s.b.rows();
  RealMatrix branch = -s.b;
  for (Index v = 0; v < n; ++v) branch(v, v) = s.b.col(v).sum();
  return branch;
}

/// theta = 2 (I + j z0 B)^{-1} - I, split into k input and n - k output ports.
inline ScatteringMatrix scattering_from_susceptance(const SusceptanceMatrix& s, ReferenceImpedance z0, Index k) {
  detail::require_symmetric(s.b, "scattering_from_susceptance");
  const Index n = s.b.rows();
  if (k < 0 || k > n) fail(ErrorCode::DimensionMismatch, "scattering_from_susceptance: k out of range");
  const ComplexMatrix system = ComplexMatrix::Identity(n, n) + kJ * z0.ohms * s.b.cast<Complex>();
  Eigen::PartialPivLU<ComplexMatrix> lu(system);
  if (!(lu.rcond() > 1e-14)) fail(ErrorCode::SingularSystem, "scattering_from_susceptance: (I + j z0 B) is singular");
  ComplexMatrix theta = 2.0 * lu.inverse() - ComplexMatrix::Identity(n, n);
  theta = 0.5 * (theta + theta.transpose()).eval();
  return {std::move(theta), k, n - k};
}

inline ScatteringMatrix scattering_from_susceptance(const SusceptanceMatrix& s, ReferenceImpedance z0 = ReferenceImpedance{}) {
  return scattering_from_susceptance(s, z0, 0);
}

/// B = (2 (I + theta)^{-1} - I) / (j z0). Throws NoFiniteRealization when
/// theta has an eigenvalue at -1.
inline SusceptanceMatrix susceptance_from_scattering(const ScatteringMatrix& s, ReferenceImpedance z0 = ReferenceImpedance{}) {
  const ComplexMatrix& theta = s.theta;
  if (!validate_lossless_reciprocal(theta).pass)
    fail(ErrorCode::InvalidScattering, "susceptance_from_scattering: input is not symmetric unitary");
  const Index n = theta.rows();
  const ComplexMatrix shifted = ComplexMatrix::Identity(n, n) + theta;
  Eigen::BDCSVD<ComplexMatrix> svd(shifted);
  if (svd.singularValues()(n - 1) < 1e-10 * static_cast<double>(n))
    fail(ErrorCode::NoFiniteRealization, "susceptance_from_scattering: I + theta is singular (theta has eigenvalue -1)");
  const ComplexMatrix c = 2.0 * shifted.partialPivLu().inverse() - ComplexMatrix::Identity(n, n);
  const ComplexMatrix b = c / (kJ * z0.ohms);
  if (b.imag().norm() > 1e-9 * b.norm() + 1e-12)
    fail(ErrorCode::InvalidScattering, "susceptance_from_scattering: computed susceptance is not real");
  RealMatrix real = b.real();
  return {0.5 * (real + real.transpose())};
}

inline ScatteringBlocks partition_scattering(const ScatteringMatrix& s) {
  const Index n = s.theta.rows();
  if (s.theta.cols() != n || s.k < 1 || s.l < 1 || s.k + s.l != n)
    fail(ErrorCode::DimensionMismatch, "partition_scattering: ports do not split as k + l");
  return {s.theta.topLeftCorner(s.k, s.k), s.theta.bottomLeftCorner(s.l, s.k), s.theta.bottomRightCorner(s.l, s.l)};
}

inline BeamformingMatrix beamforming_from_scattering(const ScatteringMatrix& s) {
  if (s.theta.rows() != s.k + s.l || s.theta.cols() != s.k + s.l)
    fail(ErrorCode::DimensionMismatch, "beamforming_from_scattering: ports do not split as k + l");
  return {0.5 * s.theta.bottomLeftCorner(s.l, s.k)};
}

// Matrix file: "MILAC-MAT v1", then "rows cols", then rows*cols lines of
// "re im" in column-major order.

inline constexpr const char* kMatrixMagic = "MILAC-MAT v1";

inline void save_matrix(const std::string& path, const ComplexMatrix& m) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot open " + path + " for writing");
  out << kMatrixMagic << '\n' << m.rows() << ' ' << m.cols() << '\n';
  char line[96];
  for (Index c = 0; c < m.cols(); ++c) {
    for (Index r = 0; r < m.rows(); ++r) {
      std::snprintf(line, sizeof line, "%.17g %.17g\n", m(r, c).real(), m(r, c).imag());
      out << line;
    }
  }
  if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

inline ComplexMatrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMatrixMagic) fail(ErrorCode::MalformedFile, path + ": bad magic line");
  long long rows = 0;
  long long cols = 0;
  if (!std::getline(in, line)) fail(ErrorCode::MalformedFile, path + ": missing dimensions");
  {
    std::istringstream dims(line);
    std::string extra;
    if (!(dims >> rows >> cols) || (dims >> extra) || rows < 1 || cols < 1)
      fail(ErrorCode::MalformedFile, path + ": bad dimension line");
  }
  ComplexMatrix m(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) {
      double re = 0.0;
      double im = 0.0;
      std::string extra;
      if (!std::getline(in, line)) fail(ErrorCode::MalformedFile, path + ": fewer entries than rows*cols");
      std::istringstream entry(line);
      if (!(entry >> re >> im) || (entry >> extra)) fail(ErrorCode::MalformedFile, path + ": bad entry line");
      m(r, c) = {re, im};
    }
  }
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) fail(ErrorCode::MalformedFile, path + ": more entries than rows*cols");
  }
  if (!m.allFinite()) fail(ErrorCode::MalformedFile, path + ": non-finite entry");
  return m;
}

}  // namespace milac

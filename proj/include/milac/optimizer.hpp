#pragma once

// Sum-rate maximization over RF-chain powers and a symmetric unitary
// scattering matrix. The log-ratio objective is decoupled with auxiliary
// variables (alpha, beta); each outer iteration then updates
//   1. alpha, beta in closed form,
//   2. the powers via a water-filling style dual bisection,
//   3. the scattering matrix through inner minorize-maximize steps, each a
//      symmetric unitary projection of the surrogate gradient.
// All objectives here are in nats.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "milac/channels.hpp"
#include "milac/error.hpp"
#include "milac/evaluation.hpp"
#include "milac/linalg.hpp"
#include "milac/microwave.hpp"

namespace milac {

/// Auxiliary variables of the decoupled objective.
struct FpState {
  RealVector alpha;
  ComplexVector beta;
};

enum class SurrogateVariant {
  // Gradient of h(theta) = 2Re tr(L2^H theta) + tr(theta (lambda I - X1) theta^H X2),
  // lambda = max_k p_k. Guarantees monotone ascent.
  ConsistentGradient,
  // Update direction L2 + (lambda I - X2) theta X1 with lambda just above
  // the largest eigenvalue of X2.
  Literal,
};

constexpr std::string_view to_string(SurrogateVariant v) {
  return v == SurrogateVariant::ConsistentGradient ? "consistent" : "literal";
}

inline SurrogateVariant parse_variant(std::string_view s) {
  if (s == "consistent") return SurrogateVariant::ConsistentGradient;
  if (s == "literal") return SurrogateVariant::Literal;
  fail(ErrorCode::InvalidConfig, "unknown surrogate variant '" + std::string(s) + "'");
}

struct OptimizerConfig {
  int inner_iterations = 50;
  double outer_tolerance = 1e-4;
  int max_outer_iterations = 300;
  SurrogateVariant variant = SurrogateVariant::ConsistentGradient;
  double bisection_tolerance = 1e-10;

  void validate() const {
    if (inner_iterations < 1 || max_outer_iterations < 1) fail(ErrorCode::InvalidConfig, "iteration counts must be >= 1");
    if (!(outer_tolerance > 0.0) || !(bisection_tolerance > 0.0)) fail(ErrorCode::InvalidConfig, "tolerances must be > 0");
  }
};

struct TraceEntry {
  int iteration = 0;
  double fp_objective_nats = 0.0;
  double sum_rate_bits = 0.0;
  double radiated_power = 0.0;
  double reflected_power = 0.0;
  double input_power = 0.0;
  double total_power = 0.0;  // sum_k p_k
  double unitary_residual = 0.0;
  double symmetric_residual = 0.0;
};

using ConvergenceTrace = std::vector<TraceEntry>;

/// Matrices of the scattering subproblem
///   max 2Re tr(L2^H theta) - tr(theta X1 theta^H X2)  over symmetric unitary theta.
/// X1 = blockdiag(P, 0) is diagonal; X2 = blockdiag(0, H Sigma2 H^H / 4).
struct SurrogateMatrices {
  ComplexMatrix l2;
  ComplexMatrix x1;
  ComplexMatrix x2;
  double lambda = 0.0;
};

// ---------------------------------------------------------------------------
// Objective

/// sum_k log(1+a_k) - a_k + 2 sqrt(1+a_k) sqrt(p_k) Re{h_k^H f_k conj(b_k)}
///       - |b_k|^2 (sum_i p_i |h_k^H f_i|^2 + sigma_k^2)
inline double fp_objective(const FpState& s, const PowerAllocation& p, const ScatteringMatrix& theta, const ChannelSet& h,
                           const NoisePowers& noise) {
  const BeamformingMatrix f = beamforming_from_scattering(theta);
  detail::check_dims(h, f.f, p.p, noise);
  if (s.alpha.size() != h.users() || s.beta.size() != h.users()) fail(ErrorCode::DimensionMismatch, "fp_objective: state size != K");
  const ComplexMatrix g = h.h.adjoint() * f.f;
  double total = 0.0;
  for (Index k = 0; k < h.users(); ++k) {
    const double a = s.alpha(k);
    const Complex b = s.beta(k);
    double received = noise.sigma2(k);
    for (Index i = 0; i < h.users(); ++i) received += p.p(i) * std::norm(g(k, i));
    total += std::log1p(a) - a + 2.0 * std::sqrt(1.0 + a) * std::sqrt(p.p(k)) * std::real(g(k, k) * std::conj(b)) -
             std::norm(b) * received;
  }
  return total;
}

/// Same objective through the trace form
///   2Re tr(F P^{1/2} Sigma1^H H^H) - tr(F P F^H H Sigma2 H^H) + constants.
inline double fp_objective_compact(const FpState& s, const PowerAllocation& p, const ScatteringMatrix& theta,
                                   const ChannelSet& h, const NoisePowers& noise) {
  const BeamformingMatrix f = beamforming_from_scattering(theta);
  detail::check_dims(h, f.f, p.p, noise);
  const Index k = h.users();
  ComplexVector sigma1(k);
  RealVector sigma2(k);
  for (Index i = 0; i < k; ++i) {
    sigma1(i) = std::sqrt(1.0 + s.alpha(i)) * s.beta(i);
    sigma2(i) = std::norm(s.beta(i));
  }
  const ComplexVector sqrt_p = p.p.cwiseSqrt().cast<Complex>();
  const ComplexMatrix fp_half = f.f * sqrt_p.asDiagonal();
  const double linear = 2.0 * (fp_half * sigma1.conjugate().asDiagonal() * h.h.adjoint()).trace().real();
  const ComplexMatrix fpf = f.f * p.p.cast<Complex>().asDiagonal() * f.f.adjoint();
  const double quadratic = (fpf * h.h * sigma2.cast<Complex>().asDiagonal() * h.h.adjoint()).trace().real();
  double constants = 0.0;
  for (Index i = 0; i < k; ++i) constants += std::log1p(s.alpha(i)) - s.alpha(i) - sigma2(i) * noise.sigma2(i);
  return linear - quadratic + constants;
}

// ---------------------------------------------------------------------------
// Block updates

inline FpState update_auxiliaries(const ChannelSet& h, const BeamformingMatrix& f, const PowerAllocation& p,
                                  const NoisePowers& noise) {
  detail::check_dims(h, f.f, p.p, noise);
  const Index k = h.users();
  const ComplexMatrix g = h.h.adjoint() * f.f;
  FpState s{RealVector(k), ComplexVector(k)};
  for (Index u = 0; u < k; ++u) {
    double interference = 0.0;
    for (Index i = 0; i < k; ++i)
      if (i != u) interference += p.p(i) * std::norm(g(u, i));
    const double signal = p.p(u) * std::norm(g(u, u));
    s.alpha(u) = signal / (interference + noise.sigma2(u));
    s.beta(u) = std::sqrt(1.0 + s.alpha(u)) * std::sqrt(p.p(u)) * g(u, u) / (signal + interference + noise.sigma2(u));
  }
  return s;
}

/// Maximizes 2 z^T m - z^T diag(n) z over z >= 0, |z|^2 <= p_t and returns z.
/// z_k = [m_k / (n_k + mu)]^+ with mu >= 0 found by bisection when the budget
/// binds.
inline RealVector solve_power_subproblem(const RealVector& m, const RealVector& n, double p_t, double tol = 1e-10) {
  if (!(p_t > 0.0)) fail(ErrorCode::InvalidConfig, "power budget must be positive");
  if (m.size() != n.size()) fail(ErrorCode::DimensionMismatch, "power subproblem: m and n differ in length");
  const Index k = m.size();
  const RealVector m_pos = m.cwiseMax(0.0);
  auto z_at = [&](double mu) {
    RealVector z = RealVector::Zero(k);
    for (Index i = 0; i < k; ++i) {
      if (m_pos(i) <= 0.0) continue;
      const double denom = n(i) + mu;
      z(i) = denom > 0.0 ? m_pos(i) / denom : std::numeric_limits<double>::infinity();
    }
    return z;
  };
  if (m_pos.sum() <= 0.0) return RealVector::Zero(k);

  RealVector z = z_at(0.0);
  if (z.allFinite() && z.squaredNorm() <= p_t) return z;

  const double hi = m_pos.norm() / std::sqrt(p_t);
  const double mu = bisect_root([&](double x) { return z_at(x).squaredNorm() - p_t; }, 0.0, hi, tol);
  z = z_at(mu);
  if (!z.allFinite()) z = z_at(hi);
  const double power = z.squaredNorm();
  if (power > p_t) z *= std::sqrt(p_t / power);
  return z;
}

inline PowerAllocation update_power(const ChannelSet& h, const BeamformingMatrix& f, const FpState& s, double p_t,
                                    double tol = 1e-10) {
  const Index k = h.users();
  if (f.f.rows() != h.antennas() || f.f.cols() != k || s.alpha.size() != k || s.beta.size() != k)
    fail(ErrorCode::DimensionMismatch, "update_power: inconsistent dimensions");
  const RealMatrix gain = detail::gain_matrix(h.h, f.f);  // (i, k) -> |h_i^H f_k|^2
  const ComplexMatrix g = h.h.adjoint() * f.f;
  RealVector m(k);
  RealVector n(k);
  for (Index u = 0; u < k; ++u) {
    m(u) = std::real(std::sqrt(1.0 + s.alpha(u)) * std::conj(s.beta(u)) * g(u, u));
    n(u) = 0.0;
    for (Index i = 0; i < k; ++i) n(u) += std::norm(s.beta(i)) * gain(i, u);
  }
  const RealVector z = solve_power_subproblem(m, n, p_t, tol);
  return {z.cwiseAbs2(), p_t};
}

inline SurrogateMatrices build_surrogate_matrices(const ChannelSet& h, const FpState& s, const PowerAllocation& p,
                                                  SurrogateVariant variant = SurrogateVariant::ConsistentGradient) {
  const Index k = h.users();
  const Index l = h.antennas();
  const Index n = k + l;
  if (s.alpha.size() != k || s.beta.size() != k || p.p.size() != k) fail(ErrorCode::DimensionMismatch, "surrogate: state size != K");
  // Sigma1 P^{1/2} and Sigma2 as diagonals.
  ComplexVector sigma1_sqrt_p(k);
  RealVector sigma2(k);
  for (Index i = 0; i < k; ++i) {
    sigma1_sqrt_p(i) = std::sqrt(1.0 + s.alpha(i)) * s.beta(i) * std::sqrt(p.p(i));
    sigma2(i) = std::norm(s.beta(i));
  }
  SurrogateMatrices sm;
  sm.l2 = ComplexMatrix::Zero(n, n);
  sm.l2.bottomLeftCorner(l, k) = 0.5 * h.h * sigma1_sqrt_p.asDiagonal();
  sm.x1 = ComplexMatrix::Zero(n, n);
  sm.x1.topLeftCorner(k, k).diagonal() = p.p.cast<Complex>();
  sm.x2 = ComplexMatrix::Zero(n, n);
  sm.x2.bottomRightCorner(l, l) = 0.25 * h.h * sigma2.cast<Complex>().asDiagonal() * h.h.adjoint();
  if (variant == SurrogateVariant::ConsistentGradient) {
    sm.lambda = p.p.size() > 0 ? p.p.maxCoeff() : 0.0;
  } else {
    const ComplexMatrix block = sm.x2.bottomRightCorner(l, l);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(0.5 * (block + block.adjoint()), Eigen::EigenvaluesOnly);
    sm.lambda = eig.eigenvalues().maxCoeff() + 1e-9;
  }
  return sm;
}

/// 2Re tr(L2^H theta) - tr(theta X1 theta^H X2).
inline double surrogate_objective(const ComplexMatrix& theta, const SurrogateMatrices& sm) {
  const double linear = 2.0 * (sm.l2.adjoint() * theta).trace().real();
  const double quadratic = (theta * sm.x1 * theta.adjoint() * sm.x2).trace().real();
  return linear - quadratic;
}

/// Ascent direction whose symmetric unitary projection is the next iterate.
/// Uses that X1 is diagonal and X2 lives in the trailing l x l block.
inline ComplexMatrix surrogate_gradient(const ComplexMatrix& theta, const SurrogateMatrices& sm, Index k, SurrogateVariant variant) {
  const Index n = theta.rows();
  const Index l = n - k;
  const RealVector x1 = sm.x1.diagonal().real();
  const auto x2 = sm.x2.bottomRightCorner(l, l);
  ComplexMatrix g = sm.l2;
  if (variant == SurrogateVariant::ConsistentGradient) {
    // X2 theta (lambda I - X1)
    const RealVector scale = (RealVector::Constant(n, sm.lambda) - x1);
    g.bottomRows(l).noalias() += (x2 * theta.bottomRows(l)) * scale.cast<Complex>().asDiagonal();
  } else {
    // (lambda I - X2) theta X1; only the first k columns of theta X1 survive.
    const ComplexMatrix tx1 = theta.leftCols(k) * x1.head(k).cast<Complex>().asDiagonal();
    g.leftCols(k) += sm.lambda * tx1;
    g.bottomLeftCorner(l, k).noalias() -= x2 * tx1.bottomRows(l);
  }
  return g;
}

inline ScatteringMatrix update_scattering(const ScatteringMatrix& theta0, const SurrogateMatrices& sm, int i1,
                                          SurrogateVariant variant = SurrogateVariant::ConsistentGradient) {
  if (i1 < 1) fail(ErrorCode::InvalidConfig, "update_scattering: need at least one inner iteration");
  const Index n = theta0.ports();
  if (sm.l2.rows() != n || sm.x1.rows() != n || sm.x2.rows() != n || theta0.k + theta0.l != n)
    fail(ErrorCode::DimensionMismatch, "update_scattering: surrogate and theta sizes differ");
  if (!validate_lossless_reciprocal(theta0.theta).pass) fail(ErrorCode::InfeasibleStart, "update_scattering: start is not symmetric unitary");
  ScatteringMatrix cur = theta0;
  for (int t = 0; t < i1; ++t) {
    const ComplexMatrix g = surrogate_gradient(cur.theta, sm, cur.k, variant);
    if (g.norm() <= 1e-14) break;
    cur.theta = sym_unitary_project(g);
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Outer loop

struct BcdResult {
  ScatteringMatrix theta;
  PowerAllocation power;
  BeamformingMatrix f;
  RateReport rates;
  ConvergenceTrace trace;
  bool converged = false;
};

/// Random symmetric unitary theta and equal power split.
inline std::pair<ScatteringMatrix, PowerAllocation> initial_point(Index k, Index l, double p_t, std::uint64_t seed) {
  ComplexNormalSource source(seed);
  const ComplexMatrix r = source.matrix(k + l, k + l);
  return {ScatteringMatrix{sym_unitary_project(r), k, l}, PowerAllocation::equal(k, p_t)};
}

namespace detail {

inline TraceEntry trace_entry(int iter, double fp_nats, double rate_bits, const ScatteringMatrix& theta, const PowerAllocation& p) {
  const PowerAccount acc = power_account(theta, p);
  const ValidationReport v = validate_lossless_reciprocal(theta.theta);
  return {iter, fp_nats, rate_bits, acc.radiated, acc.reflected, acc.input_power, p.p.sum(), v.unitary_residual, v.symmetric_residual};
}

}  // namespace detail

inline BcdResult run_bcd(const ChannelSet& h, const NoisePowers& noise, double p_t, const OptimizerConfig& cfg,
                         const ScatteringMatrix& theta_init, const PowerAllocation& p_init) {
  cfg.validate();
  const Index k = h.users();
  const Index l = h.antennas();
  if (!(p_t > 0.0)) fail(ErrorCode::InvalidConfig, "run_bcd: power budget must be positive");
  if (theta_init.k != k || theta_init.l != l || theta_init.ports() != k + l || p_init.p.size() != k)
    fail(ErrorCode::DimensionMismatch, "run_bcd: initialization does not match the channel");
  if (!validate_lossless_reciprocal(theta_init.theta).pass) fail(ErrorCode::InfeasibleInit, "run_bcd: initial theta is not symmetric unitary");
  if (!p_init.p.allFinite() || (p_init.p.array() < 0.0).any() || p_init.p.sum() > p_t * (1.0 + 1e-12) || p_init.p.sum() <= 0.0)
    fail(ErrorCode::InfeasibleInit, "run_bcd: initial powers are infeasible or zero");

  BcdResult res;
  res.theta = theta_init;
  res.power = {p_init.p, p_t};
  res.f = beamforming_from_scattering(res.theta);
  if (res.f.f.norm() == 0.0) fail(ErrorCode::InfeasibleInit, "run_bcd: initial beamformer is zero");

  RealVector gamma = sinr(h, res.f, res.power, noise);
  double rate = sum_rate(gamma).sum_rate;
  res.trace.push_back(detail::trace_entry(0, sum_rate_nats(gamma), rate, res.theta, res.power));

  for (int iter = 1; iter <= cfg.max_outer_iterations; ++iter) {
    const FpState state = update_auxiliaries(h, res.f, res.power, noise);
    res.power = update_power(h, res.f, state, p_t, cfg.bisection_tolerance);
    const SurrogateMatrices sm = build_surrogate_matrices(h, state, res.power, cfg.variant);
    res.theta = update_scattering(res.theta, sm, cfg.inner_iterations, cfg.variant);
    res.f = beamforming_from_scattering(res.theta);

    gamma = sinr(h, res.f, res.power, noise);
    const double next = sum_rate(gamma).sum_rate;
    res.trace.push_back(detail::trace_entry(iter, fp_objective(state, res.power, res.theta, h, noise), next, res.theta, res.power));
    if (cfg.variant == SurrogateVariant::ConsistentGradient && next < rate - 1e-7)
      fail(ErrorCode::NonmonotoneObjective, "run_bcd: sum rate decreased from " + std::to_string(rate) + " to " + std::to_string(next));
    const bool done = std::abs(next - rate) <= cfg.outer_tolerance * std::max(1.0, rate);
    rate = next;
    if (done) {
      res.converged = true;
      break;
    }
  }
  res.rates = sum_rate(gamma);
  return res;
}

}  // namespace milac

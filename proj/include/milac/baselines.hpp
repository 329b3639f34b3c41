#pragma once

// Comparison baselines: an unconstrained (fully digital) beamformer optimized
// with the same auxiliary-variable ascent, and the single-user closed form.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "milac/channels.hpp"
#include "milac/error.hpp"
#include "milac/evaluation.hpp"
#include "milac/linalg.hpp"
#include "milac/optimizer.hpp"

namespace milac {

/// x = W s with tr(W W^H) <= budget.
struct DigitalBeamformer {
  ComplexMatrix w;
  double budget = 0.0;
};

struct DigitalResult {
  DigitalBeamformer beamformer;
  RateReport report;
  ConvergenceTrace trace;
  bool converged = false;
};

inline RealVector digital_sinr(const ChannelSet& h, const ComplexMatrix& w, const NoisePowers& noise) {
  const Index k = h.users();
  return sinr(h, BeamformingMatrix{w}, PowerAllocation{RealVector::Ones(k), static_cast<double>(k)}, noise);
}

/// Matched filter with equal power per user.
inline ComplexMatrix matched_filter(const ChannelSet& h, double budget) {
  const Index k = h.users();
  ComplexMatrix w = h.h.colwise().normalized();
  return w * std::sqrt(budget / static_cast<double>(k));
}

/// Regularized zero-forcing (H H^H + reg I)^{-1} H scaled to the budget.
inline ComplexMatrix regularized_zero_forcing(const ChannelSet& h, double budget, double reg) {
  const Index l = h.antennas();
  const ComplexMatrix a = h.h * h.h.adjoint() + reg * ComplexMatrix::Identity(l, l);
  ComplexMatrix w = a.ldlt().solve(h.h);
  const double norm2 = w.squaredNorm();
  if (!(norm2 > 0.0) || !w.allFinite()) return matched_filter(h, budget);
  return w * std::sqrt(budget / norm2);
}

namespace detail {

inline DigitalResult fp_digital_from(const ChannelSet& h, const NoisePowers& noise, double budget, double tolerance, int max_iters,
                                     const ComplexMatrix& w_init) {
  if (!(budget > 0.0)) fail(ErrorCode::InvalidConfig, "fp_digital: budget must be positive");
  if (!(tolerance > 0.0) || max_iters < 1) fail(ErrorCode::InvalidConfig, "fp_digital: bad tolerance or iteration cap");
  const Index k = h.users();
  const Index l = h.antennas();
  if (w_init.rows() != l || w_init.cols() != k) fail(ErrorCode::DimensionMismatch, "fp_digital: initial beamformer has wrong shape");
  if (noise.sigma2.size() != k) fail(ErrorCode::DimensionMismatch, "fp_digital: noise length != K");

  DigitalResult res;
  ComplexMatrix w = w_init;
  if (w.squaredNorm() > budget) w *= std::sqrt(budget / w.squaredNorm());
  RealVector gamma = digital_sinr(h, w, noise);
  double rate = sum_rate(gamma).sum_rate;
  res.trace.push_back({0, sum_rate_nats(gamma), rate, w.squaredNorm(), 0.0, w.squaredNorm(), w.squaredNorm(), 0.0, 0.0});

  for (int iter = 1; iter <= max_iters; ++iter) {
    const ComplexMatrix g = h.h.adjoint() * w;
    RealVector alpha(k);
    ComplexVector beta(k);
    ComplexVector c(k);
    for (Index u = 0; u < k; ++u) {
      const double received = g.row(u).squaredNorm() + noise.sigma2(u);
      const double signal = std::norm(g(u, u));
      alpha(u) = signal / (received - signal);
      beta(u) = std::sqrt(1.0 + alpha(u)) * g(u, u) / received;
      c(u) = std::sqrt(1.0 + alpha(u)) * beta(u);
    }

    // w_k = c_k (A + mu I)^{-1} h_k with A = sum_i |beta_i|^2 h_i h_i^H.
    const ComplexMatrix a = h.h * beta.cwiseAbs2().cast<Complex>().asDiagonal() * h.h.adjoint();
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(0.5 * (a + a.adjoint()));
    const RealVector d = eig.eigenvalues().cwiseMax(0.0);
    const ComplexMatrix& e = eig.eigenvectors();
    const ComplexMatrix proj = e.adjoint() * h.h * c.asDiagonal();
    const RealVector row_energy = proj.rowwise().squaredNorm();
    const double dmax = d.maxCoeff();
    auto inv = [&](Index j, double mu) {
      const double denom = d(j) + mu;
      return denom > 1e-12 * std::max(dmax, 1e-300) ? 1.0 / denom : 0.0;
    };
    auto power_at = [&](double mu) {
      double total = 0.0;
      for (Index j = 0; j < l; ++j) total += row_energy(j) * inv(j, mu) * inv(j, mu);
      return total;
    };
    double mu = 0.0;
    if (power_at(0.0) > budget) {
      const double hi = std::sqrt(row_energy.sum() / budget);
      mu = bisect_root([&](double x) { return power_at(x) - budget; }, 0.0, hi, 1e-12 * budget);
    }
    RealVector scale(l);
    for (Index j = 0; j < l; ++j) scale(j) = inv(j, mu);
    w = e * scale.cast<Complex>().asDiagonal() * proj;
    if (w.squaredNorm() > budget) w *= std::sqrt(budget / w.squaredNorm());

    const ComplexMatrix g_new = h.h.adjoint() * w;
    double fp = 0.0;
    for (Index u = 0; u < k; ++u)
      fp += std::log1p(alpha(u)) - alpha(u) + 2.0 * std::real(std::conj(c(u)) * g_new(u, u)) -
            std::norm(beta(u)) * (g_new.row(u).squaredNorm() + noise.sigma2(u));

    gamma = digital_sinr(h, w, noise);
    const double next = sum_rate(gamma).sum_rate;
    res.trace.push_back({iter, fp, next, w.squaredNorm(), 0.0, w.squaredNorm(), w.squaredNorm(), 0.0, 0.0});
    const bool done = std::abs(next - rate) <= tolerance * std::max(1.0, rate);
    rate = next;
    if (done) {
      res.converged = true;
      break;
    }
  }
  res.beamformer = {std::move(w), budget};
  res.report = sum_rate(gamma);
  return res;
}

}  // namespace detail

/// FP ascent from w_init and from three deterministic starts (matched filter,
/// regularized zero-forcing, near zero-forcing); the best run is returned.
/// Near K = L the iteration has several fixed points that each switch one
/// user off, so a single start is not reliable there.
inline DigitalResult fp_digital(const ChannelSet& h, const NoisePowers& noise, double budget, double tolerance, int max_iters,
                                const ComplexMatrix& w_init) {
  if (!(budget > 0.0)) fail(ErrorCode::InvalidConfig, "fp_digital: budget must be positive");
  if (noise.sigma2.size() != h.users()) fail(ErrorCode::DimensionMismatch, "fp_digital: noise length != K");
  const double reg = noise.sigma2.sum() / budget;
  DigitalResult best = detail::fp_digital_from(h, noise, budget, tolerance, max_iters, w_init);
  for (const ComplexMatrix& start : {matched_filter(h, budget), regularized_zero_forcing(h, budget, reg),
                                     regularized_zero_forcing(h, budget, 1e-3 * reg)}) {
    DigitalResult r = detail::fp_digital_from(h, noise, budget, tolerance, max_iters, start);
    if (r.report.sum_rate > best.report.sum_rate) best = std::move(r);
  }
  return best;
}

inline DigitalResult fp_digital(const ChannelSet& h, const NoisePowers& noise, double budget, double tolerance = 1e-8,
                                int max_iters = 2000) {
  return fp_digital(h, noise, budget, tolerance, max_iters, matched_filter(h, budget));
}

/// log2(1 + p_t |h|^2 / (4 sigma^2)); the 1/4 is the MiLAC radiated-power
/// factor of F = theta_21 / 2.
inline double mrt_single_user_rate(const ComplexVector& h, double p_t, double sigma2) {
  if (!(p_t >= 0.0) || !(sigma2 > 0.0)) fail(ErrorCode::InvalidConfig, "mrt_single_user_rate: need p_t >= 0 and sigma2 > 0");
  return std::log1p(p_t * h.squaredNorm() / (4.0 * sigma2)) / std::numbers::ln2;
}

}  // namespace milac

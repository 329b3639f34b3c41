#pragma once

// SINR, sum rate and the input/radiated/reflected power split.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "milac/channels.hpp"
#include "milac/error.hpp"
#include "milac/linalg.hpp"
#include "milac/microwave.hpp"

namespace milac {

/// RF-chain powers p_k with total budget p_t.
struct PowerAllocation {
  RealVector p;
  double budget = 0.0;

  static PowerAllocation equal(Index k, double budget) { return {RealVector::Constant(k, budget / static_cast<double>(k)), budget}; }

  bool feasible() const { return p.allFinite() && (p.array() >= 0.0).all() && p.sum() <= budget * (1.0 + 1e-12); }
};

struct RateReport {
  RealVector sinr;
  RealVector per_user_rate;  // bits per channel use
  double sum_rate = 0.0;     // bits per channel use
};

struct PowerAccount {
  double input_power = 0.0;  // sum(p) / 4
  double radiated = 0.0;
  double reflected = 0.0;
};

namespace detail {

inline void check_dims(const ChannelSet& h, const ComplexMatrix& f, const RealVector& p, const NoisePowers& noise) {
  const Index k = h.users();
  if (f.rows() != h.antennas() || f.cols() != k || p.size() != k || noise.sigma2.size() != k)
    fail(ErrorCode::DimensionMismatch, "channel, beamformer, powers and noise disagree on K or L");
  if (!(noise.sigma2.array() > 0.0).all()) fail(ErrorCode::InvalidConfig, "noise powers must be positive");
}

// |h_k^H f_i|^2 as a K x K matrix indexed (k, i).
inline RealMatrix gain_matrix(const ComplexMatrix& h, const ComplexMatrix& f) { return (h.adjoint() * f).cwiseAbs2(); }

}  // namespace detail

inline RealVector sinr(const ChannelSet& h, const BeamformingMatrix& f, const PowerAllocation& p, const NoisePowers& noise) {
  detail::check_dims(h, f.f, p.p, noise);
  const RealMatrix gain = detail::gain_matrix(h.h, f.f);
  const Index k = h.users();
  RealVector out(k);
  for (Index u = 0; u < k; ++u) {
    double interference = 0.0;
    for (Index i = 0; i < k; ++i)
      if (i != u) interference += p.p(i) * gain(u, i);
    out(u) = p.p(u) * gain(u, u) / (interference + noise.sigma2(u));
  }
  return out.cwiseMax(0.0);
}

inline RateReport sum_rate(const RealVector& sinr) {
  if (!sinr.allFinite() || (sinr.array() < 0.0).any()) fail(ErrorCode::NegativeSinr, "sum_rate: SINR must be finite and nonnegative");
  RateReport r;
  r.sinr = sinr;
  r.per_user_rate = sinr.unaryExpr([](double g) { return std::log1p(g) / std::numbers::ln2; });
  r.sum_rate = r.per_user_rate.sum();
  return r;
}

/// Sum of ln(1 + sinr_k); the optimizer's native unit.
inline double sum_rate_nats(const RealVector& sinr) { return sinr.unaryExpr([](double g) { return std::log1p(g); }).sum(); }

inline PowerAccount power_account(const ScatteringMatrix& theta, const PowerAllocation& p) {
  const ScatteringBlocks blocks = partition_scattering(theta);
  if (p.p.size() != theta.k) fail(ErrorCode::DimensionMismatch, "power_account: power vector length != k");
  PowerAccount acc;
  acc.input_power = 0.25 * p.p.sum();
  acc.radiated = 0.25 * blocks.t21.colwise().squaredNorm().dot(p.p);
  acc.reflected = 0.25 * blocks.t11.colwise().squaredNorm().dot(p.p);
  return acc;
}

/// Largest normalized cross-correlation between distinct channel columns.
inline double channel_orthogonality(const ChannelSet& h) {
  const RealVector norms = h.h.colwise().norm();
  if ((norms.array() <= 0.0).any()) fail(ErrorCode::ZeroColumn, "channel_orthogonality: zero channel column");
  const ComplexMatrix gram = h.h.adjoint() * h.h;
  double worst = 0.0;
  for (Index i = 0; i < h.users(); ++i)
    for (Index k = 0; k < h.users(); ++k)
      if (i != k) worst = std::max(worst, std::abs(gram(i, k)) / (norms(i) * norms(k)));
  return worst;
}

}  // namespace milac

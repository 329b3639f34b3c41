#pragma once

// Downlink channel realizations: i.i.d. Rayleigh draws, their orthogonalized
// counterparts, and a plain-text file format for reproducible experiments.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include "milac/error.hpp"
#include "milac/linalg.hpp"

namespace milac {

enum class ChannelModel { Rayleigh, Orthogonal };

constexpr std::string_view to_string(ChannelModel m) { return m == ChannelModel::Rayleigh ? "rayleigh" : "orthogonal"; }

inline ChannelModel parse_channel_model(std::string_view s) {
  if (s == "rayleigh") return ChannelModel::Rayleigh;
  if (s == "orthogonal") return ChannelModel::Orthogonal;
  fail(ErrorCode::InvalidConfig, "unknown channel model '" + std::string(s) + "'");
}

/// L x K matrix whose column k is the channel h_k of user k.
struct ChannelSet {
  ComplexMatrix h;
  ChannelModel model = ChannelModel::Rayleigh;
  std::uint64_t seed = 0;

  Index users() const { return h.cols(); }
  Index antennas() const { return h.rows(); }

  friend bool operator==(const ChannelSet& a, const ChannelSet& b) {
    return a.model == b.model && a.seed == b.seed && a.h.rows() == b.h.rows() && a.h.cols() == b.h.cols() && a.h == b.h;
  }
};

struct NoisePowers {
  RealVector sigma2;

  static NoisePowers uniform(Index k, double value = 1.0) { return {RealVector::Constant(k, value)}; }
};

/// Standard complex normal source: 53-bit uniforms from mt19937_64 fed
/// through Box-Muller, each draw giving one CN(0, 1) sample.
class ComplexNormalSource {
 public:
  explicit ComplexNormalSource(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  Complex operator()() {
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log1p(-u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return std::numbers::sqrt2 * 0.5 * radius * Complex{std::cos(angle), std::sin(angle)};
  }

  ComplexMatrix matrix(Index rows, Index cols) {
    ComplexMatrix m(rows, cols);
    for (Index c = 0; c < cols; ++c)
      for (Index r = 0; r < rows; ++r) m(r, c) = (*this)();
    return m;
  }

 private:
  std::mt19937_64 engine_;
};

inline ChannelSet generate_rayleigh(Index k, Index l, std::uint64_t seed) {
  if (k < 1 || l < 1) fail(ErrorCode::InvalidConfig, "generate_rayleigh: need k >= 1 and l >= 1");
  ComplexNormalSource source(seed);
  return {source.matrix(l, k), ChannelModel::Rayleigh, seed};
}

/// h_orth = U * Sigma from the economy SVD h = U Sigma V^H.
inline ChannelSet orthogonalize(const ChannelSet& set) {
  const Index l = set.antennas();
  const Index k = set.users();
  if (l < k) fail(ErrorCode::RankDeficient, "orthogonalize: needs at least as many antennas as users");
  Eigen::BDCSVD<ComplexMatrix> svd(set.h, Eigen::ComputeThinU);
  const RealVector& s = svd.singularValues();
  if (!(s(k - 1) >= 1e-12 * s(0)) || s(0) == 0.0) fail(ErrorCode::RankDeficient, "orthogonalize: channel is rank deficient");
  return {svd.matrixU() * s.cast<Complex>().asDiagonal(), ChannelModel::Orthogonal, set.seed};
}

// Channel file: "MILAC-CHAN v1", then "K L seed model_tag", then K*L lines of
// "re im", column k holding user k.

inline constexpr const char* kChannelMagic = "MILAC-CHAN v1";

inline void save_channels(const std::string& path, const ChannelSet& set) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot open " + path + " for writing");
  out << kChannelMagic << '\n' << set.users() << ' ' << set.antennas() << ' ' << set.seed << ' ' << to_string(set.model) << '\n';
  char line[96];
  for (Index c = 0; c < set.users(); ++c) {
    for (Index r = 0; r < set.antennas(); ++r) {
      std::snprintf(line, sizeof line, "%.17g %.17g\n", set.h(r, c).real(), set.h(r, c).imag());
      out << line;
    }
  }
  if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

inline ChannelSet load_channels(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kChannelMagic) fail(ErrorCode::MalformedFile, path + ": bad magic line");
  if (!std::getline(in, line)) fail(ErrorCode::MalformedFile, path + ": missing header");
  long long k = 0;
  long long l = 0;
  std::uint64_t seed = 0;
  std::string tag;
  {
    std::istringstream header(line);
    std::string extra;
    if (!(header >> k >> l >> seed >> tag) || (header >> extra) || k < 1 || l < 1)
      fail(ErrorCode::MalformedFile, path + ": bad header line");
  }
  ChannelModel model = ChannelModel::Rayleigh;
  try {
    model = parse_channel_model(tag);
  } catch (const Error&) {
    fail(ErrorCode::MalformedFile, path + ": unknown model tag '" + tag + "'");
  }
  ComplexMatrix h(l, k);
  for (Index c = 0; c < k; ++c) {
    for (Index r = 0; r < l; ++r) {
      if (!std::getline(in, line)) fail(ErrorCode::MalformedFile, path + ": fewer than K*L entries");
      std::istringstream entry(line);
      double re = 0.0;
      double im = 0.0;
      std::string extra;
      if (!(entry >> re >> im) || (entry >> extra)) fail(ErrorCode::MalformedFile, path + ": bad entry line");
      h(r, c) = {re, im};
    }
  }
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) fail(ErrorCode::MalformedFile, path + ": more than K*L entries");
  }
  if (!h.allFinite()) fail(ErrorCode::MalformedFile, path + ": non-finite entry");
  return {std::move(h), model, seed};
}

}  // namespace milac

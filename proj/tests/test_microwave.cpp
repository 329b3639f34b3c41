#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "milac/microwave.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace milac;

namespace {

RealMatrix random_real_symmetric(Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  RealMatrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = d(rng);
  return 0.5 * (m + m.transpose());
}

ComplexMatrix antidiagonal4() {
  ComplexMatrix t = ComplexMatrix::Zero(4, 4);
  for (Index i = 0; i < 4; ++i) t(i, 3 - i) = 1.0;
  return t;
}

}  // namespace

TEST(AssembleSusceptance, Examples) {
  RealMatrix branch(2, 2);
  branch << 0, 1, 1, 0;
  RealMatrix expected(2, 2);
  expected << 1, -1, -1, 1;
  EXPECT_EQ(assemble_susceptance(branch).b, expected);

  branch << 5, 0, 0, 7;
  expected << 5, 0, 0, 7;
  EXPECT_EQ(assemble_susceptance(branch).b, expected);

  RealMatrix b3 = RealMatrix::Zero(3, 3);
  b3(0, 1) = b3(1, 0) = 2.0;
  b3(0, 2) = b3(2, 0) = 1.0;
  RealMatrix e3(3, 3);
  e3 << 3, -2, -1, -2, 2, 0, -1, 0, 1;
  EXPECT_EQ(assemble_susceptance(b3).b, e3);
}

TEST(AssembleSusceptance, RejectsAsymmetric) {
  RealMatrix branch(2, 2);
  branch << 0, 1, 2, 0;
  EXPECT_MILAC_ERROR(assemble_susceptance(branch), ErrorCode::NotSymmetric);
}

TEST(SynthesizeBranches, ExamplesAndRoundTrip) {
  RealMatrix b(2, 2);
  b << 1, -1, -1, 1;
  RealMatrix expected(2, 2);
  expected << 0, 1, 1, 0;
  EXPECT_EQ(synthesize_branches({b}), expected);
  b << 5, 0, 0, 7;
  EXPECT_EQ(synthesize_branches({b}), b);

  std::mt19937_64 rng(1);
  const RealMatrix r = random_real_symmetric(6, rng);
  EXPECT_LE((assemble_susceptance(synthesize_branches({r})).b - r).norm(), 1e-12 * r.norm());
  const RealMatrix branch = random_real_symmetric(6, rng);
  EXPECT_LE((synthesize_branches(assemble_susceptance(branch)) - branch).norm(), 1e-12 * branch.norm());
}

TEST(ScatteringFromSusceptance, Examples) {
  const auto id = scattering_from_susceptance({RealMatrix::Zero(3, 3)});
  EXPECT_LE((id.theta - ComplexMatrix::Identity(3, 3)).norm(), 1e-15);

  const auto scalar = scattering_from_susceptance({RealMatrix::Constant(1, 1, 1.0)}, ReferenceImpedance{1.0});
  EXPECT_NEAR(scalar.theta(0, 0).real(), 0.0, 1e-15);
  EXPECT_NEAR(scalar.theta(0, 0).imag(), -1.0, 1e-15);

  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const RealMatrix b = random_real_symmetric(5, rng, 0.05);
    const auto s = scattering_from_susceptance({b}, ReferenceImpedance{50.0}, 2);
    EXPECT_TRUE(validate_lossless_reciprocal(s.theta, 1e-8, 1e-10).pass);
    EXPECT_EQ(s.k, 2);
    EXPECT_EQ(s.l, 3);
  }
}

TEST(ReferenceImpedance, MustBePositive) {
  EXPECT_MILAC_ERROR(ReferenceImpedance{0.0}, ErrorCode::InvalidConfig);
  EXPECT_MILAC_ERROR(ReferenceImpedance{-50.0}, ErrorCode::InvalidConfig);
  EXPECT_EQ(ReferenceImpedance{}.ohms, 50.0);
}

TEST(SusceptanceFromScattering, Examples) {
  const ScatteringMatrix id{ComplexMatrix::Identity(3, 3), 1, 2};
  EXPECT_LE(susceptance_from_scattering(id).b.norm(), 1e-15);

  const ScatteringMatrix neg{-ComplexMatrix::Identity(3, 3), 1, 2};
  EXPECT_MILAC_ERROR(susceptance_from_scattering(neg), ErrorCode::NoFiniteRealization);

  ScatteringMatrix bad{ComplexMatrix::Identity(2, 2), 1, 1};
  bad.theta(0, 0) = 2.0;
  EXPECT_MILAC_ERROR(susceptance_from_scattering(bad), ErrorCode::InvalidScattering);
}

TEST(SusceptanceFromScattering, RoundTripUpToN20) {
  std::mt19937_64 rng(4);
  for (Index n = 1; n <= 20; ++n) {
    for (double z0 : {1.0, 50.0}) {
      const RealMatrix b0 = random_real_symmetric(n, rng, 1.0 / z0);
      const auto theta = scattering_from_susceptance({b0}, ReferenceImpedance{z0});
      const RealMatrix b1 = susceptance_from_scattering(theta, ReferenceImpedance{z0}).b;
      EXPECT_LE((b1 - b0).norm(), 1e-9 * b0.norm()) << "n=" << n << " z0=" << z0;
      const auto theta2 = scattering_from_susceptance({b1}, ReferenceImpedance{z0});
      EXPECT_LE((theta2.theta - theta.theta).norm(), 1e-9);
    }
  }
}

TEST(PartitionScattering, Examples) {
  const auto b = partition_scattering({ComplexMatrix::Identity(3, 3), 1, 2});
  EXPECT_EQ(b.t11, ComplexMatrix::Identity(1, 1));
  EXPECT_EQ(b.t21, ComplexMatrix::Zero(2, 1));
  EXPECT_EQ(b.t22, ComplexMatrix::Identity(2, 2));

  const auto a = partition_scattering({antidiagonal4(), 2, 2});
  EXPECT_EQ(a.t11, ComplexMatrix::Zero(2, 2));
  ComplexMatrix swap(2, 2);
  swap << 0, 1, 1, 0;
  EXPECT_EQ(a.t21, swap);
  EXPECT_TRUE(validate_lossless_reciprocal(antidiagonal4()).pass);

  EXPECT_MILAC_ERROR(partition_scattering({ComplexMatrix::Identity(3, 3), 2, 2}), ErrorCode::DimensionMismatch);
  EXPECT_MILAC_ERROR(partition_scattering({ComplexMatrix::Identity(3, 3), 0, 3}), ErrorCode::DimensionMismatch);
}

TEST(PartitionScattering, BlockPowerIdentity) {
  std::mt19937_64 rng(6);
  for (Index k = 1; k <= 4; ++k) {
    for (Index l : {1, 3, 8}) {
      const ComplexMatrix theta = oracle::random_symmetric_unitary(k + l, rng);
      const auto b = partition_scattering({theta, k, l});
      const ComplexMatrix sum = b.t11.adjoint() * b.t11 + b.t21.adjoint() * b.t21;
      EXPECT_LE((sum - ComplexMatrix::Identity(k, k)).norm(), 1e-9);
      EXPECT_LE((theta.topRightCorner(k, l) - b.t21.transpose()).norm(), 1e-12);
    }
  }
}

TEST(BeamformingFromScattering, Examples) {
  EXPECT_EQ(beamforming_from_scattering({ComplexMatrix::Identity(3, 3), 1, 2}).f, ComplexMatrix::Zero(2, 1));
  ComplexMatrix half(2, 2);
  half << 0, 0.5, 0.5, 0;
  EXPECT_EQ(beamforming_from_scattering({antidiagonal4(), 2, 2}).f, half);

  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const ComplexMatrix theta = oracle::random_symmetric_unitary(7, rng);
    const auto f = beamforming_from_scattering({theta, 3, 4}).f;
    EXPECT_LE(f.colwise().norm().maxCoeff(), 0.5 + 1e-9);
  }
}

TEST(ValidateLosslessReciprocal, Examples) {
  auto r = validate_lossless_reciprocal(ComplexMatrix::Identity(4, 4));
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.unitary_residual, 0.0);
  EXPECT_EQ(r.symmetric_residual, 0.0);

  ComplexMatrix d = ComplexMatrix::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 1.0;
  r = validate_lossless_reciprocal(d);
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.unitary);
  EXPECT_TRUE(r.symmetric);

  ComplexMatrix anti(2, 2);
  anti << 0, 1, -1, 0;
  r = validate_lossless_reciprocal(anti);
  EXPECT_FALSE(r.pass);
  EXPECT_TRUE(r.unitary);
  EXPECT_FALSE(r.symmetric);
}

TEST(MatrixFile, RoundTripIsBitExact) {
  TempDir dir;
  std::mt19937_64 rng(10);
  const ComplexMatrix m = oracle::gaussian(5, 3, rng);
  save_matrix(dir.file("m.txt"), m);
  EXPECT_EQ(load_matrix(dir.file("m.txt")), m);
}

TEST(MatrixFile, MalformedInputs) {
  TempDir dir;
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream(dir.file(name)) << body;
    return dir.file(name);
  };
  EXPECT_MILAC_ERROR(load_matrix(write("magic", "NOT-A-MATRIX\n1 1\n0 0\n")), ErrorCode::MalformedFile);
  EXPECT_MILAC_ERROR(load_matrix(write("short", "MILAC-MAT v1\n2 1\n1 0\n")), ErrorCode::MalformedFile);
  EXPECT_MILAC_ERROR(load_matrix(write("long", "MILAC-MAT v1\n1 1\n1 0\n2 0\n")), ErrorCode::MalformedFile);
  EXPECT_MILAC_ERROR(load_matrix(write("nan", "MILAC-MAT v1\n1 1\nnan 0\n")), ErrorCode::MalformedFile);
  EXPECT_MILAC_ERROR(load_matrix(dir.file("missing")), ErrorCode::Io);
}

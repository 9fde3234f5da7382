#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nondiss/errors.hpp"
#include "nondiss/linalg.hpp"
#include "nondiss/random.hpp"

using namespace nondiss;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

// Sorted by (re, im) so two spectra can be compared entrywise.
std::vector<Complex> sorted(std::vector<Complex> v) {
  std::sort(v.begin(), v.end(), [](Complex a, Complex b) {
    if (std::abs(a.real() - b.real()) > 1e-6) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return v;
}

}  // namespace

TEST(Antisymmetrize, SymmetricInputGivesZero) {
  Matrix w(3, 3);
  w << 1, 2, 3, 2, 4, 5, 3, 5, 6;
  EXPECT_EQ(antisymmetrize(w), Matrix::Zero(3, 3));
}

TEST(Antisymmetrize, SmallExample) {
  Matrix w(2, 2);
  w << 0, 1, 0, 0;
  Matrix want(2, 2);
  want << 0, 1, -1, 0;
  EXPECT_EQ(antisymmetrize(w), want);
}

TEST(Antisymmetrize, RandomIsSkewExactly) {
  Rng rng(7);
  const Matrix m = antisymmetrize(random_matrix(8, 8, rng));
  EXPECT_LT((m + m.transpose()).cwiseAbs().maxCoeff(), kTolerances.antisymmetry);
}

TEST(Antisymmetrize, NonSquareThrows) {
  try {
    antisymmetrize(Matrix::Zero(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShapeMismatch);
  }
}

TEST(EigGeneral, RotationGenerator) {
  Matrix a(2, 2);
  a << 0, 1, -1, 0;
  const auto ev = sorted(eig_general(a));
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_NEAR(ev[0].real(), 0.0, 1e-10);
  EXPECT_NEAR(ev[0].imag(), -1.0, 1e-10);
  EXPECT_NEAR(ev[1].imag(), 1.0, 1e-10);
}

TEST(EigGeneral, Diagonal) {
  Matrix a = Eigen::Vector2d(2.0, 3.0).asDiagonal();
  const auto ev = sorted(eig_general(a));
  EXPECT_NEAR(ev[0].real(), 2.0, 1e-12);
  EXPECT_NEAR(ev[1].real(), 3.0, 1e-12);
  EXPECT_EQ(ev[0].imag(), 0.0);
}

TEST(EigGeneral, RandomAntisymmetricSpectrumIsImaginary) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(derive_seed(11, s));
    const auto ev = eig_general(antisymmetrize(random_matrix(12, 12, rng)));
    EXPECT_EQ(ev.size(), 12u);
    EXPECT_LT(max_abs_real(ev), 1e-8) << "seed " << s;
  }
}

TEST(EigGeneral, SimilarityInvariance) {
  Rng rng(3);
  const Matrix a = random_matrix(6, 6, rng);
  // Diagonally dominant, hence well conditioned.
  const Matrix p = random_matrix(6, 6, rng) + 6.0 * Matrix::Identity(6, 6);
  const auto ea = sorted(eig_general(a));
  const auto eb = sorted(eig_general(p * a * p.inverse()));
  for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_LT(std::abs(ea[i] - eb[i]), 1e-6);
}

TEST(EigGeneral, TraceEqualsEigenvalueSum) {
  Rng rng(5);
  for (int n : {1, 2, 5, 9, 16}) {
    const Matrix a = random_matrix(n, n, rng);
    Complex sum = 0;
    for (auto z : eig_general(a)) sum += z;
    EXPECT_NEAR(sum.real(), a.trace(), 1e-7);
    EXPECT_NEAR(sum.imag(), 0.0, 1e-7);
  }
}

TEST(EigGeneral, NonSquareThrows) { EXPECT_THROW(eig_general(Matrix::Zero(2, 3)), Error); }

TEST(Kron, IdentityTimesIdentity) {
  EXPECT_EQ(kron(Matrix::Identity(2, 2), Matrix::Identity(2, 2)), Matrix::Identity(4, 4));
}

TEST(Kron, VecIdentity) {
  Rng rng(1);
  const Matrix a = random_matrix(3, 3, rng);
  const Matrix x = random_matrix(3, 2, rng);
  const Matrix b = random_matrix(2, 2, rng);
  const Vector lhs = vec(a * x * b);
  const Vector rhs = kron(b.transpose(), a) * vec(x);
  EXPECT_LT((lhs - rhs).norm(), kTolerances.kron_identity);
}

TEST(Kron, UnvecRoundTrip) {
  Rng rng(2);
  const Matrix x = random_matrix(4, 3, rng);
  EXPECT_EQ(unvec(vec(x), 4, 3), x);
  EXPECT_EQ(vec(x)(1), x(1, 0));  // column stacking
}

TEST(Expm, ZeroIsIdentity) { EXPECT_LT((expm(Matrix::Zero(3, 3)) - Matrix::Identity(3, 3)).norm(), 1e-15); }

TEST(Expm, QuarterRotation) {
  Matrix a(2, 2);
  a << 0, 1, -1, 0;
  const Matrix r = expm(a, std::numbers::pi / 2);
  Matrix want(2, 2);
  want << 0, 1, -1, 0;
  EXPECT_LT((r - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Expm, ScalarDecay) {
  Matrix a(1, 1);
  a << -1;
  EXPECT_NEAR(expm(a, 1.0)(0, 0), std::exp(-1.0), 1e-15);
}

TEST(Expm, SemigroupProperty) {
  Rng rng(9);
  const Matrix a = random_matrix(5, 5, rng);
  const Matrix lhs = expm(a, 0.7 + 1.6);
  const Matrix rhs = expm(a, 0.7) * expm(a, 1.6);
  EXPECT_LT((lhs - rhs).norm() / lhs.norm(), 1e-7);
}

TEST(Expm, AgreesWithEigendecompositionOnSymmetric) {
  Rng rng(4);
  const Matrix s = symmetrize(random_matrix(6, 6, rng));
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  const double t = 20.0 / es.eigenvalues().cwiseAbs().maxCoeff();
  const Matrix want = es.eigenvectors() * (t * es.eigenvalues()).array().exp().matrix().asDiagonal() *
                      es.eigenvectors().transpose();
  EXPECT_LT((expm(s, t) - want).norm() / want.norm(), kTolerances.expm_relative);
}

TEST(Norms, Basics) {
  EXPECT_NEAR(spectral_norm(Matrix::Identity(4, 4)), 1.0, 1e-12);
  Matrix d = Eigen::Vector2d(3.0, -5.0).asDiagonal();
  EXPECT_NEAR(spectral_norm(d), 5.0, 1e-12);
  EXPECT_NEAR(fro_norm(d), std::sqrt(34.0), 1e-12);
  Matrix m(2, 2);
  m << 1, -4, -2, 1;
  EXPECT_EQ(induced_one_norm(m), 5.0);
}

TEST(Norms, SpectralBelowFrobenius) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    const Matrix a = random_matrix(10, 10, rng);
    EXPECT_LE(spectral_norm(a), fro_norm(a) + 1e-12);
  }
}

#include <gtest/gtest.h>

#include <cmath>

#include "ecmar/matalg.hpp"
#include "helpers.hpp"

using namespace ecmar;
using testutil::max_abs;
using testutil::randn;

TEST(Kron, IdentityTimesIdentity) {
  EXPECT_EQ(kron(Matrix::Identity(2, 2), Matrix::Identity(3, 3)), Matrix::Identity(6, 6));
}

TEST(Kron, ScalarFactor) {
  const Matrix b = randn(3, 2, 1);
  Matrix s(1, 1);
  s << 2.0;
  EXPECT_EQ(kron(s, b), 2.0 * b);
}

TEST(Kron, DiagTimesSwapByHand) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 1;
  a(1, 1) = 2;
  Matrix swap(2, 2);
  swap << 0, 1, 1, 0;
  Matrix expect(4, 4);
  expect << 0, 1, 0, 0,
            1, 0, 0, 0,
            0, 0, 0, 2,
            0, 0, 2, 0;
  EXPECT_EQ(kron(a, swap), expect);
}

TEST(Kron, Bilinear) {
  SeedStream rng(3);
  for (int k = 0; k < 20; ++k) {
    const Matrix a = randn(2, 3, rng), a2 = randn(2, 3, rng), b = randn(4, 2, rng);
    const double alpha = rng.normal();
    EXPECT_LT(max_abs(kron(alpha * a + a2, b) - alpha * kron(a, b) - kron(a2, b)), 1e-12);
  }
}

TEST(Vec, IdentityStacksColumns) {
  Vector expect(4);
  expect << 1, 0, 0, 1;
  EXPECT_EQ(vec(Matrix::Identity(2, 2)), expect);
}

TEST(Vec, Roundtrip) {
  const Matrix x = randn(3, 4, 7);
  EXPECT_EQ(unvec(vec(x), 3, 4), x);
}

TEST(Vec, UnvecRejectsBadShape) { EXPECT_THROW(unvec(Vector::Zero(5), 2, 3), ConfigError); }

TEST(Vec, KroneckerIdentityOnRandomTriples) {
  SeedStream rng(11);
  for (int k = 0; k < 50; ++k) {
    const Matrix a = randn(3, 4, rng), x = randn(4, 2, rng), b = randn(5, 2, rng);
    EXPECT_LT((vec(a * x * b.transpose()) - kron(b, a) * vec(x)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(OrthComplement, AxisVector) {
  Matrix e1(2, 1);
  e1 << 1, 0;
  const Matrix c = orth_complement(e1);
  ASSERT_EQ(c.rows(), 2);
  ASSERT_EQ(c.cols(), 1);
  EXPECT_NEAR(std::abs(c(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(c(0, 0), 0.0, 1e-14);
}

TEST(OrthComplement, Diagonal) {
  Matrix v(2, 1);
  v << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  const Matrix c = orth_complement(v);
  const double s = c(0, 0) > 0 ? 1.0 : -1.0;
  EXPECT_NEAR(s * c(0, 0), 1 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(s * c(1, 0), -1 / std::sqrt(2.0), 1e-14);
}

TEST(OrthComplement, RandomAnnihilatesAndOrthonormal) {
  SeedStream rng(5);
  for (int k = 0; k < 30; ++k) {
    const Matrix m = randn(5, 2, rng);
    const Matrix n = orth_complement(m);
    ASSERT_EQ(n.cols(), 3);
    EXPECT_LT(max_abs(n.transpose() * m), 1e-12);
    EXPECT_LT(max_abs(n.transpose() * n - Matrix::Identity(3, 3)), 1e-12);
    Matrix both(5, 5);
    both << m, n;
    EXPECT_EQ(numeric_rank(both), 5);
  }
}

TEST(OrthComplement, FullRankGivesEmpty) {
  const Matrix c = orth_complement(randn(3, 3, 2));
  EXPECT_EQ(c.rows(), 3);
  EXPECT_EQ(c.cols(), 0);
}

TEST(OrthComplement, RankDeficientThrows) {
  Matrix m(3, 2);
  m << 1, 2, 1, 2, 1, 2;
  EXPECT_THROW(orth_complement(m), NumericalError);
}

TEST(InvSqrtSym, Identity) { EXPECT_LT(max_abs(inv_sqrt_sym(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)), 1e-15); }

TEST(InvSqrtSym, Diagonal) {
  Matrix s = Matrix::Zero(2, 2);
  s(0, 0) = 4;
  s(1, 1) = 9;
  const Matrix r = inv_sqrt_sym(s);
  EXPECT_NEAR(r(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(r(1, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r(0, 1), 0.0, 1e-15);
}

TEST(InvSqrtSym, RandomSpdResidual) {
  SeedStream rng(9);
  for (int k = 0; k < 20; ++k) {
    const Matrix a = randn(4, 4, rng);
    const Matrix s = a * a.transpose() + Matrix::Identity(4, 4);
    const Matrix r = inv_sqrt_sym(s);
    EXPECT_LT(max_abs(r * s * r - Matrix::Identity(4, 4)), 1e-10);
    EXPECT_LT(max_abs(r - r.transpose()), 1e-14);
  }
}

TEST(InvSqrtSym, SingularThrows) {
  Matrix s(2, 2);
  s << 1, 1, 1, 1;
  EXPECT_THROW(inv_sqrt_sym(s), NumericalError);
}

TEST(NearestKron, ExactKronecker) {
  SeedStream rng(21);
  for (int k = 0; k < 20; ++k) {
    const Matrix p = randn(3, 3, rng), q = randn(4, 4, rng);
    const KronApprox ka = nearest_kron(kron(p, q), 4, 3);
    EXPECT_LT(ka.relative_residual, 1e-12);
    EXPECT_LT(max_abs(kron(ka.a, ka.b) - kron(p, q)), 1e-10);
  }
}

TEST(NearestKron, ResidualZeroIffRearrangementRankOne) {
  SeedStream rng(22);
  for (int k = 0; k < 20; ++k) {
    const Matrix mat = kron(randn(2, 2, rng), randn(3, 3, rng)) + (k % 2 ? 0.0 : 1.0) * kron(randn(2, 2, rng), randn(3, 3, rng));
    const bool rank_one = numeric_rank(kron_rearrange(mat, 3, 2), 1e-12) == 1;
    EXPECT_EQ(nearest_kron(mat, 3, 2).relative_residual <= 1e-12, rank_one);
  }
}

TEST(NearestKron, DimensionMismatch) { EXPECT_THROW(nearest_kron(Matrix::Zero(6, 6), 4, 2), ConfigError); }

TEST(NearestKron, IsFrobeniusOptimalAgainstPerturbations) {
  SeedStream rng(23);
  const Matrix mat = randn(6, 6, rng);
  const KronApprox ka = nearest_kron(mat, 3, 2);
  const double best = (mat - kron(ka.a, ka.b)).norm();
  for (int k = 0; k < 50; ++k) {
    const Matrix a = ka.a + 1e-3 * randn(2, 2, rng), b = ka.b + 1e-3 * randn(3, 3, rng);
    EXPECT_GE((mat - kron(a, b)).norm(), best - 1e-12);
  }
}

TEST(SubspaceDistance, SameSpanDifferentBasis) {
  const Matrix b = randn(5, 2, 31);
  Matrix g(2, 2);
  g << 2, 1, -1, 3;
  EXPECT_LT(subspace_distance(Subspace(b), Subspace(b * g)), 1e-12);
}

TEST(SubspaceDistance, OrthogonalAxes) {
  EXPECT_NEAR(subspace_distance(Subspace(Matrix::Identity(2, 2).col(0)), Subspace(Matrix::Identity(2, 2).col(1))), 1.0,
              1e-14);
}

TEST(SubspaceDistance, FortyFiveDegrees) {
  Matrix d(2, 1);
  d << 1, 1;
  EXPECT_NEAR(subspace_distance(Subspace(Matrix::Identity(2, 2).col(0)), Subspace(d)), std::sin(M_PI / 4), 1e-12);
}

TEST(SubspaceDistance, SymmetricAndBasisInvariant) {
  SeedStream rng(33);
  for (int k = 0; k < 20; ++k) {
    const Matrix a = randn(6, 3, rng), b = randn(6, 3, rng), g = randn(3, 3, rng);
    const double d = subspace_distance(Subspace(a), Subspace(b));
    EXPECT_NEAR(d, subspace_distance(Subspace(b), Subspace(a)), 1e-12);
    EXPECT_NEAR(d, subspace_distance(Subspace(a * g), Subspace(b)), 1e-12);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0 + 1e-12);
  }
}

TEST(SubspaceDistance, AmbientMismatch) {
  EXPECT_THROW(subspace_distance(Subspace(randn(3, 1, 1)), Subspace(randn(4, 1, 1))), ConfigError);
}

TEST(SubspaceDistance, RankDeficientBasisRejected) {
  Matrix b(3, 2);
  b << 1, 2, 1, 2, 1, 2;
  EXPECT_THROW(Subspace{b}, NumericalError);
}

TEST(SymGenEig, MatchesGeneralSolver) {
  SeedStream rng(41);
  const Matrix a0 = randn(4, 4, rng);
  const Matrix a = a0 * a0.transpose();
  const Matrix b = testutil::random_spd(4, rng);
  const GenEig ge = sym_gen_eig(a, b, "test");
  EXPECT_LT(max_abs(ge.vectors.transpose() * b * ge.vectors - Matrix::Identity(4, 4)), 1e-10);
  EXPECT_LT(max_abs(a * ge.vectors - b * ge.vectors * ge.values.asDiagonal()), 1e-9);
  for (int i = 1; i < 4; ++i) EXPECT_GE(ge.values(i - 1), ge.values(i));
}

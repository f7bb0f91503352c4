#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>

#include "ecmar/dgp.hpp"
#include "ecmar/inference.hpp"
#include "helpers.hpp"

using namespace ecmar;
using testutil::max_abs;
using testutil::randn;

namespace {

// Tail integral of the chi-square density, split at x so the finite piece
// uses tanh-sinh and the infinite piece Gauss-Kronrod.
double chi2_tail_quadrature(double x, int df) {
  const double k = 0.5 * df;
  const double lognorm = -k * std::log(2.0) - std::lgamma(k);
  auto pdf = [&](double t) { return t <= 0 ? 0.0 : std::exp(lognorm + (k - 1) * std::log(t) - 0.5 * t); };
  const double inf = std::numeric_limits<double>::infinity();
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(pdf, x, inf, 15, 1e-14);
}

double chi2_cdf_quadrature(double x, int df) {
  const double k = 0.5 * df;
  const double lognorm = -k * std::log(2.0) - std::lgamma(k);
  auto pdf = [&](double t) { return t <= 0 ? 0.0 : std::exp(lognorm + (k - 1) * std::log(t) - 0.5 * t); };
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(pdf, 0.0, x, 1e-14);
}

struct Fixture {
  MatrixSeries series;
  FitResult fit;
  FitContext ctx;
};

Fixture fixed_design_fit(int T, std::uint64_t seed) {
  Fixture f;
  f.series = simulate(fixed_test_design(), T, seed);
  f.fit = fit_alternating(f.series, 2, 2, 1);
  f.ctx = make_fit_context(f.series, f.fit.params);
  return f;
}

Matrix row(std::initializer_list<double> v) {
  Matrix r(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) r(i++, 0) = x;
  return r;
}

}  // namespace

TEST(Chi2, Examples) {
  for (int k = 1; k <= 10; ++k) EXPECT_EQ(chi2_sf(0.0, k), 1.0);
  EXPECT_NEAR(chi2_sf(3.8415, 1), 0.05, 1e-4);
  EXPECT_NEAR(chi2_sf(4.60517, 2), std::exp(-4.60517 / 2), 1e-14);
  EXPECT_NEAR(chi2_sf(4.60517, 2), 0.1, 1e-6);
}

TEST(Chi2, DegenerateDf) {
  EXPECT_EQ(chi2_sf(0.0, 0), 1.0);
  EXPECT_EQ(chi2_sf(0.3, 0), 0.0);
  EXPECT_THROW(chi2_sf(-1.0, 2), ConfigError);
}

TEST(Chi2, AgreesWithQuadrature) {
  for (int df : {1, 2, 3, 5, 8, 12}) {
    for (int i = 0; i < 20; ++i) {
      const double x = 0.25 + 1.5 * i;
      const double sf = chi2_sf(x, df);
      EXPECT_NEAR(sf, chi2_tail_quadrature(x, df), 1e-8) << "df=" << df << " x=" << x;
      if (df >= 2) EXPECT_NEAR(1.0 - sf, chi2_cdf_quadrature(x, df), 1e-8) << "df=" << df << " x=" << x;
    }
  }
}

TEST(Chi2, StrictlyDecreasing) {
  for (int df : {1, 3, 7}) {
    double prev = chi2_sf(0.0, df);
    for (int i = 1; i <= 200; ++i) {
      const double cur = chi2_sf(0.2 * i, df);
      EXPECT_LT(cur, prev);
      prev = cur;
    }
  }
}

TEST(LrTests, IdentityRestrictionsAreFree) {
  const Fixture f = fixed_design_fit(300, 1);
  for (Side s : {Side::row, Side::column}) {
    const Eigen::Index d = s == Side::row ? 4 : 3;
    const TestResult u = lr_uniform(f.ctx, s, Matrix::Identity(d, d));
    EXPECT_NEAR(u.statistic, 0.0, 1e-8);
    EXPECT_EQ(u.df, 0);
    EXPECT_EQ(u.p_value, u.statistic == 0.0 ? 1.0 : 0.0);
    const TestResult a = lr_adjustment(f.ctx, s, Matrix::Identity(d, d));
    EXPECT_NEAR(a.statistic, 0.0, 1e-8);
    EXPECT_EQ(a.df, 0);
  }
}

TEST(LrTests, SelfMembership) {
  const Fixture f = fixed_design_fit(300, 2);
  for (Side s : {Side::row, Side::column}) {
    const RrrSolution sol = solve_rrr(f.ctx.moments(s), f.ctx.rank(s));
    const TestResult t = lr_known_vectors(f.ctx, s, sol.gamma_hat.col(0));
    EXPECT_NEAR(t.statistic, 0.0, 1e-6);
    EXPECT_EQ(t.df, static_cast<int>(f.ctx.moments(s).s11.rows()) - f.ctx.rank(s));
  }
}

TEST(LrTests, NestingMonotonicity) {
  SeedStream rng(3);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Fixture f = fixed_design_fit(250, 10 + seed);
    const Matrix hbig = randn(4, 3, rng);
    const Matrix hsmall = hbig * randn(3, 2, rng);
    const TestResult big = lr_uniform(f.ctx, Side::row, hbig), small = lr_uniform(f.ctx, Side::row, hsmall);
    EXPECT_GE(small.statistic, big.statistic - 1e-8);
    const TestResult abig = lr_adjustment(f.ctx, Side::row, hbig), asmall = lr_adjustment(f.ctx, Side::row, hsmall);
    EXPECT_GE(asmall.statistic, abig.statistic - 1e-8);
    EXPECT_EQ(small.df, 2 * 2);
    EXPECT_EQ(big.df, 2 * 1);
  }
}

TEST(LrTests, ClampStaysSmall) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Fixture f = fixed_design_fit(200, 40 + seed);
    for (Side s : {Side::row, Side::column}) {
      const Eigen::Index d = f.ctx.moments(s).s11.rows();
      for (Eigen::Index i = 0; i < d; ++i) {
        const TestResult t = weak_exogeneity(f.ctx, s, i);
        EXPECT_GE(t.statistic, 0.0);
        EXPECT_LE(t.clamped, 1e-6);
        EXPECT_EQ(t.p_value, chi2_sf(t.statistic, t.df));
      }
      const TestResult k = lr_uniform(f.ctx, s, Matrix::Identity(d, d));
      EXPECT_LE(k.clamped, 1e-6);
    }
  }
}

TEST(LrTests, TrueNullsModerateFalseNullsReject) {
  const Fixture f = fixed_design_fit(1000, 5);
  // true: row 1 of tau is zero; false: row 3 of tau is zero
  EXPECT_GT(weak_exogeneity(f.ctx, Side::row, 0).p_value, 1e-3);
  EXPECT_LT(weak_exogeneity(f.ctx, Side::row, 2).p_value, 1e-6);
  // true: [1 1 0] theta = 0; false: [1 1.5 0] theta = 0
  EXPECT_GT(lr_uniform(f.ctx, Side::column, basis_from_constraints(row({1, 1, 0}))).p_value, 1e-3);
  EXPECT_LT(lr_uniform(f.ctx, Side::column, basis_from_constraints(row({1, 1.5, 0}))).p_value, 1e-6);
  // true: (0,-.5,-.5,1)' in span(gamma); false: (0,-.5,-1,1)'
  EXPECT_GT(lr_known_vectors(f.ctx, Side::row, row({0, -0.5, -0.5, 1})).p_value, 1e-3);
  EXPECT_LT(lr_known_vectors(f.ctx, Side::row, row({0, -0.5, -1, 1})).p_value, 1e-6);
}

TEST(LrTests, DegreesOfFreedom) {
  const Fixture f = fixed_design_fit(200, 6);
  EXPECT_EQ(lr_uniform(f.ctx, Side::column, basis_from_constraints(row({1, 1, 0}))).df, 2);
  EXPECT_EQ(lr_known_vectors(f.ctx, Side::row, row({0, -0.5, -0.5, 1})).df, 2);
  EXPECT_EQ(weak_exogeneity(f.ctx, Side::row, 0).df, 2);
  EXPECT_EQ(weak_exogeneity(f.ctx, Side::column, 0).df, 2);
}

TEST(LrTests, ExclusionBasis) {
  const Matrix h = exclusion_basis(4, 1);
  ASSERT_EQ(h.cols(), 3);
  EXPECT_EQ(h.row(1).cwiseAbs().sum(), 0.0);
  EXPECT_EQ(h.transpose() * h, Matrix::Identity(3, 3));
  EXPECT_THROW(exclusion_basis(4, 4), ConfigError);
  EXPECT_THROW(exclusion_basis(4, -1), ConfigError);
}

TEST(LrTests, RankDeficientKnownVector) {
  const Fixture f = fixed_design_fit(200, 7);
  EXPECT_THROW(lr_known_vectors(f.ctx, Side::row, Matrix::Zero(4, 1)), ConfigError);
}

TEST(LrRefit, IdentityRestrictionGivesZero) {
  const Fixture f = fixed_design_fit(300, 8);
  const SeriesLayout lay(f.series, 1);
  const TestResult t = lr_refit(lay, f.fit, Side::row, AdjustmentRestriction{Matrix::Identity(4, 4)});
  EXPECT_LT(t.statistic, 1e-4);
  EXPECT_EQ(t.df, 0);
}

TEST(LrRefit, FalseNullRejects) {
  const Fixture f = fixed_design_fit(500, 9);
  const SeriesLayout lay(f.series, 1);
  const TestResult t = lr_refit(lay, f.fit, Side::row, AdjustmentRestriction{exclusion_basis(4, 2)});
  EXPECT_LT(t.p_value, 1e-6);
  const TestResult ok = lr_refit(lay, f.fit, Side::row, AdjustmentRestriction{exclusion_basis(4, 0)});
  EXPECT_GT(ok.p_value, 1e-3);
}

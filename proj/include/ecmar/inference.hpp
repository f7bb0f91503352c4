#pragma once

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <string>
#include <variant>

#include "ecmar/estimator.hpp"
#include "ecmar/rrr.hpp"

namespace ecmar {

// Upper tail of the chi-square distribution. df = 0 is the degenerate
// point mass at zero.
inline double chi2_sf(double x, int df) {
  if (!(x >= 0.0)) throw ConfigError("chi2_sf: statistic must be nonnegative");
  if (df < 0) throw ConfigError("chi2_sf: negative degrees of freedom");
  if (df == 0) return x == 0.0 ? 1.0 : 0.0;
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

enum class TestKind { uniform, known_vectors, adjustment };

inline const char* to_string(TestKind k) {
  switch (k) {
    case TestKind::uniform: return "uniform";
    case TestKind::known_vectors: return "known_vector";
    case TestKind::adjustment: return "adjustment";
  }
  return "?";
}

inline constexpr double kStatClamp = 1e-8;

struct TestResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  Vector restricted_eigenvalues;
  Vector unrestricted_eigenvalues;
  Vector aux_eigenvalues;  // known-vector directions only
  Side side = Side::row;
  TestKind kind = TestKind::uniform;
  double clamped = 0.0;   // magnitude of a small negative statistic set to zero
  double n = 0.0;         // pooled observation count
  Matrix restricted_coint;
  Matrix restricted_adjustment;
};

namespace detail {

inline TestKind kind_of(const Restriction& r) {
  if (std::holds_alternative<UniformRestriction>(r)) return TestKind::uniform;
  if (std::holds_alternative<KnownVectors>(r)) return TestKind::known_vectors;
  return TestKind::adjustment;
}

inline void finish_statistic(TestResult& out, double raw) {
  if (std::isnan(raw)) throw NumericalError("likelihood-ratio statistic is NaN");
  if (raw < 0.0) {
    if (raw < -kStatClamp)
      throw NumericalError("likelihood-ratio statistic " + std::to_string(raw) +
                           " is negative beyond the clamp tolerance");
    out.clamped = -raw;
    raw = 0.0;
  }
  out.statistic = raw;
  out.p_value = chi2_sf(out.statistic, out.df);
}

}  // namespace detail

// LR test of a restriction on one side's cointegration or adjustment matrix,
// conditional on the opposite side's converged estimates in `ctx`.
inline TestResult lr_test(const FitContext& ctx, Side side, const Restriction& restriction) {
  const PooledMoments& mom = ctx.moments(side);
  const int r = ctx.rank(side);
  const Eigen::Index d = mom.s11.rows();
  const RrrSolution un = solve_rrr(mom, r);
  const RestrictedRrr re = solve_rrr_restricted(mom, r, restriction);
  TestResult out;
  out.side = side;
  out.kind = detail::kind_of(restriction);
  out.n = mom.n;
  out.df = restriction_df(restriction, d, r);
  out.unrestricted_eigenvalues = un.eigenvalues;
  out.restricted_eigenvalues = re.eigenvalues;
  out.aux_eigenvalues = re.aux_eigenvalues;
  out.restricted_coint = re.gamma;
  out.restricted_adjustment = re.tau;
  detail::finish_statistic(out, mom.n * (re.loglik_sum - un.loglik_sum(r)));
  return out;
}

inline TestResult lr_uniform(const FitContext& ctx, Side side, const Matrix& h) {
  return lr_test(ctx, side, UniformRestriction{h});
}

inline TestResult lr_known_vectors(const FitContext& ctx, Side side, const Matrix& known) {
  return lr_test(ctx, side, KnownVectors{known});
}

inline TestResult lr_adjustment(const FitContext& ctx, Side side, const Matrix& h) {
  return lr_test(ctx, side, AdjustmentRestriction{h});
}

// H = identity with column `index` removed: row `index` of the adjustment
// matrix is zero.
inline Matrix exclusion_basis(Eigen::Index d, Eigen::Index index) {
  if (index < 0 || index >= d)
    throw ConfigError("exclusion_basis: index " + std::to_string(index) + " out of range for dimension " +
                      std::to_string(d));
  Matrix h(d, d - 1);
  Eigen::Index c = 0;
  for (Eigen::Index j = 0; j < d; ++j)
    if (j != index) h.col(c++) = Matrix::Identity(d, d).col(j);
  return h;
}

inline TestResult weak_exogeneity(const FitContext& ctx, Side side, Eigen::Index index) {
  return lr_adjustment(ctx, side, exclusion_basis(ctx.moments(side).s00.rows(), index));
}

// Restrictions of the form R' x = 0 written as x = H psi with H an
// orthonormal basis of the complement of span(R).
inline Matrix basis_from_constraints(const Matrix& r) { return orth_complement(r); }

// Full re-alternation variant: fit the model again with the restriction
// imposed in every iteration and compare maximized system log-likelihoods.
inline TestResult lr_refit(const SeriesLayout& lay, const FitResult& unrestricted, Side side,
                           const Restriction& restriction, FitOptions opts = {}) {
  const EccMarParams& par = unrestricted.params;
  opts.restriction = SideRestriction{side, restriction};
  const FitResult rf = fit_alternating(lay, par.r1, par.r2, opts);
  const int r = side == Side::row ? par.r1 : par.r2;
  const Eigen::Index d = side == Side::row ? par.m : par.n;
  TestResult out;
  out.side = side;
  out.kind = detail::kind_of(restriction);
  out.n = lay.neff();
  out.df = restriction_df(restriction, d, r);
  out.restricted_coint = side == Side::row ? rf.params.gamma : rf.params.theta;
  out.restricted_adjustment = side == Side::row ? rf.params.tau : rf.params.phi;
  double raw = 2.0 * (unrestricted.loglik() - rf.loglik());
  // Two separate local searches can leave the restricted maximum marginally
  // above the unrestricted one; record and zero it.
  if (raw < 0.0) {
    out.clamped = -raw;
    raw = 0.0;
  }
  detail::finish_statistic(out, raw);
  return out;
}

}  // namespace ecmar

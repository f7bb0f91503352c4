#pragma once

#include <cmath>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "ecmar/error.hpp"
#include "ecmar/matalg.hpp"

namespace ecmar {

// Pooled observations stored column-wise: column k of y, x and z belong to
// the same pooled index (t, j). z has zero rows when there are no short-run
// regressors.
struct PooledSample {
  Matrix y;  // d_y x N, dependents
  Matrix x;  // d_x x N, levels
  Matrix z;  // d_z x N, short-run regressors

  Eigen::Index count() const { return y.cols(); }
  bool has_shortrun() const { return z.rows() > 0; }

  void validate() const {
    if (x.cols() != y.cols() || (z.rows() > 0 && z.cols() != y.cols()))
      throw ConfigError("PooledSample: y, x and z must have the same number of observations");
    if (y.cols() == 0) throw DataError("PooledSample: empty sample");
    if (y.cols() <= x.rows() + z.rows())
      throw DataError("PooledSample: too few pooled observations for the number of regressors");
  }
};

struct PooledMoments {
  Matrix s00;
  Matrix s01;
  Matrix s10;
  Matrix s11;
  double n = 0.0;
};

struct RrrSolution {
  Vector eigenvalues;     // descending, in [0, 1)
  Matrix vectors;         // d_x x d_x, V' S11 V = I
  Matrix gamma_hat;       // d_x x r
  Matrix tau_hat;         // d_y x r
  Vector loglik_terms;    // log(1 - lambda_i), all i
  double loglik_sum(Eigen::Index r) const { return loglik_terms.head(r).sum(); }
};

inline constexpr double kEigenCeiling = 1.0 - 1e-14;

// Frisch-Waugh residuals of y and x after pooled regression on z.
struct Residuals {
  Matrix r0;
  Matrix r1;
};

inline Residuals partial_out(const PooledSample& s) {
  if (!s.has_shortrun()) return {s.y, s.x};
  const double nobs = static_cast<double>(s.count());
  const Matrix mzz = s.z * s.z.transpose() / nobs;
  require_pd(mzz, "partial_out: short-run moment M_zz (collinear short-run regressors)");
  const Eigen::LLT<Matrix> llt(symmetrize(mzz));
  const Matrix by = llt.solve(s.z * s.y.transpose() / nobs);  // d_z x d_y
  const Matrix bx = llt.solve(s.z * s.x.transpose() / nobs);
  return {s.y - by.transpose() * s.z, s.x - bx.transpose() * s.z};
}

inline PooledMoments pooled_moments(const Matrix& r0, const Matrix& r1) {
  if (r0.cols() != r1.cols()) throw ConfigError("pooled_moments: unequal sample lengths");
  if (r0.cols() == 0) throw DataError("pooled_moments: empty sample");
  PooledMoments mom;
  mom.n = static_cast<double>(r0.cols());
  mom.s00 = symmetrize(r0 * r0.transpose() / mom.n);
  mom.s11 = symmetrize(r1 * r1.transpose() / mom.n);
  mom.s01 = r0 * r1.transpose() / mom.n;
  mom.s10 = mom.s01.transpose();
  return mom;
}

inline PooledMoments pooled_moments(const Residuals& res) { return pooled_moments(res.r0, res.r1); }

// tau = S01 gamma (gamma' S11 gamma)^{-1}.
inline Matrix adjustment_from(const PooledMoments& mom, const Matrix& gamma) {
  if (gamma.cols() == 0) return Matrix::Zero(mom.s01.rows(), 0);
  const Matrix g11 = gamma.transpose() * mom.s11 * gamma;
  require_pd(g11, "adjustment_from: gamma' S11 gamma");
  return mom.s01 * gamma * symmetrize(g11).llt().solve(Matrix::Identity(gamma.cols(), gamma.cols()));
}

// |lambda S11 - S10 S00^{-1} S01| = 0 via Cholesky reduction of S11.
inline RrrSolution solve_rrr(const PooledMoments& mom, Eigen::Index r) {
  const Eigen::Index dx = mom.s11.rows();
  if (r < 0 || r > dx) throw ConfigError("solve_rrr: rank out of range");
  const Matrix s00inv = inverse_spd(mom.s00, "solve_rrr: S00");
  const GenEig ge = sym_gen_eig(mom.s10 * s00inv * mom.s01, mom.s11, "solve_rrr: S11");
  RrrSolution sol;
  sol.eigenvalues = ge.values.cwiseMax(0.0).cwiseMin(kEigenCeiling);
  sol.vectors = ge.vectors;
  fix_signs(sol.vectors);
  sol.loglik_terms = (1.0 - sol.eigenvalues.array()).log();
  sol.gamma_hat = sol.vectors.leftCols(r);
  sol.tau_hat = mom.s01 * sol.gamma_hat;
  return sol;
}

// Residual covariance of r0 - tau gamma' r1.
inline Matrix residual_covariance(const PooledMoments& mom, const Matrix& tau, const Matrix& gamma) {
  const Matrix pi = tau * gamma.transpose();
  return symmetrize(mom.s00 - pi * mom.s10 - mom.s01 * pi.transpose() + pi * mom.s11 * pi.transpose());
}

// (M_yz - tau gamma' M_xz) M_zz^{-1}.
inline Matrix shortrun_from(const PooledSample& s, const Matrix& tau, const Matrix& gamma) {
  if (!s.has_shortrun()) throw ConfigError("shortrun_from: sample has no short-run regressors");
  const double nobs = static_cast<double>(s.count());
  const Matrix mzz = s.z * s.z.transpose() / nobs;
  require_pd(mzz, "shortrun_from: M_zz");
  const Matrix myz = s.y * s.z.transpose() / nobs;
  const Matrix mxz = s.x * s.z.transpose() / nobs;
  Matrix lhs = myz;
  if (gamma.cols() > 0) lhs -= tau * (gamma.transpose() * mxz);
  return symmetrize(mzz).llt().solve(lhs.transpose()).transpose();
}

// Re-normalization for reporting: gamma -> gamma A^{-1} with A the leading
// r x r block, tau -> tau A', leaving tau gamma' unchanged.
inline bool normalize_leading_block(Matrix& gamma, Matrix& tau) {
  const Eigen::Index r = gamma.cols();
  if (r == 0) return true;
  const Matrix a = gamma.topRows(r);
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) return false;
  gamma = gamma * lu.inverse();
  tau = tau * a.transpose();
  return true;
}

// ---------------------------------------------------------------------------
// Restricted reduced-rank problems

// gamma = H phi.
struct UniformRestriction {
  Matrix h;
};
// gamma = (g, psi) with g known.
struct KnownVectors {
  Matrix g;
};
// tau = H psi.
struct AdjustmentRestriction {
  Matrix h;
};

using Restriction = std::variant<UniformRestriction, KnownVectors, AdjustmentRestriction>;

struct RestrictedRrr {
  Vector eigenvalues;      // restricted (concentrated) eigenvalues, descending
  Vector aux_eigenvalues;  // rho_i of the known-vector step; empty otherwise
  Matrix gamma;            // d_x x r, restricted cointegration matrix
  Matrix tau;              // d_y x r, restricted adjustment matrix
  double loglik_sum = 0.0; // composite sum of log(1 - .) comparable to sum_{i<=r} log(1 - lambda_i)
};

namespace detail {

inline double log1m_sum(const Vector& v, Eigen::Index k) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) s += std::log(1.0 - std::min(std::max(v(i), 0.0), kEigenCeiling));
  return s;
}

inline Vector clip_eigs(const Vector& v) { return v.cwiseMax(0.0).cwiseMin(kEigenCeiling); }

inline void require_full_column_rank(const Matrix& a, const std::string& what) {
  if (!full_column_rank(a)) throw ConfigError(what + " must have full column rank");
}

inline RestrictedRrr solve_uniform(const PooledMoments& mom, Eigen::Index r, const Matrix& h) {
  const Eigen::Index d = mom.s11.rows();
  if (h.rows() != d) throw ConfigError("uniform restriction: H must have " + std::to_string(d) + " rows");
  require_full_column_rank(h, "uniform restriction: H");
  if (h.cols() < r) throw ConfigError("uniform restriction: H needs at least r columns");
  const Matrix s00inv = inverse_spd(mom.s00, "uniform restriction: S00");
  const Matrix a = h.transpose() * mom.s10 * s00inv * mom.s01 * h;
  const GenEig ge = sym_gen_eig(a, h.transpose() * mom.s11 * h, "uniform restriction: H' S11 H");
  Matrix v = ge.vectors.leftCols(r);
  fix_signs(v);
  RestrictedRrr out;
  out.eigenvalues = clip_eigs(ge.values);
  out.gamma = h * v;
  out.tau = mom.s01 * out.gamma;
  out.loglik_sum = log1m_sum(out.eigenvalues, r);
  return out;
}

inline RestrictedRrr solve_known(const PooledMoments& mom, Eigen::Index r, const Matrix& g) {
  const Eigen::Index d = mom.s11.rows();
  if (g.rows() != d) throw ConfigError("known-vector restriction: g must have " + std::to_string(d) + " rows");
  require_full_column_rank(g, "known-vector restriction: g");
  const Eigen::Index rg = g.cols();
  if (rg > r) throw ConfigError("known-vector restriction: more known vectors than the rank");
  const Matrix ggi = inverse_spd(g.transpose() * mom.s11 * g, "known-vector restriction: g' S11 g");
  // Auxiliary problem for the known directions.
  const Matrix aux = mom.s01 * g * ggi * g.transpose() * mom.s10;
  const GenEig rho = sym_gen_eig(aux, mom.s00, "known-vector restriction: S00");
  // Concentrate g' r1 out of r0 and g_perp' r1.
  const Matrix gp = orth_complement(g);
  const Matrix s1g = mom.s11 * g;  // d x rg
  const Matrix s00g = symmetrize(mom.s00 - mom.s01 * g * ggi * g.transpose() * mom.s10);
  const Matrix s11g = symmetrize(gp.transpose() * (mom.s11 - s1g * ggi * s1g.transpose()) * gp);
  const Matrix s10g = gp.transpose() * (mom.s10 - s1g * ggi * g.transpose() * mom.s10);
  const Matrix s00ginv = inverse_spd(s00g, "known-vector restriction: concentrated S00");
  RestrictedRrr out;
  out.aux_eigenvalues = clip_eigs(rho.values.head(rg));
  const Eigen::Index rest = r - rg;
  Matrix v;
  if (gp.cols() > 0) {
    const GenEig ge = sym_gen_eig(s10g * s00ginv * s10g.transpose(), s11g,
                                  "known-vector restriction: concentrated S11");
    out.eigenvalues = clip_eigs(ge.values);
    v = ge.vectors.leftCols(rest);
    fix_signs(v);
  } else {
    out.eigenvalues = Vector();
    v = Matrix::Zero(0, 0);
  }
  out.gamma.resize(d, r);
  out.gamma.leftCols(rg) = g;
  if (rest > 0) out.gamma.rightCols(rest) = gp * v;
  out.tau = adjustment_from(mom, out.gamma);
  out.loglik_sum = log1m_sum(out.aux_eigenvalues, rg) + log1m_sum(out.eigenvalues, rest);
  return out;
}

inline RestrictedRrr solve_adjustment(const PooledMoments& mom, Eigen::Index r, const Matrix& h) {
  const Eigen::Index dy = mom.s00.rows();
  if (h.rows() != dy) throw ConfigError("adjustment restriction: H must have " + std::to_string(dy) + " rows");
  require_full_column_rank(h, "adjustment restriction: H");
  if (h.cols() < r) throw ConfigError("adjustment restriction: H needs at least r columns");
  const Matrix hp = orth_complement(h);
  // Condition h' r0 on the h_perp' r0 block.
  Matrix saa = h.transpose() * mom.s00 * h;
  Matrix sa1 = h.transpose() * mom.s01;
  Matrix s11 = mom.s11;
  if (hp.cols() > 0) {
    const Matrix sbb_inv = inverse_spd(hp.transpose() * mom.s00 * hp, "adjustment restriction: S_bb");
    const Matrix sab = h.transpose() * mom.s00 * hp;
    const Matrix sb1 = hp.transpose() * mom.s01;
    saa = saa - sab * sbb_inv * sab.transpose();
    sa1 = sa1 - sab * sbb_inv * sb1;
    s11 = s11 - sb1.transpose() * sbb_inv * sb1;
  }
  saa = symmetrize(saa);
  s11 = symmetrize(s11);
  const Matrix saa_inv = inverse_spd(saa, "adjustment restriction: conditioned S_aa");
  const GenEig ge = sym_gen_eig(sa1.transpose() * saa_inv * sa1, s11,
                                "adjustment restriction: conditioned S11");
  Matrix v = ge.vectors.leftCols(r);
  fix_signs(v);
  RestrictedRrr out;
  out.eigenvalues = clip_eigs(ge.values);
  out.gamma = v;
  // h' tau = (h'h) psi and psi-tilde = S_a1.b gamma.
  const Matrix hth = h.transpose() * h;
  out.tau = h * hth.ldlt().solve(sa1 * v);
  out.loglik_sum = log1m_sum(out.eigenvalues, r);
  return out;
}

}  // namespace detail

inline RestrictedRrr solve_rrr_restricted(const PooledMoments& mom, Eigen::Index r,
                                          const Restriction& restriction) {
  if (r < 0 || r > mom.s11.rows()) throw ConfigError("solve_rrr_restricted: rank out of range");
  return std::visit(
      [&](const auto& rs) -> RestrictedRrr {
        using T = std::decay_t<decltype(rs)>;
        if constexpr (std::is_same_v<T, UniformRestriction>) return detail::solve_uniform(mom, r, rs.h);
        else if constexpr (std::is_same_v<T, KnownVectors>) return detail::solve_known(mom, r, rs.g);
        else return detail::solve_adjustment(mom, r, rs.h);
      },
      restriction);
}

// Number of restrictions imposed, given the ambient dimension d and rank r.
inline int restriction_df(const Restriction& restriction, Eigen::Index d, Eigen::Index r) {
  return std::visit(
      [&](const auto& rs) -> int {
        using T = std::decay_t<decltype(rs)>;
        if constexpr (std::is_same_v<T, KnownVectors>) return static_cast<int>((d - r) * rs.g.cols());
        else return static_cast<int>(r * (d - rs.h.cols()));
      },
      restriction);
}

// ---------------------------------------------------------------------------
// Vector error-correction samples (pooled count 1)

// Builds (dx_t, x_{t-1}, [dx_{t-1}; ...; dx_{t-p+1}]) from a k x T series
// matrix, using t = p .. T-1 (zero-based).
inline PooledSample vecm_sample(const Matrix& series, int p) {
  const Eigen::Index k = series.rows();
  const Eigen::Index T = series.cols();
  if (p < 1) throw ConfigError("vecm_sample: lag order must be at least 1");
  const Eigen::Index neff = T - p;
  if (neff <= k * p) throw DataError("vecm_sample: insufficient observations for the lag order");
  PooledSample s;
  s.y.resize(k, neff);
  s.x.resize(k, neff);
  s.z.resize(k * (p - 1), neff);
  for (Eigen::Index c = 0; c < neff; ++c) {
    const Eigen::Index t = c + p;
    s.y.col(c) = series.col(t) - series.col(t - 1);
    s.x.col(c) = series.col(t - 1);
    for (int i = 1; i < p; ++i)
      s.z.block((i - 1) * k, c, k, 1) = series.col(t - i) - series.col(t - i - 1);
  }
  return s;
}

struct VecmFit {
  RrrSolution solution;
  PooledMoments moments;
  Matrix beta;   // k x r
  Matrix alpha;  // k x r
  Matrix shortrun;  // k x k(p-1)
};

// Rank-r Johansen fit of a vector series (k x T, columns are time).
inline VecmFit fit_vecm(const Matrix& series, int r, int p) {
  const PooledSample s = vecm_sample(series, p);
  s.validate();
  VecmFit out;
  out.moments = pooled_moments(partial_out(s));
  out.solution = solve_rrr(out.moments, r);
  out.beta = out.solution.gamma_hat;
  out.alpha = out.solution.tau_hat;
  if (s.has_shortrun()) out.shortrun = shortrun_from(s, out.alpha, out.beta);
  return out;
}

}  // namespace ecmar

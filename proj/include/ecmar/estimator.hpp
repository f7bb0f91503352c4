#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ecmar/dgp.hpp"
#include "ecmar/error.hpp"
#include "ecmar/matalg.hpp"
#include "ecmar/rrr.hpp"

namespace ecmar {

enum class Side { row, column };

inline const char* to_string(Side s) { return s == Side::row ? "row" : "column"; }

// Time-stacked views of a series for lag order p, over the effective sample
// t = p .. T-1 (zero-based; neff = T - p terms).
//   v_* : vertical stacks [A_p; A_{p+1}; ...] of m x n blocks, (m neff) x n
//   h_* : vertical stacks of the transposes, (n neff) x m
class SeriesLayout {
 public:
  SeriesLayout(const MatrixSeries& series, int p) : m_(series.m), n_(series.n), p_(p) {
    series.validate();
    if (p < 1) throw ConfigError("SeriesLayout: lag order must be at least 1");
    neff_ = series.length() - p;
    if (neff_ < 2) throw DataError("SeriesLayout: series too short for the lag order");
    const auto block = [&](int t) -> const Matrix& { return series.data[static_cast<std::size_t>(t)]; };
    v_dx_.resize(static_cast<Eigen::Index>(m_) * neff_, n_);
    v_lev_.resize(static_cast<Eigen::Index>(m_) * neff_, n_);
    h_dx_.resize(static_cast<Eigen::Index>(n_) * neff_, m_);
    h_lev_.resize(static_cast<Eigen::Index>(n_) * neff_, m_);
    v_lag_.assign(static_cast<std::size_t>(p - 1), Matrix(static_cast<Eigen::Index>(m_) * neff_, n_));
    h_lag_.assign(static_cast<std::size_t>(p - 1), Matrix(static_cast<Eigen::Index>(n_) * neff_, m_));
    for (int c = 0; c < neff_; ++c) {
      const int t = c + p;
      const Matrix d = block(t) - block(t - 1);
      v_dx_.middleRows(static_cast<Eigen::Index>(c) * m_, m_) = d;
      h_dx_.middleRows(static_cast<Eigen::Index>(c) * n_, n_) = d.transpose();
      v_lev_.middleRows(static_cast<Eigen::Index>(c) * m_, m_) = block(t - 1);
      h_lev_.middleRows(static_cast<Eigen::Index>(c) * n_, n_) = block(t - 1).transpose();
      for (int i = 1; i < p; ++i) {
        const Matrix dl = block(t - i) - block(t - i - 1);
        v_lag_[static_cast<std::size_t>(i - 1)].middleRows(static_cast<Eigen::Index>(c) * m_, m_) = dl;
        h_lag_[static_cast<std::size_t>(i - 1)].middleRows(static_cast<Eigen::Index>(c) * n_, n_) = dl.transpose();
      }
    }
  }

  int m() const { return m_; }
  int n() const { return n_; }
  int p() const { return p_; }
  int neff() const { return neff_; }

  const Matrix& stacked_diff(Side s) const { return s == Side::row ? v_dx_ : h_dx_; }
  const Matrix& stacked_level(Side s) const { return s == Side::row ? v_lev_ : h_lev_; }
  const Matrix& stacked_lag(Side s, int i) const {
    return s == Side::row ? v_lag_[static_cast<std::size_t>(i)] : h_lag_[static_cast<std::size_t>(i)];
  }

 private:
  int m_;
  int n_;
  int p_;
  int neff_ = 0;
  Matrix v_dx_, v_lev_, h_dx_, h_lev_;
  std::vector<Matrix> v_lag_, h_lag_;
};

// ---------------------------------------------------------------------------
// Log-likelihood

// Matrix-normal Gaussian log-likelihood conditional on the first p
// observations; T0 is the number of residual terms summed.
inline double loglik(const EccMarParams& par, const SeriesLayout& lay) {
  par.validate();
  if (par.m != lay.m() || par.n != lay.n() || par.p != lay.p())
    throw ConfigError("loglik: parameter dimensions do not match the series");
  require_pd(par.sigma_r, "loglik: sigma_r");
  require_pd(par.sigma_c, "loglik: sigma_c");
  const int m = par.m;
  const int n = par.n;
  const Eigen::LLT<Matrix> lr(symmetrize(par.sigma_r));
  const Eigen::LLT<Matrix> lc(symmetrize(par.sigma_c));
  const Matrix ar = lr.matrixL().solve(Matrix::Identity(m, m));
  const Matrix ac = lc.matrixL().solve(Matrix::Identity(n, n));
  const double logdet_r = 2.0 * lr.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double logdet_c = 2.0 * lc.matrixL().toDenseMatrix().diagonal().array().log().sum();

  const Matrix lam = par.lambda();
  const Matrix psi_t = par.psi().transpose();
  const Matrix& dx = lay.stacked_diff(Side::row);
  const Matrix& lev = lay.stacked_level(Side::row);
  double quad = 0.0;
  for (int c = 0; c < lay.neff(); ++c) {
    const Eigen::Index off = static_cast<Eigen::Index>(c) * m;
    const auto x = lev.middleRows(off, m);
    Matrix u = dx.middleRows(off, m) - lam * x * psi_t + x;
    for (int i = 0; i < par.p - 1; ++i)
      u -= par.gamma1[static_cast<std::size_t>(i)] * lay.stacked_lag(Side::row, i).middleRows(off, m) *
           par.gamma2[static_cast<std::size_t>(i)].transpose();
    quad += (ar * u * ac.transpose()).squaredNorm();
  }
  const double t0 = lay.neff();
  return -0.5 * t0 * m * n * std::log(2.0 * std::numbers::pi) - 0.5 * t0 * n * logdet_r -
         0.5 * t0 * m * logdet_c - 0.5 * quad;
}

inline double loglik(const EccMarParams& par, const MatrixSeries& series) {
  return loglik(par, SeriesLayout(series, par.p));
}

// ---------------------------------------------------------------------------
// Whitening

// Pooled auxiliary sample for one side. Row side: dependents dX_t W, levels
// X_{t-1} W and short-run dX_{t-i} Gamma2_i' W with W = phi_perp C^{-1/2},
// C = phi_perp' Sigma_c phi_perp. Column side mirrors this on transposes with
// tau_perp, Gamma1 and Sigma_r.
inline PooledSample whiten_side(const SeriesLayout& lay, Side side, const EccMarParams& par) {
  const Matrix& adj = side == Side::row ? par.phi : par.tau;
  const Matrix& sigma = side == Side::row ? par.sigma_c : par.sigma_r;
  const std::vector<Matrix>& other_sr = side == Side::row ? par.gamma2 : par.gamma1;
  const Eigen::Index d = side == Side::row ? lay.m() : lay.n();

  const Matrix perp = orth_complement(adj);
  const Matrix c = perp.transpose() * sigma * perp;
  Matrix cis;
  try {
    cis = inv_sqrt_sym(c);
  } catch (const NumericalError&) {
    throw NumericalError(std::string("whiten_side(") + to_string(side) +
                         "): projected covariance is below the positive-definite floor");
  }
  const Matrix w = perp * cis;
  const Eigen::Index q = w.cols();
  const Eigen::Index nobs = static_cast<Eigen::Index>(lay.neff()) * q;

  auto pooled = [&](const Matrix& stacked, const Matrix& right) {
    const Matrix prod = stacked * right;
    return Matrix(Eigen::Map<const Matrix>(prod.data(), d, nobs));
  };
  PooledSample s;
  s.y = pooled(lay.stacked_diff(side), w);
  s.x = pooled(lay.stacked_level(side), w);
  const int nl = lay.p() - 1;
  s.z.resize(d * nl, nobs);
  for (int i = 0; i < nl; ++i)
    s.z.middleRows(d * i, d) = pooled(lay.stacked_lag(side, i), other_sr[static_cast<std::size_t>(i)].transpose() * w);
  return s;
}

inline PooledSample whiten_side(const MatrixSeries& series, Side side, const EccMarParams& par) {
  return whiten_side(SeriesLayout(series, par.p), side, par);
}

// Full-information auxiliary sample for one side. With the other side held
// fixed the model is linear in the remaining block:
//   row:    dX_t - X_{t-1} theta phi' = tau gamma' (X_{t-1} Psi') + sum Gamma1_i (dX_{t-i} Gamma2_i') + E_t
//   column: dX_t' - X_{t-1}' gamma tau' = phi theta' (X_{t-1}' Lambda') + sum Gamma2_i (dX_{t-i}' Gamma1_i') + E_t'
// and right-whitening by Sigma_c^{-1/2} (Sigma_r^{-1/2}) pools all n (m)
// columns into one reduced-rank regression with MN(0, Sigma, I) errors.
inline PooledSample whiten_side_full(const SeriesLayout& lay, Side side, const EccMarParams& par) {
  const bool row = side == Side::row;
  const Eigen::Index d = row ? lay.m() : lay.n();
  const Eigen::Index width = row ? lay.n() : lay.m();
  const Matrix& sigma = row ? par.sigma_c : par.sigma_r;
  const std::vector<Matrix>& other_sr = row ? par.gamma2 : par.gamma1;
  Matrix w;
  try {
    w = inv_sqrt_sym(sigma);
  } catch (const NumericalError&) {
    throw NumericalError(std::string("whiten_side_full(") + to_string(side) +
                         "): covariance is below the positive-definite floor");
  }
  // Known part of the other side's error correction, and the level factor.
  const Matrix known = row ? Matrix(par.theta * par.phi.transpose()) : Matrix(par.gamma * par.tau.transpose());
  const Matrix factor = row ? par.psi().transpose() : par.lambda().transpose();
  const Eigen::Index nobs = static_cast<Eigen::Index>(lay.neff()) * width;

  auto pooled = [&](const Matrix& prod) { return Matrix(Eigen::Map<const Matrix>(prod.data(), d, nobs)); };
  const Matrix& lev = lay.stacked_level(side);
  PooledSample s;
  s.y = pooled((lay.stacked_diff(side) - lev * known) * w);
  s.x = pooled(lev * (factor * w));
  const int nl = lay.p() - 1;
  s.z.resize(d * nl, nobs);
  for (int i = 0; i < nl; ++i)
    s.z.middleRows(d * i, d) = pooled(lay.stacked_lag(side, i) * (other_sr[static_cast<std::size_t>(i)].transpose() * w));
  return s;
}

// ---------------------------------------------------------------------------
// Side updates

struct SideRestriction {
  Side side = Side::row;
  Restriction restriction;
};

// full_information: exact maximization over one side's block given the other.
// projected: the limited-information step on the system projected onto the
// orthogonal complement of the other side's adjustment matrix.
enum class UpdateRule { full_information, projected };

inline const char* to_string(UpdateRule r) { return r == UpdateRule::projected ? "projected" : "full_information"; }

struct SideUpdate {
  PooledMoments moments;
  Vector eigenvalues;
};

// Reduced-rank regression on one side's whitened auxiliary system, writing
// (tau, gamma, Gamma1, Sigma_r) for the row side or (phi, theta, Gamma2,
// Sigma_c) for the column side into `par`.
inline SideUpdate update_side(const SeriesLayout& lay, Side side, EccMarParams& par, int rank,
                              const Restriction* restriction = nullptr,
                              UpdateRule rule = UpdateRule::full_information) {
  const PooledSample s =
      rule == UpdateRule::projected ? whiten_side(lay, side, par) : whiten_side_full(lay, side, par);
  s.validate();
  SideUpdate out;
  out.moments = pooled_moments(partial_out(s));
  Matrix adj, coint;
  if (restriction != nullptr) {
    const RestrictedRrr rr = solve_rrr_restricted(out.moments, rank, *restriction);
    adj = rr.tau;
    coint = rr.gamma;
    out.eigenvalues = rr.eigenvalues;
  } else {
    const RrrSolution sol = solve_rrr(out.moments, rank);
    adj = sol.tau_hat;
    coint = sol.gamma_hat;
    out.eigenvalues = sol.eigenvalues;
  }
  const Eigen::Index d = side == Side::row ? lay.m() : lay.n();
  std::vector<Matrix> blocks;
  if (s.has_shortrun()) {
    const Matrix sr = shortrun_from(s, adj, coint);
    for (int i = 0; i < lay.p() - 1; ++i) blocks.push_back(sr.middleCols(d * i, d));
  }
  Matrix sigma = residual_covariance(out.moments, adj, coint);
  if (side == Side::row) {
    par.tau = adj;
    par.gamma = coint;
    par.gamma1 = std::move(blocks);
    par.sigma_r = sigma;
    par.r1 = rank;
  } else {
    par.phi = adj;
    par.theta = coint;
    par.gamma2 = std::move(blocks);
    par.sigma_c = sigma;
    par.r2 = rank;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Implied vector VECM objects

struct ImpliedVecm {
  Matrix pi;
  Matrix beta;
  Matrix alpha;
};

// pi = I (x) tau gamma' + phi theta' (x) I + phi theta' (x) tau gamma',
// beta = [I_n (x) gamma, theta (x) gamma_perp],
// alpha = [I_n (x) tau + phi theta' (x) (gamma_bar + tau), phi (x) gamma_bar_perp].
inline ImpliedVecm implied_vecm(const EccMarParams& par) {
  const int m = par.m;
  const int n = par.n;
  const Matrix im = Matrix::Identity(m, m);
  const Matrix in = Matrix::Identity(n, n);
  const Matrix tg = par.tau * par.gamma.transpose();
  const Matrix pt = par.phi * par.theta.transpose();
  ImpliedVecm out;
  out.pi = kron(in, tg) + kron(pt, im) + kron(pt, tg);
  const Matrix gperp = orth_complement(par.gamma);
  const Matrix left_b = kron(in, par.gamma);
  const Matrix right_b = kron(par.theta, gperp);
  out.beta.resize(static_cast<Eigen::Index>(m) * n, left_b.cols() + right_b.cols());
  out.beta << left_b, right_b;
  const Matrix left_a = kron(in, par.tau) + kron(pt, bar(par.gamma) + par.tau);
  const Matrix right_a = kron(par.phi, bar(gperp));
  out.alpha.resize(out.beta.rows(), out.beta.cols());
  out.alpha << left_a, right_a;
  return out;
}

// ---------------------------------------------------------------------------
// Alternating fit

enum class Initializer { warm_start, user_supplied };

struct FitOptions {
  double tolerance = 1e-8;
  int max_iterations = 200;
  Initializer initializer = Initializer::warm_start;
  // Column-side starting values (phi, theta, Gamma2, Sigma_c) when
  // initializer == user_supplied.
  std::optional<EccMarParams> initial;
  // Impose a restriction on one side's reduced-rank step in every iteration.
  std::optional<SideRestriction> restriction;
  UpdateRule rule = UpdateRule::full_information;
  bool keep_iterates = false;

  void validate() const {
    if (!(tolerance > 0.0)) throw ConfigError("FitOptions: tolerance must be positive");
    if (max_iterations < 1) throw ConfigError("FitOptions: max_iterations must be at least 1");
    if (initializer == Initializer::user_supplied && !initial)
      throw ConfigError("FitOptions: user_supplied initializer requires initial values");
  }
};

struct FitResult {
  EccMarParams params;
  std::vector<double> loglik_path;
  std::vector<EccMarParams> iterates;  // accepted iterates when keep_iterates
  bool converged = false;
  bool safeguard_triggered = false;
  int iterations = 0;
  Matrix implied_pi;
  Matrix implied_beta;
  Matrix implied_alpha;

  double loglik() const { return loglik_path.empty() ? std::nan("") : loglik_path.back(); }
};

// Column-side warm start: a rank-r2 Johansen fit of the transposed series
// pooled over all m rows (tau_perp = I, Gamma1 = I, Sigma_r = I), with
// Sigma_c trace-normalized to n.
inline EccMarParams initialize(const SeriesLayout& lay, int r1, int r2) {
  EccMarParams par;
  par.m = lay.m();
  par.n = lay.n();
  par.p = lay.p();
  par.r1 = 0;
  par.tau = Matrix::Zero(par.m, 0);
  par.gamma = Matrix::Zero(par.m, 0);
  par.gamma1.assign(static_cast<std::size_t>(par.p - 1), Matrix::Identity(par.m, par.m));
  par.sigma_r = Matrix::Identity(par.m, par.m);
  par.phi = Matrix::Zero(par.n, 0);
  par.theta = Matrix::Zero(par.n, 0);
  par.gamma2.assign(static_cast<std::size_t>(par.p - 1), Matrix::Zero(par.n, par.n));
  par.sigma_c = Matrix::Identity(par.n, par.n);
  update_side(lay, Side::column, par, r2);
  const double tr = par.sigma_c.trace();
  if (!(tr > 0.0)) throw NumericalError("initialize: degenerate column covariance");
  par.sigma_c *= static_cast<double>(par.n) / tr;
  par.r1 = r1;
  par.tau = Matrix::Zero(par.m, r1);
  par.gamma = Matrix::Zero(par.m, r1);
  return par;
}

inline EccMarParams initialize(const MatrixSeries& series, int r1, int r2, int p) {
  return initialize(SeriesLayout(series, p), r1, r2);
}

inline FitResult fit_alternating(const SeriesLayout& lay, int r1, int r2, const FitOptions& opts = {}) {
  opts.validate();
  const int m = lay.m();
  const int n = lay.n();
  if (!(0 < r1 && r1 < m && 0 < r2 && r2 < n))
    throw ConfigError("fit_alternating: ranks must satisfy 0 < r1 < m and 0 < r2 < n");
  if (lay.neff() < m + n)
    throw DataError("fit_alternating: series too short (need T >= p + m + n)");

  EccMarParams cur;
  if (opts.initializer == Initializer::user_supplied) {
    cur = *opts.initial;
    if (cur.m != m || cur.n != n || cur.p != lay.p() || cur.r2 != r2)
      throw ConfigError("fit_alternating: user-supplied initial values have the wrong shape");
    cur.r1 = r1;
    cur.tau = Matrix::Zero(m, r1);
    cur.gamma = Matrix::Zero(m, r1);
    if (static_cast<int>(cur.gamma1.size()) != lay.p() - 1)
      cur.gamma1.assign(static_cast<std::size_t>(lay.p() - 1), Matrix::Identity(m, m));
    if (cur.sigma_r.rows() != m) cur.sigma_r = Matrix::Identity(m, m);
  } else {
    cur = initialize(lay, r1, r2);
  }

  const Restriction* row_r = nullptr;
  const Restriction* col_r = nullptr;
  if (opts.restriction) {
    (opts.restriction->side == Side::row ? row_r : col_r) = &opts.restriction->restriction;
  }

  FitResult res;
  double prev = 0.0;
  bool have_prev = false;
  EccMarParams accepted;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    EccMarParams cand = cur;
    try {
      update_side(lay, Side::row, cand, r1, row_r, opts.rule);
      cand.normalize_scale();
      update_side(lay, Side::column, cand, r2, col_r, opts.rule);
    } catch (const NumericalError& e) {
      throw NumericalError("fit_alternating: iteration " + std::to_string(it) + ": " + e.what());
    }
    const double ll = loglik(cand, lay);
    if (!std::isfinite(ll))
      throw NumericalError("fit_alternating: non-finite log-likelihood at iteration " + std::to_string(it));
    res.iterations = it;
    if (have_prev) {
      const double delta = ll - prev;
      if (std::abs(delta) < opts.tolerance) {
        accepted = cand;
        res.loglik_path.push_back(ll);
        if (opts.keep_iterates) res.iterates.push_back(cand);
        res.converged = true;
        break;
      }
      if (delta < 0.0) {
        res.safeguard_triggered = true;
        break;
      }
    }
    accepted = cand;
    cur = cand;
    prev = ll;
    have_prev = true;
    res.loglik_path.push_back(ll);
    if (opts.keep_iterates) res.iterates.push_back(cand);
  }
  res.params = accepted;
  const ImpliedVecm iv = implied_vecm(res.params);
  res.implied_pi = iv.pi;
  res.implied_beta = iv.beta;
  res.implied_alpha = iv.alpha;
  return res;
}

inline FitResult fit_alternating(const MatrixSeries& series, int r1, int r2, int p,
                                 const FitOptions& opts = {}) {
  return fit_alternating(SeriesLayout(series, p), r1, r2, opts);
}

// ---------------------------------------------------------------------------
// Pooled moments at the converged parameters, for likelihood-ratio tests.

struct FitContext {
  PooledMoments row;     // d = m; pooled over (t, j), j over the whitened columns
  PooledMoments column;  // d = n; pooled over (t, i), i over the whitened rows
  int r1 = 0;
  int r2 = 0;
  UpdateRule rule = UpdateRule::projected;
  Vector row_eigenvalues;
  Vector column_eigenvalues;

  const PooledMoments& moments(Side s) const { return s == Side::row ? row : column; }
  int rank(Side s) const { return s == Side::row ? r1 : r2; }
  const Vector& eigenvalues(Side s) const { return s == Side::row ? row_eigenvalues : column_eigenvalues; }
};

inline FitContext make_fit_context(const SeriesLayout& lay, const EccMarParams& par,
                                   UpdateRule rule = UpdateRule::projected) {
  FitContext ctx;
  ctx.r1 = par.r1;
  ctx.r2 = par.r2;
  auto sample = [&](Side s) {
    return rule == UpdateRule::projected ? whiten_side(lay, s, par) : whiten_side_full(lay, s, par);
  };
  ctx.rule = rule;
  ctx.row = pooled_moments(partial_out(sample(Side::row)));
  ctx.column = pooled_moments(partial_out(sample(Side::column)));
  ctx.row_eigenvalues = solve_rrr(ctx.row, par.r1).eigenvalues;
  ctx.column_eigenvalues = solve_rrr(ctx.column, par.r2).eigenvalues;
  return ctx;
}

inline FitContext make_fit_context(const MatrixSeries& series, const EccMarParams& par,
                                   UpdateRule rule = UpdateRule::projected) {
  return make_fit_context(SeriesLayout(series, par.p), par, rule);
}

// Vectorized rank-r CVAR benchmark on vec(X_t).
inline VecmFit fit_cvar(const MatrixSeries& series, int r, int p) {
  return fit_vecm(series.vectorized(), r, p);
}

}  // namespace ecmar

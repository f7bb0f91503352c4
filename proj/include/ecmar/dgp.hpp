#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <tuple>
#include <string>
#include <vector>

#include "ecmar/error.hpp"
#include "ecmar/matalg.hpp"
#include "ecmar/random.hpp"

namespace ecmar {

// Parameters of the error-correction form
//   dX_t = tau gamma' X_{t-1} + X_{t-1} theta phi' + tau gamma' X_{t-1} theta phi'
//          + sum_i Gamma1_i dX_{t-i} Gamma2_i' + E_t,   E_t ~ MN(0, Sigma_r, Sigma_c).
struct EccMarParams {
  int m = 0;
  int n = 0;
  int r1 = 0;
  int r2 = 0;
  int p = 1;
  Matrix tau;    // m x r1
  Matrix gamma;  // m x r1
  Matrix phi;    // n x r2
  Matrix theta;  // n x r2
  std::vector<Matrix> gamma1;  // p-1 blocks, m x m
  std::vector<Matrix> gamma2;  // p-1 blocks, n x n
  Matrix sigma_r;  // m x m
  Matrix sigma_c;  // n x n

  // Row factor of the level form X_t = Lambda X_{t-1} Psi' + E_t.
  Matrix lambda() const { return Matrix::Identity(m, m) + tau * gamma.transpose(); }
  // Column factor; vec(Lambda X Psi') = kron(Psi, Lambda) vec(X).
  Matrix psi() const { return Matrix::Identity(n, n) + phi * theta.transpose(); }

  void validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("EccMarParams: " + msg); };
    if (m <= 0 || n <= 0) fail("dimensions must be positive");
    if (r1 < 0 || r1 > m || r2 < 0 || r2 > n) fail("ranks out of range");
    if (p < 1) fail("lag order must be at least 1");
    if (tau.rows() != m || tau.cols() != r1 || gamma.rows() != m || gamma.cols() != r1)
      fail("tau/gamma must be m x r1");
    if (phi.rows() != n || phi.cols() != r2 || theta.rows() != n || theta.cols() != r2)
      fail("phi/theta must be n x r2");
    if (static_cast<int>(gamma1.size()) != p - 1 || static_cast<int>(gamma2.size()) != p - 1)
      fail("expected p-1 short-run blocks on each side");
    for (const auto& g : gamma1)
      if (g.rows() != m || g.cols() != m) fail("Gamma1 blocks must be m x m");
    for (const auto& g : gamma2)
      if (g.rows() != n || g.cols() != n) fail("Gamma2 blocks must be n x n");
    if (sigma_r.rows() != m || sigma_r.cols() != m) fail("sigma_r must be m x m");
    if (sigma_c.rows() != n || sigma_c.cols() != n) fail("sigma_c must be n x n");
  }

  // trace(sigma_r) = m; the reciprocal factor moves into sigma_c so that
  // kron(sigma_c, sigma_r) is unchanged.
  void normalize_scale() {
    const double tr = sigma_r.trace();
    if (!(tr > 0.0)) throw NumericalError("normalize_scale: sigma_r has non-positive trace");
    const double k = static_cast<double>(m) / tr;
    sigma_r *= k;
    sigma_c /= k;
  }
};

struct MatrixSeries {
  int m = 0;
  int n = 0;
  std::vector<Matrix> data;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::string> time_labels;

  int length() const { return static_cast<int>(data.size()); }

  void validate() const {
    if (m <= 0 || n <= 0) throw DataError("MatrixSeries: dimensions must be positive");
    for (std::size_t t = 0; t < data.size(); ++t) {
      if (data[t].rows() != m || data[t].cols() != n)
        throw DataError("MatrixSeries: observation " + std::to_string(t + 1) + " is not m x n");
      if (!data[t].allFinite())
        throw DataError("MatrixSeries: observation " + std::to_string(t + 1) + " has non-finite entries");
    }
    if (!row_labels.empty() && static_cast<int>(row_labels.size()) != m)
      throw DataError("MatrixSeries: row label count differs from m");
    if (!col_labels.empty() && static_cast<int>(col_labels.size()) != n)
      throw DataError("MatrixSeries: column label count differs from n");
    if (!time_labels.empty() && time_labels.size() != data.size())
      throw DataError("MatrixSeries: time label count differs from T");
  }

  std::string row_label(int i) const {
    return row_labels.empty() ? "R" + std::to_string(i + 1) : row_labels[static_cast<std::size_t>(i)];
  }
  std::string col_label(int j) const {
    return col_labels.empty() ? "C" + std::to_string(j + 1) : col_labels[static_cast<std::size_t>(j)];
  }
  std::string time_label(int t) const {
    return time_labels.empty() ? std::to_string(t + 1) : time_labels[static_cast<std::size_t>(t)];
  }

  // (mn) x T matrix whose column t is vec(X_t).
  Matrix vectorized() const {
    Matrix out(static_cast<Eigen::Index>(m) * n, length());
    for (int t = 0; t < length(); ++t) out.col(t) = vec(data[static_cast<std::size_t>(t)]);
    return out;
  }
};

// ---------------------------------------------------------------------------
// I(1) conditions

struct I1Report {
  bool is_I1 = false;
  std::vector<std::complex<double>> eigs_lambda;
  std::vector<std::complex<double>> eigs_psi;
  std::string reason;  // empty when is_I1
};

namespace detail {

inline std::vector<std::complex<double>> eigenvalues_of(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a, false);
  std::vector<std::complex<double>> out(es.eigenvalues().data(),
                                        es.eigenvalues().data() + es.eigenvalues().size());
  return out;
}

// Exactly `units` eigenvalues within 1e-8 of 1, all others strictly inside
// the unit disk by 1e-8, and rank(a - I) = dim - units.
inline std::string unit_root_violation(const Matrix& a, int units,
                                       const std::vector<std::complex<double>>& eigs,
                                       const std::string& name) {
  int unit_count = 0;
  for (const auto& z : eigs) {
    if (std::abs(z - 1.0) < 1e-8) {
      ++unit_count;
    } else if (!(std::abs(z) < 1.0 - 1e-8)) {
      return name + " has a non-unit eigenvalue on or outside the unit circle";
    }
  }
  if (unit_count != units)
    return name + " has " + std::to_string(unit_count) + " unit eigenvalues, expected " +
           std::to_string(units);
  const Matrix shifted = a - Matrix::Identity(a.rows(), a.cols());
  if (numeric_rank(shifted) != a.rows() - units)
    return name + " unit eigenvalue is not semisimple";
  return {};
}

}  // namespace detail

inline I1Report check_I1(const EccMarParams& params) {
  if (params.p != 1) throw ConfigError("check_I1: requires p = 1");
  params.validate();
  I1Report rep;
  const Matrix lam = params.lambda();
  const Matrix psi = params.psi();
  rep.eigs_lambda = detail::eigenvalues_of(lam);
  rep.eigs_psi = detail::eigenvalues_of(psi);
  rep.reason = detail::unit_root_violation(lam, params.m - params.r1, rep.eigs_lambda, "Lambda");
  if (rep.reason.empty())
    rep.reason = detail::unit_root_violation(psi, params.n - params.r2, rep.eigs_psi, "Psi");
  rep.is_I1 = rep.reason.empty();
  return rep;
}

// ---------------------------------------------------------------------------
// Random designs

inline Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, SeedStream& rng) {
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = rng.normal();
  return out;
}

inline constexpr int kDefaultMaxRedraws = 10000;

// tau and phi have their leading m-r1 (n-r2) rows zero, every other entry of
// tau, gamma, phi, theta is standard normal; draws are repeated until the
// I(1) conditions hold. Sigma_r = Sigma_c = I.
inline EccMarParams draw_design(int m, int n, int r1, int r2, std::uint64_t seed,
                                int max_redraws = kDefaultMaxRedraws) {
  if (!(0 < r1 && r1 < m && 0 < r2 && r2 < n))
    throw ConfigError("draw_design: ranks must satisfy 0 < r1 < m and 0 < r2 < n");
  SeedStream rng(seed);
  EccMarParams par;
  par.m = m;
  par.n = n;
  par.r1 = r1;
  par.r2 = r2;
  par.p = 1;
  par.sigma_r = Matrix::Identity(m, m);
  par.sigma_c = Matrix::Identity(n, n);
  for (int attempt = 0; attempt < max_redraws; ++attempt) {
    par.tau = Matrix::Zero(m, r1);
    par.tau.bottomRows(r1) = standard_normal(r1, r1, rng);
    par.gamma = standard_normal(m, r1, rng);
    par.phi = Matrix::Zero(n, r2);
    par.phi.bottomRows(r2) = standard_normal(r2, r2, rng);
    par.theta = standard_normal(n, r2, rng);
    if (!full_column_rank(par.tau) || !full_column_rank(par.gamma) ||
        !full_column_rank(par.phi) || !full_column_rank(par.theta))
      continue;
    if (check_I1(par).is_I1) return par;
  }
  throw NumericalError("draw_design: no I(1) draw after " + std::to_string(max_redraws) +
                       " attempts");
}

// ---------------------------------------------------------------------------
// Matrix normal innovations

// Draws Lr Z Lc' with Lr Lr' = Sigma_r and Lc Lc' = Sigma_c, so that
// Var(vec E) = kron(Sigma_c, Sigma_r).
class MatrixNormalSampler {
 public:
  MatrixNormalSampler(const Matrix& sigma_r, const Matrix& sigma_c) {
    require_pd(sigma_r, "sample_matrix_normal: sigma_r");
    require_pd(sigma_c, "sample_matrix_normal: sigma_c");
    lr_ = symmetrize(sigma_r).llt().matrixL();
    lc_ = symmetrize(sigma_c).llt().matrixL();
  }
  Matrix operator()(SeedStream& rng) const {
    const Matrix z = standard_normal(lr_.rows(), lc_.rows(), rng);
    return lr_ * z * lc_.transpose();
  }

 private:
  Matrix lr_;
  Matrix lc_;
};

inline Matrix sample_matrix_normal(const Matrix& sigma_r, const Matrix& sigma_c, SeedStream& rng) {
  return MatrixNormalSampler(sigma_r, sigma_c)(rng);
}

// ---------------------------------------------------------------------------
// Simulation

struct SimulateOptions {
  int burnin = 100;
  bool noiseless = false;
};

// Conditional mean of dX_t given the level X_{t-1} and lagged differences
// lags[i] = dX_{t-1-i}.
inline Matrix conditional_mean(const EccMarParams& par, const Matrix& level,
                               const std::vector<const Matrix*>& lags) {
  const Matrix tg = par.tau * (par.gamma.transpose() * level);
  const Matrix lt = level * par.theta;
  Matrix mean = tg + lt * par.phi.transpose() + (par.tau * (par.gamma.transpose() * lt)) * par.phi.transpose();
  for (std::size_t i = 0; i < par.gamma1.size(); ++i)
    mean += par.gamma1[i] * (*lags[i]) * par.gamma2[i].transpose();
  return mean;
}

inline MatrixSeries simulate(const EccMarParams& par, int T, std::uint64_t seed,
                             const SimulateOptions& opts = {}) {
  par.validate();
  if (T < par.p + 2) throw ConfigError("simulate: T must be at least p + 2");
  if (opts.burnin < 0) throw ConfigError("simulate: burnin must be non-negative");
  SeedStream rng(seed);
  std::optional<MatrixNormalSampler> sampler;
  if (!opts.noiseless) sampler.emplace(par.sigma_r, par.sigma_c);

  const int total = opts.burnin + T;
  const int q = par.p - 1;
  Matrix level = Matrix::Zero(par.m, par.n);
  // diffs[k] holds dX_{t-1-k}; pre-sample differences are zero.
  std::vector<Matrix> diffs(static_cast<std::size_t>(std::max(q, 0)), Matrix::Zero(par.m, par.n));
  std::vector<const Matrix*> lag_ptrs(static_cast<std::size_t>(std::max(q, 0)));

  MatrixSeries out;
  out.m = par.m;
  out.n = par.n;
  out.data.reserve(static_cast<std::size_t>(T));
  for (int step = 1; step <= total; ++step) {
    for (int k = 0; k < q; ++k) lag_ptrs[static_cast<std::size_t>(k)] = &diffs[static_cast<std::size_t>(k)];
    Matrix d = conditional_mean(par, level, lag_ptrs);
    if (sampler) d += (*sampler)(rng);
    level += d;
    if (q > 0) {
      for (int k = q - 1; k > 0; --k) diffs[static_cast<std::size_t>(k)] = diffs[static_cast<std::size_t>(k - 1)];
      diffs[0] = d;
    }
    if (step > opts.burnin) out.data.push_back(level);
  }
  return out;
}

// ---------------------------------------------------------------------------
// MAR(p) to ECC-MAR(p)

enum class MarpFailure { non_proportional, zero_scale, eigenvalue_bound, no_cointegration };

class MarpReduceError : public ConfigError {
 public:
  MarpReduceError(MarpFailure reason, const std::string& msg) : ConfigError(msg), reason_(reason) {}
  MarpFailure reason() const { return reason_; }

 private:
  MarpFailure reason_;
};

namespace detail {

// Least-squares c with a ~ c * base; throws when the relative misfit exceeds 1e-8.
inline double proportionality(const Matrix& a, const Matrix& base, const char* name, std::size_t i) {
  const double bb = base.squaredNorm();
  if (bb == 0.0)
    throw MarpReduceError(MarpFailure::non_proportional, std::string("marp_reduce: ") + name + "_1 is zero");
  const double c = (a.array() * base.array()).sum() / bb;
  const double scale = std::max(a.norm(), base.norm() * std::abs(c));
  if ((a - c * base).norm() > 1e-8 * std::max(scale, 1e-300))
    throw MarpReduceError(MarpFailure::non_proportional,
                          std::string("marp_reduce: ") + name + "_" + std::to_string(i + 1) +
                              " is not proportional to " + name + "_1");
  return c;
}

inline double spectral_radius(const Matrix& a) {
  double r = 0.0;
  for (const auto& z : eigenvalues_of(a)) r = std::max(r, std::abs(z));
  return r;
}

// Rank factorization a = left * right' with left = U S, right = V.
inline std::pair<Matrix, Matrix> rank_factor(const Matrix& a, Eigen::Index rank) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix left = svd.matrixU().leftCols(rank) * svd.singularValues().head(rank).asDiagonal();
  Matrix right = svd.matrixV().leftCols(rank);
  return {left, right};
}

}  // namespace detail

// Reduces X_t = sum_i Lambda_i X_{t-i} Psi_i' + E_t with Lambda_i = l_i Lambda_1
// and Psi_i = d_i Psi_1 to ECC-MAR(p) form. Level factors are Lambda_1 and
// s Psi_1 with s = sum_i l_i d_i; lag block j carries -c_j kron(Psi_1, Lambda_1)
// with c_j = sum_{i>j} l_i d_i, split as Gamma1_j = Lambda_1, Gamma2_j = -c_j Psi_1.
inline EccMarParams marp_reduce(const std::vector<Matrix>& lambdas, const std::vector<Matrix>& psis) {
  if (lambdas.empty() || lambdas.size() != psis.size())
    throw ConfigError("marp_reduce: need p >= 1 matching Lambda and Psi coefficient lists");
  const std::size_t p = lambdas.size();
  const Eigen::Index m = lambdas[0].rows();
  const Eigen::Index n = psis[0].rows();
  for (std::size_t i = 0; i < p; ++i) {
    if (lambdas[i].rows() != m || lambdas[i].cols() != m || psis[i].rows() != n || psis[i].cols() != n)
      throw ConfigError("marp_reduce: coefficient dimensions are inconsistent");
  }
  std::vector<double> l(p), d(p);
  for (std::size_t i = 0; i < p; ++i) {
    l[i] = detail::proportionality(lambdas[i], lambdas[0], "Lambda", i);
    d[i] = detail::proportionality(psis[i], psis[0], "Psi", i);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < p; ++i) s += l[i] * d[i];
  if (std::abs(s) < 1e-12) throw MarpReduceError(MarpFailure::zero_scale, "marp_reduce: s = sum l_i d_i is zero");

  const Matrix lam = lambdas[0];
  const Matrix psi = s * psis[0];
  if (detail::spectral_radius(lam) > 1.0 + 1e-8)
    throw MarpReduceError(MarpFailure::eigenvalue_bound, "marp_reduce: |eig(Lambda_1)| exceeds 1");
  if (detail::spectral_radius(psis[0]) > 1.0 / std::abs(s) + 1e-8)
    throw MarpReduceError(MarpFailure::eigenvalue_bound, "marp_reduce: |eig(Psi_1)| exceeds 1/|s|");

  const Matrix pi1 = lam - Matrix::Identity(m, m);
  const Matrix pi2 = psi - Matrix::Identity(n, n);
  const Eigen::Index r1 = numeric_rank(pi1, 1e-8);
  const Eigen::Index r2 = numeric_rank(pi2, 1e-8);
  if (r1 == 0 || r1 == m || r2 == 0 || r2 == n)
    throw MarpReduceError(MarpFailure::no_cointegration,
                          "marp_reduce: level factor minus identity has rank 0 or full rank");

  EccMarParams par;
  par.m = static_cast<int>(m);
  par.n = static_cast<int>(n);
  par.r1 = static_cast<int>(r1);
  par.r2 = static_cast<int>(r2);
  par.p = static_cast<int>(p);
  std::tie(par.tau, par.gamma) = detail::rank_factor(pi1, r1);
  std::tie(par.phi, par.theta) = detail::rank_factor(pi2, r2);
  for (std::size_t j = 1; j < p; ++j) {
    double c = 0.0;
    for (std::size_t i = j; i < p; ++i) c += l[i] * d[i];
    par.gamma1.push_back(lambdas[0]);
    par.gamma2.push_back(-c * psis[0]);
  }
  par.sigma_r = Matrix::Identity(m, m);
  par.sigma_c = Matrix::Identity(n, n);
  return par;
}

// Vectorized MAR(p) coefficients kron(Psi_i, Lambda_i) implied by ECC-MAR(p)
// parameters: A_1 = kron(Psi, Lambda) + G_1, A_i = G_i - G_{i-1}, A_p = -G_{p-1},
// G_j = kron(Gamma2_j, Gamma1_j).
inline std::vector<Matrix> mar_coefficients(const EccMarParams& par) {
  std::vector<Matrix> out(static_cast<std::size_t>(par.p));
  std::vector<Matrix> g;
  for (int j = 0; j < par.p - 1; ++j)
    g.push_back(kron(par.gamma2[static_cast<std::size_t>(j)], par.gamma1[static_cast<std::size_t>(j)]));
  out[0] = kron(par.psi(), par.lambda());
  if (par.p > 1) out[0] += g[0];
  for (int i = 1; i < par.p; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    out[k] = -g[k - 1];
    if (i < par.p - 1) out[k] += g[k];
  }
  return out;
}

// Fixed (m,n) = (4,3), (r1,r2) = (2,2) design used by the test-size and
// power studies; Sigma_r = Sigma_c = I.
inline EccMarParams fixed_test_design() {
  EccMarParams par;
  par.m = 4;
  par.n = 3;
  par.r1 = 2;
  par.r2 = 2;
  par.p = 1;
  par.tau.resize(4, 2);
  par.tau << 0, 0, 0, 0, -0.5, 0, 0, -0.5;
  par.gamma.resize(4, 2);
  par.gamma << -1, 0, 1, -0.5, 0.5, -0.5, 0, 1;
  par.phi.resize(3, 2);
  par.phi << 0, 0, -0.2, 0, 0, -0.2;
  par.theta.resize(3, 2);
  par.theta << -1, -0.5, 1, 0.5, 0, 1;
  par.sigma_r = Matrix::Identity(4, 4);
  par.sigma_c = Matrix::Identity(3, 3);
  return par;
}

}  // namespace ecmar

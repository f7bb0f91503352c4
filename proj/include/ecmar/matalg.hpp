#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "ecmar/error.hpp"

namespace ecmar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace tol {
// Singular values below rank_rel * sigma_max count as zero.
inline constexpr double rank_rel = 1e-10;
// Eigenvalue floor for symmetric positive definite inputs, relative to trace/dim.
inline constexpr double pd_rel = 1e-12;
}  // namespace tol

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Column stacking.
inline Vector vec(const Matrix& x) {
  return Eigen::Map<const Vector>(x.data(), x.size());
}

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (rows < 0 || cols < 0 || v.size() != rows * cols)
    throw ConfigError("unvec: length " + std::to_string(v.size()) + " does not factor as " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline Vector singular_values(const Matrix& a) {
  if (a.size() == 0) return Vector();
  return Eigen::JacobiSVD<Matrix>(a).singularValues();
}

inline Eigen::Index numeric_rank(const Matrix& a, double rel = tol::rank_rel) {
  const Vector s = singular_values(a);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return static_cast<Eigen::Index>((s.array() > rel * s(0)).count());
}

inline bool full_column_rank(const Matrix& a) {
  return a.cols() <= a.rows() && numeric_rank(a) == a.cols();
}

// Orthonormal basis of the orthogonal complement of span(a). A d x d input
// of full rank gives a d x 0 matrix.
inline Matrix orth_complement(const Matrix& a) {
  const Eigen::Index d = a.rows();
  const Eigen::Index k = a.cols();
  if (k > d || numeric_rank(a) != k)
    throw NumericalError("orth_complement: input is not of full column rank");
  if (k == 0) return Matrix::Identity(d, d);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  return q.rightCols(d - k);
}

// Orthonormal basis of span(a), a of full column rank.
inline Matrix orth(const Matrix& a) {
  if (numeric_rank(a) != a.cols()) throw NumericalError("orth: input is not of full column rank");
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

// a (a'a)^{-1}
inline Matrix bar(const Matrix& a) {
  return a * (a.transpose() * a).ldlt().solve(Matrix::Identity(a.cols(), a.cols()));
}

inline Matrix symmetrize(const Matrix& s) { return 0.5 * (s + s.transpose()); }

inline double pd_floor(const Matrix& s) {
  if (s.rows() == 0) return 0.0;
  return tol::pd_rel * std::abs(s.trace()) / static_cast<double>(s.rows());
}

// Throws NumericalError naming `what` when the symmetric part of s has an
// eigenvalue at or below the relative floor.
inline void require_pd(const Matrix& s, const std::string& what) {
  if (s.rows() != s.cols()) throw NumericalError(what + ": matrix is not square");
  if (s.rows() == 0) return;
  if (!s.allFinite()) throw NumericalError(what + ": non-finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  const double floor = pd_floor(s);
  if (!(lo > floor) || !(s.trace() > 0.0))
    throw NumericalError(what + ": matrix is not positive definite (smallest eigenvalue " +
                         std::to_string(lo) + ")");
}

// R with R s R = I for symmetric positive definite s.
inline Matrix inv_sqrt_sym(const Matrix& s) {
  const Matrix sym = symmetrize(s);
  if (sym.rows() == 0) return sym;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const double floor = pd_floor(sym);
  if (es.info() != Eigen::Success || !(es.eigenvalues()(0) > floor))
    throw NumericalError("inv_sqrt_sym: eigenvalue below floor, covariance is near-singular");
  const Vector d = es.eigenvalues().array().rsqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

inline Matrix sqrt_sym(const Matrix& s) {
  const Matrix sym = symmetrize(s);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const Vector d = es.eigenvalues().cwiseMax(0.0).array().sqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

inline Matrix inverse_spd(const Matrix& s, const std::string& what) {
  require_pd(s, what);
  return symmetrize(s).llt().solve(Matrix::Identity(s.rows(), s.cols()));
}

// Symmetric-definite generalized eigenproblem a v = lambda b v, solved by
// reducing with the Cholesky factor of b. Eigenvalues descending, vectors
// normalized so that V' b V = I.
struct GenEig {
  Vector values;
  Matrix vectors;
};

inline GenEig sym_gen_eig(const Matrix& a, const Matrix& b, const std::string& what) {
  require_pd(b, what);
  const Eigen::Index d = b.rows();
  Eigen::LLT<Matrix> llt(symmetrize(b));
  const Matrix linv = llt.matrixL().solve(Matrix::Identity(d, d));
  const Matrix c = symmetrize(linv * symmetrize(a) * linv.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(c);
  if (es.info() != Eigen::Success) throw NumericalError(what + ": eigen decomposition failed");
  GenEig out;
  out.values = es.eigenvalues().reverse();
  out.vectors = linv.transpose() * es.eigenvectors().rowwise().reverse();
  return out;
}

// Flip column signs so the largest-magnitude entry of each column is positive.
inline void fix_signs(Matrix& v) {
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    Eigen::Index idx = 0;
    v.col(j).cwiseAbs().maxCoeff(&idx);
    if (v(idx, j) < 0.0) v.col(j) *= -1.0;
  }
}

// Basis of a subspace of R^d with numerically full column rank.
class Subspace {
 public:
  explicit Subspace(Matrix basis) : basis_(std::move(basis)) {
    if (!full_column_rank(basis_)) throw NumericalError("Subspace: basis is rank deficient");
  }
  const Matrix& basis() const { return basis_; }
  Eigen::Index ambient() const { return basis_.rows(); }
  Eigen::Index dim() const { return basis_.cols(); }
  Matrix projector() const {
    if (basis_.cols() == 0) return Matrix::Zero(basis_.rows(), basis_.rows());
    const Matrix q = orth(basis_);
    return q * q.transpose();
  }

 private:
  Matrix basis_;
};

// Spectral norm of the difference of orthogonal projectors.
inline double subspace_distance(const Subspace& a, const Subspace& b) {
  if (a.ambient() != b.ambient())
    throw ConfigError("subspace_distance: ambient dimensions differ");
  const Matrix diff = a.projector() - b.projector();
  if (diff.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(diff), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

struct KronApprox {
  Matrix a;  // n x n, left factor
  Matrix b;  // m x m, right factor
  double relative_residual = 0.0;
};

// Rearrangement R with R((i,j), :) = vec(block_ij)', so that
// ||M - kron(A,B)||_F = ||R - vec(A) vec(B)'||_F.
inline Matrix kron_rearrange(const Matrix& mat, Eigen::Index m, Eigen::Index n) {
  Matrix r(n * n, m * m);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      r.row(i + j * n) = vec(mat.block(i * m, j * m, m, m)).transpose();
  return r;
}

// Frobenius-nearest kron(A, B) to an (mn) x (mn) matrix, A n x n, B m x m.
inline KronApprox nearest_kron(const Matrix& mat, Eigen::Index m, Eigen::Index n) {
  if (m <= 0 || n <= 0 || mat.rows() != m * n || mat.cols() != m * n)
    throw ConfigError("nearest_kron: matrix dimensions do not factor as declared");
  const Matrix r = kron_rearrange(mat, m, n);
  Eigen::JacobiSVD<Matrix> svd(r, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double s0 = svd.singularValues()(0);
  KronApprox out;
  out.a = unvec(std::sqrt(s0) * svd.matrixU().col(0), n, n);
  out.b = unvec(std::sqrt(s0) * svd.matrixV().col(0), m, m);
  const double norm = mat.norm();
  out.relative_residual = norm == 0.0 ? 0.0 : (mat - kron(out.a, out.b)).norm() / norm;
  return out;
}

}  // namespace ecmar

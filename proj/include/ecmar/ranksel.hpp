#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ecmar/dgp.hpp"
#include "ecmar/error.hpp"
#include "ecmar/estimator.hpp"
#include "ecmar/matalg.hpp"
#include "ecmar/rrr.hpp"

namespace ecmar {

// All (r1, r2) with 0 < r1 < m, 0 < r2 < n and n r1 + m r2 - r1 r2 = r,
// in lexicographic order.
inline std::vector<std::pair<int, int>> admissible_pairs(int m, int n, int r) {
  std::vector<std::pair<int, int>> out;
  for (int r1 = 1; r1 < m; ++r1)
    for (int r2 = 1; r2 < n; ++r2)
      if (n * r1 + m * r2 - r1 * r2 == r) out.emplace_back(r1, r2);
  return out;
}

inline int vector_rank(int m, int n, int r1, int r2) { return n * r1 + m * r2 - r1 * r2; }

// ---------------------------------------------------------------------------
// Dickey-Fuller test without deterministic terms

namespace df_table {
// Asymptotic quantiles of the no-constant Dickey-Fuller t distribution.
inline constexpr std::array<double, 11> probs = {0.001, 0.01, 0.025, 0.05, 0.10, 0.50,
                                                 0.90,  0.95, 0.975, 0.99, 0.999};
inline constexpr std::array<double, 11> quantiles = {-3.2939, -2.5646, -2.2260, -1.9402, -1.6165, -0.4906,
                                                     0.8915,  1.2941,  1.6280,  1.9914,  2.6559};
}  // namespace df_table

// Left-tail probability of a DF t statistic, linear between table points and
// clipped to [0.001, 0.999].
inline double df_pvalue(double stat) {
  using namespace df_table;
  if (std::isnan(stat)) throw NumericalError("df_pvalue: NaN statistic");
  if (stat <= quantiles.front()) return probs.front();
  if (stat >= quantiles.back()) return probs.back();
  const auto it = std::upper_bound(quantiles.begin(), quantiles.end(), stat);
  const std::size_t hi = static_cast<std::size_t>(it - quantiles.begin());
  const std::size_t lo = hi - 1;
  const double w = (stat - quantiles[lo]) / (quantiles[hi] - quantiles[lo]);
  return probs[lo] + w * (probs[hi] - probs[lo]);
}

struct AdfOptions {
  int lags = 0;
  bool auto_lags = false;  // choose 0..max_lags by BIC on a common sample
  int max_lags = 12;
};

struct AdfResult {
  double stat = 0.0;
  double p_value = 1.0;
  int lags = 0;
  int nobs = 0;
};

namespace detail {

struct AdfFit {
  double stat = 0.0;
  double ssr = 0.0;
  int nobs = 0;
};

// OLS of dy_t on y_{t-1}, dy_{t-1..t-lags}, t = start .. T-1.
inline AdfFit adf_regression(const Vector& y, int lags, int start) {
  const Eigen::Index T = y.size();
  const Eigen::Index nobs = T - start;
  const Eigen::Index k = 1 + lags;
  Matrix x(nobs, k);
  Vector dy(nobs);
  for (Eigen::Index c = 0; c < nobs; ++c) {
    const Eigen::Index t = c + start;
    dy(c) = y(t) - y(t - 1);
    x(c, 0) = y(t - 1);
    for (int i = 1; i <= lags; ++i) x(c, i) = y(t - i) - y(t - i - 1);
  }
  const Eigen::ColPivHouseholderQR<Matrix> qr(x);
  if (qr.rank() < k) throw DataError("adf_test: regressors are collinear (constant or degenerate series)");
  const Vector b = qr.solve(dy);
  const Vector e = dy - x * b;
  AdfFit out;
  out.nobs = static_cast<int>(nobs);
  out.ssr = e.squaredNorm();
  const double s2 = out.ssr / static_cast<double>(nobs - k);
  const Matrix xtx_inv = (x.transpose() * x).ldlt().solve(Matrix::Identity(k, k));
  const double se = std::sqrt(s2 * xtx_inv(0, 0));
  if (se == 0.0)
    out.stat = b(0) < 0.0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  else
    out.stat = b(0) / se;
  return out;
}

}  // namespace detail

inline AdfResult adf_test(const Vector& y, const AdfOptions& opts = {}) {
  if (opts.lags < 0 || opts.max_lags < 0) throw ConfigError("adf_test: lag order must be nonnegative");
  if (!y.allFinite()) throw DataError("adf_test: non-finite observations");
  const int max_l = opts.auto_lags ? opts.max_lags : opts.lags;
  if (y.size() <= max_l + 10) throw DataError("adf_test: series too short for the lag order");
  const double mean_abs = y.cwiseAbs().mean();
  if ((y.array() - y(0)).abs().maxCoeff() <= 1e-14 * std::max(mean_abs, 1.0))
    throw DataError("adf_test: constant series");
  int lags = opts.lags;
  if (opts.auto_lags) {
    double best = std::numeric_limits<double>::infinity();
    for (int l = 0; l <= opts.max_lags; ++l) {
      const detail::AdfFit f = detail::adf_regression(y, l, opts.max_lags + 1);
      const double bic = f.nobs * std::log(f.ssr / f.nobs) + (1 + l) * std::log(static_cast<double>(f.nobs));
      if (bic < best) {
        best = bic;
        lags = l;
      }
    }
  }
  const detail::AdfFit f = detail::adf_regression(y, lags, lags + 1);
  AdfResult out;
  out.stat = f.stat;
  out.lags = lags;
  out.nobs = f.nobs;
  out.p_value = df_pvalue(f.stat);
  return out;
}

// ---------------------------------------------------------------------------
// Trace test

enum class TraceTable { constant, none };

// 5% trace critical values for system dimensions 1..12 (dimension = k - i
// for the null rank <= i). `constant`: unrestricted constant in the data;
// `none`: no deterministic terms.
inline const std::array<double, 12>& trace_critical_5pct(TraceTable t) {
  static const std::array<double, 12> constant = {3.8415,   15.4943,  29.7961,  47.8545,
                                                  69.8189,  95.7542,  125.6185, 159.5290,
                                                  197.3772, 239.2468, 285.1402, 334.9795};
  static const std::array<double, 12> none = {4.1296,   12.3212,  24.2761,  40.1749,  60.0627,  83.9383,
                                              111.7797, 143.6691, 179.5199, 219.4051, 263.2603, 311.1288};
  return t == TraceTable::constant ? constant : none;
}

// Critical values keyed by (dimension, level).
class CriticalValues {
 public:
  explicit CriticalValues(TraceTable t = TraceTable::none) {
    const auto& tab = trace_critical_5pct(t);
    for (std::size_t i = 0; i < tab.size(); ++i) values_[{static_cast<int>(i + 1), key(0.05)}] = tab[i];
  }

  // CSV with header dimension,level,value. Entries override or extend the
  // embedded table.
  void load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("critical values: cannot open " + path);
    std::string line;
    int lineno = 0;
    bool header = true;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (header) {
        if (line != "dimension,level,value")
          throw DataError(path + ":" + std::to_string(lineno) + ": expected header dimension,level,value");
        header = false;
        continue;
      }
      std::istringstream ss(line);
      std::string a, b, c, extra;
      if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',') ||
          std::getline(ss, extra, ','))
        throw DataError(path + ":" + std::to_string(lineno) + ": expected three fields");
      try {
        std::size_t pos = 0;
        const int dim = std::stoi(a, &pos);
        if (pos != a.size() || dim < 1) throw std::invalid_argument("dimension");
        const double level = std::stod(b, &pos);
        if (pos != b.size() || !(level > 0.0 && level < 1.0)) throw std::invalid_argument("level");
        const double value = std::stod(c, &pos);
        if (pos != c.size() || !std::isfinite(value)) throw std::invalid_argument("value");
        values_[{dim, key(level)}] = value;
      } catch (const std::logic_error&) {
        throw DataError(path + ":" + std::to_string(lineno) + ": cannot parse '" + line + "'");
      }
    }
    if (header) throw DataError(path + ": empty critical-value file");
  }

  std::optional<double> get(int dimension, double level) const {
    const auto it = values_.find({dimension, key(level)});
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

 private:
  static long key(double level) { return std::lround(level * 1e6); }
  std::map<std::pair<int, long>, double> values_;
};

struct TraceRow {
  int null_rank = 0;
  double stat = 0.0;
  double critical = 0.0;
  bool reject = false;
};

struct TraceResult {
  std::vector<TraceRow> rows;
  Vector eigenvalues;
  int decided_rank = 0;
};

// Decided rank: first null rank that is not rejected, k if all are.
inline int trace_decision(const std::vector<double>& stats, const std::vector<double>& criticals) {
  if (stats.size() != criticals.size()) throw ConfigError("trace_decision: length mismatch");
  for (std::size_t i = 0; i < stats.size(); ++i)
    if (!(stats[i] > criticals[i])) return static_cast<int>(i);
  return static_cast<int>(stats.size());
}

// Johansen trace test on a k x T vector series with a VECM(p-1).
inline TraceResult trace_test(const Matrix& series, int p, const CriticalValues& cv = CriticalValues(),
                              double level = 0.05) {
  const int k = static_cast<int>(series.rows());
  if (k < 1) throw ConfigError("trace_test: empty system");
  std::vector<double> crit(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const auto c = cv.get(k - i, level);
    if (!c)
      throw ConfigError("trace_test: no critical value for dimension " + std::to_string(k - i) +
                        " (embedded tables cover 1..12 at the 5% level; supply a CSV)");
    crit[static_cast<std::size_t>(i)] = *c;
  }
  const PooledSample s = vecm_sample(series, p);
  s.validate();
  const RrrSolution sol = solve_rrr(pooled_moments(partial_out(s)), 0);
  const double nobs = static_cast<double>(s.count());
  TraceResult out;
  out.eigenvalues = sol.eigenvalues;
  std::vector<double> stats(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    double sum = 0.0;
    for (int j = i; j < k; ++j) sum += sol.loglik_terms(j);
    stats[static_cast<std::size_t>(i)] = -nobs * sum;
  }
  out.decided_rank = trace_decision(stats, crit);
  for (int i = 0; i < k; ++i) {
    const std::size_t u = static_cast<std::size_t>(i);
    out.rows.push_back({i, stats[u], crit[u], stats[u] > crit[u]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// VAR order by BIC

inline int bic_argmin(const std::vector<double>& bic) {
  if (bic.empty()) throw ConfigError("bic_argmin: empty list");
  return static_cast<int>(std::min_element(bic.begin(), bic.end()) - bic.begin());
}

// BIC of VAR(0..max_p) in levels (no intercept) on the common sample
// t = max_p .. T-1; series is k x T.
inline std::vector<double> var_bic(const Matrix& series, int max_p) {
  if (max_p < 0) throw ConfigError("var_bic: max_p must be nonnegative");
  const Eigen::Index k = series.rows();
  const Eigen::Index nobs = series.cols() - max_p;
  if (nobs <= k * max_p + k) throw DataError("var_bic: insufficient observations for max_p");
  const Matrix y = series.rightCols(nobs);
  std::vector<double> out;
  for (int q = 0; q <= max_p; ++q) {
    Matrix e = y;
    if (q > 0) {
      Matrix x(k * q, nobs);
      for (int i = 1; i <= q; ++i) x.middleRows(k * (i - 1), k) = series.middleCols(max_p - i, nobs);
      const Matrix b = (x * x.transpose()).ldlt().solve(x * y.transpose());
      e = y - b.transpose() * x;
    }
    const Matrix sig = e * e.transpose() / static_cast<double>(nobs);
    const Eigen::LLT<Matrix> llt(symmetrize(sig));
    if (llt.info() != Eigen::Success) throw NumericalError("var_bic: singular residual covariance");
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double ll = -0.5 * static_cast<double>(nobs) *
                      (static_cast<double>(k) * std::log(2.0 * M_PI) + logdet + static_cast<double>(k));
    out.push_back(-2.0 * ll + static_cast<double>(k * k * q) * std::log(static_cast<double>(nobs)));
  }
  return out;
}

inline int bic_var_order(const Matrix& series, int max_p) { return bic_argmin(var_bic(series, max_p)); }

// ---------------------------------------------------------------------------
// Disambiguation among admissible rank pairs

enum class RankOutcome { unique, selected, undefined_both, undefined_none };

inline const char* to_string(RankOutcome o) {
  switch (o) {
    case RankOutcome::unique: return "unique";
    case RankOutcome::selected: return "selected";
    case RankOutcome::undefined_both: return "undefined_both";
    case RankOutcome::undefined_none: return "undefined_none";
  }
  return "?";
}

struct ComponentAdf {
  std::string name;  // e.g. "row[1,2]" for component (1,2) of gamma' X_t
  AdfResult adf;
  bool reject = false;
};

struct CandidateReport {
  int r1 = 0;
  int r2 = 0;
  bool fitted = false;
  std::string error;
  std::vector<ComponentAdf> components;
  bool passes = false;
  std::optional<EccMarParams> params;
};

struct RankDecision {
  int r_hat = 0;
  std::vector<std::pair<int, int>> admissible;
  RankOutcome outcome = RankOutcome::undefined_none;
  std::optional<std::pair<int, int>> selected_pair;
  std::vector<CandidateReport> adf_reports;
};

// Scalar series of the row equilibria gamma' X_t (r1 x n) and column
// equilibria X_t theta (m x r2); each entry over time is one component.
struct Equilibria {
  std::vector<std::string> names;
  std::vector<Vector> series;
};

inline Equilibria equilibria(const MatrixSeries& s, const Matrix& gamma, const Matrix& theta) {
  Equilibria out;
  const int T = s.length();
  for (Eigen::Index i = 0; i < gamma.cols(); ++i)
    for (int j = 0; j < s.n; ++j) {
      Vector v(T);
      for (int t = 0; t < T; ++t) v(t) = gamma.col(i).dot(s.data[static_cast<std::size_t>(t)].col(j));
      out.names.push_back("row[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
      out.series.push_back(std::move(v));
    }
  for (int i = 0; i < s.m; ++i)
    for (Eigen::Index j = 0; j < theta.cols(); ++j) {
      Vector v(T);
      for (int t = 0; t < T; ++t) v(t) = s.data[static_cast<std::size_t>(t)].row(i).dot(theta.col(j));
      out.names.push_back("col[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
      out.series.push_back(std::move(v));
    }
  return out;
}

struct DisambiguateOptions {
  double level = 0.05;
  AdfOptions adf;
  FitOptions fit;
};

inline CandidateReport screen_candidate(const SeriesLayout& lay, const MatrixSeries& s, int r1, int r2,
                                        const DisambiguateOptions& opts) {
  CandidateReport rep;
  rep.r1 = r1;
  rep.r2 = r2;
  try {
    const FitResult f = fit_alternating(lay, r1, r2, opts.fit);
    rep.fitted = true;
    rep.params = f.params;
    const Equilibria eq = equilibria(s, f.params.gamma, f.params.theta);
    rep.passes = true;
    for (std::size_t k = 0; k < eq.series.size(); ++k) {
      ComponentAdf c;
      c.name = eq.names[k];
      c.adf = adf_test(eq.series[k], opts.adf);
      c.reject = c.adf.p_value < opts.level;
      rep.passes = rep.passes && c.reject;
      rep.components.push_back(std::move(c));
    }
  } catch (const Error& e) {
    rep.error = e.what();
    rep.passes = false;
  }
  return rep;
}

inline RankDecision disambiguate(const MatrixSeries& s, int r_hat, int p, const DisambiguateOptions& opts = {}) {
  if (!(opts.level > 0.0 && opts.level < 1.0)) throw ConfigError("disambiguate: level must lie in (0, 1)");
  RankDecision out;
  out.r_hat = r_hat;
  out.admissible = admissible_pairs(s.m, s.n, r_hat);
  if (out.admissible.empty())
    throw ConfigError("disambiguate: no admissible (r1, r2) for r = " + std::to_string(r_hat) + " with (m, n) = (" +
                      std::to_string(s.m) + ", " + std::to_string(s.n) + ")");
  if (out.admissible.size() == 1) {
    out.outcome = RankOutcome::unique;
    out.selected_pair = out.admissible.front();
    return out;
  }
  const SeriesLayout lay(s, p);
  int passing = 0;
  for (const auto& [r1, r2] : out.admissible) {
    out.adf_reports.push_back(screen_candidate(lay, s, r1, r2, opts));
    if (out.adf_reports.back().passes) {
      ++passing;
      out.selected_pair = std::make_pair(r1, r2);
    }
  }
  if (passing == 1) {
    out.outcome = RankOutcome::selected;
  } else {
    // More than one passing candidate is reported as undefined_both.
    out.selected_pair.reset();
    out.outcome = passing == 0 ? RankOutcome::undefined_none : RankOutcome::undefined_both;
  }
  return out;
}

// ||orth(gamma_hat)' orth(gamma_perp)||_F: how far an estimated space leans
// into the true common-trend directions.
inline double misspecification_distance(const Matrix& gamma_true, const Matrix& gamma_hat) {
  const Matrix qp = orth(orth_complement(gamma_true));
  const Matrix qh = orth(gamma_hat);
  return (qh.transpose() * qp).norm();
}

}  // namespace ecmar

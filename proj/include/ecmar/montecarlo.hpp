#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ecmar/dgp.hpp"
#include "ecmar/estimator.hpp"
#include "ecmar/inference.hpp"
#include "ecmar/random.hpp"
#include "ecmar/ranksel.hpp"

namespace ecmar {

// Runs body(i) for i in [0, count) on up to `threads` workers. Results must
// be written to per-index slots so the outcome is independent of scheduling.
// The first exception is rethrown after all workers finish.
inline void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (count <= 0) return;
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu);
        if (!err) err = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> pool;
  for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

struct Design {
  int m = 0;
  int n = 0;
  int r1 = 0;
  int r2 = 0;

  int rank() const { return vector_rank(m, n, r1, r2); }
  std::string label() const {
    return "(" + std::to_string(m) + "," + std::to_string(n) + "," + std::to_string(r1) + "," + std::to_string(r2) + ")";
  }
  void validate() const {
    if (m < 2 || n < 2 || !(0 < r1 && r1 < m && 0 < r2 && r2 < n))
      throw ConfigError("design " + label() + ": need 0 < r1 < m and 0 < r2 < n");
  }
};

// Seed tree: design parameters depend on (master, design, replication);
// innovations additionally on T.
inline std::uint64_t design_seed(std::uint64_t master, std::size_t design, int rep) {
  return derive_seed(derive_seed(derive_seed(master, 0), design), static_cast<std::uint64_t>(rep));
}

inline std::uint64_t series_seed(std::uint64_t master, std::size_t design, int T, int rep) {
  return derive_seed(derive_seed(derive_seed(derive_seed(master, 1), design), static_cast<std::uint64_t>(T)),
                     static_cast<std::uint64_t>(rep));
}

struct StudyOptions {
  std::uint64_t seed = 1;
  int replications = 100;
  int threads = 1;
  FitOptions fit;
};

// ---------------------------------------------------------------------------
// Estimation accuracy: ECC-MAR vs vectorized CVAR

struct EstimationRow {
  std::string design;
  int T = 0;
  std::string method;  // eccmar | cvar
  int replication = 0;
  double subspace_distance = 0.0;
};

struct EstimationHygiene {
  bool failed = false;  // the ECC-MAR fit raised a numerical error; its distance is NaN
  bool monotone = true;
  bool safeguard = false;
  bool converged = false;
  int iterations = 0;
};

struct EstimationStudy {
  std::vector<EstimationRow> rows;
  std::vector<EstimationHygiene> hygiene;  // one per ECC-MAR fit, same order as the eccmar rows
};

inline bool nondecreasing(const std::vector<double>& path) {
  for (std::size_t i = 1; i < path.size(); ++i)
    if (path[i] < path[i - 1]) return false;
  return true;
}

inline EstimationStudy run_estimation_study(const std::vector<Design>& designs, const std::vector<int>& Ts,
                                            const StudyOptions& opts) {
  struct Cell {
    std::size_t d;
    int T;
    int rep;
  };
  std::vector<Cell> cells;
  for (std::size_t d = 0; d < designs.size(); ++d) {
    designs[d].validate();
    for (int T : Ts)
      for (int rep = 0; rep < opts.replications; ++rep) cells.push_back({d, T, rep});
  }
  std::vector<EstimationRow> ecc(cells.size()), cvar(cells.size());
  std::vector<EstimationHygiene> hyg(cells.size());
  parallel_for(static_cast<int>(cells.size()), opts.threads, [&](int k) {
    const Cell& c = cells[static_cast<std::size_t>(k)];
    const Design& dz = designs[c.d];
    const EccMarParams par = draw_design(dz.m, dz.n, dz.r1, dz.r2, design_seed(opts.seed, c.d, c.rep));
    const MatrixSeries s = simulate(par, c.T, series_seed(opts.seed, c.d, c.T, c.rep));
    const Subspace truth(implied_vecm(par).beta);
    const std::size_t u = static_cast<std::size_t>(k);
    const VecmFit cv = fit_cvar(s, dz.rank(), 1);
    cvar[u] = {dz.label(), c.T, "cvar", c.rep, subspace_distance(Subspace(cv.beta), truth)};
    try {
      const FitResult f = fit_alternating(s, dz.r1, dz.r2, 1, opts.fit);
      ecc[u] = {dz.label(), c.T, "eccmar", c.rep, subspace_distance(Subspace(f.implied_beta), truth)};
      hyg[u] = {false, nondecreasing(f.loglik_path), f.safeguard_triggered, f.converged, f.iterations};
    } catch (const NumericalError&) {
      ecc[u] = {dz.label(), c.T, "eccmar", c.rep, std::nan("")};
      hyg[u] = {true, true, false, false, 0};
    }
  });
  EstimationStudy out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    out.rows.push_back(ecc[k]);
    out.rows.push_back(cvar[k]);
  }
  out.hygiene = std::move(hyg);
  return out;
}

// ---------------------------------------------------------------------------
// Rank identification

struct RankIdCell {
  std::string design;  // "(m,n,r)"
  int T = 0;
  std::vector<std::string> labels;  // admissible pairs then Und.1, Und.2
  std::vector<int> counts;
  int replications = 0;
  std::vector<double> dt;  // misspecification distance of the larger-r1 candidate, when requested
};

inline std::string pair_label(int r1, int r2) {
  return "(r1,r2)=(" + std::to_string(r1) + "," + std::to_string(r2) + ")";
}

struct RankIdOptions {
  StudyOptions study;
  DisambiguateOptions disambiguate;
  bool dt_diagnostic = false;
};

inline std::vector<RankIdCell> run_rank_id_study(const std::vector<Design>& designs, const std::vector<int>& Ts,
                                                 const RankIdOptions& opts) {
  std::vector<RankIdCell> out;
  for (std::size_t d = 0; d < designs.size(); ++d) {
    const Design& dz = designs[d];
    dz.validate();
    const int r = dz.rank();
    const auto pairs = admissible_pairs(dz.m, dz.n, r);
    for (int T : Ts) {
      RankIdCell cell;
      cell.design = "(" + std::to_string(dz.m) + "," + std::to_string(dz.n) + "," + std::to_string(r) + ")";
      cell.T = T;
      cell.replications = opts.study.replications;
      for (const auto& [a, b] : pairs) cell.labels.push_back(pair_label(a, b));
      cell.labels.push_back("Und.1: Both");
      cell.labels.push_back("Und.2: None");
      if (pairs.size() == 1) cell.labels.assign({pair_label(pairs[0].first, pairs[0].second)});
      std::vector<int> outcome(static_cast<std::size_t>(opts.study.replications));
      std::vector<double> dt(static_cast<std::size_t>(opts.study.replications), std::nan(""));
      DisambiguateOptions dopt = opts.disambiguate;
      dopt.fit = opts.study.fit;
      parallel_for(opts.study.replications, opts.study.threads, [&](int rep) {
        const EccMarParams par = draw_design(dz.m, dz.n, dz.r1, dz.r2, design_seed(opts.study.seed, d, rep));
        const MatrixSeries s = simulate(par, T, series_seed(opts.study.seed, d, T, rep));
        const RankDecision dec = disambiguate(s, r, 1, dopt);
        int idx = 0;
        switch (dec.outcome) {
          case RankOutcome::unique:
          case RankOutcome::selected: {
            const auto it = std::find(pairs.begin(), pairs.end(), *dec.selected_pair);
            idx = static_cast<int>(it - pairs.begin());
            break;
          }
          case RankOutcome::undefined_both: idx = static_cast<int>(pairs.size()); break;
          case RankOutcome::undefined_none: idx = static_cast<int>(pairs.size()) + 1; break;
        }
        outcome[static_cast<std::size_t>(rep)] = idx;
        if (opts.dt_diagnostic) {
          for (const auto& cand : dec.adf_reports)
            if (cand.r1 > dz.r1 && cand.params) dt[static_cast<std::size_t>(rep)] =
                misspecification_distance(par.gamma, cand.params->gamma);
        }
      });
      cell.counts.assign(cell.labels.size(), 0);
      for (int o : outcome) ++cell.counts[static_cast<std::size_t>(o)];
      if (opts.dt_diagnostic) cell.dt = std::move(dt);
      out.push_back(std::move(cell));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Test size and power on the fixed (4,3,2,2) design

struct Hypothesis {
  std::string label;
  Side side = Side::row;
  Restriction restriction;
  bool null_true = true;
};

inline std::vector<Hypothesis> default_hypotheses() {
  auto perp = [](std::initializer_list<double> v) {
    Matrix r(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) r(i++, 0) = x;
    return orth_complement(r);
  };
  auto col = [](std::initializer_list<double> v) {
    Matrix g(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) g(i++, 0) = x;
    return g;
  };
  std::vector<Hypothesis> h;
  h.push_back({"tau(1)=0", Side::row, AdjustmentRestriction{exclusion_basis(4, 0)}, true});
  h.push_back({"[1 1 0]theta=0", Side::column, UniformRestriction{perp({1, 1, 0})}, true});
  h.push_back({"(0,-0.5,-0.5,1) in sp(gamma)", Side::row, KnownVectors{col({0, -0.5, -0.5, 1})}, true});
  h.push_back({"tau(3)=0", Side::row, AdjustmentRestriction{exclusion_basis(4, 2)}, false});
  for (double a : {1.1, 1.3, 1.5}) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "[1 %g 0]theta=0", a);
    h.push_back({buf, Side::column, UniformRestriction{perp({1, a, 0})}, false});
  }
  for (double b : {-0.6, -0.8, -1.0}) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "(0,-0.5,%g,1) in sp(gamma)", b);
    h.push_back({buf, Side::row, KnownVectors{col({0, -0.5, b, 1})}, false});
  }
  return h;
}

struct RejectionRow {
  std::string hypothesis;
  bool null_true = true;
  int T = 0;
  int replications = 0;
  int rejections = 0;
  int failures = 0;  // replications where the fit or test raised a numerical error

  double rate() const { return replications > 0 ? static_cast<double>(rejections) / replications : 0.0; }
};

struct TestStudyOptions {
  StudyOptions study;
  double level = 0.05;
  bool refit = false;  // full re-alternation variant instead of the conditional test
};

inline std::vector<RejectionRow> run_test_study(const std::vector<Hypothesis>& hyps, const std::vector<int>& Ts,
                                                const TestStudyOptions& opts) {
  const EccMarParams par = fixed_test_design();
  std::vector<RejectionRow> out;
  for (int T : Ts) {
    const int reps = opts.study.replications;
    // 1 = reject, 0 = accept, -1 = failure
    std::vector<std::vector<int>> res(hyps.size(), std::vector<int>(static_cast<std::size_t>(reps), 0));
    parallel_for(reps, opts.study.threads, [&](int rep) {
      const MatrixSeries s = simulate(par, T, series_seed(opts.study.seed, 0, T, rep));
      const SeriesLayout lay(s, 1);
      std::optional<FitResult> f;
      try {
        f = fit_alternating(lay, par.r1, par.r2, opts.study.fit);
      } catch (const NumericalError&) {
        for (auto& v : res) v[static_cast<std::size_t>(rep)] = -1;
        return;
      }
      const FitContext ctx = make_fit_context(lay, f->params);
      for (std::size_t h = 0; h < hyps.size(); ++h) {
        try {
          const TestResult t = opts.refit ? lr_refit(lay, *f, hyps[h].side, hyps[h].restriction, opts.study.fit)
                                          : lr_test(ctx, hyps[h].side, hyps[h].restriction);
          res[h][static_cast<std::size_t>(rep)] = t.p_value < opts.level ? 1 : 0;
        } catch (const NumericalError&) {
          res[h][static_cast<std::size_t>(rep)] = -1;
        }
      }
    });
    for (std::size_t h = 0; h < hyps.size(); ++h) {
      RejectionRow row;
      row.hypothesis = hyps[h].label;
      row.null_true = hyps[h].null_true;
      row.T = T;
      row.replications = reps;
      for (int v : res[h]) {
        row.rejections += v == 1;
        row.failures += v == -1;
      }
      out.push_back(row);
    }
  }
  return out;
}

}  // namespace ecmar

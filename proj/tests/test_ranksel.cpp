#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ecmar/dgp.hpp"
#include "ecmar/ranksel.hpp"
#include "helpers.hpp"

using namespace ecmar;
using testutil::randn;

namespace {

Vector random_walk(int T, SeedStream& rng) {
  Vector y(T);
  double level = 0;
  for (int t = 0; t < T; ++t) y(t) = level += rng.normal();
  return y;
}

Vector ar1(double a, int T, SeedStream& rng) {
  Vector y(T);
  double v = 0;
  for (int t = 0; t < T; ++t) y(t) = v = a * v + rng.normal();
  return y;
}

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST(AdmissiblePairs, Examples) {
  using P = std::vector<std::pair<int, int>>;
  EXPECT_EQ(admissible_pairs(4, 3, 8), (P{{2, 1}}));
  EXPECT_EQ(admissible_pairs(4, 3, 10), (P{{2, 2}, {3, 1}}));
  EXPECT_EQ(admissible_pairs(2, 3, 4), (P{{1, 1}}));
  EXPECT_TRUE(admissible_pairs(4, 3, 1).empty());
}

TEST(AdmissiblePairs, ExactIdentityOverGrid) {
  for (int m = 2; m <= 8; ++m)
    for (int n = 2; n <= 8; ++n) {
      int total = 0;
      for (int r = 1; r < m * n; ++r) {
        const auto pairs = admissible_pairs(m, n, r);
        for (std::size_t i = 0; i < pairs.size(); ++i) {
          const auto [r1, r2] = pairs[i];
          EXPECT_EQ(n * r1 + m * r2 - r1 * r2, r);
          EXPECT_TRUE(0 < r1 && r1 < m && 0 < r2 && r2 < n);
          if (i > 0) EXPECT_LT(pairs[i - 1], pairs[i]);
        }
        total += static_cast<int>(pairs.size());
      }
      EXPECT_EQ(total, (m - 1) * (n - 1));
    }
}

TEST(DfPvalue, TableAndClip) {
  EXPECT_EQ(df_pvalue(-10.0), 0.001);
  EXPECT_EQ(df_pvalue(10.0), 0.999);
  EXPECT_NEAR(df_pvalue(-1.9402), 0.05, 1e-12);
  EXPECT_NEAR(df_pvalue(-2.5646), 0.01, 1e-12);
  double prev = 0.0;
  for (double s = -4.0; s <= 3.0; s += 0.01) {
    const double p = df_pvalue(s);
    EXPECT_GE(p, prev);
    prev = p;
  }
  EXPECT_THROW(df_pvalue(std::nan("")), NumericalError);
}

TEST(Adf, RandomWalkSize) {
  SeedStream rng(1);
  int keep = 0;
  const int reps = 400;
  for (int i = 0; i < reps; ++i) keep += adf_test(random_walk(1000, rng)).p_value > 0.05;
  const double frac = static_cast<double>(keep) / reps;
  EXPECT_GT(frac, 0.91);
  EXPECT_LT(frac, 0.99);
}

TEST(Adf, StationaryPower) {
  SeedStream rng(2);
  int rej = 0;
  const int reps = 200;
  for (int i = 0; i < reps; ++i) rej += adf_test(ar1(0.5, 1000, rng)).p_value < 0.05;
  EXPECT_GT(static_cast<double>(rej) / reps, 0.99);
}

TEST(Adf, DeterministicDecayClips) {
  Vector y(60);
  for (int t = 0; t < 60; ++t) y(t) = std::pow(0.5, t);
  const AdfResult r = adf_test(y);
  EXPECT_LT(r.stat, -10.0);
  EXPECT_EQ(r.p_value, 0.001);
}

TEST(Adf, ScaleInvariance) {
  SeedStream rng(3);
  const Vector y = ar1(0.9, 300, rng);
  for (int lags : {0, 2}) {
    AdfOptions o;
    o.lags = lags;
    const double a = adf_test(y, o).stat;
    EXPECT_NEAR(adf_test(7.3 * y, o).stat, a, 1e-10);
    EXPECT_NEAR(adf_test(0.01 * y, o).stat, a, 1e-10);
  }
}

TEST(Adf, AutoLagsPicksAnOrder) {
  SeedStream rng(4);
  AdfOptions o;
  o.auto_lags = true;
  o.max_lags = 6;
  const AdfResult r = adf_test(ar1(0.3, 500, rng), o);
  EXPECT_GE(r.lags, 0);
  EXPECT_LE(r.lags, 6);
  EXPECT_EQ(r.nobs, 500 - r.lags - 1);
}

TEST(Adf, Errors) {
  EXPECT_THROW(adf_test(Vector::Constant(100, 2.0)), DataError);
  EXPECT_THROW(adf_test(Vector::LinSpaced(8, 0, 1)), DataError);
  AdfOptions o;
  o.lags = -1;
  EXPECT_THROW(adf_test(Vector::LinSpaced(100, 0, 1), o), ConfigError);
  Vector bad = Vector::LinSpaced(100, 0, 1);
  bad(5) = std::nan("");
  EXPECT_THROW(adf_test(bad), DataError);
}

TEST(Trace, TableEightDecision) {
  const std::vector<double> stats{214.13, 128.69, 73.50, 33.90, 12.93, 3.12};
  const std::vector<double> crit{95.75, 69.82, 47.86, 29.80, 15.49, 3.84};
  EXPECT_EQ(trace_decision(stats, crit), 4);
  EXPECT_EQ(trace_decision({1.0, 0.5}, {3.0, 2.0}), 0);
  EXPECT_EQ(trace_decision({10.0, 9.0}, {3.0, 2.0}), 2);
  EXPECT_THROW(trace_decision({1.0}, {1.0, 2.0}), ConfigError);
}

TEST(Trace, EmbeddedTables) {
  EXPECT_NEAR(trace_critical_5pct(TraceTable::constant)[0], 3.8415, 1e-4);
  EXPECT_NEAR(trace_critical_5pct(TraceTable::none)[0], 4.1296, 1e-4);
  for (TraceTable t : {TraceTable::constant, TraceTable::none}) {
    const auto& tab = trace_critical_5pct(t);
    for (std::size_t i = 1; i < tab.size(); ++i) EXPECT_GT(tab[i], tab[i - 1]);
  }
}

TEST(Trace, WhiteNoiseIsFullRank) {
  SeedStream rng(5);
  int full = 0;
  for (int i = 0; i < 100; ++i) full += trace_test(randn(2, 500, rng), 1).decided_rank == 2;
  EXPECT_GE(full, 95);
}

TEST(Trace, RandomWalkIsRankZero) {
  SeedStream rng(6);
  int zero = 0;
  const int reps = 400;
  for (int i = 0; i < reps; ++i) {
    Matrix y(2, 500);
    y.row(0) = random_walk(500, rng).transpose();
    y.row(1) = random_walk(500, rng).transpose();
    zero += trace_test(y, 1).decided_rank == 0;
  }
  const double frac = static_cast<double>(zero) / reps;
  EXPECT_GT(frac, 0.91);
  EXPECT_LT(frac, 0.99);
}

TEST(Trace, StatisticsNonIncreasing) {
  const EccMarParams par = draw_design(4, 3, 2, 1, 3);
  const TraceResult r = trace_test(simulate(par, 500, 3).vectorized(), 1);
  ASSERT_EQ(r.rows.size(), 12u);
  for (std::size_t i = 1; i < r.rows.size(); ++i) EXPECT_LE(r.rows[i].stat, r.rows[i - 1].stat);
  EXPECT_EQ(r.decided_rank, 8);
}

TEST(Trace, LargeSystemNeedsTable) {
  SeedStream rng(7);
  const Matrix y = randn(13, 300, rng);
  EXPECT_THROW(trace_test(y, 1), ConfigError);
  std::string body = "dimension,level,value\n";
  for (int d = 1; d <= 13; ++d) body += std::to_string(d) + ",0.05," + std::to_string(4.0 * d) + "\n";
  const auto path = temp_file("ecmar_cv13.csv", body);
  CriticalValues cv;
  cv.load_csv(path.string());
  EXPECT_EQ(*cv.get(13, 0.05), 52.0);
  EXPECT_EQ(*cv.get(2, 0.05), 8.0);
  const TraceResult r = trace_test(y, 1, cv);
  EXPECT_EQ(r.rows.front().critical, 52.0);
  EXPECT_EQ(r.rows.back().critical, 4.0);
  std::filesystem::remove(path);
}

TEST(Trace, CsvErrors) {
  CriticalValues cv;
  const auto bad_header = temp_file("ecmar_cv_bad1.csv", "dim,level,value\n1,0.05,3\n");
  EXPECT_THROW(cv.load_csv(bad_header.string()), DataError);
  const auto bad_row = temp_file("ecmar_cv_bad2.csv", "dimension,level,value\n1,0.05,abc\n");
  EXPECT_THROW(cv.load_csv(bad_row.string()), DataError);
  EXPECT_THROW(cv.load_csv("/nonexistent/cv.csv"), DataError);
  std::filesystem::remove(bad_header);
  std::filesystem::remove(bad_row);
  EXPECT_FALSE(cv.get(1, 0.01).has_value());
}

TEST(Bic, TableSevenArgmin) { EXPECT_EQ(bic_argmin({9260.3, 6992.4, 7055.5, 7152.8, 7258.1}), 1); }

TEST(Bic, Var1IsOrderOne) {
  SeedStream rng(8);
  Matrix a(2, 2);
  a << 0.5, 0.1, -0.2, 0.4;
  int hits = 0;
  for (int i = 0; i < 50; ++i) {
    Matrix y(2, 2000);
    y.col(0).setZero();
    for (int t = 1; t < 2000; ++t) y.col(t) = a * y.col(t - 1) + randn(2, 1, rng);
    hits += bic_var_order(y, 4) == 1;
  }
  EXPECT_GE(hits, 45);
}

TEST(Bic, WhiteNoiseIsOrderZero) {
  SeedStream rng(9);
  int hits = 0;
  for (int i = 0; i < 50; ++i) hits += bic_var_order(randn(2, 500, rng), 4) == 0;
  EXPECT_GE(hits, 45);
}

TEST(Bic, Errors) {
  EXPECT_THROW(var_bic(randn(3, 10, 1), 4), DataError);
  EXPECT_THROW(var_bic(randn(3, 100, 1), -1), ConfigError);
  EXPECT_THROW(bic_argmin({}), ConfigError);
}

TEST(Equilibria, NamesAndValues) {
  const EccMarParams par = fixed_test_design();
  const MatrixSeries s = simulate(par, 20, 1);
  const Equilibria eq = equilibria(s, par.gamma, par.theta);
  ASSERT_EQ(eq.series.size(), static_cast<std::size_t>(2 * 3 + 4 * 2));
  EXPECT_EQ(eq.names.front(), "row[1,1]");
  EXPECT_EQ(eq.names[6], "col[1,1]");
  EXPECT_EQ(eq.names.back(), "col[4,2]");
  EXPECT_NEAR(eq.series[1](5), par.gamma.col(0).dot(s.data[5].col(1)), 1e-14);
  EXPECT_NEAR(eq.series.back()(7), s.data[7].row(3).dot(par.theta.col(1)), 1e-14);
}

TEST(Disambiguate, UniqueShortcutSkipsFitting) {
  const MatrixSeries s = simulate(draw_design(4, 3, 2, 1, 1), 200, 1);
  const RankDecision d = disambiguate(s, 8, 1);
  EXPECT_EQ(d.outcome, RankOutcome::unique);
  ASSERT_TRUE(d.selected_pair.has_value());
  EXPECT_EQ(*d.selected_pair, std::make_pair(2, 1));
  EXPECT_TRUE(d.adf_reports.empty());
}

TEST(Disambiguate, NoAdmissiblePair) {
  const MatrixSeries s = simulate(draw_design(4, 3, 2, 1, 1), 200, 1);
  EXPECT_THROW(disambiguate(s, 1, 1), ConfigError);
}

TEST(Disambiguate, OutcomeMatchesPassCount) {
  int selected_true = 0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const MatrixSeries s = simulate(draw_design(4, 3, 2, 2, 50 + seed), 1000, seed);
    const RankDecision d = disambiguate(s, 10, 1);
    ASSERT_EQ(d.adf_reports.size(), 2u);
    int passing = 0;
    for (const auto& rep : d.adf_reports) {
      passing += rep.passes;
      if (rep.fitted) EXPECT_EQ(rep.components.size(), static_cast<std::size_t>(rep.r1 * 3 + 4 * rep.r2));
      bool all = rep.fitted;
      for (const auto& c : rep.components) all = all && c.reject;
      EXPECT_EQ(all, rep.passes);
    }
    switch (d.outcome) {
      case RankOutcome::selected:
        EXPECT_EQ(passing, 1);
        ASSERT_TRUE(d.selected_pair.has_value());
        selected_true += *d.selected_pair == std::make_pair(2, 2);
        break;
      case RankOutcome::undefined_both: EXPECT_EQ(passing, 2); break;
      case RankOutcome::undefined_none: EXPECT_EQ(passing, 0); break;
      default: ADD_FAILURE() << "unexpected outcome";
    }
  }
  EXPECT_GE(selected_true, 2);
}

TEST(Misspecification, ZeroForTrueSpace) {
  const Matrix g = randn(4, 2, 3);
  Matrix mix(2, 2);
  mix << 1, 2, 0, 1;
  EXPECT_LT(misspecification_distance(g, g * mix), 1e-12);
  EXPECT_GT(misspecification_distance(g, randn(4, 2, 4)), 0.1);
}

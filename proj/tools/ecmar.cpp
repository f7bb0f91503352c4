// ecmar: simulate, fit, rank selection, LR tests and Monte Carlo studies for
// cointegrated matrix autoregressions.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ecmar/dgp.hpp"
#include "ecmar/estimator.hpp"
#include "ecmar/inference.hpp"
#include "ecmar/io.hpp"
#include "ecmar/montecarlo.hpp"
#include "ecmar/ranksel.hpp"
#include "ecmar/report.hpp"

namespace fs = std::filesystem;
using namespace ecmar;

namespace {

struct Globals {
  std::string config;
  std::string output;
  std::optional<unsigned long long> seed;
  int threads = 1;
};

const std::set<std::string> kFitKeys = {"tolerance", "max_iterations", "update_rule"};

std::set<std::string> keys(std::initializer_list<std::string> own, bool fit_keys = false) {
  std::set<std::string> s(own);
  s.insert("output_dir");
  if (fit_keys) s.insert(kFitKeys.begin(), kFitKeys.end());
  return s;
}

fs::path output_dir(const Globals& g, const Config& c) {
  const fs::path dir = !g.output.empty() ? fs::path(g.output) : fs::path(c.str("output_dir", "."));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::uint64_t seed_of(const Globals& g, const Config& c) {
  if (g.seed) return *g.seed;
  const long long s = c.integer("seed", 1);
  if (s < 0) throw ConfigError("seed must be nonnegative");
  return static_cast<std::uint64_t>(s);
}

int positive(const Config& c, const std::string& key, long long def = -1) {
  const long long v = def < 0 ? c.integer(key) : c.integer(key, def);
  if (v < 1 || v > 1000000000) throw ConfigError("config key '" + key + "' must be a positive integer");
  return static_cast<int>(v);
}

FitOptions fit_options(const Config& c) {
  FitOptions o;
  o.tolerance = c.real("tolerance", o.tolerance);
  o.max_iterations = static_cast<int>(c.integer("max_iterations", o.max_iterations));
  const std::string rule = c.str("update_rule", "full_information");
  if (rule == "full_information") o.rule = UpdateRule::full_information;
  else if (rule == "projected") o.rule = UpdateRule::projected;
  else throw ConfigError("update_rule must be full_information or projected");
  o.validate();
  return o;
}

double level_of(const Config& c) {
  const double a = c.real("alpha_level", 0.05);
  if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha_level must lie in (0, 1)");
  return a;
}

AdfOptions adf_options(const Config& c) {
  AdfOptions a;
  const std::string lags = c.str("adf_lags", "0");
  if (lags == "auto") {
    a.auto_lags = true;
    a.max_lags = static_cast<int>(c.integer("adf_max_lags", 12));
  } else {
    a.lags = static_cast<int>(c.integer("adf_lags", 0));
  }
  if (a.lags < 0 || a.max_lags < 0) throw ConfigError("adf lag orders must be nonnegative");
  return a;
}

CriticalValues critical_values(const Config& c) {
  const std::string t = c.str("trace_table", "none");
  TraceTable tab = TraceTable::none;
  if (t == "constant") tab = TraceTable::constant;
  else if (t != "none") throw ConfigError("trace_table must be none or constant");
  CriticalValues cv(tab);
  if (c.has("critical_values")) cv.load_csv(c.str("critical_values"));
  return cv;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Globals& g) {
  const Config c = Config::load(g.config);
  c.reject_unknown(keys({"m", "n", "r1", "r2", "T", "seed", "burnin", "design", "params"}), "simulate");
  const std::uint64_t seed = seed_of(g, c);
  const std::string design = c.str("design", "random");
  EccMarParams par;
  if (c.has("params")) {
    par = params_from_json(read_json(c.str("params")));
  } else if (design == "fixed_test") {
    par = fixed_test_design();
  } else if (design == "random") {
    par = draw_design(positive(c, "m"), positive(c, "n"), positive(c, "r1"), positive(c, "r2"), derive_seed(seed, 0));
  } else {
    throw ConfigError("design must be random or fixed_test");
  }
  SimulateOptions so;
  so.burnin = static_cast<int>(c.integer("burnin", 100));
  const MatrixSeries s = simulate(par, positive(c, "T"), derive_seed(seed, 1), so);
  const fs::path dir = output_dir(g, c);
  export_csv(s, (dir / "series.csv").string());
  json pj = params_json(par);
  pj["format"] = "ecmar-params";
  pj["version"] = 1;
  pj["I1"] = check_I1(par).is_I1;
  write_json(pj, (dir / "params.json").string());
  std::printf("simulated T=%d, (m,n)=(%d,%d), (r1,r2)=(%d,%d) -> %s\n", s.length(), s.m, s.n, par.r1, par.r2,
              (dir / "series.csv").string().c_str());
  return 0;
}

// Trace test on vec(X_t), then disambiguation among admissible pairs.
struct AutoRanks {
  TraceResult trace;
  RankDecision decision;
};

AutoRanks auto_ranks(const MatrixSeries& s, int p, const Config& c, const FitOptions& fo) {
  AutoRanks a;
  DisambiguateOptions d;
  d.level = level_of(c);
  d.adf = adf_options(c);
  d.fit = fo;
  int r = 0;
  if (c.has("r")) {
    r = positive(c, "r");
    a.trace.decided_rank = r;
  } else {
    a.trace = trace_test(s.vectorized(), p, critical_values(c));
    r = a.trace.decided_rank;
  }
  if (admissible_pairs(s.m, s.n, r).empty())
    throw DataError("rank r = " + std::to_string(r) + " has no admissible (r1, r2) for (m, n) = (" +
                    std::to_string(s.m) + ", " + std::to_string(s.n) + ")");
  a.decision = disambiguate(s, r, p, d);
  return a;
}

int lag_order(const MatrixSeries& s, const Config& c) {
  const std::string p = c.str("p", "1");
  if (p == "auto") {
    const int k = bic_var_order(s.vectorized(), static_cast<int>(c.integer("max_p", 4)));
    return std::max(k, 1);
  }
  return positive(c, "p", 1);
}

int cmd_fit(const Globals& g) {
  const Config c = Config::load(g.config);
  c.reject_unknown(keys({"data", "r1", "r2", "ranks", "r", "p", "max_p", "alpha_level", "adf_lags", "adf_max_lags",
                         "trace_table", "critical_values"},
                        true),
                   "fit");
  const FitOptions fo = fit_options(c);
  const MatrixSeries s = ingest_csv(c.str("data"));
  const int p = lag_order(s, c);
  const fs::path dir = output_dir(g, c);
  int r1 = 0;
  int r2 = 0;
  if (c.str("ranks", "") == "auto") {
    if (c.has("r1") || c.has("r2")) throw ConfigError("ranks=auto conflicts with r1/r2");
    const AutoRanks a = auto_ranks(s, p, c, fo);
    json rj;
    rj["format"] = "ecmar-ranks";
    rj["version"] = 1;
    rj["p"] = p;
    rj["trace"] = c.has("r") ? json(nullptr) : trace_json(a.trace);
    rj["decision"] = decision_json(a.decision);
    write_json(rj, (dir / "ranks.json").string());
    if (!a.decision.selected_pair)
      throw DataError(std::string("automatic rank selection is undefined (") + to_string(a.decision.outcome) +
                      "); set r1 and r2");
    r1 = a.decision.selected_pair->first;
    r2 = a.decision.selected_pair->second;
  } else {
    if (c.has("ranks")) throw ConfigError("ranks must be 'auto' or omitted");
    r1 = positive(c, "r1");
    r2 = positive(c, "r2");
  }
  const FitResult f = fit_alternating(s, r1, r2, p, fo);
  json fj = fit_json(f, s, fo.rule);
  write_json(fj, (dir / "fit.json").string());

  const Equilibria eq = equilibria(s, f.params.gamma, f.params.theta);
  const AdfOptions adf = adf_options(c);
  std::ostringstream csv;
  csv << "component,time,value,adf_stat,adf_p_value\n";
  std::printf("%-12s %12s %12s\n", "component", "adf_stat", "p_value");
  for (std::size_t k = 0; k < eq.series.size(); ++k) {
    std::string stat = "";
    std::string pv = "";
    try {
      const AdfResult a = adf_test(eq.series[k], adf);
      stat = format_double(a.stat);
      pv = format_double(a.p_value);
      std::printf("%-12s %12.4f %12.4g\n", eq.names[k].c_str(), a.stat, a.p_value);
    } catch (const DataError& e) {
      std::printf("%-12s %12s %12s\n", eq.names[k].c_str(), "n/a", "n/a");
    }
    for (int t = 0; t < s.length(); ++t)
      csv << detail::csv_field(eq.names[k]) << ',' << detail::csv_field(s.time_label(t)) << ','
          << format_double(eq.series[k](t)) << ',' << stat << ',' << pv << '\n';
  }
  write_text(dir / "equilibria.csv", csv.str());
  std::printf("fit (r1,r2)=(%d,%d) p=%d: loglik %.6f, iterations %d, converged %s, safeguard %s\n", r1, r2, p,
              f.loglik(), f.iterations, f.converged ? "yes" : "no", f.safeguard_triggered ? "yes" : "no");
  return 0;
}

int cmd_ranks(const Globals& g) {
  const Config c = Config::load(g.config);
  c.reject_unknown(keys({"data", "p", "max_p", "r", "alpha_level", "adf_lags", "adf_max_lags", "trace_table",
                         "critical_values"},
                        true),
                   "ranks");
  const FitOptions fo = fit_options(c);
  const MatrixSeries s = ingest_csv(c.str("data"));
  json rj;
  rj["format"] = "ecmar-ranks";
  rj["version"] = 1;
  if (c.str("p", "1") == "auto") {
    const std::vector<double> bic = var_bic(s.vectorized(), static_cast<int>(c.integer("max_p", 4)));
    rj["bic"] = json::array();
    for (double b : bic) rj["bic"].push_back(num(b));
    std::printf("%-6s %16s\n", "order", "BIC");
    for (std::size_t k = 0; k < bic.size(); ++k) std::printf("%-6zu %16.4f\n", k, bic[k]);
  }
  const int p = lag_order(s, c);
  rj["p"] = p;
  const AutoRanks a = auto_ranks(s, p, c, fo);
  rj["trace"] = c.has("r") ? json(nullptr) : trace_json(a.trace);
  rj["decision"] = decision_json(a.decision);
  const fs::path dir = output_dir(g, c);
  write_json(rj, (dir / "ranks.json").string());
  if (!c.has("r")) {
    std::printf("%-10s %14s %14s %7s\n", "H0: r <=", "trace", "crit 5%", "reject");
    for (const auto& row : a.trace.rows)
      std::printf("%-10d %14.4f %14.4f %7s\n", row.null_rank, row.stat, row.critical, row.reject ? "yes" : "no");
  }
  std::printf("r = %d, outcome %s", a.decision.r_hat, to_string(a.decision.outcome));
  if (a.decision.selected_pair)
    std::printf(", (r1,r2) = (%d,%d)", a.decision.selected_pair->first, a.decision.selected_pair->second);
  std::printf("\n");
  return 0;
}

// "<side> <kind> <payload>"; payload is an inline matrix, perp:<matrix>,
// @file.csv, perp:@file.csv, or for weak_exogeneity a 1-based index or "all".
struct ParsedRestriction {
  std::string label;
  Side side = Side::row;
  std::vector<Restriction> restrictions;
  std::vector<std::string> labels;
};

Matrix payload_matrix(std::string text) {
  bool perp = false;
  if (text.rfind("perp:", 0) == 0) {
    perp = true;
    text = trim(text.substr(5));
  }
  Matrix a = !text.empty() && text[0] == '@' ? read_matrix_csv(text.substr(1)) : parse_matrix(text);
  if (perp) {
    if (!full_column_rank(a)) throw ConfigError("restriction: perp: payload must have full column rank");
    a = orth_complement(a);
  }
  return a;
}

ParsedRestriction parse_restriction(const std::string& spec, int m, int n) {
  std::istringstream ss(spec);
  std::string side, kind;
  if (!(ss >> side >> kind)) throw ConfigError("restriction '" + spec + "': expected '<side> <kind> <payload>'");
  std::string payload;
  std::getline(ss, payload);
  payload = trim(payload);
  ParsedRestriction out;
  if (side == "row") out.side = Side::row;
  else if (side == "column") out.side = Side::column;
  else throw ConfigError("restriction '" + spec + "': side must be row or column");
  const int d = out.side == Side::row ? m : n;
  try {
    if (kind == "weak_exogeneity") {
      std::vector<int> idx;
      if (payload == "all") {
        for (int i = 1; i <= d; ++i) idx.push_back(i);
      } else {
        std::size_t pos = 0;
        const int i = std::stoi(payload, &pos);
        if (pos != payload.size()) throw ConfigError("bad index");
        idx.push_back(i);
      }
      for (int i : idx) {
        if (i < 1 || i > d) throw ConfigError("restriction '" + spec + "': index out of range 1.." + std::to_string(d));
        out.restrictions.push_back(AdjustmentRestriction{exclusion_basis(d, i - 1)});
        out.labels.push_back(side + " weak_exogeneity " + std::to_string(i));
      }
    } else if (kind == "uniform" || kind == "known_vector" || kind == "adjustment") {
      const Matrix a = payload_matrix(payload);
      if (a.rows() != d)
        throw ConfigError("restriction '" + spec + "': matrix must have " + std::to_string(d) + " rows");
      if (kind == "uniform") out.restrictions.push_back(UniformRestriction{a});
      else if (kind == "known_vector") out.restrictions.push_back(KnownVectors{a});
      else out.restrictions.push_back(AdjustmentRestriction{a});
      out.labels.push_back(spec);
    } else {
      throw ConfigError("restriction '" + spec + "': kind must be uniform, known_vector, adjustment or weak_exogeneity");
    }
  } catch (const std::logic_error&) {
    throw ConfigError("restriction '" + spec + "': malformed payload");
  }
  return out;
}

int cmd_test(const Globals& g) {
  const Config c = Config::load(g.config);
  c.reject_unknown(keys({"data", "fit", "restriction", "method"}, true), "test");
  if (c.restrictions().empty()) throw ConfigError("test: at least one 'restriction' line is required");
  const MatrixSeries s = ingest_csv(c.str("data"));
  const json fj = read_json(c.str("fit"));
  if (!fj.contains("params")) throw DataError(c.str("fit") + ": missing params");
  const EccMarParams par = params_from_json(fj.at("params"));
  if (par.m != s.m || par.n != s.n) throw DataError("fit artifact dimensions do not match the data");
  const std::string method = c.str("method", "conditional");
  if (method != "conditional" && method != "refit") throw ConfigError("method must be conditional or refit");
  FitOptions fo = fit_options(c);
  const SeriesLayout lay(s, par.p);
  const FitContext ctx = make_fit_context(lay, par);
  std::optional<FitResult> unrestricted;
  if (method == "refit") unrestricted = fit_alternating(lay, par.r1, par.r2, fo);

  json tj;
  tj["format"] = "ecmar-tests";
  tj["version"] = 1;
  tj["method"] = method;
  tj["tests"] = json::array();
  std::printf("%-40s %6s %12s %4s %12s\n", "restriction", "side", "statistic", "df", "p_value");
  for (const std::string& spec : c.restrictions()) {
    const ParsedRestriction pr = parse_restriction(spec, s.m, s.n);
    for (std::size_t k = 0; k < pr.restrictions.size(); ++k) {
      const TestResult t = method == "refit" ? lr_refit(lay, *unrestricted, pr.side, pr.restrictions[k], fo)
                                             : lr_test(ctx, pr.side, pr.restrictions[k]);
      tj["tests"].push_back(test_json(t, pr.labels[k]));
      std::printf("%-40s %6s %12.4f %4d %12.4g\n", pr.labels[k].c_str(), to_string(t.side), t.statistic, t.df,
                  t.p_value);
    }
  }
  write_json(tj, (output_dir(g, c) / "tests.json").string());
  return 0;
}

std::vector<Design> parse_designs(const std::string& text) {
  std::vector<Design> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    Design d;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream is(item);
    if (!(is >> d.m >> c1 >> d.n >> c2 >> d.r1 >> c3 >> d.r2) || c1 != ',' || c2 != ',' || c3 != ',' ||
        !(is >> std::ws).eof())
      throw ConfigError("designs: expected 'm,n,r1,r2' entries separated by ';', got '" + item + "'");
    d.validate();
    out.push_back(d);
  }
  if (out.empty()) throw ConfigError("designs: empty list");
  return out;
}

int cmd_montecarlo(const Globals& g) {
  const Config c = Config::load(g.config);
  c.reject_unknown(keys({"study", "designs", "T", "replications", "seed", "alpha_level", "adf_lags", "adf_max_lags",
                         "method", "dt_diagnostic"},
                        true),
                   "montecarlo");
  const std::string study = c.str("study");
  StudyOptions so;
  so.seed = seed_of(g, c);
  so.replications = positive(c, "replications");
  so.threads = g.threads;
  so.fit = fit_options(c);
  std::vector<int> Ts;
  for (long long t : c.integers("T")) {
    if (t < 10 || t > 100000000) throw ConfigError("T values must lie in [10, 1e8]");
    Ts.push_back(static_cast<int>(t));
  }
  const fs::path dir = output_dir(g, c);
  std::ostringstream csv;
  if (study == "estimation") {
    const EstimationStudy es = run_estimation_study(parse_designs(c.str("designs")), Ts, so);
    csv << "design,T,method,replication,subspace_distance\n";
    for (const auto& r : es.rows)
      csv << '"' << r.design << "\"," << r.T << ',' << r.method << ',' << r.replication << ','
          << format_double(r.subspace_distance) << '\n';
    write_text(dir / "distances.csv", csv.str());
    int safe = 0;
    for (const auto& h : es.hygiene) safe += h.safeguard;
    std::printf("%zu fits, safeguard fired in %d\n", es.hygiene.size(), safe);
  } else if (study == "rank_id") {
    RankIdOptions ro;
    ro.study = so;
    ro.disambiguate.level = level_of(c);
    ro.disambiguate.adf = adf_options(c);
    ro.dt_diagnostic = c.integer("dt_diagnostic", 0) != 0;
    const auto cells = run_rank_id_study(parse_designs(c.str("designs")), Ts, ro);
    csv << "design,T,outcome,count,frequency\n";
    for (const auto& cell : cells)
      for (std::size_t k = 0; k < cell.labels.size(); ++k) {
        csv << '"' << cell.design << "\"," << cell.T << ",\"" << cell.labels[k] << "\"," << cell.counts[k] << ','
            << format_double(static_cast<double>(cell.counts[k]) / cell.replications) << '\n';
        std::printf("%-10s T=%-6d %-20s %6.1f%%\n", cell.design.c_str(), cell.T, cell.labels[k].c_str(),
                    100.0 * cell.counts[k] / cell.replications);
      }
    write_text(dir / "frequencies.csv", csv.str());
    if (ro.dt_diagnostic) {
      std::ostringstream dt;
      dt << "design,T,replication,d_T\n";
      for (const auto& cell : cells)
        for (std::size_t k = 0; k < cell.dt.size(); ++k)
          dt << '"' << cell.design << "\"," << cell.T << ',' << k << ',' << format_double(cell.dt[k]) << '\n';
      write_text(dir / "dt.csv", dt.str());
    }
  } else if (study == "test_size_power") {
    if (c.has("designs")) throw ConfigError("test_size_power uses the fixed (4,3,2,2) design; remove 'designs'");
    TestStudyOptions to;
    to.study = so;
    to.level = level_of(c);
    const std::string method = c.str("method", "conditional");
    if (method != "conditional" && method != "refit") throw ConfigError("method must be conditional or refit");
    to.refit = method == "refit";
    const auto rows = run_test_study(default_hypotheses(), Ts, to);
    csv << "hypothesis,null_true,T,replications,rejections,failures,rejection_rate\n";
    for (const auto& r : rows) {
      csv << '"' << r.hypothesis << "\"," << (r.null_true ? "true" : "false") << ',' << r.T << ',' << r.replications
          << ',' << r.rejections << ',' << r.failures << ',' << format_double(r.rate()) << '\n';
      std::printf("%-32s %-5s T=%-6d %6.1f%%\n", r.hypothesis.c_str(), r.null_true ? "true" : "false", r.T,
                  100.0 * r.rate());
    }
    write_text(dir / "rejections.csv", csv.str());
  } else {
    throw ConfigError("study must be estimation, rank_id or test_size_power");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cointegrated matrix autoregression toolkit"};
  app.require_subcommand(1);
  Globals g;
  if (const char* env = std::getenv("ECMAR_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      std::fprintf(stderr, "error: ECMAR_THREADS must be a positive integer\n");
      return 2;
    }
    g.threads = static_cast<int>(v);
  }
  unsigned long long seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", g.config, "key=value configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--output", g.output, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "master seed (overrides config)");
    sub->add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  };
  CLI::App* sim = app.add_subcommand("simulate", "simulate an ECC-MAR series");
  CLI::App* fit = app.add_subcommand("fit", "alternating maximum-likelihood fit");
  CLI::App* ranks = app.add_subcommand("ranks", "trace test and rank-pair disambiguation");
  CLI::App* test = app.add_subcommand("test", "likelihood-ratio tests");
  CLI::App* mc = app.add_subcommand("montecarlo", "Monte Carlo studies");
  for (CLI::App* s : {sim, fit, ranks, test, mc}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  for (CLI::App* s : {sim, fit, ranks, test, mc})
    if (s->parsed() && s->count("--seed") > 0) g.seed = seed;

  try {
    if (sim->parsed()) return cmd_simulate(g);
    if (fit->parsed()) return cmd_fit(g);
    if (ranks->parsed()) return cmd_ranks(g);
    if (test->parsed()) return cmd_test(g);
    if (mc->parsed()) return cmd_montecarlo(g);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

#pragma once

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "ecmar/dgp.hpp"
#include "ecmar/error.hpp"
#include "ecmar/estimator.hpp"
#include "ecmar/inference.hpp"
#include "ecmar/matalg.hpp"
#include "ecmar/ranksel.hpp"

namespace ecmar {

using json = nlohmann::json;

inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// Row-major nested arrays.
inline json to_json(const Matrix& a) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) r.push_back(num(a(i, j)));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(num(v(i)));
  return out;
}

inline Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw DataError(what + ": expected " + std::to_string(rows) + " rows");
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& r = j[static_cast<std::size_t>(i)];
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols)
      throw DataError(what + ": row " + std::to_string(i + 1) + " must have " + std::to_string(cols) + " entries");
    for (Eigen::Index k = 0; k < cols; ++k) {
      const json& e = r[static_cast<std::size_t>(k)];
      if (!e.is_number()) throw DataError(what + ": non-numeric entry");
      out(i, k) = e.get<double>();
    }
  }
  return out;
}

inline json params_json(const EccMarParams& p) {
  json j;
  j["m"] = p.m;
  j["n"] = p.n;
  j["r1"] = p.r1;
  j["r2"] = p.r2;
  j["p"] = p.p;
  j["tau"] = to_json(p.tau);
  j["gamma"] = to_json(p.gamma);
  j["phi"] = to_json(p.phi);
  j["theta"] = to_json(p.theta);
  j["gamma1"] = json::array();
  for (const auto& g : p.gamma1) j["gamma1"].push_back(to_json(g));
  j["gamma2"] = json::array();
  for (const auto& g : p.gamma2) j["gamma2"].push_back(to_json(g));
  j["sigma_r"] = to_json(p.sigma_r);
  j["sigma_c"] = to_json(p.sigma_c);
  return j;
}

inline EccMarParams params_from_json(const json& j) {
  try {
    EccMarParams p;
    p.m = j.at("m").get<int>();
    p.n = j.at("n").get<int>();
    p.r1 = j.at("r1").get<int>();
    p.r2 = j.at("r2").get<int>();
    p.p = j.at("p").get<int>();
    if (p.m <= 0 || p.n <= 0 || p.r1 < 0 || p.r2 < 0 || p.r1 > p.m || p.r2 > p.n || p.p < 1)
      throw DataError("params: dimensions out of range");
    p.tau = matrix_from_json(j.at("tau"), p.m, p.r1, "params.tau");
    p.gamma = matrix_from_json(j.at("gamma"), p.m, p.r1, "params.gamma");
    p.phi = matrix_from_json(j.at("phi"), p.n, p.r2, "params.phi");
    p.theta = matrix_from_json(j.at("theta"), p.n, p.r2, "params.theta");
    for (const auto& g : j.at("gamma1")) p.gamma1.push_back(matrix_from_json(g, p.m, p.m, "params.gamma1"));
    for (const auto& g : j.at("gamma2")) p.gamma2.push_back(matrix_from_json(g, p.n, p.n, "params.gamma2"));
    p.sigma_r = matrix_from_json(j.at("sigma_r"), p.m, p.m, "params.sigma_r");
    p.sigma_c = matrix_from_json(j.at("sigma_c"), p.n, p.n, "params.sigma_c");
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("params: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
}

inline json labels_json(const MatrixSeries& s) {
  json j;
  j["rows"] = json::array();
  for (int i = 0; i < s.m; ++i) j["rows"].push_back(s.row_label(i));
  j["cols"] = json::array();
  for (int k = 0; k < s.n; ++k) j["cols"].push_back(s.col_label(k));
  return j;
}

inline json fit_json(const FitResult& f, const MatrixSeries& s, UpdateRule rule) {
  json j;
  j["format"] = "ecmar-fit";
  j["version"] = 1;
  j["labels"] = labels_json(s);
  j["T"] = s.length();
  j["update_rule"] = to_string(rule);
  j["params"] = params_json(f.params);
  j["loglik"] = num(f.loglik());
  j["loglik_path"] = json::array();
  for (double l : f.loglik_path) j["loglik_path"].push_back(num(l));
  j["converged"] = f.converged;
  j["safeguard_triggered"] = f.safeguard_triggered;
  j["iterations"] = f.iterations;
  j["implied"] = {{"pi", to_json(f.implied_pi)}, {"beta", to_json(f.implied_beta)}, {"alpha", to_json(f.implied_alpha)}};
  return j;
}

inline json test_json(const TestResult& t, const std::string& label) {
  json j;
  j["label"] = label;
  j["side"] = to_string(t.side);
  j["kind"] = to_string(t.kind);
  j["statistic"] = num(t.statistic);
  j["df"] = t.df;
  j["p_value"] = num(t.p_value);
  j["n"] = num(t.n);
  j["clamped"] = num(t.clamped);
  j["restricted_eigenvalues"] = to_json(t.restricted_eigenvalues);
  j["unrestricted_eigenvalues"] = to_json(t.unrestricted_eigenvalues);
  return j;
}

inline json adf_json(const AdfResult& a) {
  return {{"stat", num(a.stat)}, {"p_value", num(a.p_value)}, {"lags", a.lags}, {"nobs", a.nobs}};
}

inline json decision_json(const RankDecision& d) {
  json j;
  j["r_hat"] = d.r_hat;
  j["admissible"] = json::array();
  for (const auto& [a, b] : d.admissible) j["admissible"].push_back({a, b});
  j["outcome"] = to_string(d.outcome);
  j["selected_pair"] = d.selected_pair ? json({d.selected_pair->first, d.selected_pair->second}) : json(nullptr);
  j["candidates"] = json::array();
  for (const auto& c : d.adf_reports) {
    json cj;
    cj["r1"] = c.r1;
    cj["r2"] = c.r2;
    cj["fitted"] = c.fitted;
    cj["passes"] = c.passes;
    cj["error"] = c.error.empty() ? json(nullptr) : json(c.error);
    cj["components"] = json::array();
    for (const auto& comp : c.components) {
      json x = adf_json(comp.adf);
      x["name"] = comp.name;
      x["reject"] = comp.reject;
      cj["components"].push_back(std::move(x));
    }
    j["candidates"].push_back(std::move(cj));
  }
  return j;
}

inline json trace_json(const TraceResult& tr) {
  json j;
  j["eigenvalues"] = to_json(tr.eigenvalues);
  j["decided_rank"] = tr.decided_rank;
  j["rows"] = json::array();
  for (const auto& r : tr.rows)
    j["rows"].push_back({{"null_rank", r.null_rank}, {"stat", num(r.stat)}, {"critical_5pct", num(r.critical)},
                         {"reject", r.reject}});
  return j;
}

inline void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed for " + path);
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace ecmar

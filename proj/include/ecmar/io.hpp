#pragma once

#include <cctype>
#include <cmath>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecmar/dgp.hpp"
#include "ecmar/error.hpp"
#include "ecmar/matalg.hpp"

namespace ecmar {

// 17 significant digits: round-trips every double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Whole-string double parse; false on trailing garbage or overflow.
inline bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && errno != ERANGE;
}

// ---------------------------------------------------------------------------
// Long-format panel CSV: time,row,col,value

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

// Numeric labels compare numerically, anything else lexicographically.
inline bool time_less(const std::string& a, const std::string& b) {
  double x = 0.0;
  double y = 0.0;
  if (parse_double(a, x) && parse_double(b, y)) return x < y;
  return a < b;
}

}  // namespace detail

inline MatrixSeries read_panel_csv(std::istream& in, const std::string& name = "<input>") {
  std::string line;
  int lineno = 0;
  auto where = [&](int ln) { return name + ":" + std::to_string(ln) + ": "; };

  // Skip leading blank lines, then require the header.
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> h = detail::split_csv_line(line);
    for (auto& f : h) f = trim(f);
    if (h != std::vector<std::string>{"time", "row", "col", "value"})
      throw DataError(where(lineno) + "expected header time,row,col,value");
    have_header = true;
    break;
  }
  if (!have_header) throw DataError(name + ": empty file");

  MatrixSeries s;
  std::unordered_map<std::string, int> row_idx, col_idx;
  std::vector<std::map<std::pair<int, int>, std::pair<double, int>>> cells;  // per time
  std::set<std::string> closed_times;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = detail::split_csv_line(line);
    if (f.size() != 4)
      throw DataError(where(lineno) + "expected 4 fields, found " + std::to_string(f.size()));
    const std::string t = trim(f[0]);
    const std::string r = trim(f[1]);
    const std::string c = trim(f[2]);
    if (t.empty() || r.empty() || c.empty()) throw DataError(where(lineno) + "empty time, row or col label");
    double v = 0.0;
    if (!parse_double(f[3], v)) throw DataError(where(lineno) + "cannot parse value '" + trim(f[3]) + "'");
    if (!std::isfinite(v)) throw DataError(where(lineno) + "non-finite value");

    if (s.time_labels.empty() || s.time_labels.back() != t) {
      if (closed_times.count(t))
        throw DataError(where(lineno) + "time '" + t + "' reappears after later times (rows must be grouped by time)");
      if (!s.time_labels.empty() && !detail::time_less(s.time_labels.back(), t))
        throw DataError(where(lineno) + "time '" + t + "' does not increase after '" + s.time_labels.back() + "'");
      if (!s.time_labels.empty()) closed_times.insert(s.time_labels.back());
      s.time_labels.push_back(t);
      cells.emplace_back();
    }
    auto [ri, rnew] = row_idx.try_emplace(r, static_cast<int>(s.row_labels.size()));
    if (rnew) s.row_labels.push_back(r);
    auto [ci, cnew] = col_idx.try_emplace(c, static_cast<int>(s.col_labels.size()));
    if (cnew) s.col_labels.push_back(c);
    auto& slot = cells.back();
    const auto key = std::make_pair(ri->second, ci->second);
    if (slot.count(key))
      throw DataError(where(lineno) + "duplicate cell (" + t + "," + r + "," + c + "), first seen on line " +
                      std::to_string(slot[key].second));
    slot[key] = {v, lineno};
  }
  if (s.time_labels.empty()) throw DataError(name + ": no observations");
  s.m = static_cast<int>(s.row_labels.size());
  s.n = static_cast<int>(s.col_labels.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    Matrix x(s.m, s.n);
    for (int i = 0; i < s.m; ++i)
      for (int j = 0; j < s.n; ++j) {
        const auto it = cells[k].find({i, j});
        if (it == cells[k].end())
          throw DataError(name + ": missing cell (" + s.time_labels[k] + "," + s.row_labels[static_cast<std::size_t>(i)] +
                          "," + s.col_labels[static_cast<std::size_t>(j)] + ")");
        x(i, j) = it->second.first;
      }
    s.data.push_back(std::move(x));
  }
  s.validate();
  return s;
}

inline MatrixSeries ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file " + path);
  return read_panel_csv(in, path);
}

// Rows ordered by time, then column, then row.
inline void write_panel_csv(std::ostream& out, const MatrixSeries& s) {
  out << "time,row,col,value\n";
  for (int t = 0; t < s.length(); ++t)
    for (int j = 0; j < s.n; ++j)
      for (int i = 0; i < s.m; ++i)
        out << detail::csv_field(s.time_label(t)) << ',' << detail::csv_field(s.row_label(i)) << ','
            << detail::csv_field(s.col_label(j)) << ',' << format_double(s.data[static_cast<std::size_t>(t)](i, j))
            << '\n';
}

inline void export_csv(const MatrixSeries& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_panel_csv(out, s);
  if (!out) throw DataError("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Inline matrices: "[1 0; 0 1; 0 0]" (rows separated by ';', entries by
// whitespace or ','), or a plain headerless CSV file.

inline Matrix parse_matrix(const std::string& text) {
  std::string t = trim(text);
  if (t.size() >= 2 && t.front() == '[' && t.back() == ']') t = t.substr(1, t.size() - 2);
  std::vector<std::vector<double>> rows;
  std::stringstream rs(t);
  std::string row;
  while (std::getline(rs, row, ';')) {
    for (char& c : row)
      if (c == ',') c = ' ';
    std::istringstream es(row);
    std::vector<double> vals;
    std::string tok;
    while (es >> tok) {
      double v = 0.0;
      if (!parse_double(tok, v)) throw ConfigError("matrix: cannot parse entry '" + tok + "'");
      vals.push_back(v);
    }
    if (!vals.empty()) rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ConfigError("matrix: empty payload");
  const std::size_t cols = rows.front().size();
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw ConfigError("matrix: ragged rows");
    for (std::size_t j = 0; j < cols; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return out;
}

inline Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix file " + path);
  std::string text;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    text += line + ";";
  }
  return parse_matrix(text);
}

// ---------------------------------------------------------------------------
// key=value configuration

class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in, const std::string& name = "<config>") {
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(name + ":" + std::to_string(lineno) + ": expected key=value");
      const std::string key = trim(line.substr(0, eq));
      const std::string val = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
      if (key == "restriction") {
        c.restrictions_.push_back(val);
        continue;
      }
      if (c.values_.count(key))
        throw ConfigError(name + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      c.values_[key] = val;
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse(in, path);
  }

  void reject_unknown(const std::set<std::string>& allowed, const std::string& command) const {
    for (const auto& [k, v] : values_)
      if (!allowed.count(k)) throw ConfigError("unknown config key '" + k + "' for command " + command);
    if (!restrictions_.empty() && !allowed.count("restriction"))
      throw ConfigError("unknown config key 'restriction' for command " + command);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required config key '" + key + "'");
    return it->second;
  }
  std::string str(const std::string& key, const std::string& def) const { return has(key) ? str(key) : def; }

  long long integer(const std::string& key) const {
    const std::string v = str(key);
    errno = 0;
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
      throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    return x;
  }
  long long integer(const std::string& key, long long def) const { return has(key) ? integer(key) : def; }

  double real(const std::string& key) const {
    double x = 0.0;
    if (!parse_double(str(key), x))
      throw ConfigError("config key '" + key + "': expected a number, got '" + str(key) + "'");
    return x;
  }
  double real(const std::string& key, double def) const { return has(key) ? real(key) : def; }

  std::vector<long long> integers(const std::string& key) const {
    std::vector<long long> out;
    std::stringstream ss(str(key));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      errno = 0;
      char* end = nullptr;
      const long long x = std::strtoll(tok.c_str(), &end, 10);
      if (tok.empty() || end != tok.c_str() + tok.size() || errno == ERANGE)
        throw ConfigError("config key '" + key + "': expected a comma-separated integer list");
      out.push_back(x);
    }
    return out;
  }

  const std::vector<std::string>& restrictions() const { return restrictions_; }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> restrictions_;
};

}  // namespace ecmar

/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#ifndef BARRIERLAB_IO_HPP
#define BARRIERLAB_IO_HPP

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace barrierlab {

/// Deterministic double formatting for reports ('.' decimal separator,
/// shortest %.17g round-trip).
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// JSON value for an extended real: plain number when finite, the
/// strings "inf" / "-inf" otherwise (JSON has no infinity literal).
inline nlohmann::json json_extended(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

// ---------------------------------------------------------------------------
// Key-value config files: one `key = value` per line, '#' comments.

struct KvFile {
  std::map<std::string, std::string> values;
  std::vector<std::string> errors;
};

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline KvFile parse_kv_text(std::istream& in) {
  KvFile kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      kv.errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      kv.errors.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (kv.values.count(key))
      kv.errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv.values[key] = value;
  }
  return kv;
}

inline KvFile parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    KvFile kv;
    kv.errors.push_back("cannot open config file '" + path + "'");
    return kv;
  }
  return parse_kv_text(in);
}

inline std::optional<double> parse_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

inline std::optional<long> parse_long(const std::string& s) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

inline std::optional<bool> parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "on") return true;
  if (s == "false" || s == "0" || s == "off") return false;
  return std::nullopt;
}

inline std::optional<std::vector<double>> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = parse_double(trim(item));
    if (!v) return std::nullopt;
    out.push_back(*v);
  }
  if (out.empty()) return std::nullopt;
  return out;
}

// ---------------------------------------------------------------------------
// Summary CSV rows (fixed schema, one row per experiment cell).

struct CsvRow {
  std::string experiment;
  std::string cell_id;
  std::optional<long> n_paths;
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<long> n_exits;
  std::optional<double> p_hat;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::string classifier_tag;  // empty when not applicable
  std::optional<std::uint64_t> seed;
};

inline const char* csv_header() {
  return "experiment,cell_id,n_paths,dt,horizon,n_exits,p_hat,ci_low,ci_high,classifier_tag,seed";
}

inline std::string to_csv_line(const CsvRow& r) {
  std::ostringstream os;
  os << r.experiment << ',' << r.cell_id << ',';
  if (r.n_paths) os << *r.n_paths;
  os << ',';
  if (r.dt) os << fmt_double(*r.dt);
  os << ',';
  if (r.horizon) os << fmt_double(*r.horizon);
  os << ',';
  if (r.n_exits) os << *r.n_exits;
  os << ',';
  if (r.p_hat) os << fmt_double(*r.p_hat);
  os << ',';
  if (r.ci_low) os << fmt_double(*r.ci_low);
  os << ',';
  if (r.ci_high) os << fmt_double(*r.ci_high);
  os << ',' << r.classifier_tag << ',';
  if (r.seed) os << *r.seed;
  return os.str();
}

}  // namespace barrierlab

#endif  // BARRIERLAB_IO_HPP

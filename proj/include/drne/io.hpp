// Copyright 2026 The DRNE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <utility>
#include <vector>

#include "drne/evaluation.hpp"
#include "drne/oracle.hpp"
#include "drne/solver.hpp"
#include "drne/vi.hpp"

namespace drne::io {

// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return v;
}

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ordered key = value lines; the format shared by certificates, oracle results and run metadata.
class KeyValueReport {
 public:
  void set(std::string key, std::string value) { entries_.emplace_back(std::move(key), std::move(value)); }
  void set(std::string key, double value) { set(std::move(key), format_double(value)); }
  void set(std::string key, bool value) { set(std::move(key), std::string(value ? "true" : "false")); }
  void set(std::string key, const char* value) { set(std::move(key), std::string(value)); }
  template <typename Int>
    requires std::is_integral_v<Int>
  void set(std::string key, Int value) {
    set(std::move(key), std::to_string(value));
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string get(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return v;
    }
    throw std::out_of_range("KeyValueReport: no key '" + key + "'");
  }

  std::string str() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
  }

  static KeyValueReport parse(std::istream& in) {
    KeyValueReport r;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find(" = ");
      if (eq == std::string::npos) throw std::invalid_argument("KeyValueReport: malformed line '" + line + "'");
      r.set(line.substr(0, eq), line.substr(eq + 3));
    }
    return r;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline std::string join(const std::vector<double>& values, const char* sep = ",") {
  std::string out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k) out += sep;
    out += format_double(values[k]);
  }
  return out;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// t,agent,coordinate,value with 1-based agents and coordinates.
inline std::string trajectory_csv(const GameSpec& spec, const SolveReport& report) {
  std::string out = "t,agent,coordinate,value\n";
  for (std::size_t k = 0; k < report.recorded_t.size(); ++k) {
    const auto& x = report.trajectory[k];
    for (std::size_t i = 0; i < spec.num_agents; ++i) {
      for (std::size_t c = 0; c < spec.decision_dim; ++c) {
        out += std::to_string(report.recorded_t[k]) + "," + std::to_string(i + 1) + "," + std::to_string(c + 1) + "," +
               format_double(x[static_cast<Eigen::Index>(i * spec.decision_dim + c)]) + "\n";
      }
    }
  }
  return out;
}

// t,residual,avg_sq_error; the error column is empty without a reference equilibrium.
inline std::string metrics_csv(const SolveReport& report) {
  std::string out = "t,residual,avg_sq_error\n";
  for (std::size_t k = 0; k < report.recorded_t.size(); ++k) {
    out += std::to_string(report.recorded_t[k]) + ",";
    if (k < report.residuals.size()) out += format_double(report.residuals[k]);
    out += ",";
    if (k < report.avg_sq_error.size()) out += format_double(report.avg_sq_error[k]);
    out += "\n";
  }
  return out;
}

inline KeyValueReport certificate_report(const MonotonicityCertificate& cert) {
  KeyValueReport r;
  r.set("mu", cert.mu);
  r.set("mu_xi", cert.mu_xi);
  r.set("margin", cert.margin);
  r.set("certified", cert.certified);
  r.set("constants_source", cert.estimated ? "sampled-estimate" : "closed-form-or-declared");
  r.set("lipschitz_x", join(cert.lipschitz_x));
  r.set("lipschitz_xi", join(cert.lipschitz_xi));
  return r;
}

inline KeyValueReport oracle_report(const OracleResult& result) {
  KeyValueReport r;
  r.set("method", to_string(result.method));
  r.set("residual_at_solution", result.residual_at_solution);
  r.set("interior_valid", result.interior_valid);
  r.set("iterations", result.iterations);
  std::vector<double> x(result.equilibrium.data(), result.equilibrium.data() + result.equilibrium.size());
  r.set("equilibrium", join(x));
  return r;
}

inline std::string equilibrium_csv(const Vector& x) {
  std::string header, row;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (k) {
      header += ",";
      row += ",";
    }
    header += "x" + std::to_string(k + 1);
    row += format_double(x[k]);
  }
  return header + "\n" + row + "\n";
}

inline std::string oos_realizations_csv(const std::vector<const OOSReport*>& reports) {
  std::string out = "scenario,seed,realization,total_cost\n";
  for (const auto* r : reports) {
    for (std::size_t k = 0; k < r->costs.size(); ++k) {
      out += r->scenario + "," + std::to_string(r->seed) + "," + std::to_string(k + 1) + "," +
             format_double(r->costs[k]) + "\n";
    }
  }
  return out;
}

inline std::string oos_summary_csv(const std::vector<const OOSReport*>& reports, bool consistency_check) {
  std::string out = "scenario,seed,count,mean,std,std_error,q05,q50,q95,in_sample_expected,in_sample_check\n";
  for (const auto* r : reports) {
    const auto& s = r->summary;
    std::string check = "n/a";
    if (consistency_check && std::isfinite(r->in_sample_expected_cost)) {
      check = std::abs(s.mean - r->in_sample_expected_cost) <= 3.0 * s.standard_error ? "PASS" : "FAIL";
    }
    out += r->scenario + "," + std::to_string(r->seed) + "," + std::to_string(r->costs.size()) + "," +
           format_double(s.mean) + "," + format_double(s.stddev) + "," + format_double(s.standard_error) + "," +
           format_double(s.q05) + "," + format_double(s.q50) + "," + format_double(s.q95) + "," +
           format_double(r->in_sample_expected_cost) + "," + check + "\n";
  }
  return out;
}

inline std::string histogram_csv(const Histogram& h, const std::string& scenario = "") {
  std::string out = scenario.empty() ? "bin_lo,bin_hi,count\n" : "scenario,bin_lo,bin_hi,count\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    if (!scenario.empty()) out += scenario + ",";
    out += format_double(h.edges[k]) + "," + format_double(h.edges[k + 1]) + "," + std::to_string(h.counts[k]) + "\n";
  }
  return out;
}

inline std::string comparison_csv(const ScenarioTable& table) {
  std::string out = "first,second,mean_difference,std_error,first_not_worse,repetitions\n";
  const std::size_t reps = table.reports.empty() ? 0 : table.reports.front().size();
  for (const auto& c : table.comparisons) {
    out += table.summaries[c.first].label + "," + table.summaries[c.second].label + "," +
           format_double(c.mean_difference) + "," + format_double(c.standard_error) + "," +
           std::to_string(c.first_not_worse) + "," + std::to_string(reps) + "\n";
  }
  return out;
}

inline std::string scenario_summary_csv(const ScenarioTable& table) {
  std::string out = "scenario,mean_of_means,q05,q50,q95\n";
  for (const auto& s : table.summaries) {
    out += s.label + "," + format_double(s.mean_of_means) + "," + format_double(s.q05) + "," + format_double(s.q50) +
           "," + format_double(s.q95) + "\n";
  }
  return out;
}

}  // namespace drne::io

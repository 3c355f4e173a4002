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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "drne/evaluation.hpp"
#include "drne/io.hpp"
#include "drne/solver.hpp"

// Plain-text INI run configuration. Sections:
//   [game]        num_agents, cost, demand_intercept, marginal_costs, penalty | penalties,
//                 feasible_lower, feasible_upper, support_lower, support_upper
//   [agents.i]    per-agent overrides (1-based): marginal_cost, penalty, feasible_*, support_*
//   [data]        samples_per_agent, seed            (draw anchors from [truth])
//   [data.i]      samples = v1, v2, ...  |  csv = path (one sample per row)
//   [truth]       law = uniform | gaussian, lower, upper, mean, std    ([truth.i] overrides)
//   [solver]      horizon, step_mode, eta0, inner_accuracy, inner_max_iterations,
//                 inner_step_scale, inner_step_rule, sampling, seed, record_every,
//                 record_residuals, residual_grid, num_seeds
//   [oracle]      tol, max_iterations, grid_step
//   [certify]     estimate_samples, estimate_seed
//   [oos]         train_mean, train_std, delta_mean, delta_std, train_counts, test_count,
//                 rho, macro_seed, repetitions, histogram_bins, label
//   [scenario.j]  label, rho
namespace drne::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// section -> key -> raw value, both ordered so the canonical text is stable.
using Table = std::map<std::string, std::map<std::string, std::string>>;

inline Table parse_table(std::istream& in, const std::string& source = "<config>") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  Table table;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(source + ": key '" + section + "' outside any section");
    auto& keys = table[section];
    for (const auto& [key, value] : body) keys[key] = value.data();
  }
  return table;
}

namespace detail {

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

// Samples from a CSV file: first column of every numeric row; a non-numeric first row is a header.
inline std::vector<double> read_sample_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read sample file '" + path.string() + "'");
  std::vector<double> values;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto cell = trim(split(line, ',').front());
    try {
      values.push_back(io::parse_double(cell));
    } catch (const std::invalid_argument&) {
      if (!first) throw ConfigError("sample file '" + path.string() + "': bad value '" + cell + "'");
    }
    first = false;
  }
  return values;
}

inline const std::set<std::string>& allowed_keys(const std::string& kind) {
  static const std::map<std::string, std::set<std::string>> keys{
      {"game",
       {"num_agents", "cost", "demand_intercept", "marginal_costs", "penalty", "penalties", "feasible_lower",
        "feasible_upper", "support_lower", "support_upper"}},
      {"agents", {"marginal_cost", "penalty", "feasible_lower", "feasible_upper", "support_lower", "support_upper"}},
      {"data", {"samples_per_agent", "seed"}},
      {"data.i", {"samples", "csv"}},
      {"truth", {"law", "lower", "upper", "mean", "std"}},
      {"solver",
       {"horizon", "step_mode", "eta0", "inner_accuracy", "inner_max_iterations", "inner_step_scale",
        "inner_step_rule", "sampling", "seed", "record_every", "record_residuals", "residual_grid", "num_seeds"}},
      {"oracle", {"tol", "max_iterations", "grid_step"}},
      {"certify", {"estimate_samples", "estimate_seed"}},
      {"oos",
       {"train_mean", "train_std", "delta_mean", "delta_std", "train_counts", "test_count", "rho", "macro_seed",
        "repetitions", "histogram_bins", "label"}},
      {"scenario", {"label", "rho"}},
  };
  return keys.at(kind);
}

// Section kind for key checking, or nullopt for an unknown section.
inline std::optional<std::string> section_kind(const std::string& section) {
  const auto dot = section.find('.');
  const std::string head = section.substr(0, dot);
  if (dot == std::string::npos) {
    if (head == "agents" || head == "scenario") return std::nullopt;
    for (const char* k : {"game", "data", "truth", "solver", "oracle", "certify", "oos"}) {
      if (head == k) return head;
    }
    return std::nullopt;
  }
  const std::string tail = section.substr(dot + 1);
  if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos || tail == "0") return std::nullopt;
  if (head == "agents" || head == "scenario") return head;
  if (head == "data") return std::string("data.i");
  if (head == "truth") return std::string("truth");
  return std::nullopt;
}

}  // namespace detail

// Rejects unknown sections and keys, and inlines [data.i] csv files (relative to base_dir)
// as `samples` so the resolved table carries every input byte that affects a run.
inline void resolve(Table& table, const std::filesystem::path& base_dir) {
  for (auto& [section, keys] : table) {
    const auto kind = detail::section_kind(section);
    if (!kind) throw ConfigError("unknown section [" + section + "]");
    const auto& allowed = detail::allowed_keys(*kind);
    for (const auto& [key, value] : keys) {
      if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    }
    if (*kind == "data.i" && keys.count("csv")) {
      if (keys.count("samples")) throw ConfigError("[" + section + "] sets both samples and csv");
      std::filesystem::path p = keys.at("csv");
      if (p.is_relative()) p = base_dir / p;
      keys["samples"] = io::join(detail::read_sample_csv(p), ", ");
      keys.erase("csv");
    }
  }
}

inline Table load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  Table table = parse_table(in, path);
  resolve(table, std::filesystem::path(path).parent_path());
  return table;
}

// "section.key=value"; the section is everything before the last dot of the left-hand side.
inline void apply_override(Table& table, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not section.key=value");
  const std::string lhs = detail::trim(assignment.substr(0, eq));
  const auto dot = lhs.rfind('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == lhs.size()) {
    throw ConfigError("override '" + assignment + "' is not section.key=value");
  }
  const std::string section = lhs.substr(0, dot);
  const std::string key = lhs.substr(dot + 1);
  const auto kind = detail::section_kind(section);
  if (!kind || !detail::allowed_keys(*kind).count(key)) throw ConfigError("override targets unknown key '" + lhs + "'");
  table[section][key] = detail::trim(assignment.substr(eq + 1));
}

// Deterministic serialization of the resolved table; hashed into run manifests.
inline std::string canonical_text(const Table& table) {
  std::string out;
  for (const auto& [section, keys] : table) {
    out += "[" + section + "]\n";
    for (const auto& [key, value] : keys) out += key + " = " + value + "\n";
  }
  return out;
}

// Typed access with section.key in every error message.
class Reader {
 public:
  explicit Reader(const Table& table) : table_(table) {}

  bool has(const std::string& section, const std::string& key) const {
    const auto it = table_.find(section);
    return it != table_.end() && it->second.count(key);
  }
  bool has_section(const std::string& section) const { return table_.count(section) > 0; }

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    if (!has(section, key)) return std::nullopt;
    return table_.at(section).at(key);
  }

  std::string text(const std::string& section, const std::string& key, const std::string& fallback) const {
    return raw(section, key).value_or(fallback);
  }

  double number(const std::string& section, const std::string& key, double fallback) const {
    const auto v = raw(section, key);
    return v ? to_number(section, key, *v) : fallback;
  }

  std::optional<double> maybe_number(const std::string& section, const std::string& key) const {
    const auto v = raw(section, key);
    if (!v) return std::nullopt;
    return to_number(section, key, *v);
  }

  std::uint64_t count(const std::string& section, const std::string& key, std::uint64_t fallback) const {
    const auto v = raw(section, key);
    if (!v) return fallback;
    const double d = to_number(section, key, *v);
    if (d < 0 || d != std::floor(d) || d > 1e18) {
      throw ConfigError(section + "." + key + ": expected a non-negative integer, got '" + *v + "'");
    }
    return static_cast<std::uint64_t>(d);
  }

  std::optional<std::vector<double>> list(const std::string& section, const std::string& key) const {
    const auto v = raw(section, key);
    if (!v) return std::nullopt;
    std::vector<double> out;
    for (const auto& item : detail::split(*v, ',')) {
      if (detail::trim(item).empty()) continue;
      out.push_back(to_number(section, key, item));
    }
    return out;
  }

  bool flag(const std::string& section, const std::string& key, bool fallback) const {
    const auto v = raw(section, key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(section + "." + key + ": expected true or false, got '" + *v + "'");
  }

 private:
  static double to_number(const std::string& section, const std::string& key, const std::string& v) {
    try {
      return io::parse_double(v);
    } catch (const std::invalid_argument&) {
      throw ConfigError(section + "." + key + ": expected a number, got '" + v + "'");
    }
  }

  const Table& table_;
};

inline std::string agent_section(const char* head, std::size_t agent) {
  return std::string(head) + "." + std::to_string(agent + 1);
}

inline TrueDistribution build_truth(const Table& table, std::size_t agents) {
  const Reader r(table);
  TrueDistribution truth;
  for (std::size_t i = 0; i < agents; ++i) {
    const auto sec = agent_section("truth", i);
    auto pick_text = [&](const char* key, const std::string& fallback) {
      return r.text(sec, key, r.text("truth", key, fallback));
    };
    auto pick = [&](const char* key, double fallback) { return r.number(sec, key, r.number("truth", key, fallback)); };
    const auto law = pick_text("law", "uniform");
    if (law == "uniform") {
      truth.laws.push_back(UniformLaw{pick("lower", 0.0), pick("upper", 1.0)});
    } else if (law == "gaussian") {
      truth.laws.push_back(GaussianLaw{pick("mean", 0.0), pick("std", 1.0)});
    } else {
      throw ConfigError(sec + ".law: expected uniform or gaussian, got '" + law + "'");
    }
  }
  return truth;
}

namespace detail {

inline GenericCost cournot_callbacks(const CournotCost& c) {
  GenericCost g;
  g.value = [c](std::size_t i, const Vector& x, const Vector& xi) {
    return x[static_cast<Eigen::Index>(i)] * (x.sum() - c.demand_intercept + c.marginal_costs[i] + xi[0]);
  };
  g.grad_x = [c](std::size_t i, const Vector& x, const Vector& xi) {
    return Vector::Constant(1, x[static_cast<Eigen::Index>(i)] + x.sum() - c.demand_intercept + c.marginal_costs[i] + xi[0]);
  };
  g.grad_xi = [](std::size_t i, const Vector& x, const Vector&) {
    return Vector::Constant(1, x[static_cast<Eigen::Index>(i)]);
  };
  return g;
}

}  // namespace detail

// Builds the game. Value-level problems (bad numbers, unknown enums) raise ConfigError;
// invariant violations are left for validate_game.
inline GameSpec build_game(const Table& table) {
  const Reader r(table);
  if (!r.has_section("game")) throw ConfigError("missing [game] section");
  if (!r.has("game", "num_agents")) throw ConfigError("game.num_agents is required");
  const std::size_t n = r.count("game", "num_agents", 0);
  if (n == 0 || n > 100000) throw ConfigError("game.num_agents must be a positive integer");

  CournotSetup setup;
  setup.num_agents = n;
  setup.demand_intercept = r.number("game", "demand_intercept", 10.0);
  setup.x_lower = r.number("game", "feasible_lower", 0.0);
  setup.x_upper = r.number("game", "feasible_upper", 10.0);
  setup.xi_lower = r.number("game", "support_lower", 0.0);
  setup.xi_upper = r.number("game", "support_upper", 1.0);
  if (auto mc = r.list("game", "marginal_costs")) {
    if (mc->size() != n) throw ConfigError("game.marginal_costs needs num_agents entries");
    setup.marginal_costs = *mc;
  }
  if (auto pens = r.list("game", "penalties")) {
    if (pens->size() != n) throw ConfigError("game.penalties needs num_agents entries");
    setup.penalties = *pens;
  } else {
    setup.penalties.assign(n, r.number("game", "penalty", 2.0));
  }
  GameSpec spec = make_cournot_game(setup);
  auto& cost = std::get<CournotCost>(spec.cost_model);

  for (const auto& [section, keys] : table) {
    if (section.rfind("agents.", 0) == 0 || section.rfind("data.", 0) == 0 || section.rfind("truth.", 0) == 0) {
      const auto idx = std::stoull(section.substr(section.find('.') + 1));
      if (idx > n) throw ConfigError("[" + section + "] refers to a missing agent");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto sec = agent_section("agents", i);
    if (!r.has_section(sec)) continue;
    cost.marginal_costs[i] = r.number(sec, "marginal_cost", cost.marginal_costs[i]);
    spec.penalties[i] = r.number(sec, "penalty", spec.penalties[i]);
    spec.feasible_sets[i] = BoxSet::uniform(1, r.number(sec, "feasible_lower", spec.feasible_sets[i].lower()[0]),
                                            r.number(sec, "feasible_upper", spec.feasible_sets[i].upper()[0]));
    spec.supports[i] = BoxSet::uniform(1, r.number(sec, "support_lower", spec.supports[i].lower()[0]),
                                       r.number(sec, "support_upper", spec.supports[i].upper()[0]));
  }

  for (std::size_t i = 0; i < n; ++i) {
    // Default single anchor at the (possibly overridden) support midpoint.
    const auto& box = spec.supports[i];
    const double mid = box.bounded() ? 0.5 * (box.lower()[0] + box.upper()[0])
                                     : std::max(box.lower()[0], std::min(0.0, box.upper()[0]));
    spec.empirical_data[i] = EmpiricalDistribution::from_scalars({mid});
  }

  const std::size_t per_agent = r.count("data", "samples_per_agent", 0);
  std::optional<TrueDistribution> truth;
  if (per_agent > 0) truth = build_truth(table, n);
  const std::uint64_t data_seed = r.count("data", "seed", 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto sec = agent_section("data", i);
    if (auto samples = r.list(sec, "samples")) {
      spec.empirical_data[i] = EmpiricalDistribution::from_scalars(*samples);
    } else if (per_agent > 0) {
      auto eng = make_stream(data_seed, i, StreamPurpose::training);
      spec.empirical_data[i].samples.clear();
      for (std::size_t k = 0; k < per_agent; ++k) {
        spec.empirical_data[i].samples.push_back(draw_realization(truth->laws[i], spec.supports[i], eng));
      }
    }
  }

  const auto kind = r.text("game", "cost", "cournot");
  if (kind == "cournot-callbacks") {
    spec.cost_model = detail::cournot_callbacks(cost);
  } else if (kind != "cournot") {
    throw ConfigError("game.cost: expected cournot or cournot-callbacks, got '" + kind + "'");
  }
  return spec;
}

inline SolverConfig build_solver(const Table& table) {
  const Reader r(table);
  SolverConfig cfg;
  cfg.horizon = r.count("solver", "horizon", 10000);
  const auto mode = r.text("solver", "step_mode", "fixed");
  if (mode == "fixed") {
    cfg.step_mode = StepMode::fixed;
  } else if (mode == "diminishing") {
    cfg.step_mode = StepMode::diminishing;
  } else {
    throw ConfigError("solver.step_mode: expected fixed or diminishing, got '" + mode + "'");
  }
  cfg.eta0 = r.number("solver", "eta0", 1.0);
  InnerSolverConfig inner;
  inner.accuracy = r.number("solver", "inner_accuracy", 1e-3);
  inner.max_iterations = static_cast<int>(r.count("solver", "inner_max_iterations", 10000));
  inner.step_scale = r.number("solver", "inner_step_scale", 1.0);
  const auto rule = r.text("solver", "inner_step_rule", "automatic");
  if (rule == "automatic") {
    inner.step_rule = StepRule::automatic;
  } else if (rule == "fixed") {
    inner.step_rule = StepRule::fixed;
  } else if (rule == "backtracking") {
    inner.step_rule = StepRule::backtracking;
  } else {
    throw ConfigError("solver.inner_step_rule: expected automatic, fixed or backtracking, got '" + rule + "'");
  }
  cfg.inner = {inner};
  const auto sampling = r.text("solver", "sampling", "online");
  if (sampling == "online") {
    cfg.sampling_mode = SamplingMode::online;
  } else if (sampling == "empirical") {
    cfg.sampling_mode = SamplingMode::empirical;
  } else {
    throw ConfigError("solver.sampling: expected online or empirical, got '" + sampling + "'");
  }
  cfg.seed = r.count("solver", "seed", 0);
  cfg.record_every = r.count("solver", "record_every", 1);
  cfg.record_residuals = r.flag("solver", "record_residuals", true);
  cfg.residual_grid = r.count("solver", "residual_grid", 256);
  return cfg;
}

inline OracleOptions build_oracle(const Table& table) {
  const Reader r(table);
  OracleOptions opts;
  opts.tol = r.number("oracle", "tol", 1e-10);
  opts.max_iterations = static_cast<int>(r.count("oracle", "max_iterations", 1000000));
  return opts;
}

inline OOSConfig build_oos(const Table& table, std::size_t agents) {
  const Reader r(table);
  if (!r.has_section("oos")) throw ConfigError("missing [oos] section");
  OOSConfig cfg;
  auto need = [&](const char* key) {
    auto v = r.list("oos", key);
    if (!v) throw ConfigError(std::string("oos.") + key + " is required");
    if (v->size() != agents) throw ConfigError(std::string("oos.") + key + " needs num_agents entries");
    return *v;
  };
  cfg.train_mean = need("train_mean");
  cfg.train_std = need("train_std");
  cfg.delta_mean = r.has("oos", "delta_mean") ? need("delta_mean") : std::vector<double>(agents, 0.0);
  cfg.delta_std = r.has("oos", "delta_std") ? need("delta_std") : std::vector<double>(agents, 0.0);
  for (double k : need("train_counts")) {
    if (k < 0 || k != std::floor(k)) throw ConfigError("oos.train_counts must be non-negative integers");
    cfg.train_counts.push_back(static_cast<std::size_t>(k));
  }
  cfg.test_count = r.count("oos", "test_count", 3000);
  if (r.has("oos", "rho")) cfg.rho = need("rho");
  cfg.macro_seed = r.count("oos", "macro_seed", 0);
  cfg.histogram_bins = r.count("oos", "histogram_bins", 30);
  cfg.label = r.text("oos", "label", "scenario");
  return cfg;
}

inline std::vector<Scenario> build_scenarios(const Table& table) {
  const Reader r(table);
  std::vector<std::pair<std::size_t, Scenario>> found;
  for (const auto& [section, keys] : table) {
    if (section.rfind("scenario.", 0) != 0) continue;
    const auto idx = std::stoull(section.substr(9));
    Scenario s;
    s.label = r.text(section, "label", "scenario" + std::to_string(idx));
    auto rho = r.list(section, "rho");
    if (!rho) throw ConfigError(section + ".rho is required");
    s.rho = *rho;
    found.emplace_back(idx, std::move(s));
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Scenario> out;
  for (auto& [idx, s] : found) out.push_back(std::move(s));
  return out;
}

}  // namespace drne::config

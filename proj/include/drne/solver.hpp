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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "drne/oracle.hpp"
#include "drne/parallel.hpp"
#include "drne/rng.hpp"
#include "drne/vi.hpp"

namespace drne {

enum class StepMode {
  fixed,        // eta = eta0 / sqrt(T) for every iteration
  diminishing,  // eta_t = eta0 / sqrt(t)
};

enum class SamplingMode {
  online,     // z_{i,t} drawn from the true distribution
  empirical,  // z_{i,t} drawn uniformly from the agent's anchors
};

struct SolverConfig {
  std::size_t horizon = 10000;
  StepMode step_mode = StepMode::fixed;
  double eta0 = 1.0;
  // Per-agent multipliers of eta0; empty means all ones.
  std::vector<double> agent_step_scale;
  // One entry per agent, or a single entry shared by all agents.
  std::vector<InnerSolverConfig> inner{InnerSolverConfig{}};
  SamplingMode sampling_mode = SamplingMode::online;
  std::uint64_t seed = 0;
  std::size_t record_every = 1;
  bool record_residuals = true;
  // Quantile points per agent used to build the population operator for online residuals.
  std::size_t residual_grid = 256;
};

// Proof constants of the averaged convergence bound, and the bound itself when it applies.
struct TheoryConstants {
  double gradient_bound = std::numeric_limits<double>::quiet_NaN();  // U
  double diameter = std::numeric_limits<double>::infinity();         // D
  double margin = std::numeric_limits<double>::quiet_NaN();          // mu_bar
  double inner_accuracy_sum = 0.0;                                   // sum_i L_x,i eps_i
  bool bound_applicable = false;
  double bound = std::numeric_limits<double>::quiet_NaN();
};

struct SolveReport {
  std::vector<std::size_t> recorded_t;
  std::vector<Vector> trajectory;
  // VI residual (unit step) of the running average of the iterates.
  std::vector<double> residuals;
  // VI residual (unit step) of the iterate itself.
  std::vector<double> iterate_residuals;
  // ||x_t - x_ref||^2 and (1/t) sum_{s<=t} ||x_s - x_ref||^2 at the recorded t; empty without a reference.
  std::vector<double> sq_errors;
  std::vector<double> avg_sq_error;
  Vector final_iterate;
  Vector averaged_iterate;
  double wall_time_seconds = 0.0;
  std::uint64_t seed = 0;
  TheoryConstants constants;
};

class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, std::size_t iteration) : std::runtime_error(what), iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

namespace detail {

inline const InnerSolverConfig& inner_for(const SolverConfig& cfg, std::size_t agent) {
  return cfg.inner.size() == 1 ? cfg.inner.front() : cfg.inner.at(agent);
}

inline void validate_solver_config(const GameSpec& spec, const SolverConfig& cfg) {
  if (cfg.horizon < 1) throw std::invalid_argument("solver: horizon must be at least 1");
  if (!(cfg.eta0 > 0.0)) throw std::invalid_argument("solver: eta0 must be positive");
  if (cfg.record_every < 1) throw std::invalid_argument("solver: record_every must be at least 1");
  if (cfg.inner.size() != 1 && cfg.inner.size() != spec.num_agents) {
    throw std::invalid_argument("solver: inner configs must be one shared entry or one per agent");
  }
  for (const auto& in : cfg.inner) {
    if (!(in.accuracy > 0.0)) throw std::invalid_argument("solver: inner accuracy must be positive");
  }
  if (!cfg.agent_step_scale.empty() && cfg.agent_step_scale.size() != spec.num_agents) {
    throw std::invalid_argument("solver: agent_step_scale needs one entry per agent");
  }
}

// Largest |grad_{x_i} f_i| over X x Xi for Cournot: the gradient is affine, so corners suffice.
inline double cournot_gradient_bound(const GameSpec& spec) {
  const auto& cost = std::get<CournotCost>(spec.cost_model);
  double lo_sum = 0.0, hi_sum = 0.0;
  for (const auto& box : spec.feasible_sets) {
    lo_sum += box.lower()[0];
    hi_sum += box.upper()[0];
  }
  double u = 0.0;
  for (std::size_t i = 0; i < spec.num_agents; ++i) {
    const double base = -cost.demand_intercept + cost.marginal_costs[i];
    const double hi = spec.feasible_sets[i].upper()[0] + hi_sum + base + spec.supports[i].upper()[0];
    const double lo = spec.feasible_sets[i].lower()[0] + lo_sum + base + spec.supports[i].lower()[0];
    u = std::max({u, std::abs(hi), std::abs(lo)});
  }
  return u;
}

}  // namespace detail

inline TheoryConstants theory_constants(const GameSpec& spec, const SolverConfig& cfg) {
  TheoryConstants c;
  c.diameter = joint_feasible_set(spec).diameter();
  std::optional<MonotonicityCertificate> cert;
  try {
    cert = certify_monotonicity(spec);
  } catch (const MissingConstants&) {
  }
  if (cert) {
    c.margin = cert->margin;
    for (std::size_t i = 0; i < spec.num_agents; ++i) {
      c.inner_accuracy_sum += cert->lipschitz_x[i] * detail::inner_for(cfg, i).accuracy;
    }
  }
  bool bounded = std::isfinite(c.diameter);
  for (const auto& s : spec.supports) bounded = bounded && s.bounded();
  if (std::holds_alternative<CournotCost>(spec.cost_model) && bounded) {
    c.gradient_bound = detail::cournot_gradient_bound(spec);
  }
  c.bound_applicable = bounded && cert && cert->certified && std::isfinite(c.gradient_bound) &&
                       cfg.step_mode == StepMode::fixed && cfg.agent_step_scale.empty();
  if (c.bound_applicable) {
    const double t = static_cast<double>(cfg.horizon);
    const double eta = cfg.eta0 / std::sqrt(t);
    const double n = static_cast<double>(spec.num_agents);
    c.bound = c.diameter * c.diameter / (2.0 * eta * c.margin * t) +
              n * eta * c.gradient_bound * c.gradient_bound / (2.0 * c.margin) +
              c.diameter * c.inner_accuracy_sum / c.margin;
  }
  return c;
}

// Where z_{i,t} comes from: a true distribution (online) or the anchors themselves (empirical).
using Sampling = std::variant<TrueDistribution, std::monostate>;

// Synchronous stochastic projected-gradient equilibrium seeking with an inexact adversary.
// From x_0 = proj_X(0), every agent draws z_{i,t}, computes an accuracy-certified worst case
// z-bar_{i,t} and steps x_{i,t+1} = proj_{X_i}(x_{i,t} - eta grad_{x_i} f_i(x_t, z-bar_{i,t})).
inline SolveReport run_algorithm1(const GameSpec& spec, const SolverConfig& cfg, const Sampling& sampling,
                                  const std::optional<Vector>& x_ref = std::nullopt) {
  const auto started = std::chrono::steady_clock::now();
  require_valid(spec);
  detail::validate_solver_config(spec, cfg);
  const auto* truth = std::get_if<TrueDistribution>(&sampling);
  if (cfg.sampling_mode == SamplingMode::online) {
    if (!truth) throw std::invalid_argument("solver: online sampling needs a true distribution");
    const auto problems = validate_truth(*truth, spec.num_agents);
    if (!problems.empty()) throw std::invalid_argument("solver: " + problems.front());
  }
  const std::size_t n = spec.num_agents;
  const auto dim = static_cast<Eigen::Index>(spec.joint_dim());
  if (x_ref && x_ref->size() != dim) throw std::invalid_argument("solver: reference has wrong dimension");

  // Operator whose residual is reported: the empirical game, or the discretized population game online.
  std::optional<GameSpec> residual_spec;
  if (cfg.record_residuals) {
    residual_spec = (cfg.sampling_mode == SamplingMode::online && spec.decision_dim == 1)
                        ? with_data(spec, discretize_truth(spec, *truth, cfg.residual_grid))
                        : spec;
  }
  InnerSolverConfig residual_inner = detail::inner_for(cfg, 0);
  residual_inner.accuracy = std::min(residual_inner.accuracy, 1e-8);
  residual_inner.record_trace = false;

  std::vector<Engine> streams;
  streams.reserve(n);
  const auto purpose =
      cfg.sampling_mode == SamplingMode::online ? StreamPurpose::online_sample : StreamPurpose::empirical_pick;
  for (std::size_t i = 0; i < n; ++i) streams.push_back(make_stream(cfg.seed, i, purpose));

  SolveReport report;
  report.seed = cfg.seed;
  report.constants = theory_constants(spec, cfg);

  Vector x = project_joint(spec, Vector::Zero(dim));
  Vector running_sum = Vector::Zero(dim);
  double sq_sum = 0.0;
  const double horizon = static_cast<double>(cfg.horizon);
  Vector next(dim);
  for (std::size_t t = 1; t <= cfg.horizon; ++t) {
    const double eta = cfg.step_mode == StepMode::fixed ? cfg.eta0 / std::sqrt(horizon)
                                                        : cfg.eta0 / std::sqrt(static_cast<double>(t));
    for (std::size_t i = 0; i < n; ++i) {
      Vector z;
      if (cfg.sampling_mode == SamplingMode::online) {
        z = draw_realization(truth->laws[i], spec.supports[i], streams[i]);
      } else {
        const auto& data = spec.empirical_data[i];
        std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
        z = data.samples[pick(streams[i])];
      }
      InnerSolveResult worst;
      try {
        worst = inner_maximize(spec, i, x, z, detail::inner_for(cfg, i));
      } catch (const InnerSolveFailure& e) {
        throw SolverFailure(std::string("iteration ") + std::to_string(t) + ": " + e.what(), t);
      }
      const Vector g = cost_grad_x(spec, i, x, worst.maximizer);
      if (!g.allFinite()) {
        throw SolverFailure("iteration " + std::to_string(t) + ": non-finite gradient for " + detail::agent_label(i), t);
      }
      const double eta_i = cfg.agent_step_scale.empty() ? eta : eta * cfg.agent_step_scale[i];
      spec.block(next, i) = project_box(spec.feasible_sets[i], spec.block(x, i) - eta_i * g);
    }
    x = next;
    running_sum += x;
    double sq = 0.0;
    if (x_ref) {
      sq = (x - *x_ref).squaredNorm();
      sq_sum += sq;
    }
    if (t % cfg.record_every == 0 || t == cfg.horizon) {
      report.recorded_t.push_back(t);
      report.trajectory.push_back(x);
      if (residual_spec) {
        const Vector avg = running_sum / static_cast<double>(t);
        report.residuals.push_back(vi_residual(*residual_spec, avg, residual_inner, 1.0));
        report.iterate_residuals.push_back(vi_residual(*residual_spec, x, residual_inner, 1.0));
      }
      if (x_ref) {
        report.sq_errors.push_back(sq);
        report.avg_sq_error.push_back(sq_sum / static_cast<double>(t));
      }
    }
  }
  report.final_iterate = x;
  report.averaged_iterate = running_sum / horizon;
  report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

// Prefix means of the recorded squared distances to the reference.
inline std::vector<std::pair<std::size_t, double>> average_distance_curve(const SolveReport& report) {
  if (report.sq_errors.empty() || report.sq_errors.size() != report.recorded_t.size()) {
    throw std::invalid_argument("average_distance_curve: report was built without a reference equilibrium");
  }
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(report.sq_errors.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < report.sq_errors.size(); ++k) {
    sum += report.sq_errors[k];
    out.emplace_back(report.recorded_t[k], sum / static_cast<double>(k + 1));
  }
  return out;
}

struct CurveBand {
  std::vector<std::size_t> t;
  std::vector<double> mean;
  std::vector<double> median;
  std::vector<double> min;
  std::vector<double> max;
};

struct SweepResult {
  std::vector<std::optional<SolveReport>> reports;
  std::vector<std::string> failures;  // empty string for successful seeds
  CurveBand residual;
  CurveBand avg_sq_error;
  std::size_t failed = 0;
};

namespace detail {

inline CurveBand aggregate(const std::vector<const std::vector<double>*>& curves, const std::vector<std::size_t>& t) {
  CurveBand band;
  if (curves.empty()) return band;
  band.t = t;
  for (std::size_t k = 0; k < t.size(); ++k) {
    std::vector<double> column;
    column.reserve(curves.size());
    for (const auto* c : curves) column.push_back((*c)[k]);
    double sum = 0.0;
    for (double v : column) sum += v;
    band.mean.push_back(sum / static_cast<double>(column.size()));
    band.min.push_back(*std::min_element(column.begin(), column.end()));
    band.max.push_back(*std::max_element(column.begin(), column.end()));
    std::sort(column.begin(), column.end());
    const std::size_t m = column.size();
    band.median.push_back(m % 2 == 1 ? column[m / 2] : 0.5 * (column[m / 2 - 1] + column[m / 2]));
  }
  return band;
}

}  // namespace detail

// Runs seeds cfg.seed .. cfg.seed + num_seeds - 1 and aggregates the curves pointwise.
// Failed seeds are recorded and excluded from the aggregate.
inline SweepResult seed_sweep(const GameSpec& spec, const SolverConfig& cfg, const Sampling& sampling,
                              const std::optional<Vector>& x_ref, std::size_t num_seeds,
                              std::size_t threads = default_thread_count()) {
  if (num_seeds < 1) throw std::invalid_argument("seed_sweep: num_seeds must be at least 1");
  SweepResult out;
  out.reports.resize(num_seeds);
  out.failures.resize(num_seeds);
  parallel_for(num_seeds, threads, [&](std::size_t k) {
    SolverConfig local = cfg;
    local.seed = cfg.seed + k;
    try {
      out.reports[k] = run_algorithm1(spec, local, sampling, x_ref);
    } catch (const std::exception& e) {
      out.failures[k] = e.what();
    }
  });
  std::vector<const std::vector<double>*> residuals, errors;
  const std::vector<std::size_t>* t = nullptr;
  for (const auto& r : out.reports) {
    if (!r) {
      ++out.failed;
      continue;
    }
    t = &r->recorded_t;
    if (!r->residuals.empty()) residuals.push_back(&r->residuals);
    if (!r->avg_sq_error.empty()) errors.push_back(&r->avg_sq_error);
  }
  if (t) {
    out.residual = detail::aggregate(residuals, *t);
    out.avg_sq_error = detail::aggregate(errors, *t);
  }
  return out;
}

}  // namespace drne

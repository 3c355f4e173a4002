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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "drne/game.hpp"

namespace drne {

// Approximate worst-case realization for one agent and one anchor sample.
struct InnerSolveResult {
  Vector maximizer;
  double value = 0.0;
  // Upper bound on the distance from `maximizer` to the exact maximizer.
  double distance_certificate = 0.0;
  int iterations_used = 0;
  // Objective after each ascent step; filled only when requested.
  std::vector<double> trace;
};

enum class StepRule {
  automatic,     // fixed when the xi-smoothness of f is known, backtracking otherwise
  fixed,         // step_scale / (L_ff + 2 lambda)
  backtracking,  // halve from 1 / (2 lambda) until the ascent condition holds
};

struct InnerSolverConfig {
  double accuracy = 1e-3;
  int max_iterations = 10000;
  StepRule step_rule = StepRule::automatic;
  // Multiplies the fixed step; values in (0, 1] keep the ascent monotone.
  double step_scale = 1.0;
  bool record_trace = false;
};

class InnerSolveFailure : public std::runtime_error {
 public:
  InnerSolveFailure(const std::string& what, InnerSolveResult best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const InnerSolveResult& best() const { return best_; }

 private:
  InnerSolveResult best_;
};

// Exact maximizer for the Cournot family: f_i is affine in xi_i with slope x_i, so the
// penalized objective is an isotropic concave quadratic whose box-constrained maximizer
// is the clamp of the unconstrained one.
inline InnerSolveResult closed_form_adversary(const GameSpec& spec, std::size_t agent, const Vector& x,
                                              const Vector& xi_hat) {
  detail::require_cournot(spec, "closed_form_adversary");
  const double lambda = spec.penalties.at(agent);
  const double shifted = xi_hat[0] + x[static_cast<Eigen::Index>(agent)] / (2.0 * lambda);
  InnerSolveResult r;
  r.maximizer = project_box(spec.supports[agent], Vector::Constant(1, shifted));
  r.value = cost_value(spec, agent, x, r.maximizer) - lambda * spec.transport(r.maximizer, xi_hat);
  r.distance_certificate = 0.0;
  r.iterations_used = 0;
  return r;
}

namespace detail {

inline std::optional<double> xi_smoothness(const GameSpec& spec, std::size_t agent) {
  if (std::holds_alternative<CournotCost>(spec.cost_model)) return 0.0;
  const auto& g = std::get<GenericCost>(spec.cost_model);
  if (g.xi_smoothness) return (*g.xi_smoothness)[agent];
  return std::nullopt;
}

}  // namespace detail

// Projected gradient ascent on xi -> h_i(x, xi, xi_hat) started at the anchor.
//
// h_i is mu = 2 lambda_i strongly concave. After a step of length s that satisfies the
// ascent (descent-lemma) condition, the new point z+ obeys
//   ||z+ - M|| <= ||G_s(z)|| * sqrt(1 - s mu) / mu,
// where G_s is the gradient mapping and M the exact maximizer. That bound is the
// distance certificate; iteration stops once it drops to the requested accuracy.
inline InnerSolveResult inner_maximize(const GameSpec& spec, std::size_t agent, const Vector& x,
                                       const Vector& xi_hat, const InnerSolverConfig& cfg) {
  if (!(cfg.accuracy > 0.0)) throw std::invalid_argument("inner_maximize: accuracy must be positive");
  if (!(cfg.step_scale > 0.0 && cfg.step_scale <= 1.0)) {
    throw std::invalid_argument("inner_maximize: step_scale must lie in (0, 1]");
  }
  const double lambda = spec.penalties.at(agent);
  const double mu = TransportCost::strong_convexity * lambda;
  const BoxSet& support = spec.supports[agent];

  auto objective = [&](const Vector& z) { return cost_value(spec, agent, x, z) - lambda * spec.transport(z, xi_hat); };
  auto gradient = [&](const Vector& z) {
    return Vector(cost_grad_xi(spec, agent, x, z) - lambda * spec.transport.grad_first(z, xi_hat));
  };

  const auto smooth = detail::xi_smoothness(spec, agent);
  bool backtrack = false;
  double step = 0.0;
  switch (cfg.step_rule) {
    case StepRule::fixed:
      if (!smooth) throw std::invalid_argument("inner_maximize: fixed step needs a declared xi-smoothness constant");
      step = cfg.step_scale / (*smooth + mu);
      break;
    case StepRule::automatic:
      backtrack = !smooth.has_value();
      step = smooth ? cfg.step_scale / (*smooth + mu) : 1.0 / mu;
      break;
    case StepRule::backtracking:
      backtrack = true;
      step = 1.0 / mu;
      break;
  }

  InnerSolveResult r;
  Vector z = project_box(support, xi_hat);
  double hz = objective(z);
  double certificate = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const Vector g = gradient(z);
    Vector next = project_box(support, z + step * g);
    double h_next = objective(next);
    if (backtrack) {
      for (int halvings = 0; halvings < 60; ++halvings) {
        const Vector d = next - z;
        const double model = hz + g.dot(d) - d.squaredNorm() / (2.0 * step);
        if (h_next >= model - 1e-14 * (1.0 + std::abs(hz))) break;
        step *= 0.5;
        next = project_box(support, z + step * g);
        h_next = objective(next);
      }
    }
    const double mapping_norm = (next - z).norm() / step;
    certificate = mapping_norm * std::sqrt(std::max(0.0, 1.0 - step * mu)) / mu;
    z = std::move(next);
    hz = h_next;
    if (cfg.record_trace) r.trace.push_back(hz);
    r.iterations_used = it;
    if (certificate <= cfg.accuracy) break;
  }
  r.maximizer = std::move(z);
  r.value = hz;
  r.distance_certificate = certificate;
  if (!(certificate <= cfg.accuracy)) {
    throw InnerSolveFailure("inner_maximize: " + detail::agent_label(agent) + " did not reach accuracy " +
                                std::to_string(cfg.accuracy) + " in " + std::to_string(cfg.max_iterations) +
                                " iterations (certificate " + std::to_string(certificate) + ")",
                            std::move(r));
  }
  return r;
}

// Exact for Cournot, certified-accurate ascent otherwise.
inline InnerSolveResult solve_adversary(const GameSpec& spec, std::size_t agent, const Vector& x,
                                        const Vector& xi_hat, const InnerSolverConfig& cfg) {
  if (std::holds_alternative<CournotCost>(spec.cost_model)) return closed_form_adversary(spec, agent, x, xi_hat);
  return inner_maximize(spec, agent, x, xi_hat, cfg);
}

// H_i(x): average over the agent's anchors of the inner maximum.
inline double surrogate_cost_value(const GameSpec& spec, std::size_t agent, const Vector& x,
                                   const InnerSolverConfig& cfg) {
  const auto& data = spec.empirical_data.at(agent);
  if (data.size() == 0) throw std::invalid_argument("surrogate_cost_value: agent has no samples");
  double sum = 0.0;
  for (const auto& anchor : data.samples) sum += inner_maximize(spec, agent, x, anchor, cfg).value;
  return sum * data.weight();
}

}  // namespace drne

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

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "drne/box.hpp"

namespace drne {

// Uniformly weighted samples of one agent's uncertainty.
struct EmpiricalDistribution {
  std::vector<Vector> samples;

  std::size_t size() const { return samples.size(); }
  double weight() const { return samples.empty() ? 0.0 : 1.0 / static_cast<double>(samples.size()); }

  static EmpiricalDistribution from_scalars(const std::vector<double>& values) {
    EmpiricalDistribution d;
    d.samples.reserve(values.size());
    for (double v : values) d.samples.push_back(Vector::Constant(1, v));
    return d;
  }
};

// f_i(x, xi_i) = x_i * (sum_j x_j - a + c_i + xi_i): negated Cournot revenue with
// linear inverse demand a - sum_j x_j. Scalar decisions and scalar uncertainty.
struct CournotCost {
  double demand_intercept = 10.0;
  std::vector<double> marginal_costs;
};

// User-supplied cost with optional declared regularity constants.
struct GenericCost {
  using Value = std::function<double(std::size_t agent, const Vector& x, const Vector& xi)>;
  using Gradient = std::function<Vector(std::size_t agent, const Vector& x, const Vector& xi)>;

  Value value;
  Gradient grad_x;   // gradient in the agent's own decision block
  Gradient grad_xi;  // gradient in the agent's uncertainty

  // Lipschitz constant of grad_x f_i with respect to xi_i, per agent.
  std::optional<std::vector<double>> lipschitz_x;
  // Lipschitz constant of grad_xi f_i with respect to the joint decision, per agent.
  std::optional<std::vector<double>> lipschitz_xi;
  // Strong monotonicity modulus of the stacked gradient in x, uniform over xi.
  std::optional<double> monotonicity;
  // Lipschitz constant of grad_xi f_i with respect to xi_i (0 when f_i is affine in xi_i).
  std::optional<std::vector<double>> xi_smoothness;
};

using CostModel = std::variant<CournotCost, GenericCost>;

enum class CostKind { linear_quadratic_cournot, generic };

inline CostKind cost_kind(const CostModel& model) {
  return std::holds_alternative<CournotCost>(model) ? CostKind::linear_quadratic_cournot
                                                   : CostKind::generic;
}

// c(z, z') = ||z - z'||_2^2, which is 2-strongly convex in z.
struct TransportCost {
  static constexpr double strong_convexity = 2.0;

  double operator()(const Vector& z, const Vector& z_prime) const { return (z - z_prime).squaredNorm(); }
  Vector grad_first(const Vector& z, const Vector& z_prime) const { return 2.0 * (z - z_prime); }
};

struct GameSpec {
  std::size_t num_agents = 0;
  std::size_t decision_dim = 1;
  std::vector<BoxSet> feasible_sets;
  std::vector<BoxSet> supports;
  std::vector<double> penalties;
  CostModel cost_model;
  std::vector<EmpiricalDistribution> empirical_data;
  TransportCost transport{};

  std::size_t joint_dim() const { return num_agents * decision_dim; }
  std::size_t uncertainty_dim(std::size_t agent) const { return supports.at(agent).dim(); }

  auto block(Vector& x, std::size_t agent) const {
    return x.segment(static_cast<Eigen::Index>(agent * decision_dim), static_cast<Eigen::Index>(decision_dim));
  }
  auto block(const Vector& x, std::size_t agent) const {
    return x.segment(static_cast<Eigen::Index>(agent * decision_dim), static_cast<Eigen::Index>(decision_dim));
  }
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {

inline std::string agent_label(std::size_t agent) { return "agent " + std::to_string(agent + 1); }

inline const CournotCost& require_cournot(const GameSpec& spec, const char* what) {
  if (const auto* c = std::get_if<CournotCost>(&spec.cost_model)) return *c;
  throw std::invalid_argument(std::string(what) + ": requires the linear-quadratic Cournot cost model");
}

}  // namespace detail

// Every violated invariant of the spec, as human-readable lines. Empty means usable.
inline std::vector<std::string> validate_game(const GameSpec& spec) {
  std::vector<std::string> out;
  auto complain = [&out](const std::string& msg) { out.push_back(msg); };
  const std::size_t n = spec.num_agents;

  if (n == 0) complain("num_agents must be positive");
  if (spec.decision_dim == 0) complain("decision_dim must be positive");
  if (spec.feasible_sets.size() != n) complain("expected one feasible set per agent");
  if (spec.supports.size() != n) complain("expected one support set per agent");
  if (spec.penalties.size() != n) complain("expected one penalty per agent");
  if (spec.empirical_data.size() != n) complain("expected one empirical distribution per agent");
  if (!out.empty()) return out;

  for (std::size_t i = 0; i < n; ++i) {
    const auto who = detail::agent_label(i);
    const auto& x_box = spec.feasible_sets[i];
    if (x_box.dim() != spec.decision_dim) complain(who + ": feasible set dimension differs from decision_dim");
    if (!x_box.nonempty()) complain(who + ": feasible set is empty (lower > upper)");
    const auto& xi_box = spec.supports[i];
    if (xi_box.dim() == 0) complain(who + ": support has zero dimension");
    if (!xi_box.nonempty()) complain(who + ": support is empty (lower > upper)");

    const double lambda = spec.penalties[i];
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      std::ostringstream os;
      os << who << ": penalty must be positive and finite (got " << lambda << ")";
      complain(os.str());
    }

    const auto& data = spec.empirical_data[i];
    if (data.size() == 0) complain(who + ": empirical distribution has no samples");
    for (std::size_t k = 0; k < data.size(); ++k) {
      const auto& s = data.samples[k];
      if (static_cast<std::size_t>(s.size()) != xi_box.dim()) {
        complain(who + ": sample " + std::to_string(k + 1) + " has wrong dimension");
      } else if (!xi_box.contains(s)) {
        std::ostringstream os;
        os << who << ": sample " << k + 1 << " (" << s.transpose() << ") lies outside the support";
        complain(os.str());
      }
    }
  }

  std::visit(
      [&](const auto& model) {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, CournotCost>) {
          if (spec.decision_dim != 1) complain("Cournot cost requires decision_dim = 1");
          for (std::size_t i = 0; i < n; ++i) {
            if (spec.supports[i].dim() != 1) complain(detail::agent_label(i) + ": Cournot cost requires scalar uncertainty");
          }
          if (model.marginal_costs.size() != n) complain("Cournot cost needs one marginal cost per agent");
          if (!std::isfinite(model.demand_intercept)) complain("Cournot demand intercept must be finite");
        } else {
          if (!model.value || !model.grad_x || !model.grad_xi) complain("generic cost model is missing callbacks");
          auto check_len = [&](const std::optional<std::vector<double>>& v, const char* name) {
            if (v && v->size() != n) complain(std::string("generic cost: ") + name + " needs one entry per agent");
          };
          check_len(model.lipschitz_x, "lipschitz_x");
          check_len(model.lipschitz_xi, "lipschitz_xi");
          check_len(model.xi_smoothness, "xi_smoothness");
        }
      },
      spec.cost_model);
  return out;
}

inline void require_valid(const GameSpec& spec) {
  const auto violations = validate_game(spec);
  if (violations.empty()) return;
  std::string msg = "invalid game:";
  for (const auto& v : violations) msg += "\n  " + v;
  throw std::invalid_argument(msg);
}

// f_i(x, xi_i)
inline double cost_value(const GameSpec& spec, std::size_t agent, const Vector& x, const Vector& xi) {
  if (const auto* c = std::get_if<CournotCost>(&spec.cost_model)) {
    const auto i = static_cast<Eigen::Index>(agent);
    return x[i] * (x.sum() - c->demand_intercept + c->marginal_costs[agent] + xi[0]);
  }
  return std::get<GenericCost>(spec.cost_model).value(agent, x, xi);
}

// grad_{x_i} f_i(x, xi_i)
inline Vector cost_grad_x(const GameSpec& spec, std::size_t agent, const Vector& x, const Vector& xi) {
  if (const auto* c = std::get_if<CournotCost>(&spec.cost_model)) {
    const auto i = static_cast<Eigen::Index>(agent);
    return Vector::Constant(1, x[i] + x.sum() - c->demand_intercept + c->marginal_costs[agent] + xi[0]);
  }
  return std::get<GenericCost>(spec.cost_model).grad_x(agent, x, xi);
}

// grad_{xi_i} f_i(x, xi_i)
inline Vector cost_grad_xi(const GameSpec& spec, std::size_t agent, const Vector& x, const Vector& xi) {
  if (std::holds_alternative<CournotCost>(spec.cost_model)) {
    return Vector::Constant(1, x[static_cast<Eigen::Index>(agent)]);
  }
  return std::get<GenericCost>(spec.cost_model).grad_xi(agent, x, xi);
}

// h_i(x, xi, xi_hat) = f_i(x, xi) - lambda_i * c(xi, xi_hat).
inline double penalized_objective(const GameSpec& spec, std::size_t agent, const Vector& x, const Vector& xi,
                                  const Vector& xi_hat) {
  if (!spec.supports.at(agent).contains(xi)) {
    throw DomainError("penalized_objective: uncertainty outside the support of " + detail::agent_label(agent));
  }
  return cost_value(spec, agent, x, xi) - spec.penalties[agent] * spec.transport(xi, xi_hat);
}

inline BoxSet joint_feasible_set(const GameSpec& spec) {
  const auto dim = static_cast<Eigen::Index>(spec.joint_dim());
  Vector lo(dim), hi(dim);
  for (std::size_t i = 0; i < spec.num_agents; ++i) {
    spec.block(lo, i) = spec.feasible_sets[i].lower();
    spec.block(hi, i) = spec.feasible_sets[i].upper();
  }
  return BoxSet(std::move(lo), std::move(hi));
}

inline Vector project_joint(const GameSpec& spec, const Vector& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < spec.num_agents; ++i) {
    spec.block(out, i) = project_box(spec.feasible_sets[i], spec.block(x, i));
  }
  return out;
}

// Copy of the spec with per-agent data replaced; used by the oracle and the out-of-sample harness.
inline GameSpec with_data(GameSpec spec, std::vector<EmpiricalDistribution> data) {
  spec.empirical_data = std::move(data);
  return spec;
}

// Standard Cournot game with scalar boxes shared by all agents.
struct CournotSetup {
  std::size_t num_agents = 5;
  double demand_intercept = 10.0;
  std::vector<double> marginal_costs;  // defaults to 1 + 0.1 * i (1-based i)
  double x_lower = 0.0;
  double x_upper = 10.0;
  double xi_lower = 0.0;
  double xi_upper = 1.0;
  std::vector<double> penalties;  // defaults to 2 for every agent
};

inline GameSpec make_cournot_game(const CournotSetup& setup, std::vector<EmpiricalDistribution> data = {}) {
  GameSpec spec;
  spec.num_agents = setup.num_agents;
  spec.decision_dim = 1;
  CournotCost cost;
  cost.demand_intercept = setup.demand_intercept;
  cost.marginal_costs = setup.marginal_costs;
  if (cost.marginal_costs.empty()) {
    for (std::size_t i = 0; i < setup.num_agents; ++i) cost.marginal_costs.push_back(1.0 + 0.1 * static_cast<double>(i + 1));
  }
  spec.cost_model = std::move(cost);
  spec.penalties = setup.penalties.empty() ? std::vector<double>(setup.num_agents, 2.0) : setup.penalties;
  for (std::size_t i = 0; i < setup.num_agents; ++i) {
    spec.feasible_sets.push_back(BoxSet::uniform(1, setup.x_lower, setup.x_upper));
    spec.supports.push_back(BoxSet::uniform(1, setup.xi_lower, setup.xi_upper));
  }
  if (data.empty()) {
    // Single anchor at the support midpoint (or 0 when unbounded).
    const double mid = std::isfinite(setup.xi_lower + setup.xi_upper) ? 0.5 * (setup.xi_lower + setup.xi_upper) : 0.0;
    data.assign(setup.num_agents, EmpiricalDistribution::from_scalars({mid}));
  }
  spec.empirical_data = std::move(data);
  return spec;
}

}  // namespace drne

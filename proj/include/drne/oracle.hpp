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
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "drne/rng.hpp"
#include "drne/vi.hpp"

namespace drne {

enum class OracleMethod { interior_linear_solve, deterministic_projected_gradient };

inline const char* to_string(OracleMethod m) {
  return m == OracleMethod::interior_linear_solve ? "interior-linear-solve" : "deterministic-projected-gradient";
}

struct OracleResult {
  Vector equilibrium;
  OracleMethod method = OracleMethod::interior_linear_solve;
  double residual_at_solution = 0.0;
  bool interior_valid = false;
  int iterations = 0;
};

struct OracleOptions {
  double tol = 1e-10;
  int max_iterations = 1000000;
  // Required for generic models; Cournot uses 1 / L_F.
  std::optional<double> step;
  std::optional<Vector> start;
  // Inner accuracy for generic models.
  double inner_accuracy = 1e-12;
};

class OracleFailure : public std::runtime_error {
 public:
  OracleFailure(const std::string& what, Vector last) : std::runtime_error(what), last_(std::move(last)) {}
  const Vector& last_iterate() const { return last_; }

 private:
  Vector last_;
};

namespace detail {

inline InnerSolverConfig exact_inner(double accuracy = 1e-12) {
  InnerSolverConfig cfg;
  cfg.accuracy = accuracy;
  cfg.max_iterations = 100000;
  return cfg;
}

inline double anchor_mean(const EmpiricalDistribution& d) {
  double sum = 0.0;
  for (const auto& s : d.samples) sum += s[0];
  return sum * d.weight();
}

// Cournot: x interior to X and every worst-case realization anchor + x_i / (2 lambda_i) interior to its support.
inline bool interior_regime(const GameSpec& spec, const Vector& x) {
  for (std::size_t i = 0; i < spec.num_agents; ++i) {
    const Vector xi_block = spec.block(x, i);
    if (!spec.feasible_sets[i].interior(xi_block)) return false;
    const double shift = xi_block[0] / (2.0 * spec.penalties[i]);
    for (const auto& anchor : spec.empirical_data[i].samples) {
      if (!spec.supports[i].interior(Vector::Constant(1, anchor[0] + shift))) return false;
    }
  }
  return true;
}

}  // namespace detail

// Lipschitz constant of the Cournot pseudo-gradient: ||I + 11^T|| + max_i 1 / (2 lambda_i).
inline double cournot_operator_lipschitz(const GameSpec& spec) {
  double worst = 0.0;
  for (double lambda : spec.penalties) worst = std::max(worst, 1.0 / (2.0 * lambda));
  return static_cast<double>(spec.num_agents) + 1.0 + worst;
}

// Solves (I + 11^T + diag(1 / (2 lambda))) x = a - c - mean(anchors), which characterizes the
// equilibrium when x is interior to X and every worst-case realization is interior to its support.
inline OracleResult interior_linear_solve(const GameSpec& spec) {
  require_valid(spec);
  const auto& cost = detail::require_cournot(spec, "interior_linear_solve");
  const auto n = static_cast<Eigen::Index>(spec.num_agents);
  Matrix system = Matrix::Ones(n, n) + Matrix::Identity(n, n);
  Vector rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto agent = static_cast<std::size_t>(i);
    system(i, i) += 1.0 / (2.0 * spec.penalties[agent]);
    rhs[i] = cost.demand_intercept - cost.marginal_costs[agent] - detail::anchor_mean(spec.empirical_data[agent]);
  }
  const Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) throw std::runtime_error("interior_linear_solve: system is not positive definite");

  OracleResult r;
  r.method = OracleMethod::interior_linear_solve;
  r.equilibrium = llt.solve(rhs);
  const bool valid = detail::interior_regime(spec, r.equilibrium);
  r.interior_valid = valid;
  if (!valid) {
    r.equilibrium.resize(0);
    return r;
  }
  r.residual_at_solution = vi_residual(spec, r.equilibrium, detail::exact_inner(), 1.0);
  return r;
}

// Deterministic projected gradient on the exact empirical pseudo-gradient with step 1 / L_F,
// stopped once the unit-step VI residual is at most tol.
inline OracleResult exact_projected_gradient(const GameSpec& spec, const OracleOptions& opts = {}) {
  require_valid(spec);
  double step = 0.0;
  if (opts.step) {
    step = *opts.step;
  } else if (std::holds_alternative<CournotCost>(spec.cost_model)) {
    step = 1.0 / cournot_operator_lipschitz(spec);
  } else {
    throw std::invalid_argument("exact_projected_gradient: generic models need an explicit step");
  }
  if (!(step > 0.0)) throw std::invalid_argument("exact_projected_gradient: step must be positive");

  const auto inner = detail::exact_inner(opts.inner_accuracy);
  Vector x = project_joint(spec, opts.start ? *opts.start : Vector::Zero(static_cast<Eigen::Index>(spec.joint_dim())));
  OracleResult r;
  r.method = OracleMethod::deterministic_projected_gradient;
  for (int it = 0; it <= opts.max_iterations; ++it) {
    const Vector f = pseudo_gradient(spec, x, inner);
    const double residual = (x - project_joint(spec, x - f)).norm();
    if (!std::isfinite(residual)) throw OracleFailure("exact_projected_gradient: non-finite residual", x);
    if (residual <= opts.tol) {
      r.equilibrium = x;
      r.residual_at_solution = residual;
      r.iterations = it;
      r.interior_valid = std::holds_alternative<CournotCost>(spec.cost_model) ? detail::interior_regime(spec, x)
                                                                               : joint_feasible_set(spec).interior(x);
      return r;
    }
    x = project_joint(spec, x - step * f);
  }
  throw OracleFailure("exact_projected_gradient: iteration cap reached before residual tolerance", x);
}

// Linear solve when its interiority checks pass, projected gradient otherwise.
inline OracleResult reference_equilibrium(const GameSpec& spec, const OracleOptions& opts = {}) {
  if (std::holds_alternative<CournotCost>(spec.cost_model)) {
    auto linear = interior_linear_solve(spec);
    if (linear.interior_valid && linear.residual_at_solution <= opts.tol) return linear;
  }
  return exact_projected_gradient(spec, opts);
}

// H_i(x*) minus the smallest H_i over a grid of unilateral deviations x_i in X_i.
// Values near zero (slightly negative from discretization) certify the equilibrium.
inline std::vector<double> best_response_check(const GameSpec& spec, const Vector& x_star, double grid_step,
                                               const InnerSolverConfig& cfg = detail::exact_inner(1e-10)) {
  if (spec.decision_dim != 1) throw std::invalid_argument("best_response_check: scalar decisions only");
  if (!(grid_step > 0.0)) throw std::invalid_argument("best_response_check: grid_step must be positive");
  std::vector<double> gaps(spec.num_agents, 0.0);
  for (std::size_t i = 0; i < spec.num_agents; ++i) {
    const auto& box = spec.feasible_sets[i];
    if (!box.bounded()) throw std::invalid_argument("best_response_check: feasible sets must be bounded");
    const double lo = box.lower()[0];
    const double hi = box.upper()[0];
    const double at_star = surrogate_cost_value(spec, i, x_star, cfg);
    Vector x = x_star;
    double best = std::numeric_limits<double>::infinity();
    const auto points = static_cast<long>(std::floor((hi - lo) / grid_step + 1e-9));
    for (long k = 0; k <= points + 1; ++k) {
      x[static_cast<Eigen::Index>(i)] = std::min(hi, lo + static_cast<double>(k) * grid_step);
      best = std::min(best, surrogate_cost_value(spec, i, x, cfg));
    }
    gaps[i] = at_star - best;
  }
  return gaps;
}

// Midpoint-quantile discretization of the truncated true law: K anchors at the
// (k - 1/2)/K quantiles. Used to build the population surrogate for online-mode references.
inline std::vector<EmpiricalDistribution> discretize_truth(const GameSpec& spec, const TrueDistribution& truth,
                                                           std::size_t points) {
  if (points == 0) throw std::invalid_argument("discretize_truth: need at least one point");
  std::vector<EmpiricalDistribution> out(spec.num_agents);
  for (std::size_t i = 0; i < spec.num_agents; ++i) {
    const auto& support = spec.supports[i];
    if (support.dim() != 1) throw std::invalid_argument("discretize_truth: scalar supports only");
    const double s_lo = support.lower()[0];
    const double s_hi = support.upper()[0];
    std::vector<double> values;
    values.reserve(points);
    for (std::size_t k = 0; k < points; ++k) {
      const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(points);
      double v = 0.0;
      if (const auto* law = std::get_if<UniformLaw>(&truth.laws.at(i))) {
        const double lo = std::max(law->lower, s_lo);
        const double hi = std::min(law->upper, s_hi);
        if (lo > hi) throw std::invalid_argument("discretize_truth: uniform law misses the support");
        v = lo + u * (hi - lo);
      } else {
        const auto& g = std::get<GaussianLaw>(truth.laws.at(i));
        const boost::math::normal_distribution<double> normal(g.mean, g.stddev);
        const double p_lo = std::isfinite(s_lo) ? boost::math::cdf(normal, s_lo) : 0.0;
        const double p_hi = std::isfinite(s_hi) ? boost::math::cdf(normal, s_hi) : 1.0;
        v = boost::math::quantile(normal, p_lo + u * (p_hi - p_lo));
      }
      values.push_back(std::clamp(v, s_lo, s_hi));
    }
    out[i] = EmpiricalDistribution::from_scalars(values);
  }
  return out;
}

}  // namespace drne

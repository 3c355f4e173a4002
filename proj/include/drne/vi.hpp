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
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "drne/adversary.hpp"
#include "drne/rng.hpp"

namespace drne {

// Envelope gradient of H_i-hat: grad_{x_i} f_i evaluated at the worst-case realization.
inline Vector surrogate_gradient(const GameSpec& spec, std::size_t agent, const Vector& x, const Vector& xi_hat,
                                 const InnerSolverConfig& cfg) {
  const auto worst = solve_adversary(spec, agent, x, xi_hat, cfg);
  return cost_grad_x(spec, agent, x, worst.maximizer);
}

// F_K(x): per-agent empirical averages of the envelope gradient, stacked in agent order.
// Samples are summed in index order so the result is bitwise reproducible.
inline Vector pseudo_gradient(const GameSpec& spec, const Vector& x, const InnerSolverConfig& cfg) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(spec.joint_dim()));
  for (std::size_t i = 0; i < spec.num_agents; ++i) {
    const auto& data = spec.empirical_data[i];
    Vector sum = Vector::Zero(static_cast<Eigen::Index>(spec.decision_dim));
    for (const auto& anchor : data.samples) sum += surrogate_gradient(spec, i, x, anchor, cfg);
    spec.block(out, i) = sum * data.weight();
  }
  return out;
}

// ||x - proj_X(x - step F_K(x))||, zero exactly at solutions of VI(F_K, X).
inline double vi_residual(const GameSpec& spec, const Vector& x, const InnerSolverConfig& cfg, double step = 1.0) {
  if (!(step > 0.0)) throw std::invalid_argument("vi_residual: step must be positive");
  return (x - project_joint(spec, x - step * pseudo_gradient(spec, x, cfg))).norm();
}

struct MonotonicityCertificate {
  double mu = 0.0;
  double mu_xi = 0.0;
  double margin = 0.0;
  bool certified = false;
  std::vector<double> lipschitz_x;
  std::vector<double> lipschitz_xi;
  // True when the constants came from sampling rather than closed forms or declarations.
  bool estimated = false;
};

class MissingConstants : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Sampled lower bounds on the regularity constants of a cost model.
struct ConstantEstimates {
  std::vector<double> lipschitz_x;
  std::vector<double> lipschitz_xi;
  double mu = 0.0;
  std::size_t samples = 0;
};

// mu - sqrt(N) * max_i L_x,i L_xi,i / (2 lambda_i).
inline MonotonicityCertificate make_certificate(const GameSpec& spec, double mu, std::vector<double> lipschitz_x,
                                                std::vector<double> lipschitz_xi, bool estimated) {
  MonotonicityCertificate cert;
  cert.mu = mu;
  cert.estimated = estimated;
  const double root_n = std::sqrt(static_cast<double>(spec.num_agents));
  double worst_product = 0.0;
  double worst_lambda = 1.0;
  for (std::size_t i = 0; i < spec.num_agents; ++i) {
    const double product = lipschitz_x[i] * lipschitz_xi[i];
    const double ratio = product / (2.0 * spec.penalties[i]);
    if (ratio > cert.mu_xi) {
      cert.mu_xi = ratio;
      worst_product = product;
      worst_lambda = spec.penalties[i];
    }
  }
  // Evaluated as (sqrt(N) L L) / (2 lambda) so exact boundary cases land on zero.
  cert.margin = mu - (root_n * worst_product) / (2.0 * worst_lambda);
  cert.certified = cert.margin > 0.0;
  cert.lipschitz_x = std::move(lipschitz_x);
  cert.lipschitz_xi = std::move(lipschitz_xi);
  return cert;
}

// Closed-form constants for Cournot (mu = L_x = L_xi = 1); declared constants for generic models.
inline MonotonicityCertificate certify_monotonicity(const GameSpec& spec) {
  const std::size_t n = spec.num_agents;
  if (std::holds_alternative<CournotCost>(spec.cost_model)) {
    return make_certificate(spec, 1.0, std::vector<double>(n, 1.0), std::vector<double>(n, 1.0), false);
  }
  const auto& g = std::get<GenericCost>(spec.cost_model);
  if (!g.monotonicity || !g.lipschitz_x || !g.lipschitz_xi) {
    throw MissingConstants("certify_monotonicity: generic cost model does not declare mu, L_x and L_xi");
  }
  return make_certificate(spec, *g.monotonicity, *g.lipschitz_x, *g.lipschitz_xi, false);
}

inline MonotonicityCertificate certify_monotonicity(const GameSpec& spec, const ConstantEstimates& est) {
  return make_certificate(spec, est.mu, est.lipschitz_x, est.lipschitz_xi, true);
}

// Difference-quotient estimates over random pairs in X x Xi. Half of the decision pairs
// differ in every block, the other half in a single random agent block, so both
// coordinate-aligned and mixed directions are probed. Never a proof.
inline ConstantEstimates estimate_constants(const GameSpec& spec, std::size_t sample_count, std::uint64_t rng_seed) {
  require_valid(spec);
  const std::size_t n = spec.num_agents;
  for (std::size_t i = 0; i < n; ++i) {
    if (!spec.feasible_sets[i].bounded() || !spec.supports[i].bounded()) {
      throw std::invalid_argument("estimate_constants: feasible sets and supports must be bounded");
    }
  }
  auto eng = make_stream(rng_seed, 0, StreamPurpose::constant_estimation);
  const BoxSet x_box = joint_feasible_set(spec);
  auto draw_xi = [&](std::size_t i) { return uniform_in_box(spec.supports[i], eng); };

  ConstantEstimates est;
  est.lipschitz_x.assign(n, 0.0);
  est.lipschitz_xi.assign(n, 0.0);
  est.mu = std::numeric_limits<double>::infinity();
  constexpr double degenerate = 1e-12;
  for (std::size_t s = 0; s < sample_count; ++s) {
    const Vector x = uniform_in_box(x_box, eng);
    Vector y;
    do {
      if (s % 2 == 0) {
        y = uniform_in_box(x_box, eng);
      } else {
        y = x;
        const auto agent = static_cast<std::size_t>(std::uniform_int_distribution<std::size_t>(0, n - 1)(eng));
        spec.block(y, agent) = uniform_in_box(spec.feasible_sets[agent], eng);
      }
    } while ((x - y).norm() < degenerate);
    const double dx = (x - y).norm();

    double inner = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vector xi = draw_xi(i);
      Vector xi_other;
      do {
        xi_other = draw_xi(i);
      } while ((xi - xi_other).norm() < degenerate && spec.supports[i].diameter() > 0.0);
      const double dxi = (xi - xi_other).norm();
      if (dxi >= degenerate) {
        const double q = (cost_grad_x(spec, i, x, xi) - cost_grad_x(spec, i, x, xi_other)).norm() / dxi;
        est.lipschitz_x[i] = std::max(est.lipschitz_x[i], q);
      }
      const double q_xi = (cost_grad_xi(spec, i, x, xi) - cost_grad_xi(spec, i, y, xi)).norm() / dx;
      est.lipschitz_xi[i] = std::max(est.lipschitz_xi[i], q_xi);
      inner += (cost_grad_x(spec, i, x, xi) - cost_grad_x(spec, i, y, xi)).dot(spec.block(x, i) - spec.block(y, i));
    }
    est.mu = std::min(est.mu, inner / (dx * dx));
  }
  if (sample_count == 0) est.mu = 0.0;
  est.samples = sample_count;
  return est;
}

}  // namespace drne

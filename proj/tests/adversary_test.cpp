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


#include <random>

#include <gtest/gtest.h>

#include "drne/adversary.hpp"
#include "test_support.hpp"

namespace drne {
namespace {

using testing::scalar;
using testing::vec;

// h(z) for agent 0 of a Cournot spec, written out independently.
double h_direct(const GameSpec& spec, const Vector& x, double z, double anchor) {
  const auto& c = std::get<CournotCost>(spec.cost_model);
  return testing::cournot_f(c.demand_intercept, c.marginal_costs[0], testing::to_std(x), 0, z) -
         spec.penalties[0] * (z - anchor) * (z - anchor);
}

InnerSolverConfig accuracy(double eps) {
  InnerSolverConfig cfg;
  cfg.accuracy = eps;
  return cfg;
}

// A nonlinear cost, concave in xi: f = x_i (S - a + xi) - kappa xi^2 / 2 + x_i sin(xi).
GenericCost curved_cost(double kappa, bool declare_smoothness) {
  GenericCost g;
  g.value = [kappa](std::size_t i, const Vector& x, const Vector& xi) {
    const double xi0 = xi[0], xi_ = x[static_cast<Eigen::Index>(i)];
    return xi_ * (x.sum() - 4.0 + xi0) - 0.5 * kappa * xi0 * xi0 + 0.1 * xi_ * std::sin(xi0);
  };
  g.grad_x = [](std::size_t i, const Vector& x, const Vector& xi) {
    return scalar(x[static_cast<Eigen::Index>(i)] + x.sum() - 4.0 + xi[0] + 0.1 * std::sin(xi[0]));
  };
  g.grad_xi = [kappa](std::size_t i, const Vector& x, const Vector& xi) {
    const double xi_ = x[static_cast<Eigen::Index>(i)];
    return scalar(xi_ - kappa * xi[0] + 0.1 * xi_ * std::cos(xi[0]));
  };
  if (declare_smoothness) g.xi_smoothness = std::vector<double>{kappa + 1.0, kappa + 1.0};
  return g;
}

TEST(ClosedFormAdversary, InteriorMaximizerMatchesGridSearch) {
  const auto spec = make_cournot_game({});
  const Vector x = vec({1.0, 1.0, 1.0, 1.0, 1.0});
  const auto r = closed_form_adversary(spec, 0, x, scalar(0.3));
  EXPECT_NEAR(r.maximizer[0], 0.55, 1e-15);
  EXPECT_EQ(r.distance_certificate, 0.0);
  const double grid = testing::grid_argmax([&](double z) { return h_direct(spec, x, z, 0.3); }, 0.0, 1.0, 1e-4);
  EXPECT_LE(std::abs(grid - r.maximizer[0]), 1e-4);
  EXPECT_NEAR(r.value, h_direct(spec, x, 0.55, 0.3), 1e-14);
}

TEST(ClosedFormAdversary, NoLeverageStaysAtAnchor) {
  auto spec = make_cournot_game({});
  for (double lambda : {0.1, 1.0, 50.0}) {
    spec.penalties[0] = lambda;
    EXPECT_EQ(closed_form_adversary(spec, 0, Vector::Zero(5), scalar(0.37)).maximizer[0], 0.37);
  }
}

TEST(ClosedFormAdversary, ClampsAtSupportBoundary) {
  auto spec = make_cournot_game({});
  spec.penalties[0] = 1.0;
  const Vector x = vec({10.0, 0.0, 0.0, 0.0, 0.0});
  EXPECT_EQ(closed_form_adversary(spec, 0, x, scalar(0.9)).maximizer[0], 1.0);
  const double grid = testing::grid_argmax([&](double z) { return h_direct(spec, x, z, 0.9); }, 0.0, 1.0, 1e-4);
  EXPECT_NEAR(grid, 1.0, 1e-4);
}

TEST(ClosedFormAdversary, RejectsGenericModels) {
  auto spec = testing::duopoly();
  spec.cost_model = curved_cost(1.0, true);
  EXPECT_THROW(closed_form_adversary(spec, 0, vec({1.0, 1.0}), scalar(0.3)), std::invalid_argument);
}

TEST(InnerMaximize, MatchesClosedFormAtRequestedAccuracy) {
  const auto spec = make_cournot_game({});
  const Vector x = Vector::Ones(5);
  const auto r = inner_maximize(spec, 0, x, scalar(0.3), accuracy(1e-6));
  EXPECT_NEAR(r.maximizer[0], 0.55, 1e-6);
  EXPECT_LE(r.distance_certificate, 1e-6);
}

TEST(InnerMaximize, PaperAccuracyCertificate) {
  const auto spec = make_cournot_game({});
  auto cfg = accuracy(1e-3);
  cfg.step_scale = 0.5;
  const auto r = inner_maximize(spec, 0, Vector::Ones(5), scalar(0.3), cfg);
  EXPECT_LE(r.distance_certificate, 1e-3);
  EXPECT_LE(std::abs(r.maximizer[0] - 0.55), r.distance_certificate + 1e-15);
  EXPECT_GT(r.iterations_used, 1);
}

TEST(InnerMaximize, ZeroDecisionReturnsAnchorImmediately) {
  const auto spec = make_cournot_game({});
  auto cfg = accuracy(1e-9);
  cfg.step_scale = 0.3;
  const auto r = inner_maximize(spec, 0, Vector::Zero(5), scalar(0.42), cfg);
  EXPECT_EQ(r.maximizer[0], 0.42);
  EXPECT_EQ(r.iterations_used, 1);
  EXPECT_EQ(r.distance_certificate, 0.0);
}

TEST(InnerMaximize, CertificateBoundsTrueDistance) {
  // Reduced step so the ascent takes many iterations; the certificate must always cover the error.
  auto spec = make_cournot_game({});
  std::mt19937_64 eng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    Vector x(5);
    for (auto& v : x) v = 10.0 * u(eng);
    spec.penalties[0] = 0.5 + 4.5 * u(eng);
    const double anchor = u(eng);
    auto cfg = accuracy(std::pow(10.0, -1.0 - 7.0 * u(eng)));
    cfg.step_scale = 0.1 + 0.9 * u(eng);
    const auto r = inner_maximize(spec, 0, x, scalar(anchor), cfg);
    const double exact = closed_form_adversary(spec, 0, x, scalar(anchor)).maximizer[0];
    EXPECT_LE(std::abs(r.maximizer[0] - exact), r.distance_certificate + 1e-14);
    EXPECT_LE(r.distance_certificate, cfg.accuracy);
  }
}

TEST(InnerMaximize, MonotoneImprovementWithFixedStep) {
  auto spec = testing::duopoly();
  spec.cost_model = curved_cost(0.5, true);
  auto cfg = accuracy(1e-10);
  cfg.step_rule = StepRule::fixed;
  cfg.step_scale = 0.7;
  cfg.record_trace = true;
  const auto r = inner_maximize(spec, 0, vec({2.0, 1.0}), scalar(-3.0), cfg);
  ASSERT_GT(r.trace.size(), 2u);
  for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_GE(r.trace[k], r.trace[k - 1] - 1e-15);
}

TEST(InnerMaximize, BacktrackingSolvesUndeclaredGenericModel) {
  auto spec = testing::duopoly();
  spec.cost_model = curved_cost(0.5, false);
  const Vector x = vec({2.0, 1.0});
  const auto r = inner_maximize(spec, 0, x, scalar(0.3), accuracy(1e-8));
  const auto& g = std::get<GenericCost>(spec.cost_model);
  // Independent oracle: fine grid then local refinement of h.
  auto h = [&](double z) { return g.value(0, x, scalar(z)) - 2.0 * (z - 0.3) * (z - 0.3); };
  const double coarse = testing::grid_argmax(h, -5.0, 5.0, 1e-3);
  const double fine = testing::grid_argmax(h, coarse - 1e-3, coarse + 1e-3, 1e-7);
  EXPECT_NEAR(r.maximizer[0], fine, 1e-6);
  EXPECT_THROW(
      [&] {
        auto cfg = accuracy(1e-8);
        cfg.step_rule = StepRule::fixed;
        return inner_maximize(spec, 0, x, scalar(0.3), cfg);
      }(),
      std::invalid_argument);
}

TEST(InnerMaximize, IterationCapReportsBestIterate) {
  const auto spec = make_cournot_game({});
  auto cfg = accuracy(1e-12);
  cfg.step_scale = 0.05;
  cfg.max_iterations = 3;
  try {
    inner_maximize(spec, 0, Vector::Ones(5), scalar(0.3), cfg);
    FAIL() << "expected InnerSolveFailure";
  } catch (const InnerSolveFailure& e) {
    EXPECT_EQ(e.best().iterations_used, 3);
    EXPECT_GT(e.best().distance_certificate, 1e-12);
    EXPECT_TRUE(spec.supports[0].contains(e.best().maximizer));
  }
}

TEST(InnerMaximize, RejectsBadConfig) {
  const auto spec = make_cournot_game({});
  EXPECT_THROW(inner_maximize(spec, 0, Vector::Ones(5), scalar(0.3), accuracy(0.0)), std::invalid_argument);
  auto cfg = accuracy(1e-3);
  cfg.step_scale = 1.5;
  EXPECT_THROW(inner_maximize(spec, 0, Vector::Ones(5), scalar(0.3), cfg), std::invalid_argument);
}

TEST(Adversary, StrongConcavityOfPenalizedObjective) {
  auto spec = make_cournot_game({});
  std::mt19937_64 eng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    Vector x(5);
    for (auto& v : x) v = 10.0 * u(eng);
    spec.penalties[0] = 0.5 + 4.5 * u(eng);
    const double a = u(eng), b = u(eng), anchor = u(eng), theta = u(eng);
    auto h = [&](double z) { return penalized_objective(spec, 0, x, scalar(z), scalar(anchor)); };
    const double lhs = h(theta * a + (1 - theta) * b);
    const double rhs = theta * h(a) + (1 - theta) * h(b) + spec.penalties[0] * theta * (1 - theta) * (a - b) * (a - b);
    EXPECT_GE(lhs, rhs - 1e-9);
  }
}

TEST(Adversary, MaximizerLipschitzInDecisions) {
  auto spec = make_cournot_game({});
  spec.supports[0] = BoxSet::uniform(1, -100.0, 100.0);
  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    Vector x(5), y(5);
    for (auto& v : x) v = 10.0 * u(eng);
    for (auto& v : y) v = 10.0 * u(eng);
    spec.penalties[0] = 0.5 + 4.5 * u(eng);
    const double anchor = u(eng);
    const double mx = closed_form_adversary(spec, 0, x, scalar(anchor)).maximizer[0];
    const double my = closed_form_adversary(spec, 0, y, scalar(anchor)).maximizer[0];
    EXPECT_LE(std::abs(mx - my), (x - y).norm() / (2.0 * spec.penalties[0]) + 1e-14);
  }
}

TEST(SurrogateCostValue, SingleSampleIsTheInnerValue) {
  const auto spec = testing::duopoly();
  const Vector x = vec({1.0, 1.0});
  const auto cfg = accuracy(1e-12);
  EXPECT_EQ(surrogate_cost_value(spec, 0, x, cfg), inner_maximize(spec, 0, x, scalar(0.3), cfg).value);
}

TEST(SurrogateCostValue, EnvelopeIdentityForInteriorMaximizer) {
  // H = f(x, anchor) + x_i^2 / (4 lambda) when the maximizer is interior.
  const auto spec = testing::duopoly();
  const double h = surrogate_cost_value(spec, 0, vec({1.0, 1.0}), accuracy(1e-12));
  EXPECT_NEAR(h, testing::cournot_f(4.0, 0.0, {1.0, 1.0}, 0, 0.3) + 1.0 / 8.0, 1e-12);
  EXPECT_NEAR(h, -1.575, 1e-12);
}

TEST(SurrogateCostValue, HugePenaltyPinsToAnchors) {
  auto spec = testing::duopoly({0.1, 0.4, -0.2}, {0.3});
  spec.penalties[0] = 1e12;
  const Vector x = vec({1.5, 0.5});
  double average = 0.0;
  for (double a : {0.1, 0.4, -0.2}) average += testing::cournot_f(4.0, 0.0, {1.5, 0.5}, 0, a) / 3.0;
  EXPECT_NEAR(surrogate_cost_value(spec, 0, x, accuracy(1e-10)), average, 1e-6);
}

TEST(SolveAdversary, DispatchesOnCostModel) {
  auto spec = testing::duopoly();
  EXPECT_EQ(solve_adversary(spec, 0, vec({1.0, 1.0}), scalar(0.3), accuracy(1e-3)).iterations_used, 0);
  spec.cost_model = curved_cost(1.0, true);
  EXPECT_GT(solve_adversary(spec, 0, vec({1.0, 1.0}), scalar(0.3), accuracy(1e-6)).iterations_used, 0);
}

}  // namespace
}  // namespace drne

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

#include "drne/oracle.hpp"
#include "drne/solver.hpp"
#include "test_support.hpp"

namespace drne {
namespace {

using testing::vec;

SolverConfig small_config(std::size_t horizon, std::uint64_t seed = 0) {
  SolverConfig cfg;
  cfg.horizon = horizon;
  cfg.seed = seed;
  cfg.inner.front().accuracy = 1e-3;
  cfg.residual_grid = 64;
  return cfg;
}

TEST(RunAlgorithm1, DeterministicForFixedSeed) {
  const auto spec = make_cournot_game({});
  const auto truth = TrueDistribution::uniform(5, 0.0, 1.0);
  const auto cfg = small_config(300, 42);
  const Vector ref = Vector::Constant(5, 1.3);
  const auto a = run_algorithm1(spec, cfg, truth, ref);
  const auto b = run_algorithm1(spec, cfg, truth, ref);
  ASSERT_EQ(a.trajectory.size(), b.trajectory.size());
  for (std::size_t k = 0; k < a.trajectory.size(); ++k) EXPECT_EQ(a.trajectory[k], b.trajectory[k]);
  EXPECT_EQ(a.residuals, b.residuals);
  EXPECT_EQ(a.avg_sq_error, b.avg_sq_error);
  const auto c = run_algorithm1(spec, small_config(300, 43), truth, ref);
  EXPECT_NE(a.final_iterate, c.final_iterate);
}

TEST(RunAlgorithm1, IteratesStayFeasible) {
  CournotSetup setup;
  setup.x_upper = 1.0;  // binding upper bound
  setup.penalties.assign(5, 0.3);
  const auto spec = make_cournot_game(setup);
  auto cfg = small_config(500);
  cfg.eta0 = 5.0;
  const auto report = run_algorithm1(spec, cfg, TrueDistribution::uniform(5, 0.0, 1.0));
  const auto box = joint_feasible_set(spec);
  for (const auto& x : report.trajectory) EXPECT_TRUE(box.contains(x));
}

TEST(RunAlgorithm1, RecordingCadence) {
  const auto spec = make_cournot_game({});
  auto cfg = small_config(95);
  cfg.record_every = 10;
  const auto report = run_algorithm1(spec, cfg, TrueDistribution::uniform(5, 0.0, 1.0), Vector::Ones(5));
  const std::vector<std::size_t> expected{10, 20, 30, 40, 50, 60, 70, 80, 90, 95};
  EXPECT_EQ(report.recorded_t, expected);
  EXPECT_EQ(report.trajectory.size(), expected.size());
  EXPECT_EQ(report.residuals.size(), expected.size());
  EXPECT_EQ(report.avg_sq_error.size(), expected.size());
  EXPECT_EQ(report.trajectory.back(), report.final_iterate);
}

TEST(RunAlgorithm1, ReducesToDeterministicProjectedGradient) {
  // Single anchor per agent in empirical mode: every draw is the anchor, so Algorithm 1 is
  // projected gradient descent on the surrogate pseudo-gradient.
  CournotSetup setup;
  setup.penalties = {0.6, 1.0, 2.0, 3.0, 0.8};
  const std::vector<double> anchors{0.2, 0.9, 0.5, 0.0, 0.7};
  std::vector<EmpiricalDistribution> data;
  for (double a : anchors) data.push_back(EmpiricalDistribution::from_scalars({a}));
  const auto spec = make_cournot_game(setup, data);
  auto cfg = small_config(100);
  cfg.sampling_mode = SamplingMode::empirical;
  cfg.inner.front().accuracy = 1e-14;
  cfg.record_residuals = false;
  cfg.eta0 = 2.0;
  const auto report = run_algorithm1(spec, cfg, std::monostate{});

  // Direct implementation with the closed-form worst case clamp(anchor + x_i / (2 lambda_i), [0, 1]).
  const double eta = 2.0 / std::sqrt(100.0);
  std::vector<double> x(5, 0.0);
  for (std::size_t t = 0; t < 100; ++t) {
    double total = 0.0;
    for (double v : x) total += v;
    std::vector<double> next(5);
    for (std::size_t i = 0; i < 5; ++i) {
      const double worst = std::clamp(anchors[i] + x[i] / (2.0 * setup.penalties[i]), 0.0, 1.0);
      const double g = x[i] + total - 10.0 + (1.0 + 0.1 * static_cast<double>(i + 1)) + worst;
      next[i] = std::clamp(x[i] - eta * g, 0.0, 10.0);
    }
    x = next;
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_NEAR(report.trajectory[t][static_cast<Eigen::Index>(i)], x[i], 1e-12) << "t=" << t + 1;
    }
  }
}

TEST(RunAlgorithm1, SingleAgentConvergesToProjectedMinimizer) {
  CournotSetup setup;
  setup.num_agents = 1;
  setup.demand_intercept = 6.0;
  setup.marginal_costs = {1.0};
  setup.penalties = {1e12};
  const auto spec = make_cournot_game(setup, {EmpiricalDistribution::from_scalars({0.4})});
  auto cfg = small_config(2000);
  cfg.sampling_mode = SamplingMode::empirical;
  // min_x x (x - 6 + 1 + 0.4): x* = 2.3.
  const auto report = run_algorithm1(spec, cfg, std::monostate{});
  EXPECT_NEAR(report.final_iterate[0], 2.3, 1e-8);

  setup.x_upper = 1.5;  // projected minimizer sits on the bound
  const auto clipped = make_cournot_game(setup, {EmpiricalDistribution::from_scalars({0.4})});
  EXPECT_EQ(run_algorithm1(clipped, cfg, std::monostate{}).final_iterate[0], 1.5);
}

TEST(RunAlgorithm1, FirstStepScalesWithEta) {
  CournotSetup setup;
  setup.x_lower = -100.0;
  setup.x_upper = 100.0;
  const auto spec = make_cournot_game(setup);
  const auto truth = TrueDistribution::uniform(5, 0.0, 1.0);
  auto cfg = small_config(1, 7);
  cfg.record_residuals = false;
  const double base = run_algorithm1(spec, cfg, truth).final_iterate.norm();
  cfg.eta0 = 3.0;
  const double scaled = run_algorithm1(spec, cfg, truth).final_iterate.norm();
  EXPECT_NEAR(scaled, 3.0 * base, 1e-12 * scaled);
}

TEST(RunAlgorithm1, DiminishingStepUsesCurrentIteration) {
  CournotSetup setup;
  setup.num_agents = 1;
  setup.x_lower = -100.0;
  setup.x_upper = 100.0;
  setup.penalties = {1e12};
  const auto spec = make_cournot_game(setup, {EmpiricalDistribution::from_scalars({0.5})});
  auto cfg = small_config(2);
  cfg.sampling_mode = SamplingMode::empirical;
  cfg.step_mode = StepMode::diminishing;
  cfg.record_residuals = false;
  const auto report = run_algorithm1(spec, cfg, std::monostate{});
  // x1 = 0 - 1 * (0 - 10 + 1.1 + 0.5); x2 = x1 - (1/sqrt 2) * (2 x1 - 8.4).
  const double x1 = 8.4;
  EXPECT_NEAR(report.trajectory[0][0], x1, 1e-9);
  EXPECT_NEAR(report.trajectory[1][0], x1 - (2 * x1 - 8.4) / std::sqrt(2.0), 1e-9);
}

TEST(RunAlgorithm1, RejectsInvalidInputs) {
  const auto spec = make_cournot_game({});
  const auto truth = TrueDistribution::uniform(5, 0.0, 1.0);
  auto cfg = small_config(10);
  cfg.eta0 = 0.0;
  EXPECT_THROW(run_algorithm1(spec, cfg, truth), std::invalid_argument);
  cfg = small_config(0);
  EXPECT_THROW(run_algorithm1(spec, cfg, truth), std::invalid_argument);
  EXPECT_THROW(run_algorithm1(spec, small_config(10), std::monostate{}), std::invalid_argument);
  auto bad = spec;
  bad.penalties[0] = 0.0;
  EXPECT_THROW(run_algorithm1(bad, small_config(10), truth), std::invalid_argument);
}

TEST(RunAlgorithm1, InnerFailureCarriesIteration) {
  auto spec = make_cournot_game({});
  auto cfg = small_config(10);
  cfg.inner.front().accuracy = 1e-14;
  cfg.inner.front().step_scale = 0.01;
  cfg.inner.front().max_iterations = 2;
  try {
    run_algorithm1(spec, cfg, TrueDistribution::uniform(5, 0.0, 1.0));
    FAIL() << "expected SolverFailure";
  } catch (const SolverFailure& e) {
    // At t = 1 all decisions are zero, so every anchor is already the inner maximizer.
    EXPECT_EQ(e.iteration(), 2u);
  }
}

TEST(TheoryConstants, CournotDefaults) {
  const auto c = theory_constants(make_cournot_game({}), small_config(10000));
  EXPECT_DOUBLE_EQ(c.diameter, std::sqrt(500.0));
  // Largest |x_i + S - a + c_i + xi| at the corner x = 10, xi = 1 for agent 5: 10 + 50 - 10 + 1.5 + 1.
  EXPECT_DOUBLE_EQ(c.gradient_bound, 52.5);
  EXPECT_NEAR(c.margin, 1.0 - std::sqrt(5.0) / 4.0, 1e-15);
  EXPECT_TRUE(c.bound_applicable);
  EXPECT_NEAR(c.inner_accuracy_sum, 5e-3, 1e-15);

  CournotSetup open;
  open.x_upper = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(theory_constants(make_cournot_game(open), small_config(10)).bound_applicable);
}

TEST(AverageDistanceCurve, PrefixMeans) {
  SolveReport r;
  r.recorded_t = {1, 2};
  r.sq_errors = {4.0, 2.0};
  const auto curve = average_distance_curve(r);
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_EQ(curve[0].second, 4.0);
  EXPECT_EQ(curve[1].second, 3.0);
  EXPECT_EQ(curve[1].first, 2u);
}

TEST(AverageDistanceCurve, ConstantTrajectoryAtReference) {
  CournotSetup setup;
  setup.num_agents = 1;
  setup.penalties = {1e12};
  setup.demand_intercept = 6.0;
  setup.marginal_costs = {1.0};
  setup.x_upper = 2.3;
  setup.x_lower = 2.3;
  const auto spec = make_cournot_game(setup, {EmpiricalDistribution::from_scalars({0.4})});
  auto cfg = small_config(20);
  cfg.sampling_mode = SamplingMode::empirical;
  const auto report = run_algorithm1(spec, cfg, std::monostate{}, vec({2.3}));
  for (const auto& [t, v] : average_distance_curve(report)) EXPECT_EQ(v, 0.0) << t;
}

TEST(AverageDistanceCurve, NeedsReference) {
  const auto report = run_algorithm1(make_cournot_game({}), small_config(5), TrueDistribution::uniform(5, 0.0, 1.0));
  EXPECT_THROW(average_distance_curve(report), std::invalid_argument);
}

TEST(SeedSweep, SingleSeedEqualsSingleRun) {
  const auto spec = make_cournot_game({});
  const auto truth = TrueDistribution::uniform(5, 0.0, 1.0);
  const auto cfg = small_config(200, 5);
  const Vector ref = Vector::Constant(5, 1.3);
  const auto sweep = seed_sweep(spec, cfg, truth, ref, 1, 1);
  const auto single = run_algorithm1(spec, cfg, truth, ref);
  EXPECT_EQ(sweep.residual.mean, single.residuals);
  EXPECT_EQ(sweep.residual.min, single.residuals);
  EXPECT_EQ(sweep.avg_sq_error.max, single.avg_sq_error);
  EXPECT_EQ(sweep.failed, 0u);
}

TEST(SeedSweep, BandOrderingAndThreadInvariance) {
  const auto spec = make_cournot_game({});
  const auto truth = TrueDistribution::uniform(5, 0.0, 1.0);
  auto cfg = small_config(300, 100);
  cfg.record_every = 10;
  const Vector ref = Vector::Constant(5, 1.3);
  const auto one = seed_sweep(spec, cfg, truth, ref, 6, 1);
  const auto many = seed_sweep(spec, cfg, truth, ref, 6, 4);
  for (std::size_t k = 0; k < one.residual.t.size(); ++k) {
    EXPECT_LE(one.residual.min[k], one.residual.mean[k]);
    EXPECT_LE(one.residual.mean[k], one.residual.max[k]);
    EXPECT_LE(one.residual.min[k], one.residual.median[k]);
    EXPECT_LE(one.residual.median[k], one.residual.max[k]);
  }
  EXPECT_EQ(one.residual.mean, many.residual.mean);
  EXPECT_EQ(one.avg_sq_error.median, many.avg_sq_error.median);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(one.reports[k]->final_iterate, many.reports[k]->final_iterate);
  EXPECT_THROW(seed_sweep(spec, cfg, truth, ref, 0, 1), std::invalid_argument);
}

TEST(SeedSweep, FailedSeedsAreMarked) {
  const auto spec = make_cournot_game({});
  auto cfg = small_config(3);
  cfg.inner.front().accuracy = 1e-14;
  cfg.inner.front().step_scale = 0.01;
  cfg.inner.front().max_iterations = 2;
  const auto sweep = seed_sweep(spec, cfg, TrueDistribution::uniform(5, 0.0, 1.0), std::nullopt, 3, 1);
  EXPECT_EQ(sweep.failed, 3u);
  for (const auto& f : sweep.failures) EXPECT_FALSE(f.empty());
  EXPECT_TRUE(sweep.residual.mean.empty());
}

}  // namespace
}  // namespace drne

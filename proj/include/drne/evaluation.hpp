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
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "drne/oracle.hpp"
#include "drne/parallel.hpp"
#include "drne/rng.hpp"

namespace drne {

// Train on few Gaussian samples, solve for the equilibrium, then price it under a shifted Gaussian.
struct OOSConfig {
  std::vector<double> train_mean;
  std::vector<double> train_std;
  std::vector<double> delta_mean;
  std::vector<double> delta_std;
  std::vector<std::size_t> train_counts;
  std::size_t test_count = 3000;
  // Risk-aversion dial per agent; the penalty is 1 / rho.
  std::vector<double> rho;
  std::uint64_t macro_seed = 0;
  std::string label = "scenario";
  std::size_t histogram_bins = 30;
};

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::size_t> counts;
};

struct SummaryStats {
  double mean = 0.0;
  double stddev = 0.0;
  double standard_error = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
};

struct OOSReport {
  std::string scenario;
  std::uint64_t seed = 0;
  // Sum over agents of f_i(x*, xi_i), one entry per joint test draw.
  std::vector<double> costs;
  SummaryStats summary;
  Histogram histogram;
  Vector equilibrium;
  OracleMethod oracle_method = OracleMethod::interior_linear_solve;
  // Expected population cost of x* under the (truncated) training law; NaN for generic costs.
  double in_sample_expected_cost = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<std::string> validate_oos(const OOSConfig& cfg, std::size_t agents) {
  std::vector<std::string> out;
  auto sized = [&](std::size_t got, const char* name) {
    if (got != agents) out.push_back(std::string("oos: ") + name + " needs one entry per agent");
  };
  sized(cfg.train_mean.size(), "train_mean");
  sized(cfg.train_std.size(), "train_std");
  sized(cfg.delta_mean.size(), "delta_mean");
  sized(cfg.delta_std.size(), "delta_std");
  sized(cfg.train_counts.size(), "train_counts");
  sized(cfg.rho.size(), "rho");
  if (!out.empty()) return out;
  for (std::size_t i = 0; i < agents; ++i) {
    const auto who = detail::agent_label(i);
    if (!(cfg.train_std[i] > 0.0)) out.push_back(who + ": train std must be positive");
    if (!(cfg.train_std[i] + cfg.delta_std[i] > 0.0)) out.push_back(who + ": perturbed std must be positive");
    if (!(cfg.rho[i] > 0.0) || !std::isfinite(cfg.rho[i])) out.push_back(who + ": rho must be positive and finite");
    if (cfg.train_counts[i] < 1) out.push_back(who + ": needs at least one training sample");
  }
  if (cfg.test_count < 1) out.push_back("oos: test_count must be at least 1");
  if (cfg.histogram_bins < 1) out.push_back("oos: histogram_bins must be at least 1");
  return out;
}

// Equal-width bins over [min, max]. Bins are half-open [lo, hi) except the last, which also
// holds the maximum. A constant sample spans the unit interval [v, v + 1].
inline Histogram histogram(const std::vector<double>& values, std::size_t num_bins) {
  if (values.empty()) throw std::invalid_argument("histogram: no values");
  if (num_bins < 1) throw std::invalid_argument("histogram: need at least one bin");
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *min_it;
  const double hi = *max_it > lo ? *max_it : lo + 1.0;
  const double width = (hi - lo) / static_cast<double>(num_bins);
  Histogram h;
  h.edges.resize(num_bins + 1);
  for (std::size_t k = 0; k <= num_bins; ++k) h.edges[k] = lo + static_cast<double>(k) * width;
  h.edges.back() = hi;
  h.counts.assign(num_bins, 0);
  const std::size_t last = num_bins - 1;
  for (double v : values) {
    auto k = static_cast<std::size_t>(std::clamp(std::floor((v - lo) / width), 0.0, static_cast<double>(last)));
    while (k > 0 && v < h.edges[k]) --k;
    while (k < last && v >= h.edges[k + 1]) ++k;
    ++h.counts[k];
  }
  return h;
}

// Linear interpolation between order statistics; expects sorted input.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile_sorted: no values");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto below = static_cast<std::size_t>(std::floor(pos));
  const auto above = std::min(below + 1, sorted.size() - 1);
  return sorted[below] + (pos - static_cast<double>(below)) * (sorted[above] - sorted[below]);
}

inline SummaryStats summarize(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("summarize: no values");
  SummaryStats s;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  s.mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.standard_error = s.stddev / std::sqrt(n);
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  s.q05 = quantile_sorted(sorted, 0.05);
  s.q50 = quantile_sorted(sorted, 0.50);
  s.q95 = quantile_sorted(sorted, 0.95);
  return s;
}

// Mean of N(mean, std) conditioned on [lo, hi].
inline double truncated_gaussian_mean(double mean, double stddev, double lo, double hi) {
  const boost::math::normal_distribution<double> standard(0.0, 1.0);
  const double a = std::isfinite(lo) ? (lo - mean) / stddev : -std::numeric_limits<double>::infinity();
  const double b = std::isfinite(hi) ? (hi - mean) / stddev : std::numeric_limits<double>::infinity();
  const double pdf_a = std::isfinite(a) ? boost::math::pdf(standard, a) : 0.0;
  const double pdf_b = std::isfinite(b) ? boost::math::pdf(standard, b) : 0.0;
  const double cdf_a = std::isfinite(a) ? boost::math::cdf(standard, a) : 0.0;
  const double cdf_b = std::isfinite(b) ? boost::math::cdf(standard, b) : 1.0;
  return mean + stddev * (pdf_a - pdf_b) / (cdf_b - cdf_a);
}

// Training and test draws come from streams keyed only by (macro_seed, agent), so scenarios
// that share a seed see bitwise-identical data and differ only through the penalties.
inline OOSReport run_oos_experiment(const OOSConfig& cfg, const GameSpec& game_template,
                                    const OracleOptions& oracle = {}) {
  const std::size_t n = game_template.num_agents;
  const auto problems = validate_oos(cfg, n);
  if (!problems.empty()) throw std::invalid_argument("invalid scenario: " + problems.front());

  GameSpec spec = game_template;
  spec.penalties.resize(n);
  for (std::size_t i = 0; i < n; ++i) spec.penalties[i] = 1.0 / cfg.rho[i];
  spec.empirical_data.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    auto eng = make_stream(cfg.macro_seed, i, StreamPurpose::training);
    const GaussianLaw law{cfg.train_mean[i], cfg.train_std[i]};
    for (std::size_t k = 0; k < cfg.train_counts[i]; ++k) {
      spec.empirical_data[i].samples.push_back(draw_realization(law, spec.supports[i], eng));
    }
  }
  require_valid(spec);

  OOSReport report;
  report.scenario = cfg.label;
  report.seed = cfg.macro_seed;
  const auto solved = reference_equilibrium(spec, oracle);
  report.equilibrium = solved.equilibrium;
  report.oracle_method = solved.method;

  std::vector<Engine> test_streams;
  std::vector<GaussianLaw> test_laws;
  for (std::size_t i = 0; i < n; ++i) {
    test_streams.push_back(make_stream(cfg.macro_seed, i, StreamPurpose::testing));
    test_laws.push_back({cfg.train_mean[i] + cfg.delta_mean[i], cfg.train_std[i] + cfg.delta_std[i]});
  }
  report.costs.reserve(cfg.test_count);
  for (std::size_t k = 0; k < cfg.test_count; ++k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vector xi = draw_realization(test_laws[i], spec.supports[i], test_streams[i]);
      total += cost_value(spec, i, report.equilibrium, xi);
    }
    report.costs.push_back(total);
  }
  report.summary = summarize(report.costs);
  report.histogram = histogram(report.costs, cfg.histogram_bins);

  if (std::holds_alternative<CournotCost>(spec.cost_model)) {
    // f_i is affine in xi_i, so the expectation passes inside.
    double expected = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = truncated_gaussian_mean(cfg.train_mean[i], cfg.train_std[i], spec.supports[i].lower()[0],
                                               spec.supports[i].upper()[0]);
      expected += cost_value(spec, i, report.equilibrium, Vector::Constant(1, m));
    }
    report.in_sample_expected_cost = expected;
  }
  return report;
}

struct Scenario {
  std::string label;
  std::vector<double> rho;
};

struct PairwiseComparison {
  std::size_t first = 0;
  std::size_t second = 0;
  // Mean over repetitions of (mean cost of first) - (mean cost of second).
  double mean_difference = 0.0;
  double standard_error = 0.0;
  // Repetitions in which the first scenario's mean cost is no larger than the second's.
  std::size_t first_not_worse = 0;
};

struct ScenarioSummary {
  std::string label;
  double mean_of_means = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
};

struct ScenarioTable {
  // reports[scenario][repetition]
  std::vector<std::vector<OOSReport>> reports;
  std::vector<ScenarioSummary> summaries;
  std::vector<PairwiseComparison> comparisons;
};

// Every scenario is run with macro seeds base.macro_seed + r for r < repetitions, so each
// repetition is a paired comparison on shared training and test draws.
inline ScenarioTable scenario_sweep(const std::vector<Scenario>& cases, const OOSConfig& base,
                                    const GameSpec& game_template, std::size_t repetitions,
                                    std::size_t threads = default_thread_count(), const OracleOptions& oracle = {}) {
  if (cases.size() < 2) throw std::invalid_argument("scenario_sweep: need at least two scenarios");
  if (repetitions < 1) throw std::invalid_argument("scenario_sweep: need at least one repetition");
  const std::size_t s_count = cases.size();
  ScenarioTable table;
  table.reports.assign(s_count, std::vector<OOSReport>(repetitions));
  parallel_for(s_count * repetitions, threads, [&](std::size_t job) {
    const std::size_t s = job / repetitions;
    const std::size_t r = job % repetitions;
    OOSConfig cfg = base;
    cfg.rho = cases[s].rho;
    cfg.label = cases[s].label;
    cfg.macro_seed = base.macro_seed + r;
    table.reports[s][r] = run_oos_experiment(cfg, game_template, oracle);
  });

  for (std::size_t s = 0; s < s_count; ++s) {
    ScenarioSummary sum;
    sum.label = cases[s].label;
    std::vector<double> pooled;
    double means = 0.0;
    for (const auto& rep : table.reports[s]) {
      means += rep.summary.mean;
      pooled.insert(pooled.end(), rep.costs.begin(), rep.costs.end());
    }
    sum.mean_of_means = means / static_cast<double>(repetitions);
    std::sort(pooled.begin(), pooled.end());
    sum.q05 = quantile_sorted(pooled, 0.05);
    sum.q50 = quantile_sorted(pooled, 0.50);
    sum.q95 = quantile_sorted(pooled, 0.95);
    table.summaries.push_back(std::move(sum));
  }

  for (std::size_t a = 0; a < s_count; ++a) {
    for (std::size_t b = a + 1; b < s_count; ++b) {
      PairwiseComparison cmp;
      cmp.first = a;
      cmp.second = b;
      std::vector<double> diffs;
      for (std::size_t r = 0; r < repetitions; ++r) {
        const double d = table.reports[a][r].summary.mean - table.reports[b][r].summary.mean;
        diffs.push_back(d);
        if (d <= 0.0) ++cmp.first_not_worse;
      }
      if (repetitions > 1) {
        const auto stats = summarize(diffs);
        cmp.mean_difference = stats.mean;
        cmp.standard_error = stats.standard_error;
      } else {
        // One repetition: pair the individual test realizations instead.
        const auto& ca = table.reports[a][0].costs;
        const auto& cb = table.reports[b][0].costs;
        std::vector<double> per_draw(ca.size());
        for (std::size_t k = 0; k < ca.size(); ++k) per_draw[k] = ca[k] - cb[k];
        const auto stats = summarize(per_draw);
        cmp.mean_difference = diffs.front();
        cmp.standard_error = stats.standard_error;
      }
      table.comparisons.push_back(cmp);
    }
  }
  return table;
}

}  // namespace drne

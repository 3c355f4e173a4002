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
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "drne/game.hpp"

namespace drne {

// Purposes of independent random streams. Each (seed, agent, purpose) triple owns one engine
// so results do not depend on the order in which agents or tasks are evaluated.
enum class StreamPurpose : std::uint32_t {
  online_sample = 1,
  empirical_pick = 2,
  training = 3,
  testing = 4,
  constant_estimation = 5,
};

using Engine = std::mt19937_64;

inline Engine make_stream(std::uint64_t seed, std::uint64_t agent, StreamPurpose purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(agent), static_cast<std::uint32_t>(agent >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return Engine(seq);
}

struct UniformLaw {
  double lower = 0.0;
  double upper = 1.0;
};

struct GaussianLaw {
  double mean = 0.0;
  double stddev = 1.0;
};

using ScalarLaw = std::variant<UniformLaw, GaussianLaw>;

// Per-agent generator of true realizations, truncated to the agent's support by rejection.
// Each coordinate of a vector uncertainty is drawn independently from the same law.
struct TrueDistribution {
  std::vector<ScalarLaw> laws;

  static TrueDistribution uniform(std::size_t agents, double lo, double hi) {
    return {std::vector<ScalarLaw>(agents, UniformLaw{lo, hi})};
  }
};

inline std::vector<std::string> validate_truth(const TrueDistribution& truth, std::size_t agents) {
  std::vector<std::string> out;
  if (truth.laws.size() != agents) out.push_back("true distribution needs one law per agent");
  for (std::size_t i = 0; i < truth.laws.size(); ++i) {
    const auto who = detail::agent_label(i);
    if (const auto* u = std::get_if<UniformLaw>(&truth.laws[i])) {
      if (!std::isfinite(u->lower) || !std::isfinite(u->upper) || !(u->lower <= u->upper)) {
        out.push_back(who + ": uniform law needs finite lower <= upper");
      }
    } else {
      const auto& g = std::get<GaussianLaw>(truth.laws[i]);
      if (!std::isfinite(g.mean) || !std::isfinite(g.stddev) || !(g.stddev > 0.0)) {
        out.push_back(who + ": gaussian law needs finite mean and positive std");
      }
    }
  }
  return out;
}

namespace detail {

inline double draw_scalar(const ScalarLaw& law, Engine& eng) {
  if (const auto* u = std::get_if<UniformLaw>(&law)) {
    if (u->lower == u->upper) return u->lower;
    return std::uniform_real_distribution<double>(u->lower, u->upper)(eng);
  }
  const auto& g = std::get<GaussianLaw>(law);
  return std::normal_distribution<double>(g.mean, g.stddev)(eng);
}

}  // namespace detail

// One draw from `law`, rejected until it falls inside [lo, hi].
inline double draw_truncated(const ScalarLaw& law, double lo, double hi, Engine& eng, int max_attempts = 100000) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const double v = detail::draw_scalar(law, eng);
    if (v >= lo && v <= hi) return v;
  }
  throw std::runtime_error("draw_truncated: rejection sampling exhausted; law has negligible mass on the support");
}

inline Vector draw_realization(const ScalarLaw& law, const BoxSet& support, Engine& eng) {
  Vector v(static_cast<Eigen::Index>(support.dim()));
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = draw_truncated(law, support.lower()[k], support.upper()[k], eng);
  return v;
}

inline double uniform_in(double lo, double hi, Engine& eng) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(eng);
}

inline Vector uniform_in_box(const BoxSet& box, Engine& eng) {
  if (!box.bounded()) throw std::invalid_argument("uniform_in_box: box must be bounded");
  Vector v(static_cast<Eigen::Index>(box.dim()));
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = uniform_in(box.lower()[k], box.upper()[k], eng);
  return v;
}

}  // namespace drne

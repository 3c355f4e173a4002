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
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace drne {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Axis-aligned box {v : lower <= v <= upper}. Bounds may be infinite.
class BoxSet {
 public:
  BoxSet() = default;
  BoxSet(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size()) {
      throw std::invalid_argument("BoxSet: lower and upper bounds differ in dimension");
    }
  }

  // Same scalar interval in every coordinate.
  static BoxSet uniform(std::size_t dim, double lo, double hi) {
    const auto n = static_cast<Eigen::Index>(dim);
    return BoxSet(Vector::Constant(n, lo), Vector::Constant(n, hi));
  }

  static BoxSet unbounded(std::size_t dim) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return uniform(dim, -inf, inf);
  }

  std::size_t dim() const { return static_cast<std::size_t>(lower_.size()); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  bool nonempty() const {
    for (Eigen::Index k = 0; k < lower_.size(); ++k) {
      if (std::isnan(lower_[k]) || std::isnan(upper_[k]) || lower_[k] > upper_[k]) return false;
    }
    return true;
  }

  bool bounded() const { return lower_.allFinite() && upper_.allFinite(); }

  bool contains(const Vector& v, double tol = 0.0) const {
    if (v.size() != lower_.size()) return false;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      if (!(v[k] >= lower_[k] - tol && v[k] <= upper_[k] + tol)) return false;
    }
    return true;
  }

  // Strict interior membership; infinite bounds are never active.
  bool interior(const Vector& v) const {
    if (v.size() != lower_.size()) return false;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      if (!(v[k] > lower_[k] && v[k] < upper_[k])) return false;
    }
    return true;
  }

  // Euclidean diameter; infinite for unbounded boxes.
  double diameter() const {
    if (!bounded()) return std::numeric_limits<double>::infinity();
    return (upper_ - lower_).norm();
  }

 private:
  Vector lower_;
  Vector upper_;
};

// Euclidean projection onto the box: a per-coordinate clamp.
inline Vector project_box(const BoxSet& box, const Vector& v) {
  if (static_cast<std::size_t>(v.size()) != box.dim()) {
    throw std::invalid_argument("project_box: dimension mismatch (box " + std::to_string(box.dim()) +
                                ", vector " + std::to_string(v.size()) + ")");
  }
  Vector out(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    out[k] = std::clamp(v[k], box.lower()[k], box.upper()[k]);
  }
  return out;
}

}  // namespace drne

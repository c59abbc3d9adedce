/*
 * Copyright 2026 The fairfuse Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Small generators and numeric helpers shared by the unit tests.

#ifndef FAME_TESTS_SUPPORT_HPP_
#define FAME_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fame/cohort.hpp"
#include "fame/tensor.hpp"

namespace fame::testing {

inline Tensor2 random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                             double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor2 t(rows, cols);
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline Tensor2 random_labels(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                             double p = 0.5) {
  std::bernoulli_distribution b(p);
  Tensor2 t(rows, cols);
  for (double& v : t.values()) v = b(rng) ? 1.0 : 0.0;
  return t;
}

inline std::vector<SensitiveAttributes> random_attrs(std::size_t n, std::mt19937_64& rng) {
  std::vector<SensitiveAttributes> out(n);
  for (auto& a : out) {
    for (Attribute attr : kAllAttributes) {
      std::uniform_int_distribution<std::size_t> d(0, subgroup_count(attr) - 1);
      a.subgroup[static_cast<std::size_t>(attr)] = static_cast<std::uint8_t>(d(rng));
    }
  }
  return out;
}

// |a - b| relative to the larger magnitude; entries both below `floor`
// compare absolutely.
inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)});
}

// Central difference of f over every entry of x; x is restored afterwards.
inline Tensor2 numeric_gradient(Tensor2& x, const std::function<double()>& f, double h = 1e-4) {
  Tensor2 g(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_rel_error(const Tensor2& a, const Tensor2& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_error(a[i], b[i]));
  return worst;
}

}  // namespace fame::testing

#endif  // FAME_TESTS_SUPPORT_HPP_

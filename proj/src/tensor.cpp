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

#include "fame/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "fame/errors.hpp"

namespace fame {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Tensor2: " + std::to_string(data_.size()) +
                     " values do not fill a " + shape_string() + " tensor");
  }
}

Tensor2 Tensor2::of(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Tensor2::of: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor2(r, c, std::move(data));
}

Tensor2 Tensor2::row(std::span<const double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor2::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

}  // namespace fame

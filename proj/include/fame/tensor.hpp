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

#ifndef FAME_TENSOR_HPP_
#define FAME_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fame {

// Dense row-major matrix of doubles. Every value in the model (embeddings,
// projections, gates, logits) lives in one of these.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  // Nested-list literal, mostly for tests: Tensor2::of({{1, 2}, {3, 4}}).
  static Tensor2 of(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor2 row(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  void fill(double v);
  bool same_shape(const Tensor2& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

  // "RxC", used in error messages.
  std::string shape_string() const;

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Throws ShapeError naming both shapes unless a and b match exactly.
void require_same_shape(const Tensor2& a, const Tensor2& b, const char* op);

}  // namespace fame

#endif  // FAME_TENSOR_HPP_

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

#include "fame/kernels.hpp"

#include <cstdint>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fame/errors.hpp"

namespace fame::kernels {

namespace {

void check_inner(const Tensor2& a, std::size_t a_inner, const Tensor2& b, std::size_t b_inner,
                 const char* op) {
  if (a_inner != b_inner) {
    throw ShapeError(std::string(op) + ": cannot multiply " + a.shape_string() + " by " +
                     b.shape_string());
  }
}

// Row kernels shared by both variants; the only difference between serial and
// parallel is who iterates over `i`.

inline void matmul_row(const Tensor2& a, const Tensor2& b, Tensor2& c, std::size_t i) {
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  double* out = c.row_span(i).data();
  const double* arow = a.row_span(i).data();
  const double* bdata = b.values().data();
  for (std::size_t k = 0; k < inner; ++k) {
    const double aik = arow[k];
    const double* brow = bdata + k * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
  }
}

// Row `p` of A^T B: sum over samples in ascending order.
inline void matmul_tn_row(const Tensor2& a, const Tensor2& b, Tensor2& c, std::size_t p) {
  const std::size_t samples = a.rows();
  const std::size_t n = b.cols();
  double* out = c.row_span(p).data();
  for (std::size_t s = 0; s < samples; ++s) {
    const double asp = a(s, p);
    const double* brow = b.row_span(s).data();
    for (std::size_t j = 0; j < n; ++j) out[j] += asp * brow[j];
  }
}

inline void matmul_nt_row(const Tensor2& a, const Tensor2& b, Tensor2& c, std::size_t i) {
  const std::size_t inner = a.cols();
  const double* arow = a.row_span(i).data();
  for (std::size_t j = 0; j < b.rows(); ++j) {
    const double* brow = b.row_span(j).data();
    double acc = 0.0;
    for (std::size_t k = 0; k < inner; ++k) acc += arow[k] * brow[k];
    c(i, j) = acc;
  }
}

}  // namespace

namespace serial {

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  check_inner(a, a.cols(), b, b.rows(), "matmul");
  Tensor2 c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, c, i);
  return c;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  check_inner(a, a.rows(), b, b.rows(), "matmul_tn");
  Tensor2 c(a.cols(), b.cols());
  for (std::size_t p = 0; p < a.cols(); ++p) matmul_tn_row(a, b, c, p);
  return c;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  check_inner(a, a.cols(), b, b.cols(), "matmul_nt");
  Tensor2 c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_nt_row(a, b, c, i);
  return c;
}

}  // namespace serial

namespace parallel {

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  check_inner(a, a.cols(), b, b.rows(), "matmul");
  Tensor2 c(a.rows(), b.cols());
  const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) matmul_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  check_inner(a, a.rows(), b, b.rows(), "matmul_tn");
  Tensor2 c(a.cols(), b.cols());
  const auto rows = static_cast<std::int64_t>(a.cols());
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < rows; ++p) matmul_tn_row(a, b, c, static_cast<std::size_t>(p));
  return c;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  check_inner(a, a.cols(), b, b.cols(), "matmul_nt");
  Tensor2 c(a.rows(), b.rows());
  const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) matmul_nt_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

}  // namespace parallel

namespace {
bool go_parallel(std::size_t m, std::size_t k, std::size_t n) {
  return m > 1 && m * k * n >= kParallelThreshold && max_threads() > 1;
}
}  // namespace

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  return go_parallel(a.rows(), a.cols(), b.cols()) ? parallel::matmul(a, b)
                                                   : serial::matmul(a, b);
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  return go_parallel(a.cols(), a.rows(), b.cols()) ? parallel::matmul_tn(a, b)
                                                   : serial::matmul_tn(a, b);
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  return go_parallel(a.rows(), a.cols(), b.rows()) ? parallel::matmul_nt(a, b)
                                                   : serial::matmul_nt(a, b);
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace fame::kernels

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

// Dense matrix-product kernels.
//
// Every kernel exists twice: a serial reference in kernels::serial and an
// OpenMP version in kernels::parallel. The parallel versions split work over
// output rows only and keep the per-element summation order of the serial
// loop, so the two produce bit-identical results for any thread count. The
// unqualified entry points pick one by problem size.

#ifndef FAME_KERNELS_HPP_
#define FAME_KERNELS_HPP_

#include "fame/tensor.hpp"

namespace fame::kernels {

namespace serial {
// C = A * B
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
// C = A^T * B
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);
// C = A * B^T
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);
}  // namespace serial

namespace parallel {
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);
}  // namespace parallel

// Multiply-add count above which the dispatchers go parallel.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);

// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace fame::kernels

#endif  // FAME_KERNELS_HPP_

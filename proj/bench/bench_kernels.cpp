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

// Serial reference vs OpenMP kernels on square and training-shaped products.

#include <benchmark/benchmark.h>

#include <random>

#include "fame/kernels.hpp"
#include "fame/tensor.hpp"

namespace {

fame::Tensor2 random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  fame::Tensor2 t(rows, cols);
  for (double& v : t.values()) v = u(rng);
  return t;
}

template <fame::Tensor2 (*Kernel)(const fame::Tensor2&, const fame::Tensor2&)>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto m = static_cast<std::size_t>(state.range(2));
  const auto a = random_matrix(n, k, 1);
  const auto b = random_matrix(k, m, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * k * m));
  state.counters["threads"] = fame::kernels::max_threads();
}

template <fame::Tensor2 (*Kernel)(const fame::Tensor2&, const fame::Tensor2&)>
void BM_MatmulTN(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto m = static_cast<std::size_t>(state.range(2));
  const auto a = random_matrix(n, k, 1);
  const auto b = random_matrix(n, m, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * k * m));
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({128, 128, 128});
  b->Args({256, 256, 256});
  b->Args({512, 512, 512});
  // Batch of 16 through the full-size projection and hidden layer.
  b->Args({16, 768, 512});
  // Whole-split inference through a 64-wide projection.
  b->Args({5000, 64, 256});
}

}  // namespace

BENCHMARK(BM_Matmul<fame::kernels::serial::matmul>)->Name("matmul/serial")->Apply(shapes);
BENCHMARK(BM_Matmul<fame::kernels::parallel::matmul>)->Name("matmul/parallel")->Apply(shapes);
BENCHMARK(BM_MatmulTN<fame::kernels::serial::matmul_tn>)->Name("matmul_tn/serial")->Apply(shapes);
BENCHMARK(BM_MatmulTN<fame::kernels::parallel::matmul_tn>)
    ->Name("matmul_tn/parallel")
    ->Apply(shapes);

BENCHMARK_MAIN();

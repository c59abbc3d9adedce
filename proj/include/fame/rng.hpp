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

#ifndef FAME_RNG_HPP_
#define FAME_RNG_HPP_

#include <cstdint>
#include <random>

namespace fame {

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Generator for a named sub-stream of a run seed.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t stream_id) {
  return std::mt19937_64(mix_seed(seed ^ mix_seed(stream_id)));
}

// Stream ids used across the library.
enum StreamId : std::uint64_t {
  kStreamDirections = 1,
  kStreamRecords = 2,
  kStreamSplit = 3,
  kStreamInit = 4,
  kStreamProbes = 5,
  kStreamShuffle = 6,
  kStreamDropout = 7,
};

}  // namespace fame

#endif  // FAME_RNG_HPP_

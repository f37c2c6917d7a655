// Copyright 2026 The samarl Authors.
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

#ifndef SAMARL_RNG_HPP_
#define SAMARL_RNG_HPP_

#include <cstdint>
#include <random>
#include <vector>

#include "samarl/check.hpp"

namespace samarl {

using Rng = std::mt19937_64;

// Stream ids for deriving independent sub-seeds from a single run seed.
// Keeping the mapping fixed makes replay-from-manifest reproducible.
enum class SeedStream : std::uint64_t {
  kEnv = 1,
  kInit = 2,
  kPermutation = 3,
  kEval = 4,
};

// splitmix64; decorrelates run_seed from stream id so adjacent run seeds do
// not produce overlapping std::mt19937_64 streams.
inline std::uint64_t MixSeed(std::uint64_t run_seed, std::uint64_t stream) {
  std::uint64_t z = run_seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng MakeRng(std::uint64_t run_seed, SeedStream stream) {
  return Rng(MixSeed(run_seed, static_cast<std::uint64_t>(stream)));
}

inline double UniformReal(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double Normal(Rng& rng, double mean = 0.0, double stddev = 1.0) {
  // One fresh distribution per call: normal_distribution caches a spare
  // variate, which would make interleaved call sites order-dependent.
  return std::normal_distribution<double>(mean, stddev)(rng);
}

inline int UniformInt(Rng& rng, int lo, int hi_inclusive) {
  return std::uniform_int_distribution<int>(lo, hi_inclusive)(rng);
}

// Draws an index from an explicit probability vector. Accepts rows whose sum
// deviates from 1 by rounding error; the tail index absorbs the residual.
inline int SampleCategorical(const std::vector<double>& probs, Rng& rng) {
  SAMARL_CHECK(!probs.empty());
  double u = UniformReal(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace samarl

#endif  // SAMARL_RNG_HPP_

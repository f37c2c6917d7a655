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

#ifndef SAMARL_TESTS_TEST_UTIL_HPP_
#define SAMARL_TESTS_TEST_UTIL_HPP_

#include <cmath>
#include <vector>

#include "samarl/tabular_cmg.hpp"
#include "samarl/tabular_oracle.hpp"

namespace samarl::testutil {

// All nonempty ordered subsets (sequences of distinct agents) of {0..n-1}.
// Sized for n <= 4.
inline std::vector<std::vector<int>> OrderedSubsets(int n) {
  std::vector<std::vector<int>> out;
  std::vector<std::vector<int>> frontier{{}};
  while (!frontier.empty()) {
    std::vector<std::vector<int>> next;
    for (const auto& seq : frontier) {
      for (int i = 0; i < n; ++i) {
        if (std::find(seq.begin(), seq.end(), i) != seq.end()) continue;
        auto grown = seq;
        grown.push_back(i);
        out.push_back(grown);
        next.push_back(grown);
      }
    }
    frontier = std::move(next);
  }
  return out;
}

inline std::vector<int> SampleJointAction(const TabularCMG& game,
                                          const JointPolicy& pi, int s,
                                          Rng& rng) {
  std::vector<int> a(game.n_agents());
  for (int i = 0; i < game.n_agents(); ++i)
    a[i] = SampleCategorical(pi.agents[i].prob[s], rng);
  return a;
}

struct McEstimate {
  double mean = 0.0;
  double sem = 0.0;        // standard error of the mean
  double truncation = 0.0; // worst-case bias from the finite horizon
};

// Monte-Carlo discounted return from the initial distribution. agent/j < 0
// estimates the reward return, otherwise the (agent, j) cost return.
inline McEstimate McReturn(const TabularCMG& game, const JointPolicy& pi,
                           int agent, int j, int n_rollouts, int horizon,
                           Rng& rng) {
  double sum = 0.0, sumsq = 0.0;
  double max_abs = 0.0;
  for (int r = 0; r < n_rollouts; ++r) {
    int s = SampleCategorical(game.initial_dist, rng);
    double ret = 0.0;
    double disc = 1.0;
    for (int t = 0; t < horizon; ++t) {
      const auto a = SampleJointAction(game, pi, s, rng);
      const StepResult step = SampleStep(game, s, a, rng);
      const double x = agent < 0 ? step.reward : step.costs[agent][j];
      max_abs = std::max(max_abs, std::fabs(x));
      ret += disc * x;
      disc *= game.gamma;
      s = step.next_state;
    }
    sum += ret;
    sumsq += ret * ret;
  }
  McEstimate e;
  e.mean = sum / n_rollouts;
  const double var =
      std::max(0.0, sumsq / n_rollouts - e.mean * e.mean);
  e.sem = std::sqrt(var / n_rollouts);
  e.truncation = std::pow(game.gamma, horizon) * max_abs / (1.0 - game.gamma);
  return e;
}

}  // namespace samarl::testutil

#endif  // SAMARL_TESTS_TEST_UTIL_HPP_

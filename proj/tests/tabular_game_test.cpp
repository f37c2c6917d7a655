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

#include "samarl/tabular_cmg.hpp"

#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "samarl/check.hpp"

namespace samarl {
namespace {

TabularCMG OneStateGame(double reward_value, double cost_value,
                        double gamma = 0.99) {
  TabularCMG g;
  g.n_states = 1;
  g.action_counts = {1};
  g.gamma = gamma;
  g.initial_dist = {1.0};
  g.transition = {{{1.0}}};
  g.reward = {{reward_value}};
  g.costs = {{{{cost_value}}}};
  g.cost_bounds = {{1.0}};
  g.Validate();
  return g;
}

TEST_CASE("joint action flattening is row-major in agent order") {
  const std::vector<int> counts{2, 3};
  // Agent 0 is the most significant digit.
  CHECK(FlattenJointAction(counts, {0, 0}) == 0);
  CHECK(FlattenJointAction(counts, {0, 2}) == 2);
  CHECK(FlattenJointAction(counts, {1, 0}) == 3);
  CHECK(FlattenJointAction(counts, {1, 2}) == 5);
  for (int joint = 0; joint < 6; ++joint)
    CHECK(FlattenJointAction(counts, UnflattenJointAction(counts, joint)) ==
          joint);
  CHECK_THROWS_AS(FlattenJointAction(counts, {2, 0}), CheckError);
}

TEST_CASE("sample_step on a degenerate single-state game") {
  const TabularCMG g = OneStateGame(1.0, 0.25);
  Rng rng(7);
  const StepResult step = SampleStep(g, 0, {0}, rng);
  CHECK(step.next_state == 0);
  CHECK(step.reward == 1.0);
  CHECK(step.costs[0][0] == 0.25);
}

TEST_CASE("sample_step follows deterministic transition rows") {
  TabularCMG g = OneStateGame(0.0, 0.0);
  g.n_states = 3;
  g.initial_dist = {1.0, 0.0, 0.0};
  g.transition.assign(3, {{0.0, 0.0, 1.0}});  // every row jumps to state 2
  g.reward.assign(3, {0.0});
  g.costs = {{std::vector<std::vector<double>>(3, {0.0})}};
  g.Validate();
  Rng rng(3);
  for (int k = 0; k < 20; ++k)
    CHECK(SampleStep(g, k % 3, {0}, rng).next_state == 2);
}

TEST_CASE("sample_step transition frequencies match the row") {
  TabularCMG g = OneStateGame(0.0, 0.0);
  g.n_states = 3;
  g.initial_dist = {1.0, 0.0, 0.0};
  g.transition.assign(3, {{0.2, 0.3, 0.5}});
  g.reward.assign(3, {0.0});
  g.costs = {{std::vector<std::vector<double>>(3, {0.0})}};
  g.Validate();

  const int n = 100000;
  std::vector<int> hits(3, 0);
  Rng rng(11);
  for (int k = 0; k < n; ++k) ++hits[SampleStep(g, 0, {0}, rng).next_state];
  const std::vector<double> p{0.2, 0.3, 0.5};
  for (int t = 0; t < 3; ++t) {
    const double sigma = std::sqrt(p[t] * (1 - p[t]) * n);
    CHECK(std::fabs(hits[t] - p[t] * n) <= 3 * sigma);
  }
}

TEST_CASE("sample_step rejects invalid actions") {
  const TabularCMG g = OneStateGame(1.0, 0.0);
  Rng rng(1);
  CHECK_THROWS_AS(SampleStep(g, 0, {1}, rng), CheckError);
  CHECK_THROWS_AS(SampleStep(g, 0, {0, 0}, rng), CheckError);
}

TEST_CASE("random games are reproducible and valid") {
  const TabularCMG a = RandomTabularCMG(4, 2, 3, 1, 42);
  const TabularCMG b = RandomTabularCMG(4, 2, 3, 1, 42);
  CHECK(ToJson(a) == ToJson(b));
  const TabularCMG c = RandomTabularCMG(4, 2, 3, 1, 43);
  CHECK(ToJson(a) != ToJson(c));

  // Single-state corner and a seed sweep over the type invariants
  // (Validate throws on any violation).
  RandomTabularCMG(1, 1, 1, 1, 0).Validate();
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    RandomTabularCMG(3, 2, 2, 2, seed).Validate();
}

TEST_CASE("random game size guard") {
  CHECK_THROWS_AS(RandomTabularCMG(2, 5, 7, 1, 0), CheckError);  // 7^5 > 1e4
}

TEST_CASE("permutations: identity, determinism, uniformity") {
  Rng rng(5);
  const AgentPermutation one = DrawPermutation(1, rng);
  CHECK(one.order == std::vector<int>{0});

  Rng r1(9), r2(9);
  CHECK(DrawPermutation(5, r1).order == DrawPermutation(5, r2).order);

  const int n = 100000;
  std::map<std::vector<int>, int> counts;
  Rng rng2(13);
  for (int k = 0; k < n; ++k) ++counts[DrawPermutation(3, rng2).order];
  CHECK(counts.size() == 6);
  const double p = 1.0 / 6.0;
  const double sigma = std::sqrt(p * (1 - p) * n);
  for (const auto& [order, c] : counts)
    CHECK(std::fabs(c - p * n) <= 3 * sigma);
}

TEST_CASE("permutation validation rejects non-bijections") {
  AgentPermutation perm;
  perm.order = {0, 0, 2};
  CHECK_THROWS_AS(perm.Validate(), CheckError);
}

TEST_CASE("policies: uniform rows, random rows, flooring") {
  const TabularCMG g = RandomTabularCMG(3, 2, 3, 1, 17);
  const JointPolicy uniform = UniformJointPolicy(g);
  uniform.Validate();
  for (const auto& row : uniform.agents[0].prob)
    for (double v : row) CHECK(v == doctest::Approx(1.0 / 3.0));

  Rng rng(21);
  const JointPolicy random = RandomJointPolicy(g, rng);
  random.Validate();

  TabularPolicy boundary;
  boundary.prob = {{1.0, 0.0}};
  const TabularPolicy floored = boundary.Floored();
  CHECK(floored.prob[0][1] > 0.0);
  double sum = floored.prob[0][0] + floored.prob[0][1];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("joint probability is the product over agents") {
  const TabularCMG g = RandomTabularCMG(2, 2, 2, 1, 3);
  Rng rng(4);
  const JointPolicy pi = RandomJointPolicy(g, rng);
  for (int s = 0; s < g.n_states; ++s) {
    double total = 0.0;
    for (int joint = 0; joint < g.joint_action_count(); ++joint)
      total += pi.JointProb(g, s, joint);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    const auto a = g.Unflatten(1);
    CHECK(pi.JointProb(g, s, 1) ==
          doctest::Approx(pi.agents[0].prob[s][a[0]] *
                          pi.agents[1].prob[s][a[1]]));
  }
}

TEST_CASE("json round trip preserves games exactly") {
  const TabularCMG g = RandomTabularCMG(4, 3, 2, 2, 99);
  const std::string text = ToJson(g);
  const TabularCMG back = TabularCMGFromJson(text);
  CHECK(ToJson(back) == text);
  CHECK_THROWS_AS(TabularCMGFromJson("{\"schema\":\"other\"}"), CheckError);
}

}  // namespace
}  // namespace samarl

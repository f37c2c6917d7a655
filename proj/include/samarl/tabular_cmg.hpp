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
//
// Finite constrained Markov games: n agents act jointly in a finite state
// space; each agent i carries m^i cost functions of (state, own action) with
// budgets c^i_j on the discounted cost sum. This representation is the
// ground truth that the exact solver and all estimators are tested against.

#ifndef SAMARL_TABULAR_CMG_HPP_
#define SAMARL_TABULAR_CMG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "samarl/rng.hpp"

namespace samarl {

inline constexpr double kProbTolerance = 1e-12;

// Joint actions are flattened to one index in row-major agent order:
// agent 0 is the most significant digit. Tests reconstruct indexing from
// these two helpers alone.
int FlattenJointAction(const std::vector<int>& action_counts,
                       const std::vector<int>& actions);
std::vector<int> UnflattenJointAction(const std::vector<int>& action_counts,
                                      int joint);

struct TabularCMG {
  int n_states = 0;
  std::vector<int> action_counts;           // per agent
  double gamma = 0.0;
  std::vector<double> initial_dist;         // [s]
  // transition[s][joint_a][s'], reward[s][joint_a]
  std::vector<std::vector<std::vector<double>>> transition;
  std::vector<std::vector<double>> reward;
  // costs[i][j][s][a_i]; agent i has costs[i].size() constraints.
  std::vector<std::vector<std::vector<std::vector<double>>>> costs;
  std::vector<std::vector<double>> cost_bounds;  // [i][j]

  int n_agents() const { return static_cast<int>(action_counts.size()); }
  int n_costs(int agent) const { return static_cast<int>(costs[agent].size()); }
  int joint_action_count() const;
  int Flatten(const std::vector<int>& actions) const {
    return FlattenJointAction(action_counts, actions);
  }
  std::vector<int> Unflatten(int joint) const {
    return UnflattenJointAction(action_counts, joint);
  }

  // Throws CheckError on any inconsistency: unnormalized probability rows,
  // gamma out of [0,1), non-finite bounds, mismatched dimensions.
  void Validate() const;
};

// Per-agent tabular policy, row-stochastic over actions for each state.
struct TabularPolicy {
  std::vector<std::vector<double>> prob;  // [s][a]

  int n_states() const { return static_cast<int>(prob.size()); }
  int n_actions() const { return prob.empty() ? 0 : static_cast<int>(prob[0].size()); }
  void Validate() const;
  // Floors every entry at eps and renormalizes; keeps KL finite without
  // materially moving values.
  TabularPolicy Floored(double eps = 1e-9) const;
};

struct JointPolicy {
  std::vector<TabularPolicy> agents;

  int n_agents() const { return static_cast<int>(agents.size()); }
  void Validate() const;
  // Probability of flattened joint action `joint` in state s under the
  // product policy.
  double JointProb(const TabularCMG& game, int s, int joint) const;
};

struct AgentPermutation {
  std::vector<int> order;   // order[h] = agent updated at position h
  std::uint64_t seed = 0;

  void Validate() const;
};

struct StepResult {
  int next_state = 0;
  double reward = 0.0;
  // costs[i][j] = C^i_j(s, a^i)
  std::vector<std::vector<double>> costs;
};

StepResult SampleStep(const TabularCMG& game, int state,
                      const std::vector<int>& joint_action, Rng& rng);

// Random dense game, reproducible per seed. Rewards and per-step costs are
// uniform in [0,1]; cost budgets are drawn in the middle of the attainable
// discounted range so random games mix feasible and infeasible policies.
// The joint action space is capped at 10^4 entries.
TabularCMG RandomTabularCMG(int n_states, int n_agents, int actions_per_agent,
                            int n_costs, std::uint64_t seed,
                            double gamma = 0.9);

AgentPermutation DrawPermutation(int n_agents, Rng& rng);

JointPolicy UniformJointPolicy(const TabularCMG& game);
// Dirichlet(1) rows: uniform over each action simplex.
JointPolicy RandomJointPolicy(const TabularCMG& game, Rng& rng);

// JSON round-trip, schema "samarl.tabular_cmg.v1". Used for golden files.
std::string ToJson(const TabularCMG& game);
TabularCMG TabularCMGFromJson(const std::string& text);
void SaveTabularCMG(const TabularCMG& game, const std::string& path);
TabularCMG LoadTabularCMG(const std::string& path);

}  // namespace samarl

#endif  // SAMARL_TABULAR_CMG_HPP_

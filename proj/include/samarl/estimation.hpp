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

#ifndef SAMARL_ESTIMATION_HPP_
#define SAMARL_ESTIMATION_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace samarl {

// Flat columnar storage for collected transitions. Episodes are
// concatenated along t; episode_end[t] marks the last step of an episode
// and terminal[t] says whether that end was a true terminal state (no
// bootstrap) rather than a time-limit truncation (bootstrap from the
// critic at next_state[t]).
struct RolloutBatch {
  int n_agents = 0;
  std::vector<int> n_costs;  // per agent

  std::vector<Eigen::VectorXd> state;
  std::vector<Eigen::VectorXd> next_state;
  std::vector<std::vector<Eigen::VectorXd>> obs;      // [agent][t]
  // Successor observations, filled only when a per-agent critic needs to
  // bootstrap from them; empty otherwise.
  std::vector<std::vector<Eigen::VectorXd>> next_obs;  // [agent][t]
  std::vector<std::vector<Eigen::VectorXd>> actions;   // [agent][t]
  std::vector<std::vector<double>> log_prob;          // [agent][t]
  std::vector<double> reward;
  std::vector<std::vector<std::vector<double>>> cost;  // [agent][j][t]
  std::vector<std::uint8_t> terminal;
  std::vector<std::uint8_t> episode_end;

  int Steps() const { return static_cast<int>(reward.size()); }
  // Aligned lengths, finite log-probs, boundary flags consistent
  // (terminal implies episode_end, last step ends its episode).
  void Validate() const;
};

// Per-step inputs for one scalar-signal advantage pass over a batch of
// concatenated episodes.
struct GaeInput {
  std::vector<double> values;       // V(s_t)
  std::vector<double> next_values;  // V(s_{t+1}); ignored past a terminal
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminal;
  std::vector<std::uint8_t> episode_end;
};

// Backward recursion: delta_t = r_t + gamma * (terminal ? 0 : V(s_{t+1}))
// - V(s_t); adv_t = delta_t + gamma * lambda * adv_{t+1}, cut at episode
// ends. Truncated episodes bootstrap through next_values inside delta.
std::vector<double> Gae(const GaeInput& in, double gamma, double lambda);

// Identical recursion applied to a cost channel; calls Gae so the two
// can never diverge.
std::vector<double> CostGae(const GaeInput& in, double gamma, double lambda);

// Discounted empirical return from each step to its episode end, with the
// final next_value bootstrapped when the end is a truncation.
std::vector<double> DiscountedReturnToGo(const GaeInput& in, double gamma);

// In-place shift to zero mean and unit standard deviation (std floored at
// 1e-8). Applied to reward advantages only; cost advantages keep their
// absolute scale because budget arithmetic depends on it.
void NormalizeAdvantages(std::vector<double>& adv);

// Elementwise product with the importance ratios of the agent that just
// updated. Rejects non-finite ratios so a poisoned batch fails loudly.
std::vector<double> UpdateMFactor(const std::vector<double>& m,
                                  const std::vector<double>& ratios);

// Mean cost-value estimate minus the budget; positive means violating.
double ConstraintViolation(const std::vector<double>& cost_value_estimates,
                           double bound);

// Debug dump. Columns: t, episode_end, terminal, reward, then per agent
// a<i>_logprob, then per agent/constraint c<i>_<j>. One row per step.
void DumpBatchCsv(const RolloutBatch& batch, const std::string& path);

}  // namespace samarl

#endif  // SAMARL_ESTIMATION_HPP_

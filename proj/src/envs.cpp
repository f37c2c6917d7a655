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

#include "samarl/env.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "samarl/check.hpp"

namespace samarl {

namespace {

double Clip(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

}  // namespace

// ---------------------------------------------------------------------------
// CorridorEnv

CorridorEnv::CorridorEnv(const CorridorConfig& config) : config_(config) {
  SAMARL_CHECK(config_.width > 0.0);
  SAMARL_CHECK(config_.unsafe_margin >= 0.0);
  SAMARL_CHECK(config_.dt > 0.0);
  SAMARL_CHECK(config_.damping >= 0.0 && config_.damping <= 1.0);
  SAMARL_CHECK(config_.thrust_limit > 0.0);
  SAMARL_CHECK(config_.start_noise >= 0.0);
}

int CorridorEnv::AgentObsDim(int agent) const {
  SAMARL_CHECK(agent >= 0 && agent < 2);
  return 5;
}

int CorridorEnv::ActionCount(int agent) const {
  (void)agent;
  SAMARL_CHECK(false && "corridor actions are continuous");
  return 0;
}

int CorridorEnv::ActionDim(int agent) const {
  SAMARL_CHECK(agent >= 0 && agent < 2);
  return 1;
}

EnvObservation CorridorEnv::Observe(const Eigen::VectorXd& state) const {
  // The unbounded x coordinate is deliberately absent: progress lives in
  // vx, and a drifting absolute position would defeat normalization.
  const double half = 0.5 * config_.width;
  Eigen::VectorXd o(5);
  o << state[1], state[2], state[3], half - state[1], half + state[1];
  EnvObservation obs;
  obs.global = o;
  obs.agents = {o, o};
  return obs;
}

Eigen::VectorXd CorridorEnv::Reset(Rng& rng, EnvObservation* obs) const {
  Eigen::VectorXd state(4);  // (x, y, vx, vy)
  state << 0.0, config_.start_noise * Normal(rng), 0.0, 0.0;
  if (obs != nullptr) *obs = Observe(state);
  return state;
}

double CorridorEnv::Cost(const Eigen::VectorXd& state) const {
  const double wall_distance = 0.5 * config_.width - std::abs(state[1]);
  return wall_distance < config_.unsafe_margin ? 1.0 : 0.0;
}

EnvStep CorridorEnv::Step(const Eigen::VectorXd& state,
                          const std::vector<Action>& actions,
                          Rng& rng) const {
  (void)rng;  // dynamics are deterministic
  SAMARL_CHECK(state.size() == 4);
  SAMARL_CHECK(actions.size() == 2);
  SAMARL_CHECK(actions[0].size() == 1 && actions[1].size() == 1);

  // Cost is charged where the action is taken, so it is recomputable from
  // the logged state alone.
  const double cost = Cost(state);

  const double ax = Clip(actions[0][0], -config_.thrust_limit,
                         config_.thrust_limit);
  const double ay = Clip(actions[1][0], -config_.thrust_limit,
                         config_.thrust_limit);

  Eigen::VectorXd next(4);
  next[2] = config_.damping * state[2] + config_.dt * ax;
  next[3] = config_.damping * state[3] + config_.dt * ay;
  next[0] = state[0] + config_.dt * next[2];
  next[1] = state[1] + config_.dt * next[3];

  EnvStep out;
  out.state = next;
  out.obs = Observe(next);
  out.reward = next[2];
  out.costs = {{cost}, {cost}};
  out.terminal = false;
  return out;
}

// ---------------------------------------------------------------------------
// BridgeGridEnv

BridgeGridEnv::BridgeGridEnv(const BridgeGridConfig& config)
    : config_(config) {
  SAMARL_CHECK(config_.rows >= 1);
  SAMARL_CHECK(config_.cols >= 2);
  SAMARL_CHECK(config_.n_agents >= 1);
}

int BridgeGridEnv::GlobalObsDim() const {
  return config_.n_agents * CellCount();
}

int BridgeGridEnv::AgentObsDim(int agent) const {
  SAMARL_CHECK(agent >= 0 && agent < config_.n_agents);
  return GlobalObsDim();
}

int BridgeGridEnv::ActionCount(int agent) const {
  SAMARL_CHECK(agent >= 0 && agent < config_.n_agents);
  return 5;
}

int BridgeGridEnv::ActionDim(int agent) const {
  (void)agent;
  SAMARL_CHECK(false && "bridge actions are discrete");
  return 0;
}

int BridgeGridEnv::StateCount() const {
  int n = 1;
  for (int i = 0; i < config_.n_agents; ++i) n *= CellCount();
  return n;
}

int BridgeGridEnv::NextCell(int cell, int action) const {
  SAMARL_CHECK(cell >= 0 && cell < CellCount());
  SAMARL_CHECK(action >= 0 && action < 5);
  int row = cell / config_.cols;
  int col = cell % config_.cols;
  switch (action) {
    case 0: break;                                        // stay
    case 1: row = std::max(row - 1, 0); break;            // up
    case 2: row = std::min(row + 1, config_.rows - 1); break;  // down
    case 3: col = std::max(col - 1, 0); break;            // left
    case 4: col = std::min(col + 1, config_.cols - 1); break;  // right
  }
  return row * config_.cols + col;
}

double BridgeGridEnv::CellCost(int cell) const {
  if (config_.rows < 3) return 0.0;  // no interior to be safe in
  const int row = cell / config_.cols;
  return (row == 0 || row == config_.rows - 1) ? 1.0 : 0.0;
}

double BridgeGridEnv::StateReward(const std::vector<int>& cells) const {
  int at_goal = 0;
  for (int cell : cells) {
    if (cell % config_.cols == config_.cols - 1) ++at_goal;
  }
  return static_cast<double>(at_goal) / config_.n_agents;
}

EnvObservation BridgeGridEnv::Observe(const Eigen::VectorXd& state) const {
  Eigen::VectorXd o = Eigen::VectorXd::Zero(GlobalObsDim());
  for (int i = 0; i < config_.n_agents; ++i) {
    o[i * CellCount() + static_cast<int>(state[i])] = 1.0;
  }
  EnvObservation obs;
  obs.global = o;
  obs.agents.assign(config_.n_agents, o);
  return obs;
}

Eigen::VectorXd BridgeGridEnv::Reset(Rng& rng, EnvObservation* obs) const {
  (void)rng;  // start state is fixed
  // Everyone starts on the middle row of the left column.
  const int start = (config_.rows / 2) * config_.cols;
  Eigen::VectorXd state =
      Eigen::VectorXd::Constant(config_.n_agents, start);
  if (obs != nullptr) *obs = Observe(state);
  return state;
}

EnvStep BridgeGridEnv::Step(const Eigen::VectorXd& state,
                            const std::vector<Action>& actions,
                            Rng& rng) const {
  (void)rng;  // dynamics are deterministic
  SAMARL_CHECK(static_cast<int>(state.size()) == config_.n_agents);
  SAMARL_CHECK(static_cast<int>(actions.size()) == config_.n_agents);

  std::vector<int> cells(config_.n_agents);
  EnvStep out;
  out.state.resize(config_.n_agents);
  out.costs.resize(config_.n_agents);
  for (int i = 0; i < config_.n_agents; ++i) {
    SAMARL_CHECK(actions[i].size() == 1);
    const int a = static_cast<int>(actions[i][0]);
    const int next = NextCell(static_cast<int>(state[i]), a);
    cells[i] = next;
    out.state[i] = next;
    // Cost is charged for moving onto an edge cell; it depends only on
    // this agent's own cell and action.
    out.costs[i] = {CellCost(next)};
  }
  out.obs = Observe(out.state);
  out.reward = StateReward(cells);
  out.terminal = false;
  return out;
}

TabularCMG AsTabular(const BridgeGridEnv& env, double gamma,
                     const std::vector<double>& cost_bounds) {
  const BridgeGridConfig& config = env.Config();
  const int n = config.n_agents;
  const int cells = env.CellCount();
  const int n_states = env.StateCount();

  TabularCMG game;
  game.n_states = n_states;
  game.action_counts.assign(n, 5);
  game.gamma = gamma;

  // State index: cells encoded little-endian, agent 0 fastest.
  auto decode = [&](int s) {
    std::vector<int> out(n);
    for (int i = 0; i < n; ++i) {
      out[i] = s % cells;
      s /= cells;
    }
    return out;
  };
  auto encode = [&](const std::vector<int>& agent_cells) {
    int s = 0;
    for (int i = n - 1; i >= 0; --i) s = s * cells + agent_cells[i];
    return s;
  };

  // Deterministic start mirrors BridgeGridEnv::Reset.
  Rng dummy(0);
  const Eigen::VectorXd start = env.Reset(dummy, nullptr);
  std::vector<int> start_cells(n);
  for (int i = 0; i < n; ++i) start_cells[i] = static_cast<int>(start[i]);
  game.initial_dist.assign(n_states, 0.0);
  game.initial_dist[encode(start_cells)] = 1.0;

  const int joint = game.joint_action_count();
  game.transition.assign(
      n_states, std::vector<std::vector<double>>(
                    joint, std::vector<double>(n_states, 0.0)));
  game.reward.assign(n_states, std::vector<double>(joint, 0.0));
  game.costs.assign(
      n, std::vector<std::vector<std::vector<double>>>(
             1, std::vector<std::vector<double>>(
                    n_states, std::vector<double>(5, 0.0))));
  SAMARL_CHECK(static_cast<int>(cost_bounds.size()) == 1);
  game.cost_bounds.assign(n, cost_bounds);

  for (int s = 0; s < n_states; ++s) {
    const std::vector<int> here = decode(s);
    for (int a = 0; a < joint; ++a) {
      const std::vector<int> acts = game.Unflatten(a);
      std::vector<int> next(n);
      for (int i = 0; i < n; ++i) next[i] = env.NextCell(here[i], acts[i]);
      game.transition[s][a][encode(next)] = 1.0;
      game.reward[s][a] = env.StateReward(next);
    }
    for (int i = 0; i < n; ++i) {
      for (int ai = 0; ai < 5; ++ai) {
        game.costs[i][0][s][ai] = env.CellCost(env.NextCell(here[i], ai));
      }
    }
  }

  game.Validate();
  return game;
}

// ---------------------------------------------------------------------------
// TabularEnv

TabularEnv::TabularEnv(TabularCMG game) : game_(std::move(game)) {
  game_.Validate();
}

int TabularEnv::NumConstraints() const {
  // The Env interface exposes one constraint count for every agent.
  const int m = game_.n_costs(0);
  for (int i = 1; i < game_.n_agents(); ++i) {
    SAMARL_CHECK(game_.n_costs(i) == m);
  }
  return m;
}

int TabularEnv::AgentObsDim(int agent) const {
  SAMARL_CHECK(agent >= 0 && agent < game_.n_agents());
  return game_.n_states;
}

int TabularEnv::ActionCount(int agent) const {
  SAMARL_CHECK(agent >= 0 && agent < game_.n_agents());
  return game_.action_counts[agent];
}

int TabularEnv::ActionDim(int agent) const {
  (void)agent;
  SAMARL_CHECK(false && "tabular actions are discrete");
  return 0;
}

EnvObservation TabularEnv::Observe(int s) const {
  Eigen::VectorXd o = Eigen::VectorXd::Zero(game_.n_states);
  o[s] = 1.0;
  EnvObservation obs;
  obs.global = o;
  obs.agents.assign(game_.n_agents(), o);
  return obs;
}

Eigen::VectorXd TabularEnv::Reset(Rng& rng, EnvObservation* obs) const {
  const int s = SampleCategorical(game_.initial_dist, rng);
  if (obs != nullptr) *obs = Observe(s);
  Eigen::VectorXd state(1);
  state[0] = s;
  return state;
}

EnvStep TabularEnv::Step(const Eigen::VectorXd& state,
                         const std::vector<Action>& actions,
                         Rng& rng) const {
  SAMARL_CHECK(state.size() == 1);
  const int s = static_cast<int>(state[0]);
  SAMARL_CHECK(s >= 0 && s < game_.n_states);
  SAMARL_CHECK(static_cast<int>(actions.size()) == game_.n_agents());

  std::vector<int> acts(game_.n_agents());
  for (int i = 0; i < game_.n_agents(); ++i) {
    SAMARL_CHECK(actions[i].size() == 1);
    acts[i] = static_cast<int>(actions[i][0]);
    SAMARL_CHECK(acts[i] >= 0 && acts[i] < game_.action_counts[i]);
  }
  const int a = game_.Flatten(acts);
  const int next = SampleCategorical(game_.transition[s][a], rng);

  EnvStep out;
  out.state.resize(1);
  out.state[0] = next;
  out.obs = Observe(next);
  out.reward = game_.reward[s][a];
  out.costs.resize(game_.n_agents());
  for (int i = 0; i < game_.n_agents(); ++i) {
    out.costs[i].resize(game_.n_costs(i));
    for (int j = 0; j < game_.n_costs(i); ++j) {
      out.costs[i][j] = game_.costs[i][j][s][acts[i]];
    }
  }
  out.terminal = false;
  return out;
}

}  // namespace samarl

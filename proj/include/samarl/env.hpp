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

#ifndef SAMARL_ENV_HPP_
#define SAMARL_ENV_HPP_

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "samarl/policy.hpp"
#include "samarl/rng.hpp"
#include "samarl/tabular_cmg.hpp"

namespace samarl {

// What the agents and critics see. `global` feeds the centralized
// critics; `agents[i]` feeds agent i's policy.
struct EnvObservation {
  Eigen::VectorXd global;
  std::vector<Eigen::VectorXd> agents;
};

struct EnvStep {
  Eigen::VectorXd state;  // internal successor state
  EnvObservation obs;
  double reward = 0.0;
  std::vector<std::vector<double>> costs;  // [agent][constraint]
  bool terminal = false;  // true terminal, not a time-limit truncation
};

// Environments are stateless between calls: the internal state vector is
// handed back to the caller, which makes replays and tests trivial. A
// single instance must not be shared across threads mid-episode only
// because Reset/Step draw from the caller's generator.
class Env {
 public:
  virtual ~Env() = default;

  virtual int NumAgents() const = 0;
  virtual int NumConstraints() const = 0;  // per agent
  virtual int GlobalObsDim() const = 0;
  virtual int AgentObsDim(int agent) const = 0;
  virtual bool DiscreteActions() const = 0;
  virtual int ActionCount(int agent) const = 0;  // discrete action spaces
  virtual int ActionDim(int agent) const = 0;    // continuous action spaces

  virtual Eigen::VectorXd Reset(Rng& rng, EnvObservation* obs) const = 0;
  virtual EnvStep Step(const Eigen::VectorXd& state,
                       const std::vector<Action>& actions,
                       Rng& rng) const = 0;
};

// Two agents drive one point mass down an infinite corridor: agent 0
// owns the x thrust, agent 1 the y thrust. Reward is forward velocity;
// each agent pays cost 1 whenever the mass sits closer to a wall than
// the unsafe margin. The safety tension is that reward never depends on
// y, so an unconstrained learner lets y drift into the margin.
struct CorridorConfig {
  double width = 9.0;          // walls at y = +-width/2
  double unsafe_margin = 1.8;  // cost 1 when wall distance < margin
  double dt = 0.05;
  double damping = 0.95;
  double thrust_limit = 1.0;   // actions clipped to [-limit, limit]
  double start_noise = 0.1;    // stddev of the initial y offset
};

class CorridorEnv : public Env {
 public:
  explicit CorridorEnv(const CorridorConfig& config);

  int NumAgents() const override { return 2; }
  int NumConstraints() const override { return 1; }
  int GlobalObsDim() const override { return 5; }
  int AgentObsDim(int agent) const override;
  bool DiscreteActions() const override { return false; }
  int ActionCount(int agent) const override;
  int ActionDim(int agent) const override;

  Eigen::VectorXd Reset(Rng& rng, EnvObservation* obs) const override;
  EnvStep Step(const Eigen::VectorXd& state,
               const std::vector<Action>& actions, Rng& rng) const override;

  // Cost is a pure function of the pre-step state (wall distance), so it
  // never depends on the other agent's action.
  double Cost(const Eigen::VectorXd& state) const;

  const CorridorConfig& Config() const { return config_; }

 private:
  EnvObservation Observe(const Eigen::VectorXd& state) const;
  CorridorConfig config_;
};

// n agents walk a rows x cols bridge; the outermost rows are the edge.
// Stepping onto an edge cell costs 1; standing on the last column earns
// reward. Finite and deterministic, so it converts exactly to a tabular
// game for the oracle.
struct BridgeGridConfig {
  int rows = 3;
  int cols = 5;
  int n_agents = 2;
};

class BridgeGridEnv : public Env {
 public:
  explicit BridgeGridEnv(const BridgeGridConfig& config);

  int NumAgents() const override { return config_.n_agents; }
  int NumConstraints() const override { return 1; }
  int GlobalObsDim() const override;
  int AgentObsDim(int agent) const override;
  bool DiscreteActions() const override { return true; }
  int ActionCount(int agent) const override;
  int ActionDim(int agent) const override;

  Eigen::VectorXd Reset(Rng& rng, EnvObservation* obs) const override;
  EnvStep Step(const Eigen::VectorXd& state,
               const std::vector<Action>& actions, Rng& rng) const override;

  int CellCount() const { return config_.rows * config_.cols; }
  int StateCount() const;
  // Deterministic per-agent move: action in {stay, up, down, left,
  // right}, clamped at the border.
  int NextCell(int cell, int action) const;
  double CellCost(int cell) const;  // 1 on edge rows
  double StateReward(const std::vector<int>& cells) const;

  const BridgeGridConfig& Config() const { return config_; }

 private:
  EnvObservation Observe(const Eigen::VectorXd& state) const;
  BridgeGridConfig config_;
};

// Exact tabular image of the bridge walk: same states, same moves, same
// reward and cost tables, so oracle quantities transfer verbatim.
TabularCMG AsTabular(const BridgeGridEnv& env, double gamma,
                     const std::vector<double>& cost_bounds);

// Wraps any tabular game as an Env with one-hot observations so the
// neural trainers can run against games the oracle can solve exactly.
class TabularEnv : public Env {
 public:
  explicit TabularEnv(TabularCMG game);

  int NumAgents() const override { return game_.n_agents(); }
  int NumConstraints() const override;
  int GlobalObsDim() const override { return game_.n_states; }
  int AgentObsDim(int agent) const override;
  bool DiscreteActions() const override { return true; }
  int ActionCount(int agent) const override;
  int ActionDim(int agent) const override;

  Eigen::VectorXd Reset(Rng& rng, EnvObservation* obs) const override;
  EnvStep Step(const Eigen::VectorXd& state,
               const std::vector<Action>& actions, Rng& rng) const override;

  const TabularCMG& Game() const { return game_; }

 private:
  EnvObservation Observe(int s) const;
  TabularCMG game_;
};

}  // namespace samarl

#endif  // SAMARL_ENV_HPP_

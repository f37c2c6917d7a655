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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "samarl/check.hpp"

namespace samarl {

namespace {

void CheckDistribution(const std::vector<double>& p, const char* what) {
  double sum = 0.0;
  for (double v : p) {
    SAMARL_CHECK_MSG(v >= 0.0 && std::isfinite(v), what << " entry " << v);
    sum += v;
  }
  SAMARL_CHECK_MSG(std::fabs(sum - 1.0) <= kProbTolerance,
                   what << " sums to " << sum);
}

}  // namespace

int FlattenJointAction(const std::vector<int>& action_counts,
                       const std::vector<int>& actions) {
  SAMARL_CHECK_EQ(action_counts.size(), actions.size());
  int joint = 0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    SAMARL_CHECK_GE(actions[i], 0);
    SAMARL_CHECK_LT(actions[i], action_counts[i]);
    joint = joint * action_counts[i] + actions[i];
  }
  return joint;
}

std::vector<int> UnflattenJointAction(const std::vector<int>& action_counts,
                                      int joint) {
  std::vector<int> actions(action_counts.size(), 0);
  for (int i = static_cast<int>(action_counts.size()) - 1; i >= 0; --i) {
    actions[i] = joint % action_counts[i];
    joint /= action_counts[i];
  }
  SAMARL_CHECK_EQ(joint, 0);
  return actions;
}

int TabularCMG::joint_action_count() const {
  int n = 1;
  for (int a : action_counts) n *= a;
  return n;
}

void TabularCMG::Validate() const {
  SAMARL_CHECK_GE(n_states, 1);
  SAMARL_CHECK_GE(n_agents(), 1);
  for (int a : action_counts) SAMARL_CHECK_GE(a, 1);
  SAMARL_CHECK(gamma >= 0.0 && gamma < 1.0);
  SAMARL_CHECK_EQ(static_cast<int>(initial_dist.size()), n_states);
  CheckDistribution(initial_dist, "initial_dist");
  const int ja = joint_action_count();
  SAMARL_CHECK_EQ(static_cast<int>(transition.size()), n_states);
  SAMARL_CHECK_EQ(static_cast<int>(reward.size()), n_states);
  for (int s = 0; s < n_states; ++s) {
    SAMARL_CHECK_EQ(static_cast<int>(transition[s].size()), ja);
    SAMARL_CHECK_EQ(static_cast<int>(reward[s].size()), ja);
    for (int a = 0; a < ja; ++a) {
      SAMARL_CHECK_EQ(static_cast<int>(transition[s][a].size()), n_states);
      CheckDistribution(transition[s][a], "transition row");
      SAMARL_CHECK_FINITE(reward[s][a]);
    }
  }
  SAMARL_CHECK_EQ(static_cast<int>(costs.size()), n_agents());
  SAMARL_CHECK_EQ(static_cast<int>(cost_bounds.size()), n_agents());
  for (int i = 0; i < n_agents(); ++i) {
    SAMARL_CHECK_EQ(costs[i].size(), cost_bounds[i].size());
    for (std::size_t j = 0; j < costs[i].size(); ++j) {
      SAMARL_CHECK_FINITE(cost_bounds[i][j]);
      SAMARL_CHECK_EQ(static_cast<int>(costs[i][j].size()), n_states);
      for (int s = 0; s < n_states; ++s) {
        SAMARL_CHECK_EQ(static_cast<int>(costs[i][j][s].size()),
                        action_counts[i]);
        for (double c : costs[i][j][s]) SAMARL_CHECK_FINITE(c);
      }
    }
  }
}

void TabularPolicy::Validate() const {
  for (const auto& row : prob) {
    SAMARL_CHECK_EQ(row.size(), prob[0].size());
    CheckDistribution(row, "policy row");
  }
}

TabularPolicy TabularPolicy::Floored(double eps) const {
  TabularPolicy out = *this;
  for (auto& row : out.prob) {
    double sum = 0.0;
    for (double& v : row) {
      v = std::max(v, eps);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  return out;
}

void JointPolicy::Validate() const {
  for (const auto& p : agents) p.Validate();
}

double JointPolicy::JointProb(const TabularCMG& game, int s, int joint) const {
  const std::vector<int> actions = game.Unflatten(joint);
  double p = 1.0;
  for (int i = 0; i < game.n_agents(); ++i) p *= agents[i].prob[s][actions[i]];
  return p;
}

void AgentPermutation::Validate() const {
  std::vector<int> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    SAMARL_CHECK_EQ(sorted[i], static_cast<int>(i));
}

StepResult SampleStep(const TabularCMG& game, int state,
                      const std::vector<int>& joint_action, Rng& rng) {
  SAMARL_CHECK_GE(state, 0);
  SAMARL_CHECK_LT(state, game.n_states);
  const int joint = game.Flatten(joint_action);
  StepResult out;
  out.next_state = SampleCategorical(game.transition[state][joint], rng);
  out.reward = game.reward[state][joint];
  out.costs.resize(game.n_agents());
  for (int i = 0; i < game.n_agents(); ++i) {
    out.costs[i].resize(game.n_costs(i));
    for (int j = 0; j < game.n_costs(i); ++j)
      out.costs[i][j] = game.costs[i][j][state][joint_action[i]];
  }
  return out;
}

TabularCMG RandomTabularCMG(int n_states, int n_agents, int actions_per_agent,
                            int n_costs, std::uint64_t seed, double gamma) {
  SAMARL_CHECK_GE(n_states, 1);
  SAMARL_CHECK_GE(n_agents, 1);
  SAMARL_CHECK_GE(actions_per_agent, 1);
  SAMARL_CHECK_GE(n_costs, 0);
  double joint = std::pow(static_cast<double>(actions_per_agent), n_agents);
  SAMARL_CHECK_MSG(joint <= 1e4, "joint action space too large: " << joint);

  Rng rng(seed);
  TabularCMG g;
  g.n_states = n_states;
  g.action_counts.assign(n_agents, actions_per_agent);
  g.gamma = gamma;
  const int ja = g.joint_action_count();

  auto random_dist = [&](int n) {
    std::vector<double> p(n);
    double sum = 0.0;
    for (double& v : p) {
      // Exponential draws normalize to a flat Dirichlet.
      v = -std::log(1.0 - UniformReal(rng));
      sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
  };

  g.initial_dist = random_dist(n_states);
  g.transition.resize(n_states);
  g.reward.resize(n_states);
  for (int s = 0; s < n_states; ++s) {
    g.transition[s].resize(ja);
    g.reward[s].resize(ja);
    for (int a = 0; a < ja; ++a) {
      g.transition[s][a] = random_dist(n_states);
      g.reward[s][a] = UniformReal(rng);
    }
  }
  g.costs.resize(n_agents);
  g.cost_bounds.resize(n_agents);
  const double horizon = 1.0 / (1.0 - gamma);
  for (int i = 0; i < n_agents; ++i) {
    g.costs[i].resize(n_costs);
    g.cost_bounds[i].resize(n_costs);
    for (int j = 0; j < n_costs; ++j) {
      g.costs[i][j].resize(n_states);
      for (int s = 0; s < n_states; ++s) {
        g.costs[i][j][s].resize(actions_per_agent);
        for (double& c : g.costs[i][j][s]) c = UniformReal(rng);
      }
      // Attainable discounted cost lies in [0, horizon]; budgets straddle
      // the middle of that range.
      g.cost_bounds[i][j] = UniformReal(rng, 0.25, 0.75) * horizon;
    }
  }
  g.Validate();
  return g;
}

AgentPermutation DrawPermutation(int n_agents, Rng& rng) {
  SAMARL_CHECK_GE(n_agents, 1);
  AgentPermutation perm;
  perm.order.resize(n_agents);
  std::iota(perm.order.begin(), perm.order.end(), 0);
  // Fisher-Yates with explicit draws so the sequence is stable across
  // standard library implementations.
  for (int i = n_agents - 1; i > 0; --i) {
    int k = UniformInt(rng, 0, i);
    std::swap(perm.order[i], perm.order[k]);
  }
  return perm;
}

JointPolicy UniformJointPolicy(const TabularCMG& game) {
  JointPolicy pi;
  pi.agents.resize(game.n_agents());
  for (int i = 0; i < game.n_agents(); ++i) {
    pi.agents[i].prob.assign(
        game.n_states,
        std::vector<double>(game.action_counts[i],
                            1.0 / game.action_counts[i]));
  }
  return pi;
}

JointPolicy RandomJointPolicy(const TabularCMG& game, Rng& rng) {
  JointPolicy pi;
  pi.agents.resize(game.n_agents());
  for (int i = 0; i < game.n_agents(); ++i) {
    pi.agents[i].prob.resize(game.n_states);
    for (int s = 0; s < game.n_states; ++s) {
      std::vector<double> row(game.action_counts[i]);
      double sum = 0.0;
      for (double& v : row) {
        v = -std::log(1.0 - UniformReal(rng));
        sum += v;
      }
      for (double& v : row) v /= sum;
      pi.agents[i].prob[s] = row;
    }
  }
  return pi;
}

std::string ToJson(const TabularCMG& game) {
  nlohmann::json j;
  j["schema"] = "samarl.tabular_cmg.v1";
  j["n_states"] = game.n_states;
  j["action_counts"] = game.action_counts;
  j["gamma"] = game.gamma;
  j["initial_dist"] = game.initial_dist;
  j["transition"] = game.transition;
  j["reward"] = game.reward;
  j["costs"] = game.costs;
  j["cost_bounds"] = game.cost_bounds;
  return j.dump(2);
}

TabularCMG TabularCMGFromJson(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SAMARL_CHECK_MSG(j.at("schema") == "samarl.tabular_cmg.v1",
                   "unknown schema " << j.at("schema"));
  TabularCMG g;
  g.n_states = j.at("n_states").get<int>();
  g.action_counts = j.at("action_counts").get<std::vector<int>>();
  g.gamma = j.at("gamma").get<double>();
  g.initial_dist = j.at("initial_dist").get<std::vector<double>>();
  g.transition =
      j.at("transition")
          .get<std::vector<std::vector<std::vector<double>>>>();
  g.reward = j.at("reward").get<std::vector<std::vector<double>>>();
  g.costs =
      j.at("costs")
          .get<std::vector<std::vector<std::vector<std::vector<double>>>>>();
  g.cost_bounds = j.at("cost_bounds").get<std::vector<std::vector<double>>>();
  g.Validate();
  return g;
}

void SaveTabularCMG(const TabularCMG& game, const std::string& path) {
  std::ofstream out(path);
  SAMARL_CHECK_MSG(out.good(), "cannot open " << path);
  out << ToJson(game) << "\n";
}

TabularCMG LoadTabularCMG(const std::string& path) {
  std::ifstream in(path);
  SAMARL_CHECK_MSG(in.good(), "cannot open " << path);
  std::stringstream ss;
  ss << in.rdbuf();
  return TabularCMGFromJson(ss.str());
}

}  // namespace samarl

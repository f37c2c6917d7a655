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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "samarl/tabular_oracle.hpp"

namespace samarl {
namespace {

std::vector<Action> Thrust(double ax, double ay) {
  Action a0(1), a1(1);
  a0[0] = ax;
  a1[0] = ay;
  return {a0, a1};
}

std::vector<Action> DiscreteJoint(const std::vector<int>& idx) {
  std::vector<Action> out;
  for (int k : idx) {
    Action a(1);
    a[0] = k;
    out.push_back(a);
  }
  return out;
}

TEST_CASE("corridor reset is centered, reproducible, and noise-free when asked") {
  CorridorConfig config;
  config.start_noise = 0.0;
  CorridorEnv still(config);
  Rng rng(7);
  EnvObservation obs;
  Eigen::VectorXd s = still.Reset(rng, &obs);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == 0.0);
  CHECK(s[2] == 0.0);
  CHECK(s[3] == 0.0);

  CorridorEnv env{CorridorConfig{}};
  Rng a(123), b(123);
  Eigen::VectorXd sa = env.Reset(a, nullptr);
  Eigen::VectorXd sb = env.Reset(b, nullptr);
  CHECK(sa == sb);
}

TEST_CASE("corridor start distribution matches its stated noise within 3 sigma") {
  CorridorEnv env{CorridorConfig{}};
  const int n = 10000;
  Rng rng(99);
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd s = env.Reset(rng, nullptr);
    CHECK(s[0] == 0.0);
    CHECK(s[2] == 0.0);
    CHECK(s[3] == 0.0);
    sum += s[1];
    sum_sq += s[1] * s[1];
  }
  const double sigma = env.Config().start_noise;
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  // Mean of n normal draws has stderr sigma/sqrt(n); the sample variance
  // of a normal has stderr sigma^2 * sqrt(2/n).
  CHECK(std::abs(mean) < 3.0 * sigma / std::sqrt(double(n)));
  CHECK(std::abs(var - sigma * sigma) <
        3.0 * sigma * sigma * std::sqrt(2.0 / n));
}

TEST_CASE("corridor cost switches exactly at the unsafe margin") {
  CorridorEnv env{CorridorConfig{}};  // walls at +-4.5, margin 1.8
  auto at_y = [](double y) {
    Eigen::VectorXd s(4);
    s << 0.0, y, 0.0, 0.0;
    return s;
  };
  CHECK(env.Cost(at_y(4.5 - 2.0)) == 0.0);  // 2.0 from the wall: safe
  CHECK(env.Cost(at_y(4.5 - 1.0)) == 1.0);  // 1.0 from the wall: unsafe
  CHECK(env.Cost(at_y(-(4.5 - 1.0))) == 1.0);
  CHECK(env.Cost(at_y(0.0)) == 0.0);

  // The indicator is strict: sitting exactly at the margin is safe. Probe
  // with binary-exact geometry so no rounding blurs the boundary.
  CorridorConfig exact;
  exact.width = 8.0;
  exact.unsafe_margin = 1.5;
  CorridorEnv env2(exact);
  CHECK(env2.Cost(at_y(2.5)) == 0.0);   // distance exactly 1.5
  CHECK(env2.Cost(at_y(2.625)) == 1.0); // distance 1.375 < 1.5

  // Both agents are charged the same indicator through Step, evaluated at
  // the state the actions were taken in.
  Rng rng(0);
  EnvStep step = env.Step(at_y(3.6), Thrust(0.0, 0.5), rng);
  REQUIRE(step.costs.size() == 2);
  CHECK(step.costs[0][0] == 1.0);
  CHECK(step.costs[1][0] == 1.0);
  EnvStep safe = env.Step(at_y(0.0), Thrust(0.0, 1.0), rng);
  CHECK(safe.costs[0][0] == 0.0);
  CHECK(safe.costs[1][0] == 0.0);
}

TEST_CASE("zero thrust from the center stays safe for a whole episode") {
  CorridorEnv env{CorridorConfig{}};
  Rng rng(5);
  Eigen::VectorXd s(4);
  s << 0.0, 0.0, 0.0, 0.0;
  for (int t = 0; t < 1000; ++t) {
    EnvStep step = env.Step(s, Thrust(0.0, 0.0), rng);
    CHECK(step.costs[0][0] == 0.0);
    CHECK(step.costs[1][0] == 0.0);
    CHECK(!step.terminal);
    s = step.state;
  }
  CHECK(s[1] == 0.0);
}

TEST_CASE("corridor dynamics follow damped Euler integration and clip thrust") {
  CorridorConfig config;
  CorridorEnv env(config);
  Rng rng(1);
  Eigen::VectorXd s(4);
  s << 1.0, 0.5, 0.2, -0.1;
  EnvStep step = env.Step(s, Thrust(0.7, -0.3), rng);
  const double vx = 0.95 * 0.2 + 0.05 * 0.7;
  const double vy = 0.95 * -0.1 + 0.05 * -0.3;
  CHECK(step.state[2] == doctest::Approx(vx).epsilon(1e-15));
  CHECK(step.state[3] == doctest::Approx(vy).epsilon(1e-15));
  CHECK(step.state[0] == doctest::Approx(1.0 + 0.05 * vx).epsilon(1e-15));
  CHECK(step.state[1] == doctest::Approx(0.5 + 0.05 * vy).epsilon(1e-15));
  CHECK(step.reward == step.state[2]);

  // Oversized commands behave exactly like the thrust limit.
  EnvStep clipped = env.Step(s, Thrust(50.0, -50.0), rng);
  EnvStep limit = env.Step(s, Thrust(1.0, -1.0), rng);
  CHECK(clipped.state == limit.state);
}

TEST_CASE("corridor cost and dynamics are symmetric under y reflection") {
  CorridorEnv env{CorridorConfig{}};
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd s(4);
    s << Normal(rng, 0.0, 2.0), Normal(rng, 0.0, 3.0), Normal(rng),
        Normal(rng);
    Eigen::VectorXd mirrored = s;
    mirrored[1] = -s[1];
    mirrored[3] = -s[3];
    CHECK(env.Cost(s) == env.Cost(mirrored));

    const double ax = UniformReal(rng, -1.0, 1.0);
    const double ay = UniformReal(rng, -1.0, 1.0);
    EnvStep fwd = env.Step(s, Thrust(ax, ay), rng);
    EnvStep ref = env.Step(mirrored, Thrust(ax, -ay), rng);
    CHECK(ref.state[0] == fwd.state[0]);
    CHECK(ref.state[1] == -fwd.state[1]);
    CHECK(ref.state[2] == fwd.state[2]);
    CHECK(ref.state[3] == -fwd.state[3]);
    CHECK(ref.costs[0][0] == fwd.costs[0][0]);
    CHECK(ref.reward == fwd.reward);
  }
}

TEST_CASE("corridor observations expose wall distances, not absolute x") {
  CorridorEnv env{CorridorConfig{}};
  Rng rng(11);
  Eigen::VectorXd s(4);
  s << 123.0, 1.25, 0.4, -0.2;
  EnvStep step = env.Step(s, Thrust(0.0, 0.0), rng);
  const Eigen::VectorXd& o = step.obs.global;
  REQUIRE(o.size() == 5);
  CHECK(o[0] == step.state[1]);
  CHECK(o[1] == step.state[2]);
  CHECK(o[2] == step.state[3]);
  CHECK(o[3] == doctest::Approx(4.5 - step.state[1]).epsilon(1e-15));
  CHECK(o[4] == doctest::Approx(4.5 + step.state[1]).epsilon(1e-15));
  CHECK(o[3] + o[4] == doctest::Approx(env.Config().width).epsilon(1e-15));
  REQUIRE(step.obs.agents.size() == 2);
  CHECK(step.obs.agents[0] == o);
  CHECK(step.obs.agents[1] == o);
}

TEST_CASE("corridor costs recompute bit-exactly from logged states") {
  CorridorEnv env{CorridorConfig{}};
  Rng rng(17);
  EnvObservation obs;
  Eigen::VectorXd s = env.Reset(rng, &obs);
  std::vector<Eigen::VectorXd> states;
  std::vector<double> logged;
  for (int t = 0; t < 300; ++t) {
    states.push_back(s);
    EnvStep step =
        env.Step(s, Thrust(UniformReal(rng, -1.0, 1.0),
                           UniformReal(rng, -1.0, 1.0)), rng);
    logged.push_back(step.costs[0][0]);
    s = step.state;
  }
  for (int t = 0; t < 300; ++t) CHECK(env.Cost(states[t]) == logged[t]);
}

TEST_CASE("bridge moves clamp at borders and cost the edge rows") {
  BridgeGridEnv env{BridgeGridConfig{}};  // 3 x 5
  // Middle-row cell 6 = (row 1, col 1).
  CHECK(env.NextCell(6, 0) == 6);
  CHECK(env.NextCell(6, 1) == 1);
  CHECK(env.NextCell(6, 2) == 11);
  CHECK(env.NextCell(6, 3) == 5);
  CHECK(env.NextCell(6, 4) == 7);
  // Corners clamp.
  CHECK(env.NextCell(0, 1) == 0);
  CHECK(env.NextCell(0, 3) == 0);
  CHECK(env.NextCell(14, 2) == 14);
  CHECK(env.NextCell(14, 4) == 14);

  for (int col = 0; col < 5; ++col) {
    CHECK(env.CellCost(col) == 1.0);           // top row
    CHECK(env.CellCost(5 + col) == 0.0);       // middle row
    CHECK(env.CellCost(10 + col) == 1.0);      // bottom row
  }

  // Stepping up from the middle row pays on arrival; staying does not.
  Rng rng(0);
  EnvObservation obs;
  Eigen::VectorXd s = env.Reset(rng, &obs);
  CHECK(s[0] == 5.0);  // middle row, left column
  CHECK(s[1] == 5.0);
  EnvStep up = env.Step(s, DiscreteJoint({1, 0}), rng);
  CHECK(up.costs[0][0] == 1.0);
  CHECK(up.costs[1][0] == 0.0);
  EnvStep stay = env.Step(s, DiscreteJoint({0, 0}), rng);
  CHECK(stay.costs[0][0] == 0.0);
  CHECK(stay.costs[1][0] == 0.0);
}

TEST_CASE("bridge reward is the fraction of agents on the goal column") {
  BridgeGridEnv env{BridgeGridConfig{}};
  Rng rng(0);
  Eigen::VectorXd s(2);
  s << 8.0, 5.0;  // agent 0 one step short of the goal column
  EnvStep step = env.Step(s, DiscreteJoint({4, 0}), rng);
  CHECK(step.state[0] == 9.0);
  CHECK(step.reward == 0.5);
  EnvStep both = env.Step(step.state, DiscreteJoint({0, 0}), rng);
  CHECK(both.reward == 0.5);
  Eigen::VectorXd goal(2);
  goal << 9.0, 9.0;
  EnvStep full = env.Step(goal, DiscreteJoint({0, 0}), rng);
  CHECK(full.reward == 1.0);
}

TEST_CASE("bridge observations are stacked one-hot cells") {
  BridgeGridEnv env{BridgeGridConfig{}};
  Rng rng(0);
  EnvObservation obs;
  env.Reset(rng, &obs);
  REQUIRE(obs.global.size() == 30);
  CHECK(obs.global.sum() == 2.0);
  CHECK(obs.global[5] == 1.0);
  CHECK(obs.global[15 + 5] == 1.0);
  CHECK(obs.agents[0] == obs.global);
}

TEST_CASE("tabular image of a 2x3 bridge with 2 agents has 36 states") {
  BridgeGridConfig config;
  config.rows = 2;
  config.cols = 3;
  BridgeGridEnv env(config);
  CHECK(env.StateCount() == 36);
  TabularCMG game = AsTabular(env, 0.95, {1.0});
  CHECK(game.n_states == 36);
  CHECK(game.n_agents() == 2);
  game.Validate();
}

TEST_CASE("tabular image reproduces every bridge step exactly") {
  BridgeGridConfig config;
  config.rows = 3;
  config.cols = 3;
  BridgeGridEnv env(config);
  TabularCMG game = AsTabular(env, 0.99, {1.0});
  const int cells = env.CellCount();
  Rng rng(0);

  for (int s = 0; s < game.n_states; ++s) {
    // Little-endian cell decode mirrors the converter.
    std::vector<int> here = {s % cells, (s / cells) % cells};
    Eigen::VectorXd state(2);
    state << here[0], here[1];
    for (int a = 0; a < game.joint_action_count(); ++a) {
      std::vector<int> acts = game.Unflatten(a);
      EnvStep step = env.Step(state, DiscreteJoint(acts), rng);
      const int next = static_cast<int>(step.state[0]) +
                       cells * static_cast<int>(step.state[1]);
      CHECK(game.transition[s][a][next] == 1.0);
      CHECK(game.reward[s][a] == step.reward);
      for (int i = 0; i < 2; ++i) {
        CHECK(game.costs[i][0][s][acts[i]] == step.costs[i][0]);
      }
    }
  }
}

TEST_CASE("oracle costs match discounted Monte-Carlo rollouts within 3 sigma") {
  BridgeGridConfig config;
  config.rows = 3;
  config.cols = 3;
  config.n_agents = 1;
  BridgeGridEnv env(config);
  const double gamma = 0.9;
  TabularCMG game = AsTabular(env, gamma, {1.0});

  JointPolicy pi;
  pi.agents.resize(1);
  pi.agents[0].prob.assign(game.n_states, std::vector<double>(5, 0.2));

  ValueTables values = ExactValues(game, pi);
  const double oracle_cost = ExpectedTotalCost(game, values, 0, 0);
  const double oracle_return = ExpectedReturn(game, values);

  TabularEnv wrapped(game);
  Rng rng(424242);
  const int episodes = 3000;
  const int horizon = 200;  // gamma^200 ~ 7e-10, truncation negligible
  double cost_sum = 0.0, cost_sq = 0.0, ret_sum = 0.0, ret_sq = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Eigen::VectorXd s = wrapped.Reset(rng, nullptr);
    double disc_cost = 0.0, disc_ret = 0.0, g = 1.0;
    for (int t = 0; t < horizon; ++t) {
      std::vector<Action> acts =
          DiscreteJoint({UniformInt(rng, 0, 4)});
      EnvStep step = wrapped.Step(s, acts, rng);
      disc_cost += g * step.costs[0][0];
      disc_ret += g * step.reward;
      g *= gamma;
      s = step.state;
    }
    cost_sum += disc_cost;
    cost_sq += disc_cost * disc_cost;
    ret_sum += disc_ret;
    ret_sq += disc_ret * disc_ret;
  }
  const double mc_cost = cost_sum / episodes;
  const double mc_ret = ret_sum / episodes;
  const double se_cost = std::sqrt(
      (cost_sq / episodes - mc_cost * mc_cost) / episodes);
  const double se_ret =
      std::sqrt((ret_sq / episodes - mc_ret * mc_ret) / episodes);
  CHECK(std::abs(mc_cost - oracle_cost) < 3.0 * se_cost + 1e-9);
  CHECK(std::abs(mc_ret - oracle_return) < 3.0 * se_ret + 1e-9);
}

TEST_CASE("tabular env wrapper emits one-hot observations and table rewards") {
  BridgeGridConfig config;
  config.rows = 2;
  config.cols = 2;
  BridgeGridEnv bridge(config);
  TabularCMG game = AsTabular(bridge, 0.9, {0.5});
  TabularEnv env(game);
  CHECK(env.NumAgents() == 2);
  CHECK(env.NumConstraints() == 1);
  CHECK(env.GlobalObsDim() == game.n_states);
  CHECK(env.DiscreteActions());
  CHECK(env.ActionCount(0) == 5);

  Rng rng(8);
  EnvObservation obs;
  Eigen::VectorXd s = env.Reset(rng, &obs);
  for (int t = 0; t < 100; ++t) {
    const int idx = static_cast<int>(s[0]);
    CHECK(obs.global[idx] == 1.0);
    CHECK(obs.global.sum() == 1.0);
    std::vector<int> acts = {UniformInt(rng, 0, 4), UniformInt(rng, 0, 4)};
    EnvStep step = env.Step(s, DiscreteJoint(acts), rng);
    const int joint = game.Flatten(acts);
    CHECK(step.reward == game.reward[idx][joint]);
    CHECK(step.costs[0][0] == game.costs[0][0][idx][acts[0]]);
    CHECK(step.costs[1][0] == game.costs[1][0][idx][acts[1]]);
    CHECK(game.transition[idx][joint][static_cast<int>(step.state[0])] >
          0.0);
    s = step.state;
    obs = step.obs;
  }
}

}  // namespace
}  // namespace samarl

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

#include "samarl/estimation.hpp"

#include <cmath>
#include <fstream>

#include "samarl/check.hpp"

namespace samarl {

void RolloutBatch::Validate() const {
  const std::size_t t = reward.size();
  SAMARL_CHECK_GT(t, 0u);
  SAMARL_CHECK_GT(n_agents, 0);
  SAMARL_CHECK_EQ(n_costs.size(), static_cast<std::size_t>(n_agents));
  SAMARL_CHECK_EQ(state.size(), t);
  SAMARL_CHECK_EQ(next_state.size(), t);
  SAMARL_CHECK_EQ(terminal.size(), t);
  SAMARL_CHECK_EQ(episode_end.size(), t);
  SAMARL_CHECK_EQ(obs.size(), static_cast<std::size_t>(n_agents));
  SAMARL_CHECK_EQ(actions.size(), static_cast<std::size_t>(n_agents));
  SAMARL_CHECK_EQ(log_prob.size(), static_cast<std::size_t>(n_agents));
  SAMARL_CHECK_EQ(cost.size(), static_cast<std::size_t>(n_agents));
  if (!next_obs.empty()) {
    SAMARL_CHECK_EQ(next_obs.size(), static_cast<std::size_t>(n_agents));
    for (int i = 0; i < n_agents; ++i)
      SAMARL_CHECK_EQ(next_obs[i].size(), t);
  }
  for (int i = 0; i < n_agents; ++i) {
    SAMARL_CHECK_EQ(obs[i].size(), t);
    SAMARL_CHECK_EQ(actions[i].size(), t);
    SAMARL_CHECK_EQ(log_prob[i].size(), t);
    SAMARL_CHECK_EQ(cost[i].size(), static_cast<std::size_t>(n_costs[i]));
    for (int j = 0; j < n_costs[i]; ++j)
      SAMARL_CHECK_EQ(cost[i][j].size(), t);
    for (double lp : log_prob[i]) SAMARL_CHECK_FINITE(lp);
  }
  for (std::size_t k = 0; k < t; ++k)
    if (terminal[k]) SAMARL_CHECK_MSG(episode_end[k], "terminal mid-episode");
  SAMARL_CHECK_MSG(episode_end[t - 1], "batch must end on an episode end");
}

namespace {

void CheckGaeInput(const GaeInput& in) {
  const std::size_t t = in.rewards.size();
  SAMARL_CHECK_GT(t, 0u);
  SAMARL_CHECK_EQ(in.values.size(), t);
  SAMARL_CHECK_EQ(in.next_values.size(), t);
  SAMARL_CHECK_EQ(in.terminal.size(), t);
  SAMARL_CHECK_EQ(in.episode_end.size(), t);
}

}  // namespace

std::vector<double> Gae(const GaeInput& in, double gamma, double lambda) {
  CheckGaeInput(in);
  SAMARL_CHECK_GE(lambda, 0.0);
  SAMARL_CHECK_LE(lambda, 1.0);
  SAMARL_CHECK_GT(gamma, 0.0);
  SAMARL_CHECK_LT(gamma, 1.0);
  const int t_max = static_cast<int>(in.rewards.size());
  std::vector<double> adv(t_max);
  double tail = 0.0;
  for (int t = t_max - 1; t >= 0; --t) {
    const double boot = in.terminal[t] ? 0.0 : in.next_values[t];
    const double delta = in.rewards[t] + gamma * boot - in.values[t];
    if (in.episode_end[t]) tail = 0.0;
    tail = delta + gamma * lambda * tail;
    adv[t] = tail;
    SAMARL_CHECK_FINITE(adv[t]);
  }
  return adv;
}

std::vector<double> CostGae(const GaeInput& in, double gamma, double lambda) {
  return Gae(in, gamma, lambda);
}

std::vector<double> DiscountedReturnToGo(const GaeInput& in, double gamma) {
  CheckGaeInput(in);
  const int t_max = static_cast<int>(in.rewards.size());
  std::vector<double> ret(t_max);
  double tail = 0.0;
  for (int t = t_max - 1; t >= 0; --t) {
    if (in.episode_end[t]) tail = in.terminal[t] ? 0.0 : in.next_values[t];
    tail = in.rewards[t] + gamma * tail;
    ret[t] = tail;
  }
  return ret;
}

void NormalizeAdvantages(std::vector<double>& adv) {
  SAMARL_CHECK(!adv.empty());
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= static_cast<double>(adv.size());
  const double scale = 1.0 / (std::sqrt(var) + 1e-8);
  for (double& a : adv) a = (a - mean) * scale;
}

std::vector<double> UpdateMFactor(const std::vector<double>& m,
                                  const std::vector<double>& ratios) {
  SAMARL_CHECK_EQ(m.size(), ratios.size());
  std::vector<double> out(m.size());
  for (std::size_t t = 0; t < m.size(); ++t) {
    SAMARL_CHECK_MSG(std::isfinite(ratios[t]), "non-finite policy ratio");
    out[t] = m[t] * ratios[t];
  }
  return out;
}

double ConstraintViolation(const std::vector<double>& cost_value_estimates,
                           double bound) {
  SAMARL_CHECK(!cost_value_estimates.empty());
  double mean = 0.0;
  for (double v : cost_value_estimates) mean += v;
  mean /= static_cast<double>(cost_value_estimates.size());
  return mean - bound;
}

void DumpBatchCsv(const RolloutBatch& batch, const std::string& path) {
  batch.Validate();
  std::ofstream out(path);
  SAMARL_CHECK_MSG(out.good(), "cannot open " + path);
  out << "t,episode_end,terminal,reward";
  for (int i = 0; i < batch.n_agents; ++i) out << ",a" << i << "_logprob";
  for (int i = 0; i < batch.n_agents; ++i)
    for (int j = 0; j < batch.n_costs[i]; ++j) out << ",c" << i << "_" << j;
  out << "\n";
  out.precision(17);
  for (int t = 0; t < batch.Steps(); ++t) {
    out << t << "," << static_cast<int>(batch.episode_end[t]) << ","
        << static_cast<int>(batch.terminal[t]) << "," << batch.reward[t];
    for (int i = 0; i < batch.n_agents; ++i)
      out << "," << batch.log_prob[i][t];
    for (int i = 0; i < batch.n_agents; ++i)
      for (int j = 0; j < batch.n_costs[i]; ++j)
        out << "," << batch.cost[i][j][t];
    out << "\n";
  }
}

}  // namespace samarl

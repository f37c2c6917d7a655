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

#include "samarl/tabular_oracle.hpp"

#include <algorithm>
#include <cmath>

#include "samarl/check.hpp"

namespace samarl {

namespace {

// Enumerates joint actions consistent with fixed actions for `fixed_agents`,
// accumulating the product of the remaining agents' policy probabilities.
// Calls fn(joint_index, weight) for every consistent joint action.
template <typename Fn>
void ForEachConsistentJoint(const TabularCMG& game, const JointPolicy& pi,
                            int s, const std::vector<int>& fixed_agents,
                            const std::vector<int>& fixed_actions, Fn&& fn) {
  const int n = game.n_agents();
  std::vector<int> fixed_of(n, -1);
  for (std::size_t k = 0; k < fixed_agents.size(); ++k) {
    SAMARL_CHECK_GE(fixed_agents[k], 0);
    SAMARL_CHECK_LT(fixed_agents[k], n);
    SAMARL_CHECK_MSG(fixed_of[fixed_agents[k]] == -1,
                     "duplicate agent " << fixed_agents[k]);
    fixed_of[fixed_agents[k]] = fixed_actions[k];
  }
  std::vector<int> a(n, 0);
  for (int i = 0; i < n; ++i)
    if (fixed_of[i] >= 0) a[i] = fixed_of[i];
  while (true) {
    double w = 1.0;
    for (int i = 0; i < n; ++i)
      if (fixed_of[i] < 0) w *= pi.agents[i].prob[s][a[i]];
    fn(game.Flatten(a), w);
    // Odometer over the free agents only.
    int i = n - 1;
    for (; i >= 0; --i) {
      if (fixed_of[i] >= 0) continue;
      if (++a[i] < game.action_counts[i]) break;
      a[i] = 0;
    }
    if (i < 0) break;
  }
}

}  // namespace

Eigen::MatrixXd PolicyTransitionMatrix(const TabularCMG& game,
                                       const JointPolicy& pi) {
  const int ns = game.n_states;
  const int ja = game.joint_action_count();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(ns, ns);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < ja; ++a) {
      const double w = pi.JointProb(game, s, a);
      if (w == 0.0) continue;
      for (int t = 0; t < ns; ++t) p(s, t) += w * game.transition[s][a][t];
    }
  }
  return p;
}

ValueTables ExactValues(const TabularCMG& game, const JointPolicy& pi) {
  const int ns = game.n_states;
  const int ja = game.joint_action_count();
  const Eigen::MatrixXd p_pi = PolicyTransitionMatrix(game, pi);
  const Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(ns, ns) - game.gamma * p_pi;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);

  ValueTables out;
  Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(ns);
  for (int s = 0; s < ns; ++s)
    for (int a = 0; a < ja; ++a)
      r_pi(s) += pi.JointProb(game, s, a) * game.reward[s][a];
  out.v = lu.solve(r_pi);

  out.q.resize(ns, ja);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < ja; ++a) {
      double backup = game.reward[s][a];
      for (int t = 0; t < ns; ++t)
        backup += game.gamma * game.transition[s][a][t] * out.v(t);
      out.q(s, a) = backup;
    }
  }

  const int n = game.n_agents();
  out.cost_v.resize(n);
  out.cost_q.resize(n);
  for (int i = 0; i < n; ++i) {
    const int m = game.n_costs(i);
    out.cost_v[i].resize(m);
    out.cost_q[i].resize(m);
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXd c_pi = Eigen::VectorXd::Zero(ns);
      for (int s = 0; s < ns; ++s)
        for (int ai = 0; ai < game.action_counts[i]; ++ai)
          c_pi(s) += pi.agents[i].prob[s][ai] * game.costs[i][j][s][ai];
      out.cost_v[i][j] = lu.solve(c_pi);

      Eigen::MatrixXd& q = out.cost_q[i][j];
      q.resize(ns, game.action_counts[i]);
      for (int s = 0; s < ns; ++s) {
        for (int ai = 0; ai < game.action_counts[i]; ++ai) {
          // Expected next value marginalizes the other agents' actions.
          double next = 0.0;
          ForEachConsistentJoint(game, pi, s, {i}, {ai},
                                 [&](int joint, double w) {
                                   for (int t = 0; t < ns; ++t)
                                     next += w * game.transition[s][joint][t] *
                                             out.cost_v[i][j](t);
                                 });
          q(s, ai) = game.costs[i][j][s][ai] + game.gamma * next;
        }
      }
    }
  }
  return out;
}

OccupancyMeasure Occupancy(const TabularCMG& game, const JointPolicy& pi) {
  const int ns = game.n_states;
  const Eigen::MatrixXd p_pi = PolicyTransitionMatrix(game, pi);
  const Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(ns, ns) - game.gamma * p_pi.transpose();
  Eigen::VectorXd rho0(ns);
  for (int s = 0; s < ns; ++s) rho0(s) = game.initial_dist[s];
  return system.partialPivLu().solve(rho0);
}

double ExpectedReturn(const TabularCMG& game, const ValueTables& values) {
  double j = 0.0;
  for (int s = 0; s < game.n_states; ++s)
    j += game.initial_dist[s] * values.v(s);
  return j;
}

double ExpectedTotalCost(const TabularCMG& game, const ValueTables& values,
                         int agent, int j) {
  SAMARL_CHECK_GE(j, 0);
  SAMARL_CHECK_LT(j, game.n_costs(agent));
  double out = 0.0;
  for (int s = 0; s < game.n_states; ++s)
    out += game.initial_dist[s] * values.cost_v[agent][j](s);
  return out;
}

double MultiAgentQ(const TabularCMG& game, const JointPolicy& pi,
                   const ValueTables& values, const std::vector<int>& subset,
                   const std::vector<int>& subset_actions, int s) {
  SAMARL_CHECK_EQ(subset.size(), subset_actions.size());
  double q = 0.0;
  ForEachConsistentJoint(game, pi, s, subset, subset_actions,
                         [&](int joint, double w) { q += w * values.q(s, joint); });
  return q;
}

double MultiAgentAdvantage(const TabularCMG& game, const JointPolicy& pi,
                           const ValueTables& values,
                           const std::vector<int>& given,
                           const std::vector<int>& given_actions,
                           const std::vector<int>& subset,
                           const std::vector<int>& subset_actions, int s) {
  for (int g : given)
    SAMARL_CHECK_MSG(std::find(subset.begin(), subset.end(), g) == subset.end(),
                     "agent " << g << " in both sets");
  std::vector<int> both = given;
  both.insert(both.end(), subset.begin(), subset.end());
  std::vector<int> both_actions = given_actions;
  both_actions.insert(both_actions.end(), subset_actions.begin(),
                      subset_actions.end());
  return MultiAgentQ(game, pi, values, both, both_actions, s) -
         MultiAgentQ(game, pi, values, given, given_actions, s);
}

Eigen::MatrixXd SurrogateReturnCoefficients(
    const TabularCMG& game, const JointPolicy& pi_old,
    const ValueTables& values, const OccupancyMeasure& occ,
    const std::vector<int>& prior_agents,
    const std::vector<TabularPolicy>& prior_new_policies, int agent) {
  SAMARL_CHECK_EQ(prior_agents.size(), prior_new_policies.size());
  const int na = game.action_counts[agent];
  Eigen::MatrixXd w_out = Eigen::MatrixXd::Zero(game.n_states, na);
  const int k = static_cast<int>(prior_agents.size());

  for (int s = 0; s < game.n_states; ++s) {
    // Enumerate prior agents' joint actions under their new policies.
    std::vector<int> pa(k, 0);
    while (true) {
      double pw = 1.0;
      for (int t = 0; t < k; ++t)
        pw *= prior_new_policies[t].prob[s][pa[t]];
      if (pw > 0.0) {
        for (int b = 0; b < na; ++b) {
          const double adv = MultiAgentAdvantage(
              game, pi_old, values, prior_agents, pa, {agent}, {b}, s);
          w_out(s, b) += occ(s) * pw * adv;
        }
      }
      int t = k - 1;
      for (; t >= 0; --t) {
        if (++pa[t] < game.action_counts[prior_agents[t]]) break;
        pa[t] = 0;
      }
      if (t < 0) break;
    }
  }
  return w_out;
}

double SurrogateReturn(const TabularCMG& game, const JointPolicy& pi_old,
                       const std::vector<int>& prior_agents,
                       const std::vector<TabularPolicy>& prior_new_policies,
                       int agent, const TabularPolicy& candidate) {
  const ValueTables values = ExactValues(game, pi_old);
  const OccupancyMeasure occ = Occupancy(game, pi_old);
  const Eigen::MatrixXd w = SurrogateReturnCoefficients(
      game, pi_old, values, occ, prior_agents, prior_new_policies, agent);
  double l = 0.0;
  for (int s = 0; s < game.n_states; ++s)
    for (int b = 0; b < game.action_counts[agent]; ++b)
      l += candidate.prob[s][b] * w(s, b);
  return l;
}

Eigen::MatrixXd SurrogateCostCoefficients(const TabularCMG& game,
                                          const ValueTables& values,
                                          const OccupancyMeasure& occ,
                                          int agent, int j) {
  SAMARL_CHECK_GE(j, 0);
  SAMARL_CHECK_LT(j, game.n_costs(agent));
  const int na = game.action_counts[agent];
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(game.n_states, na);
  for (int s = 0; s < game.n_states; ++s)
    for (int a = 0; a < na; ++a)
      w(s, a) = occ(s) * (values.cost_q[agent][j](s, a) -
                          values.cost_v[agent][j](s));
  return w;
}

double SurrogateCost(const TabularCMG& game, const JointPolicy& pi_old,
                     int agent, int j, const TabularPolicy& candidate) {
  const ValueTables values = ExactValues(game, pi_old);
  const OccupancyMeasure occ = Occupancy(game, pi_old);
  const Eigen::MatrixXd w = SurrogateCostCoefficients(game, values, occ,
                                                      agent, j);
  double l = 0.0;
  for (int s = 0; s < game.n_states; ++s)
    for (int a = 0; a < game.action_counts[agent]; ++a)
      l += candidate.prob[s][a] * w(s, a);
  return l;
}

double MaxAbsRewardAdvantage(const ValueTables& values) {
  double m = 0.0;
  for (int s = 0; s < values.q.rows(); ++s)
    for (int a = 0; a < values.q.cols(); ++a)
      m = std::max(m, std::fabs(values.q(s, a) - values.v(s)));
  return m;
}

double MaxAbsCostAdvantage(const ValueTables& values, int agent, int j) {
  const Eigen::MatrixXd& q = values.cost_q[agent][j];
  const Eigen::VectorXd& v = values.cost_v[agent][j];
  double m = 0.0;
  for (int s = 0; s < q.rows(); ++s)
    for (int a = 0; a < q.cols(); ++a)
      m = std::max(m, std::fabs(q(s, a) - v(s)));
  return m;
}

double PerStateKl(const std::vector<double>& p, const std::vector<double>& q,
                  double eps) {
  SAMARL_CHECK_EQ(p.size(), q.size());
  SAMARL_CHECK(!p.empty());
  double ps = 0.0, qs = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    ps += std::max(p[k], eps);
    qs += std::max(q[k], eps);
  }
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double pk = std::max(p[k], eps) / ps;
    const double qk = std::max(q[k], eps) / qs;
    kl += pk * std::log(pk / qk);
  }
  // Rounding can push a zero divergence a hair negative.
  return std::max(kl, 0.0);
}

double MaxKl(const TabularPolicy& p, const TabularPolicy& q) {
  SAMARL_CHECK_EQ(p.n_states(), q.n_states());
  double m = 0.0;
  for (int s = 0; s < p.n_states(); ++s)
    m = std::max(m, PerStateKl(p.prob[s], q.prob[s]));
  return m;
}

double JointMaxKl(const JointPolicy& p, const JointPolicy& q) {
  SAMARL_CHECK_EQ(p.n_agents(), q.n_agents());
  SAMARL_CHECK_GE(p.n_agents(), 1);
  const int ns = p.agents[0].n_states();
  double m = 0.0;
  for (int s = 0; s < ns; ++s) {
    // KL between product distributions splits into a per-agent sum.
    double kl = 0.0;
    for (int i = 0; i < p.n_agents(); ++i)
      kl += PerStateKl(p.agents[i].prob[s], q.agents[i].prob[s]);
    m = std::max(m, kl);
  }
  return m;
}

bool KlSumBoundCheck(const JointPolicy& p, const JointPolicy& q) {
  double sum = 0.0;
  for (int i = 0; i < p.n_agents(); ++i)
    sum += MaxKl(p.agents[i], q.agents[i]);
  return JointMaxKl(p, q) <= sum + 1e-12;
}

}  // namespace samarl

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
// Exact quantities on finite constrained Markov games via dense linear
// algebra. Games here are at most a few hundred states, so LU solves beat
// iterative methods and give the precision the property tests demand.

#ifndef SAMARL_TABULAR_ORACLE_HPP_
#define SAMARL_TABULAR_ORACLE_HPP_

#include <vector>

#include <Eigen/Dense>

#include "samarl/tabular_cmg.hpp"

namespace samarl {

// Discounted values under a fixed joint policy. cost_q[i][j] is indexed by
// (state, own action) because costs depend only on the agent's own action.
struct ValueTables {
  Eigen::VectorXd v;                              // [s]
  Eigen::MatrixXd q;                              // [s][joint_a]
  std::vector<std::vector<Eigen::VectorXd>> cost_v;  // [i][j] -> [s]
  std::vector<std::vector<Eigen::MatrixXd>> cost_q;  // [i][j] -> [s][a_i]
};

// Unnormalized discounted visitation rho(s) = sum_t gamma^t Pr(s_t = s);
// total mass 1/(1-gamma).
using OccupancyMeasure = Eigen::VectorXd;

// State transition matrix P_pi[s][s'] and expected one-step reward under the
// joint policy; building blocks shared by values and occupancy.
Eigen::MatrixXd PolicyTransitionMatrix(const TabularCMG& game,
                                       const JointPolicy& pi);

ValueTables ExactValues(const TabularCMG& game, const JointPolicy& pi);

OccupancyMeasure Occupancy(const TabularCMG& game, const JointPolicy& pi);

double ExpectedReturn(const TabularCMG& game, const ValueTables& values);
double ExpectedTotalCost(const TabularCMG& game, const ValueTables& values,
                         int agent, int j);

// Q over a subset of agents' actions: expectation of the joint Q over the
// remaining agents' policies. Empty subset gives V(s); the full agent set
// gives Q(s, a) exactly.
double MultiAgentQ(const TabularCMG& game, const JointPolicy& pi,
                   const ValueTables& values, const std::vector<int>& subset,
                   const std::vector<int>& subset_actions, int s);

// A over `subset` given fixed actions of the disjoint `given` agents:
// Q^{given+subset} - Q^{given}.
double MultiAgentAdvantage(const TabularCMG& game, const JointPolicy& pi,
                           const ValueTables& values,
                           const std::vector<int>& given,
                           const std::vector<int>& given_actions,
                           const std::vector<int>& subset,
                           const std::vector<int>& subset_actions, int s);

// Coefficients W[s][b] such that the sequential-update surrogate for agent
// `agent` is sum_s sum_b candidate(b|s) W(s,b), with prior agents already
// moved to their new policies. Linear in the candidate, which the tabular
// improvement loop exploits.
Eigen::MatrixXd SurrogateReturnCoefficients(
    const TabularCMG& game, const JointPolicy& pi_old,
    const ValueTables& values, const OccupancyMeasure& occ,
    const std::vector<int>& prior_agents,
    const std::vector<TabularPolicy>& prior_new_policies, int agent);

double SurrogateReturn(const TabularCMG& game, const JointPolicy& pi_old,
                       const std::vector<int>& prior_agents,
                       const std::vector<TabularPolicy>& prior_new_policies,
                       int agent, const TabularPolicy& candidate);

// Coefficients rho(s) * A^i_j(s, a) for the per-agent cost surrogate.
Eigen::MatrixXd SurrogateCostCoefficients(const TabularCMG& game,
                                          const ValueTables& values,
                                          const OccupancyMeasure& occ,
                                          int agent, int j);

double SurrogateCost(const TabularCMG& game, const JointPolicy& pi_old,
                     int agent, int j, const TabularPolicy& candidate);

double MaxAbsRewardAdvantage(const ValueTables& values);
double MaxAbsCostAdvantage(const ValueTables& values, int agent, int j);

// KL of two finite rows, entries floored at `eps` and renormalized first so
// the divergence stays finite on boundary policies.
double PerStateKl(const std::vector<double>& p, const std::vector<double>& q,
                  double eps = 1e-9);

// max over states of the per-state KL for one agent's policy pair.
double MaxKl(const TabularPolicy& p, const TabularPolicy& q);

// max over states of the joint (product-policy) KL; per state this is the
// sum over agents of per-agent KLs.
double JointMaxKl(const JointPolicy& p, const JointPolicy& q);

// Joint max-KL is bounded by the sum over agents of per-agent max-KLs.
bool KlSumBoundCheck(const JointPolicy& p, const JointPolicy& q);

}  // namespace samarl

#endif  // SAMARL_TABULAR_ORACLE_HPP_

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

#ifndef SAMARL_POLICY_HPP_
#define SAMARL_POLICY_HPP_

#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "samarl/mlp.hpp"
#include "samarl/rng.hpp"

namespace samarl {

// Diagonal Gaussian over a continuous action box. The mean comes from the
// network output times mean_scale; the log standard deviation is a free
// state-independent vector.
struct GaussianPolicy {
  Mlp mean_net;
  Eigen::VectorXd log_std;
  double mean_scale = 1.0;
};

// Softmax over the network's logits.
struct CategoricalPolicy {
  Mlp logit_net;
};

using Policy = std::variant<GaussianPolicy, CategoricalPolicy>;

// Discrete actions travel as a length-1 vector holding the index, so both
// heads share one action type end to end.
using Action = Eigen::VectorXd;

// Hidden layers use gain sqrt(2); the final layer uses final_gain
// (default 0.01 so initial means sit near zero). init_std sets the
// starting standard deviation on every action dimension.
GaussianPolicy MakeGaussianPolicy(int obs_dim, int act_dim,
                                  const std::vector<int>& hidden, Rng& rng,
                                  double final_gain = 0.01,
                                  double init_std = 0.5,
                                  double mean_scale = 1.0);
CategoricalPolicy MakeCategoricalPolicy(int obs_dim, int n_actions,
                                        const std::vector<int>& hidden,
                                        Rng& rng, double final_gain = 0.01);

// Value-style head: scalar output, final gain 1.
Mlp MakeCritic(int obs_dim, const std::vector<int>& hidden, Rng& rng);
double CriticValue(const Mlp& critic, const Eigen::VectorXd& obs);

int ObsDim(const Policy& pi);
int ActionDim(const Policy& pi);  // 1 for categorical
bool IsDiscrete(const Policy& pi);
int NumActions(const Policy& pi);  // categorical only

// Total trainable scalars. Flat layout: network parameters in FlattenMlp
// order, then (Gaussian only) the log-std vector.
int PolicyParamCount(const Policy& pi);
Eigen::VectorXd FlattenPolicy(const Policy& pi);
void SetPolicyParams(Policy& pi, const Eigen::VectorXd& flat);

Action SamplePolicyAction(const Policy& pi, const Eigen::VectorXd& obs,
                          Rng& rng);
// Deterministic head: the Gaussian mean, or the argmax logit (lowest
// index on ties).
Action PolicyModeAction(const Policy& pi, const Eigen::VectorXd& obs);

double PolicyLogProb(const Policy& pi, const Eigen::VectorXd& obs,
                     const Action& action);
// Exact reverse-mode gradient of log pi(action | obs) in flat layout.
Eigen::VectorXd GradLogProb(const Policy& pi, const Eigen::VectorXd& obs,
                            const Action& action);

double PolicyEntropy(const Policy& pi, const Eigen::VectorXd& obs);

// Batch average of the closed-form KL(old || new) at each observation.
// Both policies must share architecture.
double MeanKl(const Policy& pi_old, const Policy& pi_new,
              const std::vector<Eigen::VectorXd>& obs_batch);

// (F + damping I) v where F is the Fisher matrix of the policy averaged
// over the batch, equal to the Hessian of MeanKl(pi, .) at the current
// parameters. Computed analytically per head.
Eigen::VectorXd KlHessianVectorProduct(const Policy& pi,
                                       const std::vector<Eigen::VectorXd>&
                                           obs_batch,
                                       const Eigen::VectorXd& v,
                                       double damping = 1e-2);

// Versioned JSON checkpoint blob (schema samarl.policy.v1). Plain text,
// no byte-order concerns; doubles round-trip exactly.
nlohmann::json PolicyToJson(const Policy& pi);
Policy PolicyFromJson(const nlohmann::json& j);

}  // namespace samarl

#endif  // SAMARL_POLICY_HPP_

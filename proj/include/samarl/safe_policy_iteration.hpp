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
// Exact safe sequential policy iteration on finite constrained games. Each
// sweep visits the agents in a random order; every per-agent update is
// penalized by a KL coefficient derived from the worst-case advantage, is
// confined to a per-position KL radius that protects every other agent's
// cost budget, and is accepted only if it beats the incumbent. Certificates
// record enough per-iteration state to re-check monotone improvement and
// constraint satisfaction after the fact.

#ifndef SAMARL_SAFE_POLICY_ITERATION_HPP_
#define SAMARL_SAFE_POLICY_ITERATION_HPP_

#include <limits>
#include <string>
#include <vector>

#include "samarl/tabular_cmg.hpp"
#include "samarl/tabular_oracle.hpp"

namespace samarl {

// KL penalty weights: nu_reward = 4 gamma max_{s,a}|A(s,a)| / (1-gamma)^2,
// nu_cost[i][j] the same with the (i,j) cost advantage over (s, a^i).
struct PenaltyCoefficients {
  double nu_reward = 0.0;
  std::vector<std::vector<double>> nu_cost;
};

// Tolerances for the exact iteration, kept in one place on purpose.
struct SpiTolerances {
  double improvement_slack = 1e-9;   // J may dip by at most this per sweep
  double constraint_slack = 1e-9;    // allowed overshoot of a cost budget
  double algebra_slack = 1e-10;      // identities re-checked in tests
  double membership_slack = 1e-12;   // inequality slack inside the filter
};

struct SpiConfig {
  int eg_steps = 40;          // multiplicative ascent steps per agent
  double eg_step_size = 0.7;  // step scale on max-normalized coefficients
  double kl_cap = 0.25;       // hard per-update KL radius on top of delta
  double policy_floor = 1e-9; // flooring before KL evaluation
  SpiTolerances tol;
};

struct AgentUpdateRecord {
  int position = 0;          // h within the permutation
  int agent = 0;
  double delta = 0.0;        // per-position KL radius (clamped for output)
  double kl = 0.0;           // D^max_KL(old, accepted)
  double penalized_gain = 0.0;
  bool moved = false;
  bool membership_ok = true; // accepted candidate passed the full filter
  bool fallback_used = false;
};

struct IterationCertificate {
  int iteration = 0;
  bool feasible_before = false;
  double j_reward_before = 0.0;
  double j_reward_after = 0.0;
  std::vector<std::vector<double>> j_costs_before;  // [i][j]
  std::vector<std::vector<double>> j_costs_after;
  std::vector<std::vector<double>> cost_bounds;
  std::vector<int> permutation;
  std::vector<AgentUpdateRecord> updates;
};

struct SafeIterationResult {
  JointPolicy policy;
  std::vector<IterationCertificate> certificates;
};

PenaltyCoefficients ComputePenaltyCoefficients(const TabularCMG& game,
                                               const ValueTables& values);

// Context for one position of a sweep: everything frozen at the sweep's
// start policy plus what the previous positions already committed.
struct SweepContext {
  const TabularCMG* game = nullptr;
  const JointPolicy* pi_k = nullptr;       // sweep start policy
  const ValueTables* values = nullptr;     // at pi_k
  const OccupancyMeasure* occ = nullptr;   // at pi_k
  const PenaltyCoefficients* nu = nullptr;
  std::vector<std::vector<double>> j_costs;     // [i][j] at pi_k
  std::vector<int> order;                       // agent permutation
  // Committed data for positions < h:
  std::vector<double> kl_by_position;                        // [u]
  std::vector<std::vector<double>> cost_surrogate_by_position;  // [u][j]
  std::vector<int> updated_agents;                           // order[0..h-1]
  std::vector<TabularPolicy> updated_policies;
};

// Per-position KL radius. Two families: agents already updated keep their
// committed cost surrogate in the slack; agents not yet updated omit it.
// Every slack is discounted by the KL spent so far and divided by the
// owner's penalty coefficient. May be negative when pi_k is infeasible and
// is +inf when no other agent carries a constraint.
double SafeRadius(const SweepContext& ctx, int h);

// The printed candidate-set test for position h: the candidate's KL must
// stay inside delta, and for each own constraint j the bounded cost
// estimate must fit under the budget reduced by the earlier positions'
// penalty-weighted KLs.
bool FeasibleSetMembership(const SweepContext& ctx, int h,
                           const TabularPolicy& candidate, double delta,
                           const SpiConfig& config);

// Search result for one position.
struct InnerMaximizeResult {
  TabularPolicy policy;
  double kl = 0.0;
  double penalized_gain = 0.0;  // objective value relative to the incumbent
  std::vector<double> cost_surrogates;  // own L_j at the accepted policy
  bool moved = false;
  bool fallback_used = false;
};

InnerMaximizeResult InnerMaximize(const SweepContext& ctx, int h,
                                  double delta, const SpiConfig& config);

SafeIterationResult SafeIteration(const TabularCMG& game,
                                  const JointPolicy& pi0, int iterations,
                                  Rng& rng, const SpiConfig& config = {});

// Certificate JSONL round trip and the after-the-fact checks.
std::string CertificateToJsonLine(const IterationCertificate& cert);
IterationCertificate CertificateFromJsonLine(const std::string& line);
void WriteCertificates(const std::vector<IterationCertificate>& certs,
                       const std::string& path);
std::vector<IterationCertificate> ReadCertificates(const std::string& path);

struct CertificateCheckReport {
  bool ok = true;
  int first_feasible_iteration = -1;  // -1 when never feasible
  std::vector<std::string> violations;
};

// Re-checks monotone improvement and constraint satisfaction from the first
// feasible iterate onward, with the certificate's own recorded values.
CertificateCheckReport VerifyCertificates(
    const std::vector<IterationCertificate>& certs,
    const SpiTolerances& tol = {});

}  // namespace samarl

#endif  // SAMARL_SAFE_POLICY_ITERATION_HPP_

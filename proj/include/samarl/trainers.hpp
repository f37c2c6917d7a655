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

#ifndef SAMARL_TRAINERS_HPP_
#define SAMARL_TRAINERS_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "samarl/adam.hpp"
#include "samarl/env.hpp"
#include "samarl/estimation.hpp"
#include "samarl/obs_normalizer.hpp"
#include "samarl/policy.hpp"
#include "samarl/rng.hpp"

namespace samarl {

// Every knob of the training loops. Defaults are the published table
// values for the full-scale tasks; desk-scale configs override the batch
// and episode sizes.
struct TrainingConfig {
  std::string algorithm = "macpo";
  std::string env = "corridor";
  CorridorConfig corridor;
  BridgeGridConfig bridge;

  int iterations = 200;
  std::uint64_t seed = 0;

  int batch_size = 16000;
  int episode_length = 1000;

  double gamma = 0.99;
  double gae_lambda = 0.95;

  std::vector<int> hidden = {64};
  double final_gain = 0.01;  // actor output layer
  double init_std = 0.5;
  double mean_scale = 1.0;
  bool normalize_obs = true;

  double critic_lr = 5e-3;
  double adam_eps = 1e-5;
  int ppo_epochs = 5;
  int num_minibatch = 40;
  double max_grad_norm = 10.0;

  double actor_lr = 9e-5;
  double clip = 0.2;

  double kl_delta = 0.0065;
  double cg_damping = 1e-2;
  int cg_iters = 64;
  int fisher_subsample = 0;  // rows used for the KL Hessian; 0 = all
  double line_search_initial = 0.27;
  double line_search_ratio = 0.5;
  int line_search_steps = 10;

  double lagrangian_init = 0.78;
  double lagrangian_lr = 1e-3;

  // Per-constraint budgets on the mean undiscounted episode cost, shared
  // by every agent.
  std::vector<double> cost_bounds = {1.0};

  int eval_episodes = 32;
  int eval_interval = 10;     // 0 disables periodic eval; the final
                              // iteration is always evaluated
  int checkpoint_interval = 0;  // 0 = final checkpoint only

  // Throws CheckError naming the offending field.
  void Validate() const;
};

nlohmann::json TrainingConfigToJson(const TrainingConfig& config);
// Unknown keys are an error (they are silent typos otherwise); absent
// keys keep their defaults.
TrainingConfig TrainingConfigFromJson(const nlohmann::json& j);

std::unique_ptr<Env> MakeEnv(const TrainingConfig& config);

enum class AlgorithmKind {
  kMacpo,            // trust region + constraints, sequential
  kHappo,            // trust region, sequential, unconstrained
  kMappoLagrangian,  // clip + multipliers, sequential
  kMappoSeq,         // clip, sequential, unconstrained
  kMappo,            // clip, simultaneous, shared critic
  kIppo,             // clip, simultaneous, per-agent critics
};

AlgorithmKind ParseAlgorithm(const std::string& tag);
bool UsesTrustRegion(AlgorithmKind kind);
bool UsesConstraints(AlgorithmKind kind);
bool UsesSequentialScheme(AlgorithmKind kind);

struct EvalResult {
  double reward = 0.0;       // mean undiscounted episode reward
  double disc_reward = 0.0;  // mean discounted episode reward
  std::vector<std::vector<double>> cost;       // [agent][j], undiscounted
  std::vector<std::vector<double>> disc_cost;  // [agent][j]
};

struct AgentUpdateLog {
  double kl = 0.0;              // sampled KL of the applied update
  double objective_delta = 0.0;
  int exponent = -1;            // accepted line-search power, -1 otherwise
  bool recovery = false;        // infeasible dual, feasibility repair taken
  bool rejected = false;        // trust-region sweep left params unchanged
};

struct IterationLog {
  int iteration = 0;
  int steps = 0;
  double reward_mean = 0.0;  // batch mean undiscounted episode reward
  std::vector<std::vector<double>> cost_mean;       // [agent][j], episode sums
  std::vector<std::vector<double>> disc_cost_mean;  // [agent][j]
  std::vector<AgentUpdateLog> agents;               // indexed by agent id
  std::vector<std::vector<double>> lambda;          // multipliers after update
  bool aborted = false;  // non-finite guard fired; parameters rolled back
  bool has_eval = false;
  EvalResult eval;
};

// One training run's mutable state: environment, per-agent actors (never
// parameter-shared), critics, normalizers, multipliers. All stochasticity
// derives from config.seed through fixed stream ids, so runs replay
// bit-identically.
class Trainer {
 public:
  explicit Trainer(const TrainingConfig& config);

  // One full iteration: collect, estimate advantages, update every agent
  // under the configured scheme, fit critics. Does not evaluate.
  IterationLog RunIteration();

  // Deterministic-mean evaluation with frozen normalizer statistics. The
  // iteration index keys the evaluation seed stream.
  EvalResult Evaluate(int iteration_index);

  const TrainingConfig& Config() const { return config_; }
  AlgorithmKind Kind() const { return kind_; }
  const Env& GetEnv() const { return *env_; }
  int IterationsDone() const { return iteration_; }

  int NumAgents() const { return n_agents_; }
  int NumConstraints() const { return n_constraints_; }

  const Policy& Actor(int agent) const { return actors_[agent]; }
  // All actor parameters concatenated in agent order; the ablation tests
  // compare whole trajectories of this vector.
  Eigen::VectorXd FlatActorParams() const;
  const std::vector<std::vector<double>>& Lagrange() const {
    return lagrange_;
  }

  // Sweep bookkeeping exposed for the M-factor identity check: the
  // final propagated M, the advantage it started from, and the product
  // of every agent's importance ratios on the last batch.
  const std::vector<double>& LastMFactor() const { return last_m_; }
  const std::vector<double>& LastAdvantage() const { return last_adv_; }
  const std::vector<double>& LastRatioProduct() const {
    return last_ratio_prod_;
  }

  nlohmann::json CheckpointJson() const;
  // Restores exactly what CheckpointJson wrote. The trainer must have
  // been built from the same config; shape mismatches throw.
  void LoadCheckpoint(const nlohmann::json& j);

 private:
  struct CollectResult {
    RolloutBatch batch;
    int n_episodes = 0;
    double episode_reward = 0.0;
    double disc_episode_reward = 0.0;
    std::vector<std::vector<double>> episode_cost;       // [agent][j]
    std::vector<std::vector<double>> disc_episode_cost;  // [agent][j]
    // Per-episode undiscounted cost sums, [agent][j][episode]; the
    // constraint violation is their mean minus the bound.
    std::vector<std::vector<std::vector<double>>> episode_cost_sums;
  };

  struct Snapshot;

  Rng StreamRng(SeedStream stream, std::uint64_t index) const;
  CollectResult Collect(int k);
  std::vector<double> CriticValues(const Mlp& critic,
                                   const std::vector<Eigen::VectorXd>& xs)
      const;
  void FitCritic(Mlp& critic, Adam& adam,
                 const std::vector<Eigen::VectorXd>& inputs,
                 const std::vector<double>& targets, Rng& shuffle_rng);
  void TrustRegionUpdate(int agent, const CollectResult& col,
                         const std::vector<double>& m_factor,
                         const std::vector<std::vector<double>>& cost_adv,
                         const std::vector<double>& violation,
                         Rng& fisher_rng, AgentUpdateLog* log);
  void ClipUpdate(int agent, const CollectResult& col,
                  const std::vector<double>& objective_adv,
                  const std::vector<std::vector<double>>& cost_adv,
                  const std::vector<double>& violation, bool update_lambda,
                  Rng& shuffle_rng, AgentUpdateLog* log);
  std::vector<double> Ratios(int agent, const RolloutBatch& batch) const;

  TrainingConfig config_;
  AlgorithmKind kind_;
  std::unique_ptr<Env> env_;
  int n_agents_ = 0;
  int n_constraints_ = 0;
  int iteration_ = 0;

  std::vector<Policy> actors_;
  std::vector<std::optional<Adam>> actor_adam_;
  std::vector<Mlp> reward_critics_;  // one shared, or one per agent
  std::vector<Adam> reward_adam_;
  std::vector<std::vector<Mlp>> cost_critics_;  // [agent][j]
  std::vector<std::vector<Adam>> cost_adam_;
  ObsNormalizer global_norm_;
  std::vector<ObsNormalizer> agent_norm_;
  std::vector<std::vector<double>> lagrange_;  // [agent][j]

  std::vector<double> last_m_;
  std::vector<double> last_adv_;
  std::vector<double> last_ratio_prod_;
};

// CSV column names for a run with this configuration; the header is part
// of the manifest so readers can bind columns without parsing the log.
std::vector<std::string> CsvHeader(const TrainingConfig& config,
                                   const Env& env);

// Full run driver: writes manifest.json before the first iteration, then
// log.csv (one row per iteration, numbers printed with %.17g so replays
// compare bit-identically), timing.csv (wall clock, excluded from replay
// comparison), checkpoints, and status.json at the end.
struct RunArtifacts {
  std::string out_dir;
  std::string manifest_path;
  std::string log_path;
  std::string timing_path;
  std::string status_path;
  std::vector<std::string> checkpoint_paths;
  bool any_aborted = false;
};

RunArtifacts RunTraining(const TrainingConfig& config,
                         const std::string& out_dir);

// Version string stamped into run manifests and the command line tool.
std::string SamarlVersion();

}  // namespace samarl

#endif  // SAMARL_TRAINERS_HPP_

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

#include "samarl/trainers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <utility>

#include "samarl/check.hpp"
#include "samarl/trust_region.hpp"

namespace samarl {

namespace {

// Sub-seed indices inside the init stream. Critic indices are offset far
// from actor indices so adding agents never collides streams; the shared
// critic reuses index +0 so IPPO with one agent matches MAPPO exactly.
constexpr std::uint64_t kCriticSeedBase = 1'000'000;
constexpr std::uint64_t kCostCriticSeedBase = 2'000'000;
// Offsets inside the permutation stream separating its three uses.
constexpr std::uint64_t kShuffleSeedOffset = 1'000'000'000;
constexpr std::uint64_t kFisherSeedOffset = 2'000'000'000;

std::string FormatG17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double Mean(const std::vector<double>& v) {
  SAMARL_CHECK(!v.empty());
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

void ShuffleIndices(std::vector<int>& idx, Rng& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
    std::swap(idx[i], idx[UniformInt(rng, 0, i)]);
  }
}

// First `count` entries of a random permutation of 0..n-1.
std::vector<int> SampleIndices(int n, int count, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < count; ++i) {
    std::swap(idx[i], idx[UniformInt(rng, i, n - 1)]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void TrainingConfig::Validate() const {
  ParseAlgorithm(algorithm);
  SAMARL_CHECK_MSG(
      env == "corridor" || env == "bridge" || env == "bridge_tabular",
      "env: unknown id '" << env << "'");
  SAMARL_CHECK_MSG(iterations >= 0, "iterations: must be >= 0");
  SAMARL_CHECK_MSG(batch_size >= 1, "batch_size: must be >= 1");
  SAMARL_CHECK_MSG(episode_length >= 1, "episode_length: must be >= 1");
  SAMARL_CHECK_MSG(gamma >= 0.0 && gamma < 1.0, "gamma: must be in [0,1)");
  SAMARL_CHECK_MSG(gae_lambda >= 0.0 && gae_lambda <= 1.0,
                   "gae_lambda: must be in [0,1]");
  SAMARL_CHECK_MSG(!hidden.empty(), "hidden: must not be empty");
  for (int h : hidden) SAMARL_CHECK_MSG(h >= 1, "hidden: sizes must be >= 1");
  SAMARL_CHECK_MSG(final_gain > 0.0, "final_gain: must be > 0");
  SAMARL_CHECK_MSG(init_std > 0.0, "init_std: must be > 0");
  SAMARL_CHECK_MSG(critic_lr > 0.0, "critic_lr: must be > 0");
  SAMARL_CHECK_MSG(adam_eps > 0.0, "adam_eps: must be > 0");
  SAMARL_CHECK_MSG(ppo_epochs >= 1, "ppo_epochs: must be >= 1");
  SAMARL_CHECK_MSG(num_minibatch >= 1, "num_minibatch: must be >= 1");
  SAMARL_CHECK_MSG(max_grad_norm > 0.0, "max_grad_norm: must be > 0");
  SAMARL_CHECK_MSG(actor_lr > 0.0, "actor_lr: must be > 0");
  SAMARL_CHECK_MSG(clip > 0.0 && clip < 1.0, "clip: must be in (0,1)");
  SAMARL_CHECK_MSG(kl_delta > 0.0, "kl_delta: must be > 0");
  SAMARL_CHECK_MSG(cg_damping >= 0.0, "cg_damping: must be >= 0");
  SAMARL_CHECK_MSG(cg_iters >= 1, "cg_iters: must be >= 1");
  SAMARL_CHECK_MSG(fisher_subsample >= 0, "fisher_subsample: must be >= 0");
  SAMARL_CHECK_MSG(line_search_initial > 0.0,
                   "line_search_initial: must be > 0");
  SAMARL_CHECK_MSG(line_search_ratio > 0.0 && line_search_ratio < 1.0,
                   "line_search_ratio: must be in (0,1)");
  SAMARL_CHECK_MSG(line_search_steps >= 0, "line_search_steps: must be >= 0");
  SAMARL_CHECK_MSG(lagrangian_init >= 0.0, "lagrangian_init: must be >= 0");
  SAMARL_CHECK_MSG(lagrangian_lr >= 0.0, "lagrangian_lr: must be >= 0");
  SAMARL_CHECK_MSG(!cost_bounds.empty(), "cost_bounds: must not be empty");
  for (double c : cost_bounds)
    SAMARL_CHECK_MSG(std::isfinite(c), "cost_bounds: must be finite");
  SAMARL_CHECK_MSG(eval_episodes >= 1, "eval_episodes: must be >= 1");
  SAMARL_CHECK_MSG(eval_interval >= 0, "eval_interval: must be >= 0");
  SAMARL_CHECK_MSG(checkpoint_interval >= 0,
                   "checkpoint_interval: must be >= 0");
}

nlohmann::json TrainingConfigToJson(const TrainingConfig& c) {
  nlohmann::json j;
  j["algorithm"] = c.algorithm;
  j["env"] = c.env;
  j["corridor"] = {{"width", c.corridor.width},
                   {"unsafe_margin", c.corridor.unsafe_margin},
                   {"dt", c.corridor.dt},
                   {"damping", c.corridor.damping},
                   {"thrust_limit", c.corridor.thrust_limit},
                   {"start_noise", c.corridor.start_noise}};
  j["bridge"] = {{"rows", c.bridge.rows},
                 {"cols", c.bridge.cols},
                 {"n_agents", c.bridge.n_agents}};
  j["iterations"] = c.iterations;
  j["seed"] = c.seed;
  j["batch_size"] = c.batch_size;
  j["episode_length"] = c.episode_length;
  j["gamma"] = c.gamma;
  j["gae_lambda"] = c.gae_lambda;
  j["hidden"] = c.hidden;
  j["final_gain"] = c.final_gain;
  j["init_std"] = c.init_std;
  j["mean_scale"] = c.mean_scale;
  j["normalize_obs"] = c.normalize_obs;
  j["critic_lr"] = c.critic_lr;
  j["adam_eps"] = c.adam_eps;
  j["ppo_epochs"] = c.ppo_epochs;
  j["num_minibatch"] = c.num_minibatch;
  j["max_grad_norm"] = c.max_grad_norm;
  j["actor_lr"] = c.actor_lr;
  j["clip"] = c.clip;
  j["kl_delta"] = c.kl_delta;
  j["cg_damping"] = c.cg_damping;
  j["cg_iters"] = c.cg_iters;
  j["fisher_subsample"] = c.fisher_subsample;
  j["line_search_initial"] = c.line_search_initial;
  j["line_search_ratio"] = c.line_search_ratio;
  j["line_search_steps"] = c.line_search_steps;
  j["lagrangian_init"] = c.lagrangian_init;
  j["lagrangian_lr"] = c.lagrangian_lr;
  j["cost_bounds"] = c.cost_bounds;
  j["eval_episodes"] = c.eval_episodes;
  j["eval_interval"] = c.eval_interval;
  j["checkpoint_interval"] = c.checkpoint_interval;
  return j;
}

namespace {

void RejectUnknownKeys(const nlohmann::json& j,
                       const std::set<std::string>& known,
                       const std::string& where) {
  for (const auto& item : j.items()) {
    SAMARL_CHECK_MSG(known.count(item.key()) > 0,
                     where << ": unknown key '" << item.key() << "'");
  }
}

}  // namespace

TrainingConfig TrainingConfigFromJson(const nlohmann::json& j) {
  SAMARL_CHECK_MSG(j.is_object(), "config: must be a JSON object");
  // A run manifest embeds the config it ran with; accept it directly so
  // replays need no surgery.
  if (j.contains("schema") && j.at("schema") == "samarl.run.v1") {
    return TrainingConfigFromJson(j.at("config"));
  }

  static const std::set<std::string> kKnown = {
      "algorithm", "env", "corridor", "bridge", "iterations", "seed",
      "batch_size", "episode_length", "gamma", "gae_lambda", "hidden",
      "final_gain", "init_std", "mean_scale", "normalize_obs", "critic_lr",
      "adam_eps", "ppo_epochs", "num_minibatch", "max_grad_norm",
      "actor_lr", "clip", "kl_delta", "cg_damping", "cg_iters",
      "fisher_subsample", "line_search_initial", "line_search_ratio",
      "line_search_steps", "lagrangian_init", "lagrangian_lr",
      "cost_bounds", "eval_episodes", "eval_interval",
      "checkpoint_interval"};
  RejectUnknownKeys(j, kKnown, "config");

  TrainingConfig c;
  c.algorithm = j.value("algorithm", c.algorithm);
  c.env = j.value("env", c.env);
  if (j.contains("corridor")) {
    const auto& e = j.at("corridor");
    RejectUnknownKeys(e,
                      {"width", "unsafe_margin", "dt", "damping",
                       "thrust_limit", "start_noise"},
                      "config.corridor");
    c.corridor.width = e.value("width", c.corridor.width);
    c.corridor.unsafe_margin =
        e.value("unsafe_margin", c.corridor.unsafe_margin);
    c.corridor.dt = e.value("dt", c.corridor.dt);
    c.corridor.damping = e.value("damping", c.corridor.damping);
    c.corridor.thrust_limit = e.value("thrust_limit", c.corridor.thrust_limit);
    c.corridor.start_noise = e.value("start_noise", c.corridor.start_noise);
  }
  if (j.contains("bridge")) {
    const auto& e = j.at("bridge");
    RejectUnknownKeys(e, {"rows", "cols", "n_agents"}, "config.bridge");
    c.bridge.rows = e.value("rows", c.bridge.rows);
    c.bridge.cols = e.value("cols", c.bridge.cols);
    c.bridge.n_agents = e.value("n_agents", c.bridge.n_agents);
  }
  c.iterations = j.value("iterations", c.iterations);
  c.seed = j.value("seed", c.seed);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.episode_length = j.value("episode_length", c.episode_length);
  c.gamma = j.value("gamma", c.gamma);
  c.gae_lambda = j.value("gae_lambda", c.gae_lambda);
  c.hidden = j.value("hidden", c.hidden);
  c.final_gain = j.value("final_gain", c.final_gain);
  c.init_std = j.value("init_std", c.init_std);
  c.mean_scale = j.value("mean_scale", c.mean_scale);
  c.normalize_obs = j.value("normalize_obs", c.normalize_obs);
  c.critic_lr = j.value("critic_lr", c.critic_lr);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.ppo_epochs = j.value("ppo_epochs", c.ppo_epochs);
  c.num_minibatch = j.value("num_minibatch", c.num_minibatch);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  c.actor_lr = j.value("actor_lr", c.actor_lr);
  c.clip = j.value("clip", c.clip);
  c.kl_delta = j.value("kl_delta", c.kl_delta);
  c.cg_damping = j.value("cg_damping", c.cg_damping);
  c.cg_iters = j.value("cg_iters", c.cg_iters);
  c.fisher_subsample = j.value("fisher_subsample", c.fisher_subsample);
  c.line_search_initial = j.value("line_search_initial",
                                  c.line_search_initial);
  c.line_search_ratio = j.value("line_search_ratio", c.line_search_ratio);
  c.line_search_steps = j.value("line_search_steps", c.line_search_steps);
  c.lagrangian_init = j.value("lagrangian_init", c.lagrangian_init);
  c.lagrangian_lr = j.value("lagrangian_lr", c.lagrangian_lr);
  c.cost_bounds = j.value("cost_bounds", c.cost_bounds);
  c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
  c.eval_interval = j.value("eval_interval", c.eval_interval);
  c.checkpoint_interval = j.value("checkpoint_interval",
                                  c.checkpoint_interval);
  c.Validate();
  return c;
}

std::unique_ptr<Env> MakeEnv(const TrainingConfig& config) {
  if (config.env == "corridor") {
    return std::make_unique<CorridorEnv>(config.corridor);
  }
  if (config.env == "bridge") {
    return std::make_unique<BridgeGridEnv>(config.bridge);
  }
  if (config.env == "bridge_tabular") {
    BridgeGridEnv bridge(config.bridge);
    return std::make_unique<TabularEnv>(
        AsTabular(bridge, config.gamma, config.cost_bounds));
  }
  SAMARL_CHECK_MSG(false, "env: unknown id '" << config.env << "'");
  return nullptr;
}

AlgorithmKind ParseAlgorithm(const std::string& tag) {
  if (tag == "macpo") return AlgorithmKind::kMacpo;
  if (tag == "happo") return AlgorithmKind::kHappo;
  if (tag == "mappo_lagrangian") return AlgorithmKind::kMappoLagrangian;
  if (tag == "mappo_seq") return AlgorithmKind::kMappoSeq;
  if (tag == "mappo") return AlgorithmKind::kMappo;
  if (tag == "ippo") return AlgorithmKind::kIppo;
  SAMARL_CHECK_MSG(false, "algorithm: unknown tag '" << tag << "'");
  return AlgorithmKind::kMacpo;
}

bool UsesTrustRegion(AlgorithmKind kind) {
  return kind == AlgorithmKind::kMacpo || kind == AlgorithmKind::kHappo;
}

bool UsesConstraints(AlgorithmKind kind) {
  return kind == AlgorithmKind::kMacpo ||
         kind == AlgorithmKind::kMappoLagrangian;
}

bool UsesSequentialScheme(AlgorithmKind kind) {
  return kind == AlgorithmKind::kMacpo || kind == AlgorithmKind::kHappo ||
         kind == AlgorithmKind::kMappoLagrangian ||
         kind == AlgorithmKind::kMappoSeq;
}

// ---------------------------------------------------------------------------
// Trainer construction

Trainer::Trainer(const TrainingConfig& config)
    : config_(config),
      kind_(ParseAlgorithm(config.algorithm)),
      env_(MakeEnv(config_)),
      global_norm_(env_->GlobalObsDim()) {
  config_.Validate();
  n_agents_ = env_->NumAgents();
  n_constraints_ = env_->NumConstraints();
  SAMARL_CHECK_MSG(
      static_cast<int>(config_.cost_bounds.size()) == n_constraints_,
      "cost_bounds: need one bound per constraint");

  const bool clip_family = !UsesTrustRegion(kind_);
  for (int i = 0; i < n_agents_; ++i) {
    agent_norm_.emplace_back(env_->AgentObsDim(i));
    Rng rng = StreamRng(SeedStream::kInit, static_cast<std::uint64_t>(i));
    if (env_->DiscreteActions()) {
      actors_.push_back(MakeCategoricalPolicy(env_->AgentObsDim(i),
                                              env_->ActionCount(i),
                                              config_.hidden, rng,
                                              config_.final_gain));
    } else {
      actors_.push_back(MakeGaussianPolicy(
          env_->AgentObsDim(i), env_->ActionDim(i), config_.hidden, rng,
          config_.final_gain, config_.init_std, config_.mean_scale));
    }
    if (clip_family) {
      Adam adam(PolicyParamCount(actors_.back()), config_.actor_lr);
      adam.eps = config_.adam_eps;
      actor_adam_.emplace_back(adam);
    } else {
      actor_adam_.emplace_back(std::nullopt);
    }
  }

  const int n_reward_critics = kind_ == AlgorithmKind::kIppo ? n_agents_ : 1;
  for (int i = 0; i < n_reward_critics; ++i) {
    Rng rng = StreamRng(SeedStream::kInit,
                        kCriticSeedBase + static_cast<std::uint64_t>(i));
    const int dim = kind_ == AlgorithmKind::kIppo ? env_->AgentObsDim(i)
                                                  : env_->GlobalObsDim();
    reward_critics_.push_back(MakeCritic(dim, config_.hidden, rng));
    Adam adam(MlpParamCount(reward_critics_.back()), config_.critic_lr);
    adam.eps = config_.adam_eps;
    reward_adam_.push_back(adam);
  }

  if (UsesConstraints(kind_)) {
    for (int i = 0; i < n_agents_; ++i) {
      cost_critics_.emplace_back();
      cost_adam_.emplace_back();
      for (int j = 0; j < n_constraints_; ++j) {
        Rng rng = StreamRng(
            SeedStream::kInit,
            kCostCriticSeedBase + 1000 * static_cast<std::uint64_t>(i) +
                static_cast<std::uint64_t>(j));
        cost_critics_[i].push_back(
            MakeCritic(env_->GlobalObsDim(), config_.hidden, rng));
        Adam adam(MlpParamCount(cost_critics_[i][j]), config_.critic_lr);
        adam.eps = config_.adam_eps;
        cost_adam_[i].push_back(adam);
      }
    }
  }

  const double lambda0 = kind_ == AlgorithmKind::kMappoLagrangian
                             ? config_.lagrangian_init
                             : 0.0;
  lagrange_.assign(n_agents_,
                   std::vector<double>(n_constraints_, lambda0));
}

Rng Trainer::StreamRng(SeedStream stream, std::uint64_t index) const {
  return Rng(MixSeed(MixSeed(config_.seed, static_cast<std::uint64_t>(stream)),
                     index));
}

Eigen::VectorXd Trainer::FlatActorParams() const {
  int total = 0;
  for (const Policy& p : actors_) total += PolicyParamCount(p);
  Eigen::VectorXd out(total);
  int at = 0;
  for (const Policy& p : actors_) {
    const Eigen::VectorXd flat = FlattenPolicy(p);
    out.segment(at, flat.size()) = flat;
    at += static_cast<int>(flat.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Collection

Trainer::CollectResult Trainer::Collect(int k) {
  Rng rng = StreamRng(SeedStream::kEnv, static_cast<std::uint64_t>(k));
  const int horizon = config_.episode_length;
  const int n_episodes =
      (config_.batch_size + horizon - 1) / horizon;
  const bool want_next_obs = kind_ == AlgorithmKind::kIppo;

  CollectResult col;
  col.n_episodes = n_episodes;
  RolloutBatch& batch = col.batch;
  batch.n_agents = n_agents_;
  batch.n_costs.assign(n_agents_, n_constraints_);
  batch.obs.resize(n_agents_);
  if (want_next_obs) batch.next_obs.resize(n_agents_);
  batch.actions.resize(n_agents_);
  batch.log_prob.resize(n_agents_);
  batch.cost.assign(n_agents_,
                    std::vector<std::vector<double>>(n_constraints_));

  std::vector<std::vector<std::vector<double>>> ep_cost(
      n_agents_, std::vector<std::vector<double>>(n_constraints_));
  std::vector<std::vector<std::vector<double>>> ep_disc_cost = ep_cost;
  std::vector<double> ep_reward, ep_disc_reward;

  auto norm_global = [&](const Eigen::VectorXd& raw, bool update) {
    if (!config_.normalize_obs) return raw;
    if (update) global_norm_.Update(raw);
    return global_norm_.Normalize(raw);
  };
  auto norm_agent = [&](int i, const Eigen::VectorXd& raw, bool update) {
    if (!config_.normalize_obs) return raw;
    if (update) agent_norm_[i].Update(raw);
    return agent_norm_[i].Normalize(raw);
  };

  for (int ep = 0; ep < n_episodes; ++ep) {
    EnvObservation raw;
    Eigen::VectorXd s = env_->Reset(rng, &raw);
    Eigen::VectorXd gobs = norm_global(raw.global, true);
    std::vector<Eigen::VectorXd> aobs(n_agents_);
    for (int i = 0; i < n_agents_; ++i)
      aobs[i] = norm_agent(i, raw.agents[i], true);

    double rew_sum = 0.0, disc_rew_sum = 0.0, discount = 1.0;
    std::vector<std::vector<double>> cost_sum(
        n_agents_, std::vector<double>(n_constraints_, 0.0));
    std::vector<std::vector<double>> disc_cost_sum = cost_sum;

    for (int t = 0; t < horizon; ++t) {
      std::vector<Action> acts(n_agents_);
      for (int i = 0; i < n_agents_; ++i) {
        acts[i] = SamplePolicyAction(actors_[i], aobs[i], rng);
      }
      EnvStep step = env_->Step(s, acts, rng);
      const Eigen::VectorXd next_gobs = norm_global(step.obs.global, true);
      std::vector<Eigen::VectorXd> next_aobs(n_agents_);
      for (int i = 0; i < n_agents_; ++i)
        next_aobs[i] = norm_agent(i, step.obs.agents[i], true);

      batch.state.push_back(gobs);
      batch.next_state.push_back(next_gobs);
      batch.reward.push_back(step.reward);
      const bool end = step.terminal || t == horizon - 1;
      batch.terminal.push_back(step.terminal ? 1 : 0);
      batch.episode_end.push_back(end ? 1 : 0);
      for (int i = 0; i < n_agents_; ++i) {
        batch.obs[i].push_back(aobs[i]);
        if (want_next_obs) batch.next_obs[i].push_back(next_aobs[i]);
        batch.actions[i].push_back(acts[i]);
        batch.log_prob[i].push_back(
            PolicyLogProb(actors_[i], aobs[i], acts[i]));
        for (int j = 0; j < n_constraints_; ++j) {
          batch.cost[i][j].push_back(step.costs[i][j]);
          cost_sum[i][j] += step.costs[i][j];
          disc_cost_sum[i][j] += discount * step.costs[i][j];
        }
      }
      rew_sum += step.reward;
      disc_rew_sum += discount * step.reward;
      discount *= config_.gamma;
      s = step.state;
      gobs = next_gobs;
      aobs = std::move(next_aobs);
      if (step.terminal) break;
    }

    ep_reward.push_back(rew_sum);
    ep_disc_reward.push_back(disc_rew_sum);
    for (int i = 0; i < n_agents_; ++i) {
      for (int j = 0; j < n_constraints_; ++j) {
        ep_cost[i][j].push_back(cost_sum[i][j]);
        ep_disc_cost[i][j].push_back(disc_cost_sum[i][j]);
      }
    }
  }

  batch.Validate();
  col.episode_reward = Mean(ep_reward);
  col.disc_episode_reward = Mean(ep_disc_reward);
  col.episode_cost.assign(n_agents_,
                          std::vector<double>(n_constraints_, 0.0));
  col.disc_episode_cost = col.episode_cost;
  col.episode_cost_sums = std::move(ep_cost);
  for (int i = 0; i < n_agents_; ++i) {
    for (int j = 0; j < n_constraints_; ++j) {
      col.episode_cost[i][j] = Mean(col.episode_cost_sums[i][j]);
      col.disc_episode_cost[i][j] = Mean(ep_disc_cost[i][j]);
    }
  }
  return col;
}

// ---------------------------------------------------------------------------
// Critics

std::vector<double> Trainer::CriticValues(
    const Mlp& critic, const std::vector<Eigen::VectorXd>& xs) const {
  std::vector<double> out(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t)
    out[t] = CriticValue(critic, xs[t]);
  return out;
}

void Trainer::FitCritic(Mlp& critic, Adam& adam,
                        const std::vector<Eigen::VectorXd>& inputs,
                        const std::vector<double>& targets,
                        Rng& shuffle_rng) {
  const int n = static_cast<int>(inputs.size());
  SAMARL_CHECK_EQ(targets.size(), inputs.size());
  Eigen::VectorXd flat = FlattenMlp(critic);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const int chunks = std::min(config_.num_minibatch, n);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);

  for (int e = 0; e < config_.ppo_epochs; ++e) {
    ShuffleIndices(idx, shuffle_rng);
    for (int c = 0; c < chunks; ++c) {
      const int lo = static_cast<int>(
          static_cast<long long>(c) * n / chunks);
      const int hi = static_cast<int>(
          static_cast<long long>(c + 1) * n / chunks);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(flat.size());
      for (int at = lo; at < hi; ++at) {
        const int t = idx[at];
        MlpActivations acts;
        const double v = MlpForward(critic, inputs[t], &acts)[0];
        grad += 2.0 * (v - targets[t]) * BackpropParams(critic, acts, one);
      }
      grad /= static_cast<double>(hi - lo);
      ClipByGlobalNorm(grad, config_.max_grad_norm);
      adam.Step(flat, grad);
      SetMlpParams(critic, flat);
    }
  }
}

// ---------------------------------------------------------------------------
// Agent updates

std::vector<double> Trainer::Ratios(int agent,
                                    const RolloutBatch& batch) const {
  const int steps = batch.Steps();
  std::vector<double> out(steps);
  for (int t = 0; t < steps; ++t) {
    const double lp = PolicyLogProb(actors_[agent], batch.obs[agent][t],
                                    batch.actions[agent][t]);
    out[t] = std::exp(lp - batch.log_prob[agent][t]);
  }
  return out;
}

void Trainer::TrustRegionUpdate(
    int agent, const CollectResult& col, const std::vector<double>& m_factor,
    const std::vector<std::vector<double>>& cost_adv,
    const std::vector<double>& violation, Rng& fisher_rng,
    AgentUpdateLog* log) {
  const RolloutBatch& batch = col.batch;
  const int steps = batch.Steps();
  const int m = static_cast<int>(cost_adv.size());
  const std::vector<Eigen::VectorXd>& obs = batch.obs[agent];
  const std::vector<Eigen::VectorXd>& acts = batch.actions[agent];
  const Eigen::VectorXd flat = FlattenPolicy(actors_[agent]);
  const int dim = static_cast<int>(flat.size());

  // Score-weighted means: one gradient pass feeds the objective and every
  // constraint row.
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
  std::vector<Eigen::VectorXd> b(m, Eigen::VectorXd::Zero(dim));
  for (int t = 0; t < steps; ++t) {
    const Eigen::VectorXd score = GradLogProb(actors_[agent], obs[t], acts[t]);
    g += m_factor[t] * score;
    for (int j = 0; j < m; ++j) b[j] += cost_adv[j][t] * score;
  }
  g /= static_cast<double>(steps);
  for (int j = 0; j < m; ++j) b[j] /= static_cast<double>(steps);

  // The violation lives in episode-cost units; (1-gamma) converts it to
  // the per-step advantage scale the linearized constraint uses.
  std::vector<double> d(m);
  for (int j = 0; j < m; ++j) d[j] = (1.0 - config_.gamma) * violation[j];

  // Curvature rows for the KL Hessian, optionally subsampled.
  std::vector<Eigen::VectorXd> fisher_obs;
  const std::vector<Eigen::VectorXd>* fisher = &obs;
  if (config_.fisher_subsample > 0 && config_.fisher_subsample < steps) {
    const std::vector<int> pick =
        SampleIndices(steps, config_.fisher_subsample, fisher_rng);
    fisher_obs.reserve(pick.size());
    for (int t : pick) fisher_obs.push_back(obs[t]);
    fisher = &fisher_obs;
  }

  LqclpProblem problem;
  problem.g = g;
  problem.b = b;
  problem.d = d;
  problem.delta = config_.kl_delta;
  problem.cg_iters = config_.cg_iters;
  problem.enable_multi = m > 1;
  problem.hvp = [&](const Eigen::VectorXd& v) {
    return KlHessianVectorProduct(actors_[agent], *fisher, v,
                                  config_.cg_damping);
  };
  const LqclpSolution sol = SolveLqclp(problem);

  const double mean_m = Mean(m_factor);
  std::vector<double> mean_cadv(m);
  for (int j = 0; j < m; ++j) mean_cadv[j] = Mean(cost_adv[j]);

  auto evaluate = [&](const Eigen::VectorXd& step) {
    Policy cand = actors_[agent];
    SetPolicyParams(cand, flat + step);
    double obj = 0.0;
    std::vector<double> cacc(m, 0.0);
    for (int t = 0; t < steps; ++t) {
      const double ratio = std::exp(PolicyLogProb(cand, obs[t], acts[t]) -
                                    batch.log_prob[agent][t]);
      obj += ratio * m_factor[t];
      for (int j = 0; j < m; ++j) cacc[j] += ratio * cost_adv[j][t];
    }
    LineSearchEval eval;
    eval.objective_delta = obj / steps - mean_m;
    eval.kl = MeanKl(actors_[agent], cand, obs);
    eval.constraint_excess.resize(m);
    for (int j = 0; j < m; ++j) {
      eval.constraint_excess[j] = d[j] + (cacc[j] / steps - mean_cadv[j]);
    }
    return eval;
  };

  LineSearchConfig ls;
  ls.initial_scale = config_.line_search_initial;
  ls.ratio = config_.line_search_ratio;
  ls.max_exponent = config_.line_search_steps;
  ls.kl_limit = config_.kl_delta;

  TrustRegionStep step;
  if (!sol.dual.feasible) {
    // No point of the KL ball satisfies the linearized constraints; pull
    // straight down the most violated cost.
    int worst = 0;
    for (int j = 1; j < m; ++j)
      if (d[j] > d[worst]) worst = j;
    auto cost_delta = [&](const Eigen::VectorXd& candidate) {
      Policy cand = actors_[agent];
      SetPolicyParams(cand, flat + candidate);
      double acc = 0.0;
      for (int t = 0; t < steps; ++t) {
        const double ratio = std::exp(PolicyLogProb(cand, obs[t], acts[t]) -
                                      batch.log_prob[agent][t]);
        acc += ratio * cost_adv[worst][t];
      }
      return acc / steps - mean_cadv[worst];
    };
    step = RecoveryStep(sol.hinv_b[worst], b[worst], config_.kl_delta,
                        cost_delta, ls);
    log->recovery = true;
  } else {
    step = BacktrackingLineSearch(PrimalStep(sol), evaluate, ls);
  }

  if (step.mode == TrustRegionStep::Mode::kReject) {
    log->rejected = true;
    return;
  }
  const LineSearchEval applied = evaluate(step.accepted_step);
  log->kl = applied.kl;
  log->objective_delta = applied.objective_delta;
  log->exponent = step.exponent;
  SetPolicyParams(actors_[agent], flat + step.accepted_step);
}

void Trainer::ClipUpdate(int agent, const CollectResult& col,
                         const std::vector<double>& objective_adv,
                         const std::vector<std::vector<double>>& cost_adv,
                         const std::vector<double>& violation,
                         bool update_lambda, Rng& shuffle_rng,
                         AgentUpdateLog* log) {
  const RolloutBatch& batch = col.batch;
  const int steps = batch.Steps();
  const std::vector<Eigen::VectorXd>& obs = batch.obs[agent];
  const std::vector<Eigen::VectorXd>& acts = batch.actions[agent];
  const Policy before = actors_[agent];
  Eigen::VectorXd flat = FlattenPolicy(actors_[agent]);
  Adam& adam = *actor_adam_[agent];
  const double eps = config_.clip;

  std::vector<int> idx(steps);
  std::iota(idx.begin(), idx.end(), 0);
  const int chunks = std::min(config_.num_minibatch, steps);

  for (int e = 0; e < config_.ppo_epochs; ++e) {
    ShuffleIndices(idx, shuffle_rng);
    for (int c = 0; c < chunks; ++c) {
      const int lo = static_cast<int>(
          static_cast<long long>(c) * steps / chunks);
      const int hi = static_cast<int>(
          static_cast<long long>(c + 1) * steps / chunks);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(flat.size());
      for (int at = lo; at < hi; ++at) {
        const int t = idx[at];
        const double lp = PolicyLogProb(actors_[agent], obs[t], acts[t]);
        const double ratio = std::exp(lp - batch.log_prob[agent][t]);
        const double a = objective_adv[t];
        // The clipped branch is constant in theta, so its gradient
        // vanishes; only the unclipped branch contributes.
        const bool clipped =
            (a >= 0.0 && ratio > 1.0 + eps) || (a < 0.0 && ratio < 1.0 - eps);
        if (!clipped) {
          grad += ratio * a * GradLogProb(actors_[agent], obs[t], acts[t]);
        }
      }
      grad /= static_cast<double>(hi - lo);
      ClipByGlobalNorm(grad, config_.max_grad_norm);
      adam.Step(flat, -grad);  // ascend
      SetPolicyParams(actors_[agent], flat);
    }

    if (update_lambda) {
      // Multiplier step after the epoch's policy step, using ratios at
      // the current parameters; grows under violation, rectified at 0.
      const std::vector<double> ratios = Ratios(agent, batch);
      for (std::size_t j = 0; j < cost_adv.size(); ++j) {
        double weighted = 0.0;
        for (int t = 0; t < steps; ++t)
          weighted += ratios[t] * cost_adv[j][t];
        weighted /= static_cast<double>(steps);
        const double delta_lambda =
            -((1.0 - config_.gamma) * violation[j] + weighted);
        lagrange_[agent][j] = std::max(
            0.0, lagrange_[agent][j] - config_.lagrangian_lr * delta_lambda);
      }
    }
  }

  const std::vector<double> ratios = Ratios(agent, batch);
  double obj = 0.0;
  for (int t = 0; t < steps; ++t)
    obj += (ratios[t] - 1.0) * objective_adv[t];
  log->objective_delta = obj / steps;
  log->kl = MeanKl(before, actors_[agent], obs);
  log->exponent = -1;
}

// ---------------------------------------------------------------------------
// Iteration

struct Trainer::Snapshot {
  std::vector<Policy> actors;
  std::vector<std::optional<Adam>> actor_adam;
  std::vector<Mlp> reward_critics;
  std::vector<Adam> reward_adam;
  std::vector<std::vector<Mlp>> cost_critics;
  std::vector<std::vector<Adam>> cost_adam;
  ObsNormalizer global_norm;
  std::vector<ObsNormalizer> agent_norm;
  std::vector<std::vector<double>> lagrange;
};

IterationLog Trainer::RunIteration() {
  const int k = iteration_;
  IterationLog row;
  row.iteration = k;
  row.agents.resize(n_agents_);
  row.lambda = lagrange_;
  // Pre-size metric tables so an aborted row still prints full width.
  row.cost_mean.assign(n_agents_, std::vector<double>(n_constraints_, 0.0));
  row.disc_cost_mean = row.cost_mean;

  Snapshot snap{actors_,        actor_adam_, reward_critics_, reward_adam_,
                cost_critics_,  cost_adam_,  global_norm_,    agent_norm_,
                lagrange_};

  try {
    CollectResult col = Collect(k);
    const RolloutBatch& batch = col.batch;
    const int steps = batch.Steps();
    row.steps = steps;
    row.reward_mean = col.episode_reward;
    row.cost_mean = col.episode_cost;
    row.disc_cost_mean = col.disc_episode_cost;

    // Reward advantages and regression targets from the critics as of
    // collection time.
    std::vector<std::vector<double>> agent_adv(n_agents_);
    std::vector<std::vector<double>> agent_ret(n_agents_);
    if (kind_ == AlgorithmKind::kIppo) {
      for (int i = 0; i < n_agents_; ++i) {
        GaeInput in;
        in.values = CriticValues(reward_critics_[i], batch.obs[i]);
        in.next_values = CriticValues(reward_critics_[i], batch.next_obs[i]);
        in.rewards = batch.reward;
        in.terminal = batch.terminal;
        in.episode_end = batch.episode_end;
        agent_adv[i] = Gae(in, config_.gamma, config_.gae_lambda);
        agent_ret[i] = DiscountedReturnToGo(in, config_.gamma);
        NormalizeAdvantages(agent_adv[i]);
      }
    } else {
      GaeInput in;
      in.values = CriticValues(reward_critics_[0], batch.state);
      in.next_values = CriticValues(reward_critics_[0], batch.next_state);
      in.rewards = batch.reward;
      in.terminal = batch.terminal;
      in.episode_end = batch.episode_end;
      std::vector<double> adv = Gae(in, config_.gamma, config_.gae_lambda);
      std::vector<double> ret = DiscountedReturnToGo(in, config_.gamma);
      NormalizeAdvantages(adv);
      for (int i = 0; i < n_agents_; ++i) {
        agent_adv[i] = adv;
        agent_ret[i] = ret;
      }
    }

    // Cost advantages, returns, and violations; only constrained
    // algorithms carry them.
    std::vector<std::vector<std::vector<double>>> cost_adv(n_agents_);
    std::vector<std::vector<std::vector<double>>> cost_ret(n_agents_);
    std::vector<std::vector<double>> violation(n_agents_);
    if (UsesConstraints(kind_)) {
      for (int i = 0; i < n_agents_; ++i) {
        cost_adv[i].resize(n_constraints_);
        cost_ret[i].resize(n_constraints_);
        violation[i].resize(n_constraints_);
        for (int j = 0; j < n_constraints_; ++j) {
          GaeInput in;
          in.values = CriticValues(cost_critics_[i][j], batch.state);
          in.next_values =
              CriticValues(cost_critics_[i][j], batch.next_state);
          in.rewards = batch.cost[i][j];
          in.terminal = batch.terminal;
          in.episode_end = batch.episode_end;
          cost_adv[i][j] = CostGae(in, config_.gamma, config_.gae_lambda);
          cost_ret[i][j] = DiscountedReturnToGo(in, config_.gamma);
          violation[i][j] = ConstraintViolation(col.episode_cost_sums[i][j],
                                                config_.cost_bounds[j]);
        }
      }
    }

    // Agent sweep in a fresh random order each iteration.
    Rng perm_rng =
        StreamRng(SeedStream::kPermutation, static_cast<std::uint64_t>(k));
    std::vector<int> perm(n_agents_);
    std::iota(perm.begin(), perm.end(), 0);
    ShuffleIndices(perm, perm_rng);
    Rng shuffle_rng = StreamRng(
        SeedStream::kPermutation,
        kShuffleSeedOffset + static_cast<std::uint64_t>(k));
    Rng fisher_rng = StreamRng(
        SeedStream::kPermutation,
        kFisherSeedOffset + static_cast<std::uint64_t>(k));

    const bool sequential = UsesSequentialScheme(kind_);
    std::vector<double> m_factor = agent_adv[0];
    std::vector<double> ratio_prod(steps, 1.0);

    for (int h = 0; h < n_agents_; ++h) {
      const int i = perm[h];
      AgentUpdateLog alog;
      if (UsesTrustRegion(kind_)) {
        const std::vector<std::vector<double>> no_cadv;
        const std::vector<double> no_viol;
        TrustRegionUpdate(i, col, m_factor,
                          kind_ == AlgorithmKind::kMacpo ? cost_adv[i]
                                                         : no_cadv,
                          kind_ == AlgorithmKind::kMacpo ? violation[i]
                                                         : no_viol,
                          fisher_rng, &alog);
      } else if (sequential) {
        std::vector<double> objective = m_factor;
        if (kind_ == AlgorithmKind::kMappoLagrangian) {
          // Blend at the multipliers this agent enters with; the blend is
          // frozen across its epochs even though lambda moves inside.
          for (int j = 0; j < n_constraints_; ++j) {
            const double lam = lagrange_[i][j];
            const double offset = (1.0 - config_.gamma) * violation[i][j];
            for (int t = 0; t < steps; ++t) {
              objective[t] -= lam * (cost_adv[i][j][t] + offset);
            }
          }
        }
        ClipUpdate(i, col, objective,
                   kind_ == AlgorithmKind::kMappoLagrangian
                       ? cost_adv[i]
                       : std::vector<std::vector<double>>{},
                   kind_ == AlgorithmKind::kMappoLagrangian
                       ? violation[i]
                       : std::vector<double>{},
                   kind_ == AlgorithmKind::kMappoLagrangian, shuffle_rng,
                   &alog);
      } else {
        ClipUpdate(i, col, agent_adv[i], {}, {}, false, shuffle_rng, &alog);
      }

      if (sequential) {
        const std::vector<double> ratios = Ratios(i, batch);
        m_factor = UpdateMFactor(m_factor, ratios);
        for (int t = 0; t < steps; ++t) ratio_prod[t] *= ratios[t];
      }
      row.agents[i] = alog;
    }

    if (sequential) {
      last_m_ = m_factor;
      last_adv_ = agent_adv[0];
      last_ratio_prod_ = ratio_prod;
    } else {
      last_m_.clear();
      last_adv_.clear();
      last_ratio_prod_.clear();
    }

    // Critic regression toward the empirical discounted returns, after
    // the policy sweep.
    if (kind_ == AlgorithmKind::kIppo) {
      for (int i = 0; i < n_agents_; ++i) {
        FitCritic(reward_critics_[i], reward_adam_[i], batch.obs[i],
                  agent_ret[i], shuffle_rng);
      }
    } else {
      FitCritic(reward_critics_[0], reward_adam_[0], batch.state,
                agent_ret[0], shuffle_rng);
    }
    if (UsesConstraints(kind_)) {
      for (int i = 0; i < n_agents_; ++i) {
        for (int j = 0; j < n_constraints_; ++j) {
          FitCritic(cost_critics_[i][j], cost_adam_[i][j], batch.state,
                    cost_ret[i][j], shuffle_rng);
        }
      }
    }

    row.lambda = lagrange_;
  } catch (const CheckError&) {
    // Poisoned numerics: restore every piece of mutable state and flag
    // the row; the next iteration starts from the pre-iteration state.
    actors_ = snap.actors;
    actor_adam_ = snap.actor_adam;
    reward_critics_ = snap.reward_critics;
    reward_adam_ = snap.reward_adam;
    cost_critics_ = snap.cost_critics;
    cost_adam_ = snap.cost_adam;
    global_norm_ = snap.global_norm;
    agent_norm_ = snap.agent_norm;
    lagrange_ = snap.lagrange;
    row.aborted = true;
  }

  ++iteration_;
  return row;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalResult Trainer::Evaluate(int iteration_index) {
  Rng rng = StreamRng(SeedStream::kEval,
                      static_cast<std::uint64_t>(iteration_index));
  EvalResult out;
  out.cost.assign(n_agents_, std::vector<double>(n_constraints_, 0.0));
  out.disc_cost = out.cost;

  auto frozen_agent_obs = [&](int i, const Eigen::VectorXd& raw) {
    return config_.normalize_obs ? agent_norm_[i].Normalize(raw) : raw;
  };

  for (int ep = 0; ep < config_.eval_episodes; ++ep) {
    EnvObservation obs;
    Eigen::VectorXd s = env_->Reset(rng, &obs);
    double discount = 1.0;
    for (int t = 0; t < config_.episode_length; ++t) {
      std::vector<Action> acts(n_agents_);
      for (int i = 0; i < n_agents_; ++i) {
        acts[i] = PolicyModeAction(actors_[i],
                                   frozen_agent_obs(i, obs.agents[i]));
      }
      EnvStep step = env_->Step(s, acts, rng);
      out.reward += step.reward;
      out.disc_reward += discount * step.reward;
      for (int i = 0; i < n_agents_; ++i) {
        for (int j = 0; j < n_constraints_; ++j) {
          out.cost[i][j] += step.costs[i][j];
          out.disc_cost[i][j] += discount * step.costs[i][j];
        }
      }
      discount *= config_.gamma;
      s = step.state;
      obs = step.obs;
      if (step.terminal) break;
    }
  }

  const double n = static_cast<double>(config_.eval_episodes);
  out.reward /= n;
  out.disc_reward /= n;
  for (int i = 0; i < n_agents_; ++i) {
    for (int j = 0; j < n_constraints_; ++j) {
      out.cost[i][j] /= n;
      out.disc_cost[i][j] /= n;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::json Trainer::CheckpointJson() const {
  nlohmann::json j;
  j["schema"] = "samarl.checkpoint.v1";
  j["iteration"] = iteration_;
  j["actors"] = nlohmann::json::array();
  for (const Policy& p : actors_) j["actors"].push_back(PolicyToJson(p));
  j["reward_critics"] = nlohmann::json::array();
  for (const Mlp& c : reward_critics_)
    j["reward_critics"].push_back(MlpToJson(c));
  j["cost_critics"] = nlohmann::json::array();
  for (const auto& per_agent : cost_critics_) {
    nlohmann::json row = nlohmann::json::array();
    for (const Mlp& c : per_agent) row.push_back(MlpToJson(c));
    j["cost_critics"].push_back(row);
  }
  j["global_normalizer"] = global_norm_.ToJson();
  j["agent_normalizers"] = nlohmann::json::array();
  for (const ObsNormalizer& n : agent_norm_)
    j["agent_normalizers"].push_back(n.ToJson());
  j["lambda"] = lagrange_;
  return j;
}

void Trainer::LoadCheckpoint(const nlohmann::json& j) {
  SAMARL_CHECK_MSG(j.at("schema") == "samarl.checkpoint.v1",
                   "checkpoint: unrecognized schema");
  SAMARL_CHECK_MSG(j.at("actors").size() == actors_.size(),
                   "checkpoint: actor count "
                       << j.at("actors").size() << " does not match the "
                       << actors_.size() << " this config builds");
  SAMARL_CHECK_MSG(j.at("reward_critics").size() == reward_critics_.size(),
                   "checkpoint: reward critic count mismatch");
  SAMARL_CHECK_MSG(j.at("cost_critics").size() == cost_critics_.size(),
                   "checkpoint: cost critic layout mismatch");
  std::vector<Policy> actors;
  for (const auto& p : j.at("actors")) actors.push_back(PolicyFromJson(p));
  std::vector<Mlp> reward_critics;
  for (const auto& c : j.at("reward_critics"))
    reward_critics.push_back(MlpFromJson(c));
  std::vector<std::vector<Mlp>> cost_critics;
  for (std::size_t i = 0; i < j.at("cost_critics").size(); ++i) {
    const auto& row = j.at("cost_critics")[i];
    SAMARL_CHECK_MSG(row.size() == cost_critics_[i].size(),
                     "checkpoint: cost critic layout mismatch");
    std::vector<Mlp> per_agent;
    for (const auto& c : row) per_agent.push_back(MlpFromJson(c));
    cost_critics.push_back(std::move(per_agent));
  }
  SAMARL_CHECK_MSG(j.at("agent_normalizers").size() == agent_norm_.size(),
                   "checkpoint: normalizer count mismatch");
  // All parsed; commit atomically so a malformed file cannot leave the
  // trainer half restored.
  actors_ = std::move(actors);
  reward_critics_ = std::move(reward_critics);
  cost_critics_ = std::move(cost_critics);
  global_norm_ = ObsNormalizer::FromJson(j.at("global_normalizer"));
  agent_norm_.clear();
  for (const auto& n : j.at("agent_normalizers"))
    agent_norm_.push_back(ObsNormalizer::FromJson(n));
  lagrange_ = j.at("lambda").get<std::vector<std::vector<double>>>();
  iteration_ = j.at("iteration").get<int>();
}

// ---------------------------------------------------------------------------
// CSV schema and run driver

std::string SamarlVersion() { return "samarl 0.1.0"; }

std::vector<std::string> CsvHeader(const TrainingConfig& config,
                                   const Env& env) {
  const AlgorithmKind kind = ParseAlgorithm(config.algorithm);
  const int n = env.NumAgents();
  const int m = env.NumConstraints();
  std::vector<std::string> cols = {"iteration", "steps", "reward_mean"};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      cols.push_back("cost_" + std::to_string(i) + "_" + std::to_string(j));
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      cols.push_back("disc_cost_" + std::to_string(i) + "_" +
                     std::to_string(j));
    }
  }
  for (int i = 0; i < n; ++i) cols.push_back("kl_" + std::to_string(i));
  if (UsesTrustRegion(kind)) {
    for (int i = 0; i < n; ++i)
      cols.push_back("ls_exp_" + std::to_string(i));
  }
  if (kind == AlgorithmKind::kMacpo) {
    for (int i = 0; i < n; ++i)
      cols.push_back("recovery_" + std::to_string(i));
  }
  if (kind == AlgorithmKind::kMappoLagrangian) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        cols.push_back("lambda_" + std::to_string(i) + "_" +
                       std::to_string(j));
      }
    }
  }
  cols.push_back("aborted");
  cols.push_back("eval_reward");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      cols.push_back("eval_cost_" + std::to_string(i) + "_" +
                     std::to_string(j));
    }
  }
  return cols;
}

namespace {

std::string CsvRow(const IterationLog& row, const TrainingConfig& config,
                   int n, int m) {
  const AlgorithmKind kind = ParseAlgorithm(config.algorithm);
  std::vector<std::string> cells;
  cells.push_back(std::to_string(row.iteration));
  cells.push_back(std::to_string(row.steps));
  cells.push_back(FormatG17(row.reward_mean));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      cells.push_back(FormatG17(row.cost_mean[i][j]));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      cells.push_back(FormatG17(row.disc_cost_mean[i][j]));
  for (int i = 0; i < n; ++i)
    cells.push_back(FormatG17(row.agents[i].kl));
  if (UsesTrustRegion(kind)) {
    for (int i = 0; i < n; ++i)
      cells.push_back(std::to_string(row.agents[i].exponent));
  }
  if (kind == AlgorithmKind::kMacpo) {
    for (int i = 0; i < n; ++i)
      cells.push_back(row.agents[i].recovery ? "1" : "0");
  }
  if (kind == AlgorithmKind::kMappoLagrangian) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        cells.push_back(FormatG17(row.lambda[i][j]));
  }
  cells.push_back(row.aborted ? "1" : "0");
  if (row.has_eval) {
    cells.push_back(FormatG17(row.eval.reward));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        cells.push_back(FormatG17(row.eval.cost[i][j]));
  } else {
    cells.push_back("");
    for (int i = 0; i < n * m; ++i) cells.push_back("");
  }
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ",";
    out += cells[i];
  }
  return out;
}

std::string Join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ",";
    out += parts[i];
  }
  return out;
}

}  // namespace

RunArtifacts RunTraining(const TrainingConfig& config,
                         const std::string& out_dir) {
  namespace fs = std::filesystem;
  config.Validate();
  fs::create_directories(out_dir);

  Trainer trainer(config);
  const int n = trainer.NumAgents();
  const int m = trainer.NumConstraints();
  const std::vector<std::string> header = CsvHeader(config, trainer.GetEnv());

  RunArtifacts art;
  art.out_dir = out_dir;
  art.manifest_path = (fs::path(out_dir) / "manifest.json").string();
  art.log_path = (fs::path(out_dir) / "log.csv").string();
  art.timing_path = (fs::path(out_dir) / "timing.csv").string();
  art.status_path = (fs::path(out_dir) / "status.json").string();

  // The manifest is complete before the first iteration and never touched
  // again; everything needed to replay the run is inside it.
  {
    nlohmann::json manifest;
    manifest["schema"] = "samarl.run.v1";
    manifest["code_version"] = SamarlVersion();
    manifest["seed"] = config.seed;
    manifest["started_at_unix"] = static_cast<long long>(std::time(nullptr));
    manifest["config"] = TrainingConfigToJson(config);
    manifest["columns"] = header;
    manifest["environment"] = {
        {"n_agents", n},
        {"n_constraints", m},
        {"global_obs_dim", trainer.GetEnv().GlobalObsDim()},
        {"discrete_actions", trainer.GetEnv().DiscreteActions()}};
    manifest["artifacts"] = {{"log", "log.csv"},
                             {"timing", "timing.csv"},
                             {"status", "status.json"}};
    std::ofstream f(art.manifest_path);
    SAMARL_CHECK_MSG(f.good(), "cannot write " << art.manifest_path);
    f << manifest.dump(2) << "\n";
  }

  std::ofstream log(art.log_path);
  SAMARL_CHECK_MSG(log.good(), "cannot write " << art.log_path);
  log << Join(header) << "\n";
  log.flush();
  std::ofstream timing(art.timing_path);
  timing << "iteration,seconds\n";

  const auto run_start = std::chrono::steady_clock::now();
  int aborted_rows = 0;
  for (int k = 0; k < config.iterations; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    IterationLog row = trainer.RunIteration();
    const bool last = k + 1 == config.iterations;
    const bool due = config.eval_interval > 0 &&
                     (k + 1) % config.eval_interval == 0;
    if (last || due) {
      row.eval = trainer.Evaluate(k);
      row.has_eval = true;
    }
    if (row.aborted) ++aborted_rows;
    log << CsvRow(row, config, n, m) << "\n";
    log.flush();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%d,%.6f", k, secs);
    timing << buf << "\n";
    timing.flush();

    const bool checkpoint_due =
        config.checkpoint_interval > 0 &&
        (k + 1) % config.checkpoint_interval == 0;
    if (last || checkpoint_due) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_%06d.json", k + 1);
      const std::string path = (fs::path(out_dir) / name).string();
      std::ofstream f(path);
      SAMARL_CHECK_MSG(f.good(), "cannot write " << path);
      f << trainer.CheckpointJson().dump(2) << "\n";
      art.checkpoint_paths.push_back(path);
    }
  }
  art.any_aborted = aborted_rows > 0;

  {
    nlohmann::json status;
    status["schema"] = "samarl.status.v1";
    status["completed"] = true;
    status["iterations"] = config.iterations;
    status["aborted_iterations"] = aborted_rows;
    status["finished_at_unix"] = static_cast<long long>(std::time(nullptr));
    status["wall_clock_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      run_start)
            .count();
    std::ofstream f(art.status_path);
    f << status.dump(2) << "\n";
  }
  return art;
}

}  // namespace samarl

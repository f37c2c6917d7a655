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

#include "samarl/policy.hpp"

#include <cmath>
#include <string>

#include "samarl/check.hpp"

namespace samarl {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

const Mlp& Net(const Policy& pi) {
  if (const auto* g = std::get_if<GaussianPolicy>(&pi)) return g->mean_net;
  return std::get<CategoricalPolicy>(pi).logit_net;
}

Mlp& Net(Policy& pi) {
  if (auto* g = std::get_if<GaussianPolicy>(&pi)) return g->mean_net;
  return std::get<CategoricalPolicy>(pi).logit_net;
}

void CheckStd(const GaussianPolicy& g) {
  SAMARL_CHECK_MSG(g.log_std.allFinite(),
                   "non-finite log-std (zero or invalid stddev)");
}

// Stable log-softmax of the logits.
Eigen::VectorXd LogSoftmax(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  const double lse = std::log((z.array() - m).exp().sum()) + m;
  return z.array() - lse;
}

int DiscreteIndex(const CategoricalPolicy& c, const Action& action) {
  SAMARL_CHECK_EQ(action.size(), 1);
  const int a = static_cast<int>(std::llround(action[0]));
  SAMARL_CHECK_GE(a, 0);
  SAMARL_CHECK_LT(a, c.logit_net.OutputDim());
  return a;
}

}  // namespace

GaussianPolicy MakeGaussianPolicy(int obs_dim, int act_dim,
                                  const std::vector<int>& hidden, Rng& rng,
                                  double final_gain, double init_std,
                                  double mean_scale) {
  SAMARL_CHECK_GT(init_std, 0.0);
  GaussianPolicy g;
  g.mean_net = MakeMlp(obs_dim, hidden, act_dim, final_gain, rng);
  g.log_std = Eigen::VectorXd::Constant(act_dim, std::log(init_std));
  g.mean_scale = mean_scale;
  return g;
}

CategoricalPolicy MakeCategoricalPolicy(int obs_dim, int n_actions,
                                        const std::vector<int>& hidden,
                                        Rng& rng, double final_gain) {
  SAMARL_CHECK_GE(n_actions, 1);
  CategoricalPolicy c;
  c.logit_net = MakeMlp(obs_dim, hidden, n_actions, final_gain, rng);
  return c;
}

Mlp MakeCritic(int obs_dim, const std::vector<int>& hidden, Rng& rng) {
  return MakeMlp(obs_dim, hidden, 1, 1.0, rng);
}

double CriticValue(const Mlp& critic, const Eigen::VectorXd& obs) {
  return MlpForward(critic, obs)[0];
}

int ObsDim(const Policy& pi) { return Net(pi).InputDim(); }

int ActionDim(const Policy& pi) {
  if (const auto* g = std::get_if<GaussianPolicy>(&pi))
    return g->mean_net.OutputDim();
  return 1;
}

bool IsDiscrete(const Policy& pi) {
  return std::holds_alternative<CategoricalPolicy>(pi);
}

int NumActions(const Policy& pi) {
  SAMARL_CHECK_MSG(IsDiscrete(pi), "NumActions on a continuous policy");
  return Net(pi).OutputDim();
}

int PolicyParamCount(const Policy& pi) {
  int n = MlpParamCount(Net(pi));
  if (const auto* g = std::get_if<GaussianPolicy>(&pi))
    n += static_cast<int>(g->log_std.size());
  return n;
}

Eigen::VectorXd FlattenPolicy(const Policy& pi) {
  Eigen::VectorXd flat(PolicyParamCount(pi));
  const Eigen::VectorXd net = FlattenMlp(Net(pi));
  flat.head(net.size()) = net;
  if (const auto* g = std::get_if<GaussianPolicy>(&pi))
    flat.tail(g->log_std.size()) = g->log_std;
  return flat;
}

void SetPolicyParams(Policy& pi, const Eigen::VectorXd& flat) {
  SAMARL_CHECK_EQ(flat.size(), PolicyParamCount(pi));
  Mlp& net = Net(pi);
  const int n = MlpParamCount(net);
  SetMlpParams(net, flat.head(n));
  if (auto* g = std::get_if<GaussianPolicy>(&pi))
    g->log_std = flat.tail(g->log_std.size());
}

Action SamplePolicyAction(const Policy& pi, const Eigen::VectorXd& obs,
                          Rng& rng) {
  if (const auto* g = std::get_if<GaussianPolicy>(&pi)) {
    CheckStd(*g);
    const Eigen::VectorXd mean = g->mean_scale * MlpForward(g->mean_net, obs);
    Action a(mean.size());
    for (int d = 0; d < mean.size(); ++d)
      a[d] = Normal(rng, mean[d], std::exp(g->log_std[d]));
    return a;
  }
  const auto& c = std::get<CategoricalPolicy>(pi);
  const Eigen::VectorXd ls = LogSoftmax(MlpForward(c.logit_net, obs));
  std::vector<double> probs(ls.size());
  for (int k = 0; k < ls.size(); ++k) probs[k] = std::exp(ls[k]);
  Action a(1);
  a[0] = static_cast<double>(SampleCategorical(probs, rng));
  return a;
}

Action PolicyModeAction(const Policy& pi, const Eigen::VectorXd& obs) {
  if (const auto* g = std::get_if<GaussianPolicy>(&pi))
    return g->mean_scale * MlpForward(g->mean_net, obs);
  const auto& c = std::get<CategoricalPolicy>(pi);
  const Eigen::VectorXd z = MlpForward(c.logit_net, obs);
  int best = 0;
  for (int k = 1; k < z.size(); ++k)
    if (z[k] > z[best]) best = k;
  Action a(1);
  a[0] = static_cast<double>(best);
  return a;
}

double PolicyLogProb(const Policy& pi, const Eigen::VectorXd& obs,
                     const Action& action) {
  if (const auto* g = std::get_if<GaussianPolicy>(&pi)) {
    CheckStd(*g);
    const Eigen::VectorXd mean = g->mean_scale * MlpForward(g->mean_net, obs);
    SAMARL_CHECK_EQ(action.size(), mean.size());
    double lp = -0.5 * static_cast<double>(mean.size()) * kLogTwoPi;
    for (int d = 0; d < mean.size(); ++d) {
      const double sd = std::exp(g->log_std[d]);
      const double z = (action[d] - mean[d]) / sd;
      lp += -0.5 * z * z - g->log_std[d];
    }
    SAMARL_CHECK_FINITE(lp);
    return lp;
  }
  const auto& c = std::get<CategoricalPolicy>(pi);
  const Eigen::VectorXd ls = LogSoftmax(MlpForward(c.logit_net, obs));
  return ls[DiscreteIndex(c, action)];
}

Eigen::VectorXd GradLogProb(const Policy& pi, const Eigen::VectorXd& obs,
                            const Action& action) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(PolicyParamCount(pi));
  if (const auto* g = std::get_if<GaussianPolicy>(&pi)) {
    CheckStd(*g);
    MlpActivations acts;
    const Eigen::VectorXd out = MlpForward(g->mean_net, obs, &acts);
    const Eigen::VectorXd mean = g->mean_scale * out;
    SAMARL_CHECK_EQ(action.size(), mean.size());
    Eigen::VectorXd d_out(mean.size());
    Eigen::VectorXd d_logstd(mean.size());
    for (int d = 0; d < mean.size(); ++d) {
      const double var = std::exp(2.0 * g->log_std[d]);
      const double diff = action[d] - mean[d];
      d_out[d] = g->mean_scale * diff / var;
      d_logstd[d] = diff * diff / var - 1.0;
    }
    const Eigen::VectorXd net = BackpropParams(g->mean_net, acts, d_out);
    grad.head(net.size()) = net;
    grad.tail(d_logstd.size()) = d_logstd;
    return grad;
  }
  const auto& c = std::get<CategoricalPolicy>(pi);
  MlpActivations acts;
  const Eigen::VectorXd z = MlpForward(c.logit_net, obs, &acts);
  const Eigen::VectorXd ls = LogSoftmax(z);
  const int a = DiscreteIndex(c, action);
  Eigen::VectorXd d_z = -ls.array().exp();
  d_z[a] += 1.0;
  grad = BackpropParams(c.logit_net, acts, d_z);
  return grad;
}

double PolicyEntropy(const Policy& pi, const Eigen::VectorXd& obs) {
  if (const auto* g = std::get_if<GaussianPolicy>(&pi)) {
    CheckStd(*g);
    (void)obs;
    return g->log_std.sum() +
           0.5 * static_cast<double>(g->log_std.size()) * (kLogTwoPi + 1.0);
  }
  const auto& c = std::get<CategoricalPolicy>(pi);
  const Eigen::VectorXd ls = LogSoftmax(MlpForward(c.logit_net, obs));
  double h = 0.0;
  for (int k = 0; k < ls.size(); ++k) h -= std::exp(ls[k]) * ls[k];
  return h;
}

double MeanKl(const Policy& pi_old, const Policy& pi_new,
              const std::vector<Eigen::VectorXd>& obs_batch) {
  SAMARL_CHECK(!obs_batch.empty());
  SAMARL_CHECK_EQ(PolicyParamCount(pi_old), PolicyParamCount(pi_new));
  double total = 0.0;
  if (const auto* go = std::get_if<GaussianPolicy>(&pi_old)) {
    const auto& gn = std::get<GaussianPolicy>(pi_new);
    CheckStd(*go);
    CheckStd(gn);
    for (const Eigen::VectorXd& obs : obs_batch) {
      const Eigen::VectorXd mo =
          go->mean_scale * MlpForward(go->mean_net, obs);
      const Eigen::VectorXd mn = gn.mean_scale * MlpForward(gn.mean_net, obs);
      double kl = 0.0;
      for (int d = 0; d < mo.size(); ++d) {
        const double vo = std::exp(2.0 * go->log_std[d]);
        const double vn = std::exp(2.0 * gn.log_std[d]);
        const double dm = mo[d] - mn[d];
        kl += gn.log_std[d] - go->log_std[d] +
              (vo + dm * dm) / (2.0 * vn) - 0.5;
      }
      total += kl;
    }
  } else {
    const auto& co = std::get<CategoricalPolicy>(pi_old);
    const auto& cn = std::get<CategoricalPolicy>(pi_new);
    for (const Eigen::VectorXd& obs : obs_batch) {
      const Eigen::VectorXd lo = LogSoftmax(MlpForward(co.logit_net, obs));
      const Eigen::VectorXd ln = LogSoftmax(MlpForward(cn.logit_net, obs));
      double kl = 0.0;
      for (int k = 0; k < lo.size(); ++k)
        kl += std::exp(lo[k]) * (lo[k] - ln[k]);
      total += std::max(kl, 0.0);
    }
  }
  const double mean = total / static_cast<double>(obs_batch.size());
  SAMARL_CHECK_FINITE(mean);
  return mean;
}

Eigen::VectorXd KlHessianVectorProduct(const Policy& pi,
                                       const std::vector<Eigen::VectorXd>&
                                           obs_batch,
                                       const Eigen::VectorXd& v,
                                       double damping) {
  SAMARL_CHECK(!obs_batch.empty());
  SAMARL_CHECK_EQ(v.size(), PolicyParamCount(pi));
  SAMARL_CHECK_GE(damping, 0.0);
  Eigen::VectorXd hv = Eigen::VectorXd::Zero(v.size());
  const double inv_b = 1.0 / static_cast<double>(obs_batch.size());

  if (const auto* g = std::get_if<GaussianPolicy>(&pi)) {
    CheckStd(*g);
    const int n_net = MlpParamCount(g->mean_net);
    const Eigen::VectorXd v_net = v.head(n_net);
    const Eigen::VectorXd inv_var = (-2.0 * g->log_std.array()).exp();
    for (const Eigen::VectorXd& obs : obs_batch) {
      MlpActivations acts;
      MlpForward(g->mean_net, obs, &acts);
      const Eigen::VectorXd jvp = ForwardTangent(g->mean_net, acts, v_net);
      // mean = scale * out, so the Gauss-Newton form picks up scale twice.
      const Eigen::VectorXd d_out =
          (g->mean_scale * g->mean_scale) *
          (jvp.array() * inv_var.array()).matrix();
      hv.head(n_net) += inv_b * BackpropParams(g->mean_net, acts, d_out);
    }
    // Curvature of the KL in the log-std block is exactly 2 per dimension
    // at the expansion point, independent of the observation.
    hv.tail(g->log_std.size()) = 2.0 * v.tail(g->log_std.size());
  } else {
    const auto& c = std::get<CategoricalPolicy>(pi);
    for (const Eigen::VectorXd& obs : obs_batch) {
      MlpActivations acts;
      const Eigen::VectorXd z = MlpForward(c.logit_net, obs, &acts);
      const Eigen::VectorXd p = LogSoftmax(z).array().exp();
      const Eigen::VectorXd jvp = ForwardTangent(c.logit_net, acts, v);
      const double pj = p.dot(jvp);
      const Eigen::VectorXd d_z =
          (p.array() * jvp.array()).matrix() - pj * p;
      hv += inv_b * BackpropParams(c.logit_net, acts, d_z);
    }
  }
  hv += damping * v;
  SAMARL_CHECK_MSG(hv.allFinite(), "non-finite curvature product");
  return hv;
}

nlohmann::json PolicyToJson(const Policy& pi) {
  nlohmann::json j;
  j["schema"] = "samarl.policy.v1";
  if (const auto* g = std::get_if<GaussianPolicy>(&pi)) {
    j["kind"] = "gaussian";
    j["net"] = MlpToJson(g->mean_net);
    j["log_std"] = std::vector<double>(
        g->log_std.data(), g->log_std.data() + g->log_std.size());
    j["mean_scale"] = g->mean_scale;
  } else {
    const auto& c = std::get<CategoricalPolicy>(pi);
    j["kind"] = "categorical";
    j["net"] = MlpToJson(c.logit_net);
  }
  return j;
}

Policy PolicyFromJson(const nlohmann::json& j) {
  SAMARL_CHECK_MSG(j.at("schema").get<std::string>() == "samarl.policy.v1",
                   "unknown policy schema");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") {
    GaussianPolicy g;
    g.mean_net = MlpFromJson(j.at("net"));
    const auto ls = j.at("log_std").get<std::vector<double>>();
    g.log_std = Eigen::Map<const Eigen::VectorXd>(
        ls.data(), static_cast<int>(ls.size()));
    g.mean_scale = j.at("mean_scale").get<double>();
    SAMARL_CHECK_EQ(g.log_std.size(), g.mean_net.OutputDim());
    return g;
  }
  SAMARL_CHECK_MSG(kind == "categorical", "unknown policy kind");
  CategoricalPolicy c;
  c.logit_net = MlpFromJson(j.at("net"));
  return c;
}

}  // namespace samarl

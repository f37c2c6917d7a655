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

#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"

#include "samarl/adam.hpp"
#include "samarl/check.hpp"
#include "samarl/mlp.hpp"
#include "samarl/obs_normalizer.hpp"
#include "samarl/policy.hpp"
#include "samarl/rng.hpp"

namespace samarl {
namespace {

Eigen::VectorXd RandomVec(int n, Rng& rng, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * Normal(rng);
  return v;
}

// Central-difference gradient of a scalar function of the flat policy
// parameters. Independent of the module's reverse mode.
template <typename F>
Eigen::VectorXd FdGrad(const Policy& pi, F f, double h) {
  const Eigen::VectorXd theta = FlattenPolicy(pi);
  Eigen::VectorXd g(theta.size());
  for (int i = 0; i < theta.size(); ++i) {
    Policy plus = pi;
    Policy minus = pi;
    Eigen::VectorXd tp = theta;
    Eigen::VectorXd tm = theta;
    tp[i] += h;
    tm[i] -= h;
    SetPolicyParams(plus, tp);
    SetPolicyParams(minus, tm);
    g[i] = (f(plus) - f(minus)) / (2.0 * h);
  }
  return g;
}

Policy RandomGaussian(int obs, int act, Rng& rng, double final_gain = 1.0) {
  Policy pi = MakeGaussianPolicy(obs, act, {5}, rng, final_gain, 0.7, 1.0);
  // Nonzero biases and log-stds so no coordinate is at a special point.
  auto& g = std::get<GaussianPolicy>(pi);
  for (auto& b : g.mean_net.b) b = RandomVec(static_cast<int>(b.size()), rng, 0.3);
  g.log_std = RandomVec(act, rng, 0.2);
  return pi;
}

Policy RandomCategorical(int obs, int n_actions, Rng& rng) {
  Policy pi = MakeCategoricalPolicy(obs, n_actions, {5}, rng, 1.0);
  auto& c = std::get<CategoricalPolicy>(pi);
  for (auto& b : c.logit_net.b) b = RandomVec(static_cast<int>(b.size()), rng, 0.3);
  return pi;
}

TEST_CASE("zero network maps every input to zero") {
  Rng rng(1);
  Mlp mlp = MakeMlp(3, {4}, 2, 0.01, rng);
  SetMlpParams(mlp, Eigen::VectorXd::Zero(MlpParamCount(mlp)));
  const Eigen::VectorXd out = MlpForward(mlp, RandomVec(3, rng));
  CHECK(out.norm() == 0.0);
}

TEST_CASE("mlp flatten round-trips exactly and ordering is layer-major") {
  Rng rng(2);
  Mlp mlp = MakeMlp(3, {4}, 2, 0.5, rng);
  const Eigen::VectorXd flat = FlattenMlp(mlp);
  CHECK(flat.size() == MlpParamCount(mlp));
  CHECK(flat.size() == 3 * 4 + 4 + 4 * 2 + 2);
  // First entries are row 0 of the first weight matrix.
  CHECK(flat[0] == mlp.w[0](0, 0));
  CHECK(flat[1] == mlp.w[0](0, 1));
  CHECK(flat[3 * 4] == mlp.b[0][0]);
  Mlp copy = mlp;
  SetMlpParams(copy, flat);
  CHECK((FlattenMlp(copy) - flat).norm() == 0.0);
}

TEST_CASE("orthogonal init has orthonormal columns scaled by the gain") {
  Rng rng(3);
  // Tall case: columns orthonormal.
  const Eigen::MatrixXd wt = OrthogonalMatrix(64, 4, std::sqrt(2.0), rng);
  const Eigen::MatrixXd gram_t = wt.transpose() * wt;
  CHECK((gram_t - 2.0 * Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-9);
  // Wide case: rows orthonormal.
  const Eigen::MatrixXd ww = OrthogonalMatrix(2, 64, 0.01, rng);
  const Eigen::MatrixXd gram_w = ww * ww.transpose();
  CHECK((gram_w - 1e-4 * Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("forward tangent matches finite differences of the forward pass") {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    Mlp mlp = MakeMlp(3, {6}, 2, 1.0, rng);
    for (auto& b : mlp.b) b = RandomVec(static_cast<int>(b.size()), rng, 0.3);
    const Eigen::VectorXd x = RandomVec(3, rng);
    const Eigen::VectorXd t = RandomVec(MlpParamCount(mlp), rng);
    MlpActivations acts;
    MlpForward(mlp, x, &acts);
    const Eigen::VectorXd jvp = ForwardTangent(mlp, acts, t);

    const double h = 1e-6;
    const Eigen::VectorXd theta = FlattenMlp(mlp);
    Mlp plus = mlp;
    Mlp minus = mlp;
    SetMlpParams(plus, theta + h * t);
    SetMlpParams(minus, theta - h * t);
    const Eigen::VectorXd fd =
        (MlpForward(plus, x) - MlpForward(minus, x)) / (2.0 * h);
    CHECK((jvp - fd).norm() < 1e-6 * (1.0 + fd.norm()));
  }
}

TEST_CASE("backprop matches finite differences of a scalar projection") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    Mlp mlp = MakeMlp(4, {6}, 3, 1.0, rng);
    for (auto& b : mlp.b) b = RandomVec(static_cast<int>(b.size()), rng, 0.3);
    const Eigen::VectorXd x = RandomVec(4, rng);
    const Eigen::VectorXd d = RandomVec(3, rng);
    MlpActivations acts;
    MlpForward(mlp, x, &acts);
    const Eigen::VectorXd grad = BackpropParams(mlp, acts, d);

    const double h = 1e-5;
    const Eigen::VectorXd theta = FlattenMlp(mlp);
    Eigen::VectorXd fd(theta.size());
    for (int i = 0; i < theta.size(); ++i) {
      Mlp plus = mlp;
      Mlp minus = mlp;
      Eigen::VectorXd tp = theta;
      Eigen::VectorXd tm = theta;
      tp[i] += h;
      tm[i] -= h;
      SetMlpParams(plus, tp);
      SetMlpParams(minus, tm);
      fd[i] = (d.dot(MlpForward(plus, x)) - d.dot(MlpForward(minus, x))) /
              (2.0 * h);
    }
    CHECK((grad - fd).norm() < 1e-4 * (1.0 + fd.norm()));
  }
}

TEST_CASE("poisoned parameters are rejected at the forward pass") {
  Rng rng(6);
  Mlp mlp = MakeMlp(3, {4}, 2, 1.0, rng);
  mlp.w[0](1, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(MlpForward(mlp, Eigen::VectorXd::Zero(3)), CheckError);
}

TEST_CASE("log-prob of the mean action of a unit-std Gaussian is closed form") {
  Rng rng(7);
  for (int d = 1; d <= 4; ++d) {
    Policy pi = MakeGaussianPolicy(3, d, {4}, rng, 0.01, 1.0, 1.0);
    const Eigen::VectorXd obs = RandomVec(3, rng);
    const Action mean = PolicyModeAction(pi, obs);
    const double lp = PolicyLogProb(pi, obs, mean);
    CHECK(lp == doctest::Approx(-0.5 * d * std::log(2.0 * M_PI))
                    .epsilon(1e-12));
  }
}

TEST_CASE("one-dimensional density integrates to one on a fine grid") {
  Rng rng(8);
  Policy pi = RandomGaussian(2, 1, rng);
  const Eigen::VectorXd obs = RandomVec(2, rng);
  const double mu = PolicyModeAction(pi, obs)[0];
  const double sd = std::exp(std::get<GaussianPolicy>(pi).log_std[0]);
  const double lo = mu - 8.0 * sd;
  const double hi = mu + 8.0 * sd;
  const int n = 20000;
  const double dx = (hi - lo) / n;
  double integral = 0.0;
  for (int i = 0; i <= n; ++i) {
    Action a(1);
    a[0] = lo + i * dx;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    integral += w * std::exp(PolicyLogProb(pi, obs, a)) * dx;
  }
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("categorical probabilities sum to one and one action is degenerate") {
  Rng rng(9);
  Policy pi = RandomCategorical(3, 5, rng);
  const Eigen::VectorXd obs = RandomVec(3, rng);
  double total = 0.0;
  for (int a = 0; a < 5; ++a) {
    Action act(1);
    act[0] = a;
    total += std::exp(PolicyLogProb(pi, obs, act));
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  Policy one = MakeCategoricalPolicy(3, 1, {4}, rng, 1.0);
  Action only(1);
  only[0] = 0;
  CHECK(PolicyLogProb(one, obs, only) == 0.0);
  CHECK(GradLogProb(one, obs, only).norm() == 0.0);
}

TEST_CASE("grad log-prob matches finite differences on random nets") {
  Rng rng(10);
  for (int rep = 0; rep < 20; ++rep) {
    const bool discrete = rep % 2 == 1;
    Policy pi = discrete ? RandomCategorical(3, 4, rng)
                         : RandomGaussian(3, 2, rng);
    const Eigen::VectorXd obs = RandomVec(3, rng);
    Action a;
    if (discrete) {
      a = Action(1);
      a[0] = rep % 4;
    } else {
      a = RandomVec(2, rng);
    }
    const Eigen::VectorXd grad = GradLogProb(pi, obs, a);
    const Eigen::VectorXd fd = FdGrad(
        pi, [&](const Policy& p) { return PolicyLogProb(p, obs, a); }, 1e-5);
    CHECK((grad - fd).norm() < 1e-4 * (1.0 + fd.norm()));
  }
}

TEST_CASE("score function averages to zero over samples") {
  Rng rng(11);
  Policy pi = RandomGaussian(2, 2, rng);
  const Eigen::VectorXd obs = RandomVec(2, rng);
  const int n = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(PolicyParamCount(pi));
  Eigen::VectorXd sum_sq = sum;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd g = GradLogProb(pi, obs, SamplePolicyAction(pi, obs, rng));
    sum += g;
    sum_sq += g.cwiseProduct(g);
  }
  const Eigen::VectorXd mean = sum / n;
  for (int i = 0; i < mean.size(); ++i) {
    const double var = sum_sq[i] / n - mean[i] * mean[i];
    const double sem = std::sqrt(std::max(var, 0.0) / n);
    CHECK(std::abs(mean[i]) <= 3.0 * sem + 1e-12);
  }
}

TEST_CASE("kl of identical policies is zero and shifted means give the closed form") {
  Rng rng(12);
  Policy pi = RandomGaussian(3, 2, rng);
  std::vector<Eigen::VectorXd> batch;
  for (int i = 0; i < 7; ++i) batch.push_back(RandomVec(3, rng));
  CHECK(MeanKl(pi, pi, batch) == 0.0);

  // N(0,1) against N(1,1): KL = 1/2.
  Policy p0 = MakeGaussianPolicy(2, 1, {3}, rng, 0.01, 1.0, 1.0);
  SetPolicyParams(p0, Eigen::VectorXd::Zero(PolicyParamCount(p0)));
  Policy p1 = p0;
  Eigen::VectorXd theta = FlattenPolicy(p1);
  // Last network parameter before log-std is the output bias.
  theta[theta.size() - 2] = 1.0;
  SetPolicyParams(p1, theta);
  std::vector<Eigen::VectorXd> obs = {RandomVec(2, rng)};
  CHECK(MeanKl(p0, p1, obs) == doctest::Approx(0.5).epsilon(1e-12));

  Policy cat = RandomCategorical(3, 4, rng);
  CHECK(MeanKl(cat, cat, batch) == 0.0);
}

TEST_CASE("kl matches a Monte Carlo estimate") {
  Rng rng(13);
  Policy po = RandomGaussian(2, 1, rng);
  Policy pn = RandomGaussian(2, 1, rng);
  std::vector<Eigen::VectorXd> obs = {RandomVec(2, rng)};
  const double kl = MeanKl(po, pn, obs);
  const int n = 1000000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const Action a = SamplePolicyAction(po, obs[0], rng);
    const double d =
        PolicyLogProb(po, obs[0], a) - PolicyLogProb(pn, obs[0], a);
    sum += d;
    sum_sq += d * d;
  }
  const double mc = sum / n;
  const double sem =
      std::sqrt(std::max(sum_sq / n - mc * mc, 0.0) / n);
  CHECK(std::abs(kl - mc) <= 3.0 * sem + 1e-9);
}

TEST_CASE("kl is nonnegative across random pairs") {
  Rng rng(14);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<Eigen::VectorXd> batch;
    for (int i = 0; i < 5; ++i) batch.push_back(RandomVec(3, rng));
    if (rep % 2 == 0) {
      Policy a = RandomGaussian(3, 2, rng);
      Policy b = RandomGaussian(3, 2, rng);
      CHECK(MeanKl(a, b, batch) >= 0.0);
    } else {
      Policy a = RandomCategorical(3, 4, rng);
      Policy b = RandomCategorical(3, 4, rng);
      CHECK(MeanKl(a, b, batch) >= 0.0);
    }
  }
}

TEST_CASE("zero std is rejected") {
  Rng rng(15);
  Policy pi = RandomGaussian(2, 1, rng);
  std::get<GaussianPolicy>(pi).log_std[0] =
      -std::numeric_limits<double>::infinity();
  std::vector<Eigen::VectorXd> batch = {RandomVec(2, rng)};
  CHECK_THROWS_AS(MeanKl(pi, pi, batch), CheckError);
  CHECK_THROWS_AS(PolicyLogProb(pi, batch[0], Eigen::VectorXd::Zero(1)),
                  CheckError);
}

TEST_CASE("curvature product of the zero vector is zero") {
  Rng rng(16);
  Policy pi = RandomGaussian(3, 2, rng);
  std::vector<Eigen::VectorXd> batch = {RandomVec(3, rng)};
  const Eigen::VectorXd hv = KlHessianVectorProduct(
      pi, batch, Eigen::VectorXd::Zero(PolicyParamCount(pi)), 1e-2);
  CHECK(hv.norm() == 0.0);
}

TEST_CASE("curvature product matches the finite-difference kl Hessian") {
  Rng rng(17);
  for (int rep = 0; rep < 6; ++rep) {
    const bool discrete = rep % 2 == 1;
    Policy pi = discrete ? RandomCategorical(3, 4, rng)
                         : RandomGaussian(3, 2, rng);
    std::vector<Eigen::VectorXd> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(RandomVec(3, rng));
    const int n = PolicyParamCount(pi);
    const Eigen::VectorXd v = RandomVec(n, rng);
    const Eigen::VectorXd hv = KlHessianVectorProduct(pi, batch, v, 0.0);

    // Two-gradient formula: g(theta + hv) - g(theta - hv) over 2h, where
    // each g is itself a central-difference gradient of the scalar KL.
    const double h = 1e-4;
    const Eigen::VectorXd theta = FlattenPolicy(pi);
    auto kl_grad_at = [&](const Eigen::VectorXd& point) {
      Policy shifted = pi;
      SetPolicyParams(shifted, point);
      return FdGrad(
          shifted,
          [&](const Policy& p) { return MeanKl(pi, p, batch); }, 1e-5);
    };
    const Eigen::VectorXd fd =
        (kl_grad_at(theta + h * v) - kl_grad_at(theta - h * v)) / (2.0 * h);
    CHECK((hv - fd).norm() < 1e-3 * (1.0 + fd.norm()));
  }
}

TEST_CASE("curvature is positive semidefinite") {
  Rng rng(18);
  Policy pi = RandomGaussian(3, 2, rng);
  Policy cat = RandomCategorical(3, 4, rng);
  std::vector<Eigen::VectorXd> batch;
  for (int i = 0; i < 5; ++i) batch.push_back(RandomVec(3, rng));
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::VectorXd vg = RandomVec(PolicyParamCount(pi), rng);
    CHECK(vg.dot(KlHessianVectorProduct(pi, batch, vg, 0.0)) >= -1e-12);
    const Eigen::VectorXd vc = RandomVec(PolicyParamCount(cat), rng);
    CHECK(vc.dot(KlHessianVectorProduct(cat, batch, vc, 0.0)) >= -1e-12);
  }
}

TEST_CASE("damping adds exactly damping times the vector") {
  Rng rng(19);
  Policy pi = RandomGaussian(3, 2, rng);
  std::vector<Eigen::VectorXd> batch = {RandomVec(3, rng)};
  const Eigen::VectorXd v = RandomVec(PolicyParamCount(pi), rng);
  const Eigen::VectorXd bare = KlHessianVectorProduct(pi, batch, v, 0.0);
  const Eigen::VectorXd damped = KlHessianVectorProduct(pi, batch, v, 0.1);
  CHECK((damped - bare - 0.1 * v).norm() < 1e-12);
}

TEST_CASE("policy flatten round-trips and checkpoints restore the policy") {
  Rng rng(20);
  Policy pi = RandomGaussian(4, 2, rng);
  const Eigen::VectorXd flat = FlattenPolicy(pi);
  Policy copy = pi;
  SetPolicyParams(copy, flat);
  CHECK((FlattenPolicy(copy) - flat).norm() == 0.0);

  const nlohmann::json blob = PolicyToJson(pi);
  Policy restored = PolicyFromJson(blob);
  CHECK((FlattenPolicy(restored) - flat).norm() == 0.0);
  CHECK(std::get<GaussianPolicy>(restored).mean_scale ==
        std::get<GaussianPolicy>(pi).mean_scale);

  Policy cat = RandomCategorical(3, 4, rng);
  Policy cat_restored = PolicyFromJson(PolicyToJson(cat));
  CHECK((FlattenPolicy(cat_restored) - FlattenPolicy(cat)).norm() == 0.0);

  nlohmann::json bad = blob;
  bad["schema"] = "samarl.policy.v999";
  CHECK_THROWS_AS(PolicyFromJson(bad), CheckError);
}

TEST_CASE("sampling is seed deterministic and has the declared moments") {
  Rng rng(21);
  Policy pi = RandomGaussian(2, 2, rng);
  const Eigen::VectorXd obs = RandomVec(2, rng);
  Rng a(99);
  Rng b(99);
  for (int i = 0; i < 10; ++i)
    CHECK((SamplePolicyAction(pi, obs, a) - SamplePolicyAction(pi, obs, b))
              .norm() == 0.0);

  const Eigen::VectorXd mean = PolicyModeAction(pi, obs);
  const Eigen::VectorXd sd =
      std::get<GaussianPolicy>(pi).log_std.array().exp();
  const int n = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd sum_sq = sum;
  for (int i = 0; i < n; ++i) {
    const Action s = SamplePolicyAction(pi, obs, rng);
    sum += s;
    sum_sq += s.cwiseProduct(s);
  }
  for (int d = 0; d < 2; ++d) {
    const double m = sum[d] / n;
    const double v = sum_sq[d] / n - m * m;
    CHECK(std::abs(m - mean[d]) <= 3.0 * sd[d] / std::sqrt(n));
    CHECK(std::abs(std::sqrt(v) - sd[d]) <= 0.02 * sd[d]);
  }
}

TEST_CASE("entropy matches closed form and sampling") {
  Rng rng(22);
  Policy pi = RandomGaussian(2, 2, rng);
  const Eigen::VectorXd obs = RandomVec(2, rng);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    sum -= PolicyLogProb(pi, obs, SamplePolicyAction(pi, obs, rng));
  CHECK(PolicyEntropy(pi, obs) == doctest::Approx(sum / n).epsilon(0.02));

  Policy cat = MakeCategoricalPolicy(3, 4, {4}, rng, 1.0);
  SetPolicyParams(cat, Eigen::VectorXd::Zero(PolicyParamCount(cat)));
  CHECK(PolicyEntropy(cat, obs.head(3)) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("adam takes a signed first step and solves a quadratic") {
  // First step with fresh moments is lr * g / (|g| + eps) per coordinate.
  Eigen::VectorXd params = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd grad(2);
  grad << 3.0, -0.25;
  Adam opt(2, 0.1);
  opt.Step(params, grad);
  for (int i = 0; i < 2; ++i)
    CHECK(params[i] == doctest::Approx(-0.1 * grad[i] /
                                       (std::abs(grad[i]) + opt.eps))
                           .epsilon(1e-12));

  Eigen::VectorXd x(3);
  x << 5.0, -3.0, 2.0;
  Eigen::VectorXd target(3);
  target << 1.0, 2.0, -0.5;
  Adam solver(3, 0.05);
  for (int it = 0; it < 2000; ++it) {
    Eigen::VectorXd g = x - target;
    solver.Step(x, g);
  }
  CHECK((x - target).norm() < 1e-4);
}

TEST_CASE("global norm clip rescales only oversized gradients") {
  Eigen::VectorXd g(2);
  g << 3.0, 4.0;
  Eigen::VectorXd small = 0.1 * g;
  CHECK(ClipByGlobalNorm(g, 2.5) == doctest::Approx(5.0));
  CHECK(g.norm() == doctest::Approx(2.5));
  CHECK(ClipByGlobalNorm(small, 2.5) == doctest::Approx(0.5));
  CHECK(small.norm() == doctest::Approx(0.5));
}

TEST_CASE("observation normalizer matches a two-pass oracle") {
  Rng rng(23);
  ObsNormalizer norm(3);
  std::vector<Eigen::VectorXd> data;
  for (int i = 0; i < 500; ++i) {
    Eigen::VectorXd x = RandomVec(3, rng, 2.0);
    x[1] += 7.0;
    data.push_back(x);
    norm.Update(x);
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
  for (const auto& x : data) mean += x;
  mean /= data.size();
  Eigen::VectorXd var = Eigen::VectorXd::Zero(3);
  for (const auto& x : data) var += (x - mean).cwiseAbs2();
  var /= data.size();
  CHECK((norm.mean - mean).norm() < 1e-10);
  CHECK((norm.Std().cwiseAbs2() - var).norm() < 1e-6);

  // Reading never mutates, so held-out evaluation sees frozen statistics.
  const ObsNormalizer frozen = norm;
  const Eigen::VectorXd z = frozen.Normalize(data[0]);
  CHECK(z.allFinite());
  CHECK(z.cwiseAbs().maxCoeff() <= frozen.clip);
  CHECK((frozen.mean - norm.mean).norm() == 0.0);

  const ObsNormalizer restored = ObsNormalizer::FromJson(norm.ToJson());
  CHECK((restored.Normalize(data[7]) - norm.Normalize(data[7])).norm() ==
        0.0);
}

}  // namespace
}  // namespace samarl

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

#include "samarl/safe_policy_iteration.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "doctest.h"
#include "samarl/check.hpp"

namespace samarl {
namespace {

// Rewrites the budgets so that pi is strictly feasible with the given slack
// on every constraint.
TabularCMG WithFeasibleBounds(TabularCMG game, const JointPolicy& pi,
                              double slack) {
  const ValueTables values = ExactValues(game, pi);
  for (int i = 0; i < game.n_agents(); ++i)
    for (int j = 0; j < game.n_costs(i); ++j)
      game.cost_bounds[i][j] = ExpectedTotalCost(game, values, i, j) + slack;
  return game;
}

struct SweepState {
  ValueTables values;
  OccupancyMeasure occ;
  PenaltyCoefficients nu;
  std::vector<std::vector<double>> j_costs;
};

SweepState Analyze(const TabularCMG& game, const JointPolicy& pi) {
  SweepState st{ExactValues(game, pi), Occupancy(game, pi), {}, {}};
  st.nu = ComputePenaltyCoefficients(game, st.values);
  st.j_costs.resize(game.n_agents());
  for (int i = 0; i < game.n_agents(); ++i) {
    st.j_costs[i].resize(game.n_costs(i));
    for (int j = 0; j < game.n_costs(i); ++j)
      st.j_costs[i][j] = ExpectedTotalCost(game, st.values, i, j);
  }
  return st;
}

SweepContext MakeContext(const TabularCMG& game, const JointPolicy& pi,
                         const SweepState& st, std::vector<int> order) {
  SweepContext ctx;
  ctx.game = &game;
  ctx.pi_k = &pi;
  ctx.values = &st.values;
  ctx.occ = &st.occ;
  ctx.nu = &st.nu;
  ctx.j_costs = st.j_costs;
  ctx.order = std::move(order);
  return ctx;
}

TEST_CASE("penalty coefficients: zero advantages and exact scaling") {
  TabularCMG g;
  g.n_states = 1;
  g.action_counts = {1, 1};
  g.gamma = 0.9;
  g.initial_dist = {1.0};
  g.transition = {{{1.0}}};
  g.reward = {{2.0}};
  g.costs = {{{{0.5}}}, {{{0.5}}}};
  g.cost_bounds = {{10.0}, {10.0}};
  g.Validate();
  const ValueTables values = ExactValues(g, UniformJointPolicy(g));
  const PenaltyCoefficients nu = ComputePenaltyCoefficients(g, values);
  CHECK(nu.nu_reward == 0.0);
  CHECK(nu.nu_cost[0][0] == 0.0);

  // 4 gamma / (1-gamma)^2 at gamma = 0.99 is 39600 per unit of advantage.
  const TabularCMG g99 = RandomTabularCMG(4, 2, 2, 1, 7, 0.99);
  Rng rng(8);
  const JointPolicy pi = RandomJointPolicy(g99, rng);
  const ValueTables v99 = ExactValues(g99, pi);
  const PenaltyCoefficients nu99 = ComputePenaltyCoefficients(g99, v99);
  CHECK(nu99.nu_reward ==
        doctest::Approx(39600.0 * MaxAbsRewardAdvantage(v99)).epsilon(1e-12));
  CHECK(nu99.nu_cost[1][0] ==
        doctest::Approx(39600.0 * MaxAbsCostAdvantage(v99, 1, 0))
            .epsilon(1e-12));
}

TEST_CASE("penalty coefficients match a brute-force scan") {
  const TabularCMG g = RandomTabularCMG(5, 2, 3, 2, 21);
  Rng rng(22);
  const JointPolicy pi = RandomJointPolicy(g, rng);
  const ValueTables values = ExactValues(g, pi);
  const PenaltyCoefficients nu = ComputePenaltyCoefficients(g, values);

  double max_adv = 0.0;
  for (int s = 0; s < g.n_states; ++s)
    for (int a = 0; a < g.joint_action_count(); ++a)
      max_adv = std::max(max_adv, std::fabs(values.q(s, a) - values.v(s)));
  const double scale = 4.0 * g.gamma / ((1 - g.gamma) * (1 - g.gamma));
  CHECK(nu.nu_reward == doctest::Approx(scale * max_adv).epsilon(1e-12));

  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      double m = 0.0;
      for (int s = 0; s < g.n_states; ++s)
        for (int a = 0; a < g.action_counts[i]; ++a)
          m = std::max(m, std::fabs(values.cost_q[i][j](s, a) -
                                    values.cost_v[i][j](s)));
      CHECK(nu.nu_cost[i][j] == doctest::Approx(scale * m).epsilon(1e-12));
    }
  }
}

TEST_CASE("safe radius: nonnegative at a feasible start, plug-in slack") {
  Rng rng(31);
  TabularCMG g = RandomTabularCMG(4, 3, 2, 1, 31);
  const JointPolicy pi = UniformJointPolicy(g);
  const double slack = 2.0;
  g = WithFeasibleBounds(g, pi, slack);
  const SweepState st = Analyze(g, pi);
  SweepContext ctx = MakeContext(g, pi, st, {0, 1, 2});

  const double delta0 = SafeRadius(ctx, 0);
  CHECK(delta0 >= 0.0);

  // With uniform slack and no committed updates the radius is the smallest
  // slack/nu over the other agents' constraints.
  double expect = std::numeric_limits<double>::infinity();
  for (int l : {1, 2}) expect = std::min(expect, slack / st.nu.nu_cost[l][0]);
  CHECK(delta0 == doctest::Approx(expect).epsilon(1e-12));

  // Tightening one other agent's budget can only shrink the radius.
  TabularCMG tighter = g;
  tighter.cost_bounds[1][0] -= 1.5;
  SweepContext ctx2 = MakeContext(tighter, pi, st, {0, 1, 2});
  CHECK(SafeRadius(ctx2, 0) <= delta0 + 1e-15);
}

TEST_CASE("safe radius accounts for committed updates") {
  Rng rng(35);
  TabularCMG g = RandomTabularCMG(3, 2, 2, 1, 35);
  const JointPolicy pi = UniformJointPolicy(g);
  g = WithFeasibleBounds(g, pi, 1.0);
  const SweepState st = Analyze(g, pi);
  SweepContext ctx = MakeContext(g, pi, st, {0, 1});

  // Pretend position 0 spent some KL with a positive cost surrogate; the
  // radius at position 1 must shrink relative to a no-op commitment.
  ctx.kl_by_position = {0.0};
  ctx.cost_surrogate_by_position = {{0.0}};
  ctx.updated_agents = {0};
  ctx.updated_policies = {pi.agents[0]};
  const double fresh = SafeRadius(ctx, 1);
  ctx.kl_by_position = {0.01};
  ctx.cost_surrogate_by_position = {{0.2}};
  ctx.updated_agents = {0};
  ctx.updated_policies = {pi.agents[0]};
  const double spent = SafeRadius(ctx, 1);
  CHECK(spent < fresh);
  const double nu0 = st.nu.nu_cost[0][0];
  const double slack0 = g.cost_bounds[0][0] - st.j_costs[0][0];
  CHECK(spent ==
        doctest::Approx((slack0 - 0.2 - nu0 * 0.01) / nu0).epsilon(1e-10));
}

TEST_CASE("membership: incumbent passes, oversized KL fails, random audit") {
  Rng rng(41);
  TabularCMG g = RandomTabularCMG(4, 2, 3, 1, 41);
  const JointPolicy pi = RandomJointPolicy(g, rng);
  g = WithFeasibleBounds(g, pi, 1.0);
  const SweepState st = Analyze(g, pi);
  SweepContext ctx = MakeContext(g, pi, st, {1, 0});
  const SpiConfig config;

  const double delta = SafeRadius(ctx, 0);
  CHECK(FeasibleSetMembership(ctx, 0, pi.agents[1], delta, config));

  // A candidate beyond the radius is rejected outright.
  const JointPolicy other = RandomJointPolicy(g, rng);
  const double kl = MaxKl(pi.agents[1], other.agents[1]);
  if (kl > 1e-6)
    CHECK_FALSE(
        FeasibleSetMembership(ctx, 0, other.agents[1], kl * 0.5, config));

  // Verdicts agree with an independent evaluation of both inequalities.
  for (int trial = 0; trial < 30; ++trial) {
    const JointPolicy cand = RandomJointPolicy(g, rng);
    const bool got =
        FeasibleSetMembership(ctx, 0, cand.agents[1], delta, config);
    const double cand_kl = MaxKl(pi.agents[1], cand.agents[1]);
    bool expect = cand_kl <= delta + config.tol.membership_slack;
    if (expect) {
      const double l_cost = SurrogateCost(g, pi, 1, 0, cand.agents[1]);
      const double lhs =
          st.j_costs[1][0] + l_cost + st.nu.nu_cost[1][0] * cand_kl;
      expect = lhs <= g.cost_bounds[1][0] + config.tol.membership_slack;
    }
    CHECK(got == expect);
  }
}

TEST_CASE("inner maximization: degenerate game keeps the incumbent") {
  // Constant reward: every advantage is zero and there is nothing to gain.
  TabularCMG g = RandomTabularCMG(3, 2, 2, 1, 51);
  for (auto& row : g.reward)
    for (double& r : row) r = 1.0;
  const JointPolicy pi = UniformJointPolicy(g);
  TabularCMG gf = WithFeasibleBounds(g, pi, 1.0);
  const SweepState st = Analyze(gf, pi);
  SweepContext ctx = MakeContext(gf, pi, st, {0, 1});
  const InnerMaximizeResult res =
      InnerMaximize(ctx, 0, SafeRadius(ctx, 0), SpiConfig{});
  CHECK_FALSE(res.moved);
  CHECK(res.penalized_gain == 0.0);
  CHECK(res.kl == 0.0);
}

TEST_CASE("inner maximization beats the incumbent and stays in the set") {
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TabularCMG raw =
        RandomTabularCMG(3 + seed % 3, 2 + seed % 2, 2, 1, 600 + seed);
    Rng rng(700 + seed);
    const JointPolicy pi = RandomJointPolicy(raw, rng);
    const TabularCMG g = WithFeasibleBounds(raw, pi, 0.5 + (seed % 5) * 0.3);
    const SweepState st = Analyze(g, pi);
    Rng prng(seed);
    const AgentPermutation perm = DrawPermutation(g.n_agents(), prng);
    SweepContext ctx = MakeContext(g, pi, st, perm.order);
    const SpiConfig config;

    const double delta = SafeRadius(ctx, 0);
    const InnerMaximizeResult res = InnerMaximize(ctx, 0, delta, config);
    CHECK(res.penalized_gain >= 0.0);
    if (res.moved) ++improved;
    CHECK(FeasibleSetMembership(ctx, 0, res.policy, std::max(delta, 0.0),
                                config));

    // The reported penalized gain is reproducible from the oracle.
    const double l = SurrogateReturn(g, pi, {}, {}, ctx.order[0], res.policy);
    const double f = l - st.nu.nu_reward * MaxKl(pi.agents[ctx.order[0]],
                                                 res.policy);
    const double l_inc =
        SurrogateReturn(g, pi, {}, {}, ctx.order[0],
                        pi.agents[ctx.order[0]]);
    CHECK(std::fabs(res.penalized_gain - (f - l_inc)) <= 1e-9);
  }
  // The search must actually move on a decent share of random games.
  CHECK(improved >= 30);
}

TEST_CASE("safe iteration: zero iterations echoes the start policy") {
  const TabularCMG g = RandomTabularCMG(3, 2, 2, 1, 61);
  const JointPolicy pi = UniformJointPolicy(g);
  Rng rng(62);
  const SafeIterationResult res = SafeIteration(g, pi, 0, rng);
  CHECK(res.certificates.empty());
  for (int i = 0; i < g.n_agents(); ++i)
    CHECK(res.policy.agents[i].prob == pi.agents[i].prob);
}

TEST_CASE("safe iteration: monotone return and safe iterates") {
  int strict_gain = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const TabularCMG raw =
        RandomTabularCMG(4 + seed % 3, 2 + seed % 2, 2, 1, 800 + seed);
    const JointPolicy pi0 = UniformJointPolicy(raw);
    const TabularCMG g = WithFeasibleBounds(raw, pi0, 0.8);
    Rng rng(900 + seed);
    const SafeIterationResult res = SafeIteration(g, pi0, 10, rng);
    const CertificateCheckReport report = VerifyCertificates(res.certificates);
    for (const auto& v : report.violations) MESSAGE(v);
    CHECK(report.ok);
    CHECK(report.first_feasible_iteration == 0);
    if (res.certificates.back().j_reward_after >
        res.certificates.front().j_reward_before + 1e-6)
      ++strict_gain;
  }
  CHECK(strict_gain >= 6);
}

TEST_CASE("safe iteration with unbounded budgets is plain ascent") {
  // Budgets far above any reachable total cost make every policy feasible,
  // so the sweep degenerates to penalized ascent. Bounds stay finite
  // because the game type requires that.
  TabularCMG g = RandomTabularCMG(4, 2, 2, 1, 71);
  for (auto& per_agent : g.cost_bounds)
    for (double& b : per_agent) b = 1e9;
  const JointPolicy pi0 = UniformJointPolicy(g);
  Rng rng(72);
  const SafeIterationResult res = SafeIteration(g, pi0, 8, rng);
  const CertificateCheckReport report = VerifyCertificates(res.certificates);
  CHECK(report.ok);
  CHECK(res.certificates.back().j_reward_after >=
        res.certificates.front().j_reward_before - 1e-9);
}

TEST_CASE("mid-sweep partial policies never break other agents' budgets") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const TabularCMG raw = RandomTabularCMG(4, 3, 2, 1, 1000 + seed);
    Rng prng(1100 + seed);
    const JointPolicy pi = RandomJointPolicy(raw, prng);
    const TabularCMG g = WithFeasibleBounds(raw, pi, 0.6);
    const SweepState st = Analyze(g, pi);
    const AgentPermutation perm = DrawPermutation(g.n_agents(), prng);
    SweepContext ctx = MakeContext(g, pi, st, perm.order);
    const SpiConfig config;

    JointPolicy partial = pi;
    for (int h = 0; h < g.n_agents(); ++h) {
      const double delta = SafeRadius(ctx, h);
      const InnerMaximizeResult step = InnerMaximize(ctx, h, delta, config);
      ctx.kl_by_position.push_back(step.kl);
      ctx.cost_surrogate_by_position.push_back(step.cost_surrogates);
      ctx.updated_agents.push_back(ctx.order[h]);
      ctx.updated_policies.push_back(step.policy);
      partial.agents[ctx.order[h]] = step.policy;

      const ValueTables values = ExactValues(g, partial);
      for (int l = 0; l < g.n_agents(); ++l)
        for (int j = 0; j < g.n_costs(l); ++j)
          CHECK(ExpectedTotalCost(g, values, l, j) <=
                g.cost_bounds[l][j] + 1e-9);
    }
  }
}

TEST_CASE("infeasible start: flagged, repaired, then kept safe") {
  // Squeeze the budgets below the start policy's cost so recovery must run.
  int repaired = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TabularCMG g = RandomTabularCMG(4, 2, 2, 1, 1200 + seed);
    const JointPolicy pi0 = UniformJointPolicy(g);
    const ValueTables values = ExactValues(g, pi0);
    for (int i = 0; i < g.n_agents(); ++i)
      g.cost_bounds[i][0] = ExpectedTotalCost(g, values, i, 0) - 0.05;
    Rng rng(1300 + seed);
    const SafeIterationResult res = SafeIteration(g, pi0, 12, rng);
    CHECK_FALSE(res.certificates.front().feasible_before);
    const CertificateCheckReport report = VerifyCertificates(res.certificates);
    for (const auto& v : report.violations) MESSAGE(v);
    CHECK(report.ok);  // vacuously ok if never feasible, binding afterwards
    if (report.first_feasible_iteration >= 0) ++repaired;
  }
  CHECK(repaired >= 3);
}

TEST_CASE("certificates round trip through JSONL") {
  const TabularCMG raw = RandomTabularCMG(3, 2, 2, 1, 81);
  const JointPolicy pi0 = UniformJointPolicy(raw);
  const TabularCMG g = WithFeasibleBounds(raw, pi0, 0.5);
  Rng rng(82);
  const SafeIterationResult res = SafeIteration(g, pi0, 3, rng);

  const std::string path = "certs_roundtrip_test.jsonl";
  WriteCertificates(res.certificates, path);
  const auto back = ReadCertificates(path);
  std::remove(path.c_str());
  REQUIRE(back.size() == res.certificates.size());
  for (std::size_t k = 0; k < back.size(); ++k)
    CHECK(CertificateToJsonLine(back[k]) ==
          CertificateToJsonLine(res.certificates[k]));
}

TEST_CASE("certificate verification flags doctored records") {
  const TabularCMG raw = RandomTabularCMG(3, 2, 2, 1, 91);
  const JointPolicy pi0 = UniformJointPolicy(raw);
  const TabularCMG g = WithFeasibleBounds(raw, pi0, 0.5);
  Rng rng(92);
  SafeIterationResult res = SafeIteration(g, pi0, 3, rng);
  REQUIRE(VerifyCertificates(res.certificates).ok);

  auto broken = res.certificates;
  broken[1].j_reward_after = broken[1].j_reward_before - 1.0;
  CHECK_FALSE(VerifyCertificates(broken).ok);

  auto overspent = res.certificates;
  overspent[2].j_costs_after[0][0] = overspent[2].cost_bounds[0][0] + 1.0;
  CHECK_FALSE(VerifyCertificates(overspent).ok);
}

}  // namespace
}  // namespace samarl

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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "samarl/check.hpp"

namespace samarl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// JSON cannot hold infinities; radii and budgets are clamped on output.
constexpr double kJsonCap = 1e30;

double FiniteOr(double x, double cap = kJsonCap) {
  if (std::isnan(x)) return 0.0;
  return std::clamp(x, -cap, cap);
}

double LinearValue(const TabularPolicy& p, const Eigen::MatrixXd& coeff) {
  double v = 0.0;
  for (int s = 0; s < coeff.rows(); ++s)
    for (int a = 0; a < coeff.cols(); ++a) v += p.prob[s][a] * coeff(s, a);
  return v;
}

// slack / nu with the zero-coefficient convention: a zero penalty means the
// constraint cannot move, so nonnegative slack imposes no radius at all and
// negative slack forbids any.
double SlackOverNu(double slack, double nu) {
  if (nu <= 1e-300) return slack >= 0.0 ? kInf : -kInf;
  return slack / nu;
}

// Largest t in [0,1] with KL(old || (1-t) old + t row) <= radius, found by
// bisection; the divergence is monotone in t along the segment.
std::vector<double> ProjectRowToKl(const std::vector<double>& old_row,
                                   const std::vector<double>& row,
                                   double radius, double floor_eps) {
  if (PerStateKl(old_row, row, floor_eps) <= radius) return row;
  double lo = 0.0, hi = 1.0;
  std::vector<double> mix(row.size());
  for (int it = 0; it < 60; ++it) {
    const double t = 0.5 * (lo + hi);
    for (std::size_t a = 0; a < row.size(); ++a)
      mix[a] = (1.0 - t) * old_row[a] + t * row[a];
    if (PerStateKl(old_row, mix, floor_eps) <= radius)
      lo = t;
    else
      hi = t;
  }
  for (std::size_t a = 0; a < row.size(); ++a)
    mix[a] = (1.0 - lo) * old_row[a] + lo * row[a];
  return mix;
}

struct MembershipInputs {
  double kl = 0.0;
  std::vector<double> own_cost_surrogates;  // L_j at the candidate
};

// The printed candidate-set inequalities for position h. The budget on the
// right is reduced by each earlier position's own penalty coefficient times
// its committed KL.
bool MembershipFromValues(const SweepContext& ctx, int h,
                          const MembershipInputs& in, double delta,
                          const SpiTolerances& tol) {
  if (in.kl > delta + tol.membership_slack) return false;
  const int agent = ctx.order[h];
  const TabularCMG& game = *ctx.game;
  for (int j = 0; j < game.n_costs(agent); ++j) {
    double budget = game.cost_bounds[agent][j];
    for (int u = 0; u < h; ++u) {
      const int prior = ctx.order[u];
      if (j < game.n_costs(prior))
        budget -= ctx.nu->nu_cost[prior][j] * ctx.kl_by_position[u];
    }
    const double lhs = ctx.j_costs[agent][j] + in.own_cost_surrogates[j] +
                       ctx.nu->nu_cost[agent][j] * in.kl;
    if (lhs > budget + tol.membership_slack) return false;
  }
  return true;
}

// Owner-coefficient safeguard: for every agent l and constraint j, the
// bounded cost estimate J_lj + L_lj(own move so far) + nu_lj * (total KL
// spent including the candidate) must fit its budget. This is the exact
// inequality the end-of-sweep safety argument consumes, so enforcing it per
// candidate keeps every partial joint policy safe.
bool OwnerBoundGuard(const SweepContext& ctx, int h,
                     const MembershipInputs& in, const SpiTolerances& tol) {
  const TabularCMG& game = *ctx.game;
  double total_kl = in.kl;
  for (double kl_u : ctx.kl_by_position) total_kl += kl_u;
  for (int l = 0; l < game.n_agents(); ++l) {
    for (int j = 0; j < game.n_costs(l); ++j) {
      double own_l = 0.0;
      if (l == ctx.order[h]) {
        own_l = in.own_cost_surrogates[j];
      } else {
        for (int u = 0; u < h; ++u)
          if (ctx.order[u] == l) own_l = ctx.cost_surrogate_by_position[u][j];
      }
      const double lhs =
          ctx.j_costs[l][j] + own_l + ctx.nu->nu_cost[l][j] * total_kl;
      if (lhs > game.cost_bounds[l][j] + tol.membership_slack) return false;
    }
  }
  return true;
}

}  // namespace

PenaltyCoefficients ComputePenaltyCoefficients(const TabularCMG& game,
                                               const ValueTables& values) {
  PenaltyCoefficients nu;
  const double scale =
      4.0 * game.gamma / ((1.0 - game.gamma) * (1.0 - game.gamma));
  nu.nu_reward = scale * MaxAbsRewardAdvantage(values);
  nu.nu_cost.resize(game.n_agents());
  for (int i = 0; i < game.n_agents(); ++i) {
    nu.nu_cost[i].resize(game.n_costs(i));
    for (int j = 0; j < game.n_costs(i); ++j)
      nu.nu_cost[i][j] = scale * MaxAbsCostAdvantage(values, i, j);
  }
  return nu;
}

double SafeRadius(const SweepContext& ctx, int h) {
  const TabularCMG& game = *ctx.game;
  SAMARL_CHECK_GE(static_cast<int>(ctx.kl_by_position.size()), h);
  SAMARL_CHECK_GE(static_cast<int>(ctx.cost_surrogate_by_position.size()), h);
  double spent = 0.0;
  for (double kl_u : ctx.kl_by_position) spent += kl_u;

  double radius = kInf;
  for (int pos = 0; pos < static_cast<int>(ctx.order.size()); ++pos) {
    if (pos == h) continue;
    const int l = ctx.order[pos];
    for (int j = 0; j < game.n_costs(l); ++j) {
      const double nu_lj = ctx.nu->nu_cost[l][j];
      double slack =
          game.cost_bounds[l][j] - ctx.j_costs[l][j] - nu_lj * spent;
      if (pos < h) slack -= ctx.cost_surrogate_by_position[pos][j];
      radius = std::min(radius, SlackOverNu(slack, nu_lj));
    }
  }
  return radius;
}

bool FeasibleSetMembership(const SweepContext& ctx, int h,
                           const TabularPolicy& candidate, double delta,
                           const SpiConfig& config) {
  const int agent = ctx.order[h];
  MembershipInputs in;
  in.kl = MaxKl(ctx.pi_k->agents[agent], candidate);
  in.own_cost_surrogates.resize(ctx.game->n_costs(agent));
  for (int j = 0; j < ctx.game->n_costs(agent); ++j) {
    const Eigen::MatrixXd coeff =
        SurrogateCostCoefficients(*ctx.game, *ctx.values, *ctx.occ, agent, j);
    in.own_cost_surrogates[j] = LinearValue(candidate, coeff);
  }
  return MembershipFromValues(ctx, h, in, delta, config.tol);
}

InnerMaximizeResult InnerMaximize(const SweepContext& ctx, int h,
                                  double delta, const SpiConfig& config) {
  const TabularCMG& game = *ctx.game;
  const int agent = ctx.order[h];
  const int na = game.action_counts[agent];
  const TabularPolicy& incumbent = ctx.pi_k->agents[agent];

  const bool feasible = [&] {
    for (int l = 0; l < game.n_agents(); ++l)
      for (int j = 0; j < game.n_costs(l); ++j)
        if (ctx.j_costs[l][j] > game.cost_bounds[l][j] + 1e-12) return false;
    return true;
  }();

  const Eigen::MatrixXd w_reward = SurrogateReturnCoefficients(
      game, *ctx.pi_k, *ctx.values, *ctx.occ, ctx.updated_agents,
      ctx.updated_policies, agent);
  std::vector<Eigen::MatrixXd> w_cost(game.n_costs(agent));
  for (int j = 0; j < game.n_costs(agent); ++j)
    w_cost[j] =
        SurrogateCostCoefficients(game, *ctx.values, *ctx.occ, agent, j);

  auto own_surrogates = [&](const TabularPolicy& p) {
    std::vector<double> l(game.n_costs(agent));
    for (int j = 0; j < game.n_costs(agent); ++j)
      l[j] = LinearValue(p, w_cost[j]);
    return l;
  };

  InnerMaximizeResult best;
  best.policy = incumbent;
  best.kl = 0.0;
  best.cost_surrogates = own_surrogates(incumbent);
  const double f_incumbent = LinearValue(incumbent, w_reward);
  best.penalized_gain = 0.0;

  // In recovery mode the radius from delta is meaningless (often negative);
  // movement is bounded by the hard cap alone.
  const double radius =
      feasible ? std::min(std::max(delta, 0.0), config.kl_cap)
               : config.kl_cap;
  if (radius <= 0.0) return best;

  double best_violation = kInf;
  if (!feasible) {
    best_violation = 0.0;
    for (int j = 0; j < game.n_costs(agent); ++j)
      best_violation += std::max(
          0.0, ctx.j_costs[agent][j] + best.cost_surrogates[j] -
                   game.cost_bounds[agent][j]);
  }

  TabularPolicy x = incumbent.Floored(config.policy_floor);
  const double w_scale = w_reward.cwiseAbs().maxCoeff();

  for (int step = 0; step < config.eg_steps; ++step) {
    // Ascent direction: reward coefficients, or minus the gradient of the
    // active own-constraint violations in recovery mode.
    Eigen::MatrixXd dir;
    if (feasible) {
      if (w_scale <= 1e-300) break;
      dir = w_reward / w_scale;
    } else {
      dir = Eigen::MatrixXd::Zero(game.n_states, na);
      const auto l_now = own_surrogates(x);
      for (int j = 0; j < game.n_costs(agent); ++j) {
        if (ctx.j_costs[agent][j] + l_now[j] > game.cost_bounds[agent][j])
          dir -= w_cost[j];
      }
      const double scale = dir.cwiseAbs().maxCoeff();
      if (scale <= 1e-300) break;  // nothing left to repair
      dir /= scale;
    }

    for (int s = 0; s < game.n_states; ++s) {
      double sum = 0.0;
      for (int a = 0; a < na; ++a) {
        x.prob[s][a] *= std::exp(config.eg_step_size * dir(s, a));
        sum += x.prob[s][a];
      }
      for (int a = 0; a < na; ++a) x.prob[s][a] /= sum;
      x.prob[s] = ProjectRowToKl(incumbent.prob[s], x.prob[s], radius,
                                 config.policy_floor);
    }

    // The penalized optimum along this direction usually sits strictly
    // inside the ball, so candidates are taken at a geometric ladder of
    // radii, not only at the trajectory point.
    for (int rung = 0; rung <= 10; ++rung) {
      const double r = radius * std::pow(0.5, rung);
      TabularPolicy cand = x;
      for (int s = 0; s < game.n_states; ++s)
        cand.prob[s] = ProjectRowToKl(incumbent.prob[s], cand.prob[s], r,
                                      config.policy_floor);

      MembershipInputs in;
      in.kl = MaxKl(incumbent, cand);
      in.own_cost_surrogates = own_surrogates(cand);

      if (feasible) {
        if (!MembershipFromValues(ctx, h, in, delta, config.tol)) continue;
        if (!OwnerBoundGuard(ctx, h, in, config.tol)) continue;
        const double f =
            LinearValue(cand, w_reward) - ctx.nu->nu_reward * in.kl;
        const double gain = f - f_incumbent;
        // Gains below algebra_slack are indistinguishable from roundoff;
        // the incumbent is kept rather than drifting on noise.
        const bool material = gain > config.tol.algebra_slack;
        const bool better =
            material && (gain > best.penalized_gain ||
                         (gain == best.penalized_gain && in.kl < best.kl));
        if (better) {
          best.policy = cand;
          best.kl = in.kl;
          best.penalized_gain = gain;
          best.cost_surrogates = in.own_cost_surrogates;
          best.moved = true;
        }
      } else {
        double violation = 0.0;
        for (int j = 0; j < game.n_costs(agent); ++j)
          violation += std::max(
              0.0, ctx.j_costs[agent][j] + in.own_cost_surrogates[j] -
                       game.cost_bounds[agent][j]);
        const bool better =
            violation < best_violation ||
            (violation == best_violation && best.moved && in.kl < best.kl);
        if (better) {
          best.policy = cand;
          best.kl = in.kl;
          best.cost_surrogates = in.own_cost_surrogates;
          best.penalized_gain =
              LinearValue(cand, w_reward) - ctx.nu->nu_reward * in.kl -
              f_incumbent;
          best.moved = true;
          best_violation = violation;
        }
      }
    }
  }
  return best;
}

SafeIterationResult SafeIteration(const TabularCMG& game,
                                  const JointPolicy& pi0, int iterations,
                                  Rng& rng, const SpiConfig& config) {
  game.Validate();
  pi0.Validate();
  SafeIterationResult result;
  result.policy = pi0;

  for (int k = 0; k < iterations; ++k) {
    const ValueTables values = ExactValues(game, result.policy);
    const OccupancyMeasure occ = Occupancy(game, result.policy);
    const PenaltyCoefficients nu = ComputePenaltyCoefficients(game, values);
    const AgentPermutation perm = DrawPermutation(game.n_agents(), rng);

    SweepContext ctx;
    ctx.game = &game;
    ctx.pi_k = &result.policy;
    ctx.values = &values;
    ctx.occ = &occ;
    ctx.nu = &nu;
    ctx.order = perm.order;
    ctx.j_costs.resize(game.n_agents());
    bool feasible = true;
    for (int i = 0; i < game.n_agents(); ++i) {
      ctx.j_costs[i].resize(game.n_costs(i));
      for (int j = 0; j < game.n_costs(i); ++j) {
        ctx.j_costs[i][j] = ExpectedTotalCost(game, values, i, j);
        if (ctx.j_costs[i][j] > game.cost_bounds[i][j] + 1e-12)
          feasible = false;
      }
    }

    IterationCertificate cert;
    cert.iteration = k;
    cert.feasible_before = feasible;
    cert.j_reward_before = ExpectedReturn(game, values);
    cert.j_costs_before = ctx.j_costs;
    cert.cost_bounds = game.cost_bounds;
    cert.permutation = perm.order;

    for (int h = 0; h < game.n_agents(); ++h) {
      const double delta = SafeRadius(ctx, h);
      const InnerMaximizeResult step = InnerMaximize(ctx, h, delta, config);

      AgentUpdateRecord rec;
      rec.position = h;
      rec.agent = ctx.order[h];
      rec.delta = FiniteOr(delta);
      rec.kl = step.kl;
      rec.penalized_gain = step.penalized_gain;
      rec.moved = step.moved;
      rec.fallback_used = !step.moved;
      rec.membership_ok =
          !feasible ||
          FeasibleSetMembership(ctx, h, step.policy, std::max(delta, 0.0),
                                config);
      cert.updates.push_back(rec);

      ctx.kl_by_position.push_back(step.kl);
      ctx.cost_surrogate_by_position.push_back(step.cost_surrogates);
      ctx.updated_agents.push_back(ctx.order[h]);
      ctx.updated_policies.push_back(step.policy);
    }

    JointPolicy next = result.policy;
    for (std::size_t u = 0; u < ctx.updated_agents.size(); ++u)
      next.agents[ctx.updated_agents[u]] = ctx.updated_policies[u];

    const ValueTables values_after = ExactValues(game, next);
    cert.j_reward_after = ExpectedReturn(game, values_after);
    cert.j_costs_after.resize(game.n_agents());
    for (int i = 0; i < game.n_agents(); ++i) {
      cert.j_costs_after[i].resize(game.n_costs(i));
      for (int j = 0; j < game.n_costs(i); ++j)
        cert.j_costs_after[i][j] = ExpectedTotalCost(game, values_after, i, j);
    }
    result.certificates.push_back(cert);
    result.policy = next;
  }
  return result;
}

std::string CertificateToJsonLine(const IterationCertificate& cert) {
  nlohmann::json j;
  j["iteration"] = cert.iteration;
  j["feasible_before"] = cert.feasible_before;
  j["j_reward_before"] = cert.j_reward_before;
  j["j_reward_after"] = cert.j_reward_after;
  j["j_costs_before"] = cert.j_costs_before;
  j["j_costs_after"] = cert.j_costs_after;
  auto bounds = cert.cost_bounds;
  for (auto& per_agent : bounds)
    for (double& b : per_agent) b = FiniteOr(b);
  j["cost_bounds"] = bounds;
  j["permutation"] = cert.permutation;
  nlohmann::json updates = nlohmann::json::array();
  for (const auto& u : cert.updates) {
    updates.push_back({{"position", u.position},
                       {"agent", u.agent},
                       {"delta", FiniteOr(u.delta)},
                       {"kl", u.kl},
                       {"penalized_gain", u.penalized_gain},
                       {"moved", u.moved},
                       {"membership_ok", u.membership_ok},
                       {"fallback_used", u.fallback_used}});
  }
  j["updates"] = updates;
  return j.dump();
}

IterationCertificate CertificateFromJsonLine(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  IterationCertificate cert;
  cert.iteration = j.at("iteration").get<int>();
  cert.feasible_before = j.at("feasible_before").get<bool>();
  cert.j_reward_before = j.at("j_reward_before").get<double>();
  cert.j_reward_after = j.at("j_reward_after").get<double>();
  cert.j_costs_before =
      j.at("j_costs_before").get<std::vector<std::vector<double>>>();
  cert.j_costs_after =
      j.at("j_costs_after").get<std::vector<std::vector<double>>>();
  cert.cost_bounds =
      j.at("cost_bounds").get<std::vector<std::vector<double>>>();
  cert.permutation = j.at("permutation").get<std::vector<int>>();
  for (const auto& u : j.at("updates")) {
    AgentUpdateRecord rec;
    rec.position = u.at("position").get<int>();
    rec.agent = u.at("agent").get<int>();
    rec.delta = u.at("delta").get<double>();
    rec.kl = u.at("kl").get<double>();
    rec.penalized_gain = u.at("penalized_gain").get<double>();
    rec.moved = u.at("moved").get<bool>();
    rec.membership_ok = u.at("membership_ok").get<bool>();
    rec.fallback_used = u.at("fallback_used").get<bool>();
    cert.updates.push_back(rec);
  }
  return cert;
}

void WriteCertificates(const std::vector<IterationCertificate>& certs,
                       const std::string& path) {
  std::ofstream out(path);
  SAMARL_CHECK_MSG(out.good(), "cannot open " << path);
  for (const auto& cert : certs) out << CertificateToJsonLine(cert) << "\n";
}

std::vector<IterationCertificate> ReadCertificates(const std::string& path) {
  std::ifstream in(path);
  SAMARL_CHECK_MSG(in.good(), "cannot open " << path);
  std::vector<IterationCertificate> certs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    certs.push_back(CertificateFromJsonLine(line));
  }
  return certs;
}

CertificateCheckReport VerifyCertificates(
    const std::vector<IterationCertificate>& certs,
    const SpiTolerances& tol) {
  CertificateCheckReport report;
  auto fail = [&](const std::string& msg) {
    report.ok = false;
    report.violations.push_back(msg);
  };

  for (std::size_t k = 0; k < certs.size(); ++k) {
    if (certs[k].feasible_before) {
      report.first_feasible_iteration = static_cast<int>(k);
      break;
    }
  }
  if (report.first_feasible_iteration < 0) return report;

  for (std::size_t k = report.first_feasible_iteration; k < certs.size();
       ++k) {
    const IterationCertificate& cert = certs[k];
    std::ostringstream at;
    at << "iteration " << cert.iteration;
    if (!cert.feasible_before)
      fail(at.str() + ": feasibility lost after a feasible iterate");
    if (cert.j_reward_after < cert.j_reward_before - tol.improvement_slack) {
      std::ostringstream os;
      os << at.str() << ": return decreased " << cert.j_reward_before
         << " -> " << cert.j_reward_after;
      fail(os.str());
    }
    for (std::size_t i = 0; i < cert.j_costs_after.size(); ++i) {
      for (std::size_t j = 0; j < cert.j_costs_after[i].size(); ++j) {
        if (cert.j_costs_after[i][j] >
            cert.cost_bounds[i][j] + tol.constraint_slack) {
          std::ostringstream os;
          os << at.str() << ": agent " << i << " constraint " << j
             << " cost " << cert.j_costs_after[i][j] << " over bound "
             << cert.cost_bounds[i][j];
          fail(os.str());
        }
      }
    }
    if (k + 1 < certs.size()) {
      const double next_before = certs[k + 1].j_reward_before;
      if (std::fabs(next_before - cert.j_reward_after) > tol.algebra_slack) {
        std::ostringstream os;
        os << at.str() << ": certificate chain mismatch "
           << cert.j_reward_after << " vs " << next_before;
        fail(os.str());
      }
    }
  }
  return report;
}

}  // namespace samarl

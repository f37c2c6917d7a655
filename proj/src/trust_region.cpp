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

#include "samarl/trust_region.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "samarl/check.hpp"

namespace samarl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLambdaFloor = 1e-12;
// Borderline intersection of the constraint halfspace with the KL ball is
// treated as feasible rather than bouncing between modes.
constexpr double kFeasibilitySlack = 1e-10;

}  // namespace

CgResult ConjugateGradient(const HvpOracle& hvp, const Eigen::VectorXd& rhs,
                           int max_iters, double tol) {
  SAMARL_CHECK_GT(rhs.size(), 0);
  SAMARL_CHECK_GT(max_iters, 0);
  SAMARL_CHECK_MSG(rhs.allFinite(), "non-finite right-hand side");

  CgResult res;
  res.x = Eigen::VectorXd::Zero(rhs.size());
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  const double stop = tol * rhs.norm();
  res.residual_norm = std::sqrt(rr);
  if (res.residual_norm <= stop) {
    res.converged = true;
    return res;
  }
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd hp = hvp(p);
    SAMARL_CHECK_MSG(hp.allFinite(), "non-finite curvature product in solve");
    const double php = p.dot(hp);
    SAMARL_CHECK_MSG(php > 0.0, "curvature oracle is not positive definite");
    const double alpha = rr / php;
    res.x += alpha * p;
    r -= alpha * hp;
    SAMARL_CHECK_MSG(res.x.allFinite() && r.allFinite(),
                     "non-finite iterate in solve");
    const double rr_next = r.squaredNorm();
    res.iterations = it + 1;
    res.residual_norm = std::sqrt(rr_next);
    if (res.residual_norm <= stop) {
      res.converged = true;
      return res;
    }
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return res;
}

namespace {

// Dual value of the step problem, to be minimized over lambda > 0 and
// nu >= 0. Any dual-feasible value upper-bounds the achievable ascent.
double DualValue(double q, double r, double s, double c, double delta,
                 double lambda, double nu) {
  lambda = std::max(lambda, kLambdaFloor);
  return (q - 2.0 * nu * r + nu * nu * s) / (2.0 * lambda) - nu * c +
         lambda * delta;
}

struct Interval {
  double lo = 0.0;
  double hi = -1.0;  // hi < lo means empty
  bool Empty() const { return hi < lo; }
  double Clamp(double x) const { return std::min(std::max(x, lo), hi); }
};

}  // namespace

DualSolution SolveLqclpSingle(double q, double r, double s, double offset,
                              double delta) {
  SAMARL_CHECK_GT(s, 0.0);
  SAMARL_CHECK_GT(delta, 0.0);
  SAMARL_CHECK_GE(q, -1e-9);
  q = std::max(q, 0.0);
  const double c = offset;

  DualSolution sol;
  sol.q = q;
  sol.r = Eigen::VectorXd::Constant(1, r);
  sol.s = Eigen::MatrixXd::Constant(1, 1, s);
  sol.nu = Eigen::VectorXd::Zero(1);

  // No point of the KL ball satisfies the constraint: the most negative
  // reachable value of c + b.x is c - sqrt(2 delta s).
  const double gap = c * c / s - 2.0 * delta;
  if (c > 0.0 && gap > kFeasibilitySlack) {
    sol.feasible = false;
    return sol;
  }

  double cs_gap = q - r * r / s;
  SAMARL_CHECK_GE(cs_gap, -1e-9 * std::max(1.0, q));
  cs_gap = std::max(cs_gap, 0.0);

  // Multiplier of the linear constraint at fixed lambda.
  auto nu_of = [&](double lambda) {
    return std::max((r + lambda * c) / s, 0.0);
  };

  // Domains where the constraint multiplier is active (a) or zero (b).
  Interval dom_a;
  Interval dom_b;
  if (c > 0.0) {
    dom_a = {std::max(0.0, -r / c), kInf};
    if (r <= 0.0) dom_b = {0.0, -r / c};
  } else if (c < 0.0) {
    if (r >= 0.0) dom_a = {0.0, -r / c};
    dom_b = {std::max(0.0, -r / c), kInf};
  } else {
    if (r > 0.0) dom_a = {0.0, kInf};
    if (r <= 0.0) dom_b = {0.0, kInf};
  }

  const double denom = 2.0 * delta - c * c / s;
  const double lambda_a =
      denom > kLambdaFloor ? std::sqrt(cs_gap / denom) : kInf;
  const double lambda_b = std::sqrt(q / (2.0 * delta));

  double best_d = kInf;
  double best_lambda = 0.0;
  auto consider = [&](double lambda, const Interval& dom) {
    if (dom.Empty()) return;
    double l = dom.Clamp(lambda);
    if (!std::isfinite(l)) return;
    l = std::max(l, kLambdaFloor);
    const double value = DualValue(q, r, s, c, delta, l, nu_of(l));
    if (value < best_d) {
      best_d = value;
      best_lambda = l;
    }
  };
  consider(lambda_a, dom_a);
  consider(lambda_b, dom_b);
  SAMARL_CHECK_MSG(std::isfinite(best_d), "no admissible dual candidate");

  sol.lambda = best_lambda;
  sol.nu[0] = nu_of(best_lambda);
  sol.dual_value = best_d;
  return sol;
}

namespace {

DualSolution SolveMultiDual(double q, const Eigen::VectorXd& r,
                            const Eigen::MatrixXd& s,
                            const Eigen::VectorXd& d, double delta) {
  const int m = static_cast<int>(r.size());
  DualSolution sol;
  sol.q = q;
  sol.r = r;
  sol.s = s;

  // Sufficient per-constraint infeasibility test; a jointly infeasible
  // but per-constraint feasible instance is caught by dual blow-up below.
  for (int j = 0; j < m; ++j)
    if (d[j] > 0.0 && d[j] * d[j] / s(j, j) - 2.0 * delta >
                          kFeasibilitySlack) {
      sol.feasible = false;
      sol.nu = Eigen::VectorXd::Zero(m);
      return sol;
    }

  // Block descent on the convex dual: lambda has a closed form at fixed
  // nu, and nu at fixed lambda is a small nonnegative least-squares
  // problem solved exactly by active-set pivoting. The alternation has
  // no step size and lands on the joint minimum of the smooth convex
  // dual; lambda hitting zero means the KL ball is inactive and the step
  // is pinned by the active linear constraints instead.
  const double lambda_floor = 1e-7;
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(m);

  auto value = [&](double l, const Eigen::VectorXd& n) {
    l = std::max(l, kLambdaFloor);
    const double quad = q - 2.0 * n.dot(r) + n.dot(s * n);
    return quad / (2.0 * l) - n.dot(d) + l * delta;
  };

  // Exact solve of min 1/2 nu'S nu - t'nu over nu >= 0, warm started
  // from the sign pattern of the previous iterate. The equality solve
  // uses a rank-revealing decomposition so duplicated constraints
  // (singular S blocks) get a consistent multiplier split.
  auto solve_nonneg = [&](const Eigen::VectorXd& t,
                          const Eigen::VectorXd& warm) {
    std::vector<char> active(m, 0);
    for (int j = 0; j < m; ++j)
      active[j] = warm[j] > 0.0 && s(j, j) > kLambdaFloor;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    const double slack_tol = 1e-13 * (1.0 + t.cwiseAbs().maxCoeff());
    for (int pass = 0; pass < 4 * m + 8; ++pass) {
      std::vector<int> idx;
      for (int j = 0; j < m; ++j)
        if (active[j]) idx.push_back(j);
      Eigen::VectorXd w(idx.size());
      if (!idx.empty()) {
        Eigen::MatrixXd sa(idx.size(), idx.size());
        Eigen::VectorXd ta(idx.size());
        for (std::size_t a = 0; a < idx.size(); ++a) {
          ta[a] = t[idx[a]];
          for (std::size_t bb = 0; bb < idx.size(); ++bb)
            sa(a, bb) = s(idx[a], idx[bb]);
        }
        w = sa.completeOrthogonalDecomposition().solve(ta);
      }
      int drop = -1;
      double worst = -slack_tol;
      for (std::size_t a = 0; a < idx.size(); ++a)
        if (w[a] < worst) {
          worst = w[a];
          drop = static_cast<int>(a);
        }
      if (drop >= 0) {
        active[idx[drop]] = 0;
        continue;
      }
      out.setZero();
      for (std::size_t a = 0; a < idx.size(); ++a)
        out[idx[a]] = std::max(w[a], 0.0);
      const Eigen::VectorXd slack = s * out - t;
      int grow = -1;
      double need = -slack_tol;
      for (int j = 0; j < m; ++j)
        if (!active[j] && s(j, j) > kLambdaFloor && slack[j] < need) {
          need = slack[j];
          grow = j;
        }
      if (grow < 0) break;
      active[grow] = 1;
    }
    return out;
  };

  double lambda = std::max(std::sqrt(q / (2.0 * delta)), lambda_floor);
  bool settled = false;
  for (int it = 0; it < 20000; ++it) {
    nu = solve_nonneg(r + lambda * d, nu);
    if (nu.norm() > 1e10) break;  // dual descending along a recession ray
    const double quad =
        std::max(q - 2.0 * nu.dot(r) + nu.dot(s * nu), 0.0);
    const double lambda_new =
        std::max(std::sqrt(quad / (2.0 * delta)), lambda_floor);
    const bool done = std::abs(lambda_new - lambda) <= 1e-15 * (1.0 + lambda);
    lambda = lambda_new;
    if (done) {
      settled = true;
      break;
    }
  }

  // Residual of the reconstructed primal against each linear constraint,
  // in dual scalars: b_j.x = (r_j - (S nu)_j) / lambda on the regular
  // path and -(S w)_j on the degenerate one.
  const bool ball_inactive = lambda <= lambda_floor;
  Eigen::VectorXd weight = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd residual(m);
  if (ball_inactive) {
    std::vector<int> idx;
    for (int j = 0; j < m; ++j)
      if (nu[j] > 0.0) idx.push_back(j);
    if (!idx.empty()) {
      Eigen::MatrixXd sa(idx.size(), idx.size());
      Eigen::VectorXd da(idx.size());
      for (std::size_t a = 0; a < idx.size(); ++a) {
        da[a] = d[idx[a]];
        for (std::size_t bb = 0; bb < idx.size(); ++bb)
          sa(a, bb) = s(idx[a], idx[bb]);
      }
      const Eigen::VectorXd wa =
          sa.completeOrthogonalDecomposition().solve(da);
      for (std::size_t a = 0; a < idx.size(); ++a) weight[idx[a]] = wa[a];
    }
    residual = d - s * weight;
  } else {
    residual = d + (r - s * nu) / lambda;
  }

  double feas_gap = 0.0;
  for (int j = 0; j < m; ++j)
    feas_gap = std::max(feas_gap, residual[j] / (1.0 + std::abs(d[j])));
  if (!settled || feas_gap > 1e-7) {
    // The alternation failed to produce a feasible step. Decide whether
    // the instance itself is infeasible: the ball misses the constraint
    // set iff some aggregation nu >= 0 has nu.d > sqrt(2 delta nu'S nu),
    // a concave maximization solved by projected supergradient ascent.
    const double scale = 1.0 + d.cwiseAbs().maxCoeff();
    double best_margin = -std::numeric_limits<double>::infinity();
    std::vector<Eigen::VectorXd> starts;
    for (int j = 0; j < m; ++j)
      starts.push_back(Eigen::VectorXd::Unit(m, j));
    starts.push_back(Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(m)));
    for (const Eigen::VectorXd& start : starts) {
      Eigen::VectorXd v = start;
      for (int it = 0; it < 5000; ++it) {
        const double vsv = v.dot(s * v);
        Eigen::VectorXd grad = d;
        if (vsv > 1e-300)
          grad -= std::sqrt(2.0 * delta / vsv) * (s * v);
        v += 0.5 / (scale * std::sqrt(1.0 + it)) * grad;
        v = v.cwiseMax(0.0);
        const double norm = v.norm();
        if (norm > 1.0) v /= norm;
        const double margin =
            v.dot(d) - std::sqrt(2.0 * delta * v.dot(s * v));
        best_margin = std::max(best_margin, margin);
      }
    }
    if (best_margin > 1e-8 * scale) {
      sol.feasible = false;
      sol.nu = Eigen::VectorXd::Zero(m);
      return sol;
    }
  }

  // Convergence is reported against the projected dual gradient.
  const Eigen::VectorXd g_nu = (s * nu - r) / lambda - d;
  double pg_sq = 0.0;
  for (int j = 0; j < m; ++j)
    if (nu[j] > 0.0 || g_nu[j] < 0.0) pg_sq += g_nu[j] * g_nu[j];
  const double quad = q - 2.0 * nu.dot(r) + nu.dot(s * nu);
  const double g_lambda = -quad / (2.0 * lambda * lambda) + delta;
  if (lambda > lambda_floor || g_lambda < 0.0) pg_sq += g_lambda * g_lambda;

  sol.lambda = std::max(lambda, kLambdaFloor);
  sol.nu = nu;
  sol.dual_value = value(lambda, nu);
  sol.ball_inactive = ball_inactive;
  sol.degenerate_weight = weight;
  sol.converged = settled && std::sqrt(pg_sq) < 1e-6;
  return sol;
}

}  // namespace

LqclpSolution SolveLqclp(const LqclpProblem& problem) {
  SAMARL_CHECK_GT(problem.delta, 0.0);
  SAMARL_CHECK(problem.hvp != nullptr);
  SAMARL_CHECK_EQ(problem.b.size(), problem.d.size());
  const int m = static_cast<int>(problem.b.size());
  SAMARL_CHECK_MSG(m <= 1 || problem.enable_multi,
                   "multiple constraints require the dual-ascent solver");

  LqclpSolution out;
  const CgResult cg_g =
      ConjugateGradient(problem.hvp, problem.g, problem.cg_iters,
                        problem.cg_tol);
  out.hinv_g = cg_g.x;
  out.cg_converged = cg_g.converged;
  for (const Eigen::VectorXd& bj : problem.b) {
    SAMARL_CHECK_EQ(bj.size(), problem.g.size());
    const CgResult cg_b =
        ConjugateGradient(problem.hvp, bj, problem.cg_iters, problem.cg_tol);
    out.hinv_b.push_back(cg_b.x);
    out.cg_converged = out.cg_converged && cg_b.converged;
  }

  double q = problem.g.dot(out.hinv_g);
  SAMARL_CHECK_GE(q, -1e-9 * std::max(1.0, problem.g.squaredNorm()));
  q = std::max(q, 0.0);

  if (m == 0) {
    out.dual.q = q;
    out.dual.r = Eigen::VectorXd();
    out.dual.s = Eigen::MatrixXd();
    out.dual.nu = Eigen::VectorXd();
    out.dual.lambda =
        std::max(std::sqrt(q / (2.0 * problem.delta)), kLambdaFloor);
    out.dual.dual_value =
        DualValue(q, 0.0, 1.0, 0.0, problem.delta, out.dual.lambda, 0.0);
    return out;
  }

  Eigen::VectorXd r(m);
  Eigen::MatrixXd s(m, m);
  for (int j = 0; j < m; ++j) {
    r[j] = problem.g.dot(out.hinv_b[j]);
    for (int k = 0; k < m; ++k) s(j, k) = problem.b[j].dot(out.hinv_b[k]);
  }
  s = 0.5 * (s + s.transpose()).eval();

  if (m == 1) {
    out.dual =
        SolveLqclpSingle(q, r[0], s(0, 0), problem.d[0], problem.delta);
    out.dual.q = q;
    return out;
  }
  out.dual = SolveMultiDual(
      q, r, s,
      Eigen::Map<const Eigen::VectorXd>(problem.d.data(), m),
      problem.delta);
  return out;
}

Eigen::VectorXd PrimalStep(const LqclpSolution& sol) {
  SAMARL_CHECK_MSG(sol.dual.feasible,
                   "primal step requested for an infeasible instance");
  if (sol.dual.ball_inactive) {
    // 1/lambda amplifies roundoff without bound as lambda -> 0; the
    // central-path limit depends only on the active-constraint weights.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(sol.hinv_g.size());
    for (int j = 0; j < sol.dual.degenerate_weight.size(); ++j)
      x -= sol.dual.degenerate_weight[j] * sol.hinv_b[j];
    return x;
  }
  SAMARL_CHECK_MSG(sol.dual.lambda > 0.0, "degenerate dual: lambda is zero");
  Eigen::VectorXd x = sol.hinv_g;
  for (int j = 0; j < sol.dual.nu.size(); ++j)
    x -= sol.dual.nu[j] * sol.hinv_b[j];
  return x / sol.dual.lambda;
}

TrustRegionStep BacktrackingLineSearch(
    const Eigen::VectorXd& direction,
    const std::function<LineSearchEval(const Eigen::VectorXd&)>& evaluate,
    const LineSearchConfig& config) {
  SAMARL_CHECK_GT(direction.size(), 0);
  SAMARL_CHECK_GT(config.initial_scale, 0.0);
  SAMARL_CHECK_GT(config.ratio, 0.0);
  SAMARL_CHECK_LT(config.ratio, 1.0);
  SAMARL_CHECK_GE(config.max_exponent, 0);

  TrustRegionStep step;
  step.raw_direction = direction;
  double scale = config.initial_scale;
  for (int j = 0; j <= config.max_exponent; ++j) {
    const Eigen::VectorXd candidate = scale * direction;
    const LineSearchEval eval = evaluate(candidate);
    SAMARL_CHECK_FINITE(eval.objective_delta);
    SAMARL_CHECK_FINITE(eval.kl);
    bool ok = eval.objective_delta > 0.0 && eval.kl <= config.kl_limit;
    for (double excess : eval.constraint_excess)
      ok = ok && excess <= 0.0;
    if (ok) {
      step.mode = TrustRegionStep::Mode::kOptimize;
      step.accepted_step = candidate;
      step.exponent = j;
      return step;
    }
    scale *= config.ratio;
  }
  step.mode = TrustRegionStep::Mode::kReject;
  step.accepted_step = Eigen::VectorXd::Zero(direction.size());
  return step;
}

TrustRegionStep RecoveryStep(
    const Eigen::VectorXd& hinv_b, const Eigen::VectorXd& b, double delta,
    const std::function<double(const Eigen::VectorXd&)>& sampled_cost_delta,
    const LineSearchConfig& config) {
  SAMARL_CHECK_GT(delta, 0.0);
  SAMARL_CHECK_EQ(hinv_b.size(), b.size());
  const double s = b.dot(hinv_b);
  SAMARL_CHECK_MSG(s > 0.0, "degenerate constraint curvature in recovery");

  TrustRegionStep step;
  const Eigen::VectorXd full = -std::sqrt(2.0 * delta / s) * hinv_b;
  step.raw_direction = full;
  double alpha = config.initial_scale;
  for (int j = 0; j <= config.max_exponent; ++j) {
    const Eigen::VectorXd candidate = alpha * full;
    const double delta_cost = sampled_cost_delta(candidate);
    SAMARL_CHECK_FINITE(delta_cost);
    if (delta_cost < 0.0) {
      step.mode = TrustRegionStep::Mode::kRecover;
      step.accepted_step = candidate;
      step.exponent = j;
      return step;
    }
    alpha *= config.ratio;
  }
  step.mode = TrustRegionStep::Mode::kReject;
  step.accepted_step = Eigen::VectorXd::Zero(b.size());
  return step;
}

}  // namespace samarl

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

#ifndef SAMARL_TRUST_REGION_HPP_
#define SAMARL_TRUST_REGION_HPP_

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace samarl {

// Matrix-free access to the curvature matrix: v -> (H + damping I) v. The
// matrix itself is never materialized.
using HvpOracle = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct CgResult {
  Eigen::VectorXd x;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Plain conjugate gradient on a symmetric positive definite oracle. Stops
// when the residual norm falls below tol times the right-hand-side norm;
// exhausting max_iters leaves converged false. Throws on any non-finite
// intermediate so a poisoned oracle fails loudly.
CgResult ConjugateGradient(const HvpOracle& hvp, const Eigen::VectorXd& rhs,
                           int max_iters = 128, double tol = 1e-10);

// Step computation ascending g within a KL ball of radius delta while
// keeping each linearized constraint d_j + b_j . x <= 0.
struct LqclpProblem {
  Eigen::VectorXd g;
  std::vector<Eigen::VectorXd> b;
  std::vector<double> d;  // positive means the constraint is violated now
  double delta = 0.0065;
  HvpOracle hvp;
  int cg_iters = 128;
  double cg_tol = 1e-10;
  // The analytic single-constraint path is the default; more than one
  // constraint requires opting in to the dual-ascent solver.
  bool enable_multi = false;
};

struct DualSolution {
  // False when no point of the KL ball satisfies the constraint; the
  // caller must take a recovery step instead.
  bool feasible = true;
  double lambda = 0.0;
  Eigen::VectorXd nu;  // one multiplier per constraint
  double dual_value = 0.0;
  // Curvature scalars: q = g'H^-1 g, r_j = g'H^-1 b_j, s_jk = b_j'H^-1 b_k.
  double q = 0.0;
  Eigen::VectorXd r;
  Eigen::MatrixXd s;
  bool converged = true;  // dual-ascent iteration cap not exhausted
  // lambda* = 0: the KL ball is inactive and the step is pinned by the
  // active linear constraints as x = -sum_j weight_j H^-1 b_j.
  bool ball_inactive = false;
  Eigen::VectorXd degenerate_weight;
};

// Scalar core of the single-constraint case; exact closed form. delta is
// the KL radius (the quadratic form bound is 1/2 x'Hx <= delta).
DualSolution SolveLqclpSingle(double q, double r, double s, double offset,
                              double delta);

struct LqclpSolution {
  DualSolution dual;
  Eigen::VectorXd hinv_g;
  std::vector<Eigen::VectorXd> hinv_b;
  bool cg_converged = true;
};

LqclpSolution SolveLqclp(const LqclpProblem& problem);

// x = (1/lambda) H^-1 (g - B nu), or the active-constraint limit when
// the dual reports the KL ball inactive. Requires a feasible dual with
// lambda > 0; a zero lambda outside that case is a degenerate dual and
// is rejected.
Eigen::VectorXd PrimalStep(const LqclpSolution& sol);

struct TrustRegionStep {
  enum class Mode { kOptimize, kRecover, kReject };
  Mode mode = Mode::kReject;
  Eigen::VectorXd raw_direction;
  Eigen::VectorXd accepted_step;  // zero length when rejected
  int exponent = -1;              // backtracking power accepted, -1 on reject
};

// What the caller measured on the existing batch for one candidate step.
struct LineSearchEval {
  double objective_delta = 0.0;  // sampled surrogate improvement
  double kl = 0.0;               // sampled KL against the pre-step policy
  std::vector<double> constraint_excess;  // estimate minus bound, per j
};

struct LineSearchConfig {
  double initial_scale = 1.0;  // applied before any backtracking
  double ratio = 0.5;          // shrink factor per rejection
  int max_exponent = 10;       // powers tried: 0 .. max_exponent
  double kl_limit = 0.0065;
};

// Tries direction * initial_scale * ratio^j for j = 0..max_exponent and
// accepts the first candidate whose evaluation improves the objective,
// keeps KL within the limit, and leaves every constraint estimate within
// its bound. Rejection (no candidate qualifies) is a valid outcome.
TrustRegionStep BacktrackingLineSearch(
    const Eigen::VectorXd& direction,
    const std::function<LineSearchEval(const Eigen::VectorXd&)>& evaluate,
    const LineSearchConfig& config);

// Feasibility repair when the linearized problem has no solution: step
// opposite the natural gradient of the violated constraint, with the
// magnitude that spends the full KL radius at alpha = 1, backtracking
// alpha until the sampled cost decreases. sampled_cost_delta returns the
// estimated change of the violated cost under a candidate step (negative
// means improving).
TrustRegionStep RecoveryStep(
    const Eigen::VectorXd& hinv_b, const Eigen::VectorXd& b, double delta,
    const std::function<double(const Eigen::VectorXd&)>& sampled_cost_delta,
    const LineSearchConfig& config);

}  // namespace samarl

#endif  // SAMARL_TRUST_REGION_HPP_

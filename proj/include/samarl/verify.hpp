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

#ifndef SAMARL_VERIFY_HPP_
#define SAMARL_VERIFY_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace samarl {

// Outcome of one property suite. `residuals` always carries the named
// worst-case numbers observed, pass or fail; `counterexample` holds the
// first failing instance with enough data to replay it, null otherwise.
struct SuiteReport {
  std::string suite;
  int instances = 0;
  long long checks = 0;
  int failures = 0;
  nlohmann::json residuals;
  nlohmann::json counterexample;
  double seconds = 0.0;

  bool Passed() const { return failures == 0; }
};

// Instance counts default to the sizes the acceptance gate runs at.
struct VerifyOptions {
  std::uint64_t seed = 0;
  int decomposition_games = 100;
  int surrogate_triples = 200;
  int iteration_games = 25;
  int iteration_sweeps = 20;
  int lqclp_instances = 200;
  int gradient_networks = 20;
  int gae_episodes = 100;
  // Corrupts one decomposition check on purpose so the failure path and
  // counterexample serialization can be exercised end to end.
  bool inject_fault = false;
};

// Advantage decomposition: the advantage of an ordered agent subset's
// joint action equals the telescoped sum of single-agent advantages,
// each conditioned on the earlier agents' actions. Checked for every
// state, ordering, and joint action of seeded random games.
SuiteReport VerifyDecomposition(const VerifyOptions& opt);

// Surrogate cost bound: for random policy pairs, the new joint policy's
// expected total cost never exceeds the old cost plus the per-agent
// surrogate plus the penalty coefficient times the summed per-agent
// max KLs. Also records how loose the bound runs.
SuiteReport VerifySurrogate(const VerifyOptions& opt);

// Safe policy iteration: starting feasible, every iterate keeps the
// return monotone and all costs within budget. Each iterate is
// re-evaluated from scratch against the exact oracle, independently of
// the certificates the iteration emits (which are cross-checked too).
SuiteReport VerifyIteration(const VerifyOptions& opt);

// Trust-region subproblem: the analytic dual plus primal step against a
// geometric oracle. The ball is rotation-invariant after whitening, so
// the maximizer lies in the span of the whitened gradient and
// constraint; the oracle reduces to that plane, scans the circle
// densely, and adds the exact closed-form boundary candidates. Weak
// duality is checked on the oracle point.
SuiteReport VerifyLqclp(const VerifyOptions& opt);

// Numerics: conjugate gradient against dense LU, score gradients and
// KL curvature products against central finite differences, and the
// zero-mean score identity within three standard errors.
SuiteReport VerifyGradients(const VerifyOptions& opt);

// Advantage estimator: the backward recursion against the direct
// forward summation of discounted temporal differences, including
// terminal and truncation boundaries.
SuiteReport VerifyGae(const VerifyOptions& opt);

std::vector<std::string> VerifySuiteNames();

// selector is "all" or one name from VerifySuiteNames. Throws
// CheckError on anything else.
std::vector<SuiteReport> RunVerifySuites(const std::string& selector,
                                         const VerifyOptions& opt);

nlohmann::json VerifyReportJson(const VerifyOptions& opt,
                                const std::vector<SuiteReport>& reports);

}  // namespace samarl

#endif  // SAMARL_VERIFY_HPP_

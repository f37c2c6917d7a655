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

#ifndef SAMARL_ADAM_HPP_
#define SAMARL_ADAM_HPP_

#include <cmath>

#include <Eigen/Dense>

#include "samarl/check.hpp"

namespace samarl {

// Plain Adam with bias correction. Step moves `params` downhill along
// `grad`, so callers minimizing pass the loss gradient and callers
// maximizing pass its negation.
struct Adam {
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-5;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long long t = 0;

  Adam(int n, double learning_rate)
      : lr(learning_rate),
        m(Eigen::VectorXd::Zero(n)),
        v(Eigen::VectorXd::Zero(n)) {
    SAMARL_CHECK_GT(n, 0);
    SAMARL_CHECK_GT(learning_rate, 0.0);
  }

  void Step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    SAMARL_CHECK_EQ(params.size(), m.size());
    SAMARL_CHECK_EQ(grad.size(), m.size());
    SAMARL_CHECK_MSG(grad.allFinite(), "non-finite gradient");
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v.array().matrix() +
        (1.0 - beta2) * grad.array().square().matrix();
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    params -= (lr / c1) *
              (m.array() / ((v.array() / c2).sqrt() + eps)).matrix();
  }
};

// Scales `grad` down so its Euclidean norm is at most max_norm. Returns
// the pre-clip norm.
inline double ClipByGlobalNorm(Eigen::VectorXd& grad, double max_norm) {
  SAMARL_CHECK_GT(max_norm, 0.0);
  const double n = grad.norm();
  if (n > max_norm) grad *= max_norm / n;
  return n;
}

}  // namespace samarl

#endif  // SAMARL_ADAM_HPP_

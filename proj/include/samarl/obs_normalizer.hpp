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

#ifndef SAMARL_OBS_NORMALIZER_HPP_
#define SAMARL_OBS_NORMALIZER_HPP_

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "samarl/check.hpp"

namespace samarl {

// Running per-dimension mean and variance (Welford), used to whiten
// observations. Training code calls Update on collected observations;
// evaluation only reads, so the statistics are frozen there by
// construction.
struct ObsNormalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd m2;
  double count = 0.0;
  double clip = 10.0;

  explicit ObsNormalizer(int dim)
      : mean(Eigen::VectorXd::Zero(dim)), m2(Eigen::VectorXd::Zero(dim)) {
    SAMARL_CHECK_GT(dim, 0);
  }

  void Update(const Eigen::VectorXd& x) {
    SAMARL_CHECK_EQ(x.size(), mean.size());
    count += 1.0;
    const Eigen::VectorXd d1 = x - mean;
    mean += d1 / count;
    m2 += d1.cwiseProduct(x - mean);
  }

  Eigen::VectorXd Std() const {
    const double denom = count > 1.0 ? count : 1.0;
    return ((m2 / denom).array() + 1e-8).sqrt();
  }

  Eigen::VectorXd Normalize(const Eigen::VectorXd& x) const {
    SAMARL_CHECK_EQ(x.size(), mean.size());
    Eigen::VectorXd z = (x - mean).cwiseQuotient(Std());
    return z.cwiseMax(-clip).cwiseMin(clip);
  }

  nlohmann::json ToJson() const {
    nlohmann::json j;
    j["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
    j["m2"] = std::vector<double>(m2.data(), m2.data() + m2.size());
    j["count"] = count;
    j["clip"] = clip;
    return j;
  }

  static ObsNormalizer FromJson(const nlohmann::json& j) {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto m2 = j.at("m2").get<std::vector<double>>();
    SAMARL_CHECK_EQ(mean.size(), m2.size());
    ObsNormalizer n(static_cast<int>(mean.size()));
    n.mean = Eigen::Map<const Eigen::VectorXd>(
        mean.data(), static_cast<int>(mean.size()));
    n.m2 = Eigen::Map<const Eigen::VectorXd>(
        m2.data(), static_cast<int>(m2.size()));
    n.count = j.at("count").get<double>();
    n.clip = j.at("clip").get<double>();
    return n;
  }
};

}  // namespace samarl

#endif  // SAMARL_OBS_NORMALIZER_HPP_

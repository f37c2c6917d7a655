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

#include "samarl/mlp.hpp"

#include <cmath>

#include "samarl/check.hpp"

namespace samarl {

int Mlp::InputDim() const {
  SAMARL_CHECK(!w.empty());
  return static_cast<int>(w.front().cols());
}

int Mlp::OutputDim() const {
  SAMARL_CHECK(!w.empty());
  return static_cast<int>(w.back().rows());
}

void Mlp::Validate() const {
  SAMARL_CHECK(!w.empty());
  SAMARL_CHECK_EQ(w.size(), b.size());
  for (std::size_t l = 0; l < w.size(); ++l) {
    SAMARL_CHECK_EQ(w[l].rows(), b[l].size());
    if (l > 0) SAMARL_CHECK_EQ(w[l].cols(), w[l - 1].rows());
    SAMARL_CHECK_MSG(w[l].allFinite() && b[l].allFinite(),
                     "non-finite network parameter");
  }
}

Eigen::MatrixXd OrthogonalMatrix(int rows, int cols, double gain, Rng& rng) {
  SAMARL_CHECK_GT(rows, 0);
  SAMARL_CHECK_GT(cols, 0);
  const bool transposed = rows < cols;
  const int m = transposed ? cols : rows;
  const int n = transposed ? rows : cols;
  Eigen::MatrixXd a(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = Normal(rng, 0.0, 1.0);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, n);
  // Sign fix keeps the factor Haar distributed instead of biased by the
  // QR convention.
  const Eigen::MatrixXd r =
      qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  Eigen::MatrixXd out = transposed ? Eigen::MatrixXd(q.transpose()) : q;
  return gain * out;
}

Mlp MakeMlp(int input_dim, const std::vector<int>& hidden, int output_dim,
            double final_gain, Rng& rng) {
  SAMARL_CHECK_GT(input_dim, 0);
  SAMARL_CHECK_GT(output_dim, 0);
  Mlp mlp;
  int in = input_dim;
  for (int h : hidden) {
    SAMARL_CHECK_GT(h, 0);
    mlp.w.push_back(OrthogonalMatrix(h, in, std::sqrt(2.0), rng));
    mlp.b.push_back(Eigen::VectorXd::Zero(h));
    in = h;
  }
  mlp.w.push_back(OrthogonalMatrix(output_dim, in, final_gain, rng));
  mlp.b.push_back(Eigen::VectorXd::Zero(output_dim));
  mlp.Validate();
  return mlp;
}

Eigen::VectorXd MlpForward(const Mlp& mlp, const Eigen::VectorXd& x,
                           MlpActivations* acts) {
  SAMARL_CHECK_EQ(x.size(), mlp.InputDim());
  SAMARL_CHECK_MSG(x.allFinite(), "non-finite network input");
  mlp.Validate();
  if (acts != nullptr) {
    acts->input = x;
    acts->pre.clear();
    acts->post.clear();
  }
  Eigen::VectorXd h = x;
  const int layers = mlp.LayerCount();
  for (int l = 0; l < layers; ++l) {
    Eigen::VectorXd pre = mlp.w[l] * h + mlp.b[l];
    Eigen::VectorXd post =
        (l + 1 < layers) ? pre.cwiseMax(0.0).eval() : pre;
    if (acts != nullptr) {
      acts->pre.push_back(pre);
      acts->post.push_back(post);
    }
    h = std::move(post);
  }
  return h;
}

int MlpParamCount(const Mlp& mlp) {
  int n = 0;
  for (std::size_t l = 0; l < mlp.w.size(); ++l)
    n += static_cast<int>(mlp.w[l].size() + mlp.b[l].size());
  return n;
}

Eigen::VectorXd FlattenMlp(const Mlp& mlp) {
  Eigen::VectorXd flat(MlpParamCount(mlp));
  int k = 0;
  for (std::size_t l = 0; l < mlp.w.size(); ++l) {
    for (int i = 0; i < mlp.w[l].rows(); ++i)
      for (int j = 0; j < mlp.w[l].cols(); ++j) flat[k++] = mlp.w[l](i, j);
    for (int i = 0; i < mlp.b[l].size(); ++i) flat[k++] = mlp.b[l][i];
  }
  return flat;
}

void SetMlpParams(Mlp& mlp, const Eigen::VectorXd& flat) {
  SAMARL_CHECK_EQ(flat.size(), MlpParamCount(mlp));
  int k = 0;
  for (std::size_t l = 0; l < mlp.w.size(); ++l) {
    for (int i = 0; i < mlp.w[l].rows(); ++i)
      for (int j = 0; j < mlp.w[l].cols(); ++j) mlp.w[l](i, j) = flat[k++];
    for (int i = 0; i < mlp.b[l].size(); ++i) mlp.b[l][i] = flat[k++];
  }
}

Eigen::VectorXd BackpropParams(const Mlp& mlp, const MlpActivations& acts,
                               const Eigen::VectorXd& d_out) {
  const int layers = mlp.LayerCount();
  SAMARL_CHECK_EQ(static_cast<int>(acts.pre.size()), layers);
  SAMARL_CHECK_EQ(d_out.size(), mlp.OutputDim());

  std::vector<Eigen::MatrixXd> gw(layers);
  std::vector<Eigen::VectorXd> gb(layers);
  Eigen::VectorXd delta = d_out;
  for (int l = layers - 1; l >= 0; --l) {
    const Eigen::VectorXd& in = (l == 0) ? acts.input : acts.post[l - 1];
    gw[l] = delta * in.transpose();
    gb[l] = delta;
    if (l > 0) {
      delta = mlp.w[l].transpose() * delta;
      // ReLU mask of the layer below; subgradient 0 at the kink.
      for (int i = 0; i < delta.size(); ++i)
        if (acts.pre[l - 1][i] <= 0.0) delta[i] = 0.0;
    }
  }

  Eigen::VectorXd flat(MlpParamCount(mlp));
  int k = 0;
  for (int l = 0; l < layers; ++l) {
    for (int i = 0; i < gw[l].rows(); ++i)
      for (int j = 0; j < gw[l].cols(); ++j) flat[k++] = gw[l](i, j);
    for (int i = 0; i < gb[l].size(); ++i) flat[k++] = gb[l][i];
  }
  return flat;
}

Eigen::VectorXd ForwardTangent(const Mlp& mlp, const MlpActivations& acts,
                               const Eigen::VectorXd& tangent) {
  const int layers = mlp.LayerCount();
  SAMARL_CHECK_EQ(static_cast<int>(acts.pre.size()), layers);
  SAMARL_CHECK_EQ(tangent.size(), MlpParamCount(mlp));

  int k = 0;
  Eigen::VectorXd t = Eigen::VectorXd::Zero(mlp.InputDim());
  for (int l = 0; l < layers; ++l) {
    const Eigen::VectorXd& in = (l == 0) ? acts.input : acts.post[l - 1];
    const int rows = static_cast<int>(mlp.w[l].rows());
    const int cols = static_cast<int>(mlp.w[l].cols());
    Eigen::VectorXd t_pre(rows);
    for (int i = 0; i < rows; ++i) {
      double s = 0.0;
      for (int j = 0; j < cols; ++j) s += tangent[k++] * in[j];
      t_pre[i] = s;
    }
    t_pre += mlp.w[l] * t;
    for (int i = 0; i < rows; ++i) t_pre[i] += tangent[k++];
    if (l + 1 < layers)
      for (int i = 0; i < rows; ++i)
        if (acts.pre[l][i] <= 0.0) t_pre[i] = 0.0;
    t = std::move(t_pre);
  }
  return t;
}

nlohmann::json MlpToJson(const Mlp& mlp) {
  nlohmann::json j;
  j["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < mlp.w.size(); ++l) {
    nlohmann::json layer;
    layer["rows"] = mlp.w[l].rows();
    layer["cols"] = mlp.w[l].cols();
    j["layers"].push_back(layer);
  }
  const Eigen::VectorXd flat = FlattenMlp(mlp);
  j["params"] = std::vector<double>(flat.data(), flat.data() + flat.size());
  return j;
}

Mlp MlpFromJson(const nlohmann::json& j) {
  Mlp mlp;
  for (const auto& layer : j.at("layers")) {
    const int rows = layer.at("rows").get<int>();
    const int cols = layer.at("cols").get<int>();
    SAMARL_CHECK_GT(rows, 0);
    SAMARL_CHECK_GT(cols, 0);
    mlp.w.push_back(Eigen::MatrixXd::Zero(rows, cols));
    mlp.b.push_back(Eigen::VectorXd::Zero(rows));
  }
  const auto params = j.at("params").get<std::vector<double>>();
  SetMlpParams(mlp, Eigen::Map<const Eigen::VectorXd>(
                        params.data(), static_cast<int>(params.size())));
  mlp.Validate();
  return mlp;
}

}  // namespace samarl

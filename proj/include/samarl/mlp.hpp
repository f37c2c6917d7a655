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

#ifndef SAMARL_MLP_HPP_
#define SAMARL_MLP_HPP_

#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "samarl/rng.hpp"

namespace samarl {

// Small fully connected network with ReLU on every layer except the last.
// Gradients are computed by hand-rolled reverse mode, directional
// derivatives by forward mode; no tape, parameters are plain matrices.
struct Mlp {
  // w[l] has shape out_l x in_l; b[l] has length out_l. Layer l maps the
  // activation of layer l-1 (or the input for l = 0).
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;

  int InputDim() const;
  int OutputDim() const;
  int LayerCount() const { return static_cast<int>(w.size()); }

  // Shapes chain and every entry is finite.
  void Validate() const;
};

// Forward pass intermediates needed by the backward and tangent passes.
struct MlpActivations {
  Eigen::VectorXd input;
  std::vector<Eigen::VectorXd> pre;   // pre[l]: w[l] x + b[l]
  std::vector<Eigen::VectorXd> post;  // post[l]: activation applied
};

// Haar-distributed orthogonal matrix scaled by `gain`. For non-square
// shapes the semi-orthogonal factor with orthonormal rows or columns
// (whichever fit) is used.
Eigen::MatrixXd OrthogonalMatrix(int rows, int cols, double gain, Rng& rng);

// One hidden block per entry of `hidden`; hidden layers use gain sqrt(2)
// to match ReLU variance, the final layer uses `final_gain`. Biases zero.
Mlp MakeMlp(int input_dim, const std::vector<int>& hidden, int output_dim,
            double final_gain, Rng& rng);

// Output of the network. When `acts` is non-null the intermediates are
// stored for a later BackpropParams / ForwardTangent call.
Eigen::VectorXd MlpForward(const Mlp& mlp, const Eigen::VectorXd& x,
                           MlpActivations* acts = nullptr);

// Number of scalars in the flat parameter vector.
int MlpParamCount(const Mlp& mlp);

// Flat layout, fixed: for each layer in order, the weight matrix row by
// row, then the bias. FlattenMlp and SetMlpParams invert each other.
Eigen::VectorXd FlattenMlp(const Mlp& mlp);
void SetMlpParams(Mlp& mlp, const Eigen::VectorXd& flat);

// Reverse mode: gradient of d_out . output with respect to the flat
// parameters, for the forward pass recorded in `acts`.
Eigen::VectorXd BackpropParams(const Mlp& mlp, const MlpActivations& acts,
                               const Eigen::VectorXd& d_out);

// Forward mode: directional derivative of the output along the flat
// parameter tangent, input held fixed. acts must match the same x.
Eigen::VectorXd ForwardTangent(const Mlp& mlp, const MlpActivations& acts,
                               const Eigen::VectorXd& tangent);

nlohmann::json MlpToJson(const Mlp& mlp);
Mlp MlpFromJson(const nlohmann::json& j);

}  // namespace samarl

#endif  // SAMARL_MLP_HPP_

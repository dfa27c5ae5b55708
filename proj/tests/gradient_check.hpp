// Copyright 2026 The fixflow Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Central-difference gradient check shared by the unit tests and the
// acceptance binary.

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fixflow/rng.hpp"
#include "fixflow/trainer.hpp"

namespace gradcheck {

// Random chain of dense, relu and batch-norm layers on random data.
struct Case {
  fixflow::ModelGraph model;
  fixflow::Dataset data;
};

inline Case random_case(std::uint64_t seed) {
  fixflow::Rng rng(seed);
  const std::size_t n_in = 2 + rng.below(6);
  const std::size_t classes = 2 + rng.below(4);
  const std::size_t depth = 1 + rng.below(3);
  fixflow::ModelGraph g;
  g.input_shape = {n_in};
  fixflow::LayerNode input;
  input.name = "input";
  input.kind = fixflow::LayerKind::kInput;
  g.nodes.push_back(input);
  std::string prev = "input";
  std::size_t width = n_in;
  auto link = [&](fixflow::LayerNode node) {
    node.inputs = {prev};
    prev = node.name;
    g.nodes.push_back(std::move(node));
  };
  for (std::size_t k = 0; k <= depth; ++k) {
    const bool last = k == depth;
    const std::size_t out = last ? classes : 2 + rng.below(6);
    auto dense = fixflow::make_dense("d" + std::to_string(k), width, out);
    for (double& w : dense.params["weight"].data) w = rng.normal() * 0.7;
    for (double& b : dense.params["bias"].data) b = rng.normal() * 0.3;
    link(dense);
    width = out;
    if (last) break;
    if (rng.below(2) == 0) {
      fixflow::LayerNode bn;
      bn.name = "bn" + std::to_string(k);
      bn.kind = fixflow::LayerKind::kBatchNorm;
      std::vector<double> gamma(width), beta(width), mean(width, 0.0), var(width, 1.0);
      for (auto& v : gamma) v = rng.uniform(0.5, 1.5);
      for (auto& v : beta) v = rng.uniform(-0.5, 0.5);
      bn.params["gamma"] = fixflow::Tensor::vector(gamma);
      bn.params["beta"] = fixflow::Tensor::vector(beta);
      bn.params["moving_mean"] = fixflow::Tensor::vector(mean);
      bn.params["moving_variance"] = fixflow::Tensor::vector(var);
      link(bn);
    }
    fixflow::LayerNode relu;
    relu.name = "r" + std::to_string(k);
    relu.kind = fixflow::LayerKind::kRelu;
    link(relu);
  }
  fixflow::LayerNode sm;
  sm.name = "softmax";
  sm.kind = fixflow::LayerKind::kSoftmax;
  link(sm);

  fixflow::Dataset d;
  const std::size_t n = 8;
  d.class_count = static_cast<int>(classes);
  d.features.shape = {n, n_in};
  for (std::size_t i = 0; i < n * n_in; ++i) d.features.data.push_back(rng.normal());
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(rng.below(classes)));
  return {g, d};
}

// ||g - g_fd|| / max(||g||, ||g_fd||, tiny) over every trainable parameter,
// batch norm running on batch statistics.
inline double relative_error(std::uint64_t seed, double h = 1e-6, double l1 = 1e-3) {
  Case c = random_case(seed);
  fixflow::Network net(c.model);
  std::vector<std::size_t> rows(c.data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto mode = fixflow::BatchNormMode::kBatchStats;
  std::vector<double> grad;
  net.loss(c.data, rows, l1, &grad, mode);
  const auto p0 = net.parameters();
  std::vector<double> fd(p0.size());
  for (std::size_t i = 0; i < p0.size(); ++i) {
    auto p = p0;
    p[i] = p0[i] + h;
    net.set_parameters(p);
    const double up = net.loss(c.data, rows, l1, nullptr, mode);
    p[i] = p0[i] - h;
    net.set_parameters(p);
    const double down = net.loss(c.data, rows, l1, nullptr, mode);
    fd[i] = (up - down) / (2 * h);
  }
  net.set_parameters(p0);
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    diff += (grad[i] - fd[i]) * (grad[i] - fd[i]);
    na += grad[i] * grad[i];
    nb += fd[i] * fd[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

}  // namespace gradcheck

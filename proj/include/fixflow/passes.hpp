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

// Graph-rewrite optimizer passes. Every pass is a pure function from a graph
// to a new graph plus a report of what it rewrote. Fusions operate on
// real-valued parameters and must run before weights are quantized.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixflow/errors.hpp"
#include "fixflow/kernels.hpp"
#include "fixflow/model_ir.hpp"

namespace fixflow {

struct Rewrite {
  std::vector<std::string> removed;
  std::string absorbing;
  friend bool operator==(const Rewrite&, const Rewrite&) = default;
};

struct PassReport {
  std::string pass_name;
  std::vector<Rewrite> rewrites;
};

struct PassResult {
  ModelGraph graph;
  PassReport report;
};

inline nlohmann::json pass_report_to_json(const PassReport& r) {
  nlohmann::json rewrites = nlohmann::json::array();
  for (const auto& rw : r.rewrites) {
    rewrites.push_back({{"removed", rw.removed}, {"absorbing", rw.absorbing}});
  }
  return {{"pass", r.pass_name}, {"rewrites", rewrites}};
}

namespace detail {

// Removes `victim` from a chain, reconnecting its successor to its
// predecessor.
inline void splice_out(ModelGraph& g, const std::string& victim) {
  const LayerNode* node = g.find(victim);
  const std::vector<std::string> preds = node->inputs;
  for (auto& n : g.nodes) {
    for (auto& in : n.inputs) {
      if (in == victim) in = preds.empty() ? in : preds.front();
    }
  }
  std::erase_if(g.nodes, [&](const LayerNode& n) { return n.name == victim; });
}

inline const LayerNode* successor_of(const ModelGraph& g, const std::string& name) {
  for (const auto& n : g.nodes) {
    if (n.inputs.size() == 1 && n.inputs[0] == name) return &n;
  }
  return nullptr;
}

inline void require_valid(const ModelGraph& g, const char* pass) {
  auto diagnostics = validate(g);
  if (!diagnostics.empty()) {
    throw PassError(std::string(pass) + ": invalid input graph: " +
                    diagnostics.front().to_string());
  }
}

}  // namespace detail

// dense -> batch_norm  becomes  dense' with
//   W'_ij = s_i W_ij,  b'_i = s_i (b_i - mean_i) + beta_i,  s_i = gamma_i / sqrt(var_i + eps).
inline PassResult fuse_batchnorm_into_dense(const ModelGraph& graph) {
  detail::require_valid(graph, "fuse_batchnorm_into_dense");
  PassResult r{graph, {"fuse_batchnorm_into_dense", {}}};
  for (const LayerNode* node : ordered_layers(graph)) {
    if (node->kind != LayerKind::kBatchNorm) continue;
    const LayerNode* pred = graph.find(node->inputs.front());
    if (pred == nullptr || pred->kind != LayerKind::kDense) continue;

    const auto& gamma = node->param("gamma")->data;
    const auto& beta = node->param("beta")->data;
    const auto& mean = node->param("moving_mean")->data;
    const auto& var = node->param("moving_variance")->data;
    const double eps = batch_norm_epsilon(*node);

    LayerNode* dense = r.graph.find(pred->name);
    Tensor& w = dense->params.at("weight");
    Tensor& b = dense->params.at("bias");
    const std::size_t cols = w.shape[1];
    for (std::size_t i = 0; i < gamma.size(); ++i) {
      const double denom = var[i] + eps;
      if (!(denom > 0.0)) {
        throw PassError("batch norm '" + node->name + "' channel " + std::to_string(i) +
                        ": variance + epsilon must be positive");
      }
      const double s = gamma[i] / std::sqrt(denom);
      for (std::size_t j = 0; j < cols; ++j) w.data[i * cols + j] *= s;
      b.data[i] = s * (b.data[i] - mean[i]) + beta[i];
    }
    detail::splice_out(r.graph, node->name);
    r.report.rewrites.push_back({{node->name}, pred->name});
  }
  return r;
}

// batch_norm -> binary_tanh  becomes one threshold node (named after the
// activation) with t_i solving gamma_i (t_i - mean_i) / sqrt(var_i + eps) + beta_i = 0.
// A negative gamma flips the comparison; gamma_i == 0 yields the constant
// sign(beta_i) with sign(0) = +1.
inline PassResult fuse_batchnorm_into_binary_tanh(const ModelGraph& graph) {
  detail::require_valid(graph, "fuse_batchnorm_into_binary_tanh");
  PassResult r{graph, {"fuse_batchnorm_into_binary_tanh", {}}};
  for (const LayerNode* node : ordered_layers(graph)) {
    if (node->kind != LayerKind::kBatchNorm) continue;
    const LayerNode* next = detail::successor_of(graph, node->name);
    if (next == nullptr || next->kind != LayerKind::kBinaryTanh) continue;

    const auto& gamma = node->param("gamma")->data;
    const auto& beta = node->param("beta")->data;
    const auto& mean = node->param("moving_mean")->data;
    const auto& var = node->param("moving_variance")->data;
    const double eps = batch_norm_epsilon(*node);
    std::vector<double> threshold(gamma.size()), direction(gamma.size()),
        constant(gamma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i) {
      const double denom = var[i] + eps;
      if (!(denom > 0.0)) {
        throw PassError("batch norm '" + node->name + "' channel " + std::to_string(i) +
                        ": variance + epsilon must be positive");
      }
      const double sd = std::sqrt(denom);
      if (gamma[i] == 0.0) {
        direction[i] = 0.0;
        constant[i] = beta[i] >= 0.0 ? 1.0 : -1.0;
        threshold[i] = 0.0;
      } else {
        direction[i] = gamma[i] > 0.0 ? 1.0 : -1.0;
        threshold[i] = mean[i] - beta[i] * sd / gamma[i];
        constant[i] = 0.0;
      }
    }
    LayerNode* act = r.graph.find(next->name);
    act->kind = LayerKind::kThreshold;
    act->params = {{"threshold", Tensor::vector(threshold)},
                   {"direction", Tensor::vector(direction)},
                   {"constant", Tensor::vector(constant)}};
    detail::splice_out(r.graph, node->name);
    r.report.rewrites.push_back({{node->name}, next->name});
  }
  return r;
}

// A constant node followed by further layers is evaluated ahead of time and
// replaced by a single constant. Dense layers with all-zero weights start a
// constant run too. The folded node keeps both the real result ("value") and
// the bit-exact fixed-point result ("value_fixed"); runs whose fixed result
// is wider than 53 bits, or that reach a softmax, stop folding there.
inline PassResult constant_fold(const ModelGraph& graph) {
  detail::require_valid(graph, "constant_fold");
  PassResult r{graph, {"constant_fold", {}}};
  const auto chain = ordered_layers(graph);

  auto starts_constant = [](const LayerNode& n) {
    if (n.kind == LayerKind::kConstant) return true;
    if (n.kind != LayerKind::kDense) return false;
    const auto& w = n.param("weight")->data;
    return std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; });
  };
  auto foldable = [](const LayerNode& n) {
    return n.kind != LayerKind::kSoftmax && n.kind != LayerKind::kInput &&
           n.precision.result.width <= 53;
  };

  std::size_t i = 0;
  while (i < chain.size()) {
    if (!starts_constant(*chain[i]) || !foldable(*chain[i])) {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    while (end < chain.size() && foldable(*chain[end])) ++end;
    // A lone constant node is already folded; a lone zero-weight dense still
    // becomes a constant.
    if (end - i == 1 && chain[i]->kind == LayerKind::kConstant) {
      i = end;
      continue;
    }
    std::span<const LayerNode* const> run(chain.data() + i, end - i);

    // Real value: evaluate the run on a dummy input of the right width.
    const LayerNode* pred = graph.find(run.front()->inputs.front());
    const std::size_t in_width = [&] {
      const auto widths = infer_widths(graph);
      for (std::size_t k = 0; k < chain.size(); ++k) {
        if (chain[k] == pred) return widths[k];
      }
      return graph.input_width();
    }();
    std::vector<double> real(in_width, 0.0);
    ModelGraph sub;
    sub.input_shape = {in_width};
    sub.nodes.push_back({"__fold_input", LayerKind::kInput, {}, PrecisionSet{}, 1, false, {}});
    for (const LayerNode* n : run) {
      LayerNode copy = *n;
      copy.inputs = {sub.nodes.back().name};
      sub.nodes.push_back(std::move(copy));
    }
    real = run_real(sub, real);

    // Fixed value: the run ignores its input, so any input vector works.
    auto compiled = compile_chain(run, pred->precision.result, in_width);
    FixedVector x{pred->precision.result, std::vector<std::int64_t>(in_width, 0)};
    const FixedVector fixed = execute(compiled, x, false).fixed_output;

    LayerNode folded;
    folded.name = run.back()->name;
    folded.kind = LayerKind::kConstant;
    folded.params = {{"value", Tensor::vector(real)},
                     {"value_fixed", Tensor::vector(fixed.to_reals())}};
    folded.precision = PrecisionSet::uniform(fixed.spec);
    folded.inputs = run.front()->inputs;

    Rewrite rw;
    rw.absorbing = folded.name;
    for (std::size_t k = 0; k + 1 < run.size(); ++k) {
      rw.removed.push_back(run[k]->name);
      std::erase_if(r.graph.nodes,
                    [&](const LayerNode& n) { return n.name == run[k]->name; });
    }
    if (run.size() == 1) rw.removed.push_back(run.front()->name);
    *r.graph.find(folded.name) = std::move(folded);
    r.report.rewrites.push_back(std::move(rw));
    i = end;
  }
  return r;
}

// The standard pipeline: dense fusion first, then activation fusion for any
// batch norm left over, then constant folding.
inline std::pair<ModelGraph, std::vector<PassReport>> optimize(const ModelGraph& graph) {
  std::vector<PassReport> reports;
  auto a = fuse_batchnorm_into_dense(graph);
  reports.push_back(a.report);
  auto b = fuse_batchnorm_into_binary_tanh(a.graph);
  reports.push_back(b.report);
  auto c = constant_fold(b.graph);
  reports.push_back(c.report);
  return {std::move(c.graph), std::move(reports)};
}

}  // namespace fixflow

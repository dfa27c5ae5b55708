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

// Static cost model for dense chains: DSP tiling per multiply, multipliers
// under a reuse factor, initiation interval, latency, throughput and BOPs.
// Counts are a model, not vendor synthesis results.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixflow/model_ir.hpp"
#include "fixflow/pruning.hpp"

namespace fixflow {

struct EstimatorOptions {
  double clock_mhz = 200.0;
  int lut_threshold = 9;       // multiplies with both operands this narrow use LUTs
  int pipeline_constant = 3;   // cycles added to every layer's latency
  int interconnect_cycles = 1; // per boundary between consecutive layers
  double lut_c1 = 1.0;         // per LUT-mapped multiplier bit product
  double lut_c2 = 1.0;         // per output accumulator bit
  // Without a PruneState, weights that quantize to zero are not multiplied.
  bool zero_suppression = true;
};

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// DSP blocks for one b1 x b2 multiply: 0 when LUT-mapped, else the cheaper
// orientation of tiling 25 x 18 multipliers.
inline int dsp_per_multiply(int b1, int b2, int lut_threshold = 9) {
  if (b1 < 1 || b2 < 1) throw Error("dsp_per_multiply: widths must be >= 1");
  if (std::max(b1, b2) <= lut_threshold) return 0;
  const auto tiles = [](int a, int b) { return ceil_div(a, 25) * ceil_div(b, 18); };
  return static_cast<int>(std::min(tiles(b1, b2), tiles(b2, b1)));
}

struct LayerResource {
  std::string layer;
  std::size_t n_in = 0, n_out = 0;
  int b_w = 0, b_a = 0, b_acc = 0;
  double f_p = 0.0;
  std::int64_t n_mult = 0;
  std::int64_t multipliers = 0;
  int dsp_per_multiply = 0;
  std::int64_t dsp = 0;
  std::int64_t lut = 0;  // heuristic
  double bops = 0.0;
};

struct LayerTiming {
  std::string layer;
  int reuse_factor = 1;
  std::int64_t ii_cycles = 0;
  std::int64_t latency_cycles = 0;
};

struct ResourceEstimate {
  std::vector<LayerResource> layers;
  std::int64_t dsp_total = 0;
  std::int64_t lut_estimate = 0;
  std::int64_t multiplications = 0;
  std::int64_t multipliers = 0;
  double bops_total = 0.0;
};

struct TimingEstimate {
  std::vector<LayerTiming> layers;
  double clock_mhz = 0.0;
  std::int64_t total_latency_cycles = 0;
  std::int64_t model_ii_cycles = 0;
  double ii_ns() const { return clock_mhz > 0 ? model_ii_cycles * 1000.0 / clock_mhz : 0.0; }
  double latency_ns() const { return clock_mhz > 0 ? total_latency_cycles * 1000.0 / clock_mhz : 0.0; }
  double throughput_per_second() const {
    return model_ii_cycles > 0 ? clock_mhz * 1e6 / static_cast<double>(model_ii_cycles) : 0.0;
  }
};

struct Estimate {
  ResourceEstimate resources;
  TimingEstimate timing;
};

// `b_a` is the width of the layer's input activations.
inline std::pair<LayerResource, LayerTiming> estimate_layer(const LayerNode& layer, int b_a,
                                                            double f_p,
                                                            const EstimatorOptions& opt = {}) {
  if (layer.kind != LayerKind::kDense) throw Error("estimate_layer: '" + layer.name + "' is not dense");
  if (layer.reuse_factor < 1) throw Error("estimate_layer: reuse factor must be >= 1");
  const Tensor& w = *layer.param("weight");
  LayerResource r;
  r.layer = layer.name;
  r.n_out = w.shape[0];
  r.n_in = w.shape[1];
  r.b_w = layer.precision.weight.width;
  r.b_a = b_a;
  r.b_acc = layer.precision.accumulator.width;
  r.f_p = f_p;
  const auto total = static_cast<double>(r.n_in * r.n_out);
  r.n_mult = std::llround((1.0 - f_p) * total);
  r.multipliers = ceil_div(r.n_mult, layer.reuse_factor);
  r.dsp_per_multiply = dsp_per_multiply(r.b_w, r.b_a, opt.lut_threshold);
  r.dsp = r.multipliers * r.dsp_per_multiply;
  const double lut_mapped = r.dsp_per_multiply == 0 ? static_cast<double>(r.multipliers) : 0.0;
  r.lut = std::llround(opt.lut_c1 * lut_mapped * r.b_w * r.b_a +
                       opt.lut_c2 * static_cast<double>(r.n_out) * r.b_acc);
  r.bops = compute_bops(r.n_in, r.n_out, r.b_w, r.b_a, f_p);

  LayerTiming t;
  t.layer = layer.name;
  t.reuse_factor = layer.reuse_factor;
  t.ii_cycles = layer.reuse_factor;
  const auto log_in = static_cast<std::int64_t>(std::ceil(std::log2(static_cast<double>(r.n_in))));
  t.latency_cycles = layer.reuse_factor + log_in + opt.pipeline_constant;
  return {r, t};
}

// Pruned fraction per dense layer: from the masks when a PruneState is
// given, else the zero fraction of the weights quantized to their precision
// (when zero suppression is on), else 0. Only dense layers are costed.
inline Estimate estimate_model(const ModelGraph& graph, const PruneState* prune = nullptr,
                               const EstimatorOptions& opt = {}) {
  Estimate e;
  e.timing.clock_mhz = opt.clock_mhz;
  for (const LayerNode* node : ordered_layers(graph)) {
    if (node->kind != LayerKind::kDense) continue;
    double f_p = 0.0;
    const auto& w = node->param("weight")->data;
    if (prune != nullptr && prune->masks.contains(node->name)) {
      const auto& m = prune->masks.at(node->name).data;
      f_p = static_cast<double>(std::count(m.begin(), m.end(), 0.0)) / static_cast<double>(m.size());
    } else if (opt.zero_suppression) {
      std::size_t zeros = 0;
      for (double v : w) zeros += quantize(v, node->precision.weight).raw == 0 ? 1 : 0;
      f_p = static_cast<double>(zeros) / static_cast<double>(w.size());
    }
    auto [r, t] = estimate_layer(*node, input_precision(graph, *node).width, f_p, opt);
    e.resources.dsp_total += r.dsp;
    e.resources.lut_estimate += r.lut;
    e.resources.multiplications += r.n_mult;
    e.resources.multipliers += r.multipliers;
    e.resources.bops_total += r.bops;
    e.resources.layers.push_back(r);
    e.timing.total_latency_cycles += t.latency_cycles;
    e.timing.model_ii_cycles = std::max(e.timing.model_ii_cycles, t.ii_cycles);
    e.timing.layers.push_back(t);
  }
  if (!e.timing.layers.empty()) {
    e.timing.total_latency_cycles +=
        opt.interconnect_cycles * static_cast<std::int64_t>(e.timing.layers.size() - 1);
  }
  return e;
}

// Copy of `graph` with every dense layer's reuse factor set to `reuse`.
inline ModelGraph with_reuse_factor(const ModelGraph& graph, int reuse) {
  ModelGraph g = graph;
  for (auto& node : g.nodes) {
    if (node.kind == LayerKind::kDense) node.reuse_factor = reuse;
  }
  return g;
}

inline nlohmann::json estimate_to_json(const Estimate& e) {
  using nlohmann::json;
  json layers = json::array();
  for (std::size_t i = 0; i < e.resources.layers.size(); ++i) {
    const auto& r = e.resources.layers[i];
    const auto& t = e.timing.layers[i];
    layers.push_back({{"layer", r.layer},
                      {"n_in", r.n_in},
                      {"n_out", r.n_out},
                      {"weight_bits", r.b_w},
                      {"activation_bits", r.b_a},
                      {"accumulator_bits", r.b_acc},
                      {"f_p", r.f_p},
                      {"multiplications", r.n_mult},
                      {"multipliers", r.multipliers},
                      {"dsp_per_multiply", r.dsp_per_multiply},
                      {"dsp", r.dsp},
                      {"lut_estimate", r.lut},
                      {"bops", r.bops},
                      {"reuse_factor", t.reuse_factor},
                      {"ii_cycles", t.ii_cycles},
                      {"latency_cycles", t.latency_cycles}});
  }
  return {{"clock_mhz", e.timing.clock_mhz},
          {"layers", layers},
          {"totals",
           {{"dsp", e.resources.dsp_total},
            {"lut_estimate", e.resources.lut_estimate},
            {"multiplications", e.resources.multiplications},
            {"multipliers", e.resources.multipliers},
            {"bops", e.resources.bops_total},
            {"latency_cycles", e.timing.total_latency_cycles},
            {"ii_cycles", e.timing.model_ii_cycles},
            {"ii_ns", e.timing.ii_ns()},
            {"latency_ns", e.timing.latency_ns()},
            {"throughput_per_second", e.timing.throughput_per_second()}}}};
}

}  // namespace fixflow

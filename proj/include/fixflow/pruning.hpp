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

// Magnitude pruning with layer-normalized global ranking, iterative
// L1/retrain, lottery-ticket rewinding and quantization-aware pruning, plus
// bit-operation (BOPs) accounting.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "fixflow/dataset.hpp"
#include "fixflow/errors.hpp"
#include "fixflow/model_ir.hpp"
#include "fixflow/trainer.hpp"

namespace fixflow {

// BOPs of an n-input, m-output dense layer:
// m * n * ((1 - f_p) * b_a * b_w + b_a + b_w + log2(n)).
inline double compute_bops(std::size_t n, std::size_t m, int b_w, int b_a, double f_p) {
  if (n < 1 || m < 1 || b_w < 1 || b_a < 1 || !(f_p >= 0.0 && f_p <= 1.0)) {
    throw Error("compute_bops: n, m, bits must be >= 1 and f_p in [0, 1]");
  }
  const double nn = static_cast<double>(n);
  return static_cast<double>(m) * nn *
         ((1.0 - f_p) * b_a * b_w + b_a + b_w + std::log2(nn));
}

// Fully connected chain widths {in, h1, ..., out} at uniform bit width and
// pruned fraction, summed over layers.
inline double chain_bops(const std::vector<std::size_t>& widths, int bits, double f_p) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    total += compute_bops(widths[k], widths[k + 1], bits, bits, f_p);
  }
  return total;
}

struct LayerBops {
  std::string layer;
  std::size_t n = 0, m = 0;
  int b_w = 0, b_a = 0;
  double f_p = 0.0;
  double bops = 0.0;
};

// Per dense layer: b_w is the weight precision width, b_a the width of the
// layer's input, f_p the zero fraction of its weights.
inline std::vector<LayerBops> model_bops(const ModelGraph& model) {
  std::vector<LayerBops> out;
  for (const LayerNode* node : ordered_layers(model)) {
    if (node->kind != LayerKind::kDense) continue;
    const Tensor& w = *node->param("weight");
    LayerBops l;
    l.layer = node->name;
    l.m = w.shape[0];
    l.n = w.shape[1];
    l.b_w = node->precision.weight.width;
    l.b_a = input_precision(model, *node).width;
    const auto zeros = std::count(w.data.begin(), w.data.end(), 0.0);
    l.f_p = static_cast<double>(zeros) / static_cast<double>(w.data.size());
    l.bops = compute_bops(l.n, l.m, l.b_w, l.b_a, l.f_p);
    out.push_back(l);
  }
  return out;
}

inline double total_bops(const std::vector<LayerBops>& layers) {
  double t = 0.0;
  for (const auto& l : layers) t += l.bops;
  return t;
}

// ---------------------------------------------------------------------------

struct PruneRecord {
  int iteration = 0;
  double f_p = 0.0;  // global pruned fraction of dense weights
  std::map<std::string, double> layer_f_p;
  double accuracy = 0.0;
  double auc = 0.0;
  double bops = 0.0;
};

struct PruneState {
  MaskSet masks;
  ModelGraph initial;  // weights and biases at initialization
  std::vector<PruneRecord> history;

  std::size_t total_weights() const {
    std::size_t n = 0;
    for (const auto& [name, m] : masks) n += m.data.size();
    return n;
  }
  std::size_t pruned_weights() const {
    std::size_t n = 0;
    for (const auto& [name, m] : masks) n += static_cast<std::size_t>(std::count(m.data.begin(), m.data.end(), 0.0));
    return n;
  }
  double pruned_fraction() const {
    const auto total = total_weights();
    return total == 0 ? 0.0 : static_cast<double>(pruned_weights()) / static_cast<double>(total);
  }
  std::map<std::string, double> layer_fractions() const {
    std::map<std::string, double> f;
    for (const auto& [name, m] : masks) {
      f[name] = static_cast<double>(std::count(m.data.begin(), m.data.end(), 0.0)) /
                static_cast<double>(m.data.size());
    }
    return f;
  }
};

// All-ones masks for every dense layer; `model` becomes the rewind snapshot.
inline PruneState init_prune_state(const ModelGraph& model) {
  PruneState s;
  s.initial = model;
  for (const LayerNode* node : ordered_layers(model)) {
    if (node->kind != LayerKind::kDense) continue;
    const Tensor& w = *node->param("weight");
    s.masks[node->name] = Tensor{w.shape, std::vector<double>(w.data.size(), 1.0)};
  }
  return s;
}

// Zeroes masked weights in place.
inline void apply_masks(ModelGraph& model, const MaskSet& masks) {
  for (const auto& [name, m] : masks) {
    LayerNode* node = model.find(name);
    if (node == nullptr) throw Error("mask for unknown layer '" + name + "'");
    auto& w = node->params["weight"].data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (m.data[i] == 0.0) w[i] = 0.0;
    }
  }
}

// Lottery-ticket rewind: every parameter back to the snapshot, then masks.
inline ModelGraph rewind(const PruneState& state) {
  ModelGraph g = state.initial;
  apply_masks(g, state.masks);
  return g;
}

namespace detail {

struct Candidate {
  double ratio;
  std::size_t layer;
  std::size_t index;
};

inline bool candidate_less(const Candidate& a, const Candidate& b) {
  return std::tie(a.ratio, a.layer, a.index) < std::tie(b.ratio, b.layer, b.index);
}

}  // namespace detail

// Prunes surviving weights in order of |w| / max_layer |w| (ties by layer
// then flat index) until the pruned fraction reaches `fraction`, globally or
// per layer. A layer whose survivors are all zero ranks them at 0.
inline void rank_and_mask(const ModelGraph& model, PruneState& state, double fraction,
                          bool per_layer = false) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error("prune fraction must be in [0, 1]");
  std::vector<std::string> names;
  for (const LayerNode* node : ordered_layers(model)) {
    if (node->kind == LayerKind::kDense) names.push_back(node->name);
  }
  for (const auto& name : names) {
    if (!state.masks.contains(name)) throw Error("no mask for dense layer '" + name + "'");
  }

  std::vector<std::vector<detail::Candidate>> by_layer(names.size());
  for (std::size_t l = 0; l < names.size(); ++l) {
    const auto& w = model.find(names[l])->param("weight")->data;
    const auto& mask = state.masks.at(names[l]).data;
    double peak = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (mask[i] != 0.0) peak = std::max(peak, std::abs(w[i]));
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (mask[i] == 0.0) continue;
      by_layer[l].push_back({peak > 0.0 ? std::abs(w[i]) / peak : 0.0, l, i});
    }
  }

  auto prune = [&](std::vector<detail::Candidate>& pool, std::size_t total, std::size_t pruned) {
    const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
    if (target < pruned) {
      throw Error("prune fraction " + std::to_string(fraction) + " is below the current pruned fraction");
    }
    const std::size_t k = target - pruned;
    if (k == 0) return;
    if (pool.size() < k) throw Error("no surviving weights left to prune");
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end(),
                      detail::candidate_less);
    for (std::size_t c = 0; c < k; ++c) {
      state.masks[names[pool[c].layer]].data[pool[c].index] = 0.0;
    }
  };

  if (per_layer) {
    for (std::size_t l = 0; l < names.size(); ++l) {
      const auto& mask = state.masks.at(names[l]).data;
      const auto pruned = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 0.0));
      prune(by_layer[l], mask.size(), pruned);
    }
  } else {
    std::vector<detail::Candidate> pool;
    for (auto& layer : by_layer) pool.insert(pool.end(), layer.begin(), layer.end());
    prune(pool, state.total_weights(), state.pruned_weights());
  }
}

// ---------------------------------------------------------------------------

enum class PruneMethod { kL1Retrain, kLotteryRewind, kQap };

inline std::string_view to_string(PruneMethod m) {
  switch (m) {
    case PruneMethod::kL1Retrain: return "l1";
    case PruneMethod::kLotteryRewind: return "lt";
    case PruneMethod::kQap: return "qap";
  }
  return "l1";
}

struct PruneSchedule {
  double increment = 0.10;  // of the original weight count, per iteration
  double target_fraction = 0.8;
  int retrain_epochs = 10;
  PruneMethod method = PruneMethod::kL1Retrain;
  bool per_layer = false;
  // Bit width assumed for unquantized weights/activations in BOPs records.
  int float_bits = 32;

  void check() const {
    if (!(target_fraction >= 0.0 && target_fraction <= 1.0)) {
      throw Error("target_fraction must be in [0, 1]");
    }
    if (target_fraction > 0.0 && !(increment > 0.0 && increment <= target_fraction)) {
      throw Error("increment must satisfy 0 < increment <= target_fraction");
    }
    if (retrain_epochs < 1) throw Error("retrain_epochs must be >= 1");
  }
};

struct PruneOutcome {
  ModelGraph model;
  PruneState state;
};

// Called after masking (and rewinding) each iteration, before retraining.
using PruneObserver = std::function<void(int iteration, const ModelGraph& model, const PruneState&)>;

namespace detail {

// BOPs with quantizer widths where present, `float_bits` elsewhere; a dense
// layer's activation width comes from the relu quantizer feeding it.
inline double schedule_bops(const ModelGraph& model, const PruneState& state,
                            const std::map<std::string, QuantizerSpec>& quantizers,
                            int float_bits) {
  double total = 0.0;
  int act_bits = float_bits;
  bool first = true;
  for (const LayerNode* node : ordered_layers(model)) {
    const auto q = quantizers.find(node->name);
    if (node->kind == LayerKind::kRelu && q != quantizers.end()) act_bits = q->second.bits;
    if (node->kind != LayerKind::kDense) continue;
    const int bw = q != quantizers.end() ? q->second.bits : float_bits;
    const int ba = first ? bw : act_bits;
    const Tensor& w = *node->param("weight");
    const auto& mask = state.masks.at(node->name).data;
    const double fp = static_cast<double>(std::count(mask.begin(), mask.end(), 0.0)) /
                      static_cast<double>(mask.size());
    total += compute_bops(w.shape[1], w.shape[0], bw, ba, fp);
    act_bits = float_bits;
    first = false;
  }
  return total;
}

}  // namespace detail

// Trains `model` (taken as the initialization), then prunes in increments
// of the original weight count up to the target, retraining after each
// step. l1 keeps the trained survivors; lt and qap rewind them to the
// initialization; qap retrains with train_qat.
inline PruneOutcome prune_iterative(const ModelGraph& model, const Dataset& data,
                                    const PruneSchedule& schedule, const TrainingConfig& cfg,
                                    const Dataset* eval_data = nullptr,
                                    const PruneObserver& observer = {}) {
  schedule.check();
  PruneOutcome out;
  out.state = init_prune_state(model);
  out.model = model;
  if (schedule.target_fraction == 0.0) return out;

  const bool qat = schedule.method == PruneMethod::kQap;
  const auto quantizers = qat ? cfg.quantizers : std::map<std::string, QuantizerSpec>{};
  auto run = [&](const ModelGraph& m, int epochs, std::uint64_t seed) {
    TrainingConfig c = cfg;
    c.epochs = epochs;
    c.seed = seed;
    return qat ? train_qat(m, data, c, &out.state.masks).model
               : train(m, data, c, &out.state.masks).model;
  };
  const Dataset& scored = eval_data != nullptr ? *eval_data : data;

  ModelGraph current = run(model, cfg.epochs, cfg.seed);
  const std::size_t total = out.state.total_weights();
  const double eps = 0.5 / static_cast<double>(std::max<std::size_t>(total, 1));
  for (int iteration = 1;; ++iteration) {
    const double fraction = std::min(schedule.target_fraction, schedule.increment * iteration);
    rank_and_mask(current, out.state, fraction, schedule.per_layer);
    if (schedule.method == PruneMethod::kL1Retrain) {
      apply_masks(current, out.state.masks);
    } else {
      current = rewind(out.state);
    }
    if (observer) observer(iteration, current, out.state);
    current = run(current, schedule.retrain_epochs, cfg.seed + static_cast<std::uint64_t>(iteration));

    const Evaluation e = evaluate_quantized(current, scored, quantizers);
    PruneRecord r;
    r.iteration = iteration;
    r.f_p = out.state.pruned_fraction();
    r.layer_f_p = out.state.layer_fractions();
    r.accuracy = e.accuracy;
    r.auc = e.mean_auc;
    r.bops = detail::schedule_bops(current, out.state, quantizers, schedule.float_bits);
    out.state.history.push_back(r);
    if (fraction >= schedule.target_fraction - eps) break;
  }
  out.model = current;
  return out;
}

inline std::string prune_history_to_csv(const std::vector<PruneRecord>& history) {
  std::ostringstream os;
  os.precision(10);
  os << "iteration,f_p,accuracy,AUC,BOPs\n";
  for (const auto& r : history) {
    os << r.iteration << "," << r.f_p << "," << r.accuracy << "," << r.auc << "," << r.bops << "\n";
  }
  return os.str();
}

}  // namespace fixflow

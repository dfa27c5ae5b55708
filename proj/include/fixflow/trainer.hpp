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

// Small-scale MLP training: dense/ReLU/batch-norm/softmax chains, mean
// cross-entropy with optional L1 on dense weights, SGD or Adam, pruning
// masks, and quantization-aware training with a straight-through estimator.
// All arithmetic is binary64; quantizers are simulated in the forward pass.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fixflow/dataset.hpp"
#include "fixflow/errors.hpp"
#include "fixflow/fixed_point.hpp"
#include "fixflow/kernels.hpp"
#include "fixflow/model_ir.hpp"
#include "fixflow/rng.hpp"

namespace fixflow {

enum class QuantizerMode { kFixed, kBinary, kTernary };

// Forward-pass quantizer. Fixed mode maps w to
// alpha * quantize(w / alpha, fixed<bits, integer_bits, rnd, sat>).
// Binary maps to {-alpha, +alpha} (w >= 0 -> +alpha); ternary to
// {-alpha, 0, +alpha} with threshold alpha / 2.
struct QuantizerSpec {
  int bits = 16;
  int integer_bits = 6;
  double alpha = 1.0;
  QuantizerMode mode = QuantizerMode::kFixed;
  bool is_signed = true;

  static QuantizerSpec fixed(int bits, int integer_bits, bool is_signed = true) {
    return {bits, integer_bits, 1.0, QuantizerMode::kFixed, is_signed};
  }
  static QuantizerSpec binary(double alpha = 1.0) {
    return {1, 1, alpha, QuantizerMode::kBinary, true};
  }
  static QuantizerSpec ternary(double alpha = 1.0) {
    return {2, 2, alpha, QuantizerMode::kTernary, true};
  }

  FixedPointSpec grid() const {
    return {bits, integer_bits, is_signed, Rounding::kRoundHalfUp, Overflow::kSaturate};
  }

  void check() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("quantizer alpha must be > 0");
    if (mode == QuantizerMode::kFixed && !grid().valid()) {
      throw Error("quantizer grid " + grid().to_string() + " is not a valid precision");
    }
  }

  double apply(double w) const {
    switch (mode) {
      case QuantizerMode::kFixed:
        return alpha * quantize(w / alpha, grid()).to_real();
      case QuantizerMode::kBinary:
        return w >= 0.0 ? alpha : -alpha;
      case QuantizerMode::kTernary:
        return w > alpha / 2 ? alpha : (w < -alpha / 2 ? -alpha : 0.0);
    }
    return w;
  }

  // Straight-through estimator: identity gradient inside the representable
  // range, zero outside it.
  bool passes_gradient(double w) const {
    if (mode == QuantizerMode::kFixed) {
      const auto g = grid();
      return w >= alpha * g.min_real() && w <= alpha * g.max_real();
    }
    return std::abs(w) <= alpha;
  }

  // Precision that holds every value apply() can return; needs a
  // power-of-two alpha.
  FixedPointSpec export_spec() const {
    int exponent = 0;
    const double mant = std::frexp(alpha, &exponent);
    if (mant != 0.5) throw Error("cannot export a quantizer whose alpha is not a power of two");
    const int shift = exponent - 1;
    if (mode == QuantizerMode::kFixed) {
      auto s = grid();
      s.integer_bits += shift;
      return s;
    }
    return {2, 2 + shift, true, Rounding::kRoundHalfUp, Overflow::kSaturate};
  }

  friend bool operator==(const QuantizerSpec&, const QuantizerSpec&) = default;
};

inline std::string_view to_string(QuantizerMode m) {
  switch (m) {
    case QuantizerMode::kFixed: return "fixed";
    case QuantizerMode::kBinary: return "binary";
    case QuantizerMode::kTernary: return "ternary";
  }
  return "fixed";
}

enum class OptimizerKind { kSgd, kAdam };

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Quantizers are keyed by layer name: on a dense layer they quantize the
// weights (and, in fixed mode, the biases); on a relu they quantize the
// activation output.
struct TrainingConfig {
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  AdamParams adam;
  int epochs = 10;
  std::size_t batch_size = 32;
  double l1_lambda = 0.0;
  std::uint64_t seed = 1;
  double batch_norm_momentum = 0.99;
  std::map<std::string, QuantizerSpec> quantizers;

  void check() const {
    if (!(learning_rate > 0.0)) throw Error("learning_rate must be > 0");
    if (epochs < 1) throw Error("epochs must be >= 1");
    if (batch_size < 1) throw Error("batch_size must be >= 1");
    if (!(l1_lambda >= 0.0)) throw Error("l1_lambda must be >= 0");
    for (const auto& [name, q] : quantizers) q.check();
  }
};

// Binary masks (1 keep, 0 pruned) keyed by dense layer name, shaped like the
// weight matrix.
using MaskSet = std::map<std::string, Tensor>;

struct TraceRow {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  ModelGraph model;
  std::vector<TraceRow> trace;
};

// ---------------------------------------------------------------------------

enum class BatchNormMode {
  kTrain,       // batch statistics, moving averages updated
  kBatchStats,  // batch statistics, no state change
  kInference,   // moving statistics
};

class Network {
 public:
  explicit Network(const ModelGraph& graph) : graph_(graph) {
    const auto diagnostics = validate(graph);
    if (!diagnostics.empty()) throw ValidationError(diagnostics.front().to_string());
    const auto chain = ordered_layers(graph);
    std::size_t width = graph.input_width();
    input_width_ = width;
    for (std::size_t k = 0; k < chain.size(); ++k) {
      const LayerNode& node = *chain[k];
      Layer layer;
      layer.name = node.name;
      layer.kind = node.kind;
      layer.in = width;
      switch (node.kind) {
        case LayerKind::kInput:
          continue;
        case LayerKind::kDense:
          layer.out = node.param("weight")->shape[0];
          layer.a = node.param("weight")->data;
          layer.b = node.param("bias")->data;
          break;
        case LayerKind::kRelu:
          layer.out = width;
          break;
        case LayerKind::kBatchNorm:
          layer.out = width;
          layer.a = node.param("gamma")->data;
          layer.b = node.param("beta")->data;
          layer.mean = node.param("moving_mean")->data;
          layer.var = node.param("moving_variance")->data;
          layer.eps = batch_norm_epsilon(node);
          break;
        case LayerKind::kSoftmax:
          if (k + 1 != chain.size()) throw TrainingError("softmax must be the last layer");
          has_softmax_ = true;
          continue;
        default:
          throw TrainingError("layer '" + node.name + "': kind " +
                              std::string(to_string(node.kind)) + " is not trainable");
      }
      width = layer.out;
      layers_.push_back(std::move(layer));
    }
    output_width_ = width;
  }

  std::size_t input_width() const { return input_width_; }
  std::size_t output_width() const { return output_width_; }

  void set_quantizers(const std::map<std::string, QuantizerSpec>& quantizers) {
    for (auto& layer : layers_) layer.quantizer.reset();
    for (const auto& [name, q] : quantizers) {
      Layer* layer = find(name);
      if (layer == nullptr || (layer->kind != LayerKind::kDense && layer->kind != LayerKind::kRelu)) {
        throw TrainingError("quantizer for '" + name + "' does not name a dense or relu layer");
      }
      q.check();
      layer->quantizer = q;
    }
  }

  void set_masks(const MaskSet& masks) {
    for (auto& layer : layers_) layer.mask.clear();
    for (const auto& [name, m] : masks) {
      Layer* layer = find(name);
      if (layer == nullptr || layer->kind != LayerKind::kDense) {
        throw TrainingError("mask for '" + name + "' does not name a dense layer");
      }
      if (m.data.size() != layer->a.size()) {
        throw TrainingError("mask for '" + name + "' has the wrong size");
      }
      layer->mask = m.data;
    }
    apply_masks();
  }

  // Flattened trainable parameters: per layer in order, dense weight then
  // bias, batch-norm gamma then beta.
  std::vector<double> parameters() const {
    std::vector<double> p;
    for (const auto& layer : layers_) {
      p.insert(p.end(), layer.a.begin(), layer.a.end());
      p.insert(p.end(), layer.b.begin(), layer.b.end());
    }
    return p;
  }

  void set_parameters(std::span<const double> p) {
    std::size_t at = 0;
    for (auto& layer : layers_) {
      for (double& v : layer.a) v = p[at++];
      for (double& v : layer.b) v = p[at++];
    }
    if (at != p.size()) throw TrainingError("parameter vector has the wrong size");
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer.a.size() + layer.b.size();
    return n;
  }

  // Mean cross-entropy over `rows` plus l1_lambda * sum|w| over dense
  // weights. When `grad` is given it receives the gradient in parameters()
  // layout. `correct`, when given, receives the number of argmax hits.
  double loss(const Dataset& data, std::span<const std::size_t> rows, double l1_lambda,
              std::vector<double>* grad, BatchNormMode mode, std::size_t* correct = nullptr) {
    const std::size_t batch = rows.size();
    if (batch == 0) throw TrainingError("empty batch");
    std::vector<std::vector<double>> acts;  // input to each layer, then final output
    acts.reserve(layers_.size() + 1);
    std::vector<double> x(batch * input_width_);
    for (std::size_t r = 0; r < batch; ++r) {
      const auto row = data.row(rows[r]);
      std::copy(row.begin(), row.end(), x.begin() + static_cast<std::ptrdiff_t>(r * input_width_));
    }
    acts.push_back(std::move(x));
    std::vector<Cache> caches(layers_.size());
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      acts.push_back(forward(layers_[k], acts.back(), batch, mode, caches[k]));
    }

    // Softmax cross-entropy on the final logits.
    const auto& logits = acts.back();
    const std::size_t classes = output_width_;
    std::vector<double> delta(batch * classes);
    double total = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < batch; ++r) {
      const std::span<const double> z(logits.data() + r * classes, classes);
      const auto p = softmax(z);
      const int y = data.labels[rows[r]];
      const double peak = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double v : z) sum += std::exp(v - peak);
      total += -(z[static_cast<std::size_t>(y)] - peak - std::log(sum));
      const auto best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
      if (best == static_cast<std::size_t>(y)) ++hits;
      for (std::size_t c = 0; c < classes; ++c) {
        delta[r * classes + c] =
            (p[c] - (c == static_cast<std::size_t>(y) ? 1.0 : 0.0)) / static_cast<double>(batch);
      }
    }
    if (correct != nullptr) *correct = hits;
    double value = total / static_cast<double>(batch);
    for (const auto& layer : layers_) {
      if (layer.kind != LayerKind::kDense) continue;
      for (double w : layer.a) value += l1_lambda * std::abs(w);
    }
    if (grad == nullptr) return value;

    std::vector<std::vector<double>> grads_a(layers_.size()), grads_b(layers_.size());
    for (std::size_t k = layers_.size(); k-- > 0;) {
      delta = backward(layers_[k], acts[k], delta, batch, caches[k], grads_a[k], grads_b[k]);
    }
    grad->clear();
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const Layer& layer = layers_[k];
      if (layer.kind == LayerKind::kDense) {
        for (std::size_t i = 0; i < layer.a.size(); ++i) {
          const double w = layer.a[i];
          grads_a[k][i] += l1_lambda * (w > 0 ? 1.0 : (w < 0 ? -1.0 : 0.0));
          if (!layer.mask.empty() && layer.mask[i] == 0.0) grads_a[k][i] = 0.0;
        }
      }
      grad->insert(grad->end(), grads_a[k].begin(), grads_a[k].end());
      grad->insert(grad->end(), grads_b[k].begin(), grads_b[k].end());
    }
    return value;
  }

  // Final-layer logits for `rows` (inference-mode batch norm, quantizers and
  // masks applied), row-major [rows x outputs].
  std::vector<double> logits(const Dataset& data, std::span<const std::size_t> rows) {
    std::vector<double> x(rows.size() * input_width_);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto row = data.row(rows[r]);
      std::copy(row.begin(), row.end(), x.begin() + static_cast<std::ptrdiff_t>(r * input_width_));
    }
    Cache cache;
    for (auto& layer : layers_) x = forward(layer, x, rows.size(), BatchNormMode::kInference, cache);
    return x;
  }

  void apply_masks() {
    for (auto& layer : layers_) {
      if (layer.mask.empty()) continue;
      for (std::size_t i = 0; i < layer.a.size(); ++i) {
        if (layer.mask[i] == 0.0) layer.a[i] = 0.0;
      }
    }
  }

  // Writes the master (real-valued) parameters and batch-norm statistics
  // back into a copy of the source graph.
  ModelGraph to_graph() const {
    ModelGraph g = graph_;
    for (const auto& layer : layers_) {
      LayerNode* node = g.find(layer.name);
      if (layer.kind == LayerKind::kDense) {
        node->params["weight"].data = layer.a;
        node->params["bias"].data = layer.b;
      } else if (layer.kind == LayerKind::kBatchNorm) {
        node->params["gamma"].data = layer.a;
        node->params["beta"].data = layer.b;
        node->params["moving_mean"].data = layer.mean;
        node->params["moving_variance"].data = layer.var;
      }
    }
    return g;
  }

  double batch_norm_momentum = 0.99;

 private:
  struct Layer {
    std::string name;
    LayerKind kind = LayerKind::kDense;
    std::size_t in = 0, out = 0;
    std::vector<double> a, b;  // dense weight/bias or batch-norm gamma/beta
    std::vector<double> mean, var;
    double eps = kDefaultBatchNormEpsilon;
    std::vector<double> mask;
    std::optional<QuantizerSpec> quantizer;
  };

  struct Cache {
    std::vector<double> weight, bias;  // effective (quantized, masked) dense params
    std::vector<double> xhat, inv_std;  // batch norm
    std::vector<std::uint8_t> pass;     // relu gradient gate
  };

  Layer* find(const std::string& name) {
    for (auto& layer : layers_) {
      if (layer.name == name) return &layer;
    }
    return nullptr;
  }

  std::vector<double> forward(Layer& layer, const std::vector<double>& x, std::size_t batch,
                              BatchNormMode mode, Cache& cache) {
    const std::size_t in = layer.in, out = layer.out;
    std::vector<double> y(batch * out);
    switch (layer.kind) {
      case LayerKind::kDense: {
        cache.weight = layer.a;
        cache.bias = layer.b;
        if (layer.quantizer) {
          for (double& w : cache.weight) w = layer.quantizer->apply(w);
          if (layer.quantizer->mode == QuantizerMode::kFixed) {
            for (double& b : cache.bias) b = layer.quantizer->apply(b);
          }
        }
        if (!layer.mask.empty()) {
          for (std::size_t i = 0; i < cache.weight.size(); ++i) {
            if (layer.mask[i] == 0.0) cache.weight[i] = 0.0;
          }
        }
        for (std::size_t r = 0; r < batch; ++r) {
          const double* xr = x.data() + r * in;
          for (std::size_t i = 0; i < out; ++i) {
            const double* wi = cache.weight.data() + i * in;
            double acc = cache.bias[i];
            for (std::size_t j = 0; j < in; ++j) acc += wi[j] * xr[j];
            y[r * out + i] = acc;
          }
        }
        break;
      }
      case LayerKind::kRelu:
        cache.pass.assign(batch * out, 0);
        for (std::size_t i = 0; i < y.size(); ++i) {
          double v = std::max(0.0, x[i]);
          bool pass = x[i] > 0.0;
          if (layer.quantizer) {
            pass = pass && layer.quantizer->passes_gradient(v);
            v = layer.quantizer->apply(v);
          }
          y[i] = v;
          cache.pass[i] = pass ? 1 : 0;
        }
        break;
      case LayerKind::kBatchNorm: {
        cache.xhat.assign(batch * out, 0.0);
        cache.inv_std.assign(out, 0.0);
        for (std::size_t c = 0; c < out; ++c) {
          double mu = layer.mean[c], var = layer.var[c];
          if (mode != BatchNormMode::kInference) {
            mu = 0.0;
            for (std::size_t r = 0; r < batch; ++r) mu += x[r * out + c];
            mu /= static_cast<double>(batch);
            var = 0.0;
            for (std::size_t r = 0; r < batch; ++r) {
              const double d = x[r * out + c] - mu;
              var += d * d;
            }
            var /= static_cast<double>(batch);
            if (mode == BatchNormMode::kTrain) {
              const double m = batch_norm_momentum;
              layer.mean[c] = m * layer.mean[c] + (1 - m) * mu;
              layer.var[c] = m * layer.var[c] + (1 - m) * var;
            }
          }
          const double inv = 1.0 / std::sqrt(var + layer.eps);
          cache.inv_std[c] = inv;
          for (std::size_t r = 0; r < batch; ++r) {
            const double h = (x[r * out + c] - mu) * inv;
            cache.xhat[r * out + c] = h;
            y[r * out + c] = layer.a[c] * h + layer.b[c];
          }
        }
        cache.pass.assign(1, mode == BatchNormMode::kInference ? 0 : 1);
        break;
      }
      default:
        break;
    }
    return y;
  }

  std::vector<double> backward(const Layer& layer, const std::vector<double>& x,
                               const std::vector<double>& dy, std::size_t batch,
                               const Cache& cache, std::vector<double>& ga,
                               std::vector<double>& gb) const {
    const std::size_t in = layer.in, out = layer.out;
    std::vector<double> dx(batch * in, 0.0);
    switch (layer.kind) {
      case LayerKind::kDense: {
        ga.assign(layer.a.size(), 0.0);
        gb.assign(layer.b.size(), 0.0);
        for (std::size_t r = 0; r < batch; ++r) {
          const double* xr = x.data() + r * in;
          double* dxr = dx.data() + r * in;
          for (std::size_t i = 0; i < out; ++i) {
            const double g = dy[r * out + i];
            if (g == 0.0) continue;
            gb[i] += g;
            double* gai = ga.data() + i * in;
            const double* wi = cache.weight.data() + i * in;
            for (std::size_t j = 0; j < in; ++j) {
              gai[j] += g * xr[j];
              dxr[j] += g * wi[j];
            }
          }
        }
        if (layer.quantizer) {
          for (std::size_t i = 0; i < ga.size(); ++i) {
            if (!layer.quantizer->passes_gradient(layer.a[i])) ga[i] = 0.0;
          }
          if (layer.quantizer->mode == QuantizerMode::kFixed) {
            for (std::size_t i = 0; i < gb.size(); ++i) {
              if (!layer.quantizer->passes_gradient(layer.b[i])) gb[i] = 0.0;
            }
          }
        }
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = cache.pass[i] ? dy[i] : 0.0;
        break;
      case LayerKind::kBatchNorm: {
        ga.assign(out, 0.0);
        gb.assign(out, 0.0);
        const bool batch_stats = cache.pass[0] != 0;
        const double n = static_cast<double>(batch);
        for (std::size_t c = 0; c < out; ++c) {
          double sum_dh = 0.0, sum_dh_h = 0.0;
          for (std::size_t r = 0; r < batch; ++r) {
            const double g = dy[r * out + c];
            const double h = cache.xhat[r * out + c];
            ga[c] += g * h;
            gb[c] += g;
            sum_dh += g * layer.a[c];
            sum_dh_h += g * layer.a[c] * h;
          }
          const double inv = cache.inv_std[c];
          for (std::size_t r = 0; r < batch; ++r) {
            const double dh = dy[r * out + c] * layer.a[c];
            if (batch_stats) {
              dx[r * in + c] = inv / n * (n * dh - sum_dh - cache.xhat[r * out + c] * sum_dh_h);
            } else {
              dx[r * in + c] = inv * dh;
            }
          }
        }
        break;
      }
      default:
        break;
    }
    return dx;
  }

  ModelGraph graph_;
  std::vector<Layer> layers_;
  std::size_t input_width_ = 0;
  std::size_t output_width_ = 0;
  bool has_softmax_ = false;
};

// ---------------------------------------------------------------------------

namespace detail {

inline void check_data(const Network& net, const Dataset& data) {
  data.check();
  if (data.size() == 0) throw TrainingError("empty dataset");
  if (data.dim() != net.input_width()) {
    throw TrainingError("dataset has " + std::to_string(data.dim()) +
                        " features, model expects " + std::to_string(net.input_width()));
  }
  if (static_cast<std::size_t>(data.class_count) > net.output_width()) {
    throw TrainingError("dataset has more classes than model outputs");
  }
}

inline TraceRow full_pass(Network& net, const Dataset& data, double l1, int epoch) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::size_t correct = 0;
  const double value = net.loss(data, all, l1, nullptr, BatchNormMode::kInference, &correct);
  if (!std::isfinite(value)) {
    throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
  }
  return {epoch, value, static_cast<double>(correct) / static_cast<double>(data.size())};
}

inline TrainResult fit(const ModelGraph& model, const Dataset& data, const TrainingConfig& cfg,
                       const std::map<std::string, QuantizerSpec>& quantizers,
                       const MaskSet* masks) {
  cfg.check();
  Network net(model);
  net.batch_norm_momentum = cfg.batch_norm_momentum;
  check_data(net, data);
  net.set_quantizers(quantizers);
  if (masks != nullptr) net.set_masks(*masks);

  TrainResult result;
  result.trace.push_back(full_pass(net, data, cfg.l1_lambda, 0));

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto params = net.parameters();
  std::vector<double> grad, m1(params.size(), 0.0), m2(params.size(), 0.0);
  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const double value = net.loss(data, rows, cfg.l1_lambda, &grad, BatchNormMode::kTrain);
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
      }
      params = net.parameters();
      ++step;
      if (cfg.optimizer == OptimizerKind::kSgd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * grad[i];
      } else {
        const auto& a = cfg.adam;
        const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < params.size(); ++i) {
          m1[i] = a.beta1 * m1[i] + (1 - a.beta1) * grad[i];
          m2[i] = a.beta2 * m2[i] + (1 - a.beta2) * grad[i] * grad[i];
          params[i] -= cfg.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + a.epsilon);
        }
      }
      net.set_parameters(params);
      net.apply_masks();
    }
    result.trace.push_back(full_pass(net, data, cfg.l1_lambda, epoch));
  }
  result.model = net.to_graph();
  return result;
}

}  // namespace detail

// Plain training; quantizers in cfg are ignored.
inline TrainResult train(const ModelGraph& model, const Dataset& data, const TrainingConfig& cfg,
                         const MaskSet* masks = nullptr) {
  return detail::fit(model, data, cfg, {}, masks);
}

// Quantization-aware training. Every dense layer needs a quantizer; the
// returned model carries the real-valued master weights.
inline TrainResult train_qat(const ModelGraph& model, const Dataset& data,
                             const TrainingConfig& cfg, const MaskSet* masks = nullptr) {
  for (const LayerNode* node : ordered_layers(model)) {
    if (node->kind == LayerKind::kDense && !cfg.quantizers.contains(node->name)) {
      throw TrainingError("train_qat: dense layer '" + node->name + "' has no quantizer");
    }
  }
  return detail::fit(model, data, cfg, cfg.quantizers, masks);
}

// Replaces dense weights (and fixed-mode biases) by their quantized values
// and sets the matching weight/bias precision; relu quantizers set the relu
// result precision. Accumulator and result precisions are left alone.
inline ModelGraph export_quantized(const ModelGraph& model,
                                   const std::map<std::string, QuantizerSpec>& quantizers) {
  ModelGraph g = model;
  for (const auto& [name, q] : quantizers) {
    LayerNode* node = g.find(name);
    if (node == nullptr) throw Error("export: no layer named '" + name + "'");
    q.check();
    const FixedPointSpec spec = q.export_spec();
    if (node->kind == LayerKind::kDense) {
      for (double& w : node->params["weight"].data) w = q.apply(w);
      node->precision.weight = spec;
      if (q.mode == QuantizerMode::kFixed) {
        for (double& b : node->params["bias"].data) b = q.apply(b);
        node->precision.bias = spec;
      }
    } else if (node->kind == LayerKind::kRelu) {
      node->precision.result = spec;
    } else {
      throw Error("export: quantizer on '" + name + "' which is neither dense nor relu");
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Evaluation

enum class Arithmetic { kReal, kFixed };

struct Evaluation {
  double accuracy = 0.0;
  std::vector<double> recall;     // per class; NaN when the class is absent
  std::vector<double> precision;  // per class; NaN when never predicted
  std::vector<double> auc;        // one-vs-rest; NaN when undefined
  double mean_auc = 0.0;          // over classes with a defined AUC
  std::vector<int> predictions;
  std::vector<std::vector<double>> scores;
};

// Mann-Whitney rank statistic with average ranks for ties. NaN when either
// side is empty.
inline double auc_rank(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (positive[idx[k]]) {
        rank_sum += avg;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nan("");
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1) / 2.0) / (p * static_cast<double>(neg));
}

inline Evaluation score_predictions(const std::vector<std::vector<double>>& scores,
                                    const std::vector<int>& predictions,
                                    const std::vector<int>& labels, int class_count) {
  std::vector<int> seen(static_cast<std::size_t>(class_count), 0);
  for (int y : labels) seen[static_cast<std::size_t>(y)] = 1;
  if (std::accumulate(seen.begin(), seen.end(), 0) < 2) {
    throw Error("AUC is undefined for a dataset with fewer than two classes");
  }
  Evaluation e;
  e.scores = scores;
  e.predictions = predictions;
  const std::size_t n = labels.size();
  const auto k = static_cast<std::size_t>(class_count);
  std::vector<double> tp(k, 0), actual(k, 0), predicted(k, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    const auto p = static_cast<std::size_t>(predictions[i]);
    actual[y] += 1;
    if (p < k) predicted[p] += 1;
    if (p == y) {
      tp[y] += 1;
      ++correct;
    }
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  double auc_total = 0.0;
  int auc_count = 0;
  for (std::size_t c = 0; c < k; ++c) {
    e.recall.push_back(actual[c] > 0 ? tp[c] / actual[c] : std::nan(""));
    e.precision.push_back(predicted[c] > 0 ? tp[c] / predicted[c] : std::nan(""));
    std::vector<double> s(n);
    std::vector<std::uint8_t> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = c < scores[i].size() ? scores[i][c] : 0.0;
      pos[i] = static_cast<std::size_t>(labels[i]) == c ? 1 : 0;
    }
    const double a = auc_rank(s, pos);
    e.auc.push_back(a);
    if (!std::isnan(a)) {
      auc_total += a;
      ++auc_count;
    }
  }
  e.mean_auc = auc_total / auc_count;
  return e;
}

// Real arithmetic scores with the class probabilities (softmax applied when
// the model has none); fixed arithmetic runs the bit-accurate emulator and
// predicts the argmax of the last fixed-point layer (lowest index on ties).
inline Evaluation evaluate(const ModelGraph& model, const Dataset& data, Arithmetic arithmetic) {
  data.check();
  if (data.size() == 0) throw Error("evaluate: empty dataset");
  const bool ends_in_softmax = !model.nodes.empty() && ordered_layers(model).back()->kind == LayerKind::kSoftmax;
  std::vector<std::vector<double>> scores;
  std::vector<int> predictions;
  std::optional<CompiledModel> compiled;
  if (arithmetic == Arithmetic::kFixed) compiled = compile(model);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<double> s;
    int best = 0;
    if (compiled) {
      const auto r = run_inference(*compiled, data.row(i), false);
      const auto& raw = r.fixed_output.raw;
      best = static_cast<int>(std::max_element(raw.begin(), raw.end()) - raw.begin());
      s = r.output;
    } else {
      s = run_real(model, data.row(i));
      best = static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
    }
    if (!ends_in_softmax) s = softmax(s);
    scores.push_back(std::move(s));
    predictions.push_back(best);
  }
  return score_predictions(scores, predictions, data.labels, data.class_count);
}

// Scores the training-time quantized forward pass (quantizers simulated in
// binary64) rather than the bit-accurate emulator.
inline Evaluation evaluate_quantized(const ModelGraph& model, const Dataset& data,
                                     const std::map<std::string, QuantizerSpec>& quantizers) {
  data.check();
  if (data.size() == 0) throw Error("evaluate: empty dataset");
  Network net(model);
  net.set_quantizers(quantizers);
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto z = net.logits(data, all);
  const std::size_t k = net.output_width();
  std::vector<std::vector<double>> scores;
  std::vector<int> predictions;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::span<const double> row(z.data() + i * k, k);
    predictions.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    scores.push_back(softmax(row));
  }
  return score_predictions(scores, predictions, data.labels, data.class_count);
}

// ---------------------------------------------------------------------------
// Model construction

// Glorot-uniform weights, zero biases.
inline void glorot_init(ModelGraph& model, std::uint64_t seed) {
  Rng rng(seed);
  for (const LayerNode* cnode : ordered_layers(model)) {
    if (cnode->kind != LayerKind::kDense) continue;
    LayerNode& node = *model.find(cnode->name);
    Tensor& w = node.params["weight"];
    const double limit = std::sqrt(6.0 / static_cast<double>(w.shape[0] + w.shape[1]));
    for (double& v : w.data) v = rng.uniform(-limit, limit);
    for (double& v : node.params["bias"].data) v = 0.0;
  }
}

inline LayerNode make_dense(std::string name, std::size_t n_in, std::size_t n_out) {
  LayerNode n;
  n.name = std::move(name);
  n.kind = LayerKind::kDense;
  n.params["weight"] = Tensor::matrix(n_out, n_in, std::vector<double>(n_in * n_out, 0.0));
  n.params["bias"] = Tensor::vector(std::vector<double>(n_out, 0.0));
  return n;
}

// input -> (dense_k -> relu_k)* -> output [-> softmax], Glorot-initialized.
inline ModelGraph make_mlp(const std::string& name, std::size_t n_in,
                           const std::vector<std::size_t>& hidden, std::size_t classes,
                           std::uint64_t seed, bool with_softmax = true) {
  ModelGraph g;
  g.name = name;
  g.input_shape = {n_in};
  LayerNode input;
  input.name = "input";
  input.kind = LayerKind::kInput;
  g.nodes.push_back(input);
  std::string prev = "input";
  std::size_t width = n_in;
  auto link = [&](LayerNode node) {
    node.inputs = {prev};
    prev = node.name;
    g.nodes.push_back(std::move(node));
  };
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    link(make_dense("dense_" + std::to_string(k + 1), width, hidden[k]));
    LayerNode relu;
    relu.name = "relu_" + std::to_string(k + 1);
    relu.kind = LayerKind::kRelu;
    link(relu);
    width = hidden[k];
  }
  link(make_dense("output", width, classes));
  if (with_softmax) {
    LayerNode sm;
    sm.name = "softmax";
    sm.kind = LayerKind::kSoftmax;
    link(sm);
  }
  glorot_init(g, seed);
  return g;
}

inline std::string trace_to_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,loss,accuracy\n";
  for (const auto& row : trace) os << row.epoch << "," << row.loss << "," << row.accuracy << "\n";
  return os.str();
}

}  // namespace fixflow

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

// Bit-accurate execution of a compiled network.
//
// Cast-point contract for every multiply-accumulate kernel:
//   acc = cast(bias_i, accumulator)
//   for j ascending: acc = overflow(acc + cast(w_ij * x_j, accumulator))
//   y_i = cast(acc, result)
// Products are exact; zero weights are skipped, which cannot change acc.
// The generated HLS sources follow the same contract.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fixflow/errors.hpp"
#include "fixflow/fixed_point.hpp"
#include "fixflow/model_ir.hpp"

namespace fixflow {

// Homogeneous fixed-point vector: one spec, many raw values.
struct FixedVector {
  FixedPointSpec spec;
  std::vector<std::int64_t> raw;

  std::size_t size() const { return raw.size(); }
  FixedPointValue at(std::size_t i) const { return {raw[i], spec}; }
  std::vector<double> to_reals() const {
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = at(i).to_real();
    return out;
  }
  static FixedVector quantize(std::span<const double> values,
                              const FixedPointSpec& spec) {
    FixedVector v{spec, std::vector<std::int64_t>(values.size())};
    for (std::size_t i = 0; i < values.size(); ++i) {
      v.raw[i] = fixflow::quantize(values[i], spec).raw;
    }
    return v;
  }
  friend bool operator==(const FixedVector&, const FixedVector&) = default;
};

// Row-major [rows = outputs][cols = inputs].
struct FixedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  FixedPointSpec spec;
  std::vector<std::int64_t> raw;

  FixedPointValue at(std::size_t r, std::size_t c) const {
    return {raw[r * cols + c], spec};
  }
  static FixedMatrix quantize(const Tensor& weight, const FixedPointSpec& spec) {
    if (weight.shape.size() != 2) throw KernelError("weight tensor must be 2-D");
    FixedMatrix m{weight.shape[0], weight.shape[1], spec, {}};
    m.raw = FixedVector::quantize(weight.data, spec).raw;
    return m;
  }
  friend bool operator==(const FixedMatrix&, const FixedMatrix&) = default;
};

inline FixedVector dense_mv(const FixedMatrix& weights, const FixedVector& bias,
                            const FixedVector& x, const PrecisionSet& precision) {
  if (weights.cols != x.size() || weights.rows != bias.size() ||
      weights.raw.size() != weights.rows * weights.cols) {
    throw KernelError("dense_mv: shape mismatch");
  }
  FixedVector y{precision.result, std::vector<std::int64_t>(weights.rows)};
  for (std::size_t i = 0; i < weights.rows; ++i) {
    FixedPointValue acc = cast(bias.at(i), precision.accumulator);
    const std::int64_t* row = weights.raw.data() + i * weights.cols;
    for (std::size_t j = 0; j < weights.cols; ++j) {
      if (row[j] == 0) continue;
      acc = accumulate(acc, mul({row[j], weights.spec}, x.at(j)));
    }
    y.raw[i] = cast(acc, precision.result).raw;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Coordinate-list sparse weights

struct CooEntry {
  std::uint64_t index = 0;  // out_index * n_in + in_index
  std::int64_t raw = 0;
  friend bool operator==(const CooEntry&, const CooEntry&) = default;
};

struct CooWeights {
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  FixedPointSpec spec;
  std::vector<CooEntry> entries;  // ascending index, no zeros, no duplicates

  // ceil(log2(n_in * n_out)) bits address every weight.
  int index_bits() const {
    const std::uint64_t count = static_cast<std::uint64_t>(n_in) * n_out;
    return count <= 1 ? 0 : std::bit_width(count - 1);
  }

  // Canonicalizes arbitrary-order entries. Throws KernelError on duplicates,
  // zero weights or out-of-range indices.
  static CooWeights from_entries(std::size_t n_in, std::size_t n_out,
                                 const FixedPointSpec& spec,
                                 std::vector<CooEntry> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const CooEntry& a, const CooEntry& b) { return a.index < b.index; });
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (entries[k].raw == 0) throw KernelError("COO entry with zero weight");
      if (entries[k].index >= static_cast<std::uint64_t>(n_in) * n_out) {
        throw KernelError("COO index out of range");
      }
      if (k > 0 && entries[k].index == entries[k - 1].index) {
        throw KernelError("duplicate COO index");
      }
    }
    return {n_in, n_out, spec, std::move(entries)};
  }

  // Index and weight packed in one word: weight bits above the index bits.
  // Empty when they do not fit in 64 bits.
  std::optional<std::uint64_t> packed_word(const CooEntry& e) const {
    const int ib = index_bits();
    if (ib + spec.width > 64) return std::nullopt;
    const std::uint64_t wmask =
        spec.width == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << spec.width) - 1;
    return ((static_cast<std::uint64_t>(e.raw) & wmask) << ib) | e.index;
  }

  CooEntry unpack(std::uint64_t word) const {
    const int ib = index_bits();
    const std::uint64_t imask = ib == 0 ? 0 : (std::uint64_t{1} << ib) - 1;
    std::uint64_t w = word >> ib;
    std::int64_t raw = static_cast<std::int64_t>(w);
    if (spec.is_signed && spec.width < 64 && ((w >> (spec.width - 1)) & 1) != 0) {
      raw = static_cast<std::int64_t>(w | ~((std::uint64_t{1} << spec.width) - 1));
    }
    return {word & imask, raw};
  }
};

inline CooWeights compress_coo(const FixedMatrix& weights) {
  CooWeights coo{weights.cols, weights.rows, weights.spec, {}};
  for (std::size_t k = 0; k < weights.raw.size(); ++k) {
    if (weights.raw[k] != 0) coo.entries.push_back({k, weights.raw[k]});
  }
  return coo;
}

inline FixedMatrix decompress_coo(const CooWeights& coo) {
  FixedMatrix m{coo.n_out, coo.n_in, coo.spec,
                std::vector<std::int64_t>(coo.n_in * coo.n_out, 0)};
  for (const auto& e : coo.entries) m.raw[e.index] = e.raw;
  return m;
}

// Same cast points as dense_mv; entries are visited in ascending packed index,
// which is ascending input index within each output row.
inline FixedVector sparse_mv_coo(const CooWeights& coo, const FixedVector& bias,
                                 const FixedVector& x,
                                 const PrecisionSet& precision) {
  if (coo.n_in != x.size() || coo.n_out != bias.size()) {
    throw KernelError("sparse_mv_coo: shape mismatch");
  }
  std::vector<FixedPointValue> acc(coo.n_out);
  for (std::size_t i = 0; i < coo.n_out; ++i) {
    acc[i] = cast(bias.at(i), precision.accumulator);
  }
  for (const auto& e : coo.entries) {
    const std::size_t row = e.index / coo.n_in;
    const std::size_t col = e.index % coo.n_in;
    acc[row] = accumulate(acc[row], mul({e.raw, coo.spec}, x.at(col)));
  }
  FixedVector y{precision.result, std::vector<std::int64_t>(coo.n_out)};
  for (std::size_t i = 0; i < coo.n_out; ++i) {
    y.raw[i] = cast(acc[i], precision.result).raw;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Exact comparisons of grid values against real thresholds

struct RawPredicate {
  enum class Kind { kAlways, kNever, kAtLeast, kAtMost };
  Kind kind = Kind::kNever;
  std::int64_t bound = 0;

  bool operator()(std::int64_t raw) const {
    switch (kind) {
      case Kind::kAlways: return true;
      case Kind::kNever: return false;
      case Kind::kAtLeast: return raw >= bound;
      case Kind::kAtMost: return raw <= bound;
    }
    return false;
  }
  friend bool operator==(const RawPredicate&, const RawPredicate&) = default;
};

namespace detail {

// Clamped far outside the int64 range so the comparisons below stay exact.
inline i128 clamp_integral(double k) {
  constexpr double kLimit = 1.2676506002282294e30;  // 2^100
  if (k >= kLimit) return static_cast<i128>(1) << 100;
  if (k <= -kLimit) return -(static_cast<i128>(1) << 100);
  return static_cast<i128>(k);
}

inline RawPredicate at_least_raw(i128 target) {
  if (target > std::numeric_limits<std::int64_t>::max()) return {RawPredicate::Kind::kNever, 0};
  if (target <= std::numeric_limits<std::int64_t>::min()) return {RawPredicate::Kind::kAlways, 0};
  return {RawPredicate::Kind::kAtLeast, static_cast<std::int64_t>(target)};
}

inline RawPredicate at_most_raw(i128 target) {
  if (target >= std::numeric_limits<std::int64_t>::max()) return {RawPredicate::Kind::kAlways, 0};
  if (target < std::numeric_limits<std::int64_t>::min()) return {RawPredicate::Kind::kNever, 0};
  return {RawPredicate::Kind::kAtMost, static_cast<std::int64_t>(target)};
}

}  // namespace detail

// value >= t, value <= t, value > t and value < t for values on a grid with
// `fraction_bits` fraction bits, expressed on the raw integer.
inline RawPredicate value_at_least(double t, int fraction_bits) {
  return detail::at_least_raw(detail::clamp_integral(std::ceil(std::ldexp(t, fraction_bits))));
}
inline RawPredicate value_at_most(double t, int fraction_bits) {
  return detail::at_most_raw(detail::clamp_integral(std::floor(std::ldexp(t, fraction_bits))));
}
inline RawPredicate value_above(double t, int fraction_bits) {
  return detail::at_least_raw(detail::clamp_integral(std::floor(std::ldexp(t, fraction_bits))) + 1);
}
inline RawPredicate value_below(double t, int fraction_bits) {
  return detail::at_most_raw(detail::clamp_integral(std::ceil(std::ldexp(t, fraction_bits))) - 1);
}

// ---------------------------------------------------------------------------
// Layer semantics shared by the real and fixed paths

inline constexpr double kTernaryThreshold = 0.5;
inline constexpr double kDefaultBatchNormEpsilon = 1e-3;

inline double batch_norm_epsilon(const LayerNode& node) {
  const Tensor* eps = node.param("epsilon");
  return eps == nullptr ? kDefaultBatchNormEpsilon : eps->data.at(0);
}

// Inference-mode batch norm folded to y = scale * x + shift.
struct AffineChannels {
  std::vector<double> scale;
  std::vector<double> shift;
};

inline AffineChannels batch_norm_affine(const LayerNode& node) {
  const auto& gamma = node.param("gamma")->data;
  const auto& beta = node.param("beta")->data;
  const auto& mean = node.param("moving_mean")->data;
  const auto& var = node.param("moving_variance")->data;
  const double eps = batch_norm_epsilon(node);
  AffineChannels a;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    const double s = gamma[i] / std::sqrt(var[i] + eps);
    a.scale.push_back(s);
    a.shift.push_back(beta[i] - mean[i] * s);
  }
  return a;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double peak = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

struct LayerTap {
  std::string layer;
  // Present for fixed-point layers; softmax taps are real-valued.
  std::optional<FixedVector> fixed;
  std::vector<double> values;
};

// Real-arithmetic (binary64) forward pass; the reference the passes and the
// fixed-point emulation are compared against.
inline std::vector<double> run_real(const ModelGraph& graph,
                                    std::span<const double> input,
                                    std::vector<LayerTap>* taps = nullptr) {
  std::vector<double> x(input.begin(), input.end());
  if (x.size() != graph.input_width()) throw KernelError("input width mismatch");
  for (const LayerNode* node : ordered_layers(graph)) {
    std::vector<double> y;
    switch (node->kind) {
      case LayerKind::kInput:
        y = x;
        break;
      case LayerKind::kDense: {
        const Tensor& w = *node->param("weight");
        const auto& b = node->param("bias")->data;
        const std::size_t rows = w.shape[0], cols = w.shape[1];
        y.assign(rows, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
          double acc = b[i];
          for (std::size_t j = 0; j < cols; ++j) acc += w.data[i * cols + j] * x[j];
          y[i] = acc;
        }
        break;
      }
      case LayerKind::kRelu:
        y = x;
        for (double& v : y) v = std::max(0.0, v);
        break;
      case LayerKind::kBatchNorm: {
        const auto a = batch_norm_affine(*node);
        y.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = a.scale[i] * x[i] + a.shift[i];
        break;
      }
      case LayerKind::kBinaryTanh:
        y = x;
        for (double& v : y) v = v >= 0.0 ? 1.0 : -1.0;
        break;
      case LayerKind::kTernaryTanh:
        y = x;
        for (double& v : y) {
          v = v > kTernaryThreshold ? 1.0 : (v < -kTernaryThreshold ? -1.0 : 0.0);
        }
        break;
      case LayerKind::kThreshold: {
        const auto& t = node->param("threshold")->data;
        const auto& d = node->param("direction")->data;
        const auto& c = node->param("constant")->data;
        y.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (d[i] > 0) {
            y[i] = x[i] >= t[i] ? 1.0 : -1.0;
          } else if (d[i] < 0) {
            y[i] = x[i] <= t[i] ? 1.0 : -1.0;
          } else {
            y[i] = c[i];
          }
        }
        break;
      }
      case LayerKind::kConstant:
        y = node->param("value")->data;
        break;
      case LayerKind::kSoftmax:
        y = softmax(x);
        break;
    }
    if (taps != nullptr && node->kind != LayerKind::kInput) {
      taps->push_back({node->name, std::nullopt, y});
    }
    x = std::move(y);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Compiled (quantized) model

struct CompiledLayer {
  std::string name;
  LayerKind kind = LayerKind::kInput;
  PrecisionSet precision;
  FixedPointSpec input_spec;
  std::size_t width = 0;
  int reuse_factor = 1;

  FixedMatrix weight;                // dense
  FixedVector bias;                  // dense; batch_norm shift
  std::optional<CooWeights> coo;     // dense with compression
  FixedVector scale;                 // batch_norm
  std::vector<RawPredicate> positive;  // threshold, binary/ternary tanh
  std::vector<RawPredicate> negative;  // ternary tanh
  FixedVector constant;              // constant
};

struct CompiledModel {
  std::string name;
  std::size_t input_width = 0;
  std::vector<CompiledLayer> layers;  // execution order, input layer first
};

namespace detail {

inline CompiledLayer compile_layer(const LayerNode& node,
                                   const FixedPointSpec& input_spec,
                                   std::size_t in_width) {
  CompiledLayer c;
  c.name = node.name;
  c.kind = node.kind;
  c.precision = node.precision;
  c.input_spec = input_spec;
  c.width = in_width;
  c.reuse_factor = node.reuse_factor;
  const int in_frac = input_spec.fraction_bits();
  switch (node.kind) {
    case LayerKind::kInput:
    case LayerKind::kRelu:
    case LayerKind::kSoftmax:
      break;
    case LayerKind::kDense:
      c.weight = FixedMatrix::quantize(*node.param("weight"), node.precision.weight);
      c.bias = FixedVector::quantize(node.param("bias")->data, node.precision.bias);
      c.width = c.weight.rows;
      if (node.compression) c.coo = compress_coo(c.weight);
      break;
    case LayerKind::kBatchNorm: {
      const auto a = batch_norm_affine(node);
      c.scale = FixedVector::quantize(a.scale, node.precision.weight);
      c.bias = FixedVector::quantize(a.shift, node.precision.bias);
      break;
    }
    case LayerKind::kBinaryTanh:
      c.positive.assign(in_width, value_at_least(0.0, in_frac));
      break;
    case LayerKind::kTernaryTanh:
      c.positive.assign(in_width, value_above(kTernaryThreshold, in_frac));
      c.negative.assign(in_width, value_below(-kTernaryThreshold, in_frac));
      break;
    case LayerKind::kThreshold: {
      const auto& t = node.param("threshold")->data;
      const auto& d = node.param("direction")->data;
      const auto& k = node.param("constant")->data;
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (d[i] > 0) {
          c.positive.push_back(value_at_least(t[i], in_frac));
        } else if (d[i] < 0) {
          c.positive.push_back(value_at_most(t[i], in_frac));
        } else {
          c.positive.push_back({k[i] >= 0 ? RawPredicate::Kind::kAlways
                                          : RawPredicate::Kind::kNever, 0});
        }
      }
      break;
    }
    case LayerKind::kConstant: {
      const Tensor* fixed = node.param("value_fixed");
      const Tensor* value = fixed != nullptr ? fixed : node.param("value");
      c.constant = FixedVector::quantize(value->data, node.precision.result);
      c.width = value->data.size();
      break;
    }
  }
  return c;
}

}  // namespace detail

// Compiles the nodes of `chain` (execution order) for an incoming vector of
// `in_width` values in `input_spec`.
inline std::vector<CompiledLayer> compile_chain(
    std::span<const LayerNode* const> chain, FixedPointSpec input_spec,
    std::size_t in_width) {
  std::vector<CompiledLayer> out;
  for (const LayerNode* node : chain) {
    out.push_back(detail::compile_layer(*node, input_spec, in_width));
    input_spec = node->precision.result;
    in_width = out.back().width;
  }
  return out;
}

// Quantizes every parameter per the layer precisions.
inline CompiledModel compile(const ModelGraph& graph) {
  auto diagnostics = validate(graph);
  if (!diagnostics.empty()) {
    throw ValidationError("cannot compile invalid model: " + diagnostics.front().to_string());
  }
  const auto chain = ordered_layers(graph);
  CompiledModel m;
  m.name = graph.name;
  m.input_width = graph.input_width();
  m.layers = compile_chain(chain, chain.front()->precision.result, m.input_width);
  return m;
}

struct InferenceResult {
  // Real view of the final layer (softmax probabilities when present).
  std::vector<double> output;
  // Output of the last fixed-point layer, i.e. what hardware would emit.
  FixedVector fixed_output;
  std::vector<LayerTap> taps;
};

inline FixedVector execute_layer(const CompiledLayer& layer, const FixedVector& x) {
  const auto signed_unit = [&](int v) { return quantize(static_cast<double>(v), layer.precision.result).raw; };
  FixedVector y{layer.precision.result, {}};
  switch (layer.kind) {
    case LayerKind::kInput:
      y.raw.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) y.raw[i] = cast(x.at(i), y.spec).raw;
      break;
    case LayerKind::kDense:
      return layer.coo ? sparse_mv_coo(*layer.coo, layer.bias, x, layer.precision)
                       : dense_mv(layer.weight, layer.bias, x, layer.precision);
    case LayerKind::kRelu:
      y.raw.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        y.raw[i] = x.raw[i] > 0 ? cast(x.at(i), y.spec).raw : 0;
      }
      break;
    case LayerKind::kBatchNorm:
      y.raw.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        FixedPointValue acc = cast(layer.bias.at(i), layer.precision.accumulator);
        acc = accumulate(acc, mul(layer.scale.at(i), x.at(i)));
        y.raw[i] = cast(acc, y.spec).raw;
      }
      break;
    case LayerKind::kBinaryTanh:
    case LayerKind::kThreshold: {
      const std::int64_t pos = signed_unit(1), neg = signed_unit(-1);
      y.raw.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        y.raw[i] = layer.positive[i](x.raw[i]) ? pos : neg;
      }
      break;
    }
    case LayerKind::kTernaryTanh: {
      const std::int64_t pos = signed_unit(1), neg = signed_unit(-1);
      y.raw.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        y.raw[i] = layer.positive[i](x.raw[i]) ? pos
                   : layer.negative[i](x.raw[i]) ? neg
                                                 : 0;
      }
      break;
    }
    case LayerKind::kConstant:
      return layer.constant;
    case LayerKind::kSoftmax:
      throw KernelError("softmax has no fixed-point implementation");
  }
  return y;
}

// Runs the compiled layers on a real input vector, quantized by the first
// layer. Softmax layers run in real arithmetic on the fixed values.
inline InferenceResult execute(std::span<const CompiledLayer> layers,
                               FixedVector x, bool tap_all) {
  InferenceResult r;
  std::optional<std::vector<double>> real;
  for (const auto& layer : layers) {
    if (layer.kind == LayerKind::kSoftmax) {
      real = softmax(real ? *real : x.to_reals());
      if (tap_all) r.taps.push_back({layer.name, std::nullopt, *real});
      continue;
    }
    if (real) throw KernelError("fixed-point layer after softmax: " + layer.name);
    x = execute_layer(layer, x);
    if (tap_all && layer.kind != LayerKind::kInput) {
      r.taps.push_back({layer.name, x, x.to_reals()});
    }
  }
  r.output = real ? *real : x.to_reals();
  r.fixed_output = std::move(x);
  return r;
}

inline InferenceResult run_inference(const CompiledModel& model,
                                     std::span<const double> input, bool tap_all) {
  if (input.size() != model.input_width) throw KernelError("input width mismatch");
  if (model.layers.empty()) throw KernelError("empty model");
  // The input layer's cast below is a no-op once the values are quantized.
  FixedVector x = FixedVector::quantize(input, model.layers.front().precision.result);
  return execute(model.layers, std::move(x), tap_all);
}

inline InferenceResult run_inference(const ModelGraph& graph, const Tensor& input,
                                     bool tap_all) {
  return run_inference(compile(graph), input.data, tap_all);
}

}  // namespace fixflow

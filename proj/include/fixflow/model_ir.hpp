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

// Dataflow IR for fully-connected networks and its JSON document format.
//
// A ModelGraph is an ordered list of LayerNodes forming a single chain from
// one `input` node to one output. Every layer produces a flat vector; its
// width is inferred from the parameters. See docs/model-format.md for the
// document schema.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixflow/errors.hpp"
#include "fixflow/fixed_point.hpp"

namespace fixflow {

inline constexpr std::string_view kModelFormatVersion = "1";
inline const FixedPointSpec kDefaultPrecision{16, 6};

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  static Tensor vector(std::vector<double> values) {
    Tensor t;
    t.shape = {values.size()};
    t.data = std::move(values);
    return t;
  }
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values) {
    Tensor t;
    t.shape = {rows, cols};
    t.data = std::move(values);
    return t;
  }
  static Tensor scalar(double value) { return vector({value}); }

  std::size_t element_count() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }
  bool consistent() const {
    return !shape.empty() &&
           std::all_of(shape.begin(), shape.end(),
                       [](std::size_t d) { return d > 0; }) &&
           element_count() == data.size();
  }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

enum class LayerKind {
  kInput,
  kDense,
  kRelu,
  kBatchNorm,
  kBinaryTanh,
  kTernaryTanh,
  kSoftmax,
  // Produced by optimizer passes; also accepted in documents.
  kThreshold,
  kConstant,
};

inline std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kInput: return "input";
    case LayerKind::kDense: return "dense";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kBatchNorm: return "batch_norm";
    case LayerKind::kBinaryTanh: return "binary_tanh";
    case LayerKind::kTernaryTanh: return "ternary_tanh";
    case LayerKind::kSoftmax: return "softmax";
    case LayerKind::kThreshold: return "threshold";
    case LayerKind::kConstant: return "constant";
  }
  return "unknown";
}

inline std::optional<LayerKind> parse_layer_kind(std::string_view text) {
  for (LayerKind k :
       {LayerKind::kInput, LayerKind::kDense, LayerKind::kRelu,
        LayerKind::kBatchNorm, LayerKind::kBinaryTanh, LayerKind::kTernaryTanh,
        LayerKind::kSoftmax, LayerKind::kThreshold, LayerKind::kConstant}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

struct PrecisionSet {
  FixedPointSpec weight = kDefaultPrecision;
  FixedPointSpec bias = kDefaultPrecision;
  FixedPointSpec accumulator = kDefaultPrecision;
  FixedPointSpec result = kDefaultPrecision;

  static PrecisionSet uniform(const FixedPointSpec& spec) {
    return {spec, spec, spec, spec};
  }
  friend bool operator==(const PrecisionSet&, const PrecisionSet&) = default;
};

// Threshold channel modes (parameter "direction"):
//   +1: out = x >= t ? +1 : -1     -1: out = x <= t ? +1 : -1
//    0: out = constant (parameter "constant", +1 or -1)
struct LayerNode {
  std::string name;
  LayerKind kind = LayerKind::kDense;
  std::map<std::string, Tensor> params;
  PrecisionSet precision;
  int reuse_factor = 1;
  bool compression = false;
  // Predecessor names. Empty for the input node.
  std::vector<std::string> inputs;

  const Tensor* param(const std::string& key) const {
    auto it = params.find(key);
    return it == params.end() ? nullptr : &it->second;
  }
  friend bool operator==(const LayerNode&, const LayerNode&) = default;
};

struct ModelGraph {
  std::string name = "model";
  std::vector<std::size_t> input_shape;
  std::vector<LayerNode> nodes;

  std::size_t input_width() const {
    return std::accumulate(input_shape.begin(), input_shape.end(),
                           std::size_t{1}, std::multiplies<>());
  }
  const LayerNode* find(std::string_view node_name) const {
    for (const auto& n : nodes) {
      if (n.name == node_name) return &n;
    }
    return nullptr;
  }
  LayerNode* find(std::string_view node_name) {
    for (auto& n : nodes) {
      if (n.name == node_name) return &n;
    }
    return nullptr;
  }
  friend bool operator==(const ModelGraph&, const ModelGraph&) = default;
};

struct Diagnostic {
  std::string layer;
  std::string rule;
  std::string message;

  std::string to_string() const {
    return (layer.empty() ? std::string("<model>") : layer) + " [" + rule +
           "]: " + message;
  }
};

// Kahn's algorithm; ties resolved by declaration order. Returns node indices.
// Throws ValidationError on a cycle or a dangling predecessor.
inline std::vector<std::size_t> topo_order(const ModelGraph& graph) {
  const std::size_t n = graph.nodes.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index.emplace(graph.nodes[i].name, i);
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> successors(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& pred : graph.nodes[i].inputs) {
      auto it = index.find(pred);
      if (it == index.end()) {
        throw ValidationError("layer '" + graph.nodes[i].name +
                              "' references unknown input '" + pred + "'");
      }
      successors[it->second].push_back(i);
      ++indegree[i];
    }
  }
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.insert(i);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t next = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(next);
    for (std::size_t s : successors[next]) {
      if (--indegree[s] == 0) ready.insert(s);
    }
  }
  if (order.size() != n) {
    std::string members;
    for (std::size_t i = 0; i < n; ++i) {
      if (indegree[i] > 0) members += (members.empty() ? "" : ", ") + graph.nodes[i].name;
    }
    throw ValidationError("cycle detected among layers: " + members);
  }
  return order;
}

// Nodes in execution order. Requires a valid graph.
inline std::vector<const LayerNode*> ordered_layers(const ModelGraph& graph) {
  std::vector<const LayerNode*> out;
  for (std::size_t i : topo_order(graph)) out.push_back(&graph.nodes[i]);
  return out;
}

namespace detail {

inline const std::vector<std::string>& batch_norm_keys() {
  static const std::vector<std::string> keys = {"gamma", "beta", "moving_mean",
                                                "moving_variance"};
  return keys;
}

// Output width of `node` given its input width, or nullopt with diagnostics.
inline std::optional<std::size_t> check_layer(const LayerNode& node,
                                              std::size_t in_width,
                                              std::vector<Diagnostic>& out) {
  auto diag = [&](std::string rule, std::string message) {
    out.push_back({node.name, std::move(rule), std::move(message)});
  };
  auto require_vector = [&](const std::string& key,
                            std::size_t width) -> bool {
    const Tensor* t = node.param(key);
    if (t == nullptr) {
      diag("missing-param", "missing parameter '" + key + "'");
      return false;
    }
    if (t->shape.size() != 1 || t->shape[0] != width) {
      diag("shape-mismatch", "parameter '" + key + "' must have shape [" +
                                 std::to_string(width) + "]");
      return false;
    }
    return true;
  };
  switch (node.kind) {
    case LayerKind::kInput:
      return in_width;
    case LayerKind::kDense: {
      const Tensor* w = node.param("weight");
      if (w == nullptr) {
        diag("missing-param", "missing parameter 'weight'");
        return std::nullopt;
      }
      if (w->shape.size() != 2) {
        diag("shape-mismatch", "weight must be 2-D [outputs, inputs]");
        return std::nullopt;
      }
      if (w->shape[1] != in_width) {
        diag("shape-mismatch",
             "weight expects " + std::to_string(w->shape[1]) +
                 " inputs but predecessor produces " + std::to_string(in_width));
        return std::nullopt;
      }
      if (!require_vector("bias", w->shape[0])) return std::nullopt;
      return w->shape[0];
    }
    case LayerKind::kBatchNorm: {
      bool ok = true;
      for (const auto& key : batch_norm_keys()) ok = require_vector(key, in_width) && ok;
      const Tensor* eps = node.param("epsilon");
      if (eps != nullptr && eps->data.size() != 1) {
        diag("shape-mismatch", "epsilon must be a scalar");
        ok = false;
      }
      return ok ? std::optional<std::size_t>(in_width) : std::nullopt;
    }
    case LayerKind::kThreshold: {
      bool ok = require_vector("threshold", in_width);
      ok = require_vector("direction", in_width) && ok;
      ok = require_vector("constant", in_width) && ok;
      return ok ? std::optional<std::size_t>(in_width) : std::nullopt;
    }
    case LayerKind::kConstant: {
      const Tensor* v = node.param("value");
      if (v == nullptr) {
        diag("missing-param", "missing parameter 'value'");
        return std::nullopt;
      }
      if (v->shape.size() != 1) {
        diag("shape-mismatch", "constant value must be 1-D");
        return std::nullopt;
      }
      const Tensor* vf = node.param("value_fixed");
      if (vf != nullptr && vf->shape != v->shape) {
        diag("shape-mismatch", "value_fixed must match value");
        return std::nullopt;
      }
      return v->shape[0];
    }
    case LayerKind::kRelu:
    case LayerKind::kBinaryTanh:
    case LayerKind::kTernaryTanh:
    case LayerKind::kSoftmax:
      return in_width;
  }
  return std::nullopt;
}

}  // namespace detail

// Checks every structural and shape invariant. Never throws; an empty result
// means the graph is valid.
inline std::vector<Diagnostic> validate(const ModelGraph& graph) {
  std::vector<Diagnostic> out;
  if (graph.input_shape.empty() ||
      std::any_of(graph.input_shape.begin(), graph.input_shape.end(),
                  [](std::size_t d) { return d == 0; })) {
    out.push_back({"", "input-shape", "input_shape must be non-empty and positive"});
  }
  if (graph.nodes.empty()) {
    out.push_back({"", "empty-graph", "model has no layers"});
    return out;
  }
  std::set<std::string> names;
  for (const auto& node : graph.nodes) {
    if (node.name.empty()) out.push_back({"", "empty-name", "layer name is empty"});
    if (!names.insert(node.name).second) {
      out.push_back({node.name, "duplicate-name", "layer name is not unique"});
    }
  }
  std::size_t input_count = 0;
  std::map<std::string, int> successor_count;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& node = graph.nodes[i];
    if (node.kind == LayerKind::kInput) {
      ++input_count;
      if (!node.inputs.empty()) {
        out.push_back({node.name, "input-position", "input layer cannot have predecessors"});
      }
    } else if (node.inputs.size() != 1) {
      out.push_back({node.name, "not-a-chain", "layer must have exactly one predecessor"});
    }
    for (const auto& pred : node.inputs) {
      if (!names.contains(pred)) {
        out.push_back({node.name, "missing-predecessor", "unknown input '" + pred + "'"});
      }
      ++successor_count[pred];
    }
    if (node.reuse_factor < 1) {
      out.push_back({node.name, "reuse-factor", "reuse_factor must be >= 1"});
    }
    if (node.compression && node.kind != LayerKind::kDense) {
      out.push_back({node.name, "compression-kind", "compression applies to dense layers only"});
    }
    for (const auto* spec : {&node.precision.weight, &node.precision.bias,
                             &node.precision.accumulator, &node.precision.result}) {
      if (!spec->valid()) {
        out.push_back({node.name, "precision", "invalid precision " + spec->to_string()});
      }
    }
    for (const auto& [key, tensor] : node.params) {
      if (!tensor.consistent()) {
        out.push_back({node.name, "tensor-shape", "parameter '" + key + "' shape does not match data"});
      }
      if (std::any_of(tensor.data.begin(), tensor.data.end(),
                      [](double v) { return !std::isfinite(v); })) {
        out.push_back({node.name, "non-finite", "parameter '" + key + "' has non-finite values"});
      }
    }
  }
  if (input_count != 1) {
    out.push_back({"", "input-count", "model needs exactly one input layer"});
  }
  for (const auto& [pred, count] : successor_count) {
    if (count > 1) out.push_back({pred, "not-a-chain", "layer feeds more than one successor"});
  }
  std::vector<std::size_t> order;
  try {
    order = topo_order(graph);
  } catch (const ValidationError& e) {
    out.push_back({"", "cycle", e.what()});
    return out;
  }
  if (!out.empty()) return out;
  std::map<std::string, std::size_t> widths;
  for (std::size_t i : order) {
    const auto& node = graph.nodes[i];
    const std::size_t in_width = node.kind == LayerKind::kInput
                                     ? graph.input_width()
                                     : widths.at(node.inputs.front());
    auto width = detail::check_layer(node, in_width, out);
    if (!width) return out;
    widths[node.name] = *width;
  }
  return out;
}

// Output width of every node, in execution order. Requires a valid graph.
inline std::vector<std::size_t> infer_widths(const ModelGraph& graph) {
  std::vector<Diagnostic> scratch;
  std::vector<std::size_t> widths;
  std::size_t current = graph.input_width();
  for (const LayerNode* node : ordered_layers(graph)) {
    auto w = detail::check_layer(*node, current, scratch);
    if (!w) throw ValidationError(scratch.front().to_string());
    current = *w;
    widths.push_back(current);
  }
  return widths;
}

// Result precision of the layer feeding `node` (the input node's own result
// precision for the input layer).
inline FixedPointSpec input_precision(const ModelGraph& graph,
                                      const LayerNode& node) {
  if (node.inputs.empty()) return node.precision.result;
  const LayerNode* pred = graph.find(node.inputs.front());
  if (pred == nullptr) throw ValidationError("unknown input of " + node.name);
  return pred->precision.result;
}

// ---------------------------------------------------------------------------
// Document I/O

namespace detail {

using json = nlohmann::json;

inline const json& require(const json& obj, const std::string& key,
                           const std::string& path) {
  if (!obj.is_object()) throw ParseError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "." + key, "missing field");
  return *it;
}

inline std::vector<std::size_t> parse_shape(const json& j,
                                            const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array of integers");
  std::vector<std::size_t> shape;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer() || j[i].get<long long>() <= 0) {
      throw ParseError(path + "[" + std::to_string(i) + "]",
                       "expected a positive integer");
    }
    shape.push_back(j[i].get<std::size_t>());
  }
  return shape;
}

inline Tensor parse_tensor(const json& j, const std::string& path) {
  Tensor t;
  if (j.is_number()) return Tensor::scalar(j.get<double>());
  t.shape = parse_shape(require(j, "shape", path), path + ".shape");
  const json& data = require(j, "data", path);
  if (!data.is_array()) throw ParseError(path + ".data", "expected an array");
  t.data.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].is_number()) {
      throw ParseError(path + ".data[" + std::to_string(i) + "]",
                       "expected a number");
    }
    t.data.push_back(data[i].get<double>());
  }
  if (!t.consistent()) {
    throw ParseError(path, "shape does not match data length " +
                               std::to_string(t.data.size()));
  }
  return t;
}

inline FixedPointSpec parse_spec(const json& j, const std::string& path) {
  if (!j.is_string()) throw ParseError(path, "expected a precision string");
  try {
    return FixedPointSpec::parse(j.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ParseError(path, e.what());
  }
}

inline PrecisionSet parse_precision(const json& j, const std::string& path) {
  if (j.is_string()) return PrecisionSet::uniform(parse_spec(j, path));
  if (!j.is_object()) throw ParseError(path, "expected a string or object");
  PrecisionSet p;
  for (const auto& [key, value] : j.items()) {
    const std::string sub = path + "." + key;
    if (key == "weight") {
      p.weight = parse_spec(value, sub);
    } else if (key == "bias") {
      p.bias = parse_spec(value, sub);
    } else if (key == "accumulator") {
      p.accumulator = parse_spec(value, sub);
    } else if (key == "result") {
      p.result = parse_spec(value, sub);
    } else {
      throw ParseError(sub, "unknown precision field");
    }
  }
  return p;
}

inline LayerNode parse_layer(const json& j, const std::string& path,
                             const std::string* previous) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  static const std::set<std::string> known = {
      "name", "kind", "params", "precision", "reuse_factor", "compression", "inputs"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ParseError(path + "." + key, "unknown field");
  }
  LayerNode node;
  const json& name = require(j, "name", path);
  if (!name.is_string()) throw ParseError(path + ".name", "expected a string");
  node.name = name.get<std::string>();
  const json& kind = require(j, "kind", path);
  if (!kind.is_string()) throw ParseError(path + ".kind", "expected a string");
  auto parsed_kind = parse_layer_kind(kind.get<std::string>());
  if (!parsed_kind) {
    throw ParseError(path + ".kind", "unknown layer kind '" + kind.get<std::string>() + "'");
  }
  node.kind = *parsed_kind;
  if (auto it = j.find("params"); it != j.end()) {
    if (!it->is_object()) throw ParseError(path + ".params", "expected an object");
    for (const auto& [key, value] : it->items()) {
      node.params.emplace(key, parse_tensor(value, path + ".params." + key));
    }
  }
  if (auto it = j.find("precision"); it != j.end()) {
    node.precision = parse_precision(*it, path + ".precision");
  }
  if (auto it = j.find("reuse_factor"); it != j.end()) {
    if (!it->is_number_integer()) {
      throw ParseError(path + ".reuse_factor", "expected an integer");
    }
    node.reuse_factor = it->get<int>();
  }
  if (auto it = j.find("compression"); it != j.end()) {
    if (!it->is_boolean()) throw ParseError(path + ".compression", "expected a boolean");
    node.compression = it->get<bool>();
  }
  if (auto it = j.find("inputs"); it != j.end()) {
    if (!it->is_array()) throw ParseError(path + ".inputs", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      if (!(*it)[i].is_string()) {
        throw ParseError(path + ".inputs[" + std::to_string(i) + "]", "expected a string");
      }
      node.inputs.push_back((*it)[i].get<std::string>());
    }
  } else if (node.kind != LayerKind::kInput && previous != nullptr) {
    node.inputs.push_back(*previous);
  }
  return node;
}

// Compact pretty printer: objects are indented, arrays of scalars stay on one
// line so weight matrices do not explode into one number per line.
inline void write_json(std::ostream& os, const json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  if (j.is_object()) {
    if (j.empty()) {
      os << "{}";
      return;
    }
    os << "{\n";
    bool first = true;
    for (const auto& [key, value] : j.items()) {
      if (!first) os << ",\n";
      first = false;
      os << inner << json(key).dump() << ": ";
      write_json(os, value, indent + 1);
    }
    os << "\n" << pad << "}";
  } else if (j.is_array()) {
    const bool scalars = std::all_of(j.begin(), j.end(), [](const json& e) {
      return e.is_primitive();
    });
    if (scalars) {
      os << "[";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i > 0) os << ", ";
        os << j[i].dump();
      }
      os << "]";
      return;
    }
    os << "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i > 0) os << ",\n";
      os << inner;
      write_json(os, j[i], indent + 1);
    }
    os << "\n" << pad << "]";
  } else {
    os << j.dump();
  }
}

}  // namespace detail

inline std::string dump_json(const nlohmann::json& j) {
  std::ostringstream os;
  detail::write_json(os, j, 0);
  os << "\n";
  return os.str();
}

inline nlohmann::json tensor_to_json(const Tensor& t) {
  return {{"shape", t.shape}, {"data", t.data}};
}

inline nlohmann::json precision_to_json(const PrecisionSet& p) {
  return {{"weight", p.weight.to_string()},
          {"bias", p.bias.to_string()},
          {"accumulator", p.accumulator.to_string()},
          {"result", p.result.to_string()}};
}

// Builds the graph without validating it. Throws ParseError on schema
// violations only.
inline ModelGraph load_model_unchecked(std::string_view text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("$", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("$", "expected an object");
  const json& version = detail::require(doc, "format_version", "$");
  if (!version.is_string() || version.get<std::string>() != kModelFormatVersion) {
    throw ParseError("$.format_version", "unsupported format version (expected \"1\")");
  }
  ModelGraph graph;
  if (auto it = doc.find("name"); it != doc.end()) {
    if (!it->is_string()) throw ParseError("$.name", "expected a string");
    graph.name = it->get<std::string>();
  }
  graph.input_shape =
      detail::parse_shape(detail::require(doc, "input_shape", "$"), "$.input_shape");
  const json& layers = detail::require(doc, "layers", "$");
  if (!layers.is_array()) throw ParseError("$.layers", "expected an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string* previous =
        graph.nodes.empty() ? nullptr : &graph.nodes.back().name;
    graph.nodes.push_back(detail::parse_layer(
        layers[i], "$.layers[" + std::to_string(i) + "]", previous));
  }
  if (graph.nodes.empty() || graph.nodes.front().kind != LayerKind::kInput) {
    LayerNode input;
    input.name = "input";
    input.kind = LayerKind::kInput;
    if (!graph.nodes.empty() && graph.nodes.front().inputs.empty()) {
      graph.nodes.front().inputs.push_back(input.name);
    }
    graph.nodes.insert(graph.nodes.begin(), std::move(input));
  }
  return graph;
}

// Parses and validates; throws ValidationError listing every diagnostic.
inline ModelGraph parse_model(std::string_view text) {
  ModelGraph graph = load_model_unchecked(text);
  auto diagnostics = validate(graph);
  if (!diagnostics.empty()) {
    std::string message = "model validation failed:";
    for (const auto& d : diagnostics) message += "\n  " + d.to_string();
    throw ValidationError(message);
  }
  return graph;
}

inline nlohmann::json model_to_json(const ModelGraph& graph) {
  using detail::json;
  json layers = json::array();
  const std::string* previous = nullptr;
  for (const auto& node : graph.nodes) {
    json layer = json::object();
    layer["name"] = node.name;
    layer["kind"] = std::string(to_string(node.kind));
    const bool default_inputs =
        (previous == nullptr && node.inputs.empty()) ||
        (previous != nullptr && node.inputs.size() == 1 && node.inputs[0] == *previous);
    if (!default_inputs) layer["inputs"] = node.inputs;
    if (!node.params.empty()) {
      json params = json::object();
      for (const auto& [key, tensor] : node.params) params[key] = tensor_to_json(tensor);
      layer["params"] = std::move(params);
    }
    layer["precision"] = precision_to_json(node.precision);
    if (node.kind == LayerKind::kDense || node.reuse_factor != 1) {
      layer["reuse_factor"] = node.reuse_factor;
    }
    if (node.kind == LayerKind::kDense || node.compression) {
      layer["compression"] = node.compression;
    }
    layers.push_back(std::move(layer));
    previous = &node.name;
  }
  json doc = json::object();
  doc["format_version"] = std::string(kModelFormatVersion);
  doc["name"] = graph.name;
  doc["input_shape"] = graph.input_shape;
  doc["layers"] = std::move(layers);
  return doc;
}

// Canonical document text: fixed key order, every default made explicit.
inline std::string serialize_model(const ModelGraph& graph) {
  return dump_json(model_to_json(graph));
}

}  // namespace fixflow

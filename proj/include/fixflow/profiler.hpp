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

// Parameter statistics per tensor and checks of the configured precisions
// against them.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixflow/fixed_point.hpp"
#include "fixflow/kernels.hpp"
#include "fixflow/model_ir.hpp"

namespace fixflow {

enum class TensorRole { kWeight = 0, kBias = 1 };

// Box statistics over the nonzero |values|; zeros only feed zero_fraction.
// Quartiles use linear interpolation between closest ranks:
// q(p) = v[floor(h)] + (h - floor(h)) * (v[floor(h) + 1] - v[floor(h)]),
// h = (n - 1) * p over the ascending values v.
struct TensorProfile {
  std::string layer;
  TensorRole role = TensorRole::kWeight;
  std::size_t count = 0;
  double zero_fraction = 0.0;
  double min_value = 0.0;  // signed extremes
  double max_value = 0.0;
  double max_abs = 0.0;
  // Unset when every value is zero.
  std::optional<double> min_abs_nonzero;
  std::optional<double> q1, median, q3;
  std::optional<double> whisker_low, whisker_high;

  friend bool operator==(const TensorProfile&, const TensorProfile&) = default;
};

struct ProfileReport {
  std::vector<TensorProfile> tensors;
  std::vector<std::string> notes;  // skipped tensors

  friend bool operator==(const ProfileReport&, const ProfileReport&) = default;
};

inline double percentile_linear(const std::vector<double>& sorted, double p) {
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline TensorProfile profile_tensor(std::string layer, TensorRole role,
                                    const std::vector<double>& values) {
  TensorProfile t;
  t.layer = std::move(layer);
  t.role = role;
  t.count = values.size();
  std::vector<double> mags;
  std::size_t zeros = 0;
  t.min_value = values.empty() ? 0.0 : values.front();
  t.max_value = t.min_value;
  for (double v : values) {
    t.min_value = std::min(t.min_value, v);
    t.max_value = std::max(t.max_value, v);
    if (v == 0.0) {
      ++zeros;
    } else {
      mags.push_back(std::abs(v));
    }
  }
  t.zero_fraction = values.empty() ? 0.0 : static_cast<double>(zeros) / static_cast<double>(values.size());
  if (mags.empty()) return t;
  std::sort(mags.begin(), mags.end());
  t.max_abs = mags.back();
  t.min_abs_nonzero = mags.front();
  t.q1 = percentile_linear(mags, 0.25);
  t.median = percentile_linear(mags, 0.5);
  t.q3 = percentile_linear(mags, 0.75);
  const double iqr = *t.q3 - *t.q1;
  const double low_fence = *t.q1 - 1.5 * iqr, high_fence = *t.q3 + 1.5 * iqr;
  t.whisker_low = *std::find_if(mags.begin(), mags.end(), [&](double v) { return v >= low_fence; });
  t.whisker_high = *std::find_if(mags.rbegin(), mags.rend(), [&](double v) { return v <= high_fence; });
  return t;
}

// Dense weights and biases; batch norm contributes its folded scale (as
// weight) and shift (as bias).
inline ProfileReport profile_weights(const ModelGraph& graph) {
  ProfileReport r;
  auto add = [&](const std::string& layer, TensorRole role, const std::vector<double>& v) {
    if (v.empty()) {
      r.notes.push_back(layer + (role == TensorRole::kWeight ? ".weight" : ".bias") +
                        ": empty tensor skipped");
      return;
    }
    r.tensors.push_back(profile_tensor(layer, role, v));
  };
  for (const LayerNode* node : ordered_layers(graph)) {
    if (node->kind == LayerKind::kDense) {
      add(node->name, TensorRole::kWeight, node->param("weight")->data);
      add(node->name, TensorRole::kBias, node->param("bias")->data);
    } else if (node->kind == LayerKind::kBatchNorm) {
      const auto a = batch_norm_affine(*node);
      add(node->name, TensorRole::kWeight, a.scale);
      add(node->name, TensorRole::kBias, a.shift);
    }
  }
  return r;
}

enum class Severity { kInfo, kWarning };

struct CoverageEntry {
  std::string layer;
  TensorRole role = TensorRole::kWeight;
  std::string precision;
  bool covered = true;
  // log2(max_real / max_abs); unset when the tensor is all zeros.
  std::optional<double> margin_bits;
};

struct CoverageFinding {
  Severity severity = Severity::kWarning;
  std::string layer;
  TensorRole role = TensorRole::kWeight;
  std::string message;
};

struct CoverageReport {
  std::vector<CoverageEntry> entries;
  std::vector<CoverageFinding> findings;

  std::size_t warning_count() const {
    return static_cast<std::size_t>(std::count_if(findings.begin(), findings.end(), [](const auto& f) {
      return f.severity == Severity::kWarning;
    }));
  }
};

// A value is covered when saturating quantization lands within one LSB.
inline bool value_covered(double v, const FixedPointSpec& spec) {
  FixedPointSpec sat = spec;
  sat.overflow = Overflow::kSaturate;
  return std::abs(quantize(v, sat).to_real() - v) <= spec.lsb();
}

inline CoverageReport check_coverage(const ProfileReport& report, const ModelGraph& graph) {
  CoverageReport out;
  for (const auto& t : report.tensors) {
    const LayerNode* node = graph.find(t.layer);
    if (node == nullptr) throw Error("profile names unknown layer '" + t.layer + "'");
    const FixedPointSpec& spec =
        t.role == TensorRole::kWeight ? node->precision.weight : node->precision.bias;
    CoverageEntry e;
    e.layer = t.layer;
    e.role = t.role;
    e.precision = spec.to_string();
    e.covered = value_covered(t.max_value, spec) && value_covered(t.min_value, spec);
    if (t.max_abs > 0.0) e.margin_bits = std::log2(spec.max_real() / t.max_abs);
    const std::string what = t.layer + (t.role == TensorRole::kWeight ? ".weight" : ".bias");
    if (!e.covered) {
      out.findings.push_back({Severity::kWarning, t.layer, t.role,
                              what + ": values in [" + std::to_string(t.min_value) + ", " +
                                  std::to_string(t.max_value) + "] exceed the range of " +
                                  e.precision});
    }
    if (t.min_abs_nonzero && *t.min_abs_nonzero < spec.lsb()) {
      out.findings.push_back({Severity::kInfo, t.layer, t.role,
                              what + ": smallest nonzero |value| " +
                                  std::to_string(*t.min_abs_nonzero) + " is below the LSB of " +
                                  e.precision});
    }
    out.entries.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace detail

inline nlohmann::json profile_to_json(const ProfileReport& r) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : r.tensors) {
    tensors.push_back({{"layer", t.layer},
                       {"kind", t.role == TensorRole::kWeight ? "weight" : "bias"},
                       {"count", t.count},
                       {"zero_fraction", t.zero_fraction},
                       {"min_value", t.min_value},
                       {"max_value", t.max_value},
                       {"max_abs", t.max_abs},
                       {"min_abs_nonzero", detail::optional_json(t.min_abs_nonzero)},
                       {"q1", detail::optional_json(t.q1)},
                       {"median", detail::optional_json(t.median)},
                       {"q3", detail::optional_json(t.q3)},
                       {"whisker_low", detail::optional_json(t.whisker_low)},
                       {"whisker_high", detail::optional_json(t.whisker_high)}});
  }
  return {{"tensors", tensors}, {"notes", r.notes}};
}

inline ProfileReport profile_from_json(const nlohmann::json& j) {
  ProfileReport r;
  for (const auto& t : j.at("tensors")) {
    TensorProfile p;
    p.layer = t.at("layer").get<std::string>();
    p.role = t.at("kind").get<std::string>() == "weight" ? TensorRole::kWeight : TensorRole::kBias;
    p.count = t.at("count").get<std::size_t>();
    p.zero_fraction = t.at("zero_fraction").get<double>();
    p.min_value = t.at("min_value").get<double>();
    p.max_value = t.at("max_value").get<double>();
    p.max_abs = t.at("max_abs").get<double>();
    p.min_abs_nonzero = detail::optional_from(t.at("min_abs_nonzero"));
    p.q1 = detail::optional_from(t.at("q1"));
    p.median = detail::optional_from(t.at("median"));
    p.q3 = detail::optional_from(t.at("q3"));
    p.whisker_low = detail::optional_from(t.at("whisker_low"));
    p.whisker_high = detail::optional_from(t.at("whisker_high"));
    r.tensors.push_back(std::move(p));
  }
  r.notes = j.at("notes").get<std::vector<std::string>>();
  return r;
}

inline nlohmann::json coverage_to_json(const CoverageReport& c) {
  nlohmann::json entries = nlohmann::json::array(), findings = nlohmann::json::array();
  for (const auto& e : c.entries) {
    entries.push_back({{"layer", e.layer},
                       {"kind", e.role == TensorRole::kWeight ? "weight" : "bias"},
                       {"precision", e.precision},
                       {"covered", e.covered},
                       {"margin_bits", detail::optional_json(e.margin_bits)}});
  }
  for (const auto& f : c.findings) {
    findings.push_back({{"severity", f.severity == Severity::kWarning ? "warning" : "info"},
                        {"layer", f.layer},
                        {"kind", f.role == TensorRole::kWeight ? "weight" : "bias"},
                        {"message", f.message}});
  }
  return {{"entries", entries}, {"findings", findings}};
}

}  // namespace fixflow

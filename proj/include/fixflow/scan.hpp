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

// Bit-width sweep: post-training quantization versus quantization-aware
// training at a range of total widths, both scored with the bit-accurate
// emulator relative to the real-valued baseline.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fixflow/dataset.hpp"
#include "fixflow/kernels.hpp"
#include "fixflow/model_ir.hpp"
#include "fixflow/trainer.hpp"

namespace fixflow {

// Integer bits that cover `max_abs` at the given signedness (at least 0).
inline int integer_bits_for(double max_abs, bool is_signed) {
  if (!(max_abs > 0.0)) return is_signed ? 1 : 0;
  const int magnitude = static_cast<int>(std::floor(std::log2(max_abs))) + 1;
  return std::max(0, magnitude) + (is_signed ? 1 : 0);
}

// Range information gathered from a real-valued model: per dense layer the
// largest |weight| or |bias|, per relu the largest activation seen on data.
struct RangeProfile {
  std::map<std::string, double> max_abs;
};

inline RangeProfile profile_ranges(const ModelGraph& model, const Dataset& data) {
  RangeProfile p;
  for (const LayerNode* node : ordered_layers(model)) {
    if (node->kind != LayerKind::kDense) continue;
    double m = 0.0;
    for (double w : node->param("weight")->data) m = std::max(m, std::abs(w));
    for (double b : node->param("bias")->data) m = std::max(m, std::abs(b));
    p.max_abs[node->name] = m;
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<LayerTap> taps;
    run_real(model, data.row(i), &taps);
    for (const auto& tap : taps) {
      if (model.find(tap.layer)->kind != LayerKind::kRelu) continue;
      double& m = p.max_abs[tap.layer];
      for (double v : tap.values) m = std::max(m, v);
    }
  }
  return p;
}

struct PrecisionPlan {
  FixedPointSpec input{16, 6};
  FixedPointSpec accumulator{32, 12, true, Rounding::kTruncate, Overflow::kWrap};
  std::map<std::string, QuantizerSpec> quantizers;
};

enum class PlanStyle {
  // One signed fixed<bits, I> for every weight, bias and relu output, I
  // covering the largest range in the model.
  kUniform,
  // Integer bits chosen per tensor; relu outputs unsigned.
  kPerTensor,
};

// Width `bits` for every dense weight/bias and relu output, with wide
// accumulators and dense results so only the swept width limits accuracy.
inline PrecisionPlan plan_for_width(const ModelGraph& model, const RangeProfile& ranges,
                                    int bits, PlanStyle style) {
  PrecisionPlan plan;
  double global = 0.0;
  for (const auto& [name, m] : ranges.max_abs) global = std::max(global, m);
  for (const LayerNode* node : ordered_layers(model)) {
    const auto it = ranges.max_abs.find(node->name);
    const double m = it == ranges.max_abs.end() ? 1.0 : it->second;
    if (node->kind != LayerKind::kDense && node->kind != LayerKind::kRelu) continue;
    if (style == PlanStyle::kUniform) {
      plan.quantizers[node->name] = QuantizerSpec::fixed(bits, integer_bits_for(global, true));
    } else if (node->kind == LayerKind::kDense) {
      plan.quantizers[node->name] = QuantizerSpec::fixed(bits, integer_bits_for(m, true));
    } else {
      plan.quantizers[node->name] = QuantizerSpec::fixed(bits, integer_bits_for(m, false), false);
    }
  }
  return plan;
}

// Quantized, emulator-ready copy of `model` under `plan`.
inline ModelGraph apply_plan(const ModelGraph& model, const PrecisionPlan& plan) {
  ModelGraph g = export_quantized(model, plan.quantizers);
  for (auto& node : g.nodes) {
    switch (node.kind) {
      case LayerKind::kInput:
        node.precision = PrecisionSet::uniform(plan.input);
        break;
      case LayerKind::kDense:
        node.precision.accumulator = plan.accumulator;
        node.precision.result = plan.accumulator;
        break;
      case LayerKind::kRelu:
        node.precision.accumulator = node.precision.result;
        node.precision.weight = node.precision.bias = node.precision.result;
        break;
      default:
        break;
    }
  }
  return g;
}

struct ScanRow {
  int bits = 0;
  double ptq_accuracy = 0.0;
  double qat_accuracy = 0.0;
  double ptq_rel = 0.0;
  double qat_rel = 0.0;
};

struct ScanResult {
  double float_accuracy = 0.0;
  ModelGraph float_model;
  std::vector<ScanRow> rows;
};

// PTQ rounds the float model to the uniform plan; QAT trains with the
// per-tensor plan. `model` is the untrained architecture. The float baseline and every QAT run
// start from the same initial weights and use the same training config.
inline ScanResult bitwidth_scan(const ModelGraph& model, const Dataset& train_set,
                                const Dataset& test_set, const TrainingConfig& cfg,
                                const std::vector<int>& widths) {
  ScanResult out;
  out.float_model = train(model, train_set, cfg).model;
  out.float_accuracy = evaluate(out.float_model, test_set, Arithmetic::kReal).accuracy;
  const RangeProfile ranges = profile_ranges(out.float_model, train_set);
  for (int bits : widths) {
    const PrecisionPlan ptq = plan_for_width(out.float_model, ranges, bits, PlanStyle::kUniform);
    const PrecisionPlan plan = plan_for_width(out.float_model, ranges, bits, PlanStyle::kPerTensor);
    ScanRow row;
    row.bits = bits;
    row.ptq_accuracy =
        evaluate(apply_plan(out.float_model, ptq), test_set, Arithmetic::kFixed).accuracy;
    TrainingConfig qcfg = cfg;
    qcfg.quantizers = plan.quantizers;
    const ModelGraph qat = train_qat(model, train_set, qcfg).model;
    row.qat_accuracy = evaluate(apply_plan(qat, plan), test_set, Arithmetic::kFixed).accuracy;
    row.ptq_rel = row.ptq_accuracy / out.float_accuracy;
    row.qat_rel = row.qat_accuracy / out.float_accuracy;
    out.rows.push_back(row);
  }
  return out;
}

inline std::string scan_to_csv(const ScanResult& r) {
  std::ostringstream os;
  os.precision(6);
  os << "bits,ptq_rel_acc,qat_rel_acc\n";
  for (const auto& row : r.rows) os << row.bits << "," << row.ptq_rel << "," << row.qat_rel << "\n";
  return os.str();
}

}  // namespace fixflow

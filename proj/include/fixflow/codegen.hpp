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

// Project emission: a backend writer turns a quantized model into a
// self-contained C++ project whose arithmetic reproduces the emulator bit
// for bit, plus the aggregated JSON compile report.

#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixflow/errors.hpp"
#include "fixflow/estimator.hpp"
#include "fixflow/kernels.hpp"
#include "fixflow/model_ir.hpp"
#include "fixflow/passes.hpp"
#include "fixflow/profiler.hpp"
#include "fixflow/pruning.hpp"
#include "fixflow/version.hpp"

namespace fixflow {

struct ProjectFile {
  std::string path;  // relative, '/'-separated
  std::string contents;
  friend bool operator==(const ProjectFile&, const ProjectFile&) = default;
};

struct ProjectTree {
  std::vector<ProjectFile> files;  // sorted by path

  const std::string* find(std::string_view path) const {
    for (const auto& f : files) {
      if (f.path == path) return &f.contents;
    }
    return nullptr;
  }
};

struct EmitConfig {
  std::string tool_version = kVersion;
  // ISO-8601 UTC; the current time when unset. Only manifest.json carries it.
  std::optional<std::string> timestamp;
};

class BackendWriter {
 public:
  virtual ~BackendWriter() = default;
  virtual std::string name() const = 0;
  virtual ProjectTree write(const ModelGraph& graph, const EmitConfig& config) const = 0;
};

// Replaces every {{key}} in `text`; unknown keys throw.
inline std::string render(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t at = 0;
  while (true) {
    const std::size_t open = text.find("{{", at);
    if (open == std::string_view::npos) {
      out.append(text.substr(at));
      return out;
    }
    const std::size_t close = text.find("}}", open);
    if (close == std::string_view::npos) throw Error("render: unterminated placeholder");
    out.append(text.substr(at, open - at));
    const std::string key(text.substr(open + 2, close - open - 2));
    const auto it = values.find(key);
    if (it == values.end()) throw Error("render: no value for {{" + key + "}}");
    out += it->second;
    at = close + 2;
  }
}

// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

namespace detail {

// Runtime support shipped with every project. Mirrors the emulator: exact
// products, products cast into the accumulator, accumulator overflow on each
// addition, one cast into the result.
inline constexpr std::string_view kFixedHeader = R"fx(// Fixed-point support for generated models. Values are raw integers on a
// grid of 2^-frac; a Spec describes width, grid and rounding/overflow modes.
#ifndef FIXFLOW_FIXED_H_
#define FIXFLOW_FIXED_H_

#include <cstdint>

namespace fxf {

typedef __int128 i128;
typedef unsigned __int128 u128;

struct Spec {
  int width;
  int frac;
  bool is_signed;
  bool round;     // round half up; otherwise truncate toward -inf
  bool saturate;  // otherwise wrap
};

inline std::int64_t max_raw(const Spec& s) {
  const int m = s.is_signed ? s.width - 1 : s.width;
  return m == 63 ? INT64_MAX : (std::int64_t(1) << m) - 1;
}

inline std::int64_t min_raw(const Spec& s) {
  if (!s.is_signed) return 0;
  return s.width == 64 ? INT64_MIN : -(std::int64_t(1) << (s.width - 1));
}

struct Scaled {
  i128 value;
  bool fits;
  int sign;
};

inline Scaled scale_round(i128 v, int shift, bool round) {
  Scaled r = {0, true, 0};
  if (v == 0) return r;
  const int sign = v < 0 ? -1 : 1;
  if (shift >= 0) {
    if (shift >= 128) {
      r.fits = false;
      r.sign = sign;
      return r;
    }
    r.value = i128(u128(v) << shift);
    r.sign = sign;
    if (shift >= 127) {
      r.fits = false;
    } else if (shift > 0) {
      const i128 bound = i128(1) << (127 - shift);
      r.fits = v >= -bound && v < bound;
    }
    return r;
  }
  const int s = -shift;
  if (s >= 128) {
    r.value = (!round && v < 0) ? -1 : 0;
    r.sign = r.value == 0 ? 0 : -1;
    return r;
  }
  i128 q = v >> s;
  if (round) q += (v >> (s - 1)) & 1;
  r.value = q;
  r.sign = q == 0 ? 0 : (q < 0 ? -1 : 1);
  return r;
}

inline std::int64_t fit(const Scaled& v, const Spec& s) {
  if (s.saturate) {
    if (!v.fits) return v.sign > 0 ? max_raw(s) : min_raw(s);
    if (v.value > max_raw(s)) return max_raw(s);
    if (v.value < min_raw(s)) return min_raw(s);
    return std::int64_t(v.value);
  }
  std::uint64_t low = std::uint64_t(u128(v.value));
  if (s.width < 64) {
    const std::uint64_t mask = (std::uint64_t(1) << s.width) - 1;
    low &= mask;
    if (s.is_signed && (low >> (s.width - 1)) != 0) return std::int64_t(low | ~mask);
  }
  return std::int64_t(low);
}

inline std::int64_t rescale(i128 raw, int from_frac, const Spec& s) {
  return fit(scale_round(raw, s.frac - from_frac, s.round), s);
}

inline std::int64_t add(std::int64_t a, std::int64_t b, const Spec& s) {
  const i128 sum = i128(a) + b;
  Scaled v = {sum, true, sum == 0 ? 0 : (sum < 0 ? -1 : 1)};
  return fit(v, s);
}

// acc + cast(w * x, acc)
inline std::int64_t mac(std::int64_t acc, std::int64_t w, int w_frac, std::int64_t x, int x_frac,
                        const Spec& acc_spec) {
  return add(acc, rescale(i128(w) * x, w_frac + x_frac, acc_spec), acc_spec);
}

struct CooEntry {
  std::uint64_t index;  // out * n_in + in
  std::int64_t raw;
};

enum { kAlways = 0, kNever = 1, kAtLeast = 2, kAtMost = 3 };

struct Pred {
  int kind;
  std::int64_t bound;
};

inline bool test(const Pred& p, std::int64_t raw) {
  switch (p.kind) {
    case kAlways: return true;
    case kAtLeast: return raw >= p.bound;
    case kAtMost: return raw <= p.bound;
    default: return false;
  }
}

inline void cast_vector(const std::int64_t* x, int x_frac, int n, const Spec& out,
                        std::int64_t* y) {
  for (int i = 0; i < n; ++i) y[i] = rescale(x[i], x_frac, out);
}

inline void dense(const std::int64_t* x, int x_frac, const std::int64_t* w, const Spec& w_spec,
                  const std::int64_t* b, const Spec& b_spec, int n_in, int n_out,
                  const Spec& acc_spec, const Spec& res_spec, std::int64_t* y) {
  for (int i = 0; i < n_out; ++i) {
    std::int64_t acc = rescale(b[i], b_spec.frac, acc_spec);
    const std::int64_t* row = w + i * n_in;
    for (int j = 0; j < n_in; ++j) {
      if (row[j] == 0) continue;
      acc = mac(acc, row[j], w_spec.frac, x[j], x_frac, acc_spec);
    }
    y[i] = rescale(acc, acc_spec.frac, res_spec);
  }
}

// Sparse variant over nonzero entries in ascending index order. `acc`
// needs n_out entries of scratch.
inline void dense_coo(const std::int64_t* x, int x_frac, const CooEntry* w, int nnz,
                      const Spec& w_spec, const std::int64_t* b, const Spec& b_spec, int n_in,
                      int n_out, const Spec& acc_spec, const Spec& res_spec, std::int64_t* acc,
                      std::int64_t* y) {
  for (int i = 0; i < n_out; ++i) acc[i] = rescale(b[i], b_spec.frac, acc_spec);
  for (int k = 0; k < nnz; ++k) {
    const int row = int(w[k].index / std::uint64_t(n_in));
    const int col = int(w[k].index % std::uint64_t(n_in));
    acc[row] = mac(acc[row], w[k].raw, w_spec.frac, x[col], x_frac, acc_spec);
  }
  for (int i = 0; i < n_out; ++i) y[i] = rescale(acc[i], acc_spec.frac, res_spec);
}

inline void relu(const std::int64_t* x, int x_frac, int n, const Spec& out, std::int64_t* y) {
  for (int i = 0; i < n; ++i) y[i] = x[i] > 0 ? rescale(x[i], x_frac, out) : 0;
}

inline void batch_norm(const std::int64_t* x, int x_frac, const std::int64_t* scale,
                       const Spec& scale_spec, const std::int64_t* shift, const Spec& shift_spec,
                       int n, const Spec& acc_spec, const Spec& res_spec, std::int64_t* y) {
  for (int i = 0; i < n; ++i) {
    std::int64_t acc = rescale(shift[i], shift_spec.frac, acc_spec);
    acc = mac(acc, scale[i], scale_spec.frac, x[i], x_frac, acc_spec);
    y[i] = rescale(acc, acc_spec.frac, res_spec);
  }
}

// +1 where pos holds, else -1 where neg holds (when given), else 0 or -1.
inline void sign_select(const std::int64_t* x, int n, const Pred* pos, const Pred* neg,
                        std::int64_t one, std::int64_t minus_one, std::int64_t* y) {
  for (int i = 0; i < n; ++i) {
    if (test(pos[i], x[i])) {
      y[i] = one;
    } else if (neg == 0) {
      y[i] = minus_one;
    } else {
      y[i] = test(neg[i], x[i]) ? minus_one : 0;
    }
  }
}

}  // namespace fxf

#endif  // FIXFLOW_FIXED_H_
)fx";

inline constexpr std::string_view kTestbench = R"fx(// Reads one input vector of raw integers per line (argv[1] or stdin) and
// writes the raw output vector per line (argv[2] or stdout).
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "../firmware/{{model}}.h"

int main(int argc, char** argv) {
  std::ifstream in_file;
  std::ofstream out_file;
  if (argc > 1) in_file.open(argv[1]);
  if (argc > 2) out_file.open(argv[2]);
  std::istream& in = argc > 1 ? static_cast<std::istream&>(in_file) : std::cin;
  std::ostream& out = argc > 2 ? static_cast<std::ostream&>(out_file) : std::cout;
  if (!in || !out) {
    std::cerr << "testbench: cannot open files\n";
    return 1;
  }
  std::string line;
  std::int64_t x[N_INPUT];
  std::int64_t y[N_OUTPUT];
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    for (int i = 0; i < N_INPUT; ++i) {
      if (!(fields >> x[i])) {
        std::cerr << "testbench: expected " << N_INPUT << " values per line\n";
        return 1;
      }
    }
    {{model}}(x, y);
    for (int i = 0; i < N_OUTPUT; ++i) out << (i ? " " : "") << y[i];
    out << "\n";
  }
  return 0;
}
)fx";

inline constexpr std::string_view kBuildScript = R"fx(#!/bin/sh
# Builds the bit-accurate C++ model and its testbench.
set -e
cd "$(dirname "$0")"
${CXX:-c++} -std=c++17 -O2 -o tb/testbench firmware/{{model}}.cpp tb/testbench.cpp
)fx";

inline constexpr std::string_view kModelHeader = R"fx(#ifndef {{guard}}
#define {{guard}}

#include <cstdint>

#include "parameters.h"

// Input: raw integers in {{input_spec}}. Output: raw integers in {{output_spec}}.
void {{model}}(const std::int64_t input[N_INPUT], std::int64_t output[N_OUTPUT]);

#endif  // {{guard}}
)fx";

inline std::string spec_literal(const FixedPointSpec& s) {
  std::ostringstream os;
  os << "{" << s.width << ", " << s.fraction_bits() << ", " << (s.is_signed ? "true" : "false")
     << ", " << (s.rounding == Rounding::kRoundHalfUp ? "true" : "false") << ", "
     << (s.overflow == Overflow::kSaturate ? "true" : "false") << "}";
  return os.str();
}

inline std::string int_literal(std::int64_t v) {
  // INT64_MIN has no literal form.
  if (v == std::numeric_limits<std::int64_t>::min()) return "INT64_MIN";
  return std::to_string(v);
}

inline void write_array(std::ostringstream& os, const std::string& decl,
                        const std::vector<std::int64_t>& values) {
  os << decl << " = {";
  if (values.empty()) os << "0";
  for (std::size_t i = 0; i < values.size(); ++i) {
    os << (i % 12 == 0 ? "\n    " : " ") << int_literal(values[i]) << (i + 1 < values.size() ? "," : "");
  }
  os << "\n};\n";
}

inline std::string c_identifier(const std::string& name) {
  std::string out;
  for (char c : name) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  if (out.empty() || std::isdigit(static_cast<unsigned char>(out.front()))) out.insert(out.begin(), 'm');
  return out;
}

inline std::string pred_literal(const RawPredicate& p) {
  int kind = 1;
  switch (p.kind) {
    case RawPredicate::Kind::kAlways: kind = 0; break;
    case RawPredicate::Kind::kNever: kind = 1; break;
    case RawPredicate::Kind::kAtLeast: kind = 2; break;
    case RawPredicate::Kind::kAtMost: kind = 3; break;
  }
  return "{" + std::to_string(kind) + ", " + int_literal(p.bound) + "}";
}

}  // namespace detail

// Generic HLS-style C++ backend.
class HlsCppWriter : public BackendWriter {
 public:
  std::string name() const override { return "hls-cpp"; }

  ProjectTree write(const ModelGraph& graph, const EmitConfig& config) const override {
    const CompiledModel model = compile(graph);
    const std::string fn = detail::c_identifier(model.name);
    std::size_t fixed_count = model.layers.size();
    while (fixed_count > 0 && model.layers[fixed_count - 1].kind == LayerKind::kSoftmax) --fixed_count;
    for (std::size_t k = 0; k < fixed_count; ++k) {
      if (model.layers[k].kind == LayerKind::kSoftmax) {
        throw Error("codegen: softmax before layer '" + model.layers[k + 1].name +
                    "' has no fixed-point implementation");
      }
    }
    if (fixed_count == 0) throw Error("codegen: model has no fixed-point layers");
    const CompiledLayer& last = model.layers[fixed_count - 1];

    ProjectTree tree;
    std::ostringstream params, body, includes;
    params << "#ifndef " << upper(fn) << "_PARAMETERS_H_\n#define " << upper(fn)
           << "_PARAMETERS_H_\n\n#include \"fixed.h\"\n\n";
    params << "#define N_INPUT " << model.input_width << "\n";
    params << "#define N_OUTPUT " << last.width << "\n\n";

    std::string prev = "input";
    int prev_frac = model.layers.front().precision.result.fraction_bits();
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
      const CompiledLayer& L = model.layers[k];
      const std::string id = "l" + std::to_string(k);
      if (L.kind == LayerKind::kSoftmax) {
        body << "  // " << L.name << ": evaluated outside the firmware\n";
        continue;
      }
      const FixedPointSpec& res = L.precision.result;
      params << "// " << L.name << " (" << to_string(L.kind) << ")\n";
      params << "static const fxf::Spec " << id << "_result = " << detail::spec_literal(res)
             << ";  // " << res.to_string() << "\n";
      params << "#define N_" << upper(id) << " " << L.width << "\n";
      body << "  // " << L.name << "\n";
      if (L.kind != LayerKind::kInput) body << "  std::int64_t " << id << "[N_" << upper(id) << "];\n";
      std::ostringstream weights;
      const std::string wfile = "weights/w" + std::to_string(k) + ".h";
      auto open_weights = [&]() {
        weights << "// " << L.name << " (" << to_string(L.kind) << ")\n";
        weights << "#ifndef " << upper(fn) << "_W" << k << "_H_\n#define " << upper(fn) << "_W" << k
                << "_H_\n\n#include \"../fixed.h\"\n\n";
        includes << "#include \"" << wfile << "\"\n";
      };
      switch (L.kind) {
        case LayerKind::kInput:
          // The testbench supplies raw values already on the input grid.
          body << "  const std::int64_t* " << id << " = input;\n";
          break;
        case LayerKind::kDense: {
          const auto& p = L.precision;
          params << "static const fxf::Spec " << id << "_weight = " << detail::spec_literal(p.weight)
                 << ";  // " << p.weight.to_string() << "\n";
          params << "static const fxf::Spec " << id << "_bias = " << detail::spec_literal(p.bias)
                 << ";  // " << p.bias.to_string() << "\n";
          params << "static const fxf::Spec " << id << "_accum = " << detail::spec_literal(p.accumulator)
                 << ";  // " << p.accumulator.to_string() << "\n";
          params << "#define " << upper(id) << "_REUSE_FACTOR " << L.reuse_factor << "\n";
          open_weights();
          detail::write_array(weights, "// " + p.bias.to_string() + "\nstatic const std::int64_t b" +
                                           std::to_string(k) + "[" + std::to_string(L.bias.size()) + "]",
                              L.bias.raw);
          body << "  #pragma HLS PIPELINE II=" << L.reuse_factor << "\n";
          if (L.coo) {
            weights << "// " << p.weight.to_string() << ", " << L.coo->entries.size()
                    << " nonzero of " << L.weight.raw.size() << " (index = out * "
                    << L.coo->n_in << " + in)\n";
            weights << "static const int w" << k << "_nnz = " << L.coo->entries.size() << ";\n";
            weights << "static const fxf::CooEntry w" << k << "[" << std::max<std::size_t>(1, L.coo->entries.size())
                    << "] = {";
            if (L.coo->entries.empty()) weights << "{0, 0}";
            for (std::size_t e = 0; e < L.coo->entries.size(); ++e) {
              weights << (e % 6 == 0 ? "\n    " : " ") << "{" << L.coo->entries[e].index << ", "
                      << detail::int_literal(L.coo->entries[e].raw) << "}"
                      << (e + 1 < L.coo->entries.size() ? "," : "");
            }
            weights << "\n};\n";
            body << "  // compressed: coordinate-list kernel\n";
            body << "  std::int64_t " << id << "_acc[N_" << upper(id) << "];\n";
            body << "  fxf::dense_coo(" << prev << ", " << prev_frac << ", w" << k << ", w" << k
                 << "_nnz, " << id << "_weight, b" << k << ", " << id << "_bias, " << L.coo->n_in
                 << ", N_" << upper(id) << ", " << id << "_accum, " << id << "_result, " << id
                 << "_acc, " << id << ");\n";
          } else {
            detail::write_array(weights, "// " + p.weight.to_string() + ", [" +
                                             std::to_string(L.weight.rows) + " x " +
                                             std::to_string(L.weight.cols) + "] row-major\nstatic const std::int64_t w" +
                                             std::to_string(k) + "[" + std::to_string(L.weight.raw.size()) + "]",
                                L.weight.raw);
            body << "  fxf::dense(" << prev << ", " << prev_frac << ", w" << k << ", " << id
                 << "_weight, b" << k << ", " << id << "_bias, " << L.weight.cols << ", N_"
                 << upper(id) << ", " << id << "_accum, " << id << "_result, " << id << ");\n";
          }
          break;
        }
        case LayerKind::kRelu:
          body << "  fxf::relu(" << prev << ", " << prev_frac << ", N_" << upper(id) << ", " << id
               << "_result, " << id << ");\n";
          break;
        case LayerKind::kBatchNorm: {
          const auto& p = L.precision;
          params << "static const fxf::Spec " << id << "_scale = " << detail::spec_literal(p.weight)
                 << ";  // " << p.weight.to_string() << "\n";
          params << "static const fxf::Spec " << id << "_shift = " << detail::spec_literal(p.bias)
                 << ";  // " << p.bias.to_string() << "\n";
          params << "static const fxf::Spec " << id << "_accum = " << detail::spec_literal(p.accumulator)
                 << ";  // " << p.accumulator.to_string() << "\n";
          open_weights();
          detail::write_array(weights, "// " + p.weight.to_string() + "\nstatic const std::int64_t s" +
                                           std::to_string(k) + "[" + std::to_string(L.scale.size()) + "]",
                              L.scale.raw);
          detail::write_array(weights, "// " + p.bias.to_string() + "\nstatic const std::int64_t b" +
                                           std::to_string(k) + "[" + std::to_string(L.bias.size()) + "]",
                              L.bias.raw);
          body << "  fxf::batch_norm(" << prev << ", " << prev_frac << ", s" << k << ", " << id
               << "_scale, b" << k << ", " << id << "_shift, N_" << upper(id) << ", " << id
               << "_accum, " << id << "_result, " << id << ");\n";
          break;
        }
        case LayerKind::kBinaryTanh:
        case LayerKind::kThreshold:
        case LayerKind::kTernaryTanh: {
          open_weights();
          auto preds = [&](const std::string& label, const std::vector<RawPredicate>& v) {
            weights << "static const fxf::Pred " << label << k << "[" << v.size() << "] = {";
            for (std::size_t i = 0; i < v.size(); ++i) {
              weights << (i % 6 == 0 ? "\n    " : " ") << detail::pred_literal(v[i])
                      << (i + 1 < v.size() ? "," : "");
            }
            weights << "\n};\n";
          };
          weights << "// raw-integer comparisons on the input grid (kind: 0 always, 1 never, "
                     "2 at least, 3 at most)\n";
          preds("pos", L.positive);
          const bool ternary = L.kind == LayerKind::kTernaryTanh;
          if (ternary) preds("neg", L.negative);
          body << "  fxf::sign_select(" << prev << ", N_" << upper(id) << ", pos" << k << ", "
               << (ternary ? "neg" + std::to_string(k) : std::string("0")) << ", "
               << detail::int_literal(quantize(1.0, res).raw) << ", "
               << detail::int_literal(quantize(-1.0, res).raw) << ", " << id << ");\n";
          break;
        }
        case LayerKind::kConstant:
          open_weights();
          detail::write_array(weights, "// " + res.to_string() + "\nstatic const std::int64_t c" +
                                           std::to_string(k) + "[" + std::to_string(L.constant.size()) + "]",
                              L.constant.raw);
          body << "  for (int i = 0; i < N_" << upper(id) << "; ++i) " << id << "[i] = c" << k << "[i];\n";
          break;
        case LayerKind::kSoftmax:
          break;
      }
      if (!weights.str().empty()) {
        weights << "\n#endif\n";
        tree.files.push_back({"firmware/" + wfile, weights.str()});
      }
      prev = id;
      prev_frac = res.fraction_bits();
    }
    params << "\n#endif\n";
    const std::string last_id = "l" + std::to_string(fixed_count - 1);
    body << "  for (int i = 0; i < N_OUTPUT; ++i) output[i] = " << last_id << "[i];\n";

    std::ostringstream source;
    source << "// " << model.name << ": generated by fixflow " << config.tool_version << ".\n";
    source << "#include \"" << fn << ".h\"\n\n" << includes.str() << "\n";
    source << "void " << fn << "(const std::int64_t input[N_INPUT], std::int64_t output[N_OUTPUT]) {\n"
           << body.str() << "}\n";

    const std::map<std::string, std::string> vars{
        {"model", fn},
        {"guard", upper(fn) + "_H_"},
        {"input_spec", model.layers.front().precision.result.to_string()},
        {"output_spec", last.precision.result.to_string()}};
    tree.files.push_back({"firmware/" + fn + ".cpp", source.str()});
    tree.files.push_back({"firmware/" + fn + ".h", render(detail::kModelHeader, vars)});
    tree.files.push_back({"firmware/fixed.h", std::string(detail::kFixedHeader)});
    tree.files.push_back({"firmware/parameters.h", params.str()});
    tree.files.push_back({"tb/testbench.cpp", render(detail::kTestbench, vars)});
    tree.files.push_back({"build.sh", render(detail::kBuildScript, vars)});

    std::sort(tree.files.begin(), tree.files.end(),
              [](const ProjectFile& a, const ProjectFile& b) { return a.path < b.path; });
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : tree.files) files.push_back(f.path);
    const nlohmann::json manifest{
        {"generator", "fixflow"},
        {"backend", name()},
        {"tool_version", config.tool_version},
        {"model", model.name},
        {"model_hash", fnv1a_hex(serialize_model(graph))},
        {"files", files},
        {"generated_at", config.timestamp ? *config.timestamp : utc_timestamp()}};
    tree.files.push_back({"manifest.json", dump_json(manifest) + "\n"});
    std::sort(tree.files.begin(), tree.files.end(),
              [](const ProjectFile& a, const ProjectFile& b) { return a.path < b.path; });
    return tree;
  }

 private:
  static std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
  }
};

inline ProjectTree emit_project(const ModelGraph& graph, const EmitConfig& config = {}) {
  return HlsCppWriter().write(graph, config);
}

// ---------------------------------------------------------------------------
// Compile report

inline constexpr std::string_view kReportSchemaVersion = "1";

struct ReportInputs {
  std::vector<PassReport> passes;
  std::optional<Estimate> estimate;
  std::optional<ProfileReport> profile;
  std::vector<PruneRecord> prune_history;
};

inline nlohmann::json emit_report(const ModelGraph& graph, const ReportInputs& in) {
  using nlohmann::json;
  json layers = json::array();
  for (const LayerNode* node : ordered_layers(graph)) {
    layers.push_back({{"name", node->name}, {"kind", std::string(to_string(node->kind))}});
  }
  json passes = json::array();
  for (const auto& p : in.passes) passes.push_back(pass_report_to_json(p));
  const auto bops = model_bops(graph);
  json bops_layers = json::array();
  for (const auto& l : bops) {
    bops_layers.push_back({{"layer", l.layer},
                           {"n", l.n},
                           {"m", l.m},
                           {"b_w", l.b_w},
                           {"b_a", l.b_a},
                           {"f_p", l.f_p},
                           {"bops", l.bops}});
  }
  json history = json::array();
  for (const auto& r : in.prune_history) {
    history.push_back({{"iteration", r.iteration},
                       {"f_p", r.f_p},
                       {"accuracy", r.accuracy},
                       {"auc", r.auc},
                       {"bops", r.bops}});
  }
  const Estimate estimate = in.estimate ? *in.estimate : estimate_model(graph);
  const ProfileReport profile = in.profile ? *in.profile : profile_weights(graph);
  return {{"schema_version", std::string(kReportSchemaVersion)},
          {"tool_version", kVersion},
          {"model", {{"name", graph.name}, {"hash", fnv1a_hex(serialize_model(graph))}, {"layers", layers}}},
          {"passes", passes},
          {"estimates", estimate_to_json(estimate)},
          {"profile", profile_to_json(profile)},
          {"coverage", coverage_to_json(check_coverage(profile, graph))},
          {"bops", {{"total", total_bops(bops)}, {"layers", bops_layers}}},
          {"prune_history", history}};
}

}  // namespace fixflow

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

// The `fixflow` command line: convert, profile, train, qat, prune, emulate,
// estimate, scan and codegen over one versioned JSON run configuration.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fixflow/codegen.hpp"
#include "fixflow/dataset.hpp"
#include "fixflow/estimator.hpp"
#include "fixflow/kernels.hpp"
#include "fixflow/model_ir.hpp"
#include "fixflow/passes.hpp"
#include "fixflow/profiler.hpp"
#include "fixflow/pruning.hpp"
#include "fixflow/scan.hpp"
#include "fixflow/trainer.hpp"
#include "fixflow/version.hpp"

namespace fixflow::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr std::string_view kConfigVersion = "1";

inline json default_config() {
  return {
      {"config_version", std::string(kConfigVersion)},
      {"seed", 1},
      {"clock_mhz", 200.0},
      {"data",
       {{"train", "synthetic"},
        {"test", "synthetic"},
        {"synthetic",
         {{"train_size", 20000}, {"test_size", 5000}, {"center_scale", 0.55}, {"task_seed", 20210303}}}}},
      {"model", {{"arch", {16, 64, 32, 32, 5}}}},
      {"training",
       {{"epochs", 10},
        {"batch_size", 64},
        {"learning_rate", 1e-3},
        {"optimizer", "adam"},
        {"l1_lambda", 0.0}}},
      {"quantization", {{"bits", 6}}},
      {"prune",
       {{"method", "qap"},
        {"target_fraction", 0.8},
        {"increment", 0.1},
        {"retrain_epochs", 10},
        {"per_layer", false},
        {"l1_lambda", 1e-4}}},
      {"estimate",
       {{"reuse", json::array()},
        {"lut_threshold", 9},
        {"pipeline_constant", 3},
        {"interconnect_cycles", 1},
        {"zero_suppression", true}}},
      {"scan", {{"bits", {3, 4, 5, 6, 7, 8, 10, 12, 14, 16}}}},
  };
}

// Overlays `patch` onto `base`; every key must already exist with a
// compatible type.
inline void merge_config(json& base, const json& patch, const std::string& path = "$") {
  if (!patch.is_object()) throw ParseError(path, "expected an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string at = path + "." + key;
    if (!base.contains(key)) throw ParseError(at, "unknown configuration key");
    json& slot = base[key];
    if (slot.is_object()) {
      merge_config(slot, value, at);
    } else if (slot.is_number() ? !value.is_number() : slot.type() != value.type()) {
      throw ParseError(at, std::string("expected ") + slot.type_name());
    } else {
      slot = value;
    }
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

// "3..16", "4,6,8" or "6".
inline std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const int lo = std::stoi(text.substr(0, dots)), hi = std::stoi(text.substr(dots + 2));
    if (lo > hi) throw Error("empty range " + text);
    for (int b = lo; b <= hi; ++b) out.push_back(b);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    out.push_back(std::stoi(item, &used));
    if (used != item.size()) throw Error("not an integer: " + item);
  }
  if (out.empty()) throw Error("empty list");
  return out;
}

struct Flags {
  std::string model, config, data, test_data, out = ".", bits, reuse, arch, method;
  std::optional<std::uint64_t> seed;
  std::optional<double> clock_mhz, target_fraction;
  std::optional<int> epochs;
  bool taps = false;
};

struct Context {
  Flags flags;
  json config;
  std::shared_ptr<spdlog::logger> log;

  fs::path out() const { return flags.out; }
  std::uint64_t seed() const { return config["seed"].get<std::uint64_t>(); }

  ModelGraph load_model() const {
    if (flags.model.empty()) throw Error("--model is required");
    return parse_model(read_file(flags.model));
  }

  // The --model document when given, else a fresh MLP with the configured
  // architecture.
  ModelGraph model_or_arch() const {
    if (!flags.model.empty()) return load_model();
    const auto arch = config["model"]["arch"].get<std::vector<std::size_t>>();
    if (arch.size() < 2) throw Error("model.arch needs at least input and output widths");
    const std::vector<std::size_t> hidden(arch.begin() + 1, arch.end() - 1);
    return make_mlp("model", arch.front(), hidden, arch.back(), seed());
  }

  Dataset load_data(const std::string& which) const {
    const std::string src = config["data"][which].get<std::string>();
    if (src == "synthetic") {
      const json& s = config["data"]["synthetic"];
      SyntheticTask task;
      task.center_scale = s["center_scale"].get<double>();
      task.task_seed = s["task_seed"].get<std::uint64_t>();
      const bool train = which == "train";
      const auto n = s[train ? "train_size" : "test_size"].get<std::size_t>();
      return make_synthetic(task, n, train ? seed() : seed() + 1000003);
    }
    return load_dataset_csv(src);
  }

  TrainingConfig training() const {
    const json& t = config["training"];
    TrainingConfig c;
    c.epochs = t["epochs"].get<int>();
    c.batch_size = t["batch_size"].get<std::size_t>();
    c.learning_rate = t["learning_rate"].get<double>();
    const std::string opt = t["optimizer"].get<std::string>();
    if (opt == "adam") {
      c.optimizer = OptimizerKind::kAdam;
    } else if (opt == "sgd") {
      c.optimizer = OptimizerKind::kSgd;
    } else {
      throw ParseError("$.training.optimizer", "expected adam or sgd");
    }
    c.l1_lambda = t["l1_lambda"].get<double>();
    c.seed = seed();
    return c;
  }

  EstimatorOptions estimator() const {
    EstimatorOptions o;
    const json& e = config["estimate"];
    o.clock_mhz = config["clock_mhz"].get<double>();
    o.lut_threshold = e["lut_threshold"].get<int>();
    o.pipeline_constant = e["pipeline_constant"].get<int>();
    o.interconnect_cycles = e["interconnect_cycles"].get<int>();
    o.zero_suppression = e["zero_suppression"].get<bool>();
    return o;
  }
};

inline void apply_flags(Context& ctx) {
  json& c = ctx.config;
  const Flags& f = ctx.flags;
  if (f.seed) c["seed"] = *f.seed;
  if (f.clock_mhz) c["clock_mhz"] = *f.clock_mhz;
  if (!f.data.empty()) c["data"]["train"] = f.data;
  if (!f.test_data.empty()) c["data"]["test"] = f.test_data;
  if (!f.arch.empty()) c["model"]["arch"] = parse_int_list(f.arch);
  if (f.epochs) c["training"]["epochs"] = *f.epochs;
  if (!f.bits.empty()) {
    const auto bits = parse_int_list(f.bits);
    c["scan"]["bits"] = bits;
    c["quantization"]["bits"] = bits.front();
  }
  if (!f.reuse.empty()) c["estimate"]["reuse"] = parse_int_list(f.reuse);
  if (f.target_fraction) c["prune"]["target_fraction"] = *f.target_fraction;
  if (!f.method.empty()) c["prune"]["method"] = f.method;
}

// ---------------------------------------------------------------------------
// Subcommands

inline void write_model(const Context& ctx, const ModelGraph& g, const std::string& file = "model.json") {
  write_file(ctx.out() / file, serialize_model(g));
}

inline void cmd_convert(Context& ctx) {
  const ModelGraph in = ctx.load_model();
  auto [g, reports] = optimize(in);
  const auto diagnostics = validate(g);
  if (!diagnostics.empty()) throw ValidationError(diagnostics.front().to_string());
  json passes = json::array();
  for (const auto& r : reports) passes.push_back(pass_report_to_json(r));
  write_model(ctx, g);
  write_file(ctx.out() / "passes.json", dump_json(passes) + "\n");
  ctx.log->info("converted {} ({} layers)", g.name, g.nodes.size());
}

inline void cmd_profile(Context& ctx) {
  const ModelGraph g = ctx.load_model();
  const ProfileReport p = profile_weights(g);
  const CoverageReport c = check_coverage(p, g);
  for (const auto& f : c.findings) {
    if (f.severity == Severity::kWarning) {
      ctx.log->warn("{}", f.message);
    } else {
      ctx.log->info("{}", f.message);
    }
  }
  write_file(ctx.out() / "profile.json",
             dump_json({{"profile", profile_to_json(p)}, {"coverage", coverage_to_json(c)}}) + "\n");
}

inline void report_accuracy(const Context& ctx, const ModelGraph& g, Arithmetic a) {
  const Dataset test = ctx.load_data("test");
  const Evaluation e = evaluate(g, test, a);
  ctx.log->info("test accuracy {:.4f}, mean AUC {:.4f}", e.accuracy, e.mean_auc);
}

inline void cmd_train(Context& ctx) {
  const Dataset data = ctx.load_data("train");
  const TrainResult r = train(ctx.model_or_arch(), data, ctx.training());
  write_model(ctx, r.model);
  write_file(ctx.out() / "loss.csv", trace_to_csv(r.trace));
  report_accuracy(ctx, r.model, Arithmetic::kReal);
}

// Float training supplies the ranges that fix integer bits for the
// per-tensor precision plan.
inline PrecisionPlan reference_plan(const Context& ctx, const ModelGraph& init, const Dataset& data,
                                    int bits) {
  const ModelGraph reference = train(init, data, ctx.training()).model;
  return plan_for_width(reference, profile_ranges(reference, data), bits, PlanStyle::kPerTensor);
}

inline void cmd_qat(Context& ctx) {
  const Dataset data = ctx.load_data("train");
  const ModelGraph init = ctx.model_or_arch();
  const int bits = ctx.config["quantization"]["bits"].get<int>();
  const PrecisionPlan plan = reference_plan(ctx, init, data, bits);
  TrainingConfig cfg = ctx.training();
  cfg.quantizers = plan.quantizers;
  const TrainResult r = train_qat(init, data, cfg);
  const ModelGraph q = apply_plan(r.model, plan);
  write_model(ctx, q);
  write_file(ctx.out() / "loss.csv", trace_to_csv(r.trace));
  report_accuracy(ctx, q, Arithmetic::kFixed);
}

inline void cmd_prune(Context& ctx) {
  const json& p = ctx.config["prune"];
  PruneSchedule s;
  const std::string method = p["method"].get<std::string>();
  if (method == "l1") {
    s.method = PruneMethod::kL1Retrain;
  } else if (method == "lt") {
    s.method = PruneMethod::kLotteryRewind;
  } else if (method == "qap") {
    s.method = PruneMethod::kQap;
  } else {
    throw ParseError("$.prune.method", "expected l1, lt or qap");
  }
  s.target_fraction = p["target_fraction"].get<double>();
  s.increment = p["increment"].get<double>();
  s.retrain_epochs = p["retrain_epochs"].get<int>();
  s.per_layer = p["per_layer"].get<bool>();

  const Dataset data = ctx.load_data("train");
  const Dataset test = ctx.load_data("test");
  const ModelGraph init = ctx.model_or_arch();
  TrainingConfig cfg = ctx.training();
  if (s.method == PruneMethod::kL1Retrain) cfg.l1_lambda = p["l1_lambda"].get<double>();
  std::optional<PrecisionPlan> plan;
  if (s.method == PruneMethod::kQap) {
    plan = reference_plan(ctx, init, data, ctx.config["quantization"]["bits"].get<int>());
    cfg.quantizers = plan->quantizers;
  }
  const PruneOutcome out = prune_iterative(init, data, s, cfg, &test);
  write_model(ctx, plan ? apply_plan(out.model, *plan) : out.model);
  write_file(ctx.out() / "prune_history.csv", prune_history_to_csv(out.state.history));
  if (!out.state.history.empty()) {
    const auto& last = out.state.history.back();
    ctx.log->info("f_p {:.3f}: accuracy {:.4f}, BOPs {:.1f}", last.f_p, last.accuracy, last.bops);
  }
}

inline std::string raw_line(const std::vector<std::int64_t>& raw) {
  std::string s;
  for (std::size_t i = 0; i < raw.size(); ++i) s += (i ? " " : "") + std::to_string(raw[i]);
  return s + "\n";
}

inline void cmd_emulate(Context& ctx) {
  const ModelGraph g = ctx.load_model();
  const Dataset data = ctx.load_data("train");
  const CompiledModel m = compile(g);
  std::string outputs, predictions = "index,prediction,label\n";
  std::map<std::string, std::string> taps;
  std::vector<std::string> tap_order;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const InferenceResult r = run_inference(m, data.row(i), ctx.flags.taps);
    outputs += raw_line(r.fixed_output.raw);
    const auto& raw = r.fixed_output.raw;
    const auto best = std::max_element(raw.begin(), raw.end()) - raw.begin();
    if (best == data.labels[i]) ++correct;
    predictions += std::to_string(i) + "," + std::to_string(best) + "," + std::to_string(data.labels[i]) + "\n";
    for (const auto& tap : r.taps) {
      if (!taps.contains(tap.layer)) tap_order.push_back(tap.layer);
      std::string& text = taps[tap.layer];
      if (tap.fixed) {
        text += raw_line(tap.fixed->raw);
      } else {
        std::ostringstream os;
        os.precision(17);
        for (std::size_t k = 0; k < tap.values.size(); ++k) os << (k ? " " : "") << tap.values[k];
        text += os.str() + "\n";
      }
    }
  }
  write_file(ctx.out() / "outputs.txt", outputs);
  write_file(ctx.out() / "predictions.csv", predictions);
  for (const auto& name : tap_order) write_file(ctx.out() / "taps" / (name + ".txt"), taps[name]);
  ctx.log->info("emulated {} inputs, accuracy {:.4f}", data.size(),
                static_cast<double>(correct) / static_cast<double>(data.size()));
}

inline void cmd_estimate(Context& ctx) {
  const ModelGraph g = ctx.model_or_arch();
  EstimatorOptions opt = ctx.estimator();
  // Placeholder weights of an architecture-only model say nothing about
  // which multiplies vanish.
  if (ctx.flags.model.empty()) opt.zero_suppression = false;
  auto reuse = ctx.config["estimate"]["reuse"].get<std::vector<int>>();
  std::ostringstream csv;
  csv.precision(10);
  csv << "reuse,multiplications,multipliers,dsp,ii_cycles,latency_cycles,ii_ns,throughput\n";
  std::optional<Estimate> first;
  auto row = [&](const std::string& label, const Estimate& e) {
    csv << label << "," << e.resources.multiplications << "," << e.resources.multipliers << ","
        << e.resources.dsp_total << "," << e.timing.model_ii_cycles << ","
        << e.timing.total_latency_cycles << "," << e.timing.ii_ns() << ","
        << e.timing.throughput_per_second() << "\n";
  };
  if (reuse.empty()) {
    first = estimate_model(g, nullptr, opt);
    row("model", *first);
  }
  for (int r : reuse) {
    if (r < 1) throw Error("reuse factors must be >= 1");
    const Estimate e = estimate_model(with_reuse_factor(g, r), nullptr, opt);
    if (!first) first = e;
    row(std::to_string(r), e);
  }
  write_file(ctx.out() / "estimate.csv", csv.str());
  ReportInputs in;
  in.estimate = first;
  const ModelGraph reported = reuse.empty() ? g : with_reuse_factor(g, reuse.front());
  write_file(ctx.out() / "report.json", dump_json(emit_report(reported, in)) + "\n");
}

inline void cmd_scan(Context& ctx) {
  const Dataset train_set = ctx.load_data("train");
  const Dataset test_set = ctx.load_data("test");
  const auto bits = ctx.config["scan"]["bits"].get<std::vector<int>>();
  const ScanResult r = bitwidth_scan(ctx.model_or_arch(), train_set, test_set, ctx.training(), bits);
  write_file(ctx.out() / "scan.csv", scan_to_csv(r));
  ctx.log->info("float baseline accuracy {:.4f}", r.float_accuracy);
}

inline void cmd_codegen(Context& ctx) {
  const ModelGraph g = ctx.load_model();
  const ProjectTree tree = emit_project(g);
  for (const auto& f : tree.files) write_file(ctx.out() / f.path, f.contents);
  fs::permissions(ctx.out() / "build.sh", fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec,
                  fs::perm_options::add);
  write_file(ctx.out() / "report.json", dump_json(emit_report(g, {})) + "\n");
  ctx.log->info("wrote {} files to {}", tree.files.size() + 1, ctx.out().string());
}

// ---------------------------------------------------------------------------

inline std::shared_ptr<spdlog::logger> make_logger() {
  auto log = spdlog::get("fixflow");
  if (!log) log = spdlog::stderr_color_mt("fixflow");
  log->set_pattern("%^%l%$: %v");
  const char* level = std::getenv("FIXFLOW_LOG");
  log->set_level(level != nullptr ? spdlog::level::from_str(level) : spdlog::level::info);
  return log;
}

// Exit codes: 0 success, 1 domain error, 2 usage error.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"fixflow: fixed-point dataflow compiler for fully connected networks", "fixflow"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Context ctx;
  Flags& f = ctx.flags;

  struct Entry {
    const char* name;
    const char* help;
    void (*fn)(Context&);
  };
  const Entry entries[] = {
      {"convert", "parse, optimize and validate a model; write the canonical form", cmd_convert},
      {"profile", "profile parameters and check precision coverage", cmd_profile},
      {"train", "train in real arithmetic", cmd_train},
      {"qat", "quantization-aware training at --bits", cmd_qat},
      {"prune", "iterative pruning (--method l1, lt or qap)", cmd_prune},
      {"emulate", "bit-accurate batch inference", cmd_emulate},
      {"estimate", "resource and timing estimates over reuse factors", cmd_estimate},
      {"scan", "PTQ versus QAT relative accuracy over bit widths", cmd_scan},
      {"codegen", "emit the C++ project", cmd_codegen},
  };
  std::vector<std::pair<CLI::App*, void (*)(Context&)>> commands;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--model", f.model, "model document (JSON)");
    sub->add_option("--config", f.config, "run configuration (JSON)");
    sub->add_option("--data", f.data, "dataset CSV or 'synthetic'");
    sub->add_option("--test-data", f.test_data, "held-out dataset CSV or 'synthetic'");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--seed", f.seed, "random seed");
    sub->add_option("--clock-mhz", f.clock_mhz, "clock frequency");
    sub->add_option("--bits", f.bits, "bit width, list (4,6,8) or range (3..16)");
    sub->add_option("--reuse", f.reuse, "reuse factors, list or range");
    sub->add_option("--target-fraction", f.target_fraction, "final pruned fraction");
    sub->add_option("--method", f.method, "pruning method")->check(CLI::IsMember({"l1", "lt", "qap"}));
    sub->add_option("--arch", f.arch, "layer widths when no --model is given, e.g. 16,64,32,32,5");
    sub->add_option("--epochs", f.epochs, "training epochs");
    sub->add_flag("--taps", f.taps, "write every layer's output");
    commands.emplace_back(sub, e.fn);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  ctx.log = make_logger();
  try {
    ctx.config = default_config();
    if (!f.config.empty()) {
      json doc;
      try {
        doc = json::parse(read_file(f.config));
      } catch (const json::parse_error& e) {
        throw ParseError(f.config, e.what());
      }
      const auto version = doc.find("config_version");
      if (version == doc.end() || *version != std::string(kConfigVersion)) {
        throw ParseError("$.config_version", "expected \"" + std::string(kConfigVersion) + "\"");
      }
      merge_config(ctx.config, doc);
    }
    apply_flags(ctx);
    for (const auto& [sub, fn] : commands) {
      if (sub->parsed()) fn(ctx);
    }
  } catch (const ValidationError& e) {
    ctx.log->error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    ctx.log->error("{}", e.what());
    return 1;
  }
  return 0;
}

}  // namespace fixflow::cli

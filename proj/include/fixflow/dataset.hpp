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

// Labelled feature matrices: CSV I/O and a synthetic stand-in for the jet
// tagging task (16 features, 5 classes).

#pragma once

#include <cstdlib>
#include <fstream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fixflow/errors.hpp"
#include "fixflow/model_ir.hpp"
#include "fixflow/rng.hpp"

namespace fixflow {

struct Dataset {
  Tensor features;  // [N x d]
  std::vector<int> labels;
  int class_count = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.shape.size() == 2 ? features.shape[1] : 0; }
  std::span<const double> row(std::size_t i) const {
    return {features.data.data() + i * dim(), dim()};
  }

  void check() const {
    if (features.shape.size() != 2 || features.shape[0] != labels.size() ||
        !features.consistent()) {
      throw Error("dataset: features must be [N x d] with N labels");
    }
    for (int y : labels) {
      if (y < 0 || y >= class_count) throw Error("dataset: label out of range");
    }
  }

  Dataset slice(std::size_t begin, std::size_t end) const {
    Dataset d;
    d.class_count = class_count;
    d.features.shape = {end - begin, dim()};
    d.features.data.assign(features.data.begin() + static_cast<std::ptrdiff_t>(begin * dim()),
                           features.data.begin() + static_cast<std::ptrdiff_t>(end * dim()));
    d.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    labels.begin() + static_cast<std::ptrdiff_t>(end));
    return d;
  }
};

// Header row, feature columns, then an integer `label` column.
inline Dataset parse_dataset_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv", "empty file");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      cells.push_back(cell);
    }
    return cells;
  };
  const auto header = split(line);
  if (header.size() < 2 || header.back() != "label") {
    throw ParseError("csv:1", "header must end with a 'label' column");
  }
  const std::size_t dim = header.size() - 1;
  Dataset d;
  std::size_t line_no = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ParseError("csv:" + std::to_string(line_no), "expected " +
                                                             std::to_string(header.size()) + " columns");
    }
    for (std::size_t c = 0; c < dim; ++c) {
      char* end = nullptr;
      const double v = std::strtod(cells[c].c_str(), &end);
      if (cells[c].empty() || *end != '\0') {
        throw ParseError("csv:" + std::to_string(line_no), "bad number '" + cells[c] + "'");
      }
      d.features.data.push_back(v);
    }
    char* end = nullptr;
    const long label = std::strtol(cells.back().c_str(), &end, 10);
    if (cells.back().empty() || *end != '\0' || label < 0) {
      throw ParseError("csv:" + std::to_string(line_no), "bad label '" + cells.back() + "'");
    }
    d.labels.push_back(static_cast<int>(label));
    max_label = std::max(max_label, static_cast<int>(label));
  }
  d.features.shape = {d.labels.size(), dim};
  d.class_count = max_label + 1;
  return d;
}

inline Dataset load_dataset_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open dataset " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_dataset_csv(ss.str());
}

inline std::string dataset_to_csv(const Dataset& d) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t c = 0; c < d.dim(); ++c) os << "f" << c << ",";
  os << "label\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (double v : d.row(i)) os << v << ",";
    os << d.labels[i] << "\n";
  }
  return os.str();
}

// Synthetic classification task shaped like jet tagging: `classes` classes,
// each a mixture of two Gaussian clusters with per-class diagonal spread.
// The task geometry depends only on `task_seed`; `sample_seed` draws the
// samples, so train and test sets come from the same distribution.
struct SyntheticTask {
  std::size_t features = 16;
  int classes = 5;
  double center_scale = 0.55;
  std::uint64_t task_seed = 20210303;
};

inline Dataset make_synthetic(const SyntheticTask& task, std::size_t n,
                              std::uint64_t sample_seed) {
  Rng geometry(task.task_seed);
  const std::size_t d = task.features;
  constexpr int kClusters = 2;
  std::vector<std::vector<double>> centers, spread;
  for (int c = 0; c < task.classes * kClusters; ++c) {
    std::vector<double> mu(d), sd(d);
    for (std::size_t k = 0; k < d; ++k) {
      mu[k] = task.center_scale * geometry.normal();
      sd[k] = geometry.uniform(0.6, 1.4);
    }
    centers.push_back(std::move(mu));
    spread.push_back(std::move(sd));
  }
  Rng rng(sample_seed);
  Dataset out;
  out.class_count = task.classes;
  out.features.shape = {n, d};
  out.features.data.reserve(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(task.classes)));
    const auto cluster = static_cast<std::size_t>(label * kClusters) +
                         static_cast<std::size_t>(rng.below(kClusters));
    for (std::size_t k = 0; k < d; ++k) {
      out.features.data.push_back(centers[cluster][k] + spread[cluster][k] * rng.normal());
    }
    out.labels.push_back(label);
  }
  return out;
}

}  // namespace fixflow

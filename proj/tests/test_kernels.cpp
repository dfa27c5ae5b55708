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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixflow/kernels.hpp"
#include "rational_oracle.hpp"

namespace {

using fixflow::FixedMatrix;
using fixflow::FixedPointSpec;
using fixflow::FixedVector;
using fixflow::Overflow;
using fixflow::PrecisionSet;
using fixflow::RawPredicate;
using fixflow::Rounding;

FixedPointSpec random_spec(std::mt19937_64& rng, int lo, int hi) {
  FixedPointSpec s;
  s.width = lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1));
  s.integer_bits = static_cast<int>(rng() % 9) - 2;
  s.is_signed = rng() % 4 != 0;
  s.rounding = rng() % 2 ? Rounding::kRoundHalfUp : Rounding::kTruncate;
  s.overflow = rng() % 2 ? Overflow::kSaturate : Overflow::kWrap;
  return s;
}

std::vector<std::int64_t> random_raws(std::mt19937_64& rng, std::size_t n,
                                      const FixedPointSpec& s, double zero_fraction = 0) {
  std::uniform_int_distribution<std::int64_t> d(s.min_raw(), s.max_raw());
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::int64_t> v(n);
  for (auto& x : v) x = u(rng) < zero_fraction ? 0 : d(rng);
  return v;
}

TEST(Kernels, DenseMatchesRationalOracle) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n_in = 1 + rng() % 12, n_out = 1 + rng() % 6;
    const FixedPointSpec ws = random_spec(rng, 2, 16), bs = random_spec(rng, 2, 16),
                         xs = random_spec(rng, 2, 16);
    PrecisionSet p;
    p.weight = ws;
    p.bias = bs;
    p.accumulator = random_spec(rng, 4, 40);
    p.result = random_spec(rng, 2, 24);
    const FixedMatrix w{n_out, n_in, ws, random_raws(rng, n_in * n_out, ws, 0.2)};
    const FixedVector b{bs, random_raws(rng, n_out, bs)};
    const FixedVector x{xs, random_raws(rng, n_in, xs)};
    const auto y = fixflow::dense_mv(w, b, x, p);
    const auto expect = oracle::dense(w.raw, ws, b.raw, bs, x.raw, xs, p.accumulator, p.result);
    ASSERT_EQ(y.raw, expect) << "trial " << trial;
    EXPECT_EQ(y.spec, p.result);
  }
}

TEST(Kernels, DenseShapeMismatchThrows) {
  const FixedPointSpec s{8, 3};
  const FixedMatrix w{2, 3, s, std::vector<std::int64_t>(6, 1)};
  const FixedVector b{s, {0, 0}};
  const FixedVector x{s, {1, 2}};
  EXPECT_THROW(fixflow::dense_mv(w, b, x, PrecisionSet{}), fixflow::KernelError);
}

TEST(Kernels, CooMatchesDenseAcrossSparsity) {
  std::mt19937_64 rng(102);
  for (double sparsity : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0}) {
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t n_in = 1 + rng() % 20, n_out = 1 + rng() % 10;
      PrecisionSet p;
      p.weight = random_spec(rng, 2, 12);
      p.bias = random_spec(rng, 2, 12);
      p.accumulator = random_spec(rng, 8, 32);
      p.result = random_spec(rng, 4, 16);
      const FixedPointSpec xs = random_spec(rng, 2, 12);
      const FixedMatrix w{n_out, n_in, p.weight, random_raws(rng, n_in * n_out, p.weight, sparsity)};
      const FixedVector b{p.bias, random_raws(rng, n_out, p.bias)};
      const FixedVector x{xs, random_raws(rng, n_in, xs)};
      const auto coo = fixflow::compress_coo(w);
      EXPECT_EQ(fixflow::decompress_coo(coo), w);
      EXPECT_EQ(fixflow::sparse_mv_coo(coo, b, x, p), fixflow::dense_mv(w, b, x, p))
          << "sparsity " << sparsity;
    }
  }
}

TEST(Kernels, CooPackingRoundTrips) {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n_in = 1 + rng() % 40, n_out = 1 + rng() % 40;
    const FixedPointSpec s = random_spec(rng, 2, 16);
    const FixedMatrix w{n_out, n_in, s, random_raws(rng, n_in * n_out, s, 0.5)};
    const auto coo = fixflow::compress_coo(w);
    EXPECT_EQ(coo.index_bits(),
              n_in * n_out <= 1 ? 0 : static_cast<int>(std::ceil(std::log2(double(n_in * n_out)))));
    for (const auto& e : coo.entries) {
      const auto word = coo.packed_word(e);
      ASSERT_TRUE(word.has_value());
      EXPECT_EQ(coo.unpack(*word), e);
    }
  }
}

TEST(Kernels, CooCanonicalization) {
  const FixedPointSpec s{8, 3};
  const auto coo = fixflow::CooWeights::from_entries(3, 2, s, {{4, 7}, {1, -2}});
  EXPECT_EQ(coo.entries.front().index, 1u);
  EXPECT_THROW(fixflow::CooWeights::from_entries(3, 2, s, {{1, 1}, {1, 2}}), fixflow::KernelError);
  EXPECT_THROW(fixflow::CooWeights::from_entries(3, 2, s, {{6, 1}}), fixflow::KernelError);
  EXPECT_THROW(fixflow::CooWeights::from_entries(3, 2, s, {{0, 0}}), fixflow::KernelError);
}

// Brute force over every raw value of small grids.
TEST(Kernels, RawPredicatesAreExact) {
  std::mt19937_64 rng(104);
  std::uniform_real_distribution<double> d(-5, 5);
  for (int frac : {-2, 0, 1, 3, 6}) {
    for (int trial = 0; trial < 200; ++trial) {
      double t = d(rng);
      if (trial % 4 == 0) t = std::ldexp(std::round(std::ldexp(t, frac)), -frac);  // on the grid
      const auto ge = fixflow::value_at_least(t, frac);
      const auto le = fixflow::value_at_most(t, frac);
      const auto gt = fixflow::value_above(t, frac);
      const auto lt = fixflow::value_below(t, frac);
      for (std::int64_t raw = -600; raw <= 600; ++raw) {
        const double v = std::ldexp(static_cast<double>(raw), -frac);
        ASSERT_EQ(ge(raw), v >= t);
        ASSERT_EQ(le(raw), v <= t);
        ASSERT_EQ(gt(raw), v > t);
        ASSERT_EQ(lt(raw), v < t);
      }
    }
  }
}

TEST(Kernels, RawPredicatesSaturateForHugeThresholds) {
  EXPECT_EQ(fixflow::value_at_least(1e40, 10).kind, RawPredicate::Kind::kNever);
  EXPECT_EQ(fixflow::value_at_least(-1e40, 10).kind, RawPredicate::Kind::kAlways);
  EXPECT_EQ(fixflow::value_at_most(1e40, 10).kind, RawPredicate::Kind::kAlways);
  EXPECT_EQ(fixflow::value_below(-1e40, 10).kind, RawPredicate::Kind::kNever);
}

TEST(Kernels, SoftmaxIsStable) {
  const std::vector<double> logits{1000.0, 1000.0, -1000.0};
  const auto p = fixflow::softmax(logits);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
  EXPECT_EQ(p[2], 0.0);
}

fixflow::ModelGraph four_layer_model() {
  using fixflow::LayerKind;
  using fixflow::LayerNode;
  using fixflow::Tensor;
  fixflow::ModelGraph g;
  g.input_shape = {3};
  LayerNode in{"input", LayerKind::kInput, {}, PrecisionSet{}, 1, false, {}};
  LayerNode fc1{"fc1", LayerKind::kDense,
                {{"weight", Tensor::matrix(2, 3, {0.5, -1.0, 0.25, 1.5, 0.75, -0.5})},
                 {"bias", Tensor::vector({0.125, -0.25})}},
                PrecisionSet{}, 1, false, {"input"}};
  LayerNode bn{"bn", LayerKind::kBatchNorm,
               {{"gamma", Tensor::vector({1.0, 2.0})},
                {"beta", Tensor::vector({0.5, 0.0})},
                {"moving_mean", Tensor::vector({0.0, 1.0})},
                {"moving_variance", Tensor::vector({1.0, 4.0})},
                {"epsilon", Tensor::scalar(0.0)}},
               PrecisionSet{}, 1, false, {"fc1"}};
  LayerNode relu{"relu", LayerKind::kRelu, {}, PrecisionSet{}, 1, false, {"bn"}};
  LayerNode tern{"tern", LayerKind::kTernaryTanh, {}, PrecisionSet{}, 1, false, {"relu"}};
  g.nodes = {in, fc1, bn, relu, tern};
  return g;
}

TEST(Kernels, TapsCoverEveryLayer) {
  const auto g = four_layer_model();
  const std::vector<double> x{1.0, 0.5, -2.0};
  const auto r = fixflow::run_inference(g, fixflow::Tensor::vector(x), true);
  ASSERT_EQ(r.taps.size(), 4u);
  EXPECT_EQ(r.taps[0].layer, "fc1");
  EXPECT_EQ(r.taps[3].layer, "tern");
  // fc1 = [0.5 - 0.5 - 0.5 + 0.125, 1.5 + 0.375 + 1 - 0.25] = [-0.375, 2.625]
  EXPECT_EQ(r.taps[0].values, (std::vector<double>{-0.375, 2.625}));
  // bn: [-0.375 + 0.5, 2 * (2.625 - 1) / 2] = [0.125, 1.625]
  EXPECT_EQ(r.taps[1].values, (std::vector<double>{0.125, 1.625}));
  EXPECT_EQ(r.output, (std::vector<double>{0.0, 1.0}));
  std::vector<fixflow::LayerTap> real_taps;
  EXPECT_EQ(fixflow::run_real(g, x, &real_taps), r.output);
  ASSERT_EQ(real_taps.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(real_taps[i].values, r.taps[i].values);
}

TEST(Kernels, TernaryBoundaryIsExclusive) {
  auto g = four_layer_model();
  // Feed the ternary layer directly.
  g.nodes = {g.nodes[0], g.nodes[4]};
  g.nodes[1].inputs = {"input"};
  const std::vector<double> x{0.5, -0.5, 0.515625};
  const auto r = fixflow::run_inference(g, fixflow::Tensor::vector(x), false);
  EXPECT_EQ(r.output, (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Kernels, CompressedLayerMatchesDenseLayer) {
  auto g = four_layer_model();
  auto c = g;
  c.find("fc1")->compression = true;
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<double> d(-4, 4);
  for (int k = 0; k < 50; ++k) {
    const auto x = fixflow::Tensor::vector({d(rng), d(rng), d(rng)});
    EXPECT_EQ(fixflow::run_inference(g, x, false).fixed_output,
              fixflow::run_inference(c, x, false).fixed_output);
  }
}

TEST(Kernels, InputWidthIsChecked) {
  const auto g = four_layer_model();
  EXPECT_THROW(fixflow::run_inference(g, fixflow::Tensor::vector({1.0}), false),
               fixflow::KernelError);
}

}  // namespace

/*
 * Copyright 2026 The bevloc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "bevloc/embed.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "bevloc/grid.h"
#include "gradient_suites.h"
#include "gtest/gtest.h"
#include "oracles.h"

namespace bevloc {
namespace {

using gradsuite::RandomTensor;

FcnParams RandomParams(const FcnSpec& spec, std::uint64_t seed) {
  return gradsuite::PerturbedParams(spec, seed, 0.3f);
}

oracle::Field ToField(const Tensor3& t) {
  return {t.channels, t.rows, t.cols, {t.values.begin(), t.values.end()},
          std::vector<int>(t.plane_size(), 1)};
}

class LayerGradientTest : public ::testing::TestWithParam<gradsuite::NamedLayer> {};

TEST_P(LayerGradientTest, MatchesFiniteDifferences) {
  const FcnSpec spec = gradsuite::SingleLayerSpec(GetParam().layer);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const gradsuite::LayerCheck r = gradsuite::CheckNetworkGradients(spec, 7, 9, seed);
    EXPECT_LE(r.params_f32, 1e-3) << "seed " << seed;
    EXPECT_LE(r.input_f32, 1e-3) << "seed " << seed;
    EXPECT_LE(r.params_f64, 1e-4) << "seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(LayerTypes, LayerGradientTest,
                         ::testing::ValuesIn(gradsuite::LayerVariants()),
                         [](const auto& info) { return std::string(info.param.name); });

TEST(NetworkGradientTest, DefaultStackMatchesFiniteDifferences) {
  const FcnSpec spec = FcnSpec::Default(2, 4, 6);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const gradsuite::LayerCheck r = gradsuite::CheckNetworkGradients(spec, 6, 7, seed);
    EXPECT_LE(r.params_f32, 1e-3) << "seed " << seed;
    EXPECT_LE(r.input_f32, 1e-3) << "seed " << seed;
    EXPECT_LE(r.params_f64, 1e-4) << "seed " << seed;
  }
}

TEST(BackwardTest, HandComputedOneByOneConv) {
  FcnSpec spec;
  spec.layers = {{1, 1, 1, false, Activation::kLinear}};
  FcnParams p = InitParams(spec, 1);
  p.layers[0].kernel = {2.f};
  p.layers[0].bias = {0.5f};
  Tensor3 x(1, 2, 2);
  x.values = {1.f, 2.f, 3.f, 4.f};
  Tensor3 g(1, 2, 2);
  g.values = {1.f, -1.f, 0.5f, 2.f};
  ForwardCache<float> cache;
  const Tensor3 y = Forward(p, x, &cache);
  EXPECT_EQ(y.values, (std::vector<float>{2.5f, 4.5f, 6.5f, 8.5f}));
  const Gradients<float> grads = Backward(p, cache, g);
  // dK = sum x * g = 1 - 2 + 1.5 + 8, db = sum g, dx = K * g.
  EXPECT_FLOAT_EQ(grads.params.layers[0].kernel[0], 8.5f);
  EXPECT_FLOAT_EQ(grads.params.layers[0].bias[0], 2.5f);
  EXPECT_EQ(grads.input.values, (std::vector<float>{2.f, -2.f, 1.f, 4.f}));
}

TEST(BackwardTest, ZeroOutputGradGivesZeroGrads) {
  const FcnSpec spec = FcnSpec::Default(1, 4, 3);
  std::mt19937_64 rng(2);
  const FcnParams p = RandomParams(spec, 2);
  const Tensor3 x = RandomTensor(1, 5, 6, rng);
  ForwardCache<float> cache;
  Forward(p, x, &cache);
  const Gradients<float> g = Backward(p, cache, Tensor3(1, 5, 6));
  for (const float* v : g.params.Pointers()) EXPECT_EQ(*v, 0.f);
  for (float v : g.input.values) EXPECT_EQ(v, 0.f);
  EXPECT_THROW(Backward(p, cache, Tensor3(2, 5, 6)), std::invalid_argument);
}

TEST(ForwardTest, IdentityEmbeddingReturnsIntensities) {
  BevGrid g(GridGeometry::Centered(3, 4, 0.05));
  g.Set(1, 2, 0.7f);
  g.Set(0, 0, 0.1f);
  const Tensor3 t = Forward(FcnParams{}, g);
  ASSERT_EQ(t.channels, 1);
  EXPECT_EQ(t.at(0, 1, 2), 0.7f);
  EXPECT_EQ(t.at(0, 0, 0), 0.1f);
  EXPECT_EQ(t.at(0, 2, 3), 0.f);
}

TEST(ForwardTest, ZeroInputWithNormGivesShift) {
  FcnSpec spec;
  spec.layers = {{1, 3, 3, true, Activation::kLinear}};
  FcnParams p = InitParams(spec, 4);
  p.layers[0].shift = {0.25f, -0.5f, 1.f};
  const Tensor3 y = Forward(p, Tensor3(1, 5, 5));
  for (int c = 0; c < 3; ++c)
    for (float v : y.plane(c)) EXPECT_FLOAT_EQ(v, p.layers[0].shift[c]);

  spec.layers[0].instance_norm = false;
  const Tensor3 z = Forward(InitParams(spec, 4), Tensor3(1, 5, 5));
  for (float v : z.values) EXPECT_EQ(v, 0.f);
}

TEST(ForwardTest, DeterministicAndShapePreserving) {
  const FcnSpec spec = FcnSpec::Default(3);
  const FcnParams p = InitParams(spec, 8);
  std::mt19937_64 rng(8);
  const Tensor3 x = RandomTensor(1, 13, 17, rng);
  const Tensor3 a = Forward(p, x), b = Forward(p, x);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.channels, 3);
  EXPECT_EQ(a.rows, 13);
  EXPECT_EQ(a.cols, 17);
}

TEST(ForwardTest, MatchesOracleNetwork) {
  const FcnSpec spec = FcnSpec::Default(2, 5, 4);
  const FcnParams p = RandomParams(spec, 9);
  std::mt19937_64 rng(9);
  const Tensor3 x = RandomTensor(1, 10, 12, rng);
  const Tensor3 y = Forward(p, x);
  const oracle::Field expected = oracle::NetworkForward(oracle::ToLayers(p), ToField(x));
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    EXPECT_NEAR(y.values[i], expected.v[i], 1e-4 * std::max(1.0, std::abs(expected.v[i])));
  }
}

TEST(ForwardTest, TranslationEquivariance) {
  // Without normalization, shifting the input shifts the interior output.
  FcnSpec spec = FcnSpec::Default(1, 4, 3);
  for (auto& l : spec.layers) l.instance_norm = false;
  const FcnParams p = RandomParams(spec, 10);
  std::mt19937_64 rng(10);
  const Tensor3 x = RandomTensor(1, 24, 24, rng);
  Tensor3 shifted(1, 24, 24);
  for (int r = 0; r < 24; ++r)
    for (int c = 0; c < 24; ++c) shifted.at(0, r, c) = x.at(0, (r + 2) % 24, (c + 3) % 24);
  const Tensor3 a = Forward(p, x), b = Forward(p, shifted);
  for (int r = 4; r < 18; ++r)
    for (int c = 4; c < 18; ++c) EXPECT_NEAR(b.at(0, r, c), a.at(0, r + 2, c + 3), 1e-5);

  // With normalization, a periodic input keeps its statistics under shifts of
  // the pattern, up to the zero-padded border.
  const FcnSpec norm = FcnSpec::Default(1, 4, 2);
  const FcnParams q = RandomParams(norm, 11);
  Tensor3 periodic(1, 96, 96), moved(1, 96, 96);
  for (int r = 0; r < 96; ++r)
    for (int c = 0; c < 96; ++c) {
      periodic.at(0, r, c) = static_cast<float>(std::sin(2 * std::numbers::pi * r / 8) + std::cos(2 * std::numbers::pi * c / 12));
      moved.at(0, r, c) = static_cast<float>(std::sin(2 * std::numbers::pi * (r + 3) / 8) + std::cos(2 * std::numbers::pi * (c + 5) / 12));
    }
  const Tensor3 pa = Forward(q, periodic), pb = Forward(q, moved);
  double worst = 0.0, scale = 0.0;
  for (int r = 8; r < 80; ++r)
    for (int c = 8; c < 80; ++c) {
      worst = std::max(worst, static_cast<double>(std::abs(pb.at(0, r, c) - pa.at(0, r + 3, c + 5))));
      scale = std::max(scale, static_cast<double>(std::abs(pa.at(0, r, c))));
    }
  EXPECT_LE(worst, 0.05 * scale);
}

TEST(InstanceNormTest, ConstantChannelGivesShift) {
  Tensor3 x(2, 3, 3, 4.f);
  const Tensor3 y = InstanceNorm<float>(x, {2.f, 3.f}, {0.5f, -1.f}, 1e-5);
  for (float v : y.plane(0)) EXPECT_FLOAT_EQ(v, 0.5f);
  for (float v : y.plane(1)) EXPECT_FLOAT_EQ(v, -1.f);
}

TEST(InstanceNormTest, MomentsMatchScaleAndShift) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(3.0, 2.0);
  Tensor3T<double> x(2, 40, 40);
  for (double& v : x.values) v = n(rng);
  const auto y = InstanceNorm<double>(x, {1.5, 0.5}, {0.2, -0.3}, 1e-5);
  for (int c = 0; c < 2; ++c) {
    double mean = 0.0, sq = 0.0;
    for (double v : y.plane(c)) mean += v;
    mean /= 1600;
    for (double v : y.plane(c)) sq += (v - mean) * (v - mean);
    EXPECT_NEAR(mean, c == 0 ? 0.2 : -0.3, 1e-9);
    EXPECT_NEAR(std::sqrt(sq / 1600), c == 0 ? 1.5 : 0.5, 1e-4);
  }
  Tensor3T<double> standard(1, 1, 2);
  standard.values = {-1.0, 1.0};
  const auto s = InstanceNorm<double>(standard, {1.0}, {0.0}, 1e-5);
  EXPECT_NEAR(s.values[0], -1.0, 1e-5);
  EXPECT_NEAR(s.values[1], 1.0, 1e-5);
}

TEST(InitParamsTest, DeterministicHeScaled) {
  const FcnSpec spec = FcnSpec::Default(1, 32, 3);
  const FcnParams a = InitParams(spec, 5), b = InitParams(spec, 5),
                  c = InitParams(spec, 6);
  EXPECT_EQ(a.layers[1].kernel, b.layers[1].kernel);
  EXPECT_NE(a.layers[1].kernel, c.layers[1].kernel);
  const auto& k = a.layers[1].kernel;
  double sq = 0.0;
  for (float v : k) sq += static_cast<double>(v) * v;
  const double fan_in = 32 * 9;
  EXPECT_NEAR(sq / k.size(), 2.0 / fan_in, 0.2 * 2.0 / fan_in);
  for (float v : a.layers[1].scale) EXPECT_EQ(v, 1.f);
  for (float v : a.layers[1].shift) EXPECT_EQ(v, 0.f);
  for (float v : a.layers[1].bias) EXPECT_EQ(v, 0.f);
}

TEST(FcnSpecTest, DefaultArchitecture) {
  const FcnSpec spec = FcnSpec::Default(1);
  ASSERT_EQ(spec.layers.size(), 6u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(spec.layers[i].out_channels, 16);
    EXPECT_TRUE(spec.layers[i].instance_norm);
    EXPECT_EQ(spec.layers[i].activation, Activation::kLeakyRelu);
    EXPECT_EQ(spec.layers[i].kernel, 3);
  }
  EXPECT_EQ(spec.layers[5].out_channels, 1);
  EXPECT_EQ(spec.layers[5].activation, Activation::kLinear);
  FcnSpec bad = spec;
  bad.layers[2].in_channels = 3;
  EXPECT_THROW(bad.Validate(), std::invalid_argument);
  bad = spec;
  bad.layers[0].kernel = 4;
  EXPECT_THROW(bad.Validate(), std::invalid_argument);
}

TEST(CheckpointTest, RoundtripAndBadMagic) {
  const FcnParams a = RandomParams(FcnSpec::Default(2, 4, 3), 3);
  const FcnParams b = RandomParams(FcnSpec::Default(2, 5, 2), 4);
  std::stringstream ss;
  WriteCheckpoint({a, b}, ss);
  const std::vector<FcnParams> back = ReadCheckpoint(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(back[0].spec == a.spec);
  EXPECT_TRUE(back[1].spec == b.spec);
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    EXPECT_EQ(back[0].layers[i].kernel, a.layers[i].kernel);
    EXPECT_EQ(back[0].layers[i].shift, a.layers[i].shift);
  }
  std::stringstream bad("FCN2....");
  EXPECT_THROW(ReadCheckpoint(bad), std::runtime_error);
}

}  // namespace
}  // namespace bevloc

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

#include "bevloc/matching.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "bevloc/grid.h"
#include "gradcheck.h"
#include "gtest/gtest.h"
#include "oracles.h"

namespace bevloc {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

MaskedEmbedding RandomEmbedding(int channels, int rows, int cols, double fill,
                                std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  MaskedEmbedding e{Tensor3(channels, rows, cols), {}};
  for (float& v : e.values.values) v = u(rng);
  e.mask.resize(e.values.plane_size());
  for (auto& m : e.mask) m = p(rng) < fill;
  return e;
}

SearchWindow SmallWindow(int nx, int ny, int nt, double step_deg) {
  SearchWindow w;
  w.x_cells = nx;
  w.y_cells = ny;
  w.theta_cells = nt;
  w.theta_step = step_deg * kDeg;
  return w;
}

double MaxAbs(const std::vector<float>& v) {
  double m = 0.0;
  for (float x : v) m = std::max(m, static_cast<double>(std::abs(x)));
  return m;
}

TEST(MaskedScoreTest, Examples) {
  const Tensor3 ones(1, 2, 2, 1.f);
  const std::vector<std::uint8_t> full(4, 1), empty(4, 0);
  EXPECT_DOUBLE_EQ(MaskedScore(ones, full, ones, full), 0.25);
  EXPECT_EQ(MaskedScore(ones, empty, ones, full), 0.0);
  const std::vector<std::uint8_t> top{1, 1, 0, 0}, bottom{0, 0, 1, 1};
  EXPECT_EQ(MaskedScore(ones, top, ones, bottom), 0.0);
  EXPECT_THROW(MaskedScore(ones, full, Tensor3(1, 2, 3), std::vector<std::uint8_t>(6, 1)),
               std::invalid_argument);
}

TEST(MaskedScoreTest, SymmetricAndMatchesOracle) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const MaskedEmbedding a = RandomEmbedding(2, 6, 7, 0.6, rng);
    const MaskedEmbedding b = RandomEmbedding(2, 6, 7, 0.6, rng);
    const double ab = MaskedScore(a.values, a.mask, b.values, b.mask);
    EXPECT_NEAR(ab, MaskedScore(b.values, b.mask, a.values, a.mask), 1e-12);
    EXPECT_NEAR(ab, oracle::MaskedScore(oracle::FromEmbedding(a), oracle::FromEmbedding(b)),
                1e-9);
  }
}

TEST(RotationCandidatesTest, Examples) {
  const SearchWindow w = SearchWindow::FromRanges(1.0, 1.0, 2.5 * kDeg, 5, 0.05);
  const std::vector<double> c = RotationCandidates(w);
  const std::vector<double> expected{-1.0, -0.5, 0.0, 0.5, 1.0};
  ASSERT_EQ(c.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(c[i] / kDeg, expected[i], 1e-12);
  EXPECT_EQ(w.x_cells, 21);
  EXPECT_EQ(w.y_cells, 21);
  EXPECT_EQ(RotationCandidates(SmallWindow(3, 3, 1, 0.5)), std::vector<double>{0.0});
  EXPECT_THROW(SmallWindow(4, 3, 1, 0.5).Validate(), std::invalid_argument);
}

TEST(SearchWindowTest, CellPoseComposesOffsetOntoCenter) {
  SearchWindow w;
  w.center = {10.0, 5.0, std::numbers::pi / 2};
  const Pose2D p = w.CellPose(w.half_theta() + 1, w.half_y(), w.half_x() + 2);
  EXPECT_NEAR(p.x, 10.0, 1e-12);
  EXPECT_NEAR(p.y, 5.1, 1e-12);
  EXPECT_NEAR(p.theta, std::numbers::pi / 2 + 0.5 * kDeg, 1e-12);
}

TEST(ScoreVolumeTest, SpatialMatchesScalarOracle) {
  std::mt19937_64 rng(2);
  const SearchWindow w = SmallWindow(5, 3, 5, 7.0);
  for (int i = 0; i < 10; ++i) {
    const MaskedEmbedding online = RandomEmbedding(1, 8, 8, 0.7, rng);
    const MaskedEmbedding map = RandomEmbedding(1, 12, 14, 0.8, rng);
    for (auto norm : {ScoreNormalization::kGlobal, ScoreNormalization::kPerOffset}) {
      const ScoreVolume v = ScoreVolumeSpatial(online, map, w, norm);
      const std::vector<double> expected =
          oracle::ScoreVolume(oracle::FromEmbedding(online), oracle::FromEmbedding(map),
                              w, norm == ScoreNormalization::kPerOffset);
      for (int k = 0; k < w.size(); ++k) EXPECT_NEAR(v.scores[k], expected[k], 1e-6);
    }
  }
}

TEST(ScoreVolumeTest, FftMatchesSpatialOnReferenceSize) {
  std::mt19937_64 rng(3);
  const SearchWindow w;
  const MaskedEmbedding online = RandomEmbedding(1, 48, 64, 0.4, rng);
  const MaskedEmbedding map = RandomEmbedding(1, 68, 84, 0.9, rng);
  const ScoreVolume s = ScoreVolumeSpatial(online, map, w);
  const ScoreVolume f = ScoreVolumeFft(online, map, w);
  for (int k = 0; k < w.size(); ++k) EXPECT_NEAR(f.scores[k], s.scores[k], 1e-4);
}

TEST(ScoreVolumeTest, FftMatchesSpatialOnRandomInstances) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> size(8, 128), cells(0, 5), ch(1, 3);
  Matcher fft, spatial;
  Matcher fft_po(ScoreNormalization::kPerOffset), spatial_po(ScoreNormalization::kPerOffset);
  for (int i = 0; i < 100; ++i) {
    const SearchWindow w = SmallWindow(2 * cells(rng) + 1, 2 * cells(rng) + 1, 3, 0.5);
    const int rows = size(rng), cols = size(rng), c = ch(rng);
    const MaskedEmbedding online = RandomEmbedding(c, rows, cols, 0.5, rng);
    const MaskedEmbedding map =
        RandomEmbedding(c, rows + w.y_cells - 1 + cells(rng), cols + w.x_cells - 1, 0.8, rng);
    const bool per_offset = i % 4 == 3;
    const ScoreVolume s = per_offset ? spatial_po.Spatial(online, map, w)
                                     : spatial.Spatial(online, map, w);
    const ScoreVolume f = per_offset ? fft_po.Fft(online, map, w) : fft.Fft(online, map, w);
    const double tol = 1e-4 * std::max(1.0, MaxAbs(s.scores));
    for (int k = 0; k < w.size(); ++k) ASSERT_NEAR(f.scores[k], s.scores[k], tol) << i;
  }
}

TEST(ScoreVolumeTest, ImpulseReadsMapUnderTrajectory) {
  std::mt19937_64 rng(5);
  const SearchWindow w = SmallWindow(7, 5, 1, 0.5);
  MaskedEmbedding online{Tensor3(1, 9, 11), std::vector<std::uint8_t>(99, 0)};
  online.values.at(0, 2, 3) = 2.f;
  online.mask[2 * 11 + 3] = 1;
  const MaskedEmbedding map = RandomEmbedding(1, 13, 17, 1.0, rng);
  const ScoreVolume v = ScoreVolumeFft(online, map, w);
  const int base_r = 13 / 2 - 9 / 2 - 2, base_c = 17 / 2 - 11 / 2 - 3;
  for (int iy = 0; iy < 5; ++iy)
    for (int ix = 0; ix < 7; ++ix) {
      const double expected = 2.0 * map.values.at(0, base_r + iy + 2, base_c + ix + 3) / 221.0;
      EXPECT_NEAR(v.at(0, iy, ix), expected, 1e-6);
    }
}

TEST(ScoreVolumeTest, DegenerateInputsGiveZeros) {
  std::mt19937_64 rng(6);
  const SearchWindow w = SmallWindow(5, 5, 3, 0.5);
  MaskedEmbedding online = RandomEmbedding(1, 10, 10, 0.5, rng);
  MaskedEmbedding map = RandomEmbedding(1, 14, 14, 1.0, rng);
  MaskedEmbedding zero_map = map;
  std::fill(zero_map.values.values.begin(), zero_map.values.values.end(), 0.f);
  for (float s : ScoreVolumeFft(online, zero_map, w).scores) EXPECT_EQ(s, 0.f);
  MaskedEmbedding unobserved = online;
  std::fill(unobserved.mask.begin(), unobserved.mask.end(), 0);
  for (float s : ScoreVolumeFft(unobserved, map, w).scores) EXPECT_EQ(s, 0.f);
  for (float s : ScoreVolumeSpatial(unobserved, map, w).scores) EXPECT_EQ(s, 0.f);
  const MaskedEmbedding small = RandomEmbedding(1, 12, 12, 1.0, rng);
  EXPECT_THROW(ScoreVolumeFft(online, small, w), std::invalid_argument);
  EXPECT_THROW(ScoreVolumeSpatial(online, small, w), std::invalid_argument);
}

TEST(ScoreVolumeTest, ScalingOnlineScalesScores) {
  std::mt19937_64 rng(7);
  const SearchWindow w = SmallWindow(7, 7, 3, 1.0);
  const MaskedEmbedding online = RandomEmbedding(2, 20, 24, 0.5, rng);
  const MaskedEmbedding map = RandomEmbedding(2, 26, 30, 1.0, rng);
  MaskedEmbedding scaled = online;
  for (float& v : scaled.values.values) v *= 2.5f;
  const ScoreVolume a = ScoreVolumeFft(online, map, w);
  const ScoreVolume b = ScoreVolumeFft(scaled, map, w);
  for (int k = 0; k < w.size(); ++k) EXPECT_NEAR(b.scores[k], 2.5f * a.scores[k], 1e-5);
  EXPECT_EQ(std::max_element(a.scores.begin(), a.scores.end()) - a.scores.begin(),
            std::max_element(b.scores.begin(), b.scores.end()) - b.scores.begin());
}

// A textured map; a noiseless online crop taken at a known hypothesis must
// score best there.
TEST(ScoreVolumeTest, SelfMatchPeaksAtTruth) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  std::vector<double> noise(240 * 280);
  for (double& v : noise) v = n(rng);
  BevGrid map(GridGeometry::Centered(240, 280, 0.05));
  for (int r = 0; r < 240; ++r) {
    for (int c = 0; c < 280; ++c) {
      double sum = 0.0;
      for (int dr = -2; dr <= 2; ++dr) {
        for (int dc = -2; dc <= 2; ++dc) {
          const int rr = std::clamp(r + dr, 0, 239);
          const int cc = std::clamp(c + dc, 0, 279);
          sum += noise[rr * 280 + cc];
        }
      }
      map.Set(r, c, static_cast<float>(sum / 5.0));
    }
  }
  SearchWindow w;
  w.center = {0.02, -0.01, 0.1 * kDeg};
  w.theta_step = 1.0 * kDeg;
  for (const auto& [t, iy, ix] : {std::array<int, 3>{2, 10, 10}, {1, 4, 17}, {4, 13, 2}}) {
    const Pose2D truth = w.CellPose(t, iy, ix);
    const BevGrid online = CropWindow(map, truth, 120, 160);
    const BevGrid window = CropWindow(map, w.center, 120 + 20, 160 + 20);
    const ScoreVolume v = ScoreVolumeFft(MakeMaskedEmbedding(ToTensor(online), online),
                                         MakeMaskedEmbedding(ToTensor(window), window), w);
    const int best = static_cast<int>(
        std::max_element(v.scores.begin(), v.scores.end()) - v.scores.begin());
    EXPECT_EQ(best, w.Index(t, iy, ix));
  }
}

TEST(MatcherBackwardTest, MatchesFiniteDifferencesOfOracle) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  const SearchWindow w = SmallWindow(3, 5, 3, 6.0);
  for (int trial = 0; trial < 5; ++trial) {
    const MaskedEmbedding online = RandomEmbedding(2, 9, 8, 0.7, rng);
    const MaskedEmbedding map = RandomEmbedding(2, 13, 10, 0.8, rng);
    std::vector<double> g(w.size());
    for (double& v : g) v = n(rng);
    for (auto norm : {ScoreNormalization::kGlobal, ScoreNormalization::kPerOffset}) {
      Matcher m(norm);
      const Matcher::InputGradients grads = m.Backward(online, map, w, g);
      oracle::Field a = oracle::FromEmbedding(online), b = oracle::FromEmbedding(map);
      auto objective = [&] {
        const auto s = oracle::ScoreVolume(a, b, w, norm == ScoreNormalization::kPerOffset);
        double sum = 0.0;
        for (int k = 0; k < w.size(); ++k) sum += g[k] * s[k];
        return sum;
      };
      std::vector<double*> pa, pb;
      for (double& v : a.v) pa.push_back(&v);
      for (double& v : b.v) pb.push_back(&v);
      const auto fa = oracle::FiniteDifference(objective, pa, 1e-5);
      const auto fb = oracle::FiniteDifference(objective, pb, 1e-5);
      EXPECT_LE(oracle::MaxRelativeError({grads.online.values.begin(), grads.online.values.end()}, fa), 1e-3);
      EXPECT_LE(oracle::MaxRelativeError({grads.map_window.values.begin(), grads.map_window.values.end()}, fb), 1e-3);
    }
  }
}

TEST(FftFriendlySizeTest, SmallestEvenSmooth) {
  EXPECT_EQ(FftFriendlySize(1), 2);
  EXPECT_EQ(FftFriendlySize(7), 8);
  EXPECT_EQ(FftFriendlySize(11), 12);
  EXPECT_EQ(FftFriendlySize(620), 630);
  EXPECT_EQ(FftFriendlySize(625), 630);
  for (int n = 1; n < 2000; ++n) {
    const int m = FftFriendlySize(n);
    EXPECT_GE(m, n);
    EXPECT_EQ(m % 2, 0);
    int r = m;
    for (int p : {2, 3, 5, 7}) while (r % p == 0) r /= p;
    EXPECT_EQ(r, 1) << n;
  }
}

}  // namespace
}  // namespace bevloc

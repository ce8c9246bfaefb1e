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

#include "bevloc/grid.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"
#include "oracles.h"

namespace bevloc {
namespace {

// Smooth band-limited pattern with values in [0.1, 0.9].
BevGrid SmoothGrid(int rows, int cols, double resolution = 0.05) {
  BevGrid g(GridGeometry::Centered(rows, cols, resolution));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      g.Set(r, c,
            static_cast<float>(0.5 + 0.2 * std::sin(0.21 * c + 0.4) *
                                         std::cos(0.17 * r) +
                               0.2 * std::sin(0.09 * (r + c))));
    }
  }
  return g;
}

BevGrid RandomSparseGrid(int rows, int cols, double fill, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  BevGrid g(GridGeometry::Centered(rows, cols, 0.05));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (u(rng) < fill) g.Set(r, c, u(rng));
  return g;
}

TEST(BevGridTest, ConstructionIsConsistent) {
  const BevGrid g(GridGeometry::Centered(4, 6, 0.05));
  EXPECT_EQ(g.ObservedCount(), 0);
  EXPECT_TRUE(g.IsConsistent());
  EXPECT_THROW(BevGrid(GridGeometry{0, 3, 0.05, {}}), std::invalid_argument);
  EXPECT_THROW(BevGrid(GridGeometry{3, 3, 0.0, {}}), std::invalid_argument);
}

TEST(GridGeometryTest, CenteredPivotSitsOnCenter) {
  const Pose2D center{3.0, -2.0, 0.3};
  const GridGeometry g = GridGeometry::Centered(7, 10, 0.1, center);
  const Point2D p = g.CellCenter(g.pivot_row(), g.pivot_col());
  EXPECT_NEAR(p.x, center.x, 1e-12);
  EXPECT_NEAR(p.y, center.y, 1e-12);
  const auto rc = g.CellCoordinates(g.CellCenter(2.5, 6.25));
  EXPECT_NEAR(rc[0], 2.5, 1e-12);
  EXPECT_NEAR(rc[1], 6.25, 1e-12);
}

TEST(RasterizeTest, SinglePointAtOrigin) {
  Sweep s;
  s.points.push_back({0.0, 0.0, 0.8f});
  const GridGeometry geom = GridGeometry::Centered(9, 11, 0.05);
  const BevGrid g = Rasterize(std::vector<Sweep>{s}, geom);
  EXPECT_EQ(g.ObservedCount(), 1);
  EXPECT_FLOAT_EQ(g.value(4, 5), 0.8f);
}

TEST(RasterizeTest, CellHoldsMean) {
  Sweep s;
  s.points = {{0.51, 0.0, 0.2f}, {0.49, 0.01, 0.6f}};
  const BevGrid g =
      Rasterize(std::vector<Sweep>{s}, GridGeometry::Centered(9, 41, 0.05));
  EXPECT_EQ(g.ObservedCount(), 1);
  EXPECT_NEAR(g.value(4, 20 + 10), 0.4f, 1e-7);
}

TEST(RasterizeTest, DuplicateSweepAndPermutationInvariance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(-1.0, 1.0);
  std::uniform_real_distribution<float> val(0.f, 1.f);
  Sweep s;
  for (int i = 0; i < 400; ++i) s.points.push_back({pos(rng), pos(rng), val(rng)});
  const GridGeometry geom = GridGeometry::Centered(31, 41, 0.05);
  const BevGrid once = Rasterize(std::vector<Sweep>{s}, geom);
  EXPECT_EQ(Rasterize(std::vector<Sweep>{s, s}, geom), once);
  Sweep shuffled = s;
  std::shuffle(shuffled.points.begin(), shuffled.points.end(), rng);
  EXPECT_EQ(Rasterize(std::vector<Sweep>{shuffled}, geom), once);
  EXPECT_TRUE(once.IsConsistent());
}

TEST(RasterizeTest, AppliesPoseDelta) {
  Sweep s;
  s.points.push_back({0.0, 0.0, 0.5f});
  s.pose_delta = {0.25, -0.1, 0.0};
  const BevGrid g =
      Rasterize(std::vector<Sweep>{s}, GridGeometry::Centered(21, 21, 0.05));
  EXPECT_TRUE(g.observed(10 - 2, 10 + 5));
}

TEST(RasterizeTest, EmptyInputThrows) {
  EXPECT_THROW(Rasterize(std::vector<Sweep>{Sweep{}},
                         GridGeometry::Centered(3, 3, 0.05)),
               std::invalid_argument);
}

TEST(WarpTest, IdentityIsBitwiseEqual) {
  const BevGrid g = RandomSparseGrid(20, 30, 0.4, 5);
  EXPECT_EQ(Warp(g, {}), g);
}

TEST(WarpTest, IntegerTranslationShiftsExactly) {
  const BevGrid g = RandomSparseGrid(20, 30, 0.5, 6);
  const BevGrid w = Warp(g, {3 * 0.05, -2 * 0.05, 0.0});
  for (int r = 0; r < 20; ++r) {
    for (int c = 0; c < 30; ++c) {
      const int sr = r + 2, sc = c - 3;
      if (sr < 0 || sc < 0 || sr >= 20 || sc >= 30) {
        EXPECT_FALSE(w.observed(r, c));
        continue;
      }
      EXPECT_EQ(w.observed(r, c), g.observed(sr, sc));
      EXPECT_EQ(w.value(r, c), g.value(sr, sc));
    }
  }
}

TEST(WarpTest, RotationRoundtripOnSmoothPattern) {
  const BevGrid g = SmoothGrid(80, 100);
  for (double deg : {0.5, 1.0, 5.0, 20.0}) {
    const double th = deg * std::numbers::pi / 180.0;
    const BevGrid back = Warp(Warp(g, {0, 0, th}), {0, 0, -th});
    double max_diff = 0.0;
    for (int r = 20; r < 60; ++r)
      for (int c = 20; c < 80; ++c) {
        ASSERT_TRUE(back.observed(r, c));
        max_diff = std::max(max_diff,
                            static_cast<double>(std::abs(back.value(r, c) - g.value(r, c))));
      }
    EXPECT_LE(max_diff, 0.05) << deg;
  }
}

TEST(WarpTest, MaskedCellsHoldZeroAndCountIsPreserved) {
  const BevGrid g = RandomSparseGrid(60, 60, 0.0, 1);
  BevGrid blob(g.geometry());
  for (int r = 15; r < 45; ++r)
    for (int c = 15; c < 45; ++c) blob.Set(r, c, 0.5f);
  for (const Pose2D& p : {Pose2D{0.03, -0.07, 0.02}, Pose2D{0.1, 0.1, -0.3},
                          Pose2D{0, 0, 1.0}}) {
    const BevGrid w = Warp(blob, p);
    EXPECT_TRUE(w.IsConsistent());
    EXPECT_NEAR(w.ObservedCount(), blob.ObservedCount(),
                0.1 * blob.ObservedCount());
  }
  EXPECT_THROW(Warp(blob, {0, 0, std::numbers::pi}), std::invalid_argument);
}

TEST(BilinearResamplerTest, RotationMatchesOracle) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  const int rows = 23, cols = 31, channels = 2;
  std::vector<float> src(channels * rows * cols);
  std::vector<std::uint8_t> mask(rows * cols);
  for (float& v : src) v = u(rng);
  for (auto& m : mask) m = u(rng) > -0.2f;
  oracle::Field f{channels, rows, cols, {src.begin(), src.end()},
                  {mask.begin(), mask.end()}};
  for (double th : {0.3, -0.0087, 1.2}) {
    const auto rs = BilinearResampler::RigidMotion(rows, cols, 1.0, {0, 0, th});
    std::vector<float> dst(src.size());
    std::vector<std::uint8_t> dmask(mask.size());
    rs.Apply(channels, src, mask, dst, dmask);
    const oracle::Field expected = oracle::Rotate(f, th);
    for (int i = 0; i < rows * cols; ++i) {
      ASSERT_EQ(dmask[i] != 0, expected.mask[i] != 0) << i;
      for (int ch = 0; ch < channels; ++ch) {
        EXPECT_NEAR(dst[ch * rows * cols + i], expected.v[ch * rows * cols + i],
                    1e-5);
      }
    }
  }
}

TEST(BilinearResamplerTest, BackwardIsAdjointOfApply) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n;
  const int rows = 17, cols = 19;
  std::vector<std::uint8_t> mask(rows * cols);
  for (auto& m : mask) m = n(rng) > -0.5;
  const auto rs = BilinearResampler::RigidMotion(rows, cols, 0.05,
                                                 {0.013, -0.021, 0.15});
  std::vector<float> x(rows * cols), g(rows * cols), y(rows * cols),
      gx(rows * cols, 0.f);
  for (float& v : x) v = static_cast<float>(n(rng));
  for (float& v : g) v = static_cast<float>(n(rng));
  std::vector<std::uint8_t> ymask(rows * cols);
  rs.Apply(1, x, mask, y, ymask);
  rs.Backward(1, g, mask, ymask, gx);
  double lhs = 0.0, rhs = 0.0;
  for (int i = 0; i < rows * cols; ++i) {
    lhs += static_cast<double>(y[i]) * g[i];
    rhs += static_cast<double>(x[i]) * gx[i];
  }
  EXPECT_NEAR(lhs, rhs, 1e-4 * std::max(1.0, std::abs(lhs)));
}

TEST(CropWindowTest, InteriorZeroHeadingIsSubArray) {
  const BevGrid map = RandomSparseGrid(60, 80, 0.7, 12);
  const GridGeometry& mg = map.geometry();
  const Point2D center = mg.CellCenter(25, 37);
  const BevGrid crop = CropWindow(map, {center.x, center.y, 0.0}, 11, 14);
  for (int r = 0; r < 11; ++r)
    for (int c = 0; c < 14; ++c) {
      EXPECT_EQ(crop.observed(r, c), map.observed(25 - 5 + r, 37 - 7 + c));
      EXPECT_EQ(crop.value(r, c), map.value(25 - 5 + r, 37 - 7 + c));
    }
}

TEST(CropWindowTest, CornerWindowIsThreeQuartersMasked) {
  const BevGrid map = SmoothGrid(60, 80);
  const Point2D corner = map.geometry().CellCenter(0, 0);
  const BevGrid crop = CropWindow(map, {corner.x, corner.y, 0.0}, 40, 40);
  const double fraction = 1.0 - crop.ObservedCount() / 1600.0;
  EXPECT_NEAR(fraction, 0.75, 0.03);
  EXPECT_TRUE(crop.IsConsistent());
}

TEST(CropWindowTest, RecropIsIdenticalAndOutsideThrows) {
  const BevGrid map = SmoothGrid(60, 80);
  const Pose2D center{1.3, 0.2, 0.2};
  EXPECT_EQ(CropWindow(map, center, 21, 25), CropWindow(map, center, 21, 25));
  EXPECT_THROW(CropWindow(map, {100.0, 100.0, 0.0}, 5, 5), std::invalid_argument);
}

TEST(BevGridIoTest, Roundtrip) {
  BevGrid g = RandomSparseGrid(7, 9, 0.5, 4);
  std::stringstream ss;
  WriteBevGrid(g, ss);
  const BevGrid back = ReadBevGrid(ss);
  ASSERT_EQ(back.rows(), 7);
  ASSERT_EQ(back.cols(), 9);
  EXPECT_FLOAT_EQ(static_cast<float>(back.resolution()), 0.05f);
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 9; ++c) {
      EXPECT_EQ(back.observed(r, c), g.observed(r, c));
      EXPECT_EQ(back.value(r, c), g.value(r, c));
    }
}

TEST(BevGridIoTest, RejectsBadMagicAndTruncation) {
  std::stringstream bad("XXXX0000000000000000");
  EXPECT_THROW(ReadBevGrid(bad), std::runtime_error);
  std::stringstream ss;
  WriteBevGrid(SmoothGrid(5, 5), ss);
  std::string bytes = ss.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(ReadBevGrid(truncated), std::runtime_error);
}

}  // namespace
}  // namespace bevloc

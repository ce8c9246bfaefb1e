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

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "bevloc/binary_io.h"

namespace bevloc {
namespace {

// Fixed-point scale for rasterization sums; integer accumulation keeps the
// per-cell mean independent of point order.
constexpr double kFixedPointScale = 4294967296.0;  // 2^32

// std::floor for the coordinate magnitudes that occur here, without a libm
// call in the per-cell loops.
[[gnu::always_inline]] inline double FastFloor(double v) {
  const auto i = static_cast<std::int64_t>(v);
  return static_cast<double>(i - (v < static_cast<double>(i)));
}

// Coordinates this close to an integer are treated as exactly on the cell
// center, so aligned copies and integer shifts are bit-exact.
[[gnu::always_inline]] inline double Snap(double v) {
  const double r = FastFloor(v + 0.5);
  return std::abs(v - r) < 1e-9 ? r : v;
}

}  // namespace

GridGeometry GridGeometry::Centered(int rows, int cols, double resolution,
                                    const Pose2D& center) {
  GridGeometry g;
  g.rows = rows;
  g.cols = cols;
  g.resolution = resolution;
  g.origin = Compose(center, {-(cols / 2) * resolution,
                              -(rows / 2) * resolution, 0.0});
  return g;
}

Point2D GridGeometry::CellCenter(double row, double col) const {
  return TransformPoint(origin, {col * resolution, row * resolution});
}

std::array<double, 2> GridGeometry::CellCoordinates(const Point2D& world) const {
  const Point2D local = InverseTransformPoint(origin, world);
  return {local.y / resolution, local.x / resolution};
}

BevGrid::BevGrid(const GridGeometry& geometry) : geometry_(geometry) {
  if (geometry.rows <= 0 || geometry.cols <= 0) {
    throw std::invalid_argument("BevGrid: dimensions must be positive");
  }
  if (!(geometry.resolution > 0.0) || !std::isfinite(geometry.resolution)) {
    throw std::invalid_argument("BevGrid: resolution must be positive");
  }
  data_.assign(geometry.size(), 0.f);
  mask_.assign(geometry.size(), 0);
}

void BevGrid::Set(int row, int col, float value) {
  data_[Index(row, col)] = value;
  mask_[Index(row, col)] = 1;
}

void BevGrid::Clear(int row, int col) {
  data_[Index(row, col)] = 0.f;
  mask_[Index(row, col)] = 0;
}

int BevGrid::ObservedCount() const {
  int n = 0;
  for (std::uint8_t m : mask_) n += m != 0;
  return n;
}

bool BevGrid::IsConsistent() const {
  if (data_.size() != mask_.size() ||
      static_cast<int>(data_.size()) != geometry_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) return false;
    if (mask_[i] == 0 && data_[i] != 0.f) return false;
  }
  return true;
}

bool operator==(const BevGrid& a, const BevGrid& b) {
  const GridGeometry& ga = a.geometry_;
  const GridGeometry& gb = b.geometry_;
  return ga.rows == gb.rows && ga.cols == gb.cols &&
         ga.resolution == gb.resolution && ga.origin.x == gb.origin.x &&
         ga.origin.y == gb.origin.y && ga.origin.theta == gb.origin.theta &&
         a.data_ == b.data_ && a.mask_ == b.mask_;
}

BevGrid Rasterize(std::span<const Sweep> sweeps, const GridGeometry& geometry) {
  std::size_t total_points = 0;
  for (const Sweep& s : sweeps) total_points += s.points.size();
  if (total_points == 0) {
    throw std::invalid_argument("Rasterize: no points in any sweep");
  }

  std::vector<std::int64_t> sums(geometry.size(), 0);
  std::vector<std::int32_t> counts(geometry.size(), 0);
  for (const Sweep& sweep : sweeps) {
    for (const SweepPoint& p : sweep.points) {
      const Point2D in_newest = TransformPoint(sweep.pose_delta, {p.x, p.y});
      const auto [row_f, col_f] = geometry.CellCoordinates(in_newest);
      const double row = std::floor(row_f + 0.5);
      const double col = std::floor(col_f + 0.5);
      if (row < 0 || col < 0 || row >= geometry.rows || col >= geometry.cols) {
        continue;
      }
      const int idx = static_cast<int>(row) * geometry.cols + static_cast<int>(col);
      sums[idx] += std::llround(static_cast<double>(p.intensity) *
                                kFixedPointScale);
      ++counts[idx];
    }
  }

  BevGrid grid(geometry);
  for (int r = 0; r < geometry.rows; ++r) {
    for (int c = 0; c < geometry.cols; ++c) {
      const int idx = r * geometry.cols + c;
      if (counts[idx] == 0) continue;
      const double mean =
          static_cast<double>(sums[idx]) / kFixedPointScale / counts[idx];
      grid.Set(r, c, static_cast<float>(mean));
    }
  }
  return grid;
}

BilinearResampler::BilinearResampler(int src_rows, int src_cols, int dst_rows,
                                     int dst_cols, const AffineMap& map)
    : src_rows_(src_rows),
      src_cols_(src_cols),
      dst_rows_(dst_rows),
      dst_cols_(dst_cols),
      map_(map) {
  if (src_rows <= 0 || src_cols <= 0 || dst_rows <= 0 || dst_cols <= 0) {
    throw std::invalid_argument("BilinearResampler: empty raster");
  }
}

BilinearResampler BilinearResampler::RigidMotion(int rows, int cols,
                                                 double resolution,
                                                 const Pose2D& pose) {
  const double pr = rows / 2;
  const double pc = cols / 2;
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  // Destination cell (0, 0) pulled back through the motion.
  const Point2D src = InverseTransformPoint(pose, {-pc * resolution, -pr * resolution});
  AffineMap map;
  map.origin = {src.y / resolution + pr, src.x / resolution + pc};
  map.d_row = {c, s};
  map.d_col = {-s, c};
  return BilinearResampler(rows, cols, rows, cols, map);
}

BilinearResampler BilinearResampler::Between(const GridGeometry& src,
                                             const GridGeometry& dst) {
  const double phi = WrapAngle(dst.origin.theta - src.origin.theta);
  const double k = dst.resolution / src.resolution;
  const double c = std::cos(phi) * k, s = std::sin(phi) * k;
  AffineMap map;
  map.origin = src.CellCoordinates({dst.origin.x, dst.origin.y});
  map.d_row = {c, -s};
  map.d_col = {s, c};
  return BilinearResampler(src.rows, src.cols, dst.rows, dst.cols, map);
}

std::array<double, 2> BilinearResampler::SourceCoordinates(int row,
                                                           int col) const {
  return {Snap(map_.origin[0] + row * map_.d_row[0] + col * map_.d_col[0]),
          Snap(map_.origin[1] + row * map_.d_row[1] + col * map_.d_col[1])};
}

// Out-of-source taps get index 0 and weight 0 so callers never branch on
// validity.
[[gnu::always_inline]] inline BilinearResampler::Taps
BilinearResampler::TapsAt(int row, int col) const {
  const double sr =
      Snap(map_.origin[0] + row * map_.d_row[0] + col * map_.d_col[0]);
  const double sc =
      Snap(map_.origin[1] + row * map_.d_row[1] + col * map_.d_col[1]);
  const double r0 = FastFloor(sr);
  const double c0 = FastFloor(sc);
  const float fr = static_cast<float>(sr - r0);
  const float fc = static_cast<float>(sc - c0);
  Taps t;
  if (r0 >= 0 && c0 >= 0 && r0 + 1 < src_rows_ && c0 + 1 < src_cols_) {
    const auto base = static_cast<std::int32_t>(r0) * src_cols_ +
                      static_cast<std::int32_t>(c0);
    t.index = {base, base + 1, base + src_cols_, base + src_cols_ + 1};
    t.weight = {(1.f - fr) * (1.f - fc), (1.f - fr) * fc, fr * (1.f - fc),
                fr * fc};
    return t;
  }
  return BorderTaps(r0, c0, fr, fc);
}

BilinearResampler::Taps BilinearResampler::BorderTaps(double r0, double c0,
                                                      float fr,
                                                      float fc) const {
  Taps t;
  const double rows_at[2] = {r0, r0 + 1};
  const double cols_at[2] = {c0, c0 + 1};
  const float wr[2] = {1.f - fr, fr};
  const float wc[2] = {1.f - fc, fc};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const int k = 2 * i + j;
      const float w = wr[i] * wc[j];
      const bool inside = rows_at[i] >= 0 && rows_at[i] < src_rows_ &&
                          cols_at[j] >= 0 && cols_at[j] < src_cols_;
      if (inside && w > 0.f) {
        t.index[k] = static_cast<std::int32_t>(rows_at[i]) * src_cols_ +
                     static_cast<std::int32_t>(cols_at[j]);
        t.weight[k] = w;
      } else {
        t.index[k] = 0;
        t.weight[k] = 0.f;
      }
    }
  }
  return t;
}

bool BilinearResampler::TouchesSource() const {
  for (int r = 0; r < dst_rows_; ++r) {
    for (int c = 0; c < dst_cols_; ++c) {
      const Taps t = TapsAt(r, c);
      for (int k = 0; k < 4; ++k) {
        if (t.weight[k] > 0.f) return true;
      }
    }
  }
  return false;
}

void BilinearResampler::ApplyMask(std::span<const std::uint8_t> src,
                                  std::span<std::uint8_t> dst) const {
  for (int r = 0; r < dst_rows_; ++r) {
    for (int c = 0; c < dst_cols_; ++c) {
      const Taps t = TapsAt(r, c);
      float m = 0.f;
      for (int k = 0; k < 4; ++k) m += t.weight[k] * (src[t.index[k]] != 0);
      dst[r * dst_cols_ + c] = m >= 0.5f ? 1 : 0;
    }
  }
}

void BilinearResampler::Apply(int channels, std::span<const float> src,
                              std::span<const std::uint8_t> src_mask,
                              std::span<float> dst,
                              std::span<std::uint8_t> dst_mask) const {
  const std::size_t src_plane = src_size();
  const std::size_t dst_plane = dst_size();
  const std::uint8_t* in_mask = src_mask.data();
  std::uint8_t* out_mask = dst_mask.data();
  for (int r = 0; r < dst_rows_; ++r) {
    for (int c = 0; c < dst_cols_; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * dst_cols_ + c;
      Taps t = TapsAt(r, c);
      float w = 0.f;
      for (int k = 0; k < 4; ++k) {
        t.weight[k] *= static_cast<float>(in_mask[t.index[k]] != 0);
        w += t.weight[k];
      }
      const bool on = w >= 0.5f;
      out_mask[i] = on;
      const float inv = on ? 1.f / w : 0.f;
      for (int ch = 0; ch < channels; ++ch) {
        const float* plane = src.data() + ch * src_plane;
        float v = 0.f;
        for (int k = 0; k < 4; ++k) v += t.weight[k] * plane[t.index[k]];
        dst[ch * dst_plane + i] = v * inv;
      }
    }
  }
}

void BilinearResampler::Backward(int channels, std::span<const float> dst_grad,
                                 std::span<const std::uint8_t> src_mask,
                                 std::span<const std::uint8_t> dst_mask,
                                 std::span<float> src_grad) const {
  const std::size_t src_plane = src_size();
  const std::size_t dst_plane = dst_size();
  for (int r = 0; r < dst_rows_; ++r) {
    for (int c = 0; c < dst_cols_; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * dst_cols_ + c;
      if (dst_mask[i] == 0) continue;
      Taps t = TapsAt(r, c);
      float w = 0.f;
      for (int k = 0; k < 4; ++k) {
        t.weight[k] *= static_cast<float>(src_mask[t.index[k]] != 0);
        w += t.weight[k];
      }
      for (int ch = 0; ch < channels; ++ch) {
        const float g = dst_grad[ch * dst_plane + i] / w;
        float* plane = src_grad.data() + ch * src_plane;
        for (int k = 0; k < 4; ++k) plane[t.index[k]] += t.weight[k] * g;
      }
    }
  }
}

namespace {

BevGrid Resample(const BevGrid& src, const GridGeometry& dst_geometry,
                 const BilinearResampler& resampler) {
  BevGrid out(dst_geometry);
  std::vector<std::uint8_t> mask(dst_geometry.size());
  std::vector<float> data(dst_geometry.size());
  resampler.Apply(1, src.data(), src.mask(), data, mask);
  for (int r = 0; r < dst_geometry.rows; ++r) {
    for (int c = 0; c < dst_geometry.cols; ++c) {
      const int idx = r * dst_geometry.cols + c;
      if (mask[idx]) out.Set(r, c, data[idx]);
    }
  }
  return out;
}

}  // namespace

BevGrid Warp(const BevGrid& grid, const Pose2D& pose) {
  if (!(std::abs(pose.theta) < std::numbers::pi)) {
    throw std::invalid_argument("Warp: |theta| must be below pi");
  }
  const BilinearResampler resampler = BilinearResampler::RigidMotion(
      grid.rows(), grid.cols(), grid.resolution(), pose);
  return Resample(grid, grid.geometry(), resampler);
}

BevGrid CropWindow(const BevGrid& map, const Pose2D& center, int rows,
                   int cols) {
  const GridGeometry window =
      GridGeometry::Centered(rows, cols, map.resolution(), center);
  const BilinearResampler resampler =
      BilinearResampler::Between(map.geometry(), window);
  if (!resampler.TouchesSource()) {
    throw std::invalid_argument("CropWindow: window lies outside the map");
  }
  return Resample(map, window, resampler);
}

void WriteBevGrid(const BevGrid& grid, std::ostream& out) {
  out.write("BVG1", 4);
  io::WriteLe<std::uint32_t>(out, 1);
  io::WriteLe<std::uint64_t>(out, 0);
  io::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(grid.rows()));
  io::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(grid.cols()));
  io::WriteLe<float>(out, static_cast<float>(grid.resolution()));
  io::WriteLe<double>(out, grid.origin().x);
  io::WriteLe<double>(out, grid.origin().y);
  io::WriteLe<double>(out, grid.origin().theta);
  for (float v : grid.data()) io::WriteLe<float>(out, v);
  for (std::uint8_t m : grid.mask()) io::WriteLe<std::uint8_t>(out, m ? 1 : 0);
  if (!out) throw std::runtime_error("WriteBevGrid: write failed");
}

BevGrid ReadBevGrid(std::istream& in) {
  io::ExpectMagic(in, "BVG1", "BVG1 map");
  const auto version = io::ReadLe<std::uint32_t>(in);
  if (version != 1) {
    throw std::runtime_error("BVG1 map: unsupported version " +
                             std::to_string(version));
  }
  io::ReadLe<std::uint64_t>(in);
  GridGeometry g;
  g.rows = static_cast<int>(io::ReadLe<std::uint32_t>(in));
  g.cols = static_cast<int>(io::ReadLe<std::uint32_t>(in));
  g.resolution = io::ReadLe<float>(in);
  g.origin.x = io::ReadLe<double>(in);
  g.origin.y = io::ReadLe<double>(in);
  g.origin.theta = io::ReadLe<double>(in);
  BevGrid grid(g);
  std::vector<float> data(g.size());
  for (float& v : data) v = io::ReadLe<float>(in);
  for (int i = 0; i < g.size(); ++i) {
    const auto m = io::ReadLe<std::uint8_t>(in);
    if (m != 0) grid.Set(i / g.cols, i % g.cols, data[i]);
  }
  return grid;
}

void SaveBevGrid(const BevGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  WriteBevGrid(grid, out);
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path);
}

BevGrid LoadBevGrid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return ReadBevGrid(in);
}

}  // namespace bevloc

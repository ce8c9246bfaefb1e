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

#ifndef BEVLOC_GRID_H_
#define BEVLOC_GRID_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bevloc/pose.h"

namespace bevloc {

// Raster layout used everywhere: row index runs along the lateral (y) axis,
// column index along the longitudinal (x) axis. Cell (r, c) has its center at
// Compose(origin, {c * resolution, r * resolution, 0}).
struct GridGeometry {
  int rows = 0;
  int cols = 0;
  double resolution = 0.05;
  Pose2D origin;

  // Geometry whose center cell (rows / 2, cols / 2) sits on `center`.
  static GridGeometry Centered(int rows, int cols, double resolution,
                               const Pose2D& center = {});

  int size() const { return rows * cols; }
  int pivot_row() const { return rows / 2; }
  int pivot_col() const { return cols / 2; }
  Point2D CellCenter(double row, double col) const;
  // Continuous (row, col) of a world point.
  std::array<double, 2> CellCoordinates(const Point2D& world) const;
};

// Bird's-eye-view intensity raster with an observation mask. Unobserved cells
// always hold intensity 0.
class BevGrid {
 public:
  BevGrid() = default;
  explicit BevGrid(const GridGeometry& geometry);

  const GridGeometry& geometry() const { return geometry_; }
  int rows() const { return geometry_.rows; }
  int cols() const { return geometry_.cols; }
  double resolution() const { return geometry_.resolution; }
  const Pose2D& origin() const { return geometry_.origin; }
  bool empty() const { return data_.empty(); }

  float value(int row, int col) const { return data_[Index(row, col)]; }
  bool observed(int row, int col) const { return mask_[Index(row, col)] != 0; }

  void Set(int row, int col, float value);
  void Clear(int row, int col);

  std::span<const float> data() const { return data_; }
  std::span<const std::uint8_t> mask() const { return mask_; }
  int ObservedCount() const;

  // Checks the mask/data agreement and value range; used by tests and loaders.
  bool IsConsistent() const;

  friend bool operator==(const BevGrid& a, const BevGrid& b);

 private:
  int Index(int row, int col) const { return row * geometry_.cols + col; }

  GridGeometry geometry_;
  std::vector<float> data_;
  std::vector<std::uint8_t> mask_;
};

struct SweepPoint {
  double x = 0.0;
  double y = 0.0;
  float intensity = 0.f;
};

// One LiDAR sweep in the vehicle frame at capture time. pose_delta is the
// pose of that frame expressed in the newest sweep's frame.
struct Sweep {
  std::vector<SweepPoint> points;
  Pose2D pose_delta;
};

// Ego-motion compensates every sweep into the newest frame and mean-bins the
// points into a raster with the given geometry (origin relative to the newest
// vehicle frame). Throws std::invalid_argument if there are no points at all.
BevGrid Rasterize(std::span<const Sweep> sweeps, const GridGeometry& geometry);

// Bilinear resampling from a source raster to a destination raster under an
// affine cell mapping. Out-of-bounds taps carry zero weight. The destination
// mask is the interpolated source mask thresholded at 0.5; data is the
// weighted mean of the observed taps (plain bilinear interpolation on fully
// observed sources) and zero outside the destination mask. Backward() is the
// exact adjoint of the data path for fixed masks.
class BilinearResampler {
 public:
  // Source (row, col) of destination cell (r, c) is
  // origin + r * d_row + c * d_col.
  struct AffineMap {
    std::array<double, 2> origin{0.0, 0.0};
    std::array<double, 2> d_row{1.0, 0.0};
    std::array<double, 2> d_col{0.0, 1.0};
  };

  BilinearResampler(int src_rows, int src_cols, int dst_rows, int dst_cols,
                    const AffineMap& map);

  // Rigid motion `pose` (meters, about the pivot cell rows/2, cols/2) of a
  // rows x cols raster.
  static BilinearResampler RigidMotion(int rows, int cols, double resolution,
                                       const Pose2D& pose);
  // Samples `src` at the cell centers of `dst`.
  static BilinearResampler Between(const GridGeometry& src,
                                   const GridGeometry& dst);

  int src_size() const { return src_rows_ * src_cols_; }
  int dst_size() const { return dst_rows_ * dst_cols_; }
  int dst_rows() const { return dst_rows_; }
  int dst_cols() const { return dst_cols_; }
  std::array<double, 2> SourceCoordinates(int row, int col) const;

  // True if at least one destination cell samples inside the source.
  bool TouchesSource() const;

  void ApplyMask(std::span<const std::uint8_t> src,
                 std::span<std::uint8_t> dst) const;
  // Resamples the mask and `channels` stacked planes in one pass.
  void Apply(int channels, std::span<const float> src,
             std::span<const std::uint8_t> src_mask, std::span<float> dst,
             std::span<std::uint8_t> dst_mask) const;
  // Accumulates the adjoint of the data path of Apply into src_grad.
  void Backward(int channels, std::span<const float> dst_grad,
                std::span<const std::uint8_t> src_mask,
                std::span<const std::uint8_t> dst_mask,
                std::span<float> src_grad) const;

 private:
  struct Taps {
    std::array<std::int32_t, 4> index;  // taps outside the source have weight 0
    std::array<float, 4> weight;
  };
  Taps TapsAt(int row, int col) const;
  Taps BorderTaps(double r0, double c0, float fr, float fc) const;

  int src_rows_, src_cols_, dst_rows_, dst_cols_;
  AffineMap map_;
};

// Resamples the grid under a rigid motion of its content about the pivot cell
// (rows/2, cols/2). `pose` is in meters/radians. Requires |theta| < pi.
BevGrid Warp(const BevGrid& grid, const Pose2D& pose);

// Cuts a rows x cols window out of `map` whose pivot cell lies on `center` and
// whose axes follow center.theta. Cells outside the stored map are unobserved.
// Throws std::invalid_argument if the window does not overlap the map at all.
BevGrid CropWindow(const BevGrid& map, const Pose2D& center, int rows,
                   int cols);

// "BVG1" map files. Layout (all little-endian):
//   0..3   magic "BVG1"
//   4..7   u32 format version (1)
//   8..15  reserved, zero
//   16     u32 rows, u32 cols, f32 resolution, f64 origin x, y, theta
//   then   rows*cols f32 intensities (row-major), rows*cols u8 mask (0/1)
void WriteBevGrid(const BevGrid& grid, std::ostream& out);
BevGrid ReadBevGrid(std::istream& in);
void SaveBevGrid(const BevGrid& grid, const std::string& path);
BevGrid LoadBevGrid(const std::string& path);

}  // namespace bevloc

#endif  // BEVLOC_GRID_H_

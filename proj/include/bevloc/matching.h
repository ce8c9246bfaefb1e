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

#ifndef BEVLOC_MATCHING_H_
#define BEVLOC_MATCHING_H_

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <tuple>
#include <vector>

#include "bevloc/grid.h"
#include "bevloc/pose.h"
#include "bevloc/tensor.h"

namespace bevloc {

// Discretized pose search space around a dead-reckoning pose. Cell
// (t, iy, ix) is the hypothesis Compose(center, {(ix - hx) * res,
// (iy - hy) * res, theta_t}).
struct SearchWindow {
  int x_cells = 21;
  int y_cells = 21;
  int theta_cells = 5;
  double resolution = 0.05;
  double theta_step = 0.5 * 3.14159265358979323846 / 180.0;
  Pose2D center;

  // Window spanning x_range x y_range meters and theta_range radians with
  // theta_cells rotations (theta_step = theta_range / theta_cells).
  static SearchWindow FromRanges(double x_range, double y_range,
                                 double theta_range, int theta_cells,
                                 double resolution, const Pose2D& center = {});

  int half_x() const { return x_cells / 2; }
  int half_y() const { return y_cells / 2; }
  int half_theta() const { return theta_cells / 2; }
  int size() const { return theta_cells * y_cells * x_cells; }
  int Index(int t, int iy, int ix) const {
    return (t * y_cells + iy) * x_cells + ix;
  }
  // Offset of a cell relative to the center, in the center's frame.
  Pose2D CellOffset(int t, int iy, int ix) const;
  Pose2D CellPose(int t, int iy, int ix) const;
  // Throws std::invalid_argument unless the cell counts are odd and positive.
  void Validate() const;
};

// n_theta equally spaced angles, symmetric about zero.
std::vector<double> RotationCandidates(const SearchWindow& window);

// Embedding plus the observation mask of the raster it came from.
struct MaskedEmbedding {
  Tensor3 values;
  std::vector<std::uint8_t> mask;

  int rows() const { return values.rows; }
  int cols() const { return values.cols; }
  int channels() const { return values.channels; }
  int ObservedCount() const;
  // values * mask.
  Tensor3 Masked() const;
};

MaskedEmbedding MakeMaskedEmbedding(Tensor3 values, const BevGrid& source);

enum class ScoreNormalization : std::uint8_t {
  // Divide by the product of the global observed-cell counts.
  kGlobal = 0,
  // Divide by the number of cells observed in both images at each offset.
  kPerOffset = 1,
};

struct ScoreVolume {
  SearchWindow window;
  std::vector<float> scores;  // theta x y x x
  // Multiplying a score by cell_scale gives the mean masked product per
  // observed online cell (the map count for kGlobal, 1 for kPerOffset).
  double cell_scale = 1.0;

  float at(int t, int iy, int ix) const {
    return scores[window.Index(t, iy, ix)];
  }
  int size() const { return static_cast<int>(scores.size()); }
};

// <a * [mask_a], b * [mask_b]> / (|mask_a|_0 |mask_b|_0); zero when either
// mask is empty. Throws std::invalid_argument on shape mismatch.
double MaskedScore(const Tensor3& a, std::span<const std::uint8_t> mask_a,
                   const Tensor3& b, std::span<const std::uint8_t> mask_b);

// Online embedding rotated by one candidate angle about its pivot cell.
struct RotatedEmbedding {
  Tensor3 values;  // already multiplied by mask
  std::vector<std::uint8_t> mask;
  int count = 0;
};

// Computes score volumes over a search window. Caches rotation resamplers and
// FFT plans between calls, so one instance should be reused across frames.
// Not thread-safe; use one instance per thread.
class Matcher {
 public:
  explicit Matcher(ScoreNormalization normalization = ScoreNormalization::kGlobal);
  ~Matcher();
  Matcher(const Matcher&) = delete;
  Matcher& operator=(const Matcher&) = delete;

  // Brute-force reference: direct sums with f64 accumulators.
  ScoreVolume Spatial(const MaskedEmbedding& online,
                      const MaskedEmbedding& map_window,
                      const SearchWindow& window);
  // Same semantics via real FFT cross-correlation.
  ScoreVolume Fft(const MaskedEmbedding& online,
                  const MaskedEmbedding& map_window,
                  const SearchWindow& window);

  struct InputGradients {
    Tensor3 online;
    Tensor3 map_window;
  };
  // Gradients of sum(score_grad * scores) with respect to the unmasked
  // online and map embeddings. Masks and rotation angles are constants.
  InputGradients Backward(const MaskedEmbedding& online,
                          const MaskedEmbedding& map_window,
                          const SearchWindow& window,
                          std::span<const double> score_grad);

  RotatedEmbedding Rotate(const MaskedEmbedding& online, double theta);

  ScoreNormalization normalization() const { return normalization_; }

 private:
  struct FftPlan;
  const BilinearResampler& RotationResampler(int rows, int cols, double theta);
  FftPlan& PlanFor(int rows, int cols);
  // Row/col offset of the map cell under online cell (0,0) at window cell
  // (0,0). Throws if the map window is too small.
  std::pair<int, int> BaseOffset(const MaskedEmbedding& online,
                                 const MaskedEmbedding& map_window,
                                 const SearchWindow& window) const;

  ScoreNormalization normalization_;
  std::map<std::tuple<int, int, double>, BilinearResampler> rotations_;
  std::map<std::pair<int, int>, std::unique_ptr<FftPlan>> plans_;
};

ScoreVolume ScoreVolumeSpatial(const MaskedEmbedding& online,
                               const MaskedEmbedding& map_window,
                               const SearchWindow& window,
                               ScoreNormalization normalization =
                                   ScoreNormalization::kGlobal);
ScoreVolume ScoreVolumeFft(const MaskedEmbedding& online,
                           const MaskedEmbedding& map_window,
                           const SearchWindow& window,
                           ScoreNormalization normalization =
                               ScoreNormalization::kGlobal);

// Smallest even n' >= n whose prime factors are all in {2, 3, 5, 7}.
int FftFriendlySize(int n);

}  // namespace bevloc

#endif  // BEVLOC_MATCHING_H_

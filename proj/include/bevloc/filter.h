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

#ifndef BEVLOC_FILTER_H_
#define BEVLOC_FILTER_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bevloc/matching.h"
#include "bevloc/pose.h"

namespace bevloc {

// Discrete posterior over the cells of a search window, theta x y x x.
struct BeliefGrid {
  SearchWindow window;
  std::vector<double> probs;

  static BeliefGrid Uniform(const SearchWindow& window);
  double at(int t, int iy, int ix) const {
    return probs[window.Index(t, iy, ix)];
  }
  double Sum() const;
  // All entries finite, non-negative, summing to 1 within tol.
  bool IsNormalized(double tol = 1e-6) const;
};

enum class MotionMode : std::uint8_t {
  // rho(z) = exp(-z^T Sigma^-1 z)
  kGaussian = 0,
  // Same kernel, but zero whenever a residual component leaves the search
  // window's half-extent.
  kTruncatedQuadratic = 1,
};

// Motion kernel over the residual z = x (-) (x_prev (+) odometry). Sigma is
// expressed in window units: cells for x and y, theta steps for theta. With
// the default 5 cm / 0.5 degree window, diag(3, 3, 3) corresponds to
// sqrt(3) * (5 cm, 5 cm, 0.5 deg) per step.
struct MotionModel {
  std::array<double, 9> sigma{3.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 3.0};
  MotionMode mode = MotionMode::kGaussian;

  static MotionModel Diagonal(double sx, double sy, double st,
                              MotionMode mode = MotionMode::kGaussian);
  // Throws std::invalid_argument unless Sigma is symmetric positive definite.
  std::array<double, 9> Inverse() const;
  // z in window units.
  double Energy(const std::array<double, 3>& z) const;
};

struct GpsObservation {
  double x = 0.0;  // map frame, meters
  double y = 0.0;
  double sigma = 10.0;
};

// Residual of `pose` relative to `predicted`, in window units.
std::array<double, 3> ResidualInWindowUnits(const Pose2D& pose,
                                            const Pose2D& predicted,
                                            const SearchWindow& window);

// Initial belief: rho of each cell's offset from the window center.
BeliefGrid GaussianBelief(const SearchWindow& window, const MotionModel& model);

// Bel(x) = eta * sum_prev rho(x (-) (x_prev (+) odometry)) Bel_prev(x_prev),
// with the kernel normalized over the integer lattice so that mass leaving the
// new window is dropped before renormalization. If retained_mass is given it
// receives the pre-normalization total. Throws std::runtime_error if no mass
// reaches the new window.
BeliefGrid Predict(const BeliefGrid& prev, const Pose2D& odometry,
                   const MotionModel& model, const SearchWindow& new_window,
                   double* retained_mass = nullptr);

// -((gx - x)^2 + (gy - y)^2) / sigma^2 per (iy, ix) cell.
std::vector<double> GpsLogLikelihood(const SearchWindow& window,
                                     const GpsObservation& obs);

enum class LidarLikelihoodMode : std::uint8_t {
  // Softmax of score * cell_scale / temperature over the volume.
  kSoftmax = 0,
  // Proportional to max(score, 0).
  kProportional = 1,
};

struct LidarLikelihood {
  LidarLikelihoodMode mode = LidarLikelihoodMode::kSoftmax;
  double temperature = 1.0;
};

// Log-likelihood per volume cell (may contain -inf in proportional mode).
std::vector<double> LidarLogLikelihood(const ScoreVolume& volume,
                                       const LidarLikelihood& likelihood);

// Posterior = eta * pred * exp(sum of log terms). `gps_loglik`, if given, has
// y_cells * x_cells entries broadcast over theta. Throws std::runtime_error
// when the posterior has no mass.
BeliefGrid Update(const BeliefGrid& pred, std::span<const double> lidar_loglik,
                  std::span<const double> gps_loglik = {});

// Power-weighted mean of cell poses, sum Bel^alpha x / sum Bel^alpha, taken
// over window offsets and composed onto the window center. Requires
// alpha >= 1 and a theta extent well below pi.
Pose2D SoftArgmax(const BeliefGrid& belief, double alpha);

// Index of the largest value; ties go to the smallest (|t|, |y|, |x|) offset
// from the window center and then the lowest index.
int HardArgmaxIndex(const SearchWindow& window, std::span<const double> values,
                    std::span<const double> extra = {});
Pose2D HardArgmax(const SearchWindow& window, std::span<const double> values,
                  std::span<const double> extra = {});

}  // namespace bevloc

#endif  // BEVLOC_FILTER_H_

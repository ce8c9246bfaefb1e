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

#ifndef BEVLOC_SIM_H_
#define BEVLOC_SIM_H_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "bevloc/filter.h"
#include "bevloc/grid.h"
#include "bevloc/pose.h"

namespace bevloc {

// Procedural intensity world: asphalt base, low-frequency shading, fine
// texture, dashed lane markings along x and bright blobs. Setting every
// amplitude and density to zero yields a constant map.
struct WorldConfig {
  double length = 560.0;  // meters along x
  double width = 40.0;    // meters along y
  double resolution = 0.05;
  double base_intensity = 0.3;
  double shading_amplitude = 0.15;   // low-frequency component
  double shading_scale = 12.0;       // meters
  double texture_amplitude = 0.15;   // fine component
  double texture_scale = 0.4;        // meters
  double lane_spacing = 3.5;         // 0 disables lane markings
  double lane_marking_width = 0.15;
  double dash_length = 3.0;
  double dash_gap = 6.0;
  double marking_intensity = 0.9;
  double blob_density = 0.05;        // blobs per square meter
  double blob_min_radius = 0.15;
  double blob_max_radius = 0.6;
  std::uint64_t seed = 1;
};

// Deterministic under config.seed; full mask, values in [0, 1].
BevGrid GenerateMap(const WorldConfig& config);

struct TrajectorySpec {
  int steps = 500;
  double step_length = 1.0;       // meters per step
  double start_x = 20.0;
  double lateral_amplitude = 1.5;
  double lateral_period = 60.0;   // meters
  double lane_change_every = 150.0;  // meters, 0 disables
  double lane_change_offset = 1.75;
  double lane_change_length = 30.0;
};

// Ground-truth poses for steps 0..steps along the map's center line.
std::vector<Pose2D> GenerateTrajectory(const TrajectorySpec& spec,
                                       const BevGrid& map);

struct NoiseConfig {
  double odom_sigma_x = 0.0;      // meters per step
  double odom_sigma_y = 0.0;
  double odom_sigma_theta = 0.0;  // radians per step
  double gain_min = 1.0;          // per-beam gain, log-uniform
  double gain_max = 1.0;
  double bias_min = 0.0;          // per-beam bias, uniform
  double bias_max = 0.0;
  double dropout = 0.0;
  double intensity_sigma = 0.0;
  double gps_sigma = 10.0;
  double gps_bias_x = 0.0;
  double gps_bias_y = 0.0;
  bool gps_enabled = true;

  // Throws std::invalid_argument on negative sigmas or dropout outside [0,1).
  void Validate() const;
  static NoiseConfig Uncalibrated();
};

struct SensorConfig {
  int rays = 360;
  int range_samples = 64;
  double min_range = 1.0;
  double max_range = 15.0;
};

struct DriveStep {
  int index = 0;
  Pose2D gt;
  // Measured motion from the previous step (zero at step 0), and the noise
  // that produced it: odometry == Compose(odometry_noise, true delta).
  Pose2D odometry;
  Pose2D odometry_noise;
  std::optional<GpsObservation> gps;
  Sweep sweep;  // newest sweep in the vehicle frame
};

// Sequential drive generator. Streams for sampling geometry, intensity noise,
// beam calibration, odometry and GPS are independent, so changing one noise
// source never perturbs the others.
class DriveSimulator {
 public:
  DriveSimulator(const BevGrid& map, std::vector<Pose2D> trajectory,
                 const NoiseConfig& noise, const SensorConfig& sensor,
                 std::uint64_t seed);

  int size() const { return static_cast<int>(trajectory_.size()); }
  bool Done() const { return next_ >= size(); }
  DriveStep Next();

  const std::vector<double>& beam_gains() const { return gains_; }
  const std::vector<double>& beam_biases() const { return biases_; }

  // Sweep captured at `pose` with this simulator's calibration.
  Sweep Capture(const Pose2D& pose);

 private:
  const BevGrid& map_;
  std::vector<Pose2D> trajectory_;
  NoiseConfig noise_;
  SensorConfig sensor_;
  std::vector<double> gains_, biases_;
  std::mt19937_64 geometry_rng_, intensity_rng_, odom_rng_, gps_rng_;
  int next_ = 0;
};

// Simulates a whole drive.
std::vector<DriveStep> SimulateDrive(const BevGrid& map,
                                     const TrajectorySpec& trajectory,
                                     const NoiseConfig& noise,
                                     const SensorConfig& sensor,
                                     std::uint64_t seed);

// The k most recent sweeps ending at step t, each with its pose relative to
// step t derived from the odometry chain (ego-motion compensation).
std::vector<Sweep> RecentSweeps(std::span<const DriveStep> steps, int t, int k);

// Pose chain from integrating odometry alone, starting at steps[0].gt.
std::vector<Pose2D> DeadReckoning(std::span<const DriveStep> steps);

}  // namespace bevloc

#endif  // BEVLOC_SIM_H_

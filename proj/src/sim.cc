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

#include "bevloc/sim.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bevloc {
namespace {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform in [-1, 1] at an integer lattice point.
double LatticeValue(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
  std::uint64_t h = SplitMix64(seed);
  h = SplitMix64(h ^ static_cast<std::uint64_t>(ix));
  h = SplitMix64(h ^ static_cast<std::uint64_t>(iy) * 0x2545F4914F6CDD1Dull);
  return static_cast<double>(h >> 11) / 9007199254740992.0 * 2.0 - 1.0;
}

double Smooth(double t) { return t * t * (3.0 - 2.0 * t); }

// Smoothly interpolated lattice noise with unit lattice spacing.
double ValueNoise(double x, double y, std::uint64_t seed) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double tx = Smooth(x - fx), ty = Smooth(y - fy);
  const double v00 = LatticeValue(ix, iy, seed);
  const double v10 = LatticeValue(ix + 1, iy, seed);
  const double v01 = LatticeValue(ix, iy + 1, seed);
  const double v11 = LatticeValue(ix + 1, iy + 1, seed);
  return (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
}

std::mt19937_64 Stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

double LateralOffset(const TrajectorySpec& spec, double s) {
  double y = spec.lateral_amplitude *
             std::sin(2.0 * std::numbers::pi * s / spec.lateral_period);
  if (spec.lane_change_every > 0.0) {
    // Alternate between +offset and -offset with cosine ramps.
    const double period = spec.lane_change_every;
    const int k = static_cast<int>(std::floor(s / period));
    const double into = s - k * period;
    const double from = (k % 2 == 0) ? 0.0 : spec.lane_change_offset;
    const double to = (k % 2 == 0) ? spec.lane_change_offset : 0.0;
    const double ramp_start = period - spec.lane_change_length;
    double level = from;
    if (into > ramp_start) {
      const double u = (into - ramp_start) / spec.lane_change_length;
      level = from + (to - from) * 0.5 * (1.0 - std::cos(std::numbers::pi * u));
    }
    y += level;
  }
  return y;
}

}  // namespace

BevGrid GenerateMap(const WorldConfig& config) {
  if (!(config.resolution > 0.0)) {
    throw std::invalid_argument("GenerateMap: resolution must be positive");
  }
  GridGeometry g;
  g.cols = static_cast<int>(std::lround(config.length / config.resolution));
  g.rows = static_cast<int>(std::lround(config.width / config.resolution));
  g.resolution = config.resolution;
  BevGrid map(g);

  std::mt19937_64 rng = Stream(config.seed, 0);
  const std::uint64_t shading_seed = rng();
  const std::uint64_t texture_seed = rng();

  // Lane marking lines: y offsets and dash phases.
  struct Line {
    double y;
    double phase;
  };
  std::vector<Line> lines;
  if (config.lane_spacing > 0.0) {
    std::uniform_real_distribution<double> phase(0.0,
                                                 config.dash_length + config.dash_gap);
    const double center = config.width / 2.0;
    for (int k = -4; k < 4; ++k) {
      lines.push_back({center + (k + 0.5) * config.lane_spacing, phase(rng)});
    }
  }

  std::vector<float> values(g.size());
  for (int r = 0; r < g.rows; ++r) {
    const double y = r * config.resolution;
    for (int c = 0; c < g.cols; ++c) {
      const double x = c * config.resolution;
      double v = config.base_intensity;
      if (config.shading_amplitude != 0.0) {
        v += config.shading_amplitude *
             ValueNoise(x / config.shading_scale, y / config.shading_scale,
                        shading_seed);
      }
      if (config.texture_amplitude != 0.0) {
        v += config.texture_amplitude *
             ValueNoise(x / config.texture_scale, y / config.texture_scale,
                        texture_seed);
      }
      for (const Line& line : lines) {
        if (std::abs(y - line.y) <= config.lane_marking_width / 2.0) {
          const double period = config.dash_length + config.dash_gap;
          if (std::fmod(x + line.phase, period) < config.dash_length) {
            v = config.marking_intensity;
          }
        }
      }
      values[static_cast<std::size_t>(r) * g.cols + c] = static_cast<float>(v);
    }
  }

  const int blobs = static_cast<int>(
      std::lround(config.blob_density * config.length * config.width));
  std::uniform_real_distribution<double> ux(0.0, config.length);
  std::uniform_real_distribution<double> uy(0.0, config.width);
  std::uniform_real_distribution<double> urad(config.blob_min_radius,
                                              std::max(config.blob_min_radius,
                                                       config.blob_max_radius));
  std::uniform_real_distribution<double> uint(0.6, 1.0);
  for (int b = 0; b < blobs; ++b) {
    const double bx = ux(rng), by = uy(rng), radius = urad(rng);
    const float level = static_cast<float>(uint(rng));
    const int r0 = std::max(0, static_cast<int>((by - radius) / config.resolution));
    const int r1 = std::min(g.rows - 1, static_cast<int>((by + radius) / config.resolution) + 1);
    const int c0 = std::max(0, static_cast<int>((bx - radius) / config.resolution));
    const int c1 = std::min(g.cols - 1, static_cast<int>((bx + radius) / config.resolution) + 1);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double dx = c * config.resolution - bx;
        const double dy = r * config.resolution - by;
        if (dx * dx + dy * dy <= radius * radius) {
          float& v = values[static_cast<std::size_t>(r) * g.cols + c];
          v = std::max(v, level);
        }
      }
    }
  }

  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      map.Set(r, c, std::clamp(values[static_cast<std::size_t>(r) * g.cols + c],
                               0.f, 1.f));
    }
  }
  return map;
}

std::vector<Pose2D> GenerateTrajectory(const TrajectorySpec& spec,
                                       const BevGrid& map) {
  if (spec.steps < 0 || !(spec.step_length > 0.0)) {
    throw std::invalid_argument("GenerateTrajectory: bad step spec");
  }
  const double center_y = map.origin().y + map.rows() * map.resolution() / 2.0;
  const double x_max = (map.cols() - 1) * map.resolution();
  const double y_max = (map.rows() - 1) * map.resolution();
  std::vector<Pose2D> poses;
  for (int t = 0; t <= spec.steps; ++t) {
    const double s = t * spec.step_length;
    const double h = 1e-3;
    const double y = LateralOffset(spec, s);
    const double slope = (LateralOffset(spec, s + h) - LateralOffset(spec, s - h)) / (2 * h);
    const Pose2D pose = Compose(map.origin(), {spec.start_x + s, center_y + y,
                                               std::atan(slope)});
    const Point2D local = InverseTransformPoint(map.origin(), {pose.x, pose.y});
    if (local.x < 0 || local.y < 0 || local.x > x_max || local.y > y_max) {
      throw std::invalid_argument("GenerateTrajectory: trajectory exits the map");
    }
    poses.push_back(pose);
  }
  return poses;
}

void NoiseConfig::Validate() const {
  if (odom_sigma_x < 0 || odom_sigma_y < 0 || odom_sigma_theta < 0 ||
      intensity_sigma < 0 || gps_sigma < 0) {
    throw std::invalid_argument("NoiseConfig: sigmas must be non-negative");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("NoiseConfig: dropout must be in [0, 1)");
  }
  if (!(gain_min > 0.0) || gain_max < gain_min || bias_max < bias_min) {
    throw std::invalid_argument("NoiseConfig: bad gain/bias range");
  }
}

NoiseConfig NoiseConfig::Uncalibrated() {
  NoiseConfig n;
  n.gain_min = 0.5;
  n.gain_max = 2.0;
  n.bias_min = -0.1;
  n.bias_max = 0.1;
  return n;
}

DriveSimulator::DriveSimulator(const BevGrid& map, std::vector<Pose2D> trajectory,
                               const NoiseConfig& noise, const SensorConfig& sensor,
                               std::uint64_t seed)
    : map_(map),
      trajectory_(std::move(trajectory)),
      noise_(noise),
      sensor_(sensor),
      geometry_rng_(Stream(seed, 1)),
      intensity_rng_(Stream(seed, 2)),
      odom_rng_(Stream(seed, 3)),
      gps_rng_(Stream(seed, 4)) {
  noise_.Validate();
  if (sensor.rays <= 0 || sensor.range_samples <= 0 ||
      !(sensor.max_range > sensor.min_range)) {
    throw std::invalid_argument("SensorConfig: bad beam layout");
  }
  std::mt19937_64 calib = Stream(seed, 5);
  std::uniform_real_distribution<double> log_gain(std::log(noise_.gain_min),
                                                  std::log(noise_.gain_max));
  std::uniform_real_distribution<double> bias(noise_.bias_min, noise_.bias_max);
  for (int i = 0; i < sensor.rays; ++i) {
    const double lg = log_gain(calib);
    const double b = bias(calib);
    gains_.push_back(noise_.gain_min == noise_.gain_max ? noise_.gain_min
                                                        : std::exp(lg));
    biases_.push_back(noise_.bias_min == noise_.bias_max ? noise_.bias_min : b);
  }
}

Sweep DriveSimulator::Capture(const Pose2D& pose) {
  Sweep sweep;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double jitter = unit(geometry_rng_);
  const double spacing =
      (sensor_.max_range - sensor_.min_range) / sensor_.range_samples;
  sweep.points.reserve(static_cast<std::size_t>(sensor_.rays) *
                       sensor_.range_samples);
  for (int i = 0; i < sensor_.rays; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / sensor_.rays;
    const double c = std::cos(phi), s = std::sin(phi);
    for (int j = 0; j < sensor_.range_samples; ++j) {
      const double range = sensor_.min_range + (j + jitter) * spacing;
      const bool dropped = unit(geometry_rng_) < noise_.dropout;
      const double eps = normal(intensity_rng_);
      // Stored at float precision so drive files round-trip exactly.
      const double px = static_cast<float>(range * c);
      const double py = static_cast<float>(range * s);
      if (dropped) continue;
      const Point2D world = TransformPoint(pose, {px, py});
      const auto [rf, cf] = map_.geometry().CellCoordinates(world);
      const double r = std::floor(rf + 0.5), col = std::floor(cf + 0.5);
      if (r < 0 || col < 0 || r >= map_.rows() || col >= map_.cols()) continue;
      if (!map_.observed(static_cast<int>(r), static_cast<int>(col))) continue;
      const double m = map_.value(static_cast<int>(r), static_cast<int>(col));
      double v = m * gains_[i] + biases_[i] + noise_.intensity_sigma * eps;
      v = std::clamp(v, 0.0, 1.0);
      sweep.points.push_back({px, py, static_cast<float>(v)});
    }
  }
  return sweep;
}

DriveStep DriveSimulator::Next() {
  if (Done()) throw std::out_of_range("DriveSimulator: drive finished");
  DriveStep step;
  step.index = next_;
  step.gt = trajectory_[next_];
  if (next_ > 0) {
    const Pose2D delta = InverseCompose(step.gt, trajectory_[next_ - 1]);
    std::normal_distribution<double> normal(0.0, 1.0);
    step.odometry_noise = {noise_.odom_sigma_x * normal(odom_rng_),
                           noise_.odom_sigma_y * normal(odom_rng_),
                           noise_.odom_sigma_theta * normal(odom_rng_)};
    step.odometry_noise.theta = WrapAngle(step.odometry_noise.theta);
    step.odometry = Compose(step.odometry_noise, delta);
  }
  if (noise_.gps_enabled) {
    std::normal_distribution<double> normal(0.0, 1.0);
    GpsObservation gps;
    gps.x = step.gt.x + noise_.gps_bias_x + noise_.gps_sigma * normal(gps_rng_);
    gps.y = step.gt.y + noise_.gps_bias_y + noise_.gps_sigma * normal(gps_rng_);
    gps.sigma = noise_.gps_sigma > 0 ? noise_.gps_sigma : 10.0;
    step.gps = gps;
  }
  step.sweep = Capture(step.gt);
  ++next_;
  return step;
}

std::vector<DriveStep> SimulateDrive(const BevGrid& map,
                                     const TrajectorySpec& trajectory,
                                     const NoiseConfig& noise,
                                     const SensorConfig& sensor,
                                     std::uint64_t seed) {
  DriveSimulator sim(map, GenerateTrajectory(trajectory, map), noise, sensor, seed);
  std::vector<DriveStep> steps;
  steps.reserve(sim.size());
  while (!sim.Done()) steps.push_back(sim.Next());
  return steps;
}

std::vector<Sweep> RecentSweeps(std::span<const DriveStep> steps, int t, int k) {
  if (t < 0 || t >= static_cast<int>(steps.size()) || k < 1) {
    throw std::out_of_range("RecentSweeps: bad step index");
  }
  std::vector<Sweep> out;
  // Pose of the newest frame in frame j, accumulated backwards.
  Pose2D newest_in_j;
  for (int j = t; j >= 0 && j > t - k; --j) {
    Sweep s;
    s.points = steps[j].sweep.points;
    s.pose_delta = Inverse(newest_in_j);
    out.push_back(std::move(s));
    newest_in_j = Compose(steps[j].odometry, newest_in_j);
  }
  return out;
}

std::vector<Pose2D> DeadReckoning(std::span<const DriveStep> steps) {
  std::vector<Pose2D> out;
  if (steps.empty()) return out;
  out.push_back(steps[0].gt);
  for (std::size_t i = 1; i < steps.size(); ++i) {
    out.push_back(Compose(out.back(), steps[i].odometry));
  }
  return out;
}

}  // namespace bevloc

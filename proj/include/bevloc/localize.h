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

#ifndef BEVLOC_LOCALIZE_H_
#define BEVLOC_LOCALIZE_H_

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bevloc/embed.h"
#include "bevloc/eval.h"
#include "bevloc/filter.h"
#include "bevloc/grid.h"
#include "bevloc/matching.h"
#include "bevloc/sim.h"

namespace bevloc {

struct LocalizerConfig {
  SearchWindow window;  // center is set per step
  int sweeps = 5;       // aggregated per online image
  int online_rows = 480;
  int online_cols = 600;
  MotionModel motion;
  LidarLikelihood lidar;
  ScoreNormalization normalization = ScoreNormalization::kGlobal;
  double alpha = 2.0;
  double gps_sigma = 10.0;
  bool use_motion = true;
  bool use_gps = true;
  bool hard_argmax = false;
};

// Online histogram-filter localizer against a fixed intensity map.
class Localizer {
 public:
  // Empty specs select the identity embedding. Throws std::invalid_argument
  // if the two networks disagree on the embedding dimension.
  Localizer(const BevGrid& map, FcnParams online_net, FcnParams map_net,
            const LocalizerConfig& config);

  // Belief becomes a Gaussian around `pose`; the next Step skips prediction.
  void Initialize(const Pose2D& pose);

  // One filter step with the newest sweeps (ego-motion compensated into the
  // current frame), the odometry since the previous step and optional GPS.
  // Returns the world-frame estimate.
  Pose2D Step(std::span<const Sweep> sweeps, const Pose2D& odometry,
              const std::optional<GpsObservation>& gps);

  const Pose2D& estimate() const { return estimate_; }
  const BeliefGrid& belief() const { return belief_; }
  const ScoreVolume& last_scores() const { return scores_; }
  // Forward passes run so far, counted per network.
  int online_embeddings() const { return online_calls_; }
  int map_embeddings() const { return map_calls_; }
  const LocalizerConfig& config() const { return config_; }

 private:
  Tensor3 Embed(const FcnParams& net, const BevGrid& grid) const;

  const BevGrid& map_;
  FcnParams online_net_, map_net_;
  LocalizerConfig config_;
  int margin_ = 0;
  Matcher matcher_;
  Pose2D estimate_;
  BeliefGrid belief_;
  ScoreVolume scores_;
  bool initialized_ = false;
  bool first_step_ = true;
  int online_calls_ = 0;
  int map_calls_ = 0;
};

// Runs a localizer over a recorded drive, initialized at the first
// ground-truth pose. `on_step` sees the localizer after every step.
std::vector<TrajectoryRow> LocalizeDrive(
    const BevGrid& map, std::span<const DriveStep> steps, FcnParams online_net,
    FcnParams map_net, const LocalizerConfig& config,
    const std::function<void(const Localizer&)>& on_step = {});

}  // namespace bevloc

#endif  // BEVLOC_LOCALIZE_H_

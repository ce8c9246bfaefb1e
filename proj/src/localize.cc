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

#include "bevloc/localize.h"

#include <stdexcept>

namespace bevloc {

Localizer::Localizer(const BevGrid& map, FcnParams online_net,
                     FcnParams map_net, const LocalizerConfig& config)
    : map_(map),
      online_net_(std::move(online_net)),
      map_net_(std::move(map_net)),
      config_(config),
      matcher_(config.normalization) {
  config_.window.Validate();
  online_net_.spec.Validate();
  map_net_.spec.Validate();
  if (online_net_.spec.output_channels() != map_net_.spec.output_channels()) {
    throw std::invalid_argument("Localizer: embedding dimensions differ");
  }
  if (config_.online_rows <= 0 || config_.online_cols <= 0) {
    throw std::invalid_argument("Localizer: bad online image size");
  }
  if (config_.sweeps < 1) {
    throw std::invalid_argument("Localizer: need at least one sweep");
  }
  if (!(config_.gps_sigma > 0.0)) {
    throw std::invalid_argument("Localizer: gps sigma must be positive");
  }
  config_.motion.Inverse();
  // Extra map context so the map network sees no artificial border inside
  // the region that is actually matched.
  for (const LayerSpec& layer : map_net_.spec.layers) margin_ += layer.kernel / 2;
}

void Localizer::Initialize(const Pose2D& pose) {
  estimate_ = pose;
  SearchWindow window = config_.window;
  window.center = pose;
  belief_ = GaussianBelief(window, config_.motion);
  initialized_ = true;
  first_step_ = true;
}

Tensor3 Localizer::Embed(const FcnParams& net, const BevGrid& grid) const {
  return net.spec.is_identity() ? ToTensor(grid) : Forward(net, grid);
}

Pose2D Localizer::Step(std::span<const Sweep> sweeps, const Pose2D& odometry,
                       const std::optional<GpsObservation>& gps) {
  if (!initialized_) throw std::logic_error("Localizer: not initialized");
  SearchWindow window = config_.window;
  window.center = first_step_ ? estimate_ : Compose(estimate_, odometry);

  const BevGrid online = Rasterize(
      sweeps, GridGeometry::Centered(config_.online_rows, config_.online_cols,
                                     map_.resolution(), Pose2D{}));
  const MaskedEmbedding online_embedding =
      MakeMaskedEmbedding(Embed(online_net_, online), online);
  ++online_calls_;

  const BevGrid map_window = CropWindow(
      map_, window.center,
      config_.online_rows + window.y_cells - 1 + 2 * margin_,
      config_.online_cols + window.x_cells - 1 + 2 * margin_);
  const MaskedEmbedding map_embedding =
      MakeMaskedEmbedding(Embed(map_net_, map_window), map_window);
  ++map_calls_;

  scores_ = matcher_.Fft(online_embedding, map_embedding, window);

  BeliefGrid prior;
  if (first_step_) {
    prior = belief_;
  } else if (config_.use_motion) {
    prior = Predict(belief_, odometry, config_.motion, window);
  } else {
    prior = BeliefGrid::Uniform(window);
  }

  const std::vector<double> lidar = LidarLogLikelihood(scores_, config_.lidar);
  std::vector<double> gps_field;
  if (gps && config_.use_gps) {
    GpsObservation obs = *gps;
    obs.sigma = config_.gps_sigma;
    gps_field = GpsLogLikelihood(window, obs);
  }
  belief_ = Update(prior, lidar, gps_field);
  first_step_ = false;
  estimate_ = config_.hard_argmax ? HardArgmax(window, belief_.probs)
                                  : SoftArgmax(belief_, config_.alpha);
  return estimate_;
}

std::vector<TrajectoryRow> LocalizeDrive(
    const BevGrid& map, std::span<const DriveStep> steps, FcnParams online_net,
    FcnParams map_net, const LocalizerConfig& config,
    const std::function<void(const Localizer&)>& on_step) {
  if (steps.empty()) throw std::invalid_argument("LocalizeDrive: empty drive");
  Localizer localizer(map, std::move(online_net), std::move(map_net), config);
  localizer.Initialize(steps[0].gt);
  std::vector<TrajectoryRow> rows;
  rows.reserve(steps.size());
  for (int t = 0; t < static_cast<int>(steps.size()); ++t) {
    const std::vector<Sweep> sweeps = RecentSweeps(steps, t, config.sweeps);
    const Pose2D est = localizer.Step(sweeps, steps[t].odometry, steps[t].gps);
    rows.push_back(MakeTrajectoryRow(steps[t].index, steps[t].gt, est));
    if (on_step) on_step(localizer);
  }
  return rows;
}

}  // namespace bevloc

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

#ifndef BEVLOC_TRAIN_H_
#define BEVLOC_TRAIN_H_

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bevloc/embed.h"
#include "bevloc/grid.h"
#include "bevloc/matching.h"
#include "bevloc/sim.h"

namespace bevloc {

struct TrainSample {
  BevGrid online;
  BevGrid map_window;
  SearchWindow window;  // centered on the map window's pivot
  int gt_index = 0;     // window.Index(t, iy, ix) of the ground truth

  // Throws std::invalid_argument if gt_index is outside the window.
  void Validate() const;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double decay = 0.9;  // learning rate multiplier per epoch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 8;
  int epochs = 20;
  std::uint64_t seed = 1;
  // Softmax over score * cell_scale / temperature.
  double temperature = 1.0;
  ScoreNormalization normalization = ScoreNormalization::kGlobal;

  void Validate() const;
};

// Cross-entropy of the softmax over the volume against a one-hot target.
double Loss(const ScoreVolume& volume, int gt_index, double temperature);
// dLoss/dscore for every cell.
std::vector<double> LossGradient(const ScoreVolume& volume, int gt_index,
                                 double temperature);

struct SampleGradients {
  double loss = 0.0;
  ScoreVolume volume;
  FcnParams online;  // same layout as the online network (empty if identity)
  FcnParams map;
};

// Forward pass, loss and exact reverse-mode gradients for both networks.
SampleGradients LossBackward(const TrainSample& sample, const FcnParams& online_net,
                             const FcnParams& map_net, const TrainConfig& config,
                             Matcher& matcher);

// Score volume of a sample (forward only).
ScoreVolume SampleScores(const TrainSample& sample, const FcnParams& online_net,
                         const FcnParams& map_net, Matcher& matcher);

// True when the hard argmax lies within one cell of the ground truth in x and
// y.
bool Top1Correct(const ScoreVolume& volume, int gt_index);

// Fraction of samples whose top-1 prediction is correct, in percent.
double Top1Accuracy(std::span<const TrainSample> samples,
                    const FcnParams& online_net, const FcnParams& map_net,
                    ScoreNormalization normalization = ScoreNormalization::kGlobal);

struct EpochMetrics {
  int epoch = 0;
  double mean_loss = 0.0;
  double top1 = 0.0;  // percent, measured during the epoch
};

struct TrainResult {
  FcnParams online;
  FcnParams map;
  std::vector<EpochMetrics> history;
};

// Mini-batch Adam over both networks, starting from the given parameters.
// Deterministic under config.seed. On a non-finite loss the last good
// parameters are written to `divergence_checkpoint` (if non-empty) and
// std::runtime_error is thrown.
TrainResult Train(std::span<const TrainSample> dataset, FcnParams online_net,
                  FcnParams map_net, const TrainConfig& config,
                  const std::string& divergence_checkpoint = "",
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

struct SampleSpec {
  int online_rows = 48;
  int online_cols = 64;
  SearchWindow window;
  int sweeps = 5;
  // Crop centers are drawn uniformly in this box around the vehicle (meters).
  double max_offset_x = 8.0;
  double max_offset_y = 6.0;
  double min_observed_fraction = 0.15;
  int map_margin = 0;  // extra map context per side, in cells
};

// Cuts one sample per selected step: a crop of the aggregated online raster
// around a random point near the vehicle, and a map window whose search
// window places the ground truth at a random cell.
std::vector<TrainSample> MakeTrainSamples(const BevGrid& map,
                                          std::span<const DriveStep> steps,
                                          std::span<const int> frames,
                                          const SampleSpec& spec,
                                          std::uint64_t seed);

// Cells of context a network needs on each side (sum of kernel radii).
int ReceptiveMargin(const FcnSpec& spec);

}  // namespace bevloc

#endif  // BEVLOC_TRAIN_H_

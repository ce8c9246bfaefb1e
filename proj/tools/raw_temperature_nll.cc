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


// Mean ground-truth negative log-likelihood of raw-intensity score volumes
// for a range of lidar temperatures, on simulated noisy highway drives
// (map seeds 1-4). Used to pick the default raw temperature.

#include <cstdio>
#include <numbers>
#include <vector>

#include "bevloc/matching.h"
#include "bevloc/sim.h"
#include "bevloc/train.h"

int main() {
  using namespace bevloc;
  const std::vector<double> temperatures{5e-5, 1e-4, 2e-4, 3e-4, 5e-4, 1e-3, 2e-3};
  std::vector<double> nll(temperatures.size(), 0.0);
  int count = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    WorldConfig world;
    world.length = 240.0;
    world.texture_amplitude = 0.04;
    world.blob_density = 0.01;
    world.seed = seed;
    const BevGrid map = GenerateMap(world);
    TrajectorySpec traj;
    traj.steps = 60;
    NoiseConfig noise;
    noise.intensity_sigma = 0.05;
    noise.odom_sigma_x = 0.02;
    noise.odom_sigma_y = 0.02;
    noise.odom_sigma_theta = 0.2 * std::numbers::pi / 180.0;
    const std::vector<DriveStep> drive = SimulateDrive(map, traj, noise, SensorConfig{}, seed);
    std::vector<int> frames;
    for (int t = 5; t < static_cast<int>(drive.size()); t += 5) frames.push_back(t);
    // Full-size online images centered on the vehicle, as in localization.
    SampleSpec spec;
    spec.online_rows = 480;
    spec.online_cols = 600;
    spec.max_offset_x = 0.0;
    spec.max_offset_y = 0.0;
    spec.min_observed_fraction = 0.0;
    Matcher matcher;
    for (const TrainSample& s : MakeTrainSamples(map, drive, frames, spec, seed)) {
      const ScoreVolume v = SampleScores(s, {}, {}, matcher);
      for (std::size_t k = 0; k < temperatures.size(); ++k) {
        nll[k] += Loss(v, s.gt_index, temperatures[k]);
      }
      ++count;
    }
  }
  std::printf("temperature,mean_nll\n");
  for (std::size_t k = 0; k < temperatures.size(); ++k) {
    std::printf("%g,%.4f\n", temperatures[k], nll[k] / count);
  }
  return 0;
}

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

#ifndef BEVLOC_COMMANDS_H_
#define BEVLOC_COMMANDS_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "bevloc/config.h"
#include "bevloc/localize.h"
#include "bevloc/sim.h"
#include "bevloc/train.h"

namespace bevloc {

// Runs the command line `args` (without the program name): simulate | train |
// localize | eval | bench. Returns the process exit code; diagnostics go to
// `err`, summaries to `out`.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

// Config-file schema shared by the commands. Each reads its keys from
// `config` and leaves unlisted fields at their defaults.
WorldConfig WorldFromConfig(const KeyValueConfig& config);
TrajectorySpec TrajectoryFromConfig(const KeyValueConfig& config);
NoiseConfig NoiseFromConfig(const KeyValueConfig& config);
SensorConfig SensorFromConfig(const KeyValueConfig& config);
LocalizerConfig LocalizerFromConfig(const KeyValueConfig& config);
TrainConfig TrainFromConfig(const KeyValueConfig& config);

// Default lidar temperature for raw-intensity matching: the value minimizing
// the ground-truth negative log-likelihood of raw score volumes on simulated
// noisy drives.
inline constexpr double kRawTemperature = 0.0002;

}  // namespace bevloc

#endif  // BEVLOC_COMMANDS_H_

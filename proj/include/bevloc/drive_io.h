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

#ifndef BEVLOC_DRIVE_IO_H_
#define BEVLOC_DRIVE_IO_H_

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bevloc/sim.h"

namespace bevloc {

// "BVD1" drive record file, little-endian:
//   header: char[4] "BVD1", u32 version (1), u32 step count, u32 reserved
//   records, one per step: u32 payload bytes, payload, '\n'
//   payload: u32 index; f64 gt x, y, theta; f64 odometry x, y, theta;
//            f64 odometry noise x, y, theta; u8 gps valid; f64 gps x, y,
//            sigma; u32 point count; count x (f32 x, f32 y, f32 intensity)
// Sweep points are vehicle-frame coordinates at capture time.
void WriteDrive(std::span<const DriveStep> steps, std::ostream& out);
std::vector<DriveStep> ReadDrive(std::istream& in);
void SaveDrive(std::span<const DriveStep> steps, const std::string& path);
std::vector<DriveStep> LoadDrive(const std::string& path);

// One row per step without sweep points.
void WriteDriveCsv(std::span<const DriveStep> steps, std::ostream& out);

}  // namespace bevloc

#endif  // BEVLOC_DRIVE_IO_H_

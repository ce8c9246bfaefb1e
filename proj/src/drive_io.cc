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

#include "bevloc/drive_io.h"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "bevloc/binary_io.h"

namespace bevloc {
namespace {

constexpr std::uint32_t kVersion = 1;

void WritePose(std::ostream& out, const Pose2D& p) {
  io::WriteLe<double>(out, p.x);
  io::WriteLe<double>(out, p.y);
  io::WriteLe<double>(out, p.theta);
}

Pose2D ReadPose(std::istream& in) {
  Pose2D p;
  p.x = io::ReadLe<double>(in);
  p.y = io::ReadLe<double>(in);
  p.theta = io::ReadLe<double>(in);
  if (!IsFinite(p)) throw std::runtime_error("drive: non-finite pose");
  return p;
}

}  // namespace

void WriteDrive(std::span<const DriveStep> steps, std::ostream& out) {
  out.write("BVD1", 4);
  io::WriteLe<std::uint32_t>(out, kVersion);
  io::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(steps.size()));
  io::WriteLe<std::uint32_t>(out, 0);
  for (const DriveStep& step : steps) {
    std::ostringstream payload;
    io::WriteLe<std::uint32_t>(payload, static_cast<std::uint32_t>(step.index));
    WritePose(payload, step.gt);
    WritePose(payload, step.odometry);
    WritePose(payload, step.odometry_noise);
    io::WriteLe<std::uint8_t>(payload, step.gps ? 1 : 0);
    const GpsObservation gps = step.gps.value_or(GpsObservation{});
    io::WriteLe<double>(payload, gps.x);
    io::WriteLe<double>(payload, gps.y);
    io::WriteLe<double>(payload, gps.sigma);
    io::WriteLe<std::uint32_t>(payload,
                               static_cast<std::uint32_t>(step.sweep.points.size()));
    for (const SweepPoint& p : step.sweep.points) {
      io::WriteLe<float>(payload, static_cast<float>(p.x));
      io::WriteLe<float>(payload, static_cast<float>(p.y));
      io::WriteLe<float>(payload, p.intensity);
    }
    const std::string bytes = payload.str();
    io::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(bytes.size()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.put('\n');
  }
}

std::vector<DriveStep> ReadDrive(std::istream& in) {
  io::ExpectMagic(in, "BVD1", "drive");
  if (io::ReadLe<std::uint32_t>(in) != kVersion) {
    throw std::runtime_error("drive: unsupported version");
  }
  const std::uint32_t count = io::ReadLe<std::uint32_t>(in);
  io::ReadLe<std::uint32_t>(in);
  std::vector<DriveStep> steps;
  steps.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t length = io::ReadLe<std::uint32_t>(in);
    std::string bytes(length, '\0');
    if (!in.read(bytes.data(), length) || in.get() != '\n') {
      throw std::runtime_error("drive: truncated record");
    }
    std::istringstream payload(bytes);
    DriveStep step;
    step.index = static_cast<int>(io::ReadLe<std::uint32_t>(payload));
    step.gt = ReadPose(payload);
    step.odometry = ReadPose(payload);
    step.odometry_noise = ReadPose(payload);
    const bool has_gps = io::ReadLe<std::uint8_t>(payload) != 0;
    GpsObservation gps;
    gps.x = io::ReadLe<double>(payload);
    gps.y = io::ReadLe<double>(payload);
    gps.sigma = io::ReadLe<double>(payload);
    if (has_gps) step.gps = gps;
    const std::uint32_t n = io::ReadLe<std::uint32_t>(payload);
    if (static_cast<std::uint64_t>(n) * 12 + payload.tellg() != length) {
      throw std::runtime_error("drive: record length mismatch");
    }
    step.sweep.points.resize(n);
    for (SweepPoint& p : step.sweep.points) {
      p.x = io::ReadLe<float>(payload);
      p.y = io::ReadLe<float>(payload);
      p.intensity = io::ReadLe<float>(payload);
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

void SaveDrive(std::span<const DriveStep> steps, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  WriteDrive(steps, out);
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::vector<DriveStep> LoadDrive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return ReadDrive(in);
}

void WriteDriveCsv(std::span<const DriveStep> steps, std::ostream& out) {
  out << "index,gt_x,gt_y,gt_theta,odo_x,odo_y,odo_theta,gps_valid,gps_x,gps_y,"
         "points\n";
  out << std::setprecision(17);
  for (const DriveStep& s : steps) {
    out << s.index << ',' << s.gt.x << ',' << s.gt.y << ',' << s.gt.theta << ','
        << s.odometry.x << ',' << s.odometry.y << ',' << s.odometry.theta << ','
        << (s.gps ? 1 : 0) << ',' << (s.gps ? s.gps->x : 0.0) << ','
        << (s.gps ? s.gps->y : 0.0) << ',' << s.sweep.points.size() << '\n';
  }
}

}  // namespace bevloc

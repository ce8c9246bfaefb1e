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

#ifndef BEVLOC_EVAL_H_
#define BEVLOC_EVAL_H_

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "bevloc/pose.h"

namespace bevloc {

// One localized frame. Errors are InverseCompose(est, gt): the longitudinal
// error runs along the ground-truth heading, the lateral error across it.
struct TrajectoryRow {
  int t = 0;
  Pose2D gt;
  Pose2D est;
  double lat_err = 0.0;  // meters
  double lon_err = 0.0;  // meters
  double theta_err = 0.0;  // radians

  double total_err() const;
};

TrajectoryRow MakeTrajectoryRow(int t, const Pose2D& gt, const Pose2D& est);

// Columns: t, gt_x, gt_y, gt_theta, est_x, est_y, est_theta, lat_err,
// lon_err, theta_err.
void WriteTrajectoryCsv(const std::vector<TrajectoryRow>& rows, std::ostream& out);
// Throws std::runtime_error on a malformed header or row.
std::vector<TrajectoryRow> ReadTrajectoryCsv(std::istream& in);

// Lower median: element (n - 1) / 2 of the sorted values. Throws on empty
// input.
double LowerMedian(std::vector<double> values);

inline constexpr std::array<double, 3> kFailureDistances = {100.0, 500.0, -1.0};

struct SequenceStats {
  std::string name;
  int frames = 0;
  double distance_m = 0.0;
  double median_lat_cm = 0.0;
  double median_lon_cm = 0.0;
  double median_total_cm = 0.0;
  double max_total_cm = 0.0;
  // Any frame above the failure threshold within 100 m, 500 m, and the whole
  // sequence.
  std::array<bool, 3> failed{false, false, false};
};

struct EvalReport {
  double failure_threshold_m = 1.0;
  std::vector<SequenceStats> sequences;
  // Medians over all frames of all sequences.
  double median_lat_cm = 0.0;
  double median_lon_cm = 0.0;
  double median_total_cm = 0.0;
  std::array<double, 3> failure_rate{0.0, 0.0, 0.0};  // percent of sequences
  // Fraction of frames with total error at or below each error level.
  std::vector<std::array<double, 2>> cumulative;  // {error_cm, fraction}
};

struct NamedTrajectory {
  std::string name;
  std::vector<TrajectoryRow> rows;
};

EvalReport Evaluate(const std::vector<NamedTrajectory>& trajectories,
                    double failure_threshold_m = 1.0);

// Per-sequence rows followed by an "all" row.
void WriteReportCsv(const EvalReport& report, std::ostream& out);
void WriteCumulativeCsv(const EvalReport& report, std::ostream& out);
// distance_m, lat_err_m, lon_err_m, total_err_m per frame.
void WriteErrorVsDistanceCsv(const std::vector<TrajectoryRow>& rows,
                             std::ostream& out);

}  // namespace bevloc

#endif  // BEVLOC_EVAL_H_

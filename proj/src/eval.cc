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

#include "bevloc/eval.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace bevloc {
namespace {

constexpr const char* kTrajectoryHeader =
    "t,gt_x,gt_y,gt_theta,est_x,est_y,est_theta,lat_err,lon_err,theta_err";

std::vector<double> CumulativeDistance(const std::vector<TrajectoryRow>& rows) {
  std::vector<double> d(rows.size(), 0.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    d[i] = d[i - 1] + std::hypot(rows[i].gt.x - rows[i - 1].gt.x,
                                 rows[i].gt.y - rows[i - 1].gt.y);
  }
  return d;
}

std::string FailureLabel(int i) {
  return kFailureDistances[i] < 0
             ? std::string("end")
             : std::to_string(static_cast<int>(kFailureDistances[i])) + "m";
}

}  // namespace

double TrajectoryRow::total_err() const { return std::hypot(lat_err, lon_err); }

TrajectoryRow MakeTrajectoryRow(int t, const Pose2D& gt, const Pose2D& est) {
  const Pose2D e = InverseCompose(est, gt);
  return {t, gt, est, e.y, e.x, e.theta};
}

void WriteTrajectoryCsv(const std::vector<TrajectoryRow>& rows, std::ostream& out) {
  out << kTrajectoryHeader << '\n' << std::setprecision(17);
  for (const TrajectoryRow& r : rows) {
    out << r.t << ',' << r.gt.x << ',' << r.gt.y << ',' << r.gt.theta << ','
        << r.est.x << ',' << r.est.y << ',' << r.est.theta << ',' << r.lat_err
        << ',' << r.lon_err << ',' << r.theta_err << '\n';
  }
}

std::vector<TrajectoryRow> ReadTrajectoryCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trajectory CSV: empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryHeader) {
    throw std::runtime_error("trajectory CSV: unexpected header");
  }
  std::vector<TrajectoryRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(fields, cell, ',')) {
      std::size_t used = 0;
      double x;
      try {
        x = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size() || !std::isfinite(x)) {
        throw std::runtime_error("trajectory CSV: bad value on line " +
                                 std::to_string(line_no));
      }
      v.push_back(x);
    }
    if (v.size() != 10) {
      throw std::runtime_error("trajectory CSV: expected 10 fields on line " +
                               std::to_string(line_no));
    }
    TrajectoryRow r;
    r.t = static_cast<int>(v[0]);
    r.gt = {v[1], v[2], v[3]};
    r.est = {v[4], v[5], v[6]};
    r.lat_err = v[7];
    r.lon_err = v[8];
    r.theta_err = v[9];
    rows.push_back(r);
  }
  return rows;
}

double LowerMedian(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("LowerMedian: no values");
  const auto mid = values.begin() + (values.size() - 1) / 2;
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

EvalReport Evaluate(const std::vector<NamedTrajectory>& trajectories,
                    double failure_threshold_m) {
  if (trajectories.empty()) throw std::invalid_argument("Evaluate: no trajectories");
  if (!(failure_threshold_m > 0.0)) {
    throw std::invalid_argument("Evaluate: failure threshold must be positive");
  }
  EvalReport report;
  report.failure_threshold_m = failure_threshold_m;
  std::vector<double> all_lat, all_lon, all_total;
  for (const NamedTrajectory& traj : trajectories) {
    if (traj.rows.empty()) {
      throw std::invalid_argument("Evaluate: empty trajectory " + traj.name);
    }
    SequenceStats s;
    s.name = traj.name;
    s.frames = static_cast<int>(traj.rows.size());
    const std::vector<double> dist = CumulativeDistance(traj.rows);
    s.distance_m = dist.back();
    std::vector<double> lat, lon, total;
    for (std::size_t i = 0; i < traj.rows.size(); ++i) {
      const TrajectoryRow& r = traj.rows[i];
      lat.push_back(std::abs(r.lat_err) * 100.0);
      lon.push_back(std::abs(r.lon_err) * 100.0);
      total.push_back(r.total_err() * 100.0);
      s.max_total_cm = std::max(s.max_total_cm, total.back());
      if (r.total_err() > failure_threshold_m) {
        for (int k = 0; k < 3; ++k) {
          if (kFailureDistances[k] < 0 || dist[i] <= kFailureDistances[k]) {
            s.failed[k] = true;
          }
        }
      }
    }
    s.median_lat_cm = LowerMedian(lat);
    s.median_lon_cm = LowerMedian(lon);
    s.median_total_cm = LowerMedian(total);
    all_lat.insert(all_lat.end(), lat.begin(), lat.end());
    all_lon.insert(all_lon.end(), lon.begin(), lon.end());
    all_total.insert(all_total.end(), total.begin(), total.end());
    report.sequences.push_back(s);
  }
  report.median_lat_cm = LowerMedian(all_lat);
  report.median_lon_cm = LowerMedian(all_lon);
  report.median_total_cm = LowerMedian(all_total);
  for (int k = 0; k < 3; ++k) {
    int failed = 0;
    for (const SequenceStats& s : report.sequences) failed += s.failed[k];
    report.failure_rate[k] = 100.0 * failed / report.sequences.size();
  }
  std::sort(all_total.begin(), all_total.end());
  const double n = static_cast<double>(all_total.size());
  for (double level = 0.0; level <= 200.0; level += 1.0) {
    const auto count =
        std::upper_bound(all_total.begin(), all_total.end(), level) - all_total.begin();
    report.cumulative.push_back({level, count / n});
  }
  return report;
}

void WriteReportCsv(const EvalReport& report, std::ostream& out) {
  out << "sequence,frames,distance_m,median_lat_cm,median_lon_cm,median_total_cm,"
         "max_total_cm";
  for (int k = 0; k < 3; ++k) out << ",fail_" << FailureLabel(k);
  out << '\n' << std::setprecision(10);
  for (const SequenceStats& s : report.sequences) {
    out << s.name << ',' << s.frames << ',' << s.distance_m << ','
        << s.median_lat_cm << ',' << s.median_lon_cm << ',' << s.median_total_cm
        << ',' << s.max_total_cm;
    for (bool f : s.failed) out << ',' << (f ? 100 : 0);
    out << '\n';
  }
  int frames = 0;
  double distance = 0.0, max_cm = 0.0;
  for (const SequenceStats& s : report.sequences) {
    frames += s.frames;
    distance += s.distance_m;
    max_cm = std::max(max_cm, s.max_total_cm);
  }
  out << "all," << frames << ',' << distance << ',' << report.median_lat_cm << ','
      << report.median_lon_cm << ',' << report.median_total_cm << ',' << max_cm;
  for (double r : report.failure_rate) out << ',' << r;
  out << '\n';
}

void WriteCumulativeCsv(const EvalReport& report, std::ostream& out) {
  out << "error_cm,fraction\n";
  for (const auto& [level, fraction] : report.cumulative) {
    out << level << ',' << fraction << '\n';
  }
}

void WriteErrorVsDistanceCsv(const std::vector<TrajectoryRow>& rows,
                             std::ostream& out) {
  const std::vector<double> dist = CumulativeDistance(rows);
  out << "distance_m,lat_err_m,lon_err_m,total_err_m\n" << std::setprecision(10);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << dist[i] << ',' << rows[i].lat_err << ',' << rows[i].lon_err << ','
        << rows[i].total_err() << '\n';
  }
}

}  // namespace bevloc

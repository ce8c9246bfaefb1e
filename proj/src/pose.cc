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

#include "bevloc/pose.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bevloc {

double WrapAngle(double theta) {
  if (!std::isfinite(theta)) {
    throw std::invalid_argument("WrapAngle: non-finite angle");
  }
  constexpr double kPi = std::numbers::pi;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (theta > -kPi && theta <= kPi) return theta;
  double wrapped = std::fmod(theta + kPi, kTwoPi);
  if (wrapped <= 0.0) wrapped += kTwoPi;
  return wrapped - kPi;
}

Pose2D Compose(const Pose2D& a, const Pose2D& b) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  return {a.x + b.x * c - b.y * s, a.y + b.x * s + b.y * c,
          WrapAngle(a.theta + b.theta)};
}

Pose2D InverseCompose(const Pose2D& a, const Pose2D& b) {
  const double c = std::cos(b.theta);
  const double s = std::sin(b.theta);
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return {dx * c + dy * s, -dx * s + dy * c, WrapAngle(a.theta - b.theta)};
}

Pose2D Inverse(const Pose2D& a) { return InverseCompose(Pose2D{}, a); }

Point2D TransformPoint(const Pose2D& pose, const Point2D& point) {
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  return {pose.x + point.x * c - point.y * s,
          pose.y + point.x * s + point.y * c};
}

Point2D InverseTransformPoint(const Pose2D& pose, const Point2D& point) {
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  const double dx = point.x - pose.x;
  const double dy = point.y - pose.y;
  return {dx * c + dy * s, -dx * s + dy * c};
}

std::vector<Point2D> TransformPoints(const Pose2D& pose,
                                     std::span<const Point2D> points) {
  std::vector<Point2D> out;
  out.reserve(points.size());
  for (const Point2D& p : points) out.push_back(TransformPoint(pose, p));
  return out;
}

std::vector<Point2D> InverseTransformPoints(const Pose2D& pose,
                                            std::span<const Point2D> points) {
  std::vector<Point2D> out;
  out.reserve(points.size());
  for (const Point2D& p : points) out.push_back(InverseTransformPoint(pose, p));
  return out;
}

bool IsFinite(const Pose2D& pose) {
  return std::isfinite(pose.x) && std::isfinite(pose.y) &&
         std::isfinite(pose.theta);
}

}  // namespace bevloc

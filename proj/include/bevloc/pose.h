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

#ifndef BEVLOC_POSE_H_
#define BEVLOC_POSE_H_

#include <span>
#include <vector>

namespace bevloc {

// SE(2) pose. x is longitudinal, y lateral (meters), theta in radians,
// always kept in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

struct Point2D {
  double x = 0.0;
  double y = 0.0;
};

// Maps any finite angle into (-pi, pi]. Throws std::invalid_argument on
// non-finite input.
double WrapAngle(double theta);

// a (+) b: b expressed in a's frame, chained onto a.
Pose2D Compose(const Pose2D& a, const Pose2D& b);

// a (-) b: the pose of a expressed in b's frame, so that
// Compose(b, InverseCompose(a, b)) == a.
Pose2D InverseCompose(const Pose2D& a, const Pose2D& b);

// Pose p such that Compose(a, p) is the identity.
Pose2D Inverse(const Pose2D& a);

Point2D TransformPoint(const Pose2D& pose, const Point2D& point);
Point2D InverseTransformPoint(const Pose2D& pose, const Point2D& point);

// Rotates each point by pose.theta and then translates by (pose.x, pose.y).
std::vector<Point2D> TransformPoints(const Pose2D& pose,
                                     std::span<const Point2D> points);
std::vector<Point2D> InverseTransformPoints(const Pose2D& pose,
                                            std::span<const Point2D> points);

bool IsFinite(const Pose2D& pose);

}  // namespace bevloc

#endif  // BEVLOC_POSE_H_

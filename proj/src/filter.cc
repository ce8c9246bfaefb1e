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

#include "bevloc/filter.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace bevloc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Kernel terms with energy above this are below double precision relative to
// the peak and are skipped.
constexpr double kMaxEnergy = 40.0;

bool IsIsotropicDiagonal(const MotionModel& m) {
  const auto& s = m.sigma;
  return s[1] == 0 && s[2] == 0 && s[3] == 0 && s[5] == 0 && s[6] == 0 &&
         s[7] == 0 && s[0] == s[4];
}

// Sum of rho over integer lattice offsets; truncated models only count
// offsets inside the window half-extents.
double LatticeNormalizer(const MotionModel& model, const SearchWindow& w) {
  const bool truncated = model.mode == MotionMode::kTruncatedQuadratic;
  int ext[3];
  for (int k = 0; k < 3; ++k) {
    ext[k] = static_cast<int>(std::ceil(std::sqrt(kMaxEnergy * model.sigma[4 * k])));
  }
  if (truncated) {
    ext[0] = std::min(ext[0], w.half_x());
    ext[1] = std::min(ext[1], w.half_y());
    ext[2] = std::min(ext[2], w.half_theta());
  }
  if (w.theta_step == 0.0) ext[2] = 0;
  double z = 0.0;
  for (int t = -ext[2]; t <= ext[2]; ++t) {
    for (int y = -ext[1]; y <= ext[1]; ++y) {
      for (int x = -ext[0]; x <= ext[0]; ++x) {
        z += std::exp(-model.Energy({double(x), double(y), double(t)}));
      }
    }
  }
  return z;
}

BeliefGrid Normalize(BeliefGrid b, const char* what) {
  double sum = 0.0;
  for (double p : b.probs) sum += p;
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    throw std::runtime_error(std::string(what) + ": belief has no mass");
  }
  for (double& p : b.probs) p /= sum;
  return b;
}

}  // namespace

BeliefGrid BeliefGrid::Uniform(const SearchWindow& window) {
  window.Validate();
  BeliefGrid b;
  b.window = window;
  b.probs.assign(window.size(), 1.0 / window.size());
  return b;
}

double BeliefGrid::Sum() const {
  double s = 0.0;
  for (double p : probs) s += p;
  return s;
}

bool BeliefGrid::IsNormalized(double tol) const {
  if (static_cast<int>(probs.size()) != window.size()) return false;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) return false;
  }
  return std::abs(Sum() - 1.0) <= tol;
}

MotionModel MotionModel::Diagonal(double sx, double sy, double st,
                                  MotionMode mode) {
  MotionModel m;
  m.sigma = {sx, 0, 0, 0, sy, 0, 0, 0, st};
  m.mode = mode;
  return m;
}

std::array<double, 9> MotionModel::Inverse() const {
  const auto& s = sigma;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (std::abs(s[3 * i + j] - s[3 * j + i]) > 1e-12 * (1 + std::abs(s[3 * i + j]))) {
        throw std::invalid_argument("MotionModel: Sigma must be symmetric");
      }
    }
  }
  // Leading principal minors for positive definiteness.
  const double m1 = s[0];
  const double m2 = s[0] * s[4] - s[1] * s[3];
  const double det = s[0] * (s[4] * s[8] - s[5] * s[7]) -
                     s[1] * (s[3] * s[8] - s[5] * s[6]) +
                     s[2] * (s[3] * s[7] - s[4] * s[6]);
  if (!(m1 > 0) || !(m2 > 0) || !(det > 0) || !std::isfinite(det)) {
    throw std::invalid_argument("MotionModel: Sigma is not positive definite");
  }
  std::array<double, 9> inv;
  inv[0] = (s[4] * s[8] - s[5] * s[7]) / det;
  inv[1] = (s[2] * s[7] - s[1] * s[8]) / det;
  inv[2] = (s[1] * s[5] - s[2] * s[4]) / det;
  inv[3] = (s[5] * s[6] - s[3] * s[8]) / det;
  inv[4] = (s[0] * s[8] - s[2] * s[6]) / det;
  inv[5] = (s[2] * s[3] - s[0] * s[5]) / det;
  inv[6] = (s[3] * s[7] - s[4] * s[6]) / det;
  inv[7] = (s[1] * s[6] - s[0] * s[7]) / det;
  inv[8] = (s[0] * s[4] - s[1] * s[3]) / det;
  return inv;
}

double MotionModel::Energy(const std::array<double, 3>& z) const {
  const auto inv = Inverse();
  double q = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) q += z[i] * inv[3 * i + j] * z[j];
  }
  return q;
}

std::array<double, 3> ResidualInWindowUnits(const Pose2D& pose,
                                            const Pose2D& predicted,
                                            const SearchWindow& window) {
  const Pose2D z = InverseCompose(pose, predicted);
  return {z.x / window.resolution, z.y / window.resolution,
          window.theta_step > 0 ? z.theta / window.theta_step : 0.0};
}

BeliefGrid GaussianBelief(const SearchWindow& window, const MotionModel& model) {
  window.Validate();
  BeliefGrid b;
  b.window = window;
  b.probs.resize(window.size());
  for (int t = 0; t < window.theta_cells; ++t) {
    for (int iy = 0; iy < window.y_cells; ++iy) {
      for (int ix = 0; ix < window.x_cells; ++ix) {
        const std::array<double, 3> z = {double(ix - window.half_x()),
                                         double(iy - window.half_y()),
                                         double(t - window.half_theta())};
        b.probs[window.Index(t, iy, ix)] = std::exp(-model.Energy(z));
      }
    }
  }
  return Normalize(std::move(b), "GaussianBelief");
}

BeliefGrid Predict(const BeliefGrid& prev, const Pose2D& odometry,
                   const MotionModel& model, const SearchWindow& new_window,
                   double* retained_mass) {
  new_window.Validate();
  const std::array<double, 9> inv = model.Inverse();
  const double normalizer = LatticeNormalizer(model, new_window);
  const SearchWindow& pw = prev.window;
  const SearchWindow& nw = new_window;

  BeliefGrid out;
  out.window = nw;
  out.probs.assign(nw.size(), 0.0);

  const double res = nw.resolution;
  const double tstep = nw.theta_step;
  if (model.mode == MotionMode::kGaussian && IsIsotropicDiagonal(model)) {
    // |x - p|^2 is rotation invariant, so the kernel separates into x, y and
    // theta factors in the new window's frame.
    const double sxy = model.sigma[0];
    const double st = model.sigma[8];
    std::vector<double> fx(nw.x_cells), fy(nw.y_cells), ft(nw.theta_cells);
    for (int t = 0; t < pw.theta_cells; ++t) {
      for (int iy = 0; iy < pw.y_cells; ++iy) {
        for (int ix = 0; ix < pw.x_cells; ++ix) {
          const double b = prev.probs[pw.Index(t, iy, ix)];
          if (b == 0.0) continue;
          const Pose2D p = Compose(pw.CellPose(t, iy, ix), odometry);
          const Point2D local = InverseTransformPoint(nw.center, {p.x, p.y});
          const double px = local.x / res + nw.half_x();
          const double py = local.y / res + nw.half_y();
          for (int k = 0; k < nw.x_cells; ++k) {
            fx[k] = std::exp(-(k - px) * (k - px) / sxy);
          }
          for (int k = 0; k < nw.y_cells; ++k) {
            fy[k] = std::exp(-(k - py) * (k - py) / sxy);
          }
          for (int k = 0; k < nw.theta_cells; ++k) {
            const double th = WrapAngle(nw.center.theta +
                                        (k - nw.half_theta()) * tstep - p.theta);
            const double zt = tstep > 0 ? th / tstep : 0.0;
            ft[k] = std::exp(-zt * zt / st);
          }
          const double w = b / normalizer;
          for (int k = 0; k < nw.theta_cells; ++k) {
            const double wt = w * ft[k];
            if (wt == 0.0) continue;
            for (int j = 0; j < nw.y_cells; ++j) {
              const double wy = wt * fy[j];
              if (wy == 0.0) continue;
              double* row = &out.probs[nw.Index(k, j, 0)];
              for (int i = 0; i < nw.x_cells; ++i) row[i] += wy * fx[i];
            }
          }
        }
      }
    }
  } else {
    const bool truncated = model.mode == MotionMode::kTruncatedQuadratic;
    std::vector<Pose2D> cells(nw.size());
    for (int t = 0; t < nw.theta_cells; ++t) {
      for (int iy = 0; iy < nw.y_cells; ++iy) {
        for (int ix = 0; ix < nw.x_cells; ++ix) {
          cells[nw.Index(t, iy, ix)] = nw.CellPose(t, iy, ix);
        }
      }
    }
    for (int j = 0; j < pw.size(); ++j) {
      const double b = prev.probs[j];
      if (b == 0.0) continue;
      const int t0 = j / (pw.y_cells * pw.x_cells);
      const int iy0 = (j / pw.x_cells) % pw.y_cells;
      const int ix0 = j % pw.x_cells;
      const Pose2D p = Compose(pw.CellPose(t0, iy0, ix0), odometry);
      const double c = std::cos(p.theta);
      const double s = std::sin(p.theta);
      for (int i = 0; i < nw.size(); ++i) {
        const double dx = cells[i].x - p.x;
        const double dy = cells[i].y - p.y;
        const double z0 = (dx * c + dy * s) / res;
        const double z1 = (-dx * s + dy * c) / res;
        const double z2 =
            tstep > 0 ? WrapAngle(cells[i].theta - p.theta) / tstep : 0.0;
        if (truncated && (std::abs(z0) > nw.half_x() || std::abs(z1) > nw.half_y() ||
                          std::abs(z2) > nw.half_theta())) {
          continue;
        }
        const double q = z0 * (inv[0] * z0 + inv[1] * z1 + inv[2] * z2) +
                         z1 * (inv[3] * z0 + inv[4] * z1 + inv[5] * z2) +
                         z2 * (inv[6] * z0 + inv[7] * z1 + inv[8] * z2);
        if (q > kMaxEnergy) continue;
        out.probs[i] += b * std::exp(-q) / normalizer;
      }
    }
  }
  double mass = 0.0;
  for (double v : out.probs) mass += v;
  if (retained_mass) *retained_mass = mass;
  return Normalize(std::move(out), "Predict");
}

std::vector<double> GpsLogLikelihood(const SearchWindow& window,
                                     const GpsObservation& obs) {
  if (!(obs.sigma > 0.0)) {
    throw std::invalid_argument("GpsLogLikelihood: sigma must be positive");
  }
  std::vector<double> out(static_cast<std::size_t>(window.y_cells) *
                          window.x_cells);
  const double s2 = obs.sigma * obs.sigma;
  for (int iy = 0; iy < window.y_cells; ++iy) {
    for (int ix = 0; ix < window.x_cells; ++ix) {
      const Pose2D cell = window.CellPose(window.half_theta(), iy, ix);
      const double dx = obs.x - cell.x;
      const double dy = obs.y - cell.y;
      out[iy * window.x_cells + ix] = -(dx * dx + dy * dy) / s2;
    }
  }
  return out;
}

std::vector<double> LidarLogLikelihood(const ScoreVolume& volume,
                                       const LidarLikelihood& likelihood) {
  std::vector<double> out(volume.scores.size());
  if (likelihood.mode == LidarLikelihoodMode::kSoftmax) {
    if (!(likelihood.temperature > 0.0)) {
      throw std::invalid_argument("LidarLogLikelihood: temperature must be > 0");
    }
    const double k = volume.cell_scale / likelihood.temperature;
    double max_logit = kNegInf;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = k * volume.scores[i];
      max_logit = std::max(max_logit, out[i]);
    }
    double sum = 0.0;
    for (double v : out) sum += std::exp(v - max_logit);
    const double log_z = max_logit + std::log(sum);
    for (double& v : out) v -= log_z;
    return out;
  }
  float max_score = 0.f;
  for (float s : volume.scores) max_score = std::max(max_score, s);
  if (max_score <= 0.f) {
    // No positive evidence anywhere: uninformative.
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = volume.scores[i] > 0.f ? std::log(static_cast<double>(volume.scores[i]))
                                    : kNegInf;
  }
  return out;
}

BeliefGrid Update(const BeliefGrid& pred, std::span<const double> lidar_loglik,
                  std::span<const double> gps_loglik) {
  const SearchWindow& w = pred.window;
  if (static_cast<int>(lidar_loglik.size()) != w.size() ||
      static_cast<int>(pred.probs.size()) != w.size()) {
    throw std::invalid_argument("Update: lidar volume shape mismatch");
  }
  const int plane = w.y_cells * w.x_cells;
  if (!gps_loglik.empty() && static_cast<int>(gps_loglik.size()) != plane) {
    throw std::invalid_argument("Update: GPS field shape mismatch");
  }
  std::vector<double> log_post(w.size());
  double max_log = kNegInf;
  for (int i = 0; i < w.size(); ++i) {
    double v = pred.probs[i] > 0.0 ? std::log(pred.probs[i]) : kNegInf;
    v += lidar_loglik[i];
    if (!gps_loglik.empty()) v += gps_loglik[i % plane];
    if (std::isnan(v)) v = kNegInf;
    log_post[i] = v;
    max_log = std::max(max_log, v);
  }
  if (!std::isfinite(max_log)) {
    double pred_mass = 0.0;
    int lidar_finite = 0;
    for (int i = 0; i < w.size(); ++i) {
      pred_mass += pred.probs[i];
      lidar_finite += std::isfinite(lidar_loglik[i]) ? 1 : 0;
    }
    std::ostringstream msg;
    msg << "Update: posterior collapsed (prediction mass " << pred_mass
        << ", finite lidar cells " << lidar_finite << "/" << w.size() << ")";
    throw std::runtime_error(msg.str());
  }
  BeliefGrid post;
  post.window = w;
  post.probs.resize(w.size());
  for (int i = 0; i < w.size(); ++i) post.probs[i] = std::exp(log_post[i] - max_log);
  return Normalize(std::move(post), "Update");
}

Pose2D SoftArgmax(const BeliefGrid& belief, double alpha) {
  if (!(alpha >= 1.0)) throw std::invalid_argument("SoftArgmax: alpha must be >= 1");
  const SearchWindow& w = belief.window;
  if (w.theta_cells * w.theta_step >= std::numbers::pi) {
    throw std::invalid_argument("SoftArgmax: theta extent too wide for a linear mean");
  }
  double max_log = kNegInf;
  for (double p : belief.probs) {
    if (p > 0.0) max_log = std::max(max_log, std::log(p));
  }
  if (!std::isfinite(max_log)) throw std::runtime_error("SoftArgmax: empty belief");
  double sw = 0.0, sx = 0.0, sy = 0.0, st = 0.0;
  for (int t = 0; t < w.theta_cells; ++t) {
    for (int iy = 0; iy < w.y_cells; ++iy) {
      for (int ix = 0; ix < w.x_cells; ++ix) {
        const double p = belief.at(t, iy, ix);
        if (p <= 0.0) continue;
        const double wt = std::exp(alpha * (std::log(p) - max_log));
        const Pose2D off = w.CellOffset(t, iy, ix);
        sw += wt;
        sx += wt * off.x;
        sy += wt * off.y;
        st += wt * off.theta;
      }
    }
  }
  return Compose(w.center, {sx / sw, sy / sw, st / sw});
}

int HardArgmaxIndex(const SearchWindow& window, std::span<const double> values,
                    std::span<const double> extra) {
  if (static_cast<int>(values.size()) != window.size() ||
      (!extra.empty() && extra.size() != values.size())) {
    throw std::invalid_argument("HardArgmax: shape mismatch");
  }
  int best = -1;
  double best_v = kNegInf;
  std::array<int, 3> best_key{};
  for (int t = 0; t < window.theta_cells; ++t) {
    for (int iy = 0; iy < window.y_cells; ++iy) {
      for (int ix = 0; ix < window.x_cells; ++ix) {
        const int i = window.Index(t, iy, ix);
        const double v = values[i] + (extra.empty() ? 0.0 : extra[i]);
        if (std::isnan(v)) continue;
        const std::array<int, 3> key = {std::abs(t - window.half_theta()),
                                        std::abs(iy - window.half_y()),
                                        std::abs(ix - window.half_x())};
        if (best < 0 || v > best_v || (v == best_v && key < best_key)) {
          best = i;
          best_v = v;
          best_key = key;
        }
      }
    }
  }
  if (best < 0) throw std::runtime_error("HardArgmax: no valid cell");
  return best;
}

Pose2D HardArgmax(const SearchWindow& window, std::span<const double> values,
                  std::span<const double> extra) {
  const int i = HardArgmaxIndex(window, values, extra);
  const int plane = window.y_cells * window.x_cells;
  return window.CellPose(i / plane, (i % plane) / window.x_cells,
                         i % window.x_cells);
}

}  // namespace bevloc

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

#ifndef BEVLOC_TESTS_ORACLES_H_
#define BEVLOC_TESTS_ORACLES_H_

// Reference implementations used only by tests. Everything here is written
// from the mathematical definitions with plain loops in double precision and
// shares no code with the library beyond its data types.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "bevloc/embed.h"
#include "bevloc/grid.h"
#include "bevloc/matching.h"
#include "bevloc/pose.h"
#include "bevloc/train.h"

namespace bevloc::oracle {

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 ToMatrix(const Pose2D& p) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  return {{{c, -s, p.x}, {s, c, p.y}, {0, 0, 1}}};
}

inline Mat3 Multiply(const Mat3& a, const Mat3& b) {
  Mat3 m{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) m[i][j] += a[i][k] * b[k][j];
  return m;
}

inline Pose2D FromMatrix(const Mat3& m) {
  return {m[0][2], m[1][2], std::atan2(m[1][0], m[0][0])};
}

// Rigid inverse via the transpose of the rotation block.
inline Mat3 InvertRigid(const Mat3& m) {
  Mat3 r{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r[i][j] = m[j][i];
  r[0][2] = -(r[0][0] * m[0][2] + r[0][1] * m[1][2]);
  r[1][2] = -(r[1][0] * m[0][2] + r[1][1] * m[1][2]);
  r[2][2] = 1.0;
  return r;
}

inline double AngleDistance(double a, double b) {
  return std::abs(std::remainder(a - b, 2.0 * std::numbers::pi));
}

// Planar embedding stored as double, channel-major, with a 0/1 mask.
struct Field {
  int channels = 0, rows = 0, cols = 0;
  std::vector<double> v;
  std::vector<int> mask;

  double& at(int ch, int r, int c) { return v[(ch * rows + r) * cols + c]; }
  double at(int ch, int r, int c) const { return v[(ch * rows + r) * cols + c]; }
  int m(int r, int c) const { return mask[r * cols + c]; }
  int Count() const {
    int n = 0;
    for (int x : mask) n += x != 0;
    return n;
  }
};

inline Field FromTensor(const Tensor3T<double>& t, const std::vector<int>& mask) {
  return {t.channels, t.rows, t.cols, t.values, mask};
}

inline Field FromEmbedding(const MaskedEmbedding& e) {
  Field f{e.channels(), e.rows(), e.cols(),
          std::vector<double>(e.values.values.begin(), e.values.values.end()),
          std::vector<int>(e.mask.begin(), e.mask.end())};
  return f;
}

// <a [ma], b [mb]> / (|ma| |mb|), zero for an empty mask.
inline double MaskedScore(const Field& a, const Field& b) {
  const int na = a.Count(), nb = b.Count();
  if (na == 0 || nb == 0) return 0.0;
  double sum = 0.0;
  for (int ch = 0; ch < a.channels; ++ch)
    for (int r = 0; r < a.rows; ++r)
      for (int c = 0; c < a.cols; ++c)
        if (a.m(r, c) && b.m(r, c)) sum += a.at(ch, r, c) * b.at(ch, r, c);
  return sum / (static_cast<double>(na) * nb);
}

// Rotates a field by theta about cell (rows / 2, cols / 2): the destination
// cell at offset p from the pivot samples the source at R(-theta) p. Samples
// are bilinear over observed source taps only, renormalized by their weight;
// the destination is observed when that weight reaches one half.
inline Field Rotate(const Field& in, double theta) {
  Field out{in.channels, in.rows, in.cols,
            std::vector<double>(in.v.size(), 0.0),
            std::vector<int>(in.mask.size(), 0)};
  const double pr = in.rows / 2, pc = in.cols / 2;
  const double c = std::cos(theta), s = std::sin(theta);
  for (int r = 0; r < in.rows; ++r) {
    for (int col = 0; col < in.cols; ++col) {
      const double px = col - pc, py = r - pr;
      double sx = c * px + s * py + pc;
      double sy = -s * px + c * py + pr;
      // Coordinates a rounding error away from a cell center count as on it.
      if (std::abs(sx - std::round(sx)) < 1e-9) sx = std::round(sx);
      if (std::abs(sy - std::round(sy)) < 1e-9) sy = std::round(sy);
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      double wsum = 0.0;
      std::vector<double> acc(in.channels, 0.0);
      for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
          const int yy = y0 + dy, xx = x0 + dx;
          if (yy < 0 || xx < 0 || yy >= in.rows || xx >= in.cols) continue;
          if (!in.m(yy, xx)) continue;
          const double w = (dy ? fy : 1 - fy) * (dx ? fx : 1 - fx);
          wsum += w;
          for (int ch = 0; ch < in.channels; ++ch) acc[ch] += w * in.at(ch, yy, xx);
        }
      }
      if (wsum >= 0.5) {
        out.mask[r * in.cols + col] = 1;
        for (int ch = 0; ch < in.channels; ++ch) out.at(ch, r, col) = acc[ch] / wsum;
      }
    }
  }
  return out;
}

// Score volume by direct evaluation of the masked score at every hypothesis.
// The online pivot sits on the map-window pivot at the window's center cell.
inline std::vector<double> ScoreVolume(const Field& online, const Field& map,
                                       const SearchWindow& window,
                                       bool per_offset = false) {
  std::vector<double> out(window.size(), 0.0);
  const int map_count = map.Count();
  for (int t = 0; t < window.theta_cells; ++t) {
    const double theta = (t - window.theta_cells / 2) * window.theta_step;
    const Field rot = theta == 0.0 ? online : Rotate(online, theta);
    const int rot_count = rot.Count();
    for (int iy = 0; iy < window.y_cells; ++iy) {
      for (int ix = 0; ix < window.x_cells; ++ix) {
        const int r0 = map.rows / 2 - online.rows / 2 + iy - window.y_cells / 2;
        const int c0 = map.cols / 2 - online.cols / 2 + ix - window.x_cells / 2;
        double inner = 0.0;
        long overlap = 0;
        for (int r = 0; r < online.rows; ++r) {
          for (int c = 0; c < online.cols; ++c) {
            if (!rot.m(r, c) || !map.m(r + r0, c + c0)) continue;
            ++overlap;
            for (int ch = 0; ch < online.channels; ++ch) {
              inner += rot.at(ch, r, c) * map.at(ch, r + r0, c + c0);
            }
          }
        }
        const double denom =
            per_offset ? static_cast<double>(overlap)
                       : static_cast<double>(rot_count) * map_count;
        out[window.Index(t, iy, ix)] = denom > 0 ? inner / denom : 0.0;
      }
    }
  }
  return out;
}

inline double SoftmaxNll(const std::vector<double>& logits, int gt) {
  double m = logits[0];
  for (double z : logits) m = std::max(m, z);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  return -(logits[gt] - m - std::log(sum));
}

// Network parameters as plain double arrays.
struct Layer {
  LayerSpec spec;
  std::vector<double> kernel, bias, scale, shift;
};

inline std::vector<Layer> ToLayers(const FcnParams& p) {
  std::vector<Layer> out;
  for (std::size_t i = 0; i < p.spec.layers.size(); ++i) {
    const auto& lp = p.layers[i];
    out.push_back({p.spec.layers[i],
                   {lp.kernel.begin(), lp.kernel.end()},
                   {lp.bias.begin(), lp.bias.end()},
                   {lp.scale.begin(), lp.scale.end()},
                   {lp.shift.begin(), lp.shift.end()}});
  }
  return out;
}

// Pointers to every parameter in the library's flat order.
inline std::vector<double*> ParameterPointers(std::vector<Layer>& layers) {
  std::vector<double*> out;
  for (Layer& l : layers) {
    for (double& v : l.kernel) out.push_back(&v);
    for (double& v : l.bias) out.push_back(&v);
    for (double& v : l.scale) out.push_back(&v);
    for (double& v : l.shift) out.push_back(&v);
  }
  return out;
}

// Zero-padded same-size cross-correlation, then optional instance
// normalization, then the activation.
inline Field LayerForward(const Layer& l, const Field& x) {
  const int k = l.spec.kernel, pad = k / 2;
  Field y{l.spec.out_channels, x.rows, x.cols,
          std::vector<double>(static_cast<std::size_t>(l.spec.out_channels) *
                              x.rows * x.cols),
          x.mask};
  for (int o = 0; o < y.channels; ++o) {
    for (int r = 0; r < x.rows; ++r) {
      for (int c = 0; c < x.cols; ++c) {
        double sum = l.bias[o];
        for (int i = 0; i < x.channels; ++i)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int rr = r + ky - pad, cc = c + kx - pad;
              if (rr < 0 || cc < 0 || rr >= x.rows || cc >= x.cols) continue;
              sum += l.kernel[((o * x.channels + i) * k + ky) * k + kx] *
                     x.at(i, rr, cc);
            }
        y.at(o, r, c) = sum;
      }
    }
    if (l.spec.instance_norm) {
      const int n = x.rows * x.cols;
      double mean = 0.0, var = 0.0;
      for (int j = 0; j < n; ++j) mean += y.v[o * n + j];
      mean /= n;
      for (int j = 0; j < n; ++j) var += (y.v[o * n + j] - mean) * (y.v[o * n + j] - mean);
      var /= n;
      const double inv = 1.0 / std::sqrt(var + kInstanceNormEps);
      for (int j = 0; j < n; ++j) {
        y.v[o * n + j] = (y.v[o * n + j] - mean) * inv * l.scale[o] + l.shift[o];
      }
    }
  }
  if (l.spec.activation == Activation::kLeakyRelu) {
    for (double& v : y.v) v = v < 0 ? kLeakySlope * v : v;
  }
  return y;
}

inline Field NetworkForward(const std::vector<Layer>& layers, Field x) {
  for (const Layer& l : layers) x = LayerForward(l, x);
  return x;
}

inline Field FromGrid(const BevGrid& g) {
  Field f{1, g.rows(), g.cols(), {}, {}};
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c) {
      f.v.push_back(g.value(r, c));
      f.mask.push_back(g.observed(r, c));
    }
  return f;
}

// Cross-entropy of a training sample: both networks, rotation, masked
// correlation with global normalization, softmax over score * map count / T.
inline double PipelineLoss(const TrainSample& sample,
                           const std::vector<Layer>& online_net,
                           const std::vector<Layer>& map_net,
                           double temperature) {
  const Field online = NetworkForward(online_net, FromGrid(sample.online));
  const Field map = NetworkForward(map_net, FromGrid(sample.map_window));
  std::vector<double> logits = ScoreVolume(online, map, sample.window);
  const double scale = map.Count() / temperature;
  for (double& z : logits) z *= scale;
  return SoftmaxNll(logits, sample.gt_index);
}

}  // namespace bevloc::oracle

#endif  // BEVLOC_TESTS_ORACLES_H_

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

#include "bevloc/matching.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace bevloc {

SearchWindow SearchWindow::FromRanges(double x_range, double y_range,
                                      double theta_range, int theta_cells,
                                      double resolution, const Pose2D& center) {
  SearchWindow w;
  w.resolution = resolution;
  w.x_cells = static_cast<int>(std::lround(x_range / resolution)) + 1;
  w.y_cells = static_cast<int>(std::lround(y_range / resolution)) + 1;
  w.theta_cells = theta_cells;
  w.theta_step = theta_range / theta_cells;
  w.center = center;
  w.Validate();
  return w;
}

Pose2D SearchWindow::CellOffset(int t, int iy, int ix) const {
  return {(ix - half_x()) * resolution, (iy - half_y()) * resolution,
          (t - half_theta()) * theta_step};
}

Pose2D SearchWindow::CellPose(int t, int iy, int ix) const {
  return Compose(center, CellOffset(t, iy, ix));
}

void SearchWindow::Validate() const {
  if (x_cells <= 0 || y_cells <= 0 || theta_cells <= 0 || x_cells % 2 == 0 ||
      y_cells % 2 == 0 || theta_cells % 2 == 0) {
    throw std::invalid_argument("SearchWindow: cell counts must be odd");
  }
  if (!(resolution > 0.0) || !(theta_step >= 0.0)) {
    throw std::invalid_argument("SearchWindow: bad resolution");
  }
}

std::vector<double> RotationCandidates(const SearchWindow& window) {
  window.Validate();
  std::vector<double> out;
  for (int t = 0; t < window.theta_cells; ++t) {
    out.push_back((t - window.half_theta()) * window.theta_step);
  }
  return out;
}

int MaskedEmbedding::ObservedCount() const {
  int n = 0;
  for (std::uint8_t m : mask) n += m != 0;
  return n;
}

Tensor3 MaskedEmbedding::Masked() const {
  Tensor3 out = values;
  for (int c = 0; c < out.channels; ++c) {
    auto p = out.plane(c);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!mask[i]) p[i] = 0.f;
    }
  }
  return out;
}

MaskedEmbedding MakeMaskedEmbedding(Tensor3 values, const BevGrid& source) {
  if (values.rows != source.rows() || values.cols != source.cols()) {
    throw std::invalid_argument("MakeMaskedEmbedding: shape mismatch");
  }
  MaskedEmbedding e;
  e.values = std::move(values);
  e.mask.assign(source.mask().begin(), source.mask().end());
  return e;
}

double MaskedScore(const Tensor3& a, std::span<const std::uint8_t> mask_a,
                   const Tensor3& b, std::span<const std::uint8_t> mask_b) {
  if (!a.SameShape(b) || mask_a.size() != mask_b.size() ||
      static_cast<int>(mask_a.size()) != a.plane_size()) {
    throw std::invalid_argument("MaskedScore: dimension mismatch");
  }
  long count_a = 0, count_b = 0;
  for (std::size_t i = 0; i < mask_a.size(); ++i) {
    count_a += mask_a[i] != 0;
    count_b += mask_b[i] != 0;
  }
  if (count_a == 0 || count_b == 0) return 0.0;
  double inner = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    auto pa = a.plane(c);
    auto pb = b.plane(c);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      if (mask_a[i] && mask_b[i]) {
        inner += static_cast<double>(pa[i]) * static_cast<double>(pb[i]);
      }
    }
  }
  return inner / (static_cast<double>(count_a) * static_cast<double>(count_b));
}

int FftFriendlySize(int n) {
  for (int m = std::max(n + n % 2, 2);; m += 2) {
    int r = m;
    for (int p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

namespace {

struct FftwFree {
  void operator()(void* p) const { fftwf_free(p); }
};
using RealBuffer = std::unique_ptr<float[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftwf_complex[], FftwFree>;

RealBuffer AllocReal(std::size_t n) {
  return RealBuffer(static_cast<float*>(fftwf_malloc(sizeof(float) * n)));
}
ComplexBuffer AllocComplex(std::size_t n) {
  return ComplexBuffer(
      static_cast<fftwf_complex*>(fftwf_malloc(sizeof(fftwf_complex) * n)));
}

}  // namespace

struct Matcher::FftPlan {
  int rows = 0, cols = 0;  // padded real size
  int spectrum_cols = 0;
  RealBuffer real;
  ComplexBuffer spectrum;
  ComplexBuffer accum;
  std::vector<ComplexBuffer> map_spectra;
  ComplexBuffer map_mask_spectrum;
  fftwf_plan forward = nullptr;
  fftwf_plan inverse = nullptr;

  std::size_t real_size() const {
    return static_cast<std::size_t>(rows) * cols;
  }
  std::size_t spectrum_size() const {
    return static_cast<std::size_t>(rows) * spectrum_cols;
  }

  FftPlan(int r, int c) : rows(r), cols(c), spectrum_cols(c / 2 + 1) {
    real = AllocReal(real_size());
    spectrum = AllocComplex(spectrum_size());
    accum = AllocComplex(spectrum_size());
    forward = fftwf_plan_dft_r2c_2d(rows, cols, real.get(), spectrum.get(),
                                    FFTW_ESTIMATE);
    inverse = fftwf_plan_dft_c2r_2d(rows, cols, accum.get(), real.get(),
                                    FFTW_ESTIMATE);
    if (!forward || !inverse) throw std::runtime_error("FFTW planning failed");
  }
  ~FftPlan() {
    fftwf_destroy_plan(forward);
    fftwf_destroy_plan(inverse);
  }

  // Zero-pads a rows x cols plane into the real buffer and transforms it into
  // `out`.
  void Transform(std::span<const float> plane, int prow, int pcol,
                 fftwf_complex* out) {
    std::fill(real.get(), real.get() + real_size(), 0.f);
    for (int r = 0; r < prow; ++r) {
      std::copy(plane.begin() + static_cast<std::ptrdiff_t>(r) * pcol,
                plane.begin() + static_cast<std::ptrdiff_t>(r + 1) * pcol,
                real.get() + static_cast<std::size_t>(r) * cols);
    }
    fftwf_execute_dft_r2c(forward, real.get(), out);
  }

  // accum += conj(kernel) * map
  void AccumulateCorrelation(const fftwf_complex* kernel,
                             const fftwf_complex* map) {
    const std::size_t n = spectrum_size();
    for (std::size_t i = 0; i < n; ++i) {
      const float kr = kernel[i][0], ki = kernel[i][1];
      const float mr = map[i][0], mi = map[i][1];
      accum[i][0] += kr * mr + ki * mi;
      accum[i][1] += kr * mi - ki * mr;
    }
  }

  void ClearAccum() {
    std::fill(&accum[0][0], &accum[0][0] + 2 * spectrum_size(), 0.f);
  }

  // Inverse transform of accum into the real buffer (unnormalized).
  void InverseAccum() { fftwf_execute_dft_c2r(inverse, accum.get(), real.get()); }
};

Matcher::Matcher(ScoreNormalization normalization)
    : normalization_(normalization) {}

Matcher::~Matcher() = default;

const BilinearResampler& Matcher::RotationResampler(int rows, int cols,
                                                    double theta) {
  const auto key = std::make_tuple(rows, cols, theta);
  auto it = rotations_.find(key);
  if (it == rotations_.end()) {
    it = rotations_
             .emplace(key, BilinearResampler::RigidMotion(rows, cols, 1.0,
                                                          {0.0, 0.0, theta}))
             .first;
  }
  return it->second;
}

Matcher::FftPlan& Matcher::PlanFor(int rows, int cols) {
  const auto key = std::make_pair(FftFriendlySize(rows), FftFriendlySize(cols));
  auto it = plans_.find(key);
  if (it == plans_.end()) {
    it = plans_.emplace(key, std::make_unique<FftPlan>(key.first, key.second))
             .first;
  }
  return *it->second;
}

RotatedEmbedding Matcher::Rotate(const MaskedEmbedding& online, double theta) {
  const int rows = online.rows();
  const int cols = online.cols();
  RotatedEmbedding out;
  out.mask.resize(static_cast<std::size_t>(rows) * cols);
  out.values = Tensor3(online.channels(), rows, cols);
  if (theta == 0.0) {
    out.mask = online.mask;
    out.values = online.Masked();
  } else {
    RotationResampler(rows, cols, theta)
        .Apply(online.channels(), online.values.values, online.mask,
               out.values.values, out.mask);
  }
  for (std::uint8_t m : out.mask) out.count += m != 0;
  return out;
}

std::pair<int, int> Matcher::BaseOffset(const MaskedEmbedding& online,
                                        const MaskedEmbedding& map_window,
                                        const SearchWindow& window) const {
  window.Validate();
  if (online.channels() != map_window.channels()) {
    throw std::invalid_argument("Matcher: channel count mismatch");
  }
  if (static_cast<int>(online.mask.size()) != online.values.plane_size() ||
      static_cast<int>(map_window.mask.size()) !=
          map_window.values.plane_size()) {
    throw std::invalid_argument("Matcher: mask shape mismatch");
  }
  const int base_row = map_window.rows() / 2 - online.rows() / 2 - window.half_y();
  const int base_col = map_window.cols() / 2 - online.cols() / 2 - window.half_x();
  if (base_row < 0 || base_col < 0 ||
      base_row + window.y_cells - 1 + online.rows() > map_window.rows() ||
      base_col + window.x_cells - 1 + online.cols() > map_window.cols()) {
    throw std::invalid_argument(
        "Matcher: map window too small for the search window");
  }
  return {base_row, base_col};
}

ScoreVolume Matcher::Spatial(const MaskedEmbedding& online,
                             const MaskedEmbedding& map_window,
                             const SearchWindow& window) {
  const auto [base_row, base_col] = BaseOffset(online, map_window, window);
  const Tensor3 map = map_window.Masked();
  const int map_count = map_window.ObservedCount();
  const int rows = online.rows();
  const int cols = online.cols();
  const int mcols = map_window.cols();

  ScoreVolume volume;
  volume.window = window;
  volume.scores.assign(window.size(), 0.f);
  volume.cell_scale =
      normalization_ == ScoreNormalization::kGlobal ? map_count : 1.0;
  const std::vector<double> thetas = RotationCandidates(window);
  for (int t = 0; t < window.theta_cells; ++t) {
    const RotatedEmbedding rot = Rotate(online, thetas[t]);
    if (rot.count == 0 || map_count == 0) continue;
    for (int iy = 0; iy < window.y_cells; ++iy) {
      for (int ix = 0; ix < window.x_cells; ++ix) {
        const int r_off = base_row + iy;
        const int c_off = base_col + ix;
        double inner = 0.0;
        long overlap = 0;
        for (int ch = 0; ch < online.channels(); ++ch) {
          for (int r = 0; r < rows; ++r) {
            const float* k = rot.values.row(ch, r);
            const float* m = map.row(ch, r + r_off) + c_off;
            double acc = 0.0;
            for (int c = 0; c < cols; ++c) {
              acc += static_cast<double>(k[c]) * static_cast<double>(m[c]);
            }
            inner += acc;
          }
        }
        double denom;
        if (normalization_ == ScoreNormalization::kGlobal) {
          denom = static_cast<double>(rot.count) * map_count;
        } else {
          for (int r = 0; r < rows; ++r) {
            const std::uint8_t* mk = &rot.mask[static_cast<std::size_t>(r) * cols];
            const std::uint8_t* mm =
                &map_window.mask[static_cast<std::size_t>(r + r_off) * mcols + c_off];
            for (int c = 0; c < cols; ++c) overlap += (mk[c] && mm[c]);
          }
          denom = static_cast<double>(overlap);
        }
        volume.scores[window.Index(t, iy, ix)] =
            denom > 0 ? static_cast<float>(inner / denom) : 0.f;
      }
    }
  }
  return volume;
}

ScoreVolume Matcher::Fft(const MaskedEmbedding& online,
                         const MaskedEmbedding& map_window,
                         const SearchWindow& window) {
  const auto [base_row, base_col] = BaseOffset(online, map_window, window);
  const int map_count = map_window.ObservedCount();
  const int channels = online.channels();
  const int rows = online.rows();
  const int cols = online.cols();

  ScoreVolume volume;
  volume.window = window;
  volume.scores.assign(window.size(), 0.f);
  volume.cell_scale =
      normalization_ == ScoreNormalization::kGlobal ? map_count : 1.0;
  if (map_count == 0) return volume;

  FftPlan& plan = PlanFor(map_window.rows(), map_window.cols());
  const double inv_n = 1.0 / static_cast<double>(plan.real_size());
  while (static_cast<int>(plan.map_spectra.size()) < channels) {
    plan.map_spectra.push_back(AllocComplex(plan.spectrum_size()));
  }
  const Tensor3 map = map_window.Masked();
  for (int ch = 0; ch < channels; ++ch) {
    plan.Transform(map.plane(ch), map_window.rows(), map_window.cols(),
                   plan.map_spectra[ch].get());
  }
  const bool per_offset = normalization_ == ScoreNormalization::kPerOffset;
  std::vector<float> mask_plane;
  if (per_offset) {
    if (!plan.map_mask_spectrum) {
      plan.map_mask_spectrum = AllocComplex(plan.spectrum_size());
    }
    mask_plane.assign(map_window.mask.begin(), map_window.mask.end());
    plan.Transform(mask_plane, map_window.rows(), map_window.cols(),
                   plan.map_mask_spectrum.get());
  }

  std::vector<double> numerators(static_cast<std::size_t>(window.y_cells) *
                                 window.x_cells);
  const std::vector<double> thetas = RotationCandidates(window);
  for (int t = 0; t < window.theta_cells; ++t) {
    const RotatedEmbedding rot = Rotate(online, thetas[t]);
    if (rot.count == 0) continue;
    plan.ClearAccum();
    for (int ch = 0; ch < channels; ++ch) {
      plan.Transform(rot.values.plane(ch), rows, cols, plan.spectrum.get());
      plan.AccumulateCorrelation(plan.spectrum.get(),
                                 plan.map_spectra[ch].get());
    }
    plan.InverseAccum();
    for (int iy = 0; iy < window.y_cells; ++iy) {
      for (int ix = 0; ix < window.x_cells; ++ix) {
        numerators[iy * window.x_cells + ix] =
            plan.real[static_cast<std::size_t>(base_row + iy) * plan.cols +
                      base_col + ix] *
            inv_n;
      }
    }
    if (!per_offset) {
      const double denom = static_cast<double>(rot.count) * map_count;
      for (int iy = 0; iy < window.y_cells; ++iy) {
        for (int ix = 0; ix < window.x_cells; ++ix) {
          volume.scores[window.Index(t, iy, ix)] =
              static_cast<float>(numerators[iy * window.x_cells + ix] / denom);
        }
      }
      continue;
    }
    mask_plane.assign(rot.mask.begin(), rot.mask.end());
    plan.ClearAccum();
    plan.Transform(mask_plane, rows, cols, plan.spectrum.get());
    plan.AccumulateCorrelation(plan.spectrum.get(),
                               plan.map_mask_spectrum.get());
    plan.InverseAccum();
    for (int iy = 0; iy < window.y_cells; ++iy) {
      for (int ix = 0; ix < window.x_cells; ++ix) {
        const double overlap = std::round(
            plan.real[static_cast<std::size_t>(base_row + iy) * plan.cols +
                      base_col + ix] *
            inv_n);
        volume.scores[window.Index(t, iy, ix)] =
            overlap > 0 ? static_cast<float>(
                              numerators[iy * window.x_cells + ix] / overlap)
                        : 0.f;
      }
    }
  }
  return volume;
}

Matcher::InputGradients Matcher::Backward(const MaskedEmbedding& online,
                                          const MaskedEmbedding& map_window,
                                          const SearchWindow& window,
                                          std::span<const double> score_grad) {
  const auto [base_row, base_col] = BaseOffset(online, map_window, window);
  if (static_cast<int>(score_grad.size()) != window.size()) {
    throw std::invalid_argument("Matcher::Backward: gradient shape mismatch");
  }
  const int channels = online.channels();
  const int rows = online.rows();
  const int cols = online.cols();
  const int mcols = map_window.cols();
  const int map_count = map_window.ObservedCount();
  const Tensor3 map = map_window.Masked();

  InputGradients grads{Tensor3(channels, rows, cols),
                       Tensor3(channels, map_window.rows(), mcols)};
  if (map_count == 0) return grads;
  const std::vector<double> thetas = RotationCandidates(window);
  std::vector<float> rotated_grad(static_cast<std::size_t>(rows) * cols);
  std::vector<double> dnum(static_cast<std::size_t>(window.y_cells) *
                           window.x_cells);
  for (int t = 0; t < window.theta_cells; ++t) {
    const RotatedEmbedding rot = Rotate(online, thetas[t]);
    if (rot.count == 0) continue;
    for (int iy = 0; iy < window.y_cells; ++iy) {
      for (int ix = 0; ix < window.x_cells; ++ix) {
        double denom;
        if (normalization_ == ScoreNormalization::kGlobal) {
          denom = static_cast<double>(rot.count) * map_count;
        } else {
          long overlap = 0;
          for (int r = 0; r < rows; ++r) {
            const std::uint8_t* mk = &rot.mask[static_cast<std::size_t>(r) * cols];
            const std::uint8_t* mm =
                &map_window.mask[static_cast<std::size_t>(r + base_row + iy) *
                                     mcols +
                                 base_col + ix];
            for (int c = 0; c < cols; ++c) overlap += (mk[c] && mm[c]);
          }
          denom = static_cast<double>(overlap);
        }
        dnum[iy * window.x_cells + ix] =
            denom > 0 ? score_grad[window.Index(t, iy, ix)] / denom : 0.0;
      }
    }
    for (int ch = 0; ch < channels; ++ch) {
      std::fill(rotated_grad.begin(), rotated_grad.end(), 0.f);
      for (int iy = 0; iy < window.y_cells; ++iy) {
        for (int ix = 0; ix < window.x_cells; ++ix) {
          const float g = static_cast<float>(dnum[iy * window.x_cells + ix]);
          if (g == 0.f) continue;
          for (int r = 0; r < rows; ++r) {
            const float* k = rot.values.row(ch, r);
            const float* m = map.row(ch, r + base_row + iy) + base_col + ix;
            float* dk = &rotated_grad[static_cast<std::size_t>(r) * cols];
            float* dm = grads.map_window.row(ch, r + base_row + iy) + base_col + ix;
            for (int c = 0; c < cols; ++c) {
              dk[c] += g * m[c];
              dm[c] += g * k[c];
            }
          }
        }
      }
      if (thetas[t] == 0.0) {
        auto dst = grads.online.plane(ch);
        for (std::size_t i = 0; i < rotated_grad.size(); ++i) {
          if (rot.mask[i]) dst[i] += rotated_grad[i];
        }
      } else {
        RotationResampler(rows, cols, thetas[t])
            .Backward(1, rotated_grad, online.mask, rot.mask,
                      grads.online.plane(ch));
      }
    }
  }
  for (int ch = 0; ch < channels; ++ch) {
    auto d_on = grads.online.plane(ch);
    for (std::size_t i = 0; i < d_on.size(); ++i) {
      if (!online.mask[i]) d_on[i] = 0.f;
    }
    auto d_map = grads.map_window.plane(ch);
    for (std::size_t i = 0; i < d_map.size(); ++i) {
      if (!map_window.mask[i]) d_map[i] = 0.f;
    }
  }
  return grads;
}

ScoreVolume ScoreVolumeSpatial(const MaskedEmbedding& online,
                               const MaskedEmbedding& map_window,
                               const SearchWindow& window,
                               ScoreNormalization normalization) {
  Matcher matcher(normalization);
  return matcher.Spatial(online, map_window, window);
}

ScoreVolume ScoreVolumeFft(const MaskedEmbedding& online,
                           const MaskedEmbedding& map_window,
                           const SearchWindow& window,
                           ScoreNormalization normalization) {
  Matcher matcher(normalization);
  return matcher.Fft(online, map_window, window);
}

}  // namespace bevloc

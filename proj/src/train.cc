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

#include "bevloc/train.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "bevloc/filter.h"

namespace bevloc {
namespace {

struct NetworkPass {
  Tensor3 output;
  ForwardCache<float> cache;
};

NetworkPass RunNetwork(const FcnParams& net, const BevGrid& grid, bool keep_cache) {
  NetworkPass pass;
  const Tensor3 input = ToTensor(grid);
  if (net.spec.is_identity()) {
    pass.output = input;
  } else {
    pass.output = Forward(net, input, keep_cache ? &pass.cache : nullptr);
  }
  return pass;
}

std::vector<double> Logits(const ScoreVolume& volume, double temperature) {
  std::vector<double> z(volume.scores.size());
  const double k = volume.cell_scale / temperature;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = volume.scores[i] * k;
  return z;
}

void CheckGt(const ScoreVolume& volume, int gt_index) {
  if (gt_index < 0 || gt_index >= volume.size()) {
    throw std::out_of_range("ground-truth cell outside the score volume");
  }
}

}  // namespace

void TrainSample::Validate() const {
  window.Validate();
  if (gt_index < 0 || gt_index >= window.size()) {
    throw std::invalid_argument("TrainSample: ground truth outside the window");
  }
}

void TrainConfig::Validate() const {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("TrainConfig: learning rate must be positive");
  }
  if (!(decay > 0.0) || batch_size < 1 || epochs < 0 || !(temperature > 0.0)) {
    throw std::invalid_argument("TrainConfig: bad schedule");
  }
}

double Loss(const ScoreVolume& volume, int gt_index, double temperature) {
  CheckGt(volume, gt_index);
  const std::vector<double> z = Logits(volume, temperature);
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  return std::log(sum) + zmax - z[gt_index];
}

std::vector<double> LossGradient(const ScoreVolume& volume, int gt_index,
                                 double temperature) {
  CheckGt(volume, gt_index);
  std::vector<double> g = Logits(volume, temperature);
  const double zmax = *std::max_element(g.begin(), g.end());
  double sum = 0.0;
  for (double& v : g) {
    v = std::exp(v - zmax);
    sum += v;
  }
  const double k = volume.cell_scale / temperature;
  for (double& v : g) v = v / sum * k;
  g[gt_index] -= k;
  return g;
}

ScoreVolume SampleScores(const TrainSample& sample, const FcnParams& online_net,
                         const FcnParams& map_net, Matcher& matcher) {
  const NetworkPass on = RunNetwork(online_net, sample.online, false);
  const NetworkPass mp = RunNetwork(map_net, sample.map_window, false);
  return matcher.Fft(MakeMaskedEmbedding(on.output, sample.online),
                     MakeMaskedEmbedding(mp.output, sample.map_window),
                     sample.window);
}

SampleGradients LossBackward(const TrainSample& sample, const FcnParams& online_net,
                             const FcnParams& map_net, const TrainConfig& config,
                             Matcher& matcher) {
  sample.Validate();
  const NetworkPass on = RunNetwork(online_net, sample.online, true);
  const NetworkPass mp = RunNetwork(map_net, sample.map_window, true);
  const MaskedEmbedding online = MakeMaskedEmbedding(on.output, sample.online);
  const MaskedEmbedding map = MakeMaskedEmbedding(mp.output, sample.map_window);

  SampleGradients out;
  out.volume = matcher.Fft(online, map, sample.window);
  out.loss = Loss(out.volume, sample.gt_index, config.temperature);
  const std::vector<double> dscore =
      LossGradient(out.volume, sample.gt_index, config.temperature);
  const Matcher::InputGradients g =
      matcher.Backward(online, map, sample.window, dscore);
  if (!online_net.spec.is_identity()) {
    out.online = Backward(online_net, on.cache, g.online).params;
  }
  if (!map_net.spec.is_identity()) {
    out.map = Backward(map_net, mp.cache, g.map_window).params;
  }
  return out;
}

bool Top1Correct(const ScoreVolume& volume, int gt_index) {
  const SearchWindow& w = volume.window;
  const std::vector<double> s(volume.scores.begin(), volume.scores.end());
  const int best = HardArgmaxIndex(w, s);
  const int plane = w.x_cells * w.y_cells;
  const int by = (best % plane) / w.x_cells, bx = best % w.x_cells;
  const int gy = (gt_index % plane) / w.x_cells, gx = gt_index % w.x_cells;
  return std::abs(by - gy) <= 1 && std::abs(bx - gx) <= 1;
}

double Top1Accuracy(std::span<const TrainSample> samples,
                    const FcnParams& online_net, const FcnParams& map_net,
                    ScoreNormalization normalization) {
  if (samples.empty()) throw std::invalid_argument("Top1Accuracy: no samples");
  Matcher matcher(normalization);
  int correct = 0;
  for (const TrainSample& s : samples) {
    correct += Top1Correct(SampleScores(s, online_net, map_net, matcher),
                           s.gt_index);
  }
  return 100.0 * correct / static_cast<double>(samples.size());
}

TrainResult Train(std::span<const TrainSample> dataset, FcnParams online_net,
                  FcnParams map_net, const TrainConfig& config,
                  const std::string& divergence_checkpoint,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.Validate();
  if (dataset.empty()) throw std::invalid_argument("Train: empty dataset");

  TrainResult result{std::move(online_net), std::move(map_net), {}};
  std::vector<float*> params = result.online.Pointers();
  for (float* p : result.map.Pointers()) params.push_back(p);
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  std::vector<double> grad(params.size());
  long adam_step = 0;

  std::mt19937_64 rng(config.seed);
  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Matcher matcher(config.normalization);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = config.learning_rate * std::pow(config.decay, epoch);
    double loss_sum = 0.0;
    int correct = 0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const TrainSample& sample = dataset[order[i]];
        const SampleGradients g = LossBackward(sample, result.online, result.map,
                                               config, matcher);
        if (!std::isfinite(g.loss)) {
          if (!divergence_checkpoint.empty()) {
            SaveCheckpoint({result.online, result.map}, divergence_checkpoint);
          }
          throw std::runtime_error("Train: loss diverged in epoch " +
                                   std::to_string(epoch + 1));
        }
        loss_sum += g.loss;
        correct += Top1Correct(g.volume, sample.gt_index);
        std::size_t k = 0;
        for (const FcnParams* part : {&g.online, &g.map}) {
          for (const float* p : part->Pointers()) grad[k++] += *p;
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      ++adam_step;
      const double c1 = 1.0 - std::pow(config.beta1, adam_step);
      const double c2 = 1.0 - std::pow(config.beta2, adam_step);
      for (std::size_t k = 0; k < params.size(); ++k) {
        const double g = grad[k] * inv;
        m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g;
        v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g * g;
        *params[k] -= static_cast<float>(lr * (m[k] / c1) /
                                         (std::sqrt(v[k] / c2) + config.adam_eps));
      }
    }
    EpochMetrics metrics;
    metrics.epoch = epoch + 1;
    metrics.mean_loss = loss_sum / static_cast<double>(dataset.size());
    metrics.top1 = 100.0 * correct / static_cast<double>(dataset.size());
    result.history.push_back(metrics);
    if (on_epoch) on_epoch(metrics);
  }
  return result;
}

int ReceptiveMargin(const FcnSpec& spec) {
  int margin = 0;
  for (const LayerSpec& l : spec.layers) margin += l.kernel / 2;
  return margin;
}

std::vector<TrainSample> MakeTrainSamples(const BevGrid& map,
                                          std::span<const DriveStep> steps,
                                          std::span<const int> frames,
                                          const SampleSpec& spec,
                                          std::uint64_t seed) {
  spec.window.Validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ox(-spec.max_offset_x, spec.max_offset_x);
  std::uniform_real_distribution<double> oy(-spec.max_offset_y, spec.max_offset_y);
  std::uniform_int_distribution<int> cx(0, spec.window.x_cells - 1);
  std::uniform_int_distribution<int> cy(0, spec.window.y_cells - 1);
  std::uniform_int_distribution<int> ct(0, spec.window.theta_cells - 1);
  const double res = map.resolution();
  const int raster_rows = 2 * static_cast<int>(std::ceil(spec.max_offset_y / res)) +
                          spec.online_rows + 2;
  const int raster_cols = 2 * static_cast<int>(std::ceil(spec.max_offset_x / res)) +
                          spec.online_cols + 2;
  const int min_observed = static_cast<int>(
      spec.min_observed_fraction * spec.online_rows * spec.online_cols);

  std::vector<TrainSample> samples;
  samples.reserve(frames.size());
  for (int t : frames) {
    const std::vector<Sweep> sweeps = RecentSweeps(steps, t, spec.sweeps);
    const BevGrid raster = Rasterize(
        sweeps, GridGeometry::Centered(raster_rows, raster_cols, res, Pose2D{}));
    // Crop centers snap to whole cells so the online crop is an exact copy.
    BevGrid online;
    Pose2D crop_center;
    for (int attempt = 0; attempt < 20; ++attempt) {
      crop_center = {std::round(ox(rng) / res) * res,
                     std::round(oy(rng) / res) * res, 0.0};
      online = CropWindow(raster, crop_center, spec.online_rows, spec.online_cols);
      if (online.ObservedCount() >= min_observed) break;
    }
    TrainSample sample;
    sample.online = std::move(online);
    const int t_cell = ct(rng), y_cell = cy(rng), x_cell = cx(rng);
    const Pose2D truth = Compose(steps[t].gt, crop_center);
    sample.window = spec.window;
    sample.window.center =
        Compose(truth, Inverse(spec.window.CellOffset(t_cell, y_cell, x_cell)));
    sample.gt_index = spec.window.Index(t_cell, y_cell, x_cell);
    sample.map_window = CropWindow(
        map, sample.window.center,
        spec.online_rows + spec.window.y_cells - 1 + 2 * spec.map_margin,
        spec.online_cols + spec.window.x_cells - 1 + 2 * spec.map_margin);
    samples.push_back(std::move(sample));
  }
  return samples;
}

}  // namespace bevloc

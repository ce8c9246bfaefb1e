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

#include "bevloc/commands.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "bevloc/drive_io.h"
#include "bevloc/eval.h"
#include "bevloc/grid.h"

namespace bevloc {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Files are written to "<path>.partial" and renamed once every output of the
// command succeeded; anything not committed is deleted.
class OutputSet {
 public:
  ~OutputSet() {
    std::error_code ec;
    for (const auto& [final_path, tmp] : staged_) std::filesystem::remove(tmp, ec);
  }
  std::string Stage(const std::string& path) {
    const std::string tmp = path + ".partial";
    staged_.emplace_back(path, tmp);
    return tmp;
  }
  void Commit() {
    for (const auto& [final_path, tmp] : staged_) {
      std::filesystem::rename(tmp, final_path);
    }
    staged_.clear();
  }

 private:
  std::vector<std::pair<std::string, std::string>> staged_;
};

void WriteText(const std::string& path,
               const std::function<void(std::ostream&)>& writer) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  writer(out);
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path);
}

KeyValueConfig LoadConfig(const std::string& path) {
  return path.empty() ? KeyValueConfig{} : KeyValueConfig::Load(path);
}

// Reads every known section so that leftover keys are typos.
void RejectUnknownKeys(const KeyValueConfig& config) {
  WorldFromConfig(config);
  TrajectoryFromConfig(config);
  NoiseFromConfig(config);
  SensorFromConfig(config);
  LocalizerFromConfig(config);
  TrainFromConfig(config);
  config.GetUint64("seed", 0);
  config.GetInt("train.embedding_dim", 1);
  config.GetInt("train.width", 16);
  config.GetInt("train.depth", 6);
  config.GetInt("train.online_rows", 48);
  config.GetInt("train.online_cols", 64);
  config.GetDouble("train.data_fraction", 1.0);
  const std::vector<std::string> unused = config.UnusedKeys();
  if (!unused.empty()) {
    throw std::invalid_argument("config: unknown key " + unused.front());
  }
}

int Simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
             std::optional<int> steps, const std::string& map_path,
             const std::string& drive_path, const std::string& csv_path,
             std::ostream& out) {
  KeyValueConfig config = LoadConfig(config_path);
  if (seed) {
    config.Set("seed", std::to_string(*seed));
    config.Set("world.seed", std::to_string(*seed));
  }
  if (steps) config.Set("trajectory.steps", std::to_string(*steps));
  RejectUnknownKeys(config);
  const TrajectorySpec trajectory = TrajectoryFromConfig(config);
  if (trajectory.steps < 1) {
    throw std::invalid_argument("simulate: steps must be at least 1");
  }
  const BevGrid map = GenerateMap(WorldFromConfig(config));
  const std::vector<DriveStep> drive =
      SimulateDrive(map, trajectory, NoiseFromConfig(config),
                    SensorFromConfig(config), config.GetUint64("seed", 1));
  OutputSet outputs;
  SaveBevGrid(map, outputs.Stage(map_path));
  SaveDrive(drive, outputs.Stage(drive_path));
  if (!csv_path.empty()) {
    WriteText(outputs.Stage(csv_path),
              [&](std::ostream& o) { WriteDriveCsv(drive, o); });
  }
  outputs.Commit();
  out << "simulate: map " << map.rows() << "x" << map.cols() << ", "
      << drive.size() << " steps -> " << drive_path << "\n";
  return 0;
}

std::vector<int> SelectFrames(int count, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("data fraction must be in (0, 1]");
  }
  std::vector<int> frames(count);
  std::iota(frames.begin(), frames.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(frames.begin(), frames.end(), rng);
  const int keep = std::max(1, static_cast<int>(std::lround(fraction * count)));
  frames.resize(std::min(keep, count));
  std::sort(frames.begin(), frames.end());
  return frames;
}

struct TrainArgs {
  std::string config_path, map_path, checkpoint_path, metrics_path;
  std::vector<std::string> drive_paths;
  std::optional<int> epochs, batch, embedding_dim, width;
  std::optional<double> learning_rate, data_fraction;
  std::optional<std::uint64_t> seed;
};

int TrainCommand(const TrainArgs& args, std::ostream& out) {
  KeyValueConfig config = LoadConfig(args.config_path);
  auto set = [&](const char* key, const auto& v) {
    if (v) {
      std::ostringstream s;
      s << std::setprecision(17) << *v;
      config.Set(key, s.str());
    }
  };
  set("train.epochs", args.epochs);
  set("train.batch_size", args.batch);
  set("train.embedding_dim", args.embedding_dim);
  set("train.width", args.width);
  set("train.learning_rate", args.learning_rate);
  set("train.data_fraction", args.data_fraction);
  set("train.seed", args.seed);
  RejectUnknownKeys(config);

  const TrainConfig train = TrainFromConfig(config);
  const FcnSpec spec = FcnSpec::Default(config.GetInt("train.embedding_dim", 1),
                                        config.GetInt("train.width", 16),
                                        config.GetInt("train.depth", 6));
  SampleSpec sample_spec;
  sample_spec.online_rows = config.GetInt("train.online_rows", 48);
  sample_spec.online_cols = config.GetInt("train.online_cols", 64);
  sample_spec.window = LocalizerFromConfig(config).window;
  sample_spec.map_margin = ReceptiveMargin(spec);
  const double fraction = config.GetDouble("train.data_fraction", 1.0);

  const BevGrid map = LoadBevGrid(args.map_path);
  std::vector<TrainSample> dataset;
  for (std::size_t i = 0; i < args.drive_paths.size(); ++i) {
    const std::vector<DriveStep> drive = LoadDrive(args.drive_paths[i]);
    const std::vector<int> frames = SelectFrames(
        static_cast<int>(drive.size()), fraction, train.seed + 1000 * (i + 1));
    std::vector<TrainSample> part =
        MakeTrainSamples(map, drive, frames, sample_spec, train.seed + i);
    std::move(part.begin(), part.end(), std::back_inserter(dataset));
  }
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");

  OutputSet outputs;
  const std::string checkpoint_tmp = outputs.Stage(args.checkpoint_path);
  const TrainResult result =
      Train(dataset, InitParams(spec, train.seed), InitParams(spec, train.seed + 1),
            train, args.checkpoint_path + ".diverged",
            [&](const EpochMetrics& m) {
              out << "epoch " << m.epoch << " loss " << m.mean_loss << " top1 "
                  << m.top1 << "%\n";
            });
  SaveCheckpoint({result.online, result.map}, checkpoint_tmp);
  if (!args.metrics_path.empty()) {
    WriteText(outputs.Stage(args.metrics_path), [&](std::ostream& o) {
      o << "epoch,mean_loss,top1_acc\n" << std::setprecision(10);
      for (const EpochMetrics& m : result.history) {
        o << m.epoch << ',' << m.mean_loss << ',' << m.top1 << '\n';
      }
    });
  }
  outputs.Commit();
  out << "train: " << dataset.size() << " samples, " << train.epochs
      << " epochs -> " << args.checkpoint_path << "\n";
  return 0;
}

struct LocalizeArgs {
  std::string config_path, map_path, drive_path, checkpoint_path, out_path,
      report_path, curve_path;
  bool raw = false, no_motion = false, hard_argmax = false, no_gps = false;
  std::optional<double> temperature;
};

int LocalizeCommand(const LocalizeArgs& args, std::ostream& out) {
  KeyValueConfig config = LoadConfig(args.config_path);
  if (args.raw == !args.checkpoint_path.empty()) {
    throw std::invalid_argument("localize: give exactly one of --checkpoint and --raw");
  }
  if (!config.Has("lidar.temperature")) {
    config.Set("lidar.temperature",
               args.raw ? std::to_string(kRawTemperature) : std::string("1"));
  }
  if (args.temperature) {
    std::ostringstream s;
    s << std::setprecision(17) << *args.temperature;
    config.Set("lidar.temperature", s.str());
  }
  RejectUnknownKeys(config);
  LocalizerConfig lc = LocalizerFromConfig(config);
  if (args.no_motion) lc.use_motion = false;
  if (args.hard_argmax) lc.hard_argmax = true;
  if (args.no_gps) lc.use_gps = false;

  const BevGrid map = LoadBevGrid(args.map_path);
  const std::vector<DriveStep> drive = LoadDrive(args.drive_path);
  FcnParams online_net, map_net;
  if (!args.raw) {
    std::vector<FcnParams> nets = LoadCheckpoint(args.checkpoint_path);
    if (nets.size() != 2) {
      throw std::invalid_argument("localize: checkpoint must hold two networks");
    }
    online_net = std::move(nets[0]);
    map_net = std::move(nets[1]);
  }
  const std::vector<TrajectoryRow> rows =
      LocalizeDrive(map, drive, std::move(online_net), std::move(map_net), lc);
  const EvalReport report = Evaluate({{args.drive_path, rows}});

  OutputSet outputs;
  WriteText(outputs.Stage(args.out_path),
            [&](std::ostream& o) { WriteTrajectoryCsv(rows, o); });
  if (!args.report_path.empty()) {
    WriteText(outputs.Stage(args.report_path),
              [&](std::ostream& o) { WriteReportCsv(report, o); });
  }
  if (!args.curve_path.empty()) {
    WriteText(outputs.Stage(args.curve_path),
              [&](std::ostream& o) { WriteErrorVsDistanceCsv(rows, o); });
  }
  outputs.Commit();
  out << std::fixed << std::setprecision(2) << "localize: " << rows.size()
      << " frames, median lat " << report.median_lat_cm << " cm, lon "
      << report.median_lon_cm << " cm, total " << report.median_total_cm
      << " cm, failure " << report.failure_rate[2] << "%\n";
  return 0;
}

int EvalCommand(const std::vector<std::string>& inputs, double threshold,
                const std::string& report_path, const std::string& cumulative_path,
                std::ostream& out) {
  std::vector<NamedTrajectory> trajectories;
  for (const std::string& path : inputs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    trajectories.push_back({path, ReadTrajectoryCsv(in)});
  }
  const EvalReport report = Evaluate(trajectories, threshold);
  OutputSet outputs;
  if (!report_path.empty()) {
    WriteText(outputs.Stage(report_path),
              [&](std::ostream& o) { WriteReportCsv(report, o); });
  }
  if (!cumulative_path.empty()) {
    WriteText(outputs.Stage(cumulative_path),
              [&](std::ostream& o) { WriteCumulativeCsv(report, o); });
  }
  outputs.Commit();
  WriteReportCsv(report, out);
  return 0;
}

struct BenchArgs {
  std::vector<int> channels{1, 2, 4, 8, 12};
  std::vector<std::string> methods{"spatial", "fft"};
  int reps = 100;
  int warmup = 2;
  int rows = 480, cols = 600;
  std::uint64_t seed = 1;
  std::string out_path;
};

int BenchCommand(const BenchArgs& args, std::ostream& out) {
  if (args.reps < 1) throw std::invalid_argument("bench: repetitions must be >= 1");
  if (args.warmup < 0) throw std::invalid_argument("bench: warmup must be >= 0");
  SearchWindow window;
  std::mt19937_64 rng(args.seed);
  std::uniform_real_distribution<float> value(-1.f, 1.f);
  std::bernoulli_distribution observed(0.4);
  std::ostringstream csv;
  csv << "method,channels,kernel,median_ms,mean_ms,min_ms\n" << std::fixed
      << std::setprecision(4);
  for (int channels : args.channels) {
    if (channels < 1) throw std::invalid_argument("bench: channels must be >= 1");
    MaskedEmbedding online{Tensor3(channels, args.rows, args.cols), {}};
    MaskedEmbedding map{Tensor3(channels, args.rows + window.y_cells - 1,
                                args.cols + window.x_cells - 1),
                        {}};
    for (float& v : online.values.values) v = value(rng);
    for (float& v : map.values.values) v = value(rng);
    online.mask.resize(online.values.plane_size());
    map.mask.assign(map.values.plane_size(), 1);
    for (auto& m : online.mask) m = observed(rng);
    for (const std::string& method : args.methods) {
      if (method != "spatial" && method != "fft") {
        throw std::invalid_argument("bench: unknown method " + method);
      }
      Matcher matcher;
      std::vector<double> ms;
      for (int i = 0; i < args.warmup + args.reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const ScoreVolume v = method == "fft" ? matcher.Fft(online, map, window)
                                              : matcher.Spatial(online, map, window);
        const double elapsed = std::chrono::duration<double, std::milli>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count();
        if (v.scores.empty()) throw std::logic_error("bench: empty volume");
        if (i >= args.warmup) ms.push_back(elapsed);
      }
      const double mean = std::accumulate(ms.begin(), ms.end(), 0.0) / ms.size();
      csv << method << ',' << channels << ',' << args.cols << 'x' << args.rows
          << ',' << LowerMedian(ms) << ',' << mean << ','
          << *std::min_element(ms.begin(), ms.end()) << '\n';
    }
  }
  if (!args.out_path.empty()) {
    OutputSet outputs;
    WriteText(outputs.Stage(args.out_path),
              [&](std::ostream& o) { o << csv.str(); });
    outputs.Commit();
  }
  out << csv.str();
  return 0;
}

}  // namespace

WorldConfig WorldFromConfig(const KeyValueConfig& c) {
  WorldConfig w;
  w.length = c.GetDouble("world.length", w.length);
  w.width = c.GetDouble("world.width", w.width);
  w.resolution = c.GetDouble("world.resolution", w.resolution);
  w.base_intensity = c.GetDouble("world.base_intensity", w.base_intensity);
  w.shading_amplitude = c.GetDouble("world.shading_amplitude", w.shading_amplitude);
  w.shading_scale = c.GetDouble("world.shading_scale", w.shading_scale);
  w.texture_amplitude = c.GetDouble("world.texture_amplitude", w.texture_amplitude);
  w.texture_scale = c.GetDouble("world.texture_scale", w.texture_scale);
  w.lane_spacing = c.GetDouble("world.lane_spacing", w.lane_spacing);
  w.lane_marking_width = c.GetDouble("world.lane_marking_width", w.lane_marking_width);
  w.dash_length = c.GetDouble("world.dash_length", w.dash_length);
  w.dash_gap = c.GetDouble("world.dash_gap", w.dash_gap);
  w.marking_intensity = c.GetDouble("world.marking_intensity", w.marking_intensity);
  w.blob_density = c.GetDouble("world.blob_density", w.blob_density);
  w.blob_min_radius = c.GetDouble("world.blob_min_radius", w.blob_min_radius);
  w.blob_max_radius = c.GetDouble("world.blob_max_radius", w.blob_max_radius);
  w.seed = c.GetUint64("world.seed", w.seed);
  return w;
}

TrajectorySpec TrajectoryFromConfig(const KeyValueConfig& c) {
  TrajectorySpec t;
  t.steps = c.GetInt("trajectory.steps", t.steps);
  t.step_length = c.GetDouble("trajectory.step_length", t.step_length);
  t.start_x = c.GetDouble("trajectory.start_x", t.start_x);
  t.lateral_amplitude = c.GetDouble("trajectory.lateral_amplitude", t.lateral_amplitude);
  t.lateral_period = c.GetDouble("trajectory.lateral_period", t.lateral_period);
  t.lane_change_every = c.GetDouble("trajectory.lane_change_every", t.lane_change_every);
  t.lane_change_offset =
      c.GetDouble("trajectory.lane_change_offset", t.lane_change_offset);
  t.lane_change_length =
      c.GetDouble("trajectory.lane_change_length", t.lane_change_length);
  return t;
}

NoiseConfig NoiseFromConfig(const KeyValueConfig& c) {
  NoiseConfig n;
  n.odom_sigma_x = c.GetDouble("noise.odom_sigma_x", n.odom_sigma_x);
  n.odom_sigma_y = c.GetDouble("noise.odom_sigma_y", n.odom_sigma_y);
  n.odom_sigma_theta =
      c.GetDouble("noise.odom_sigma_theta_deg", n.odom_sigma_theta / kDeg) * kDeg;
  n.gain_min = c.GetDouble("noise.gain_min", n.gain_min);
  n.gain_max = c.GetDouble("noise.gain_max", n.gain_max);
  n.bias_min = c.GetDouble("noise.bias_min", n.bias_min);
  n.bias_max = c.GetDouble("noise.bias_max", n.bias_max);
  n.dropout = c.GetDouble("noise.dropout", n.dropout);
  n.intensity_sigma = c.GetDouble("noise.intensity_sigma", n.intensity_sigma);
  n.gps_sigma = c.GetDouble("noise.gps_sigma", n.gps_sigma);
  n.gps_bias_x = c.GetDouble("noise.gps_bias_x", n.gps_bias_x);
  n.gps_bias_y = c.GetDouble("noise.gps_bias_y", n.gps_bias_y);
  n.gps_enabled = c.GetBool("noise.gps_enabled", n.gps_enabled);
  n.Validate();
  return n;
}

SensorConfig SensorFromConfig(const KeyValueConfig& c) {
  SensorConfig s;
  s.rays = c.GetInt("sensor.rays", s.rays);
  s.range_samples = c.GetInt("sensor.range_samples", s.range_samples);
  s.min_range = c.GetDouble("sensor.min_range", s.min_range);
  s.max_range = c.GetDouble("sensor.max_range", s.max_range);
  return s;
}

LocalizerConfig LocalizerFromConfig(const KeyValueConfig& c) {
  LocalizerConfig l;
  l.window.x_cells = c.GetInt("window.x_cells", l.window.x_cells);
  l.window.y_cells = c.GetInt("window.y_cells", l.window.y_cells);
  l.window.theta_cells = c.GetInt("window.theta_cells", l.window.theta_cells);
  l.window.theta_step =
      c.GetDouble("window.theta_step_deg", l.window.theta_step / kDeg) * kDeg;
  l.window.resolution = c.GetDouble("window.resolution", l.window.resolution);
  l.window.Validate();
  l.online_rows = c.GetInt("localize.online_rows", l.online_rows);
  l.online_cols = c.GetInt("localize.online_cols", l.online_cols);
  l.sweeps = c.GetInt("localize.sweeps", l.sweeps);
  l.alpha = c.GetDouble("localize.alpha", l.alpha);
  l.gps_sigma = c.GetDouble("localize.gps_sigma", l.gps_sigma);
  const double sx = c.GetDouble("motion.sigma_x", l.motion.sigma[0]);
  const double sy = c.GetDouble("motion.sigma_y", l.motion.sigma[4]);
  const double st = c.GetDouble("motion.sigma_theta", l.motion.sigma[8]);
  const std::string mode = c.GetString("motion.mode", "gaussian");
  if (mode != "gaussian" && mode != "truncated") {
    throw std::invalid_argument("config: motion.mode must be gaussian or truncated");
  }
  l.motion = MotionModel::Diagonal(
      sx, sy, st,
      mode == "gaussian" ? MotionMode::kGaussian : MotionMode::kTruncatedQuadratic);
  const std::string lidar = c.GetString("lidar.mode", "softmax");
  if (lidar != "softmax" && lidar != "proportional") {
    throw std::invalid_argument("config: lidar.mode must be softmax or proportional");
  }
  l.lidar.mode = lidar == "softmax" ? LidarLikelihoodMode::kSoftmax
                                    : LidarLikelihoodMode::kProportional;
  l.lidar.temperature = c.GetDouble("lidar.temperature", l.lidar.temperature);
  const std::string norm = c.GetString("lidar.normalization", "global");
  if (norm != "global" && norm != "per_offset") {
    throw std::invalid_argument(
        "config: lidar.normalization must be global or per_offset");
  }
  l.normalization = norm == "global" ? ScoreNormalization::kGlobal
                                     : ScoreNormalization::kPerOffset;
  return l;
}

TrainConfig TrainFromConfig(const KeyValueConfig& c) {
  TrainConfig t;
  t.learning_rate = c.GetDouble("train.learning_rate", t.learning_rate);
  t.decay = c.GetDouble("train.decay", t.decay);
  t.batch_size = c.GetInt("train.batch_size", t.batch_size);
  t.epochs = c.GetInt("train.epochs", t.epochs);
  t.seed = c.GetUint64("train.seed", t.seed);
  t.temperature = c.GetDouble("train.temperature", t.temperature);
  t.Validate();
  return t;
}

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"bevloc: LiDAR intensity-map localization"};
  app.require_subcommand(1);

  std::string sim_config, sim_map, sim_drive, sim_csv;
  std::optional<std::uint64_t> sim_seed;
  std::optional<int> sim_steps;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate a map and a drive");
  simulate->add_option("--config", sim_config, "Key-value config file");
  simulate->add_option("--map", sim_map, "Output BVG1 map")->required();
  simulate->add_option("--drive", sim_drive, "Output BVD1 drive")->required();
  simulate->add_option("--csv", sim_csv, "Optional per-step CSV export");
  simulate->add_option("--seed", sim_seed, "Drive and world seed");
  simulate->add_option("--steps", sim_steps, "Trajectory steps");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train embedding networks");
  train_cmd->add_option("--config", train.config_path, "Key-value config file");
  train_cmd->add_option("--map", train.map_path, "BVG1 map")->required();
  train_cmd->add_option("--drive", train.drive_paths, "One or more drives")
      ->required();
  train_cmd->add_option("--out", train.checkpoint_path, "Output checkpoint")
      ->required();
  train_cmd->add_option("--metrics", train.metrics_path, "Per-epoch CSV");
  train_cmd->add_option("--epochs", train.epochs, "Training epochs");
  train_cmd->add_option("--batch", train.batch, "Mini-batch size");
  train_cmd->add_option("--lr", train.learning_rate, "Adam learning rate");
  train_cmd->add_option("--embedding-dim", train.embedding_dim, "Embedding channels");
  train_cmd->add_option("--width", train.width, "Hidden channels per layer");
  train_cmd->add_option("--data-fraction", train.data_fraction,
                         "Fraction of frames used, in (0, 1]");
  train_cmd->add_option("--seed", train.seed, "Sampling, init and shuffle seed");

  LocalizeArgs loc;
  CLI::App* localize = app.add_subcommand("localize", "Run the filter over a drive");
  localize->add_option("--config", loc.config_path, "Key-value config file");
  localize->add_option("--map", loc.map_path, "BVG1 map")->required();
  localize->add_option("--drive", loc.drive_path, "BVD1 drive")->required();
  localize->add_option("--checkpoint", loc.checkpoint_path, "Trained networks");
  localize->add_flag("--raw", loc.raw, "Identity embedding");
  localize->add_option("--out", loc.out_path, "Trajectory CSV")->required();
  localize->add_option("--report", loc.report_path, "Evaluation CSV");
  localize->add_option("--curve", loc.curve_path, "Error vs distance CSV");
  localize->add_flag("--no-motion", loc.no_motion, "Uniform prior every step");
  localize->add_flag("--hard-argmax", loc.hard_argmax, "Argmax instead of soft-argmax");
  localize->add_flag("--no-gps", loc.no_gps, "Ignore GPS observations");
  localize->add_option("--temperature", loc.temperature, "Lidar softmax temperature");

  std::vector<std::string> eval_inputs;
  double eval_threshold = 1.0;
  std::string eval_report, eval_cumulative;
  CLI::App* eval = app.add_subcommand("eval", "Summarize trajectory CSVs");
  eval->add_option("trajectories", eval_inputs, "Trajectory CSVs")->required();
  eval->add_option("--failure-threshold", eval_threshold, "Meters (1.0 or 0.5)");
  eval->add_option("--report", eval_report, "Report CSV");
  eval->add_option("--cumulative", eval_cumulative, "Cumulative error CSV");

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Time spatial vs FFT matching");
  bench_cmd->add_option("--channels", bench.channels, "Channel counts")->delimiter(',');
  bench_cmd->add_option("--methods", bench.methods, "spatial and/or fft")->delimiter(',');
  bench_cmd->add_option("--reps", bench.reps, "Timed repetitions");
  bench_cmd->add_option("--warmup", bench.warmup, "Untimed repetitions");
  bench_cmd->add_option("--rows", bench.rows, "Online rows");
  bench_cmd->add_option("--cols", bench.cols, "Online columns");
  bench_cmd->add_option("--seed", bench.seed, "Input seed");
  bench_cmd->add_option("--out", bench.out_path, "Timing CSV");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (simulate->parsed()) {
      return Simulate(sim_config, sim_seed, sim_steps, sim_map, sim_drive, sim_csv,
                      out);
    }
    if (train_cmd->parsed()) return TrainCommand(train, out);
    if (localize->parsed()) return LocalizeCommand(loc, out);
    if (eval->parsed()) {
      return EvalCommand(eval_inputs, eval_threshold, eval_report,
                         eval_cumulative, out);
    }
    if (bench_cmd->parsed()) return BenchCommand(bench, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace bevloc

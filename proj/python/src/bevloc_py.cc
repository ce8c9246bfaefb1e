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


#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "bevloc/commands.h"
#include "bevloc/grid.h"
#include "bevloc/matching.h"
#include "bevloc/pose.h"
#include "bevloc/sim.h"
#include "bevloc/tensor.h"
#include "bevloc/train.h"

namespace py = pybind11;

namespace bevloc {
namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

py::array_t<float> GridValues(const BevGrid& g) {
  py::array_t<float> out({g.rows(), g.cols()});
  std::copy(g.data().begin(), g.data().end(), out.mutable_data());
  return out;
}

py::array_t<bool> GridMask(const BevGrid& g) {
  py::array_t<bool> out({g.rows(), g.cols()});
  std::transform(g.mask().begin(), g.mask().end(), out.mutable_data(),
                 [](std::uint8_t m) { return m != 0; });
  return out;
}

// (C, R, W) or (R, W) values plus an (R, W) mask.
MaskedEmbedding ToEmbedding(const FloatArray& values, const MaskArray& mask) {
  if (values.ndim() != 2 && values.ndim() != 3) {
    throw std::invalid_argument("embedding must have shape (C, R, W) or (R, W)");
  }
  const int channels = values.ndim() == 3 ? static_cast<int>(values.shape(0)) : 1;
  const int rows = static_cast<int>(values.shape(values.ndim() - 2));
  const int cols = static_cast<int>(values.shape(values.ndim() - 1));
  if (mask.ndim() != 2 || mask.shape(0) != rows || mask.shape(1) != cols) {
    throw std::invalid_argument("mask must have shape (R, W) matching the values");
  }
  MaskedEmbedding e{Tensor3(channels, rows, cols), {}};
  std::copy(values.data(), values.data() + values.size(), e.values.values.begin());
  e.mask.assign(mask.data(), mask.data() + mask.size());
  for (auto& m : e.mask) m = m != 0;
  return e;
}

SearchWindow MakeWindow(int x_cells, int y_cells, int theta_cells,
                        double theta_step_deg, double resolution) {
  SearchWindow w;
  w.x_cells = x_cells;
  w.y_cells = y_cells;
  w.theta_cells = theta_cells;
  w.theta_step = theta_step_deg * 3.14159265358979323846 / 180.0;
  w.resolution = resolution;
  w.Validate();
  return w;
}

ScoreNormalization ParseNormalization(const std::string& name) {
  if (name == "global") return ScoreNormalization::kGlobal;
  if (name == "per_offset") return ScoreNormalization::kPerOffset;
  throw std::invalid_argument("normalization must be 'global' or 'per_offset'");
}

py::tuple ScoreVolumePy(const FloatArray& online, const MaskArray& online_mask,
                        const FloatArray& map, const MaskArray& map_mask,
                        int x_cells, int y_cells, int theta_cells,
                        double theta_step_deg, const std::string& method,
                        const std::string& normalization) {
  const SearchWindow w = MakeWindow(x_cells, y_cells, theta_cells, theta_step_deg, 0.05);
  const MaskedEmbedding a = ToEmbedding(online, online_mask);
  const MaskedEmbedding b = ToEmbedding(map, map_mask);
  ScoreVolume v;
  {
    py::gil_scoped_release release;
    Matcher matcher(ParseNormalization(normalization));
    if (method == "fft") {
      v = matcher.Fft(a, b, w);
    } else if (method == "spatial") {
      v = matcher.Spatial(a, b, w);
    } else {
      throw std::invalid_argument("method must be 'fft' or 'spatial'");
    }
  }
  py::array_t<float> scores({w.theta_cells, w.y_cells, w.x_cells});
  std::copy(v.scores.begin(), v.scores.end(), scores.mutable_data());
  return py::make_tuple(scores, v.cell_scale);
}

double LossPy(const FloatArray& scores, int gt_index, double cell_scale,
              double temperature) {
  if (scores.ndim() != 3) throw std::invalid_argument("scores must have shape (T, Y, X)");
  ScoreVolume v;
  v.window.theta_cells = static_cast<int>(scores.shape(0));
  v.window.y_cells = static_cast<int>(scores.shape(1));
  v.window.x_cells = static_cast<int>(scores.shape(2));
  v.scores.assign(scores.data(), scores.data() + scores.size());
  v.cell_scale = cell_scale;
  return Loss(v, gt_index, temperature);
}

std::tuple<int, std::string, std::string> RunCliPy(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = RunCli(args, out, err);
  }
  return {code, out.str(), err.str()};
}

}  // namespace
}  // namespace bevloc

PYBIND11_MODULE(_core, m) {
  using namespace bevloc;
  m.doc() = "LiDAR bird's-eye-view intensity map localization.";

  py::class_<Pose2D>(m, "Pose2D")
      .def(py::init<>())
      .def(py::init([](double x, double y, double theta) { return Pose2D{x, y, theta}; }),
           py::arg("x"), py::arg("y"), py::arg("theta"))
      .def_readwrite("x", &Pose2D::x)
      .def_readwrite("y", &Pose2D::y)
      .def_readwrite("theta", &Pose2D::theta)
      .def("__repr__", [](const Pose2D& p) {
        std::ostringstream s;
        s << "Pose2D(x=" << p.x << ", y=" << p.y << ", theta=" << p.theta << ")";
        return s.str();
      });
  m.def("compose", &Compose, py::arg("a"), py::arg("b"));
  m.def("inverse", &Inverse, py::arg("a"));
  m.def("inverse_compose", &InverseCompose, py::arg("a"), py::arg("b"),
        "Pose of a expressed in the frame of b.");
  m.def("wrap_angle", &WrapAngle, py::arg("theta"));

  py::class_<BevGrid>(m, "BevGrid")
      .def_property_readonly("rows", &BevGrid::rows)
      .def_property_readonly("cols", &BevGrid::cols)
      .def_property_readonly("resolution", &BevGrid::resolution)
      .def_property_readonly("origin", &BevGrid::origin)
      .def_property_readonly("values", &GridValues, "(rows, cols) float32 copy.")
      .def_property_readonly("mask", &GridMask, "(rows, cols) bool copy.")
      .def("observed_count", &BevGrid::ObservedCount)
      .def("save", [](const BevGrid& g, const std::string& path) { SaveBevGrid(g, path); },
           py::arg("path"));
  m.def("load_map", &LoadBevGrid, py::arg("path"));
  m.def(
      "generate_map",
      [](double length, double width, double resolution, std::uint64_t seed) {
        WorldConfig w;
        w.length = length;
        w.width = width;
        w.resolution = resolution;
        w.seed = seed;
        py::gil_scoped_release release;
        return GenerateMap(w);
      },
      py::arg("length") = 560.0, py::arg("width") = 40.0, py::arg("resolution") = 0.05,
      py::arg("seed") = 1);
  m.def("crop_window", &CropWindow, py::arg("map"), py::arg("center"), py::arg("rows"),
        py::arg("cols"));

  m.def("score_volume", &ScoreVolumePy, py::arg("online"), py::arg("online_mask"),
        py::arg("map_window"), py::arg("map_mask"), py::arg("x_cells") = 21,
        py::arg("y_cells") = 21, py::arg("theta_cells") = 5,
        py::arg("theta_step_deg") = 0.5, py::arg("method") = "fft",
        py::arg("normalization") = "global",
        "Masked cross-correlation scores, shape (theta, y, x), and the cell scale.");
  m.def("loss", &LossPy, py::arg("scores"), py::arg("gt_index"), py::arg("cell_scale"),
        py::arg("temperature") = 1.0);
  m.def("fft_friendly_size", &FftFriendlySize, py::arg("n"));
  m.def("run_cli", &RunCliPy, py::arg("args"),
        "Runs a bevloc subcommand; returns (exit_code, stdout, stderr).");

  py::register_exception<std::invalid_argument>(m, "InvalidArgument", PyExc_ValueError);
}

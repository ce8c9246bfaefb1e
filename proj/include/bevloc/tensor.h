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

#ifndef BEVLOC_TENSOR_H_
#define BEVLOC_TENSOR_H_

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace bevloc {

class BevGrid;

// channels x rows x cols, channel-major.
template <typename T>
struct Tensor3T {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<T> values;

  Tensor3T() = default;
  Tensor3T(int c, int r, int w, T fill = T(0))
      : channels(c), rows(r), cols(w) {
    if (c <= 0 || r <= 0 || w <= 0) {
      throw std::invalid_argument("Tensor3: dimensions must be positive");
    }
    values.assign(static_cast<std::size_t>(c) * r * w, fill);
  }

  int plane_size() const { return rows * cols; }
  bool SameShape(const Tensor3T& o) const {
    return channels == o.channels && rows == o.rows && cols == o.cols;
  }

  T& at(int c, int r, int w) {
    return values[(static_cast<std::size_t>(c) * rows + r) * cols + w];
  }
  T at(int c, int r, int w) const {
    return values[(static_cast<std::size_t>(c) * rows + r) * cols + w];
  }
  T* row(int c, int r) {
    return values.data() + (static_cast<std::size_t>(c) * rows + r) * cols;
  }
  const T* row(int c, int r) const {
    return values.data() + (static_cast<std::size_t>(c) * rows + r) * cols;
  }
  std::span<T> plane(int c) {
    return {values.data() + static_cast<std::size_t>(c) * plane_size(),
            static_cast<std::size_t>(plane_size())};
  }
  std::span<const T> plane(int c) const {
    return {values.data() + static_cast<std::size_t>(c) * plane_size(),
            static_cast<std::size_t>(plane_size())};
  }

  bool AllFinite() const {
    for (const T& v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename U>
  Tensor3T<U> Cast() const {
    Tensor3T<U> out;
    out.channels = channels;
    out.rows = rows;
    out.cols = cols;
    out.values.assign(values.begin(), values.end());
    return out;
  }
};

using Tensor3 = Tensor3T<float>;

// Single-channel tensor holding the grid intensities.
Tensor3 ToTensor(const BevGrid& grid);

}  // namespace bevloc

#endif  // BEVLOC_TENSOR_H_

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

#ifndef BEVLOC_EMBED_H_
#define BEVLOC_EMBED_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bevloc/tensor.h"

namespace bevloc {

class BevGrid;

enum class Activation : std::uint8_t { kLinear = 0, kLeakyRelu = 1 };

inline constexpr double kLeakySlope = 0.1;
inline constexpr double kInstanceNormEps = 1e-5;

struct LayerSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;  // odd; zero padding keeps the resolution
  bool instance_norm = true;
  Activation activation = Activation::kLeakyRelu;
};

// Layer chain of a fully-convolutional embedding network. An empty chain is
// the identity embedding (raw intensities, one channel).
struct FcnSpec {
  std::vector<LayerSpec> layers;

  // `depth` conv layers, 3x3, `width` channels, instance norm and leaky ReLU
  // on every layer but the last, which is linear with `embedding_dim` outputs.
  static FcnSpec Default(int embedding_dim, int width = 16, int depth = 6);
  static FcnSpec Identity() { return {}; }

  bool is_identity() const { return layers.empty(); }
  int output_channels() const;
  // Throws std::invalid_argument if the chain is inconsistent.
  void Validate() const;
  std::size_t ParameterCount() const;
  friend bool operator==(const FcnSpec&, const FcnSpec&);
};

bool operator==(const LayerSpec& a, const LayerSpec& b);

template <typename T>
struct LayerParamsT {
  std::vector<T> kernel;  // out x in x k x k
  std::vector<T> bias;    // out
  std::vector<T> scale;   // out, instance norm only
  std::vector<T> shift;   // out, instance norm only
};

template <typename T>
struct FcnParamsT {
  FcnSpec spec;
  std::vector<LayerParamsT<T>> layers;

  // Flat views over all parameters in declaration order (kernel, bias,
  // scale, shift per layer). Used by optimizers and gradient checks.
  std::vector<T*> Pointers();
  std::vector<const T*> Pointers() const;
  std::size_t size() const { return spec.ParameterCount(); }

  FcnParamsT ZerosLike() const;
  template <typename U>
  FcnParamsT<U> Cast() const;
};

using FcnParams = FcnParamsT<float>;

// He-style initialization: kernels ~ N(0, 2 / fan_in), zero biases, unit
// instance-norm scale and zero shift. Deterministic under seed.
FcnParams InitParams(const FcnSpec& spec, std::uint64_t seed);

// Activations kept for the backward pass.
template <typename T>
struct ForwardCache {
  std::vector<Tensor3T<T>> inputs;   // input of each layer
  std::vector<Tensor3T<T>> xhat;     // normalized conv output (IN layers)
  std::vector<std::vector<T>> inv_std;
  std::vector<Tensor3T<T>> preact;   // input of the activation
};

// Per-channel (x - mean) / sqrt(var + eps) * scale + shift over each
// channel's spatial extent.
template <typename T>
Tensor3T<T> InstanceNorm(const Tensor3T<T>& x, const std::vector<T>& scale,
                         const std::vector<T>& shift, double eps);

// Output has the input's rows/cols and spec.output_channels() channels.
// Throws std::runtime_error on non-finite activations.
template <typename T>
Tensor3T<T> Forward(const FcnParamsT<T>& params, const Tensor3T<T>& input,
                    ForwardCache<T>* cache = nullptr);

Tensor3 Forward(const FcnParams& params, const BevGrid& input);

template <typename T>
struct Gradients {
  FcnParamsT<T> params;
  Tensor3T<T> input;
};

// Reverse-mode gradients of Forward given dLoss/dOutput. `cache` must come
// from Forward on the same params and input.
template <typename T>
Gradients<T> Backward(const FcnParamsT<T>& params, const ForwardCache<T>& cache,
                      const Tensor3T<T>& output_grad);

// "FCN1" checkpoints, little-endian:
//   magic "FCN1", u32 version (1), u32 network count
//   per network: u32 layer count, then per layer u32 in, u32 out, u32 kernel,
//                u8 instance_norm, u8 activation
//   then, per network and layer, raw f32 arrays: kernel, bias, and (if
//   instance_norm) scale, shift.
void WriteCheckpoint(const std::vector<FcnParams>& networks, std::ostream& out);
std::vector<FcnParams> ReadCheckpoint(std::istream& in);
void SaveCheckpoint(const std::vector<FcnParams>& networks,
                    const std::string& path);
std::vector<FcnParams> LoadCheckpoint(const std::string& path);

}  // namespace bevloc

#endif  // BEVLOC_EMBED_H_

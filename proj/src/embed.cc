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

#include "bevloc/embed.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "bevloc/binary_io.h"
#include "bevloc/grid.h"

namespace bevloc {

Tensor3 ToTensor(const BevGrid& grid) {
  Tensor3 t(1, grid.rows(), grid.cols());
  std::copy(grid.data().begin(), grid.data().end(), t.values.begin());
  return t;
}

bool operator==(const LayerSpec& a, const LayerSpec& b) {
  return a.in_channels == b.in_channels && a.out_channels == b.out_channels &&
         a.kernel == b.kernel && a.instance_norm == b.instance_norm &&
         a.activation == b.activation;
}

bool operator==(const FcnSpec& a, const FcnSpec& b) {
  return a.layers == b.layers;
}

FcnSpec FcnSpec::Default(int embedding_dim, int width, int depth) {
  if (depth < 1 || width < 1 || embedding_dim < 1) {
    throw std::invalid_argument("FcnSpec::Default: bad architecture");
  }
  FcnSpec spec;
  int in = 1;
  for (int i = 0; i < depth; ++i) {
    const bool last = i == depth - 1;
    LayerSpec l;
    l.in_channels = in;
    l.out_channels = last ? embedding_dim : width;
    l.kernel = 3;
    l.instance_norm = !last;
    l.activation = last ? Activation::kLinear : Activation::kLeakyRelu;
    spec.layers.push_back(l);
    in = l.out_channels;
  }
  return spec;
}

int FcnSpec::output_channels() const {
  return layers.empty() ? 1 : layers.back().out_channels;
}

void FcnSpec::Validate() const {
  int in = 1;
  for (const LayerSpec& l : layers) {
    if (l.in_channels != in || l.out_channels < 1) {
      throw std::invalid_argument("FcnSpec: inconsistent channel chain");
    }
    if (l.kernel < 1 || l.kernel % 2 == 0) {
      throw std::invalid_argument("FcnSpec: kernels must be odd");
    }
    in = l.out_channels;
  }
}

std::size_t FcnSpec::ParameterCount() const {
  std::size_t n = 0;
  for (const LayerSpec& l : layers) {
    n += static_cast<std::size_t>(l.out_channels) * l.in_channels * l.kernel *
         l.kernel;
    n += l.out_channels * (l.instance_norm ? 3 : 1);
  }
  return n;
}

template <typename T>
std::vector<T*> FcnParamsT<T>::Pointers() {
  std::vector<T*> out;
  out.reserve(size());
  for (LayerParamsT<T>& l : layers) {
    for (auto* v : {&l.kernel, &l.bias, &l.scale, &l.shift}) {
      for (T& x : *v) out.push_back(&x);
    }
  }
  return out;
}

template <typename T>
std::vector<const T*> FcnParamsT<T>::Pointers() const {
  std::vector<const T*> out;
  out.reserve(size());
  for (const LayerParamsT<T>& l : layers) {
    for (const auto* v : {&l.kernel, &l.bias, &l.scale, &l.shift}) {
      for (const T& x : *v) out.push_back(&x);
    }
  }
  return out;
}

template <typename T>
FcnParamsT<T> FcnParamsT<T>::ZerosLike() const {
  FcnParamsT<T> z = *this;
  for (LayerParamsT<T>& l : z.layers) {
    std::fill(l.kernel.begin(), l.kernel.end(), T(0));
    std::fill(l.bias.begin(), l.bias.end(), T(0));
    std::fill(l.scale.begin(), l.scale.end(), T(0));
    std::fill(l.shift.begin(), l.shift.end(), T(0));
  }
  return z;
}

template <typename T>
template <typename U>
FcnParamsT<U> FcnParamsT<T>::Cast() const {
  FcnParamsT<U> out;
  out.spec = spec;
  for (const LayerParamsT<T>& l : layers) {
    LayerParamsT<U> u;
    u.kernel.assign(l.kernel.begin(), l.kernel.end());
    u.bias.assign(l.bias.begin(), l.bias.end());
    u.scale.assign(l.scale.begin(), l.scale.end());
    u.shift.assign(l.shift.begin(), l.shift.end());
    out.layers.push_back(std::move(u));
  }
  return out;
}

FcnParams InitParams(const FcnSpec& spec, std::uint64_t seed) {
  spec.Validate();
  std::mt19937_64 rng(seed);
  FcnParams params;
  params.spec = spec;
  for (const LayerSpec& l : spec.layers) {
    const int fan_in = l.in_channels * l.kernel * l.kernel;
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    LayerParamsT<float> layer;
    layer.kernel.resize(static_cast<std::size_t>(l.out_channels) * fan_in);
    for (float& w : layer.kernel) w = static_cast<float>(normal(rng));
    layer.bias.assign(l.out_channels, 0.f);
    if (l.instance_norm) {
      layer.scale.assign(l.out_channels, 1.f);
      layer.shift.assign(l.out_channels, 0.f);
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

namespace {

// Accumulation type for reductions.
template <typename T>
using Acc = double;

template <typename T>
Tensor3T<T> ConvForward(const Tensor3T<T>& in, const LayerSpec& spec,
                        const LayerParamsT<T>& p) {
  const int rows = in.rows;
  const int cols = in.cols;
  const int k = spec.kernel;
  const int pad = k / 2;
  Tensor3T<T> out(spec.out_channels, rows, cols);
  for (int oc = 0; oc < spec.out_channels; ++oc) {
    std::fill(out.plane(oc).begin(), out.plane(oc).end(), p.bias[oc]);
    for (int ic = 0; ic < spec.in_channels; ++ic) {
      const T* w = &p.kernel[((static_cast<std::size_t>(oc) * spec.in_channels +
                               ic) * k) * k];
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        const int r0 = std::max(0, -dy);
        const int r1 = std::min(rows, rows - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const int c0 = std::max(0, -dx);
          const int c1 = std::min(cols, cols - dx);
          const T wv = w[ky * k + kx];
          if (wv == T(0)) continue;
          for (int r = r0; r < r1; ++r) {
            T* o = out.row(oc, r);
            const T* src = in.row(ic, r + dy) + dx;
            for (int c = c0; c < c1; ++c) o[c] += wv * src[c];
          }
        }
      }
    }
  }
  return out;
}

// Accumulates kernel/bias grads and returns dL/dInput.
template <typename T>
Tensor3T<T> ConvBackward(const Tensor3T<T>& in, const LayerSpec& spec,
                         const LayerParamsT<T>& p, const Tensor3T<T>& dout,
                         LayerParamsT<T>& grad) {
  const int rows = in.rows;
  const int cols = in.cols;
  const int k = spec.kernel;
  const int pad = k / 2;
  Tensor3T<T> din(spec.in_channels, rows, cols);
  for (int oc = 0; oc < spec.out_channels; ++oc) {
    Acc<T> bsum = 0;
    for (T v : dout.plane(oc)) bsum += v;
    grad.bias[oc] += static_cast<T>(bsum);
    for (int ic = 0; ic < spec.in_channels; ++ic) {
      const std::size_t base =
          ((static_cast<std::size_t>(oc) * spec.in_channels + ic) * k) * k;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        const int r0 = std::max(0, -dy);
        const int r1 = std::min(rows, rows - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const int c0 = std::max(0, -dx);
          const int c1 = std::min(cols, cols - dx);
          const T wv = p.kernel[base + ky * k + kx];
          Acc<T> wsum = 0;
          for (int r = r0; r < r1; ++r) {
            const T* g = dout.row(oc, r);
            const T* src = in.row(ic, r + dy) + dx;
            T* dsrc = din.row(ic, r + dy) + dx;
            T partial = 0;
            for (int c = c0; c < c1; ++c) {
              partial += g[c] * src[c];
              dsrc[c] += wv * g[c];
            }
            wsum += partial;
          }
          grad.kernel[base + ky * k + kx] += static_cast<T>(wsum);
        }
      }
    }
  }
  return din;
}

template <typename T>
void NormalizeChannels(const Tensor3T<T>& x, double eps, Tensor3T<T>& xhat,
                       std::vector<T>& inv_std) {
  xhat = Tensor3T<T>(x.channels, x.rows, x.cols);
  inv_std.assign(x.channels, T(0));
  const double n = x.plane_size();
  for (int c = 0; c < x.channels; ++c) {
    Acc<T> sum = 0;
    for (T v : x.plane(c)) sum += v;
    const double mean = sum / n;
    Acc<T> sq = 0;
    for (T v : x.plane(c)) sq += (v - mean) * (v - mean);
    const double istd = 1.0 / std::sqrt(sq / n + eps);
    inv_std[c] = static_cast<T>(istd);
    auto src = x.plane(c);
    auto dst = xhat.plane(c);
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = static_cast<T>((src[i] - mean) * istd);
    }
  }
}

template <typename T>
T Activate(Activation a, T v) {
  if (a == Activation::kLeakyRelu && v < T(0)) return static_cast<T>(kLeakySlope) * v;
  return v;
}

template <typename T>
T ActivationSlope(Activation a, T v) {
  if (a == Activation::kLeakyRelu && v < T(0)) return static_cast<T>(kLeakySlope);
  return T(1);
}

}  // namespace

template <typename T>
Tensor3T<T> InstanceNorm(const Tensor3T<T>& x, const std::vector<T>& scale,
                         const std::vector<T>& shift, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("InstanceNorm: eps must be > 0");
  Tensor3T<T> xhat;
  std::vector<T> inv_std;
  NormalizeChannels(x, eps, xhat, inv_std);
  for (int c = 0; c < x.channels; ++c) {
    for (T& v : xhat.plane(c)) v = v * scale[c] + shift[c];
  }
  return xhat;
}

template <typename T>
Tensor3T<T> Forward(const FcnParamsT<T>& params, const Tensor3T<T>& input,
                    ForwardCache<T>* cache) {
  const FcnSpec& spec = params.spec;
  if (spec.is_identity()) {
    if (input.channels != 1) {
      throw std::invalid_argument("identity embedding expects one channel");
    }
    if (cache) *cache = {};
    return input;
  }
  if (input.channels != spec.layers.front().in_channels) {
    throw std::invalid_argument("Forward: input channel mismatch");
  }
  if (cache) {
    *cache = {};
    cache->inputs.reserve(spec.layers.size());
  }
  Tensor3T<T> x = input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& ls = spec.layers[i];
    const LayerParamsT<T>& lp = params.layers[i];
    Tensor3T<T> z = ConvForward(x, ls, lp);
    if (cache) cache->inputs.push_back(std::move(x));
    if (ls.instance_norm) {
      Tensor3T<T> xhat;
      std::vector<T> inv_std;
      NormalizeChannels(z, kInstanceNormEps, xhat, inv_std);
      for (int c = 0; c < z.channels; ++c) {
        auto src = xhat.plane(c);
        auto dst = z.plane(c);
        for (std::size_t j = 0; j < src.size(); ++j) {
          dst[j] = src[j] * lp.scale[c] + lp.shift[c];
        }
      }
      if (cache) {
        cache->xhat.push_back(std::move(xhat));
        cache->inv_std.push_back(std::move(inv_std));
      }
    } else if (cache) {
      cache->xhat.emplace_back();
      cache->inv_std.emplace_back();
    }
    if (cache) cache->preact.push_back(z);
    for (T& v : z.values) v = Activate(ls.activation, v);
    if (!z.AllFinite()) {
      throw std::runtime_error("Forward: non-finite activation in layer " +
                               std::to_string(i));
    }
    x = std::move(z);
  }
  return x;
}

Tensor3 Forward(const FcnParams& params, const BevGrid& input) {
  return Forward(params, ToTensor(input));
}

template <typename T>
Gradients<T> Backward(const FcnParamsT<T>& params, const ForwardCache<T>& cache,
                      const Tensor3T<T>& output_grad) {
  const FcnSpec& spec = params.spec;
  Gradients<T> g;
  g.params = params.ZerosLike();
  if (spec.is_identity()) {
    g.input = output_grad;
    return g;
  }
  if (cache.inputs.size() != spec.layers.size()) {
    throw std::invalid_argument("Backward: cache does not match params");
  }
  const Tensor3T<T>& last = cache.preact.back();
  if (!output_grad.SameShape(last)) {
    throw std::invalid_argument("Backward: output gradient shape mismatch");
  }
  Tensor3T<T> d = output_grad;
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const LayerSpec& ls = spec.layers[li];
    const LayerParamsT<T>& lp = params.layers[li];
    LayerParamsT<T>& lg = g.params.layers[li];
    const Tensor3T<T>& z = cache.preact[li];
    for (std::size_t j = 0; j < d.values.size(); ++j) {
      d.values[j] *= ActivationSlope(ls.activation, z.values[j]);
    }
    if (ls.instance_norm) {
      const Tensor3T<T>& xhat = cache.xhat[li];
      const double n = xhat.plane_size();
      for (int c = 0; c < d.channels; ++c) {
        auto dz = d.plane(c);
        auto xh = xhat.plane(c);
        Acc<T> sum_dy = 0, sum_dy_xh = 0;
        for (std::size_t j = 0; j < dz.size(); ++j) {
          sum_dy += dz[j];
          sum_dy_xh += dz[j] * xh[j];
        }
        lg.shift[c] += static_cast<T>(sum_dy);
        lg.scale[c] += static_cast<T>(sum_dy_xh);
        // d/dx of normalized output, expressed through dxhat = dz * scale.
        const double s = lp.scale[c];
        const double k = s * cache.inv_std[li][c] / n;
        for (std::size_t j = 0; j < dz.size(); ++j) {
          dz[j] = static_cast<T>(k * (n * dz[j] - sum_dy - xh[j] * sum_dy_xh));
        }
      }
    }
    d = ConvBackward(cache.inputs[li], ls, lp, d, lg);
  }
  g.input = std::move(d);
  return g;
}

namespace {

void WriteFloats(std::ostream& out, const std::vector<float>& v) {
  for (float x : v) io::WriteLe<float>(out, x);
}

void ReadFloats(std::istream& in, std::vector<float>& v, std::size_t n) {
  v.resize(n);
  for (float& x : v) x = io::ReadLe<float>(in);
}

}  // namespace

void WriteCheckpoint(const std::vector<FcnParams>& networks, std::ostream& out) {
  out.write("FCN1", 4);
  io::WriteLe<std::uint32_t>(out, 1);
  io::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(networks.size()));
  for (const FcnParams& net : networks) {
    io::WriteLe<std::uint32_t>(out,
                               static_cast<std::uint32_t>(net.spec.layers.size()));
    for (const LayerSpec& l : net.spec.layers) {
      io::WriteLe<std::uint32_t>(out, l.in_channels);
      io::WriteLe<std::uint32_t>(out, l.out_channels);
      io::WriteLe<std::uint32_t>(out, l.kernel);
      io::WriteLe<std::uint8_t>(out, l.instance_norm ? 1 : 0);
      io::WriteLe<std::uint8_t>(out, static_cast<std::uint8_t>(l.activation));
    }
  }
  for (const FcnParams& net : networks) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      const LayerParamsT<float>& l = net.layers[i];
      WriteFloats(out, l.kernel);
      WriteFloats(out, l.bias);
      if (net.spec.layers[i].instance_norm) {
        WriteFloats(out, l.scale);
        WriteFloats(out, l.shift);
      }
    }
  }
  if (!out) throw std::runtime_error("WriteCheckpoint: write failed");
}

std::vector<FcnParams> ReadCheckpoint(std::istream& in) {
  io::ExpectMagic(in, "FCN1", "FCN1 checkpoint");
  if (io::ReadLe<std::uint32_t>(in) != 1) {
    throw std::runtime_error("FCN1 checkpoint: unsupported version");
  }
  const auto count = io::ReadLe<std::uint32_t>(in);
  std::vector<FcnParams> nets(count);
  for (FcnParams& net : nets) {
    const auto layers = io::ReadLe<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < layers; ++i) {
      LayerSpec l;
      l.in_channels = static_cast<int>(io::ReadLe<std::uint32_t>(in));
      l.out_channels = static_cast<int>(io::ReadLe<std::uint32_t>(in));
      l.kernel = static_cast<int>(io::ReadLe<std::uint32_t>(in));
      l.instance_norm = io::ReadLe<std::uint8_t>(in) != 0;
      const auto act = io::ReadLe<std::uint8_t>(in);
      if (act > 1) throw std::runtime_error("FCN1 checkpoint: bad activation");
      l.activation = static_cast<Activation>(act);
      net.spec.layers.push_back(l);
    }
    net.spec.Validate();
  }
  for (FcnParams& net : nets) {
    for (const LayerSpec& l : net.spec.layers) {
      LayerParamsT<float> p;
      ReadFloats(in, p.kernel,
                 static_cast<std::size_t>(l.out_channels) * l.in_channels *
                     l.kernel * l.kernel);
      ReadFloats(in, p.bias, l.out_channels);
      if (l.instance_norm) {
        ReadFloats(in, p.scale, l.out_channels);
        ReadFloats(in, p.shift, l.out_channels);
      }
      net.layers.push_back(std::move(p));
    }
  }
  return nets;
}

void SaveCheckpoint(const std::vector<FcnParams>& networks,
                    const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  WriteCheckpoint(networks, out);
}

std::vector<FcnParams> LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return ReadCheckpoint(in);
}

template struct FcnParamsT<float>;
template struct FcnParamsT<double>;
template FcnParamsT<double> FcnParamsT<float>::Cast<double>() const;
template FcnParamsT<float> FcnParamsT<double>::Cast<float>() const;
template Tensor3T<float> InstanceNorm(const Tensor3T<float>&,
                                      const std::vector<float>&,
                                      const std::vector<float>&, double);
template Tensor3T<double> InstanceNorm(const Tensor3T<double>&,
                                       const std::vector<double>&,
                                       const std::vector<double>&, double);
template Tensor3T<float> Forward(const FcnParamsT<float>&,
                                 const Tensor3T<float>&, ForwardCache<float>*);
template Tensor3T<double> Forward(const FcnParamsT<double>&,
                                  const Tensor3T<double>&,
                                  ForwardCache<double>*);
template Gradients<float> Backward(const FcnParamsT<float>&,
                                   const ForwardCache<float>&,
                                   const Tensor3T<float>&);
template Gradients<double> Backward(const FcnParamsT<double>&,
                                    const ForwardCache<double>&,
                                    const Tensor3T<double>&);

}  // namespace bevloc

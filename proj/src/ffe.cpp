/* Copyright 2026 The CLFD Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "clfd/ffe.hpp"

#include <cmath>
#include <fstream>

#include "clfd/binary_io.hpp"
#include "clfd/dwt.hpp"
#include "clfd/errors.hpp"

namespace clfd::ffe {

EncoderWeights EncoderWeights::initialized(Rng& rng, bool use_bias) {
  EncoderWeights w;
  w.use_bias = use_bias;
  const auto fill = [&](std::span<float> coeffs) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(coeffs.size()));
    for (auto& c : coeffs) c = static_cast<float>(rng.uniform(-bound, bound));
  };
  fill(w.w_low());
  fill(w.w_high());
  fill(w.w_global());
  return w;
}

Volume decompose(const Volume& image) {
  if (image.channels != 3) {
    throw ShapeError("ffe: expected a 3-channel image, got " + std::to_string(image.channels));
  }
  auto bands = dwt::dwt_image(image);
  const int h = image.height / 2, w = image.width / 2;
  Volume stack(12, h, w);
  for (int ch = 0; ch < 3; ++ch) {
    const Plane* planes[4] = {&bands[ch].ll, &bands[ch].lh, &bands[ch].hl, &bands[ch].hh};
    for (int b = 0; b < 4; ++b) {
      auto dst = stack.channel(plane_index(ch, b));
      std::copy(planes[b]->values.begin(), planes[b]->values.end(), dst.begin());
    }
  }
  return stack;
}

Volume merge(const Volume& stack, const EncoderWeights& weights) {
  if (stack.channels != 12) throw ShapeError("ffe: merge expects 12 subband planes");
  const auto& v = weights.values;
  Volume out(3, stack.height, stack.width);
  const std::size_t n = stack.plane_size();
  auto low = out.channel(0), high = out.channel(1), global = out.channel(2);
  const float bl = weights.use_bias ? v[EncoderWeights::kBiasLow] : 0.0f;
  const float bh = weights.use_bias ? v[EncoderWeights::kBiasHigh] : 0.0f;
  const float bg = weights.use_bias ? v[EncoderWeights::kBiasGlobal] : 0.0f;
  std::fill(low.begin(), low.end(), bl);
  std::fill(high.begin(), high.end(), bh);
  std::fill(global.begin(), global.end(), bg);
  for (int ch = 0; ch < 3; ++ch) {
    for (int b = 0; b < 4; ++b) {
      const int p = plane_index(ch, b);
      auto src = stack.channel(p);
      const float wg = v[EncoderWeights::kGlobal + p];
      for (std::size_t i = 0; i < n; ++i) global[i] += wg * src[i];
      if (b == 0) {
        const float wl = v[EncoderWeights::kLow + ch];
        for (std::size_t i = 0; i < n; ++i) low[i] += wl * src[i];
      } else {
        const float wh = v[EncoderWeights::kHigh + ch * 3 + (b - 1)];
        for (std::size_t i = 0; i < n; ++i) high[i] += wh * src[i];
      }
    }
  }
  return out;
}

EncodedMap encode(const Volume& image, const EncoderWeights& weights) {
  return EncodedMap{merge(decompose(image), weights), image.height, image.width};
}

std::array<double, EncoderWeights::kCount> gradient(std::span<const Volume> stacks,
                                                    std::span<const float> dmaps,
                                                    bool use_bias) {
  std::array<double, EncoderWeights::kCount> g{};
  if (stacks.empty()) return g;
  const std::size_t n = stacks[0].plane_size();
  const std::size_t batch = stacks.size();
  if (dmaps.size() != 3 * batch * n) throw ShapeError("ffe: gradient size mismatch");
  // dmaps layout [3][N][h][w]
  const auto out_grad = [&](int channel, std::size_t sample) {
    return dmaps.subspan((channel * batch + sample) * n, n);
  };
  for (std::size_t s = 0; s < batch; ++s) {
    const Volume& stack = stacks[s];
    auto gl = out_grad(0, s), gh = out_grad(1, s), gg = out_grad(2, s);
    if (use_bias) {
      double sl = 0, sh = 0, sg = 0;
      for (std::size_t i = 0; i < n; ++i) {
        sl += gl[i];
        sh += gh[i];
        sg += gg[i];
      }
      g[EncoderWeights::kBiasLow] += sl;
      g[EncoderWeights::kBiasHigh] += sh;
      g[EncoderWeights::kBiasGlobal] += sg;
    }
    for (int ch = 0; ch < 3; ++ch) {
      for (int b = 0; b < 4; ++b) {
        const int p = plane_index(ch, b);
        auto src = stack.channel(p);
        double dg = 0, dm = 0;
        const auto& merged = b == 0 ? gl : gh;
        for (std::size_t i = 0; i < n; ++i) {
          dg += static_cast<double>(gg[i]) * src[i];
          dm += static_cast<double>(merged[i]) * src[i];
        }
        g[EncoderWeights::kGlobal + p] += dg;
        if (b == 0) {
          g[EncoderWeights::kLow + ch] += dm;
        } else {
          g[EncoderWeights::kHigh + ch * 3 + (b - 1)] += dm;
        }
      }
    }
  }
  return g;
}

void apply_gradient(EncoderWeights& weights,
                    const std::array<double, EncoderWeights::kCount>& grad, double lr) {
  if (weights.frozen) return;
  for (int i = 0; i < EncoderWeights::kCount; ++i) {
    const bool is_bias = i == EncoderWeights::kBiasLow || i == EncoderWeights::kBiasHigh ||
                         i == EncoderWeights::kBiasGlobal;
    if (is_bias && !weights.use_bias) continue;
    weights.values[i] = static_cast<float>(weights.values[i] - lr * grad[i]);
  }
}

EncoderWeights freeze(EncoderWeights weights) {
  weights.frozen = true;
  return weights;
}

std::uint64_t digest(const EncoderWeights& weights) {
  io::Fnv1a h;
  h.update(std::span<const float>(weights.values));
  return h.value();
}

void write_weights(std::ostream& out, const EncoderWeights& weights) {
  io::write_f32_array(out, weights.values);
  const std::uint8_t frozen = weights.frozen ? 1 : 0;
  io::write_bytes(out, &frozen, 1);
}

EncoderWeights read_weights(std::istream& in) {
  EncoderWeights w;
  io::read_f32_array(in, w.values);
  std::uint8_t frozen = 0;
  io::read_bytes(in, &frozen, 1);
  if (frozen > 1) throw FormatError("encoder weights: frozen flag must be 0 or 1");
  w.frozen = frozen == 1;
  return w;
}

void save_weights(const EncoderWeights& weights, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_weights(out, weights);
}

EncoderWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_weights(in);
}

}  // namespace clfd::ffe

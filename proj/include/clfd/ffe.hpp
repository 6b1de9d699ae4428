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

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "clfd/rng.hpp"
#include "clfd/volume.hpp"

// Frequency-domain feature encoder: three 1x1 merges over the twelve Haar
// subband planes of an RGB image, producing a 3-channel half-resolution map.
namespace clfd::ffe {

// Layout of `values` (also the serialization order):
//   [0, 3)   w_low     over the 3 ll planes
//   3        bias_low
//   [4, 13)  w_high    over the 9 {lh, hl, hh} x channel planes
//   13       bias_high
//   [14, 26) w_global  over all 12 planes
//   26       bias_global
struct EncoderWeights {
  static constexpr int kCount = 27;
  static constexpr int kLow = 0, kBiasLow = 3, kHigh = 4, kBiasHigh = 13, kGlobal = 14,
                       kBiasGlobal = 26;

  std::array<float, kCount> values{};
  bool frozen = false;
  bool use_bias = true;

  std::span<float, 3> w_low() { return std::span<float, 3>(values.data() + kLow, 3); }
  std::span<float, 9> w_high() { return std::span<float, 9>(values.data() + kHigh, 9); }
  std::span<float, 12> w_global() { return std::span<float, 12>(values.data() + kGlobal, 12); }
  float& bias_low() { return values[kBiasLow]; }
  float& bias_high() { return values[kBiasHigh]; }
  float& bias_global() { return values[kBiasGlobal]; }

  // Coefficients uniform in +-1/sqrt(fan_in) (fan_in 3/9/12), biases zero.
  static EncoderWeights initialized(Rng& rng, bool use_bias = true);
};

// 3 x (H/2) x (W/2) encoder output.
struct EncodedMap {
  Volume values;
  int source_height = 0;
  int source_width = 0;
};

// The twelve subband planes of a 3-channel image as one 12-channel volume.
// Plane index = channel * 4 + band, band order ll, lh, hl, hh.
Volume decompose(const Volume& image);

inline constexpr int plane_index(int channel, int band) { return channel * 4 + band; }

// Merges a 12-plane stack with the three point merges.
Volume merge(const Volume& stack, const EncoderWeights& weights);

// decompose + merge. Throws ShapeError for non-3-channel input and
// DimensionError for odd sizes.
EncodedMap encode(const Volume& image, const EncoderWeights& weights);

// d(loss)/d(values) given the subband stacks of a batch and the loss
// gradient at the encoder output; `dmaps` is laid out [3][N][h][w], matching
// the backbone input gradient.
std::array<double, EncoderWeights::kCount> gradient(std::span<const Volume> stacks,
                                                    std::span<const float> dmaps,
                                                    bool use_bias);

// Plain gradient step. A no-op on frozen weights.
void apply_gradient(EncoderWeights& weights,
                    const std::array<double, EncoderWeights::kCount>& grad, double lr);

// Marks the weights immutable. Idempotent.
EncoderWeights freeze(EncoderWeights weights);

// Content digest of the coefficient values (the frozen flag is excluded).
std::uint64_t digest(const EncoderWeights& weights);

// Little-endian float32 values in layout order followed by one frozen byte.
void write_weights(std::ostream& out, const EncoderWeights& weights);
EncoderWeights read_weights(std::istream& in);
void save_weights(const EncoderWeights& weights, const std::string& path);
EncoderWeights load_weights(const std::string& path);

}  // namespace clfd::ffe

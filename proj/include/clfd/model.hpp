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

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "clfd/nn/layers.hpp"
#include "clfd/nn/tensor.hpp"
#include "clfd/rng.hpp"
#include "clfd/volume.hpp"

namespace clfd::model {

// Residual backbone description. The stem is a stride-1 3x3 convolution (no
// max-pool), followed by stages of `blocks_per_stage` basic blocks.
struct BackboneConfig {
  std::string arch = "desk";
  int stem_width = 20;
  std::vector<int> widths{20, 40, 80};
  std::vector<int> strides{1, 2, 2};
  int blocks_per_stage = 2;
  int in_channels = 3;
  int in_height = 16;
  int in_width = 16;
  int num_classes = 10;

  int feature_dim() const { return widths.empty() ? stem_width : widths.back(); }

  // 3-stage residual CNN, channels 20/40/80, two blocks per stage (N = 80).
  static BackboneConfig desk(int height, int width, int classes);
  // CIFAR-style 18-layer residual network, channels 64..512 (N = 512).
  static BackboneConfig resnet18(int height, int width, int classes);
  static BackboneConfig by_name(const std::string& arch, int height, int width, int classes);
};

// Analytic forward FLOPs: 2*k^2*Cin*Cout*Hout*Wout per convolution (stem,
// block and projection convolutions) plus 2*fan_in*fan_out for the head.
std::uint64_t count_flops(const BackboneConfig& config, int height, int width);

// Stacks volumes into the network's [C][N][H][W] input layout.
template <typename T>
nn::Tensor<T> pack_batch(std::span<const Volume* const> samples);

// Backbone feature extractor followed by a masked linear head:
//   logits = W (features * mask) + b
template <typename T>
class Network {
 public:
  explicit Network(const BackboneConfig& config);

  const BackboneConfig& config() const { return config_; }
  int feature_dim() const { return config_.feature_dim(); }
  int num_classes() const { return config_.num_classes; }

  void init(Rng& rng);

  // features: row-major [N][feature_dim].
  void extract(const nn::Tensor<T>& input, std::vector<T>& features, bool training);
  // masks: row-major [N][feature_dim] of 0/1, or empty for an all-ones mask.
  // logits: row-major [N][num_classes].
  void classify(std::span<const T> features, std::span<const std::uint8_t> masks,
                std::vector<T>& logits);

  // Accumulates head gradients and returns d(loss)/d(features) with the mask
  // applied, using the features/masks of the last classify call.
  void backward_head(std::span<const T> dlogits, std::vector<T>& dfeatures);
  // Accumulates backbone gradients. Writes d(loss)/d(input) when `dinput`
  // is non-null.
  void backward_features(std::span<const T> dfeatures, nn::Tensor<T>* dinput);

  // Single-sample evaluation-mode helpers.
  std::vector<T> extract_one(const Volume& map);
  std::vector<T> classify_one(std::span<const T> features, std::span<const std::uint8_t> mask);

  std::vector<nn::Param<T>*> params();
  std::vector<nn::Buffer<T>*> buffers();
  void zero_grad();
  std::size_t param_count();

 private:
  BackboneConfig config_;
  nn::Conv2d<T> stem_conv_;
  nn::BatchNorm2d<T> stem_bn_;
  std::vector<std::unique_ptr<nn::BasicBlock<T>>> blocks_;
  nn::Param<T> head_w_;
  nn::Param<T> head_b_;

  nn::Tensor<T> stem_c_, stem_out_;
  std::vector<nn::Tensor<T>> block_out_;
  std::vector<T> features_;
  std::vector<std::uint8_t> masks_;
  nn::Tensor<T> grad_a_, grad_b_;
};

// Named little-endian float32 parameter table with an architecture manifest.
void save_checkpoint(Network<float>& net, const std::string& path);
void load_checkpoint(Network<float>& net, const std::string& path);

}  // namespace clfd::model

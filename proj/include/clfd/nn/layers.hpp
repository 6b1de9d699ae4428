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

#include <string>
#include <vector>

#include "clfd/nn/tensor.hpp"
#include "clfd/rng.hpp"

namespace clfd::nn {

// Square-kernel convolution without bias, evaluated as im2col + GEMM.
template <typename T>
class Conv2d {
 public:
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride,
         int pad);

  void init(Rng& rng);
  void forward(const Tensor<T>& x, Tensor<T>& y);
  // Accumulates the weight gradient. `dx` may be null when the input
  // gradient is not needed.
  void backward(const Tensor<T>& dy, Tensor<T>* dx);

  int out_size(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }
  int in_channels() const { return cin_; }
  int out_channels() const { return cout_; }
  int kernel() const { return kernel_; }

  Param<T> weight;  // [cout][cin * k * k]

 private:
  int cin_, cout_, kernel_, stride_, pad_;
  int in_n_ = 0, in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
  std::vector<T> cols_;
  std::vector<T> dcols_;
};

// Per-channel batch normalization. Uses batch statistics in training mode and
// running statistics otherwise.
template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d(const std::string& name, int channels);

  void forward(const Tensor<T>& x, Tensor<T>& y, bool training);
  // Overwrites dx.
  void backward(const Tensor<T>& dy, Tensor<T>& dx);

  Param<T> gamma;
  Param<T> beta;
  Buffer<T> running_mean;
  Buffer<T> running_var;

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

 private:
  bool last_training_ = false;
  std::vector<T> xhat_;
  std::vector<T> inv_std_;
};

template <typename T>
void relu_inplace(Tensor<T>& x);
// dy *= (y > 0), where y is the ReLU output.
template <typename T>
void relu_backward_inplace(const Tensor<T>& y, Tensor<T>& dy);

// Two 3x3 convolutions with an identity or 1x1 projection shortcut.
template <typename T>
class BasicBlock {
 public:
  BasicBlock(const std::string& name, int in_channels, int out_channels, int stride);

  void init(Rng& rng);
  void forward(const Tensor<T>& x, Tensor<T>& y, bool training);
  void backward(const Tensor<T>& dy, Tensor<T>& dx);

  void collect(std::vector<Param<T>*>& params, std::vector<Buffer<T>*>& buffers);

 private:
  Conv2d<T> conv1_, conv2_;
  BatchNorm2d<T> bn1_, bn2_;
  bool project_;
  Conv2d<T> proj_conv_;
  BatchNorm2d<T> proj_bn_;

  Tensor<T> c1_, a1_, c2_, b2_, pc_, pb_, out_;
  Tensor<T> g_b2_, g_a1_, g_c1_, g_pc_, g_x_short_;
};

}  // namespace clfd::nn

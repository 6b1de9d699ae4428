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

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

namespace clfd::nn {

// Activation tensor stored channel-outermost: [C][N][H][W]. With this layout a
// convolution over the whole batch is one matrix product and per-channel
// statistics are contiguous rows.
template <typename T>
struct Tensor {
  int c = 0;
  int n = 0;
  int h = 0;
  int w = 0;
  std::vector<T> data;

  void resize(int channels, int batch, int height, int width) {
    c = channels;
    n = batch;
    h = height;
    w = width;
    data.assign(static_cast<std::size_t>(c) * n * h * w, T(0));
  }
  std::size_t spatial() const { return static_cast<std::size_t>(n) * h * w; }
  std::size_t size() const { return data.size(); }
  T* row(int ch) { return data.data() + ch * spatial(); }
  const T* row(int ch) const { return data.data() + ch * spatial(); }
};

// A learnable array with its gradient accumulator.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Param() = default;
  Param(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    value.assign(count, T(0));
    grad.assign(count, T(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

// Non-learnable persistent state (batch-norm running statistics).
template <typename T>
struct Buffer {
  std::string name;
  std::vector<T> value;
};

}  // namespace clfd::nn

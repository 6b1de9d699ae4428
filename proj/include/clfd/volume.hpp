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

#include <cstddef>
#include <span>
#include <vector>

namespace clfd {

// A single real-valued image plane in row-major order.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  Plane() = default;
  Plane(int h, int w, float fill = 0.0f)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  float& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
  float at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
};

// Channel-major C x H x W volume.
struct Volume {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> values;

  Volume() = default;
  Volume(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w),
        values(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return values.size(); }

  float& at(int ch, int r, int c) {
    return values[(static_cast<std::size_t>(ch) * height + r) * width + c];
  }
  float at(int ch, int r, int c) const {
    return values[(static_cast<std::size_t>(ch) * height + r) * width + c];
  }

  std::span<float> channel(int ch) {
    return {values.data() + ch * plane_size(), plane_size()};
  }
  std::span<const float> channel(int ch) const {
    return {values.data() + ch * plane_size(), plane_size()};
  }

  Plane plane(int ch) const {
    Plane p(height, width);
    auto src = channel(ch);
    p.values.assign(src.begin(), src.end());
    return p;
  }

  bool same_shape(const Volume& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

}  // namespace clfd

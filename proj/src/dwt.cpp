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

#include "clfd/dwt.hpp"

#include <string>

#include "clfd/errors.hpp"

namespace clfd::dwt {
namespace {

void check_even(int height, int width) {
  if (height < 2 || height % 2 != 0) {
    throw DimensionError("haar: height must be even and >= 2, got " + std::to_string(height));
  }
  if (width < 2 || width % 2 != 0) {
    throw DimensionError("haar: width must be even and >= 2, got " + std::to_string(width));
  }
}

}  // namespace

SubbandSet haar_forward(const Plane& plane) {
  check_even(plane.height, plane.width);
  const int h = plane.height / 2;
  const int w = plane.width / 2;
  SubbandSet out{Plane(h, w), Plane(h, w), Plane(h, w), Plane(h, w)};
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const float a = plane.at(2 * i, 2 * j);
      const float b = plane.at(2 * i, 2 * j + 1);
      const float c = plane.at(2 * i + 1, 2 * j);
      const float d = plane.at(2 * i + 1, 2 * j + 1);
      out.ll.at(i, j) = 0.5f * (a + b + c + d);
      out.lh.at(i, j) = 0.5f * (a - b + c - d);
      out.hl.at(i, j) = 0.5f * (a + b - c - d);
      out.hh.at(i, j) = 0.5f * (a - b - c + d);
    }
  }
  return out;
}

Plane haar_inverse(const SubbandSet& s) {
  const auto same = [&](const Plane& p) {
    return p.height == s.ll.height && p.width == s.ll.width;
  };
  if (!same(s.lh) || !same(s.hl) || !same(s.hh)) {
    throw ShapeError("haar_inverse: subbands differ in shape");
  }
  const int h = s.ll.height;
  const int w = s.ll.width;
  Plane out(2 * h, 2 * w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const float ll = s.ll.at(i, j);
      const float lh = s.lh.at(i, j);
      const float hl = s.hl.at(i, j);
      const float hh = s.hh.at(i, j);
      out.at(2 * i, 2 * j) = 0.5f * (ll + lh + hl + hh);
      out.at(2 * i, 2 * j + 1) = 0.5f * (ll - lh + hl - hh);
      out.at(2 * i + 1, 2 * j) = 0.5f * (ll + lh - hl - hh);
      out.at(2 * i + 1, 2 * j + 1) = 0.5f * (ll - lh - hl + hh);
    }
  }
  return out;
}

std::vector<SubbandSet> dwt_image(const Volume& image) {
  check_even(image.height, image.width);
  std::vector<SubbandSet> out;
  out.reserve(image.channels);
  for (int ch = 0; ch < image.channels; ++ch) out.push_back(haar_forward(image.plane(ch)));
  return out;
}

void low_band(const Volume& image, std::vector<float>& out) {
  check_even(image.height, image.width);
  const int h = image.height / 2;
  const int w = image.width / 2;
  out.resize(static_cast<std::size_t>(image.channels) * h * w);
  std::size_t k = 0;
  for (int ch = 0; ch < image.channels; ++ch) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        out[k++] = 0.5f * (image.at(ch, 2 * i, 2 * j) + image.at(ch, 2 * i, 2 * j + 1) +
                           image.at(ch, 2 * i + 1, 2 * j) + image.at(ch, 2 * i + 1, 2 * j + 1));
      }
    }
  }
}

}  // namespace clfd::dwt

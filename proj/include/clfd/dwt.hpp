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

#include <vector>

#include "clfd/volume.hpp"

namespace clfd::dwt {

// Single-level orthonormal Haar subbands of one plane. Each subband is
// (height/2) x (width/2).
struct SubbandSet {
  Plane ll;
  Plane lh;
  Plane hl;
  Plane hh;

  int height() const { return ll.height; }
  int width() const { return ll.width; }
};

// For every 2x2 block [[a, b], [c, d]]:
//   ll = (a+b+c+d)/2, lh = (a-b+c-d)/2, hl = (a+b-c-d)/2, hh = (a-b-c+d)/2.
// Throws DimensionError when either side is odd or smaller than 2.
SubbandSet haar_forward(const Plane& plane);

// Exact inverse of haar_forward. Throws ShapeError on mismatched subbands.
Plane haar_inverse(const SubbandSet& subbands);

// Per-channel transform, channel order preserved.
std::vector<SubbandSet> dwt_image(const Volume& image);

// Writes the low-frequency subband of every channel of `image`, concatenated
// channel by channel, into `out` (length C * H/2 * W/2).
void low_band(const Volume& image, std::vector<float>& out);

}  // namespace clfd::dwt

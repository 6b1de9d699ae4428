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

#include <cmath>

#include "clfd/dwt.hpp"
#include "clfd/errors.hpp"
#include "doctest.h"
#include "helpers.hpp"

using clfd::Plane;
using clfd::Rng;
using clfd::Volume;
namespace dwt = clfd::dwt;

namespace {

Plane plane_of(std::initializer_list<std::initializer_list<float>> rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.begin()->size());
  Plane p(h, w);
  int r = 0;
  for (const auto& row : rows) {
    int c = 0;
    for (float v : row) p.at(r, c++) = v;
    ++r;
  }
  return p;
}

// Separable filter bank: rows filtered and decimated with L = [1,1]/sqrt2 and
// H = [1,-1]/sqrt2, then columns. Band naming follows the block formulas:
// lh = row high-pass + column low-pass.
struct Bank {
  std::vector<double> ll, lh, hl, hh;
};

Bank filter_bank(const Plane& p) {
  const double s = 1.0 / std::sqrt(2.0);
  const int h = p.height, w = p.width, hw = w / 2, hh = h / 2;
  std::vector<double> lo(static_cast<std::size_t>(h) * hw), hi(lo.size());
  for (int r = 0; r < h; ++r) {
    for (int j = 0; j < hw; ++j) {
      const double a = p.at(r, 2 * j), b = p.at(r, 2 * j + 1);
      lo[r * hw + j] = s * (a + b);
      hi[r * hw + j] = s * (a - b);
    }
  }
  Bank out;
  for (auto* v : {&out.ll, &out.lh, &out.hl, &out.hh}) v->resize(static_cast<std::size_t>(hh) * hw);
  for (int i = 0; i < hh; ++i) {
    for (int j = 0; j < hw; ++j) {
      const double l0 = lo[2 * i * hw + j], l1 = lo[(2 * i + 1) * hw + j];
      const double h0 = hi[2 * i * hw + j], h1 = hi[(2 * i + 1) * hw + j];
      out.ll[i * hw + j] = s * (l0 + l1);
      out.hl[i * hw + j] = s * (l0 - l1);
      out.lh[i * hw + j] = s * (h0 + h1);
      out.hh[i * hw + j] = s * (h0 - h1);
    }
  }
  return out;
}

double max_abs_diff(const Plane& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < b.size(); ++i) m = std::max(m, std::abs(a.values[i] - b[i]));
  return m;
}

double energy(const Plane& p) {
  double e = 0;
  for (float v : p.values) e += static_cast<double>(v) * v;
  return e;
}

}  // namespace

TEST_CASE("haar_forward on the hand-evaluated 2x2 block") {
  auto s = dwt::haar_forward(plane_of({{4, 2}, {2, 0}}));
  CHECK(s.ll.at(0, 0) == 4.0f);
  CHECK(s.lh.at(0, 0) == 2.0f);
  CHECK(s.hl.at(0, 0) == 2.0f);
  CHECK(s.hh.at(0, 0) == 0.0f);
}

TEST_CASE("constant plane has no high-frequency content") {
  const float c = 3.25f;
  auto s = dwt::haar_forward(Plane(6, 8, c));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      CHECK(s.ll.at(i, j) == doctest::Approx(2 * c));
      CHECK(s.lh.at(i, j) == 0.0f);
      CHECK(s.hl.at(i, j) == 0.0f);
      CHECK(s.hh.at(i, j) == 0.0f);
    }
  }
}

TEST_CASE("haar_inverse examples") {
  dwt::SubbandSet s{Plane(1, 1, 4), Plane(1, 1, 2), Plane(1, 1, 2), Plane(1, 1, 0)};
  auto p = dwt::haar_inverse(s);
  REQUIRE(p.height == 2);
  CHECK(p.at(0, 0) == 4.0f);
  CHECK(p.at(0, 1) == 2.0f);
  CHECK(p.at(1, 0) == 2.0f);
  CHECK(p.at(1, 1) == 0.0f);

  dwt::SubbandSet c{Plane(2, 3, 2 * 1.5f), Plane(2, 3), Plane(2, 3), Plane(2, 3)};
  auto q = dwt::haar_inverse(c);
  for (float v : q.values) CHECK(v == 1.5f);
}

TEST_CASE("block formulas agree with the separable filter bank") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 2 * (1 + static_cast<int>(rng.below(12)));
    const int w = 2 * (1 + static_cast<int>(rng.below(12)));
    auto p = clfd::test::random_plane(h, w, rng, -5, 5);
    auto s = dwt::haar_forward(p);
    auto bank = filter_bank(p);
    CHECK(max_abs_diff(s.ll, bank.ll) < 1e-5);
    CHECK(max_abs_diff(s.lh, bank.lh) < 1e-5);
    CHECK(max_abs_diff(s.hl, bank.hl) < 1e-5);
    CHECK(max_abs_diff(s.hh, bank.hh) < 1e-5);
  }
}

TEST_CASE("reconstruction, energy and linearity on random planes") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 2 * (1 + static_cast<int>(rng.below(20)));
    const int w = 2 * (1 + static_cast<int>(rng.below(20)));
    auto x = clfd::test::random_plane(h, w, rng);
    auto y = clfd::test::random_plane(h, w, rng);
    auto sx = dwt::haar_forward(x);
    auto back = dwt::haar_inverse(sx);
    double err = 0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
      err = std::max(err, static_cast<double>(std::abs(back.values[i] - x.values[i])));
    }
    CHECK(err <= 1e-6);

    const double e_in = energy(x);
    const double e_out = energy(sx.ll) + energy(sx.lh) + energy(sx.hl) + energy(sx.hh);
    CHECK(std::abs(e_out - e_in) <= 1e-5 * e_in);

    const float a = 0.75f, b = -1.5f;
    Plane combo(h, w);
    for (std::size_t i = 0; i < combo.values.size(); ++i) {
      combo.values[i] = a * x.values[i] + b * y.values[i];
    }
    auto sc = dwt::haar_forward(combo);
    auto sy = dwt::haar_forward(y);
    double lin = 0;
    for (std::size_t i = 0; i < sc.ll.values.size(); ++i) {
      lin = std::max(lin, static_cast<double>(std::abs(
                              sc.hh.values[i] - (a * sx.hh.values[i] + b * sy.hh.values[i]))));
      lin = std::max(lin, static_cast<double>(std::abs(
                              sc.ll.values[i] - (a * sx.ll.values[i] + b * sy.ll.values[i]))));
    }
    CHECK(lin <= 1e-5);
  }
}

TEST_CASE("odd or degenerate sizes are rejected") {
  CHECK_THROWS_AS(dwt::haar_forward(Plane(3, 4)), clfd::DimensionError);
  CHECK_THROWS_AS(dwt::haar_forward(Plane(4, 5)), clfd::DimensionError);
  CHECK_THROWS_AS(dwt::haar_forward(Plane(0, 0)), clfd::DimensionError);
  dwt::SubbandSet bad{Plane(2, 2), Plane(2, 2), Plane(2, 3), Plane(2, 2)};
  CHECK_THROWS_AS(dwt::haar_inverse(bad), clfd::ShapeError);
}

TEST_CASE("dwt_image is per-channel and order preserving") {
  Rng rng(5);
  auto img = clfd::test::random_volume(3, 32, 32, rng);
  auto sets = dwt::dwt_image(img);
  REQUIRE(sets.size() == 3);
  for (int ch = 0; ch < 3; ++ch) {
    CHECK(sets[ch].height() == 16);
    CHECK(sets[ch].width() == 16);
    auto direct = dwt::haar_forward(img.plane(ch));
    CHECK(direct.ll.values == sets[ch].ll.values);
    CHECK(direct.hh.values == sets[ch].hh.values);
  }

  Volume one(1, 2, 2);
  one.values = {4, 2, 2, 0};
  auto s1 = dwt::dwt_image(one);
  REQUIRE(s1.size() == 1);
  CHECK(s1[0].ll.at(0, 0) == 4.0f);
  CHECK(s1[0].lh.at(0, 0) == 2.0f);

  for (const auto& s : dwt::dwt_image(Volume(3, 4, 4))) {
    for (const auto* p : {&s.ll, &s.lh, &s.hl, &s.hh}) {
      for (float v : p->values) CHECK(v == 0.0f);
    }
  }
  CHECK_THROWS_AS(dwt::dwt_image(Volume(3, 5, 4)), clfd::DimensionError);
}

TEST_CASE("low_band concatenates ll planes channel by channel") {
  Rng rng(9);
  auto img = clfd::test::random_volume(3, 8, 6, rng);
  std::vector<float> out;
  dwt::low_band(img, out);
  REQUIRE(out.size() == 3u * 4 * 3);
  auto sets = dwt::dwt_image(img);
  for (int ch = 0; ch < 3; ++ch) {
    for (int i = 0; i < 12; ++i) CHECK(out[ch * 12 + i] == sets[ch].ll.values[i]);
  }
}

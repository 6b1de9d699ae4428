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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <doctest.h>

#include "clfd/errors.hpp"
#include "clfd/replay.hpp"
#include "helpers.hpp"

using clfd::Rng;
using clfd::Volume;
using clfd::replay::BufferEntry;
using clfd::replay::Precision;
using clfd::replay::ReservoirBuffer;

namespace {

BufferEntry tagged(int id, int c = 3, int h = 16, int w = 16) {
  BufferEntry e;
  e.map = Volume(c, h, w, static_cast<float>(id));
  e.label = id % 10;
  e.task_id = id / 100;
  return e;
}

}  // namespace

TEST_CASE("fill phase appends in order") {
  ReservoirBuffer buf(50);
  Rng rng(1);
  CHECK(buf.insert(tagged(0), rng) == 0);
  CHECK(buf.seen() == 1);
  CHECK(buf.size() == 1);
  for (int i = 1; i < 50; ++i) CHECK(buf.insert(tagged(i), rng) == i);
  CHECK(buf.size() == 50);
  for (int i = 50; i < 400; ++i) buf.insert(tagged(i), rng);
  CHECK(buf.size() == 50);
  CHECK(buf.seen() == 400);
}

TEST_CASE("capacity one keeps the second item half the time") {
  // The second item survives iff the draw over {0, 1} is 0.
  int kept = 0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    ReservoirBuffer buf(1);
    Rng rng(1000 + t);
    buf.insert(tagged(1), rng);
    buf.insert(tagged(2), rng);
    kept += buf.entry(0).map.values[0] == 2.0f;
  }
  const double p = static_cast<double>(kept) / trials;
  CHECK(std::abs(p - 0.5) <= 3 * std::sqrt(0.25 / trials));
}

TEST_CASE("zero capacity discards everything") {
  ReservoirBuffer buf(0);
  Rng rng(2);
  CHECK(buf.insert(tagged(1), rng) == -1);
  CHECK(buf.empty());
  CHECK(buf.seen() == 1);
}

TEST_CASE("inclusion frequency is uniform over the stream") {
  const int m = 1000, cap = 50, reps = 2000;
  std::vector<int> hits(m, 0);
  for (int r = 0; r < reps; ++r) {
    ReservoirBuffer buf(cap);
    Rng rng(Rng::derive(99, r));
    for (int i = 0; i < m; ++i) {
      BufferEntry e;
      e.map = Volume(1, 1, 1, static_cast<float>(i));
      buf.insert(std::move(e), rng);
    }
    for (const auto& e : buf.entries()) ++hits[static_cast<int>(e.map.values[0])];
  }
  // every rep holds exactly cap items; per item, 4 sigma keeps the chance of a
  // false alarm over 1000 items near 6%
  long total = 0;
  for (int h : hits) total += h;
  CHECK(total == long(cap) * reps);
  const double sigma = std::sqrt(0.05 * 0.95 / reps);
  int outside = 0;
  for (int h : hits) outside += std::abs(h / double(reps) - 0.05) > 4 * sigma;
  CHECK(outside == 0);
}

TEST_CASE("sampling rules") {
  Rng rng(3);
  ReservoirBuffer one(10);
  one.insert(tagged(7), rng);
  auto rep = one.sample_indices(4, rng);
  CHECK(rep == std::vector<std::size_t>{0, 0, 0, 0});

  ReservoirBuffer full(20);
  for (int i = 0; i < 20; ++i) full.insert(tagged(i), rng);
  auto perm = full.sample_indices(20, rng);
  std::sort(perm.begin(), perm.end());
  for (std::size_t i = 0; i < 20; ++i) CHECK(perm[i] == i);

  auto few = full.sample_indices(7, rng);
  CHECK(std::set<std::size_t>(few.begin(), few.end()).size() == 7);

  ReservoirBuffer empty(5);
  CHECK_THROWS_AS(empty.sample_indices(1, rng), clfd::PreconditionError);

  Rng a(5), b(5);
  CHECK(full.sample_indices(9, a) == full.sample_indices(9, b));
}

TEST_CASE("sampling frequency is uniform") {
  Rng rng(4);
  ReservoirBuffer buf(50);
  for (int i = 0; i < 50; ++i) buf.insert(tagged(i, 1, 1, 1), rng);
  std::vector<int> hits(50, 0);
  const int draws = 100000;
  // single draws exercise the without-replacement path
  for (int i = 0; i < draws; ++i) ++hits[buf.sample_indices(1, rng)[0]];
  for (int h : hits) CHECK(std::abs(h / double(draws) - 0.02) <= 0.002);

  std::fill(hits.begin(), hits.end(), 0);
  for (int i = 0; i < draws / 100; ++i) {
    for (auto k : buf.sample_indices(100, rng)) ++hits[k];
  }
  for (int h : hits) CHECK(std::abs(h / double(draws) - 0.02) <= 0.002);
}

TEST_CASE("footprint arithmetic") {
  Rng rng(6);
  ReservoirBuffer empty(50);
  CHECK(empty.memory_footprint() == ReservoirBuffer::kHeaderBytes);

  ReservoirBuffer one(50);
  one.insert(tagged(1), rng);
  const std::size_t payload = 3 * 16 * 16 * 4;
  CHECK(payload == 3072);
  CHECK(one.entry_bytes() == payload + 8);
  CHECK(double(payload) / (3 * 32 * 32 * 4) == 0.25);

  ReservoirBuffer with_logits(50);
  for (int i = 0; i < 50; ++i) {
    auto e = tagged(i);
    e.logits = std::vector<float>(10, 0.5f);
    with_logits.insert(std::move(e), rng);
  }
  CHECK(with_logits.memory_footprint() ==
        ReservoirBuffer::kHeaderBytes + 50 * (3072 + 40 + 8));
}

TEST_CASE("shape changes are rejected") {
  Rng rng(7);
  ReservoirBuffer buf(5);
  buf.insert(tagged(1), rng);
  CHECK_THROWS_AS(buf.insert(tagged(2, 3, 8, 8), rng), clfd::ShapeError);
  auto with = tagged(3);
  with.logits = std::vector<float>(4);
  CHECK_THROWS_AS(buf.insert(std::move(with), rng), clfd::ShapeError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  clfd::test::TempDir dir("replay");
  Rng rng(8);
  ReservoirBuffer buf(6);
  for (int i = 0; i < 13; ++i) {
    BufferEntry e;
    e.map = clfd::test::random_volume(3, 4, 4, rng);
    e.label = i % 4;
    e.task_id = i / 4;
    e.logits = std::vector<float>{float(i), -1.5f, 0.25f};
    buf.insert(std::move(e), rng);
  }
  const std::string path = dir.file("buffer.bin");
  buf.save(path);
  CHECK(std::filesystem::file_size(path) == buf.memory_footprint());
  auto back = ReservoirBuffer::load(path);
  CHECK(back.capacity() == 6);
  CHECK(back.seen() == 13);
  REQUIRE(back.size() == buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    CHECK(back.entry(i).map.values == buf.entry(i).map.values);
    CHECK(back.entry(i).label == buf.entry(i).label);
    CHECK(back.entry(i).task_id == buf.entry(i).task_id);
    CHECK(*back.entry(i).logits == *buf.entry(i).logits);
  }

  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out.put('x');
  }
  CHECK_THROWS_AS(ReservoirBuffer::load(path), clfd::FormatError);
}

TEST_CASE("half precision storage") {
  clfd::test::TempDir dir("replay16");
  Rng rng(9);
  ReservoirBuffer buf(4, Precision::kFloat16);
  BufferEntry e;
  e.map = Volume(3, 2, 2, 0.1f);
  buf.insert(e, rng);
  const float stored = buf.entry(0).map.values[0];
  CHECK(stored != 0.1f);
  CHECK(std::abs(stored - 0.1f) < 1e-4);
  CHECK(buf.entry_bytes() == 3 * 2 * 2 * 2 + 8);
  buf.save(dir.file("b.bin"));
  auto back = ReservoirBuffer::load(dir.file("b.bin"));
  CHECK(back.entry(0).map.values == buf.entry(0).map.values);
}

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

#include "clfd/replay.hpp"

#include <fstream>
#include <numeric>

#include <Eigen/Core>

#include "clfd/binary_io.hpp"
#include "clfd/errors.hpp"

namespace clfd::replay {
namespace {

constexpr char kMagic[8] = {'C', 'L', 'F', 'D', 'B', 'U', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void quantize_half(Volume& map) {
  for (auto& v : map.values) v = static_cast<float>(Eigen::half(v));
}

ReservoirBuffer::ReservoirBuffer(std::size_t capacity, Precision precision)
    : capacity_(capacity), precision_(precision) {
  entries_.reserve(capacity);
}

void ReservoirBuffer::replace_map(std::size_t i, Volume map) {
  BufferEntry& e = entries_.at(i);
  if (map.channels != map_c_ || map.height != map_h_ || map.width != map_w_) {
    throw ShapeError("reservoir: replacement map shape differs from buffer shape");
  }
  if (precision_ == Precision::kFloat16) quantize_half(map);
  e.map = std::move(map);
}

long ReservoirBuffer::insert(BufferEntry entry, Rng& rng) {
  if (capacity_ == 0) {
    ++seen_;
    return -1;
  }
  const std::size_t logits = entry.logits ? entry.logits->size() : 0;
  if (entries_.empty() && seen_ == 0) {
    map_c_ = entry.map.channels;
    map_h_ = entry.map.height;
    map_w_ = entry.map.width;
    logits_dim_ = logits;
  } else if (entry.map.channels != map_c_ || entry.map.height != map_h_ ||
             entry.map.width != map_w_ || logits != logits_dim_) {
    throw ShapeError("reservoir: entry shape differs from buffer shape");
  }
  if (precision_ == Precision::kFloat16) quantize_half(entry.map);

  long slot = -1;
  if (seen_ < capacity_) {
    entries_.push_back(std::move(entry));
    slot = static_cast<long>(entries_.size() - 1);
  } else {
    const std::uint64_t r = rng.below(seen_ + 1);
    if (r < capacity_) {
      entries_[r] = std::move(entry);
      slot = static_cast<long>(r);
    }
  }
  ++seen_;
  return slot;
}

std::vector<std::size_t> ReservoirBuffer::sample_indices(std::size_t k, Rng& rng) const {
  if (entries_.empty()) throw PreconditionError("reservoir: cannot sample from an empty buffer");
  const std::size_t n = entries_.size();
  std::vector<std::size_t> out;
  out.reserve(k);
  if (k > n) {
    for (std::size_t i = 0; i < k; ++i) out.push_back(rng.below(n));
    return out;
  }
  // partial Fisher-Yates
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(perm[i], perm[j]);
    out.push_back(perm[i]);
  }
  return out;
}

std::vector<const BufferEntry*> ReservoirBuffer::sample_batch(std::size_t k, Rng& rng) const {
  std::vector<const BufferEntry*> out;
  for (std::size_t i : sample_indices(k, rng)) out.push_back(&entries_[i]);
  return out;
}

std::size_t ReservoirBuffer::entry_bytes() const {
  const std::size_t scalar = precision_ == Precision::kFloat16 ? 2 : 4;
  const std::size_t map = static_cast<std::size_t>(map_c_) * map_h_ * map_w_;
  return map * scalar + logits_dim_ * 4 + 8;
}

std::size_t ReservoirBuffer::memory_footprint() const {
  return kHeaderBytes + entries_.size() * entry_bytes();
}

void ReservoirBuffer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  io::write_bytes(out, kMagic, sizeof(kMagic));
  io::write_u32(out, kVersion);
  io::write_u64(out, capacity_);
  io::write_u64(out, seen_);
  io::write_u64(out, entries_.size());
  io::write_u32(out, static_cast<std::uint32_t>(map_c_));
  io::write_u32(out, static_cast<std::uint32_t>(map_h_));
  io::write_u32(out, static_cast<std::uint32_t>(map_w_));
  io::write_u32(out, static_cast<std::uint32_t>(logits_dim_));
  io::write_u32(out, static_cast<std::uint32_t>(precision_));
  for (const auto& e : entries_) {
    if (precision_ == Precision::kFloat16) {
      for (float v : e.map.values) {
        const std::uint16_t bits = Eigen::numext::bit_cast<std::uint16_t>(Eigen::half(v));
        io::write_bytes(out, &bits, 2);
      }
    } else {
      io::write_f32_array(out, e.map.values);
    }
    if (logits_dim_ > 0) io::write_f32_array(out, *e.logits);
    io::write_u32(out, static_cast<std::uint32_t>(e.label));
    io::write_u32(out, static_cast<std::uint32_t>(e.task_id));
  }
  if (!out) throw FormatError("write failed: " + path);
}

ReservoirBuffer ReservoirBuffer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  char magic[8];
  io::read_bytes(in, magic, sizeof(magic));
  if (!std::equal(magic, magic + 8, kMagic)) throw FormatError(path + ": not a buffer checkpoint");
  if (io::read_u32(in) != kVersion) throw FormatError(path + ": unsupported version");
  const std::uint64_t capacity = io::read_u64(in);
  const std::uint64_t seen = io::read_u64(in);
  const std::uint64_t count = io::read_u64(in);
  const int c = static_cast<int>(io::read_u32(in));
  const int h = static_cast<int>(io::read_u32(in));
  const int w = static_cast<int>(io::read_u32(in));
  const std::uint32_t logits_dim = io::read_u32(in);
  const std::uint32_t precision = io::read_u32(in);
  if (precision != 1 && precision != 2) throw FormatError(path + ": unknown precision");
  if (count > capacity || count > seen) throw FormatError(path + ": inconsistent entry count");

  ReservoirBuffer buf(capacity, static_cast<Precision>(precision));
  buf.seen_ = seen;
  buf.map_c_ = c;
  buf.map_h_ = h;
  buf.map_w_ = w;
  buf.logits_dim_ = logits_dim;
  for (std::uint64_t i = 0; i < count; ++i) {
    BufferEntry e;
    e.map = Volume(c, h, w);
    if (buf.precision_ == Precision::kFloat16) {
      for (auto& v : e.map.values) {
        std::uint16_t bits;
        io::read_bytes(in, &bits, 2);
        v = static_cast<float>(Eigen::numext::bit_cast<Eigen::half>(bits));
      }
    } else {
      io::read_f32_array(in, e.map.values);
    }
    if (logits_dim > 0) {
      e.logits.emplace(logits_dim);
      io::read_f32_array(in, *e.logits);
    }
    e.label = static_cast<int>(io::read_u32(in));
    e.task_id = static_cast<int>(io::read_u32(in));
    buf.entries_.push_back(std::move(e));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path + ": trailing bytes");
  return buf;
}

}  // namespace clfd::replay

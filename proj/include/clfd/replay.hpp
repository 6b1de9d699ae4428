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
#include <optional>
#include <string>
#include <vector>

#include "clfd/rng.hpp"
#include "clfd/volume.hpp"

namespace clfd::replay {

struct BufferEntry {
  Volume map;
  int label = 0;
  int task_id = 0;
  std::optional<std::vector<float>> logits;  // recorded network outputs (DER++)
};

enum class Precision : std::uint32_t { kFloat32 = 1, kFloat16 = 2 };

// Fixed-capacity episodic memory maintained by reservoir sampling.
//
// Every entry shares one map shape and one logits dimension (0 when entries
// carry no logits); the first insertion fixes both.
class ReservoirBuffer {
 public:
  static constexpr std::size_t kHeaderBytes = 56;

  explicit ReservoirBuffer(std::size_t capacity, Precision precision = Precision::kFloat32);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::uint64_t seen() const { return seen_; }
  Precision precision() const { return precision_; }
  const std::vector<BufferEntry>& entries() const { return entries_; }
  const BufferEntry& entry(std::size_t i) const { return entries_.at(i); }

  // Algorithm R: append while filling; afterwards draw r uniform in
  // [0, seen] and overwrite slot r when r < capacity. Returns the slot written,
  // or -1 when the entry was discarded. A zero-capacity buffer discards all.
  long insert(BufferEntry entry, Rng& rng);

  // Overwrites the map of slot i, rounding it as insert would.
  void replace_map(std::size_t i, Volume map);

  // k indices, without replacement when k <= size, with replacement otherwise.
  // Throws PreconditionError on an empty buffer.
  std::vector<std::size_t> sample_indices(std::size_t k, Rng& rng) const;
  std::vector<const BufferEntry*> sample_batch(std::size_t k, Rng& rng) const;

  // Exact byte count of the checkpoint file for the current contents.
  std::size_t memory_footprint() const;
  std::size_t entry_bytes() const;

  // Header: magic "CLFDBUF1", version, capacity, seen, entry count, map shape
  // (C, H, W), logits dim, precision. Entries: map payload, logits payload
  // (float32), label (u32), task id (u32). All little-endian.
  void save(const std::string& path) const;
  static ReservoirBuffer load(const std::string& path);

 private:
  std::size_t capacity_;
  Precision precision_;
  std::uint64_t seen_ = 0;
  std::vector<BufferEntry> entries_;
  int map_c_ = 0, map_h_ = 0, map_w_ = 0;
  std::size_t logits_dim_ = 0;
};

// Rounds a map through IEEE half precision, as stored by a float16 buffer.
void quantize_half(Volume& map);

}  // namespace clfd::replay

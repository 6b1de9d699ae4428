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

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "clfd/errors.hpp"

// Little-endian primitives shared by every on-disk format.
namespace clfd::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

inline void write_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& in, void* data, std::size_t n) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError("unexpected end of file");
}

inline void write_u32(std::ostream& out, std::uint32_t v) { write_bytes(out, &v, 4); }
inline void write_u64(std::ostream& out, std::uint64_t v) { write_bytes(out, &v, 8); }
inline void write_f32(std::ostream& out, float v) { write_bytes(out, &v, 4); }

inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v;
  read_bytes(in, &v, 4);
  return v;
}
inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v;
  read_bytes(in, &v, 8);
  return v;
}
inline float read_f32(std::istream& in) {
  float v;
  read_bytes(in, &v, 4);
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  write_bytes(out, s.data(), s.size());
}

inline std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  if (n > (1u << 20)) throw FormatError("string length out of range");
  std::string s(n, '\0');
  read_bytes(in, s.data(), n);
  return s;
}

inline void write_f32_array(std::ostream& out, std::span<const float> v) {
  write_bytes(out, v.data(), v.size() * sizeof(float));
}

inline void read_f32_array(std::istream& in, std::span<float> v) {
  read_bytes(in, v.data(), v.size() * sizeof(float));
}

// 64-bit FNV-1a, used as a content digest for weights and masks.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ull;
    }
  }
  template <typename T>
  void update(std::span<const T> v) {
    update(v.data(), v.size_bytes());
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

std::string hex64(std::uint64_t v);

}  // namespace clfd::io

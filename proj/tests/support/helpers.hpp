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

#include <filesystem>
#include <string>

#include "clfd/rng.hpp"
#include "clfd/volume.hpp"

namespace clfd::test {

inline Plane random_plane(int h, int w, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Plane p(h, w);
  for (auto& v : p.values) v = static_cast<float>(rng.uniform(lo, hi));
  return p;
}

inline Volume random_volume(int c, int h, int w, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Volume v(c, h, w);
  for (auto& x : v.values) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::hash<std::string>{}(tag) ^ reinterpret_cast<std::uintptr_t>(this));
    path_ = std::filesystem::temp_directory_path() /
            ("clfd_" + tag + "_" + std::to_string(rng.next() % 1000000007ull));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace clfd::test

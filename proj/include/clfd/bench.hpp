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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "clfd/rng.hpp"
#include "clfd/volume.hpp"

// Dataset ingestion, class-incremental task splits, normalization and
// even-aligned augmentation.
namespace clfd::bench {

enum class Format { kCifarBinary, kImageDir, kSynthetic };

Format parse_format(const std::string& name);
std::string format_name(Format format);

struct DatasetSource {
  Format format = Format::kCifarBinary;
  std::string path;
  std::vector<std::string> class_names;
  int num_classes = 10;
  // Per-class caps applied after loading (0 keeps everything). Samples are
  // kept in file order.
  int train_per_class = 0;
  int test_per_class = 0;
};

struct LabeledImages {
  std::vector<Volume> images;
  std::vector<int> labels;
};

struct Dataset {
  LabeledImages train;
  LabeledImages test;
  int num_classes = 0;
  std::vector<std::string> class_names;
  std::array<float, 3> mean{0.f, 0.f, 0.f};
  std::array<float, 3> stddev{1.f, 1.f, 1.f};
};

inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * 32 * 32;

// Parses one CIFAR binary batch: records of 1 label byte + 3072 pixel bytes
// (R, G, B planes, row-major 32x32). Pixels map to [0, 1]. Throws FormatError
// for truncated files or labels >= num_classes.
LabeledImages read_cifar_batch(const std::string& path, int num_classes = 10);
void write_cifar_batch(const LabeledImages& data, const std::string& path);

// Loads a dataset (unnormalized pixels in [0, 1]).
//  cifar_binary: `path` is a directory holding data_batch_*.bin and
//                test_batch.bin (batches.meta.txt supplies class names).
//  image_dir:    `path`/train/<class>/* and `path`/test/<class>/*; without
//                train/ and test/, `path`/<class>/* with every fifth file
//                (sorted order) held out for test. A `labels.csv`
//                (file,label) in a split directory replaces class
//                subdirectories. PNG and binary PPM/PGM are decoded.
//  synthetic:    see make_synthetic.
Dataset load(const DatasetSource& source, std::uint64_t seed = 0);

// Per-channel mean/std over the training split.
void compute_normalization(Dataset& data);
// Applies (x - mean) / std to both splits.
void normalize(Dataset& data);

// Procedural class-conditional 32x32 RGB images: each class owns an oriented
// grating frequency, a colour palette and a blob layout; samples vary phase,
// position, contrast and noise.
Dataset make_synthetic(int num_classes, int train_per_class, int test_per_class,
                       std::uint64_t seed, int size = 32);

struct SplitSpec {
  std::vector<std::vector<int>> tasks;

  // n_tasks x classes_per_task contiguous groups: {0,1},{2,3},...
  static SplitSpec contiguous(int num_classes, int classes_per_task);
  // "0,1;2,3;4,5"
  static SplitSpec parse(const std::string& text);
  std::string to_string() const;
};

struct Task {
  std::vector<int> classes;
  std::vector<std::size_t> train;  // indices into Dataset::train
  std::vector<std::size_t> test;   // indices into Dataset::test
};

struct TaskStream {
  std::vector<Task> tasks;
  int num_classes = 0;
  // task index of every class
  std::vector<int> task_of_class;
};

// Validates that the spec partitions the dataset classes, then builds
// per-task index lists with a seeded within-task shuffle of the training
// indices.
TaskStream split_tasks(const Dataset& data, const SplitSpec& spec, std::uint64_t seed);

enum class Space { kPixel, kEncoded };

// Crop offsets are in pixel units and always even, in [0, 2 * pad_pixels].
struct AugmentParams {
  int offset_y = 0;
  int offset_x = 0;
  bool flip = false;
};

inline constexpr int kPixelPad = 4;

// Even offsets from {0, 2, 4, 6, 8}, flip with probability 0.5.
AugmentParams draw_augment(Rng& rng);

// Pixel space: zero pad by 4, crop at (offset_y, offset_x), optional
// horizontal mirror. Encoded space: the same with pad 2 and halved offsets.
Volume augment(const Volume& sample, Space space, const AugmentParams& params,
               bool allow_flip = true);
Volume augment(const Volume& sample, Space space, Rng& rng, bool allow_flip = true);

}  // namespace clfd::bench

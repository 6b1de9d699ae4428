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
#include <string>
#include <vector>

#include "clfd/bench.hpp"
#include "clfd/strategies.hpp"

// Run configuration: flat `key = value` text with dotted sections and `#`
// comments. The key set is closed; unknown keys are rejected with the nearest
// known key as a hint.
namespace clfd::config {

enum class CompareScope { kAll, kLast };

struct RunConfig {
  // run
  std::string run_id = "run";
  std::string output_dir = "runs";
  std::vector<std::uint64_t> seeds{1};
  bool steplog = false;
  bool save_state = false;  // task-boundary checkpoints for resume

  // data
  bench::DatasetSource data;
  std::uint64_t data_seed = 0;  // synthetic generation
  std::string split;            // empty: contiguous groups of classes_per_task
  int classes_per_task = 2;
  bool joint = false;           // one task holding every class

  // model
  std::string arch = "desk";

  // encoder / selection
  bool ffe_enabled = true;
  bool ffe_bias = true;
  double ffe_lr_scale = 1.0;  // encoder step = lr * scale while task 1 trains
  bool ffe_refresh_buffer = false;  // re-encode task-1 buffer maps with the frozen encoder
  bool cffs_enabled = true;
  bool cffs_dropout = true;
  double lambda = 0.5;
  double beta = 2.0;
  double freq_epoch_fraction = 0.4;
  double select_fraction = 0.6;
  CompareScope compare_scope = CompareScope::kAll;

  // replay
  std::size_t buffer_capacity = 50;
  bool buffer_quantize = false;
  strategies::StrategyConfig strategy;

  // augmentation
  bool augment = true;
  bool flip_encoded = true;

  // optimisation
  double lr = 0.1;
  double momentum = 0.0;
  double weight_decay = 0.0;
  double clip = 0.0;  // global gradient-norm clip, 0 disables
  int batch = 32;
  int epochs = 5;

  // metrics
  bool ff_clip = false;

  bench::SplitSpec split_spec() const;
  // floor(freq_epoch_fraction * epochs)
  int frequency_epochs() const;
};

// Parses config text. `origin` prefixes diagnostics ("file:line: ...").
// Throws ConfigError on unknown keys, malformed values, duplicates and
// out-of-range settings.
RunConfig parse(const std::string& text, const std::string& origin = "<config>");
RunConfig load(const std::string& path);

// Applies one `key=value` override on top of an existing config.
void apply_override(RunConfig& config, const std::string& assignment);

// Range and consistency checks; called by parse. Throws ConfigError.
void validate(const RunConfig& config);

// Every key with its current value, one `key = value` per line, in a fixed
// order. parse(dump(c)) reproduces c.
std::string dump(const RunConfig& config);
std::uint64_t digest(const RunConfig& config);

std::vector<std::string> known_keys();
// Nearest known key by edit distance (compared on the full key and on the
// part after the last dot), or empty when nothing is close.
std::string nearest_key(const std::string& key);

}  // namespace clfd::config

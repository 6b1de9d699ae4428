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
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "clfd/bench.hpp"
#include "clfd/cffs.hpp"
#include "clfd/config.hpp"
#include "clfd/ffe.hpp"
#include "clfd/metrics.hpp"
#include "clfd/model.hpp"
#include "clfd/replay.hpp"

// Task-sequence training: per-epoch dropout regimes, masked forward passes,
// counter and buffer maintenance, encoder freezing and evaluation.
namespace clfd::loop {

enum class Mode { kClassIl, kTaskIl };

enum class Regime { kNone, kFrequency, kSemantic };
std::string regime_name(Regime regime);

// Dropout regime of epoch e (1-based) of task t (1-based): frequency for
// t > 1 and e <= frequency_epochs, semantic for e > frequency_epochs, none
// otherwise.
Regime regime_for(int t, int e, int frequency_epochs);

// Loads the configured dataset and applies training-split normalization.
bench::Dataset prepare_dataset(const config::RunConfig& config);

// Independent random streams, one per stochastic subsystem.
struct RngStreams {
  Rng init, data, augment, replay, reservoir, dropout;
  explicit RngStreams(std::uint64_t seed);
};

class Trainer {
 public:
  // `data` must outlive the trainer. `steplog`, when non-null, receives one
  // line per training step, evaluation pass and task boundary.
  Trainer(const config::RunConfig& config, const bench::Dataset& data, std::uint64_t seed,
          std::ostream* steplog = nullptr);
  ~Trainer();

  const config::RunConfig& config() const { return config_; }
  const bench::TaskStream& stream() const { return stream_; }
  int num_tasks() const { return static_cast<int>(stream_.tasks.size()); }
  int completed_tasks() const { return completed_; }

  // Trains task t (1-based, must be completed_tasks() + 1), then evaluates
  // every seen task and fills row t of both accuracy matrices.
  void run_task(int t);
  // Trains without evaluating.
  void train_task(int t);
  // Accuracy on tasks 1..t using the current parameters. Never touches the
  // counter or any training state.
  std::vector<double> evaluate(int t, Mode mode);

  const metrics::AccuracyMatrix& class_il() const { return class_il_; }
  const metrics::AccuracyMatrix& task_il() const { return task_il_; }
  metrics::EfficiencyReport efficiency() const;
  std::uint64_t examples_processed() const { return examples_; }

  model::Network<float>& network() { return *net_; }
  const ffe::EncoderWeights& encoder() const { return encoder_; }
  const cffs::SelectionCounter& counter() const { return counter_; }
  const cffs::DropoutSchedule& schedule() const { return schedule_; }
  const replay::ReservoirBuffer& buffer() const { return buffer_; }
  const std::vector<cffs::ClassSignature>& signatures() const { return signatures_; }
  // Encoder digest recorded after each completed task (index t - 1).
  const std::vector<std::uint64_t>& encoder_digests() const { return encoder_digests_; }
  int input_height() const { return in_h_; }
  int input_width() const { return in_w_; }

  // Task-boundary checkpoint: parameters, optimizer momentum, encoder,
  // buffer, counter, schedule, signatures, random streams and results.
  void save_state(const std::string& dir);
  void load_state(const std::string& dir);

  // Where divergence dumps are written (empty: current directory).
  void set_dump_dir(const std::string& dir) { dump_dir_ = dir; }

 private:
  struct Batch;
  void train_epoch(int t, int e, Regime regime);
  void train_step(int t, int e, Regime regime, const std::vector<std::size_t>& idx);
  void optimizer_step();
  void update_frequency_schedule(int t);
  void update_semantic_schedule(int t);
  Volume model_input(const Volume& image) const;
  std::vector<int> classes_before(int t) const;
  std::vector<int> classes_through(int t) const;
  [[noreturn]] void diverged(int t, int e, double loss);

  config::RunConfig config_;
  const bench::Dataset& data_;
  bench::TaskStream stream_;
  std::uint64_t seed_;
  std::ostream* steplog_;
  RngStreams rng_;
  int in_h_ = 0, in_w_ = 0;
  std::unique_ptr<model::Network<float>> net_;
  std::vector<std::vector<float>> momentum_;
  ffe::EncoderWeights encoder_;
  cffs::SelectionCounter counter_;
  cffs::DropoutSchedule schedule_;
  std::vector<cffs::ClassSignature> signatures_;
  replay::ReservoirBuffer buffer_;
  std::vector<std::size_t> buffer_source_;  // train index per slot, kept during task 1
  metrics::AccuracyMatrix class_il_, task_il_;
  std::vector<std::uint64_t> encoder_digests_;
  int completed_ = 0;
  std::uint64_t step_ = 0;
  std::uint64_t examples_ = 0;
  double step_wall_s_ = 0.0;
  std::vector<double> task_wall_s_;
  std::string dump_dir_;
};

struct RunResult {
  metrics::AccuracyMatrix class_il;
  metrics::AccuracyMatrix task_il;
  metrics::EfficiencyReport efficiency;
  metrics::SummaryRow summary;
  std::vector<std::uint64_t> encoder_digests;
  std::string dir;  // artifact directory, empty when none were written
};

// Summary metrics of a finished run (Class-IL ACC/FF/S/P; NaN where a metric
// needs two or more tasks).
metrics::SummaryRow summarize(const std::string& run_id, const metrics::AccuracyMatrix& class_il,
                              const metrics::EfficiencyReport& efficiency, bool ff_clip);

// Trains every task in order. When `out_dir` is non-empty, writes results
// and summary CSVs, both accuracy matrices, counter and schedule exports, the
// buffer checkpoint, model and encoder checkpoints, a metadata file and (if
// configured) the step log. `resume_dir` restores a saved task-boundary
// state first.
RunResult run_sequence(const config::RunConfig& config, const bench::Dataset& data,
                       std::uint64_t seed, const std::string& out_dir,
                       const std::string& resume_dir = "");

}  // namespace clfd::loop

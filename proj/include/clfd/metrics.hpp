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

#include "clfd/model.hpp"

namespace clfd::metrics {

// R[t][tau]: accuracy on task tau after training task t. Indices are 1-based
// and only tau <= t cells are ever defined.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(int tasks);

  int tasks() const { return tasks_; }
  void set(int t, int tau, double value);
  double at(int t, int tau) const;
  bool defined(int t, int tau) const;
  bool row_complete(int t) const;
  // Last t whose row is complete, 0 if none.
  int completed_rows() const;

  bool operator==(const AccuracyMatrix& o) const = default;

 private:
  std::size_t index(int t, int tau) const;
  int tasks_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> defined_;
};

// (1/t) * sum_{tau=1..t} R[t][tau]
double average_accuracy(const AccuracyMatrix& r, int t);

// (1/(t-1)) * sum_{j<t} max_{j<=i<t} (R[i][j] - R[t][j]). Negative values are
// kept unless `clip` is set, which floors each task's term at zero.
double final_forgetting(const AccuracyMatrix& r, int t, bool clip = false);

struct StabilityPlasticity {
  double stability = 0.0;
  double plasticity = 0.0;
  double tradeoff = 0.0;
};

// S = mean of R[T][tau] over tau < T, P = mean of the diagonal,
// tradeoff = 2SP/(S+P) (0 when S+P = 0). Requires T >= 2.
StabilityPlasticity stability_plasticity(const AccuracyMatrix& r, int t);

// Training FLOPs = 3 x forward FLOPs x examples (backward taken as 2x forward).
double training_flops(const model::BackboneConfig& config, int height, int width,
                      std::uint64_t examples);
double training_flops(const model::BackboneConfig& config, int height, int width,
                      std::uint64_t steps, std::uint64_t batch_per_step);

struct EfficiencyReport {
  double total_flops = 0.0;
  std::vector<double> wall_s_per_task;
  std::uint64_t steps = 0;
  double step_wall_s = 0.0;  // summed wall time of training steps only
  std::uint64_t peak_mem_bytes = 0;
  bool peak_mem_estimated = false;
  std::uint64_t buffer_bytes = 0;

  double wall_s() const;
  double mean_step_s() const { return steps ? step_wall_s / static_cast<double>(steps) : 0.0; }
};

// Resets the kernel's peak-RSS watermark when supported. Returns false
// otherwise.
bool reset_peak_memory();
// Peak resident set size in bytes, or 0 when no probe is available.
std::uint64_t probe_peak_memory();
// Upper bound on training memory: parameters (value, gradient) plus every
// forward activation and im2col buffer for one batch, in float32.
std::uint64_t estimate_training_memory(const model::BackboneConfig& config, int batch);

struct ResultRow {
  std::string run_id;
  std::uint64_t seed = 0;
  int task = 0;
  std::string metric;
  double value = 0.0;
};

struct SummaryRow {
  std::string run_id;
  double acc_final = 0.0;
  double ff_final = 0.0;
  double stability = 0.0;
  double plasticity = 0.0;
  double tradeoff = 0.0;
  double flops = 0.0;
  double wall_s = 0.0;
  std::uint64_t peak_mem_b = 0;
};

// "# schema: clfd.results/1" then run_id,seed,task,metric,value
void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path);
std::vector<ResultRow> read_results_csv(const std::string& path);
// "# schema: clfd.summary/1" then
// run_id,acc_final,ff_final,S,P,tradeoff,flops,wall_s,peak_mem_b
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path);
std::vector<SummaryRow> read_summary_csv(const std::string& path);
// Matrix as CSV: header "t,tau_1,...,tau_T", undefined cells empty.
void write_matrix_csv(const AccuracyMatrix& r, const std::string& path);
AccuracyMatrix read_matrix_csv(const std::string& path);

}  // namespace clfd::metrics

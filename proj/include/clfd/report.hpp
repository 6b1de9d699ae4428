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

#include <map>
#include <string>
#include <vector>

#include "clfd/cffs.hpp"
#include "clfd/metrics.hpp"

// Post-run analysis: cross-seed aggregation, run comparison tables, plot
// data and selection-counter inspection.
namespace clfd::report {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};
MeanStd mean_std(const std::vector<double>& values);

// `key = value` lines; `#` starts a comment.
std::map<std::string, std::string> read_metadata(const std::string& path);

// One seed directory.
struct SeedRun {
  std::string dir;
  std::uint64_t seed = 0;
  metrics::AccuracyMatrix class_il;
  metrics::AccuracyMatrix task_il;
  metrics::SummaryRow summary;
  std::map<std::string, std::string> metadata;
};
SeedRun load_seed_run(const std::string& dir);

// A run directory holding seed*/ subdirectories, or a single seed directory.
struct RunSummary {
  std::string name;
  int tasks = 0;
  std::vector<SeedRun> seeds;
  MeanStd acc_class_il, acc_task_il, ff_class_il, ff_task_il, tradeoff;
  MeanStd flops, wall_s, mean_step_s, peak_mem_b;
  // Mean per-task accuracy series: ACC_t after each task t.
  std::vector<double> series_class_il, series_task_il;
  // Seed-mean accuracy matrices.
  metrics::AccuracyMatrix mean_class_il, mean_task_il;
};
RunSummary load_run(const std::string& dir, bool ff_clip = false);

// Aggregate rows "<run_id>/mean" and "<run_id>/std" over per-seed summaries.
std::vector<metrics::SummaryRow> aggregate_rows(const std::string& run_id,
                                                const std::vector<metrics::SummaryRow>& rows);

// Side-by-side table; deltas are against the first run. Throws
// PreconditionError when sequential task counts differ or fewer than two runs
// are given. Single-task (joint) runs match any count.
std::string compare_table(const std::vector<RunSummary>& runs);
void write_compare_csv(const std::vector<RunSummary>& runs, const std::string& path);
// run,task,acc_class_il,acc_task_il
void write_series_csv(const std::vector<RunSummary>& runs, const std::string& path);
// run,t,tau,r_class_il,r_task_il (seed means)
void write_heatmap_csv(const std::vector<RunSummary>& runs, const std::string& path);
// Line chart of the Class-IL series with one polyline per run.
void write_series_svg(const std::vector<RunSummary>& runs, const std::string& path);

struct CounterReport {
  int classes = 0;
  int features = 0;
  int top_k = 0;
  std::vector<std::vector<double>> normalized;  // row / row max, zero rows stay zero
  std::vector<std::vector<int>> top;            // top_k features per class
  // overlap[a][b] = |top(a) & top(b)| / top_k
  std::vector<std::vector<double>> overlap;
  std::vector<bool> active;  // rows with any selection
};
CounterReport inspect_counter(const cffs::SelectionCounter& counter, int top_k);
std::string format_counter_report(const CounterReport& report);
void write_counter_report_csv(const CounterReport& report, const std::string& path);

}  // namespace clfd::report

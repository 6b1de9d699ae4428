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

#include "clfd/metrics.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "clfd/errors.hpp"

namespace clfd::metrics {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Reads non-comment lines, checking the header.
std::vector<std::vector<std::string>> read_table(const std::string& path,
                                                 const std::string& header) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::string line;
  bool seen_header = false;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      if (line != header) throw FormatError(path + ": expected header '" + header + "'");
      seen_header = true;
      continue;
    }
    rows.push_back(split_csv(line));
  }
  if (!seen_header) throw FormatError(path + ": missing header");
  return rows;
}

}  // namespace

AccuracyMatrix::AccuracyMatrix(int tasks)
    : tasks_(tasks),
      values_(static_cast<std::size_t>(tasks) * tasks, 0.0),
      defined_(static_cast<std::size_t>(tasks) * tasks, 0) {}

std::size_t AccuracyMatrix::index(int t, int tau) const {
  if (t < 1 || t > tasks_ || tau < 1 || tau > t) {
    throw PreconditionError("accuracy matrix: cell (" + std::to_string(t) + ", " +
                            std::to_string(tau) + ") out of range");
  }
  return static_cast<std::size_t>(t - 1) * tasks_ + (tau - 1);
}

void AccuracyMatrix::set(int t, int tau, double value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw PreconditionError("accuracy matrix: value must lie in [0, 1]");
  }
  const auto i = index(t, tau);
  values_[i] = value;
  defined_[i] = 1;
}

double AccuracyMatrix::at(int t, int tau) const {
  const auto i = index(t, tau);
  if (!defined_[i]) {
    throw PreconditionError("accuracy matrix: cell (" + std::to_string(t) + ", " +
                            std::to_string(tau) + ") is undefined");
  }
  return values_[i];
}

bool AccuracyMatrix::defined(int t, int tau) const { return defined_[index(t, tau)] != 0; }

bool AccuracyMatrix::row_complete(int t) const {
  if (t < 1 || t > tasks_) return false;
  for (int tau = 1; tau <= t; ++tau) {
    if (!defined(t, tau)) return false;
  }
  return true;
}

int AccuracyMatrix::completed_rows() const {
  int last = 0;
  for (int t = 1; t <= tasks_; ++t) {
    if (row_complete(t)) last = t;
  }
  return last;
}

double average_accuracy(const AccuracyMatrix& r, int t) {
  if (!r.row_complete(t)) {
    throw PreconditionError("average_accuracy: row " + std::to_string(t) + " is incomplete");
  }
  double sum = 0.0;
  for (int tau = 1; tau <= t; ++tau) sum += r.at(t, tau);
  return sum / t;
}

double final_forgetting(const AccuracyMatrix& r, int t, bool clip) {
  if (t < 2) throw PreconditionError("final_forgetting: requires t >= 2");
  double sum = 0.0;
  for (int j = 1; j < t; ++j) {
    double best = -std::numeric_limits<double>::infinity();
    for (int i = j; i < t; ++i) best = std::max(best, r.at(i, j) - r.at(t, j));
    if (clip) best = std::max(best, 0.0);
    sum += best;
  }
  return sum / (t - 1);
}

StabilityPlasticity stability_plasticity(const AccuracyMatrix& r, int t) {
  if (t < 2) throw PreconditionError("stability_plasticity: requires T >= 2");
  StabilityPlasticity sp;
  for (int tau = 1; tau < t; ++tau) sp.stability += r.at(t, tau);
  sp.stability /= (t - 1);
  for (int tau = 1; tau <= t; ++tau) sp.plasticity += r.at(tau, tau);
  sp.plasticity /= t;
  const double denom = sp.stability + sp.plasticity;
  sp.tradeoff = denom == 0.0 ? 0.0 : 2.0 * sp.stability * sp.plasticity / denom;
  return sp;
}

double training_flops(const model::BackboneConfig& config, int height, int width,
                      std::uint64_t examples) {
  return 3.0 * static_cast<double>(model::count_flops(config, height, width)) *
         static_cast<double>(examples);
}

double training_flops(const model::BackboneConfig& config, int height, int width,
                      std::uint64_t steps, std::uint64_t batch_per_step) {
  return training_flops(config, height, width, steps * batch_per_step);
}

double EfficiencyReport::wall_s() const {
  return std::accumulate(wall_s_per_task.begin(), wall_s_per_task.end(), 0.0);
}

bool reset_peak_memory() {
  std::ofstream f("/proc/self/clear_refs");
  if (!f) return false;
  f << "5";
  f.flush();
  return static_cast<bool>(f);
}

std::uint64_t probe_peak_memory() {
  std::ifstream status("/proc/self/status");
  std::string line;
  while (status && std::getline(status, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream ss(line.substr(6));
      std::uint64_t kb = 0;
      ss >> kb;
      if (kb > 0) return kb * 1024;
    }
  }
  rusage usage{};
  if (getrusage(RUSAGE_SELF, &usage) == 0 && usage.ru_maxrss > 0) {
    return static_cast<std::uint64_t>(usage.ru_maxrss) * 1024;
  }
  return 0;
}

std::uint64_t estimate_training_memory(const model::BackboneConfig& config, int batch) {
  model::Network<float> probe(config);
  std::uint64_t floats = 2 * probe.param_count();
  const std::uint64_t b = static_cast<std::uint64_t>(batch);
  int h = config.in_height, w = config.in_width, cin = config.in_channels;
  // stem: input, im2col, conv out, bn out
  floats += b * (cin * h * w + 9ull * cin * h * w + 2ull * config.stem_width * h * w);
  cin = config.stem_width;
  for (std::size_t s = 0; s < config.widths.size(); ++s) {
    for (int k = 0; k < config.blocks_per_stage; ++k) {
      const int stride = k == 0 ? config.strides[s] : 1;
      const int cout = config.widths[s];
      const int oh = (h + 2 - 3) / stride + 1, ow = (w + 2 - 3) / stride + 1;
      const std::uint64_t out = static_cast<std::uint64_t>(cout) * oh * ow;
      floats += b * (9ull * cin * oh * ow + 9ull * cout * oh * ow);  // im2col
      floats += b * 5 * out;  // conv/bn outputs, block output
      if (stride != 1 || cin != cout) floats += b * (static_cast<std::uint64_t>(cin) * oh * ow + 2 * out);
      h = oh;
      w = ow;
      cin = cout;
    }
  }
  return floats * sizeof(float);
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << "# schema: clfd.results/1\n";
  out << "run_id,seed,task,metric,value\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.run_id << ',' << r.seed << ',' << r.task << ',' << r.metric << ',' << r.value << '\n';
  }
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::vector<ResultRow> out;
  for (const auto& cells : read_table(path, "run_id,seed,task,metric,value")) {
    if (cells.size() != 5) throw FormatError(path + ": malformed results row");
    out.push_back({cells[0], std::stoull(cells[1]), std::stoi(cells[2]), cells[3],
                   std::stod(cells[4])});
  }
  return out;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << "# schema: clfd.summary/1\n";
  out << "run_id,acc_final,ff_final,S,P,tradeoff,flops,wall_s,peak_mem_b\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.run_id << ',' << r.acc_final << ',' << r.ff_final << ',' << r.stability << ','
        << r.plasticity << ',' << r.tradeoff << ',' << r.flops << ',' << r.wall_s << ','
        << r.peak_mem_b << '\n';
  }
}

std::vector<SummaryRow> read_summary_csv(const std::string& path) {
  std::vector<SummaryRow> out;
  for (const auto& c :
       read_table(path, "run_id,acc_final,ff_final,S,P,tradeoff,flops,wall_s,peak_mem_b")) {
    if (c.size() != 9) throw FormatError(path + ": malformed summary row");
    out.push_back({c[0], std::stod(c[1]), std::stod(c[2]), std::stod(c[3]), std::stod(c[4]),
                   std::stod(c[5]), std::stod(c[6]), std::stod(c[7]), std::stoull(c[8])});
  }
  return out;
}

void write_matrix_csv(const AccuracyMatrix& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << "t";
  for (int tau = 1; tau <= r.tasks(); ++tau) out << ",tau_" << tau;
  out << '\n';
  out.precision(17);
  for (int t = 1; t <= r.tasks(); ++t) {
    out << t;
    for (int tau = 1; tau <= r.tasks(); ++tau) {
      out << ',';
      if (tau <= t && r.defined(t, tau)) out << r.at(t, tau);
    }
    out << '\n';
  }
}

AccuracyMatrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty matrix file");
  const int tasks = static_cast<int>(split_csv(line).size()) - 1;
  if (tasks < 1) throw FormatError(path + ": bad matrix header");
  AccuracyMatrix r(tasks);
  int t = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv(line);
    ++t;
    if (t > tasks || static_cast<int>(cells.size()) != tasks + 1) {
      throw FormatError(path + ": malformed matrix row");
    }
    for (int tau = 1; tau <= t; ++tau) {
      if (!cells[tau].empty()) r.set(t, tau, std::stod(cells[tau]));
    }
  }
  return r;
}

}  // namespace clfd::metrics

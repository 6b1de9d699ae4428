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

#include "clfd/cffs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace clfd::cffs {

void ClassSignature::update(std::span<const float> ll_flat) {
  if (ll_flat.size() != sum_ll.size()) {
    throw ShapeError("signature for class " + std::to_string(class_id) + ": expected " +
                     std::to_string(sum_ll.size()) + " values, got " +
                     std::to_string(ll_flat.size()));
  }
  for (std::size_t i = 0; i < sum_ll.size(); ++i) sum_ll[i] += ll_flat[i];
  ++sample_count;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DegenerateSignatureError("cosine_similarity: zero-norm vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

const SimilarityRow& SimilarityTable::row(int class_id) const {
  for (const auto& r : rows) {
    if (r.class_id == class_id) return r;
  }
  throw PreconditionError("similarity table has no row for class " + std::to_string(class_id));
}

double clamp_alpha(double numerator, double denominator) {
  const double ratio = numerator / denominator;
  if (std::isnan(ratio)) return 1.0;
  if (ratio <= 0.0) return kAlphaMin;
  return std::clamp(ratio, kAlphaMin, kAlphaMax);
}

SimilarityTable build_similarity(std::span<const ClassSignature> current,
                                 std::span<const ClassSignature> previous) {
  if (previous.empty()) {
    throw PreconditionError("build_similarity: no previously seen classes");
  }
  std::vector<const ClassSignature*> prev;
  for (const auto& p : previous) prev.push_back(&p);
  std::sort(prev.begin(), prev.end(),
            [](const auto* a, const auto* b) { return a->class_id < b->class_id; });

  SimilarityTable table;
  for (const auto& cur : current) {
    SimilarityRow row;
    row.class_id = cur.class_id;
    for (const auto* p : prev) {
      double s = 0.0;
      try {
        s = cosine_similarity(cur.sum_ll, p->sum_ll);
      } catch (const DegenerateSignatureError&) {
        s = 0.0;
      }
      row.previous.push_back(p->class_id);
      row.similarity.push_back(s);
    }
    // strict comparisons keep the lowest id on ties
    std::size_t hi = 0, lo = 0;
    for (std::size_t i = 1; i < row.similarity.size(); ++i) {
      if (row.similarity[i] > row.similarity[hi]) hi = i;
      if (row.similarity[i] < row.similarity[lo]) lo = i;
    }
    row.y_plus = row.previous[hi];
    row.y_minus = row.previous[lo];
    row.s_bar = std::accumulate(row.similarity.begin(), row.similarity.end(), 0.0) /
                static_cast<double>(row.similarity.size());
    row.alpha_minus = clamp_alpha(row.s_bar, row.similarity[lo]);
    row.alpha_plus = clamp_alpha(row.similarity[hi], row.s_bar);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::span<const std::uint64_t> SelectionCounter::row(int c) const {
  if (c < 0 || c >= classes_) {
    throw PreconditionError("selection counter: unknown class " + std::to_string(c));
  }
  return {counts_.data() + static_cast<std::size_t>(c) * features_,
          static_cast<std::size_t>(features_)};
}

std::uint64_t SelectionCounter::row_max(int c) const {
  auto r = row(c);
  return r.empty() ? 0 : *std::max_element(r.begin(), r.end());
}

double SelectionCounter::normalizer(int c) const {
  const auto m = row_max(c);
  return m == 0 ? 1.0 : static_cast<double>(m);
}

void SelectionCounter::update(int c, std::span<const std::uint8_t> mask) {
  if (c < 0 || c >= classes_) {
    throw PreconditionError("selection counter: unknown class " + std::to_string(c));
  }
  if (mask.size() != static_cast<std::size_t>(features_)) {
    throw ShapeError("selection counter: mask length " + std::to_string(mask.size()) +
                     " != " + std::to_string(features_));
  }
  std::uint64_t* r = counts_.data() + static_cast<std::size_t>(c) * features_;
  for (int j = 0; j < features_; ++j) r[j] += mask[j] ? 1 : 0;
}

void DropoutSchedule::set_frequency_row(int c, std::span<const double> row) {
  if (row.size() != static_cast<std::size_t>(features)) throw ShapeError("schedule row length");
  std::copy(row.begin(), row.end(), p_f.begin() + static_cast<std::ptrdiff_t>(c) * features);
}

void DropoutSchedule::set_semantic_row(int c, std::span<const double> row) {
  if (row.size() != static_cast<std::size_t>(features)) throw ShapeError("schedule row length");
  std::copy(row.begin(), row.end(), p_s.begin() + static_cast<std::ptrdiff_t>(c) * features);
}

std::vector<double> frequency_keep_probs(const SelectionCounter& counter, const SimilarityRow& row,
                                         double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw PreconditionError("frequency_keep_probs: lambda must lie in [0, 1]");
  }
  const auto minus = counter.row(row.y_minus);
  const auto plus = counter.row(row.y_plus);
  const double norm_minus = counter.normalizer(row.y_minus);
  const double norm_plus = counter.normalizer(row.y_plus);
  std::vector<double> p(counter.features());
  for (int j = 0; j < counter.features(); ++j) {
    const double x_minus = static_cast<double>(minus[j]) / norm_minus * row.alpha_minus;
    const double x_plus = static_cast<double>(plus[j]) / norm_plus * row.alpha_plus;
    p[j] = lambda * std::exp(-x_minus) + (1.0 - lambda) * (1.0 - std::exp(-x_plus));
  }
  return p;
}

std::vector<double> semantic_keep_probs(const SelectionCounter& counter, double beta, int c) {
  if (!(beta > 0.0)) throw PreconditionError("semantic_keep_probs: beta must be positive");
  const auto r = counter.row(c);
  const double norm = counter.normalizer(c);
  std::vector<double> p(counter.features());
  for (int j = 0; j < counter.features(); ++j) {
    p[j] = 1.0 - std::exp(-static_cast<double>(r[j]) / norm * beta);
  }
  return p;
}

std::vector<std::uint8_t> sample_mask(std::span<const double> keep_probs, Rng& rng) {
  std::vector<std::uint8_t> mask(keep_probs.size());
  for (std::size_t j = 0; j < keep_probs.size(); ++j) {
    mask[j] = rng.uniform() < keep_probs[j] ? 1 : 0;
  }
  return mask;
}

int selection_size(int features, double fraction) {
  return static_cast<int>(std::floor(fraction * features + 1e-9));
}

std::vector<std::uint8_t> topk_select(std::span<const float> features,
                                      std::span<const std::uint8_t> surviving, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw PreconditionError("topk_select: fraction must lie in (0, 1]");
  }
  const std::size_t n = features.size();
  if (!surviving.empty() && surviving.size() != n) throw ShapeError("topk_select: mask length");
  std::vector<int> idx;
  idx.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (surviving.empty() || surviving[j]) idx.push_back(static_cast<int>(j));
  }
  const std::size_t k = static_cast<std::size_t>(selection_size(static_cast<int>(n), fraction));
  std::vector<std::uint8_t> mask(n, 0);
  if (idx.size() > k) {
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                     [&](int a, int b) {
                       const float fa = std::abs(features[a]), fb = std::abs(features[b]);
                       return fa > fb || (fa == fb && a < b);
                     });
    idx.resize(k);
  }
  for (int j : idx) mask[j] = 1;
  return mask;
}

void write_counter_csv(const SelectionCounter& counter, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << "# schema: clfd.counter/1\n";
  out << "class,feature_index,count\n";
  for (int c = 0; c < counter.classes(); ++c) {
    auto r = counter.row(c);
    for (int j = 0; j < counter.features(); ++j) out << c << ',' << j << ',' << r[j] << '\n';
  }
}

SelectionCounter read_counter_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::string line;
  struct Cell {
    int c, j;
    std::uint64_t v;
  };
  std::vector<Cell> cells;
  int max_c = -1, max_j = -1;
  bool header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "class,feature_index,count") throw FormatError(path + ": unexpected header");
      header = true;
      continue;
    }
    std::istringstream ss(line);
    Cell cell{};
    char comma1 = 0, comma2 = 0;
    if (!(ss >> cell.c >> comma1 >> cell.j >> comma2 >> cell.v) || comma1 != ',' ||
        comma2 != ',' || cell.c < 0 || cell.j < 0) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": malformed row");
    }
    max_c = std::max(max_c, cell.c);
    max_j = std::max(max_j, cell.j);
    cells.push_back(cell);
  }
  if (!header) throw FormatError(path + ": missing header");
  SelectionCounter counter(max_c + 1, max_j + 1);
  auto raw = counter.raw();
  for (const auto& cell : cells) raw[static_cast<std::size_t>(cell.c) * (max_j + 1) + cell.j] = cell.v;
  return counter;
}

void write_schedule_csv(const DropoutSchedule& schedule, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << "# schema: clfd.schedule/1\n";
  out << "class,feature_index,p_f,p_s\n";
  out.precision(17);
  for (int c = 0; c < schedule.classes; ++c) {
    auto pf = schedule.frequency_row(c);
    auto ps = schedule.semantic_row(c);
    for (int j = 0; j < schedule.features; ++j) {
      out << c << ',' << j << ',' << pf[j] << ',' << ps[j] << '\n';
    }
  }
}

}  // namespace clfd::cffs

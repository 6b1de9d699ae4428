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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "clfd/errors.hpp"
#include "clfd/rng.hpp"

// Class-aware frequency-domain feature selection: per-class low-band
// signatures, class similarity, frequency/semantic dropout keep
// probabilities, per-sample masks, top-fraction selection and the selection
// counter that drives both schedules.
namespace clfd::cffs {

// Raised when a signature has zero norm and no direction.
class DegenerateSignatureError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

inline constexpr double kAlphaMin = 1e-3;
inline constexpr double kAlphaMax = 1e3;

// Running sum of flattened low-frequency subbands of one class.
struct ClassSignature {
  int class_id = -1;
  std::vector<double> sum_ll;
  std::int64_t sample_count = 0;

  ClassSignature() = default;
  ClassSignature(int id, std::size_t dim) : class_id(id), sum_ll(dim, 0.0) {}

  // sum_ll += ll_flat; sample_count += 1. Throws ShapeError on length mismatch.
  void update(std::span<const float> ll_flat);
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Similarity of one current class against every previously seen class.
struct SimilarityRow {
  int class_id = -1;
  std::vector<int> previous;       // candidate class ids, ascending
  std::vector<double> similarity;  // aligned with `previous`
  int y_plus = -1;                 // most similar previous class
  int y_minus = -1;                // least similar previous class
  double s_bar = 0.0;
  double alpha_plus = 1.0;
  double alpha_minus = 1.0;
};

struct SimilarityTable {
  std::vector<SimilarityRow> rows;
  const SimilarityRow& row(int class_id) const;
};

// Builds S, y+/y- (ties to the lowest id), the mean similarity and the
// clamped alpha ratios. A pair involving a zero-norm signature gets S = 0.
// Throws PreconditionError when `previous` is empty.
SimilarityTable build_similarity(std::span<const ClassSignature> current,
                                 std::span<const ClassSignature> previous);

// Clamps a ratio into [kAlphaMin, kAlphaMax]; non-finite or non-positive
// ratios map to the nearest bound (NaN, from 0/0, maps to 1).
double clamp_alpha(double numerator, double denominator);

// Per-class, per-feature selection counts.
class SelectionCounter {
 public:
  SelectionCounter() = default;
  SelectionCounter(int classes, int features)
      : classes_(classes), features_(features),
        counts_(static_cast<std::size_t>(classes) * features, 0) {}

  int classes() const { return classes_; }
  int features() const { return features_; }

  std::span<const std::uint64_t> row(int c) const;
  std::uint64_t at(int c, int j) const { return row(c)[j]; }
  std::uint64_t row_max(int c) const;
  // Row max, or 1 for an all-zero row.
  double normalizer(int c) const;

  // counts[c][j] += mask[j]. Throws PreconditionError for an unknown class and
  // ShapeError for a mask of the wrong length.
  void update(int c, std::span<const std::uint8_t> mask);

  std::span<const std::uint64_t> raw() const { return counts_; }
  std::span<std::uint64_t> raw() { return counts_; }

 private:
  int classes_ = 0;
  int features_ = 0;
  std::vector<std::uint64_t> counts_;
};

// Keep probabilities for both regimes, all-ones at construction.
struct DropoutSchedule {
  int classes = 0;
  int features = 0;
  std::vector<double> p_f;
  std::vector<double> p_s;
  double lambda = 0.5;
  double beta = 2.0;
  int epochs_freq = 0;

  DropoutSchedule() = default;
  DropoutSchedule(int c, int n, double lambda_, double beta_, int epochs)
      : classes(c), features(n), p_f(static_cast<std::size_t>(c) * n, 1.0),
        p_s(static_cast<std::size_t>(c) * n, 1.0), lambda(lambda_), beta(beta_),
        epochs_freq(epochs) {}

  std::span<const double> frequency_row(int c) const {
    return {p_f.data() + static_cast<std::size_t>(c) * features, static_cast<std::size_t>(features)};
  }
  std::span<const double> semantic_row(int c) const {
    return {p_s.data() + static_cast<std::size_t>(c) * features, static_cast<std::size_t>(features)};
  }
  void set_frequency_row(int c, std::span<const double> row);
  void set_semantic_row(int c, std::span<const double> row);
};

// [P_f]_{c,j} = lambda * exp(-F[y-]_j / max F[y-] * alpha-)
//             + (1 - lambda) * (1 - exp(-F[y+]_j / max F[y+] * alpha+))
// Throws PreconditionError when lambda is outside [0, 1].
std::vector<double> frequency_keep_probs(const SelectionCounter& counter, const SimilarityRow& row,
                                         double lambda);

// [P_s]_{c,j} = 1 - exp(-F[c]_j / max F[c] * beta). Throws PreconditionError
// when beta <= 0.
std::vector<double> semantic_keep_probs(const SelectionCounter& counter, double beta, int c);

// mask_j = 1 with probability probs_j, independently.
std::vector<std::uint8_t> sample_mask(std::span<const double> keep_probs, Rng& rng);

// floor(fraction * N) for the selection size.
int selection_size(int features, double fraction);

// Among surviving indices, keeps the floor(fraction * N) largest |feature|
// values (ties to the lower index); all survivors when fewer remain. An empty
// `surviving` span means every feature survives.
std::vector<std::uint8_t> topk_select(std::span<const float> features,
                                      std::span<const std::uint8_t> surviving,
                                      double fraction = 0.6);

// CSV exports. Each file starts with a "# schema: ..." line, then the header.
void write_counter_csv(const SelectionCounter& counter, const std::string& path);
SelectionCounter read_counter_csv(const std::string& path);
void write_schedule_csv(const DropoutSchedule& schedule, const std::string& path);

}  // namespace clfd::cffs

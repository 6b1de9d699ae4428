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
#include <span>
#include <string>
#include <vector>

// Rehearsal loss composition. Logits are row-major [rows][classes]; every
// loss returns its value and the gradient with respect to each logits block.
namespace clfd::strategies {

enum class Kind { kSgd, kEr, kDerpp, kErace, kClser };

Kind parse_kind(const std::string& name);
std::string kind_name(Kind kind);

struct StrategyConfig {
  Kind kind = Kind::kEr;
  double alpha = 0.1;  // DER++ logit consistency weight
  double beta = 0.5;   // DER++ replay label weight
  int replay_batch = 32;
  bool single_draw = false;  // DER++: reuse one replay draw for both terms
};

struct Logits {
  std::span<const float> values;
  int classes = 0;
  std::size_t rows() const { return classes > 0 ? values.size() / classes : 0; }
};

struct LossResult {
  double loss = 0.0;
  std::vector<float> grad_fresh;
  std::vector<float> grad_replay_a;  // ER / ER-ACE replay block, DER++ MSE block
  std::vector<float> grad_replay_b;  // DER++ CE block
};

// Mean cross-entropy; adds scale * d(mean CE)/d(logits) into `grad` when
// non-null. `allowed`, when non-empty, is a per-row class mask (rows x
// classes); disallowed logits are treated as -infinity.
double cross_entropy(Logits logits, std::span<const int> labels, std::vector<float>* grad,
                     double scale = 1.0, std::span<const std::uint8_t> allowed = {});

// Mean CE over the concatenation of fresh and replay rows.
LossResult loss_er(Logits fresh, std::span<const int> fresh_labels, Logits replay,
                   std::span<const int> replay_labels);

// CE(fresh) + alpha * MSE(replay_a, stored) + beta * CE(replay_b, labels).
// MSE is the mean over all elements.
LossResult loss_derpp(Logits fresh, std::span<const int> fresh_labels, Logits replay_a,
                      std::span<const float> stored_logits, Logits replay_b,
                      std::span<const int> replay_b_labels, double alpha, double beta);

// Fresh rows: CE with previously seen classes that are absent from the fresh
// batch (and are not the row's label) masked out. Replay rows: full CE.
// Returns the sum of the two means.
LossResult loss_erace(Logits fresh, std::span<const int> fresh_labels, Logits replay,
                      std::span<const int> replay_labels, std::span<const int> seen_classes,
                      std::span<const int> batch_classes);

}  // namespace clfd::strategies

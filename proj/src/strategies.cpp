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

#include "clfd/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clfd/errors.hpp"

namespace clfd::strategies {

Kind parse_kind(const std::string& name) {
  if (name == "sgd") return Kind::kSgd;
  if (name == "er") return Kind::kEr;
  if (name == "derpp") return Kind::kDerpp;
  if (name == "erace") return Kind::kErace;
  if (name == "clser") return Kind::kClser;
  throw ConfigError("unknown strategy '" + name + "' (expected sgd, er, derpp or erace)");
}

std::string kind_name(Kind kind) {
  switch (kind) {
    case Kind::kSgd: return "sgd";
    case Kind::kEr: return "er";
    case Kind::kDerpp: return "derpp";
    case Kind::kErace: return "erace";
    case Kind::kClser: return "clser";
  }
  return "?";
}

double cross_entropy(Logits logits, std::span<const int> labels, std::vector<float>* grad,
                     double scale, std::span<const std::uint8_t> allowed) {
  const int k = logits.classes;
  const std::size_t rows = logits.rows();
  if (rows != labels.size()) throw ShapeError("cross_entropy: label count mismatch");
  if (rows == 0) return 0.0;
  if (!allowed.empty() && allowed.size() != logits.values.size()) {
    throw ShapeError("cross_entropy: class mask size mismatch");
  }
  if (grad) grad->resize(logits.values.size(), 0.0f);
  double total = 0.0;
  std::vector<double> p(k);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* z = logits.values.data() + r * k;
    const std::uint8_t* ok = allowed.empty() ? nullptr : allowed.data() + r * k;
    const int y = labels[r];
    if (y < 0 || y >= k) throw PreconditionError("cross_entropy: label out of range");
    if (ok && !ok[y]) throw PreconditionError("cross_entropy: label logit is masked");
    double m = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      if (!ok || ok[j]) m = std::max(m, static_cast<double>(z[j]));
    }
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      p[j] = (!ok || ok[j]) ? std::exp(z[j] - m) : 0.0;
      sum += p[j];
    }
    total += -(z[y] - m - std::log(sum));
    if (grad) {
      float* g = grad->data() + r * k;
      const double s = scale / static_cast<double>(rows);
      for (int j = 0; j < k; ++j) {
        g[j] += static_cast<float>(s * (p[j] / sum - (j == y ? 1.0 : 0.0)));
      }
    }
  }
  return total / static_cast<double>(rows);
}

LossResult loss_er(Logits fresh, std::span<const int> fresh_labels, Logits replay,
                   std::span<const int> replay_labels) {
  if (fresh.rows() == 0) throw PreconditionError("loss_er: empty fresh batch");
  const double nf = static_cast<double>(fresh.rows());
  const double nr = static_cast<double>(replay.rows());
  const double n = nf + nr;
  LossResult out;
  // mean over the concatenation = weighted sum of the per-block means
  out.loss = cross_entropy(fresh, fresh_labels, &out.grad_fresh, nf / n) * (nf / n);
  if (replay.rows() > 0) {
    out.loss += cross_entropy(replay, replay_labels, &out.grad_replay_a, nr / n) * (nr / n);
  }
  return out;
}

LossResult loss_derpp(Logits fresh, std::span<const int> fresh_labels, Logits replay_a,
                      std::span<const float> stored_logits, Logits replay_b,
                      std::span<const int> replay_b_labels, double alpha, double beta) {
  if (fresh.rows() == 0) throw PreconditionError("loss_derpp: empty fresh batch");
  LossResult out;
  out.loss = cross_entropy(fresh, fresh_labels, &out.grad_fresh);
  if (replay_a.rows() > 0) {
    if (stored_logits.size() != replay_a.values.size()) {
      throw PreconditionError("loss_derpp: replay entries are missing stored logits");
    }
    const std::size_t m = stored_logits.size();
    double mse = 0.0;
    out.grad_replay_a.assign(m, 0.0f);
    for (std::size_t i = 0; i < m; ++i) {
      const double d = static_cast<double>(replay_a.values[i]) - stored_logits[i];
      mse += d * d;
      out.grad_replay_a[i] = static_cast<float>(alpha * 2.0 * d / static_cast<double>(m));
    }
    out.loss += alpha * mse / static_cast<double>(m);
  }
  if (replay_b.rows() > 0) {
    out.loss += beta * cross_entropy(replay_b, replay_b_labels, &out.grad_replay_b, beta);
  }
  return out;
}

LossResult loss_erace(Logits fresh, std::span<const int> fresh_labels, Logits replay,
                      std::span<const int> replay_labels, std::span<const int> seen_classes,
                      std::span<const int> batch_classes) {
  if (fresh.rows() == 0) throw PreconditionError("loss_erace: empty fresh batch");
  const int k = fresh.classes;
  std::vector<std::uint8_t> allowed(fresh.values.size(), 1);
  for (std::size_t r = 0; r < fresh.rows(); ++r) {
    for (int c : seen_classes) {
      const bool in_batch = std::find(batch_classes.begin(), batch_classes.end(), c) !=
                            batch_classes.end();
      if (!in_batch && c != fresh_labels[r] && c >= 0 && c < k) allowed[r * k + c] = 0;
    }
  }
  LossResult out;
  out.loss = cross_entropy(fresh, fresh_labels, &out.grad_fresh, 1.0, allowed);
  if (replay.rows() > 0) {
    out.loss += cross_entropy(replay, replay_labels, &out.grad_replay_a);
  }
  return out;
}

}  // namespace clfd::strategies

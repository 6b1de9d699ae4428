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

#include <cmath>

#include <doctest.h>

#include "clfd/errors.hpp"
#include "clfd/metrics.hpp"
#include "clfd/model.hpp"
#include "helpers.hpp"

using clfd::Rng;
namespace metrics = clfd::metrics;
namespace model = clfd::model;

namespace {

metrics::AccuracyMatrix matrix_of(std::initializer_list<std::initializer_list<double>> rows) {
  metrics::AccuracyMatrix r(static_cast<int>(rows.size()));
  int t = 1;
  for (const auto& row : rows) {
    int tau = 1;
    for (double v : row) r.set(t, tau++, v);
    ++t;
  }
  return r;
}

}  // namespace

TEST_CASE("matrix cells") {
  metrics::AccuracyMatrix r(3);
  CHECK_FALSE(r.defined(2, 1));
  r.set(1, 1, 0.5);
  CHECK(r.row_complete(1));
  CHECK(r.completed_rows() == 1);
  CHECK_THROWS_AS(r.at(2, 2), clfd::PreconditionError);
  CHECK_THROWS_AS(r.set(1, 2, 0.1), clfd::PreconditionError);
  CHECK_THROWS_AS(r.set(2, 1, 1.5), clfd::PreconditionError);
}

TEST_CASE("average accuracy examples") {
  auto r = matrix_of({{0.9}, {0.5, 0.9}});
  CHECK(metrics::average_accuracy(r, 2) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(metrics::average_accuracy(r, 1) == 0.9);
  auto ones = matrix_of({{1}, {1, 1}, {1, 1, 1}});
  CHECK(metrics::average_accuracy(ones, 3) == 1.0);
  metrics::AccuracyMatrix partial(2);
  partial.set(1, 1, 0.4);
  partial.set(2, 1, 0.4);
  CHECK_THROWS_AS(metrics::average_accuracy(partial, 2), clfd::PreconditionError);
}

TEST_CASE("final forgetting examples") {
  auto r = matrix_of({{0.9}, {0.6, 0.8}});
  CHECK(metrics::final_forgetting(r, 2) == doctest::Approx(0.3).epsilon(1e-15));
  auto improving = matrix_of({{0.5}, {0.7, 0.8}});
  CHECK(metrics::final_forgetting(improving, 2) == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(metrics::final_forgetting(improving, 2, true) == 0.0);
  auto flat = matrix_of({{0.6}, {0.6, 0.7}, {0.6, 0.7, 0.8}});
  CHECK(metrics::final_forgetting(flat, 3) == 0.0);
  CHECK_THROWS_AS(metrics::final_forgetting(r, 1), clfd::PreconditionError);

  // task 1 peaks after task 2: max over i picks R[2][1]
  auto peak = matrix_of({{0.5}, {0.9, 0.8}, {0.4, 0.6, 0.7}});
  CHECK(metrics::final_forgetting(peak, 3) == doctest::Approx(((0.9 - 0.4) + (0.8 - 0.6)) / 2).epsilon(1e-15));
}

TEST_CASE("stability plasticity examples") {
  // S = 0.5 (old task), P = mean diagonal = 1.0
  auto r = matrix_of({{1.0}, {0.5, 1.0}});
  auto sp = metrics::stability_plasticity(r, 2);
  CHECK(sp.stability == 0.5);
  CHECK(sp.plasticity == 1.0);
  CHECK(sp.tradeoff == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  auto same = matrix_of({{0.4}, {0.4, 0.4}});
  CHECK(metrics::stability_plasticity(same, 2).tradeoff == doctest::Approx(0.4).epsilon(1e-15));
  auto zero_s = matrix_of({{0.7}, {0.0, 0.9}});
  CHECK(metrics::stability_plasticity(zero_s, 2).tradeoff == 0.0);
  auto all_zero = matrix_of({{0.0}, {0.0, 0.0}});
  CHECK(metrics::stability_plasticity(all_zero, 2).tradeoff == 0.0);
}

TEST_CASE("metric invariants on random matrices") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int t = 2 + static_cast<int>(rng.below(5));
    metrics::AccuracyMatrix r(t);
    for (int i = 1; i <= t; ++i) {
      for (int j = 1; j <= i; ++j) r.set(i, j, rng.uniform(0.01, 1.0));
    }
    auto sp = metrics::stability_plasticity(r, t);
    CHECK(sp.tradeoff <= std::max(sp.stability, sp.plasticity) + 1e-15);
    CHECK(sp.tradeoff >= std::min(sp.stability, sp.plasticity) - 1e-15);

    // permuting the last row leaves ACC unchanged
    metrics::AccuracyMatrix p = r;
    const double first = r.at(t, 1);
    p.set(t, 1, r.at(t, t));
    p.set(t, t, first);
    CHECK(metrics::average_accuracy(p, t) == doctest::Approx(metrics::average_accuracy(r, t)).epsilon(1e-15));
    CHECK(metrics::final_forgetting(r, t, true) >= 0.0);
    CHECK(metrics::final_forgetting(r, t, true) >= metrics::final_forgetting(r, t));
  }
}

TEST_CASE("conv FLOP arithmetic") {
  model::BackboneConfig single;
  single.stem_width = 16;
  single.widths.clear();
  single.strides.clear();
  single.num_classes = 0;
  CHECK(model::count_flops(single, 32, 32) == 884736u);
  CHECK(model::count_flops(single, 16, 16) == 221184u);
  CHECK(2ull * 9 * 3 * 16 * 1024 == 884736ull);
}

TEST_CASE("all-conv FLOPs scale exactly with area") {
  for (const auto& cfg : {model::BackboneConfig::desk(32, 32, 0), model::BackboneConfig::resnet18(32, 32, 0)}) {
    CHECK(model::count_flops(cfg, 32, 32) == 4 * model::count_flops(cfg, 16, 16));
    CHECK(model::count_flops(cfg, 64, 64) == 4 * model::count_flops(cfg, 32, 32));
  }
}

TEST_CASE("resnet18 resolution ratio") {
  auto big = model::BackboneConfig::resnet18(32, 32, 10);
  auto small = model::BackboneConfig::resnet18(16, 16, 10);
  const double ratio = static_cast<double>(model::count_flops(big, 32, 32)) /
                       static_cast<double>(model::count_flops(small, 16, 16));
  CHECK(ratio == doctest::Approx(3.96).epsilon(0.15 / 3.96));
  CHECK(big.feature_dim() == 512);
}

TEST_CASE("training FLOPs") {
  auto cfg = model::BackboneConfig::desk(16, 16, 10);
  const double fwd = static_cast<double>(model::count_flops(cfg, 16, 16));
  CHECK(metrics::training_flops(cfg, 16, 16, std::uint64_t{0}) == 0.0);
  CHECK(metrics::training_flops(cfg, 16, 16, std::uint64_t{10}) == 30 * fwd);
  CHECK(metrics::training_flops(cfg, 16, 16, 7, 64) == 2 * metrics::training_flops(cfg, 16, 16, 7, 32));
  CHECK(metrics::training_flops(cfg, 16, 16, 14, 32) == 2 * metrics::training_flops(cfg, 16, 16, 7, 32));
}

TEST_CASE("efficiency report") {
  metrics::EfficiencyReport e;
  CHECK(e.mean_step_s() == 0.0);
  e.wall_s_per_task = {1.5, 2.5};
  e.steps = 4;
  e.step_wall_s = 2.0;
  CHECK(e.wall_s() == 4.0);
  CHECK(e.mean_step_s() == 0.5);
  CHECK(metrics::estimate_training_memory(model::BackboneConfig::desk(16, 16, 10), 64) >
        metrics::estimate_training_memory(model::BackboneConfig::desk(16, 16, 10), 32));
}

TEST_CASE("CSV round trips") {
  clfd::test::TempDir dir("metrics");
  std::vector<metrics::ResultRow> rows{{"a", 1, 2, "acc_class_il", 0.25}, {"a", 1, 2, "ff", -0.125}};
  metrics::write_results_csv(rows, dir.file("results.csv"));
  auto back = metrics::read_results_csv(dir.file("results.csv"));
  REQUIRE(back.size() == 2);
  CHECK(back[1].metric == "ff");
  CHECK(back[1].value == -0.125);
  CHECK(back[0].seed == 1);

  metrics::SummaryRow s{"run", 0.5, 0.1, 0.4, 0.9, 0.55, 1e12, 12.5, 1024};
  metrics::write_summary_csv({s}, dir.file("summary.csv"));
  auto sb = metrics::read_summary_csv(dir.file("summary.csv"));
  REQUIRE(sb.size() == 1);
  CHECK(sb[0].acc_final == 0.5);
  CHECK(sb[0].flops == 1e12);
  CHECK(sb[0].peak_mem_b == 1024u);

  auto r = matrix_of({{0.9}, {0.123456789012345, 0.8}, {0.1, 0.2, 0.3}});
  metrics::write_matrix_csv(r, dir.file("m.csv"));
  CHECK(metrics::read_matrix_csv(dir.file("m.csv")) == r);
}

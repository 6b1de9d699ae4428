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
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "clfd/config.hpp"
#include "clfd/errors.hpp"
#include "clfd/loop.hpp"
#include "clfd/report.hpp"
#include "helpers.hpp"

namespace report = clfd::report;
using clfd::cffs::SelectionCounter;

namespace {

void set_row(SelectionCounter& c, int cls, const std::vector<std::uint64_t>& v) {
  auto raw = c.raw();
  std::copy(v.begin(), v.end(), raw.begin() + static_cast<std::ptrdiff_t>(cls) * c.features());
}

}  // namespace

TEST_CASE("mean and sample standard deviation") {
  auto a = report::mean_std({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0});
  CHECK(a.mean == 5.0);
  CHECK(a.std == doctest::Approx(std::sqrt(32.0 / 7.0)).epsilon(1e-14));
  auto one = report::mean_std({3.5});
  CHECK(one.mean == 3.5);
  CHECK(one.std == 0.0);
  CHECK(report::mean_std({}).mean == 0.0);
}

TEST_CASE("counter inspection") {
  SelectionCounter c(4, 6);
  set_row(c, 0, {5, 4, 3, 0, 0, 0});
  set_row(c, 1, {5, 4, 3, 0, 0, 0});
  set_row(c, 2, {0, 0, 0, 1, 2, 3});
  auto rep = report::inspect_counter(c, 3);
  CHECK(rep.top_k == 3);
  CHECK(rep.top[0] == std::vector<int>{0, 1, 2});
  CHECK(rep.top[2] == std::vector<int>{3, 4, 5});
  CHECK(rep.overlap[0][1] == 1.0);
  CHECK(rep.overlap[0][2] == 0.0);
  CHECK(rep.overlap[2][2] == 1.0);
  for (int cls = 0; cls < 3; ++cls) {
    CHECK(*std::max_element(rep.normalized[cls].begin(), rep.normalized[cls].end()) == 1.0);
    CHECK(rep.active[cls]);
  }
  CHECK_FALSE(rep.active[3]);
  for (double v : rep.normalized[3]) CHECK(v == 0.0);
  CHECK(rep.normalized[2][3] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(report::format_counter_report(rep).size() > 0);
}

TEST_CASE("ties in the counter keep the lower feature") {
  SelectionCounter c(1, 4);
  set_row(c, 0, {2, 2, 2, 2});
  CHECK(report::inspect_counter(c, 2).top[0] == std::vector<int>{0, 1});
}

TEST_CASE("loading and comparing finished runs") {
  clfd::test::TempDir dir("report");
  auto cfg = clfd::config::parse(
      "data.format = synthetic\n"
      "data.num_classes = 4\n"
      "data.train_per_class = 8\n"
      "data.test_per_class = 4\n"
      "optim.epochs = 2\n"
      "optim.batch = 8\n"
      "strategy.replay_batch = 8\n");
  auto data = clfd::loop::prepare_dataset(cfg);
  const std::string run = dir.file("a");
  for (std::uint64_t seed : {1u, 2u}) {
    clfd::loop::run_sequence(cfg, data, seed, run + "/seed" + std::to_string(seed));
  }
  auto a = report::load_run(run);
  CHECK(a.tasks == 2);
  REQUIRE(a.seeds.size() == 2);
  CHECK(a.series_class_il.size() == 2);
  const double m = (a.seeds[0].class_il.at(2, 1) + a.seeds[1].class_il.at(2, 1)) / 2;
  CHECK(a.mean_class_il.at(2, 1) == doctest::Approx(m).epsilon(1e-12));
  CHECK(a.acc_class_il.mean == doctest::Approx(a.series_class_il.back()).epsilon(1e-12));

  auto b = a;
  b.name = "b";
  const std::string csv = dir.file("compare.csv");
  report::write_compare_csv({a, b}, csv);
  std::ifstream in(csv);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("run,", 0) == 0) continue;
    ++rows;
    const auto last = line.rfind(',');
    const auto prev = line.rfind(',', last - 1);
    CHECK(std::stod(line.substr(last + 1)) == 0.0);
    CHECK(std::stod(line.substr(prev + 1, last - prev - 1)) == 0.0);
  }
  CHECK(rows == 2);
  CHECK(report::compare_table({a, b}).find("b") != std::string::npos);

  CHECK_THROWS_AS(report::compare_table({a}), clfd::PreconditionError);
  auto c = a;
  c.tasks = 3;
  CHECK_THROWS_AS(report::compare_table({a, c}), clfd::PreconditionError);
  auto joint = a;
  joint.name = "joint";
  joint.tasks = 1;
  CHECK(report::compare_table({a, joint}).find("joint") != std::string::npos);
}

TEST_CASE("aggregate rows") {
  clfd::metrics::SummaryRow r1{"x", 0.4, 0.1, 0.5, 0.9, 0.6, 10, 1, 5};
  clfd::metrics::SummaryRow r2{"x", 0.6, 0.3, 0.5, 0.7, 0.6, 30, 3, 7};
  auto rows = report::aggregate_rows("x", {r1, r2});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].run_id == "x/mean");
  CHECK(rows[0].acc_final == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(rows[1].run_id == "x/std");
  CHECK(rows[1].acc_final == doctest::Approx(std::sqrt(0.02)).epsilon(1e-12));
}

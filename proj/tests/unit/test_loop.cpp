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

#include <map>
#include <sstream>
#include <string>

#include <doctest.h>

#include "clfd/errors.hpp"
#include "clfd/loop.hpp"
#include "helpers.hpp"

namespace config = clfd::config;
namespace loop = clfd::loop;

namespace {

config::RunConfig small_config() {
  auto c = config::parse(
      "data.format = synthetic\n"
      "data.num_classes = 4\n"
      "data.classes_per_task = 2\n"
      "optim.epochs = 3\n"
      "optim.batch = 8\n"
      "optim.lr = 0.05\n"
      "strategy.replay_batch = 8\n"
      "buffer.capacity = 12\n");
  return c;
}

const clfd::bench::Dataset& small_data() {
  static const clfd::bench::Dataset data = [] {
    auto d = clfd::bench::make_synthetic(4, 16, 8, 11, 16);
    clfd::bench::compute_normalization(d);
    clfd::bench::normalize(d);
    return d;
  }();
  return data;
}

std::map<std::string, std::string> fields(const std::string& line) {
  std::map<std::string, std::string> out;
  std::istringstream in(line);
  std::string tok;
  in >> tok;
  out["kind"] = tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) out[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return out;
}

std::vector<std::uint8_t> decode_hex(const std::string& hex, int features) {
  std::vector<std::uint8_t> mask(features, 0);
  for (int j = 0; j < features; ++j) {
    const char ch = hex[j / 4];
    const int nibble = ch <= '9' ? ch - '0' : ch - 'a' + 10;
    mask[j] = (nibble >> (j % 4)) & 1;
  }
  return mask;
}

}  // namespace

TEST_CASE("regime boundaries") {
  using loop::Regime;
  CHECK(loop::regime_for(1, 1, 2) == Regime::kNone);
  CHECK(loop::regime_for(1, 2, 2) == Regime::kNone);
  CHECK(loop::regime_for(1, 3, 2) == Regime::kSemantic);
  CHECK(loop::regime_for(2, 1, 2) == Regime::kFrequency);
  CHECK(loop::regime_for(2, 2, 2) == Regime::kFrequency);
  CHECK(loop::regime_for(2, 3, 2) == Regime::kSemantic);
  // fifty epochs: twenty frequency epochs
  CHECK(loop::regime_for(3, 20, 20) == Regime::kFrequency);
  CHECK(loop::regime_for(3, 21, 20) == Regime::kSemantic);
  CHECK(loop::regime_for(2, 1, 0) == Regime::kSemantic);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto cfg = small_config();
  loop::Trainer a(cfg, small_data(), 3), b(cfg, small_data(), 3);
  for (int t = 1; t <= a.num_tasks(); ++t) {
    a.run_task(t);
    b.run_task(t);
  }
  CHECK(a.class_il() == b.class_il());
  CHECK(a.task_il() == b.task_il());
  CHECK(a.encoder_digests() == b.encoder_digests());
  CHECK(std::equal(a.counter().raw().begin(), a.counter().raw().end(), b.counter().raw().begin()));
}

TEST_CASE("encoder freezes after the first task") {
  loop::Trainer tr(small_config(), small_data(), 4);
  tr.run_task(1);
  CHECK(tr.encoder().frozen);
  tr.run_task(2);
  REQUIRE(tr.encoder_digests().size() == 2);
  CHECK(tr.encoder_digests()[0] == tr.encoder_digests()[1]);
  CHECK(tr.encoder_digests()[0] == clfd::ffe::digest(tr.encoder()));
}

TEST_CASE("task-incremental accuracy dominates class-incremental") {
  loop::Trainer tr(small_config(), small_data(), 5);
  tr.run_task(1);
  tr.run_task(2);
  for (int t = 1; t <= 2; ++t) {
    for (int tau = 1; tau <= t; ++tau) CHECK(tr.task_il().at(t, tau) >= tr.class_il().at(t, tau));
  }
}

TEST_CASE("a single joint task has equal accuracy in both modes") {
  auto cfg = small_config();
  cfg.joint = true;
  loop::Trainer tr(cfg, small_data(), 6);
  REQUIRE(tr.num_tasks() == 1);
  tr.run_task(1);
  CHECK(tr.class_il().at(1, 1) == tr.task_il().at(1, 1));
}

TEST_CASE("tasks must run in order") {
  loop::Trainer tr(small_config(), small_data(), 7);
  CHECK_THROWS_AS(tr.run_task(2), clfd::PreconditionError);
  tr.run_task(1);
  CHECK_THROWS_AS(tr.run_task(1), clfd::PreconditionError);
  CHECK_THROWS_AS(tr.run_task(3), clfd::PreconditionError);
}

TEST_CASE("evaluation leaves training state untouched") {
  loop::Trainer tr(small_config(), small_data(), 8);
  tr.run_task(1);
  const std::vector<std::uint64_t> before(tr.counter().raw().begin(), tr.counter().raw().end());
  const auto first = tr.evaluate(1, loop::Mode::kClassIl);
  const auto second = tr.evaluate(1, loop::Mode::kClassIl);
  CHECK(first == second);
  CHECK(std::equal(before.begin(), before.end(), tr.counter().raw().begin()));
}

TEST_CASE("resuming from a task boundary matches an uninterrupted run") {
  clfd::test::TempDir dir("loop_resume");
  const auto cfg = small_config();
  loop::Trainer whole(cfg, small_data(), 9);
  whole.run_task(1);
  whole.save_state(dir.path());
  whole.run_task(2);

  loop::Trainer resumed(cfg, small_data(), 9);
  resumed.load_state(dir.path());
  CHECK(resumed.completed_tasks() == 1);
  resumed.run_task(2);
  CHECK(resumed.class_il() == whole.class_il());
  CHECK(resumed.task_il() == whole.task_il());
  CHECK(resumed.encoder_digests() == whole.encoder_digests());
  CHECK(std::equal(whole.counter().raw().begin(), whole.counter().raw().end(),
                   resumed.counter().raw().begin()));
}

TEST_CASE("step log replays into the selection counter") {
  std::ostringstream log;
  const auto cfg = small_config();
  loop::Trainer tr(cfg, small_data(), 10, &log);
  tr.run_task(1);
  tr.run_task(2);
  const int nfeat = tr.counter().features();
  const int k = static_cast<int>(std::floor(cfg.select_fraction * nfeat + 1e-9));

  clfd::cffs::SelectionCounter replayed(tr.counter().classes(), nfeat);
  std::istringstream in(log.str());
  std::string line;
  int steps = 0, evals = 0;
  while (std::getline(in, line)) {
    auto f = fields(line);
    if (f["kind"] == "step") {
      ++steps;
      REQUIRE(f.count("masks") == 1);
      std::istringstream rows(f["masks"]);
      std::string item;
      int n = 0;
      while (std::getline(rows, item, ',')) {
        const auto colon = item.find(':');
        const int label = std::stoi(item.substr(0, colon));
        auto mask = decode_hex(item.substr(colon + 1), nfeat);
        const int sel = static_cast<int>(std::count(mask.begin(), mask.end(), 1));
        CHECK(sel <= k);
        replayed.update(label, mask);
        ++n;
      }
      CHECK(n == std::stoi(f["fresh"]) + std::stoi(f["replay"]));
      CHECK(std::stoi(f["sel_max"]) <= k);
      if (f["regime"] == "none") CHECK(std::stoi(f["sel_min"]) == k);
      // the buffer is empty until the first fresh batch has been stored
      if (steps == 1) CHECK(std::stoi(f["replay"]) == 0);
    } else if (f["kind"] == "eval") {
      ++evals;
      CHECK(std::stoi(f["sel_min"]) == k);
      CHECK(std::stoi(f["sel_max"]) == k);
      CHECK(std::stoi(f["features"]) == nfeat);
    }
  }
  CHECK(steps > 0);
  CHECK(evals == 4);
  CHECK(std::equal(replayed.raw().begin(), replayed.raw().end(), tr.counter().raw().begin()));
}

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

#include <fstream>
#include <string>

#include <doctest.h>

#include "clfd/config.hpp"
#include "clfd/errors.hpp"
#include "helpers.hpp"

namespace config = clfd::config;

namespace {

const std::string kBase = "data.format = synthetic\n";

std::string error_of(const std::string& text) {
  try {
    config::parse(text, "run.cfg");
  } catch (const clfd::ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults mirror the reference hyperparameters") {
  auto c = config::parse(kBase);
  CHECK(c.lambda == 0.5);
  CHECK(c.beta == 2.0);
  CHECK(c.freq_epoch_fraction == 0.4);
  CHECK(c.select_fraction == 0.6);
  CHECK(c.batch == 32);
  CHECK(c.strategy.replay_batch == 32);
  CHECK(c.strategy.alpha == 0.1);
  CHECK(c.strategy.beta == 0.5);
  CHECK(c.buffer_capacity == 50);
  CHECK(c.ffe_bias);
  CHECK(c.compare_scope == config::CompareScope::kAll);
  CHECK(c.split_spec().to_string() == "0,1;2,3;4,5;6,7;8,9");
}

TEST_CASE("frequency epoch count uses the floor") {
  auto c = config::parse(kBase);
  for (auto [epochs, expected] : {std::pair{50, 20}, {5, 2}, {1, 0}, {3, 1}, {10, 4}}) {
    c.epochs = epochs;
    CHECK(c.frequency_epochs() == expected);
  }
}

TEST_CASE("parsing values, comments and sections") {
  auto c = config::parse(
      "# comment line\n"
      "run.id = demo   # trailing comment\n"
      "run.seeds = 1,2,3\n"
      "data.format = synthetic\n"
      "data.split = 0,1,2;3,4,5;6,7,8,9\n"
      "strategy.kind = derpp\n"
      "cffs.lambda = 0.25\n"
      "optim.epochs = 7\n"
      "ffe.enabled = false\n");
  CHECK(c.run_id == "demo");
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(c.split_spec().tasks.size() == 3);
  CHECK(c.strategy.kind == clfd::strategies::Kind::kDerpp);
  CHECK(c.lambda == 0.25);
  CHECK(c.epochs == 7);
  CHECK_FALSE(c.ffe_enabled);
}

TEST_CASE("misspelled keys name the nearest match") {
  const auto msg = error_of(kBase + "cffs.lamda = 0.5\n");
  CHECK(msg.find("unknown key 'cffs.lamda'") != std::string::npos);
  CHECK(msg.find("did you mean 'cffs.lambda'") != std::string::npos);
  CHECK(msg.find("run.cfg:2:") == 0);

  CHECK(config::nearest_key("lamda") == "cffs.lambda");
  CHECK(config::nearest_key("qqqqqqqq").empty());
}

TEST_CASE("line-level diagnostics") {
  CHECK(error_of(kBase + "optim.lr = fast\n").find("run.cfg:2: optim.lr") == 0);
  CHECK(error_of(kBase + "\n\ncffs.lambda = 1.5\n").find("run.cfg:4:") == 0);
  CHECK(error_of(kBase + "optim.batch = 8\noptim.batch = 16\n").find("duplicate key") != std::string::npos);
  CHECK(error_of(kBase + "just words\n").find("run.cfg:2: expected") == 0);
  CHECK(error_of(kBase + "cffs.beta = 0\n") != "");
  CHECK(error_of(kBase + "strategy.kind = clser\n").find("reserved") != std::string::npos);
  CHECK(error_of("data.format = cifar_binary\n").find("data.path") != std::string::npos);
  CHECK(error_of(kBase + "data.split = 0,1;1,2\n").find("more than one task") != std::string::npos);
  CHECK(error_of(kBase + "data.classes_per_task = 3\n").find("divisible") != std::string::npos);
}

TEST_CASE("overrides") {
  auto c = config::parse(kBase);
  config::apply_override(c, "optim.lr=0.03");
  CHECK(c.lr == 0.03);
  config::apply_override(c, " data.joint = true ");
  CHECK(c.split_spec().tasks.size() == 1);
  CHECK(c.split_spec().tasks[0].size() == 10);
  CHECK_THROWS_AS(config::apply_override(c, "optim.lr"), clfd::ConfigError);
  CHECK_THROWS_AS(config::apply_override(c, "optim.rl=1"), clfd::ConfigError);
}

TEST_CASE("dump reproduces the config and drives the digest") {
  auto c = config::parse(kBase + "run.id = x\ncffs.beta = 3.5\nrun.seeds = 4,5\nbuffer.quantize = true\n");
  auto back = config::parse(config::dump(c));
  CHECK(config::dump(back) == config::dump(c));
  CHECK(config::digest(back) == config::digest(c));
  config::apply_override(back, "cffs.beta=3.25");
  CHECK(config::digest(back) != config::digest(c));

  std::size_t lines = 0;
  for (char ch : config::dump(c)) lines += ch == '\n';
  CHECK(lines == config::known_keys().size());
}

TEST_CASE("load reads a file and reports its path") {
  clfd::test::TempDir dir("config");
  const std::string path = dir.file("a.cfg");
  std::ofstream(path) << kBase << "optim.epochs = 2\n";
  CHECK(config::load(path).epochs == 2);
  std::ofstream(path) << kBase << "optim.epoch = 2\n";
  try {
    config::load(path);
    FAIL("expected a config error");
  } catch (const clfd::ConfigError& e) {
    CHECK(std::string(e.what()).find(path + ":2:") == 0);
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(config::load(dir.file("missing.cfg")), clfd::ConfigError);
}

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
#include <limits>

#include <doctest.h>

#include "clfd/errors.hpp"
#include "clfd/strategies.hpp"
#include "helpers.hpp"

using clfd::Rng;
namespace st = clfd::strategies;

namespace {

// Plain per-row softmax cross-entropy in double; masked classes are skipped.
double oracle_ce_row(const std::vector<double>& z, int y, const std::vector<bool>& allowed = {}) {
  double sum = 0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (allowed.empty() || allowed[j]) sum += std::exp(z[j]);
  }
  return std::log(sum) - z[y];
}

std::vector<double> row_of(const std::vector<float>& v, int k, int r) {
  return std::vector<double>(v.begin() + r * k, v.begin() + (r + 1) * k);
}

std::vector<float> random_logits(Rng& rng, int rows, int k, double scale = 2.0) {
  std::vector<float> v(static_cast<std::size_t>(rows) * k);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-scale, scale));
  return v;
}

std::vector<int> random_labels(Rng& rng, int rows, int k) {
  std::vector<int> y(rows);
  for (auto& v : y) v = static_cast<int>(rng.below(k));
  return y;
}

// Central differences of `f` over every entry of `x`, compared with `grad`.
template <typename F>
void check_gradient(std::vector<float>& x, const std::vector<float>& grad, F f) {
  REQUIRE(grad.size() == x.size());
  const float h = 1e-2f;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(2e-3).scale(1e-3));
  }
}

}  // namespace

TEST_CASE("strategy names") {
  CHECK(st::parse_kind("derpp") == st::Kind::kDerpp);
  CHECK(st::kind_name(st::Kind::kErace) == "erace");
  CHECK_THROWS_AS(st::parse_kind("ewc"), clfd::ConfigError);
}

TEST_CASE("uniform logits over two classes give ln 2") {
  std::vector<float> z(8, 0.3f);
  std::vector<int> y{0, 1, 1, 0};
  auto r = st::loss_er({z, 2}, y, {{}, 2}, {});
  CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("empty replay reduces ER to fresh CE") {
  Rng rng(1);
  auto z = random_logits(rng, 5, 4);
  auto y = random_labels(rng, 5, 4);
  auto r = st::loss_er({z, 4}, y, {{}, 4}, {});
  double ref = 0;
  for (int i = 0; i < 5; ++i) ref += oracle_ce_row(row_of(z, 4, i), y[i]);
  CHECK(r.loss == doctest::Approx(ref / 5).epsilon(1e-6));
  CHECK(r.grad_replay_a.empty());
  CHECK_THROWS_AS(st::loss_er({{}, 4}, {}, {z, 4}, y), clfd::PreconditionError);
}

TEST_CASE("large correct margin drives CE to zero") {
  double prev = 1e9;
  for (float margin : {1.0f, 5.0f, 20.0f, 60.0f}) {
    std::vector<float> z{margin, 0.0f, 0.0f};
    std::vector<int> y{0};
    const double l = st::loss_er({z, 3}, y, {{}, 3}, {}).loss;
    CHECK(l < prev);
    CHECK(l >= 0.0);
    prev = l;
  }
  CHECK(prev < 1e-20);
}

TEST_CASE("ER is the mean over the concatenated rows") {
  Rng rng(2);
  auto zf = random_logits(rng, 3, 5), zr = random_logits(rng, 6, 5);
  auto yf = random_labels(rng, 3, 5), yr = random_labels(rng, 6, 5);
  auto r = st::loss_er({zf, 5}, yf, {zr, 5}, yr);
  double ref = 0;
  for (int i = 0; i < 3; ++i) ref += oracle_ce_row(row_of(zf, 5, i), yf[i]);
  for (int i = 0; i < 6; ++i) ref += oracle_ce_row(row_of(zr, 5, i), yr[i]);
  CHECK(r.loss == doctest::Approx(ref / 9).epsilon(1e-6));

  check_gradient(zf, r.grad_fresh, [&] { return st::loss_er({zf, 5}, yf, {zr, 5}, yr).loss; });
  check_gradient(zr, r.grad_replay_a, [&] { return st::loss_er({zf, 5}, yf, {zr, 5}, yr).loss; });
}

TEST_CASE("DER++ composition") {
  Rng rng(3);
  auto zf = random_logits(rng, 4, 3), za = random_logits(rng, 4, 3), zb = random_logits(rng, 4, 3);
  auto stored = random_logits(rng, 4, 3);
  auto yf = random_labels(rng, 4, 3), yb = random_labels(rng, 4, 3);

  const double fresh_only = st::loss_er({zf, 3}, yf, {{}, 3}, {}).loss;
  CHECK(st::loss_derpp({zf, 3}, yf, {za, 3}, stored, {zb, 3}, yb, 0.0, 0.0).loss == fresh_only);

  auto same = st::loss_derpp({zf, 3}, yf, {za, 3}, za, {{}, 3}, {}, 1.0, 0.0);
  CHECK(same.loss == doctest::Approx(fresh_only).epsilon(1e-12));

  double mse = 0;
  for (std::size_t i = 0; i < za.size(); ++i) mse += (double(za[i]) - stored[i]) * (za[i] - stored[i]);
  mse /= za.size();
  double ce_b = 0;
  for (int i = 0; i < 4; ++i) ce_b += oracle_ce_row(row_of(zb, 3, i), yb[i]);
  ce_b /= 4;
  auto r = st::loss_derpp({zf, 3}, yf, {za, 3}, stored, {zb, 3}, yb, 0.1, 0.5);
  CHECK(r.loss == doctest::Approx(fresh_only + 0.1 * mse + 0.5 * ce_b).epsilon(1e-6));
  CHECK(1.0 + 0.1 * 2.0 + 0.5 * 0.6931 == doctest::Approx(1.5466).epsilon(1e-4));

  const auto f = [&] {
    return st::loss_derpp({zf, 3}, yf, {za, 3}, stored, {zb, 3}, yb, 0.1, 0.5).loss;
  };
  check_gradient(zf, r.grad_fresh, f);
  check_gradient(za, r.grad_replay_a, f);
  check_gradient(zb, r.grad_replay_b, f);

  std::vector<float> short_stored(5);
  CHECK_THROWS_AS(st::loss_derpp({zf, 3}, yf, {za, 3}, short_stored, {zb, 3}, yb, 0.1, 0.5),
                  clfd::PreconditionError);
}

TEST_CASE("ER-ACE without seen classes equals ER") {
  Rng rng(4);
  auto zf = random_logits(rng, 6, 4);
  auto yf = random_labels(rng, 6, 4);
  std::vector<int> batch{0, 1, 2, 3};
  auto ace = st::loss_erace({zf, 4}, yf, {{}, 4}, {}, {}, batch);
  auto er = st::loss_er({zf, 4}, yf, {{}, 4}, {});
  CHECK(ace.loss == doctest::Approx(er.loss).epsilon(1e-12));
  CHECK(ace.grad_fresh == er.grad_fresh);
}

TEST_CASE("ER-ACE masks absent old classes on fresh rows") {
  // classes 0,1 old; 2,3 current and uniform; old logits huge but masked
  std::vector<float> zf{50, 40, 1, 1, -3, 70, 1, 1};
  std::vector<int> yf{2, 3};
  std::vector<int> seen{0, 1}, batch{2, 3};
  auto r = st::loss_erace({zf, 4}, yf, {{}, 4}, {}, seen, batch);
  CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(r.grad_fresh[0] == 0.0f);
  CHECK(r.grad_fresh[5] == 0.0f);

  // an old class present in the fresh batch stays visible
  std::vector<int> with_old{1, 2, 3};
  auto r2 = st::loss_erace({zf, 4}, yf, {{}, 4}, {}, seen, with_old);
  double ref = oracle_ce_row({50, 40, 1, 1}, 2, {false, true, true, true}) +
               oracle_ce_row({-3, 70, 1, 1}, 3, {false, true, true, true});
  CHECK(r2.loss == doctest::Approx(ref / 2).epsilon(1e-9));
}

TEST_CASE("ER-ACE replay term ignores fresh old-class logits") {
  Rng rng(5);
  auto zf = random_logits(rng, 4, 6), zr = random_logits(rng, 5, 6);
  auto yr = random_labels(rng, 5, 6);
  std::vector<int> yf{4, 5, 4, 5};
  std::vector<int> seen{0, 1, 2, 3}, batch{4, 5};
  auto a = st::loss_erace({zf, 6}, yf, {zr, 6}, yr, seen, batch);
  auto permuted = zf;
  for (int r = 0; r < 4; ++r) std::swap(permuted[r * 6 + 0], permuted[r * 6 + 3]);
  auto b = st::loss_erace({permuted, 6}, yf, {zr, 6}, yr, seen, batch);
  CHECK(a.loss == b.loss);
  CHECK(a.grad_replay_a == b.grad_replay_a);

  double ref = 0;
  for (int i = 0; i < 5; ++i) ref += oracle_ce_row(row_of(zr, 6, i), yr[i]);
  const double fresh = a.loss - ref / 5;
  double fresh_ref = 0;
  for (int i = 0; i < 4; ++i) {
    fresh_ref += oracle_ce_row(row_of(zf, 6, i), yf[i], {false, false, false, false, true, true});
  }
  CHECK(fresh == doctest::Approx(fresh_ref / 4).epsilon(1e-6));

  const auto f = [&] { return st::loss_erace({zf, 6}, yf, {zr, 6}, yr, seen, batch).loss; };
  check_gradient(zf, a.grad_fresh, f);
  check_gradient(zr, a.grad_replay_a, f);
}

TEST_CASE("losses are finite and nonnegative on random logits") {
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    auto zf = random_logits(rng, 4, 10, 30), zr = random_logits(rng, 4, 10, 30);
    auto yf = random_labels(rng, 4, 10), yr = random_labels(rng, 4, 10);
    for (double l : {st::loss_er({zf, 10}, yf, {zr, 10}, yr).loss,
                     st::loss_derpp({zf, 10}, yf, {zr, 10}, zf, {zr, 10}, yr, 0.3, 0.7).loss}) {
      CHECK(std::isfinite(l));
      CHECK(l >= 0.0);
    }
  }
}

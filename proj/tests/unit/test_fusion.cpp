/*
 * Copyright 2026 The fairfuse Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fame/errors.hpp"
#include "fame/fusion.hpp"
#include "support.hpp"

using namespace fame;
namespace ft = fame::testing;

namespace {

ModelShape small_shape(std::size_t k = 4, std::size_t width = 4) {
  ModelShape s;
  s.modality_names = {"demographic", "structured", "notes"};
  s.widths = {width, width + 2, width + 1};
  s.shared_width = k;
  s.hidden_width = 8;
  s.tasks = 3;
  return s;
}

Cohort small_cohort(std::size_t n = 60, std::uint64_t seed = 3) {
  GeneratorConfig g;
  g.n = n;
  g.widths = {4, 6, 5};
  g.seed = seed;
  return generate_cohort(g);
}

void expect_weights(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= tol);
}

}  // namespace

TEST_CASE("weight update worked examples") {
  auto s = FusionState::init(small_shape(), FusionMode::kFame, 1);
  const std::vector<double> any = {0.1, 0.2, 0.3};
  expect_weights(update_weights(s, any, 0.0, 0.05), {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1e-15);

  auto a = FusionState::init(small_shape(), FusionMode::kFame, 1);
  const std::vector<double> e1 = {0.10, 0.16, 0.20};
  const auto w1 = update_weights(a, e1, 0.5, 0.05);
  CHECK(std::abs(a.slot(0).raw_weight - (1.0 / 3 + 0.05)) <= 1e-12);
  CHECK(std::abs(a.slot(1).raw_weight - (1.0 / 3 + 0.02)) <= 1e-12);
  CHECK(a.slot(2).raw_weight == 1.0 / 3);
  expect_weights(w1, {0.358256, 0.330218, 0.311527}, 1e-6);
  // Exact fractions: raw weights 23/60, 53/150, 1/3 over a total of 1.07.
  expect_weights(w1, {(23.0 / 60) / 1.07, (53.0 / 150) / 1.07, (1.0 / 3) / 1.07}, 1e-12);

  auto b = FusionState::init(small_shape(), FusionMode::kFame, 1);
  const std::vector<double> e2 = {0.0, 0.3, 0.3};
  const auto w2 = update_weights(b, e2, 1.0, 0.05);
  expect_weights(w2, {0.365079, 0.317460, 0.317460}, 1e-6);
  expect_weights(w2, {23.0 / 63, 20.0 / 63, 20.0 / 63}, 1e-12);
}

TEST_CASE("weight update rejects bad arguments") {
  auto s = FusionState::init(small_shape(), FusionMode::kFame, 1);
  const std::vector<double> e = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(update_weights(s, e, -0.1, 0.05), ConfigError);
  CHECK_THROWS_AS(update_weights(s, e, 0.5, 0.0), ConfigError);
  const std::vector<double> short_e = {0.1, 0.2};
  CHECK_THROWS_AS(update_weights(s, short_e, 0.5, 0.05), ShapeError);
}

TEST_CASE("weight update invariants") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (int trial = 0; trial < 300; ++trial) {
    auto s = FusionState::init(small_shape(), FusionMode::kFame, trial);
    const double gamma = u(rng) * 2.0;
    const double clip = 0.01 + u(rng) * 0.1;
    const int updates = 1 + static_cast<int>(rng() % 10);
    for (int step = 0; step < updates; ++step) {
      std::vector<double> e = {u(rng), u(rng), u(rng)};
      std::vector<double> raw_before;
      for (std::size_t m = 0; m < 3; ++m) raw_before.push_back(s.slot(m).raw_weight);
      const auto w = update_weights(s, e, gamma, clip);
      const double total = std::accumulate(w.begin(), w.end(), 0.0);
      CHECK(std::abs(total - 1.0) <= 1e-12);
      const std::size_t worst = static_cast<std::size_t>(std::max_element(e.begin(), e.end()) - e.begin());
      for (std::size_t m = 0; m < 3; ++m) {
        const double inc = s.slot(m).raw_weight - raw_before[m];
        CHECK(w[m] > 0.0);
        CHECK(inc >= 0.0);
        CHECK(inc <= clip + 1e-15);
      }
      CHECK(s.slot(worst).raw_weight == raw_before[worst]);
    }
  }
}

TEST_CASE("weights respond inversely to EDDI when the clip is slack") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 0.08);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = FusionState::init(small_shape(), FusionMode::kFame, 0);
    std::vector<double> e = {u(rng), u(rng), u(rng)};
    const auto w = update_weights(s, e, 0.5, 0.05);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        if (e[i] < e[j]) CHECK(w[i] > w[j]);
      }
    }
  }
}

TEST_CASE("initial state") {
  const auto s = FusionState::init(small_shape(), FusionMode::kFame, 9);
  for (double w : s.normalized_weights()) CHECK(w == 1.0 / 3);
  for (double g : s.gate_block_means()) CHECK(g == 0.5);
  CHECK(s.gate().value.cols() == 12);
  CHECK(s.fused_width() == 12);

  const auto again = FusionState::init(small_shape(), FusionMode::kFame, 9);
  CHECK(save_checkpoint_json(s) == save_checkpoint_json(again));
  const auto other = FusionState::init(small_shape(), FusionMode::kFame, 10);
  CHECK(save_checkpoint_json(s) != save_checkpoint_json(other));
  CHECK(s.probe_digest() != other.probe_digest());

  const auto avg = FusionState::init(small_shape(), FusionMode::kAverage, 9);
  CHECK(avg.fused_width() == 4);
  CHECK_FALSE(avg.uses_gate());
  CHECK(avg.gate_block_means().empty());

  auto bad = small_shape();
  bad.dropout = 1.0;
  CHECK_THROWS_AS(FusionState::init(bad, FusionMode::kFame, 0), ConfigError);
  auto no_demo = small_shape();
  no_demo.modality_names[0] = "vitals";
  CHECK_THROWS_AS(FusionState::init(no_demo, FusionMode::kDfc, 0), ConfigError);
  CHECK_THROWS_AS(FusionState::init(small_shape(), FusionMode::kFame, 0,
                                    std::vector<std::size_t>{}),
                  ConfigError);
}

TEST_CASE("modes expose the right trainable parameters") {
  auto fame = FusionState::init(small_shape(), FusionMode::kFame, 0);
  auto eddi = FusionState::init(small_shape(), FusionMode::kEddiOnly, 0);
  auto dfc = FusionState::init(small_shape(), FusionMode::kDfc, 0);
  CHECK(fame.trainable().size() == 3 + 1 + 4);
  CHECK(eddi.trainable().size() == 3 + 4);
  CHECK(dfc.trainable().size() == 2 + 4);
  // Probes are never handed to the optimizer.
  for (auto* p : fame.trainable()) {
    for (std::size_t m = 0; m < 3; ++m) {
      CHECK(&p->value != &fame.slot(m).probe.weights);
      CHECK(&p->value != &fame.slot(m).probe.bias);
    }
  }
  CHECK(dfc.normalized_weights()[0] == 0.0);
  CHECK(dfc.normalized_weights()[1] == 0.5);
}

TEST_CASE("gated fusion with identity projections reduces to average fusion") {
  const std::size_t k = 4;
  auto shape = small_shape(k, k);
  shape.widths = {k, k, k};
  auto s = FusionState::init(shape, FusionMode::kFame, 2);
  for (std::size_t m = 0; m < 3; ++m) {
    auto& proj = s.slot(m).projection.value;
    proj = Tensor2(k, k);
    for (std::size_t i = 0; i < k; ++i) proj(i, i) = 1.0;
  }
  std::mt19937_64 rng(8);
  std::vector<Tensor2> inputs;
  for (int m = 0; m < 3; ++m) inputs.push_back(ft::random_tensor(5, k, rng));
  const std::vector<double> eddi = {0.4, 0.1, 0.3};
  update_weights(s, eddi, 0.0, 0.05);

  Tape tape(false);
  const auto out = forward(tape, static_cast<const FusionState&>(s), ModalityBatch(inputs));
  const Tensor2& fused = tape.value(out.fused);
  REQUIRE(fused.rows() == 5);
  REQUIRE(fused.cols() == 3 * k);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t m = 0; m < 3; ++m) {
      for (std::size_t c = 0; c < k; ++c) {
        const double want = 0.5 * (inputs[m](r, c) / 3.0);
        CHECK(std::abs(fused(r, m * k + c) - want) <= 1e-12);
      }
    }
  }
  // The per-block sum equals the average-fusion representation.
  auto avg = FusionState::init(shape, FusionMode::kAverage, 2);
  for (std::size_t m = 0; m < 3; ++m) avg.slot(m).projection.value = s.slot(m).projection.value;
  Tape tape2(false);
  const auto avg_out =
      forward(tape2, static_cast<const FusionState&>(avg), ModalityBatch(inputs));
  const Tensor2& mean = tape2.value(avg_out.fused);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      double block_sum = 0.0;
      for (std::size_t m = 0; m < 3; ++m) block_sum += fused(r, m * k + c);
      CHECK(std::abs(2.0 * block_sum - mean(r, c)) <= 1e-12);
    }
  }
}

TEST_CASE("sigmoid-only mode keeps uniform fusion weights") {
  auto s = FusionState::init(small_shape(), FusionMode::kSigmoidOnly, 4);
  const std::vector<double> eddi = {0.0, 0.3, 0.3};
  update_weights(s, eddi, 1.0, 0.05);
  for (double w : s.fusion_weights()) CHECK(w == 1.0 / 3);
  std::mt19937_64 rng(1);
  std::vector<Tensor2> inputs = {ft::random_tensor(3, 4, rng), ft::random_tensor(3, 6, rng),
                                 ft::random_tensor(3, 5, rng)};
  Tape tape(false);
  const auto out = forward(tape, static_cast<const FusionState&>(s), ModalityBatch(inputs));
  const Tensor2& concat = tape.value(*out.concat);
  const Tensor2& fused = tape.value(out.fused);
  for (std::size_t i = 0; i < fused.size(); ++i) CHECK(fused[i] == 0.5 * concat[i]);
}

TEST_CASE("excluded modalities are never read") {
  std::mt19937_64 rng(1);
  std::vector<Tensor2> inputs = {ft::random_tensor(3, 4, rng), ft::random_tensor(3, 6, rng),
                                 ft::random_tensor(3, 5, rng)};
  const auto dfc = FusionState::init(small_shape(), FusionMode::kDfc, 4);
  ModalityBatch batch(inputs);
  Tape tape(false);
  forward(tape, dfc, batch);
  CHECK(batch.reads(0) == 0);
  CHECK(batch.reads(1) == 1);
  CHECK(batch.reads(2) == 1);

  const auto notes_only =
      FusionState::init(small_shape(), FusionMode::kAverage, 4, std::vector<std::size_t>{2});
  ModalityBatch batch2(inputs);
  Tape tape2(false);
  forward(tape2, notes_only, batch2);
  CHECK(batch2.reads(0) == 0);
  CHECK(batch2.reads(1) == 0);
  CHECK(batch2.reads(2) == 1);

  std::vector<Tensor2> wrong = inputs;
  wrong[1] = Tensor2(3, 2);
  CHECK_THROWS_AS(forward(tape2, dfc, ModalityBatch(wrong)), ShapeError);
}

TEST_CASE("checkpoint round trip is exact") {
  auto s = FusionState::init(small_shape(), FusionMode::kFame, 12);
  const std::vector<double> eddi = {0.2, 0.05, 0.1};
  update_weights(s, eddi, 0.5, 0.05);
  s.gate().value[3] = -1.25;
  s.set_epoch(7);
  const std::string text = save_checkpoint_json(s);
  const auto back = load_checkpoint_json(text);
  CHECK(save_checkpoint_json(back) == text);
  CHECK(back.epoch() == 7);
  CHECK(back.mode() == FusionMode::kFame);
  CHECK(back.probe_digest() == s.probe_digest());
  CHECK(back.normalized_weights() == s.normalized_weights());
  CHECK(back.gate().value == s.gate().value);

  CHECK_THROWS(load_checkpoint_json("{}"));
  CHECK_THROWS(load_checkpoint_json("not json"));
}

TEST_CASE("predictions are deterministic and probabilities") {
  const auto cohort = small_cohort();
  auto shape = small_shape();
  shape.widths = cohort.widths;
  const auto s = FusionState::init(shape, FusionMode::kFame, 3);
  std::vector<std::size_t> rows(cohort.size());
  std::iota(rows.begin(), rows.end(), 0);
  const Tensor2 p1 = predict_proba(s, cohort, rows);
  const Tensor2 p2 = predict_proba(s, cohort, rows);
  CHECK(p1 == p2);
  for (double v : p1.values()) CHECK((v > 0.0 && v < 1.0));

  // Rows are scored independently of their batch neighbours.
  std::vector<std::size_t> tail(rows.begin() + 10, rows.begin() + 20);
  const Tensor2 part = predict_proba(s, cohort, tail);
  for (std::size_t r = 0; r < tail.size(); ++r) {
    for (std::size_t t = 0; t < 3; ++t) CHECK(part(r, t) == doctest::Approx(p1(10 + r, t)).epsilon(1e-12));
  }
}

TEST_CASE("probe EDDI is per active modality and leaves probes untouched") {
  const auto cohort = small_cohort(120);
  auto shape = small_shape();
  shape.widths = cohort.widths;
  const auto s = FusionState::init(shape, FusionMode::kDfc, 3);
  const std::string digest = s.probe_digest();
  std::vector<std::size_t> rows(cohort.size());
  std::iota(rows.begin(), rows.end(), 0);
  const auto e = probe_eddi(s, cohort, rows, 0.5);
  REQUIRE(e.size() == 3);
  CHECK(e[0] == 0.0);
  for (double v : e) CHECK(v >= 0.0);
  CHECK(s.probe_digest() == digest);
  const Tensor2 p = probe_proba(s, 1, cohort.modality_matrix(1, rows));
  CHECK(p.rows() == rows.size());
  CHECK(p.cols() == 3);
}

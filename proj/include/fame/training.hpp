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

#ifndef FAME_TRAINING_HPP_
#define FAME_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fame/autodiff.hpp"
#include "fame/cohort.hpp"
#include "fame/fusion.hpp"
#include "fame/metrics.hpp"

namespace fame {

struct TrainConfig {
  double lambda = 0.8;    // fairness loss coefficient
  double gamma = 0.5;     // modality weight update rate
  double clip = 0.05;     // per-epoch cap on a weight increment
  double l1_alpha = 0.01;  // L1 on gate activations
  double lr = 1e-5;
  double weight_decay = 0.01;
  std::size_t batch_size = 16;
  std::size_t patience = 5;
  std::size_t max_epochs = 30;
  double plateau_factor = 0.5;
  std::size_t plateau_patience = 2;
  double min_lr = 1e-7;
  FusionMode mode = FusionMode::kFame;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  std::size_t shared_width = 256;
  std::size_t hidden_width = 512;
  double dropout = 0.2;
  // Restricts the model to these modalities (single-modality baselines).
  std::optional<std::vector<std::size_t>> active_modalities;

  void validate() const;  // throws ConfigError
};

// INS weights per task: w_c = N / (2 n_c); an absent class gets 0 and a
// warning appended to `warnings`.
std::vector<ClassWeights> ins_class_weights(const Tensor2& labels,
                                            std::vector<std::string>* warnings = nullptr);

// Differentiable EDDI surrogate for one attribute and task: per-sample soft
// error |p - y| replaces the thresholded error inside the subgroup formula.
struct SoftEddiValue {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d p, one per sample
};
SoftEddiValue soft_eddi_attribute(std::span<const double> probs, std::span<const double> truth,
                                  std::span<const std::size_t> groups);

// Mean of soft_eddi_attribute over the three attributes and all tasks.
// `probs` and `truth` are N x T. Returns the loss and an N x T gradient.
struct SoftEddiLoss {
  double loss = 0.0;
  Tensor2 grad;
};
SoftEddiLoss soft_eddi_loss(const Tensor2& probs, const Tensor2& truth,
                            std::span<const SensitiveAttributes> attrs);

namespace ad {
Var soft_eddi(Tape& t, Var probs, const Tensor2& truth, std::span<const SensitiveAttributes> attrs);
}  // namespace ad

struct LossTerms {
  Var total;
  Var bce;
  Var eddi;
  std::optional<Var> l1;
};

// BCE + lambda * soft EDDI(sigmoid(logits)) + l1_alpha * mean|gate|.
LossTerms total_loss(Tape& tape, Var logits, const Tensor2& truth,
                     std::span<const SensitiveAttributes> attrs,
                     std::span<const ClassWeights> class_weights, const TrainConfig& cfg,
                     std::optional<Var> gate_activation);

struct TrajectoryRow {
  std::size_t epoch = 0;
  std::vector<double> weights;                   // per modality
  std::vector<std::optional<double>> gate_means;  // per modality
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_eddi = 0.0;
  double lr = 0.0;
};

struct WeightTrajectory {
  std::vector<std::string> modality_names;
  std::vector<TrajectoryRow> rows;

  std::string to_csv() const;
};

struct TrainResult {
  FusionState final_state;
  FusionState best_state;
  WeightTrajectory trajectory;
  std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(const TrajectoryRow&)>;

// Throws DivergenceError naming epoch and batch on a non-finite loss.
TrainResult train(const Cohort& cohort, const Split& split, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = nullptr);

PredictionSet predictions(const FusionState& state, const Cohort& cohort,
                          std::span<const std::size_t> ids, double threshold);
FairnessReport evaluate(const FusionState& state, const Cohort& cohort,
                        std::span<const std::size_t> ids, double threshold);

}  // namespace fame

#endif  // FAME_TRAINING_HPP_

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

// Performance and subgroup-fairness metrics.
//
// Disparity is measured with the Error Distribution Disparity Index: each
// subgroup's error rate is compared to the overall error rate and normalised
// by max(OER, 1 - OER). Per attribute the subgroup values are combined with a
// root-sum-of-squares so positive and negative deviations cannot cancel; the
// plain signed mean is kept only for comparison output.

#ifndef FAME_METRICS_HPP_
#define FAME_METRICS_HPP_

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fame/cohort.hpp"
#include "fame/tensor.hpp"

namespace fame {

// Scores, ground truth and attributes for N samples and T tasks.
struct PredictionSet {
  Tensor2 scores;  // N x T probabilities
  Tensor2 truth;   // N x T in {0, 1}
  std::vector<SensitiveAttributes> attrs;
  double threshold = 0.5;

  std::size_t samples() const { return scores.rows(); }
  std::size_t tasks() const { return scores.cols(); }
  bool hard(std::size_t i, std::size_t task) const { return scores(i, task) >= threshold; }
  bool positive(std::size_t i, std::size_t task) const { return truth(i, task) > 0.5; }

  void validate() const;  // throws InputError / ShapeError
};

struct ErrorRates {
  double overall = 0.0;
  // Indexed by subgroup; empty subgroups stay nullopt.
  std::vector<std::optional<double>> subgroup;
  std::vector<std::size_t> counts;
};

ErrorRates error_rates(const PredictionSet& pred, Attribute attribute, std::size_t task);

// (er_s - oer) / max(oer, 1 - oer); keeps the sign.
double eddi_subgroup(double er_s, double oer);
// (1/|S|) * sqrt(sum of squares). Throws InputError on an empty list.
double eddi_attribute(std::span<const double> eddi_s);
// Signed arithmetic mean, for comparison only.
double eddi_mean_legacy(std::span<const double> eddi_s);

struct ConfusionRates {
  std::vector<std::optional<double>> tpr;  // nullopt without positives
  std::vector<std::optional<double>> fpr;  // nullopt without negatives
};

ConfusionRates confusion_rates(const PredictionSet& pred, Attribute attribute, std::size_t task);

// Mean absolute pairwise difference over subgroups that have the rate.
std::optional<double> mean_pairwise_gap(std::span<const std::optional<double>> rates);
// (TPR gap + FPR gap) / 2; a side without two eligible subgroups is dropped,
// and nullopt means neither side is defined.
std::optional<double> equalized_odds_gap(const ConfusionRates& rates);
std::optional<double> equalized_odds_gap(const PredictionSet& pred, Attribute attribute,
                                         std::size_t task);

// Mann-Whitney AUROC with half credit for ties; nullopt for single-class truth.
std::optional<double> auroc(std::span<const double> scores, std::span<const double> truth);
// Step-interpolated average precision, tied scores share one threshold;
// nullopt without positives.
std::optional<double> auprc(std::span<const double> scores, std::span<const double> truth);

struct SubgroupStats {
  std::size_t count = 0;
  double error_rate = 0.0;
  double eddi = 0.0;
  std::optional<double> tpr;
  std::optional<double> fpr;
};

struct AttributeTaskStats {
  double overall_error = 0.0;
  double eddi = 0.0;         // sign-agnostic
  double eddi_legacy = 0.0;  // signed mean
  std::optional<double> eo;
  std::vector<std::optional<SubgroupStats>> subgroups;
};

struct FairnessReport {
  std::size_t samples = 0;
  double threshold = 0.5;
  std::vector<std::string> task_names;
  std::vector<std::optional<double>> auroc;
  std::vector<std::optional<double>> auprc;
  // [attribute][task]
  std::array<std::vector<AttributeTaskStats>, 3> cells;
  // Task means per attribute.
  std::array<double, 3> eddi_attribute{};
  std::array<std::optional<double>, 3> eo_attribute{};
  // Attribute means per task.
  std::vector<double> eddi_task;
  std::vector<std::optional<double>> eo_task;
  double eddi_overall = 0.0;
  std::optional<double> eo_overall;
  double eddi_legacy_overall = 0.0;

  const AttributeTaskStats& cell(Attribute a, std::size_t task) const {
    return cells[static_cast<std::size_t>(a)][task];
  }
  // Mean of the defined per-task values (nullopt if none are defined).
  std::optional<double> mean_auroc() const;
  std::optional<double> mean_auprc() const;
};

FairnessReport evaluate_predictions(const PredictionSet& pred);

// Mean over attributes and tasks of the sign-agnostic EDDI only; this is what
// the per-modality probes need and skips the ranking metrics.
double mean_eddi(const PredictionSet& pred);

// Stable JSON rendering (fixed key order, round-trip doubles).
std::string report_to_json(const FairnessReport& report);

}  // namespace fame

#endif  // FAME_METRICS_HPP_

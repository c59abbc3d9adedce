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

#include "fame/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "fame/errors.hpp"
#include "fame/rng.hpp"

namespace fame {

void TrainConfig::validate() const {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (!positive(clip)) throw ConfigError("clip must be > 0");
  if (!(l1_alpha >= 0.0)) throw ConfigError("l1_alpha must be >= 0");
  if (!positive(lr)) throw ConfigError("lr must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (patience == 0) throw ConfigError("patience must be >= 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be >= 1");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) {
    throw ConfigError("plateau_factor must lie in (0, 1)");
  }
  if (plateau_patience == 0) throw ConfigError("plateau_patience must be >= 1");
  if (!(min_lr >= 0.0)) throw ConfigError("min_lr must be >= 0");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  if (shared_width == 0 || hidden_width == 0) throw ConfigError("layer widths must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

std::vector<ClassWeights> ins_class_weights(const Tensor2& labels,
                                            std::vector<std::string>* warnings) {
  std::vector<ClassWeights> out(labels.cols());
  const double n = static_cast<double>(labels.rows());
  for (std::size_t t = 0; t < labels.cols(); ++t) {
    std::size_t pos = 0;
    for (std::size_t r = 0; r < labels.rows(); ++r) pos += labels(r, t) > 0.5 ? 1 : 0;
    const std::size_t neg = labels.rows() - pos;
    out[t].pos = pos > 0 ? n / (2.0 * static_cast<double>(pos)) : 0.0;
    out[t].neg = neg > 0 ? n / (2.0 * static_cast<double>(neg)) : 0.0;
    if ((pos == 0 || neg == 0) && warnings != nullptr) {
      warnings->push_back("task " + task_name(t) + ": no " + (pos == 0 ? "positive" : "negative") +
                          " samples, class weight set to 0");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Soft EDDI

SoftEddiValue soft_eddi_attribute(std::span<const double> probs, std::span<const double> truth,
                                  std::span<const std::size_t> groups) {
  const std::size_t n = probs.size();
  SoftEddiValue out;
  out.grad.assign(n, 0.0);
  if (n == 0) return out;

  std::size_t group_count = 0;
  for (std::size_t g : groups) group_count = std::max(group_count, g + 1);
  std::vector<double> err_sum(group_count, 0.0);
  std::vector<std::size_t> sizes(group_count, 0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::abs(probs[i] - truth[i]);
    err_sum[groups[i]] += e;
    sizes[groups[i]] += 1;
    total += e;
  }
  const double oer = total / static_cast<double>(n);
  const double denom = std::max(oer, 1.0 - oer);
  // Subgradient of max(oer, 1 - oer): 0 at the tie.
  const double d_denom = oer > 0.5 ? 1.0 : (oer < 0.5 ? -1.0 : 0.0);

  std::vector<double> eddi(group_count, 0.0);
  std::size_t present = 0;
  double squares = 0.0;
  for (std::size_t g = 0; g < group_count; ++g) {
    if (sizes[g] == 0) continue;
    ++present;
    eddi[g] = (err_sum[g] / static_cast<double>(sizes[g]) - oer) / denom;
    squares += eddi[g] * eddi[g];
  }
  const double root = std::sqrt(squares);
  out.loss = root / static_cast<double>(present);
  if (root == 0.0) return out;

  // dL/dE_g, then push through E_g = (ER_g - OER) / D(OER).
  double d_oer = 0.0;
  std::vector<double> d_er(group_count, 0.0);
  for (std::size_t g = 0; g < group_count; ++g) {
    if (sizes[g] == 0) continue;
    const double d_e = eddi[g] / (static_cast<double>(present) * root);
    d_er[g] = d_e / denom;
    d_oer += d_e * (-1.0 / denom - eddi[g] / denom * d_denom);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = groups[i];
    const double d_err = d_er[g] / static_cast<double>(sizes[g]) + d_oer / static_cast<double>(n);
    // |p - y| with y in {0, 1}: slope -1 for positives, +1 for negatives.
    out.grad[i] = truth[i] > 0.5 ? -d_err : d_err;
  }
  return out;
}

SoftEddiLoss soft_eddi_loss(const Tensor2& probs, const Tensor2& truth,
                            std::span<const SensitiveAttributes> attrs) {
  require_same_shape(probs, truth, "soft_eddi_loss");
  if (attrs.size() != probs.rows()) throw ShapeError("soft_eddi_loss: attribute rows mismatch");
  const std::size_t n = probs.rows();
  const std::size_t tasks = probs.cols();
  SoftEddiLoss out;
  out.grad = Tensor2(n, tasks);
  const double cells = static_cast<double>(kAllAttributes.size() * tasks);
  std::vector<double> p(n), y(n);
  std::vector<std::size_t> groups(n);
  for (std::size_t t = 0; t < tasks; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = probs(i, t);
      y[i] = truth(i, t);
    }
    for (Attribute a : kAllAttributes) {
      for (std::size_t i = 0; i < n; ++i) groups[i] = attrs[i].of(a);
      const auto v = soft_eddi_attribute(p, y, groups);
      out.loss += v.loss / cells;
      for (std::size_t i = 0; i < n; ++i) out.grad(i, t) += v.grad[i] / cells;
    }
  }
  return out;
}

namespace ad {

Var soft_eddi(Tape& t, Var probs, const Tensor2& truth, std::span<const SensitiveAttributes> attrs) {
  auto value = soft_eddi_loss(t.value(probs), truth, attrs);
  Tensor2 grad = std::move(value.grad);
  return t.record(Tensor2(1, 1, value.loss), {probs},
                  [probs, grad = std::move(grad)](Tape& tp, const Tensor2& g) {
                    Tensor2 gp = grad;
                    for (double& v : gp.values()) v *= g[0];
                    tp.accumulate(probs, gp);
                  });
}

}  // namespace ad

LossTerms total_loss(Tape& tape, Var logits, const Tensor2& truth,
                     std::span<const SensitiveAttributes> attrs,
                     std::span<const ClassWeights> class_weights, const TrainConfig& cfg,
                     std::optional<Var> gate_activation) {
  LossTerms terms;
  terms.bce = ad::weighted_bce(tape, logits, truth, class_weights);
  terms.eddi = ad::soft_eddi(tape, ad::sigmoid(tape, logits), truth, attrs);
  std::vector<Var> parts = {terms.bce, terms.eddi};
  std::vector<double> coefs = {1.0, cfg.lambda};
  if (gate_activation) {
    terms.l1 = ad::mean_abs(tape, *gate_activation);
    parts.push_back(*terms.l1);
    coefs.push_back(cfg.l1_alpha);
  }
  terms.total = ad::linear_combination(tape, parts, coefs);
  return terms;
}

// ---------------------------------------------------------------------------
// Trajectory

std::string WeightTrajectory::to_csv() const {
  std::ostringstream out;
  out << "epoch";
  for (const auto& m : modality_names) out << ",w_" << m;
  for (const auto& m : modality_names) out << ",gate_" << m;
  out << ",train_loss,val_loss,val_eddi\n";
  char buf[64];
  const auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& row : rows) {
    out << row.epoch;
    for (double w : row.weights) out << ',' << num(w);
    for (const auto& g : row.gate_means) out << ',' << (g ? num(*g) : std::string());
    out << ',' << num(row.train_loss) << ',' << num(row.val_loss) << ',' << num(row.val_eddi)
        << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

ModelShape shape_for(const Cohort& cohort, const TrainConfig& cfg) {
  ModelShape shape;
  shape.modality_names = cohort.modality_names;
  shape.widths = cohort.widths;
  shape.shared_width = cfg.shared_width;
  shape.hidden_width = cfg.hidden_width;
  shape.tasks = cohort.task_count;
  shape.dropout = cfg.dropout;
  return shape;
}

struct Evaluation {
  double loss = 0.0;
  double eddi = 0.0;
};

Evaluation evaluate_loss(const FusionState& state, const Cohort& cohort,
                         std::span<const std::size_t> ids, std::span<const ClassWeights> weights,
                         const TrainConfig& cfg) {
  const Tensor2 truth = cohort.label_matrix(ids);
  const auto attrs = cohort.attributes(ids);
  const auto batch = ModalityBatch::from_cohort(cohort, ids);
  Tape tape(/*record=*/false);
  const Tensor2 logits = tape.value(forward(tape, state, batch).logits);
  const Tensor2 probs = ops::sigmoid(logits);
  Evaluation e;
  double loss = ops::weighted_bce(logits, truth, weights) +
                cfg.lambda * soft_eddi_loss(probs, truth, attrs).loss;
  if (state.uses_gate()) {
    double l1 = 0.0;
    for (double w : state.gate().value.values()) l1 += std::abs(ops::sigmoid(w));
    loss += cfg.l1_alpha * l1 / static_cast<double>(state.gate().value.size());
  }
  e.loss = loss;
  PredictionSet pred{probs, truth, attrs, cfg.threshold};
  e.eddi = mean_eddi(pred);
  return e;
}

}  // namespace

TrainResult train(const Cohort& cohort, const Split& split, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (split.train.empty() || split.val.empty()) {
    throw InputError("train: split needs non-empty train and validation sets");
  }
  FusionState state =
      FusionState::init(shape_for(cohort, cfg), cfg.mode, cfg.seed, cfg.active_modalities);
  const auto weights = ins_class_weights(cohort.label_matrix(split.train));

  auto shuffle_rng = stream(cfg.seed, kStreamShuffle);
  auto dropout_rng = stream(cfg.seed, kStreamDropout);
  AdamW optimizer;
  optimizer.lr = cfg.lr;
  optimizer.weight_decay = cfg.weight_decay;

  TrainResult result{state, state, {}, 0};
  result.trajectory.modality_names = cohort.modality_names;

  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t plateau_bad = 0;
  std::vector<std::size_t> order = split.train;
  auto params = state.trainable();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng() % (i + 1)]);
    }

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::span<const std::size_t> ids(order.data() + begin, end - begin);
      const auto batch = ModalityBatch::from_cohort(cohort, ids);
      const Tensor2 truth = cohort.label_matrix(ids);
      const auto attrs = cohort.attributes(ids);

      Tape tape;
      const auto fwd = forward(tape, state, batch, /*training=*/true, dropout_rng);
      const auto terms = total_loss(tape, fwd.logits, truth, attrs, weights, cfg, fwd.gate);
      const double loss = tape.value(terms.total)[0];
      if (!std::isfinite(loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch_index));
      }
      tape.backward(terms.total);
      optimizer.step(params);
      loss_sum += loss * static_cast<double>(ids.size());
    }

    if (state.uses_eddi_weights()) {
      const auto eddi = probe_eddi(state, cohort, split.train, cfg.threshold);
      update_weights(state, eddi, cfg.gamma, cfg.clip);
    }
    state.set_epoch(epoch);

    const auto val = evaluate_loss(state, cohort, split.val, weights, cfg);
    TrajectoryRow row;
    row.epoch = epoch;
    row.weights = state.normalized_weights();
    row.gate_means.assign(state.modality_count(), std::nullopt);
    if (state.uses_gate()) {
      const auto means = state.gate_block_means();
      const auto active = state.active_modalities();
      for (std::size_t b = 0; b < active.size(); ++b) row.gate_means[active[b]] = means[b];
    }
    row.train_loss = loss_sum / static_cast<double>(order.size());
    row.val_loss = val.loss;
    row.val_eddi = val.eddi;
    row.lr = optimizer.lr;
    result.trajectory.rows.push_back(row);
    if (on_epoch) on_epoch(row);

    if (!std::isfinite(val.loss)) {
      throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    if (val.loss < best_val) {
      best_val = val.loss;
      result.best_state = state;
      result.best_epoch = epoch;
      since_best = 0;
      plateau_bad = 0;
    } else {
      ++since_best;
      if (++plateau_bad >= cfg.plateau_patience) {
        optimizer.lr = std::max(optimizer.lr * cfg.plateau_factor, cfg.min_lr);
        plateau_bad = 0;
      }
      if (since_best >= cfg.patience) break;
    }
  }
  result.final_state = std::move(state);
  return result;
}

PredictionSet predictions(const FusionState& state, const Cohort& cohort,
                          std::span<const std::size_t> ids, double threshold) {
  if (ids.empty()) throw InputError("evaluate: no ids");
  PredictionSet pred;
  pred.scores = predict_proba(state, cohort, ids);
  pred.truth = cohort.label_matrix(ids);
  pred.attrs = cohort.attributes(ids);
  pred.threshold = threshold;
  return pred;
}

FairnessReport evaluate(const FusionState& state, const Cohort& cohort,
                        std::span<const std::size_t> ids, double threshold) {
  return evaluate_predictions(predictions(state, cohort, ids, threshold));
}

}  // namespace fame

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

// Fairness-weighted multimodal fusion model.
//
// Each modality m is projected into a shared k-wide space (z_m * W_m) and
// scaled by a normalised per-modality weight. The raw weights start at 1/M
// and grow once per epoch by gamma * (max EDDI - EDDI_m), clipped, so the
// modalities whose frozen probes show less subgroup disparity gain share.
// The weighted projections are concatenated, optionally modulated by a
// learned sigmoid gate, and fed to a ReLU/dropout classifier head.
//
// Modes select which pieces are active:
//   kFame         weights + gate
//   kEddiOnly     weights, no gate
//   kSigmoidOnly  fixed 1/M weights + gate
//   kAverage      unweighted mean of projections (no concat, no gate)
//   kDfc          kAverage without the demographic modality

#ifndef FAME_FUSION_HPP_
#define FAME_FUSION_HPP_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fame/autodiff.hpp"
#include "fame/cohort.hpp"
#include "fame/tensor.hpp"

namespace fame {

enum class FusionMode { kFame, kEddiOnly, kSigmoidOnly, kAverage, kDfc };

std::string_view mode_name(FusionMode mode);
std::optional<FusionMode> parse_mode(std::string_view name);

struct ModelShape {
  std::vector<std::string> modality_names;
  std::vector<std::size_t> widths;
  std::size_t shared_width = 256;  // k
  std::size_t hidden_width = 512;  // h
  std::size_t tasks = 3;
  double dropout = 0.2;
};

// Frozen affine probe on one modality's projected embedding: k x T weights
// plus a 1 x T bias.
struct ProbeHead {
  Tensor2 weights;
  Tensor2 bias;
};

struct ModalitySlot {
  std::string name;
  std::size_t width = 0;
  bool active = true;
  double raw_weight = 0.0;
  Parameter projection;  // width x k
  ProbeHead probe;
};

class FusionState {
 public:
  // Uniform raw weights, Xavier projections and classifier, zero gate, random
  // then frozen probes. `active` overrides which modalities take part (used
  // for single-modality models); kDfc drops "demographic" by itself.
  static FusionState init(const ModelShape& shape, FusionMode mode, std::uint64_t seed,
                          std::optional<std::vector<std::size_t>> active = std::nullopt);

  FusionMode mode() const { return mode_; }
  const ModelShape& shape() const { return shape_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t epoch() const { return epoch_; }
  void set_epoch(std::size_t e) { epoch_ = e; }

  std::size_t modality_count() const { return slots_.size(); }
  const ModalitySlot& slot(std::size_t m) const { return slots_[m]; }
  ModalitySlot& slot(std::size_t m) { return slots_[m]; }
  std::vector<std::size_t> active_modalities() const;

  bool uses_gate() const;
  bool uses_eddi_weights() const;
  bool concatenates() const;
  // Width fed to the classifier.
  std::size_t fused_width() const;

  // w_m / sum(w); inactive modalities report 0.
  std::vector<double> normalized_weights() const;
  // Weights applied in the forward pass (fixed 1/M in kSigmoidOnly).
  std::vector<double> fusion_weights() const;

  Parameter& gate() { return gate_; }
  const Parameter& gate() const { return gate_; }
  Parameter& hidden_weights() { return hidden_w_; }
  Parameter& hidden_bias() { return hidden_b_; }
  Parameter& output_weights() { return out_w_; }
  Parameter& output_bias() { return out_b_; }
  const Parameter& hidden_weights() const { return hidden_w_; }
  const Parameter& hidden_bias() const { return hidden_b_; }
  const Parameter& output_weights() const { return out_w_; }
  const Parameter& output_bias() const { return out_b_; }

  // Everything the optimizer updates; probes are never included.
  std::vector<Parameter*> trainable();

  // Mean sigma(W) over each active modality's k gate entries (concat order).
  std::vector<double> gate_block_means() const;

  // SHA-256 over every probe tensor, hex encoded.
  std::string probe_digest() const;

 private:
  friend FusionState load_checkpoint_json(const std::string&);

  FusionMode mode_ = FusionMode::kFame;
  ModelShape shape_;
  std::uint64_t seed_ = 0;
  std::size_t epoch_ = 0;
  std::vector<ModalitySlot> slots_;
  Parameter gate_;
  Parameter hidden_w_;
  Parameter hidden_b_;
  Parameter out_w_;
  Parameter out_b_;
};

// Per-modality inputs for one batch. Counts reads so tests can prove a mode
// never touches a modality.
class ModalityBatch {
 public:
  ModalityBatch() = default;
  explicit ModalityBatch(std::vector<Tensor2> inputs);
  static ModalityBatch from_cohort(const Cohort& cohort, std::span<const std::size_t> rows);

  const Tensor2& read(std::size_t m) const;
  std::size_t reads(std::size_t m) const { return reads_[m]; }
  std::size_t modality_count() const { return inputs_.size(); }
  std::size_t rows() const { return inputs_.empty() ? 0 : inputs_.front().rows(); }

 private:
  std::vector<Tensor2> inputs_;
  mutable std::vector<std::size_t> reads_;
};

struct ForwardResult {
  Var logits;                 // N x T
  Var fused;                  // classifier input
  std::optional<Var> concat;  // weighted concat before the gate (concat modes)
  std::optional<Var> gate;    // sigma(W), 1 x (A*k) (gated modes)
};

// Training forward: gradients flow into the state's trainable parameters.
// Inputs are read in place, so the batch must outlive the tape.
ForwardResult forward(Tape& tape, FusionState& state, const ModalityBatch& batch, bool training,
                      std::mt19937_64& dropout_rng);
// Evaluation forward on a frozen state (dropout off, nothing is mutated).
ForwardResult forward(Tape& tape, const FusionState& state, const ModalityBatch& batch);

// Sigmoid probabilities, N x T, evaluated shard-parallel on a frozen state.
Tensor2 predict_proba(const FusionState& state, const Cohort& cohort,
                      std::span<const std::size_t> rows);

// Per-modality probe EDDI over `rows` (inactive modalities report 0).
std::vector<double> probe_eddi(const FusionState& state, const Cohort& cohort,
                               std::span<const std::size_t> rows, double threshold);
// Probe probabilities for modality m, N x T.
Tensor2 probe_proba(const FusionState& state, std::size_t m, const Tensor2& inputs);

// increment_m = min(clip, gamma * (max EDDI - EDDI_m)); returns the new
// normalised weights. Only active modalities take part.
std::vector<double> update_weights(FusionState& state, std::span<const double> eddi, double gamma,
                                   double clip);

std::string save_checkpoint_json(const FusionState& state);
FusionState load_checkpoint_json(const std::string& text);
void save_checkpoint(const FusionState& state, const std::string& path);
FusionState load_checkpoint(const std::string& path);

}  // namespace fame

#endif  // FAME_FUSION_HPP_

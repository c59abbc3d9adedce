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

#include "fame/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <type_traits>

#include "fame/errors.hpp"
#include "fame/hash.hpp"
#include "fame/kernels.hpp"
#include "fame/metrics.hpp"
#include "fame/rng.hpp"
#include "json.hpp"

namespace fame {

namespace {
constexpr std::string_view kDemographic = "demographic";
constexpr std::size_t kShardRows = 512;
// Probe heads are Xavier draws shrunk so clean embeddings sit near the
// sigmoid midpoint and per-subgroup variance shifts cross the threshold.
constexpr double kProbeWeightScale = 0.5;
}  // namespace

std::string_view mode_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::kFame:
      return "fame";
    case FusionMode::kEddiOnly:
      return "eddi_only";
    case FusionMode::kSigmoidOnly:
      return "sigmoid_only";
    case FusionMode::kAverage:
      return "average";
    case FusionMode::kDfc:
      return "dfc";
  }
  return "?";
}

std::optional<FusionMode> parse_mode(std::string_view name) {
  for (auto m : {FusionMode::kFame, FusionMode::kEddiOnly, FusionMode::kSigmoidOnly,
                 FusionMode::kAverage, FusionMode::kDfc}) {
    if (mode_name(m) == name) return m;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// FusionState

FusionState FusionState::init(const ModelShape& shape, FusionMode mode, std::uint64_t seed,
                              std::optional<std::vector<std::size_t>> active) {
  const std::size_t modalities = shape.widths.size();
  if (modalities == 0 || shape.modality_names.size() != modalities) {
    throw ConfigError("init_state: need one name and width per modality");
  }
  if (shape.shared_width == 0 || shape.hidden_width == 0 || shape.tasks == 0) {
    throw ConfigError("init_state: widths and task count must be positive");
  }
  for (std::size_t w : shape.widths) {
    if (w == 0) throw ConfigError("init_state: modality widths must be positive");
  }
  if (!(shape.dropout >= 0.0 && shape.dropout < 1.0)) {
    throw ConfigError("init_state: dropout rate outside [0, 1)");
  }

  FusionState s;
  s.mode_ = mode;
  s.shape_ = shape;
  s.seed_ = seed;

  std::vector<bool> on(modalities, true);
  if (active) {
    std::fill(on.begin(), on.end(), false);
    for (std::size_t m : *active) {
      if (m >= modalities) throw ConfigError("init_state: active modality out of range");
      on[m] = true;
    }
  }
  if (mode == FusionMode::kDfc) {
    const auto it = std::find(shape.modality_names.begin(), shape.modality_names.end(),
                              kDemographic);
    if (it == shape.modality_names.end()) {
      throw ConfigError("dfc mode needs a modality named 'demographic'");
    }
    on[static_cast<std::size_t>(it - shape.modality_names.begin())] = false;
  }
  const auto active_count = static_cast<std::size_t>(std::count(on.begin(), on.end(), true));
  if (active_count == 0) throw ConfigError("init_state: no active modalities");

  auto init_rng = stream(seed, kStreamInit);
  auto probe_rng = stream(seed, kStreamProbes);
  const std::size_t k = shape.shared_width;
  for (std::size_t m = 0; m < modalities; ++m) {
    ModalitySlot slot;
    slot.name = shape.modality_names[m];
    slot.width = shape.widths[m];
    slot.active = on[m];
    slot.raw_weight = on[m] ? 1.0 / static_cast<double>(active_count) : 0.0;
    slot.projection = Parameter(xavier_uniform(slot.width, k, init_rng));
    slot.probe.weights = xavier_uniform(k, shape.tasks, probe_rng);
    for (double& w : slot.probe.weights.values()) w *= kProbeWeightScale;
    slot.probe.bias = Tensor2(1, shape.tasks);
    std::uniform_real_distribution<double> bias_dist(-1.0, 1.0);
    for (double& b : slot.probe.bias.values()) b = bias_dist(probe_rng);
    s.slots_.push_back(std::move(slot));
  }

  const std::size_t fused = s.fused_width();
  s.gate_ = Parameter(Tensor2(1, s.uses_gate() ? fused : 0));
  s.hidden_w_ = Parameter(xavier_uniform(fused, shape.hidden_width, init_rng));
  s.hidden_b_ = Parameter(Tensor2(1, shape.hidden_width));
  s.out_w_ = Parameter(xavier_uniform(shape.hidden_width, shape.tasks, init_rng));
  s.out_b_ = Parameter(Tensor2(1, shape.tasks));
  return s;
}

std::vector<std::size_t> FusionState::active_modalities() const {
  std::vector<std::size_t> out;
  for (std::size_t m = 0; m < slots_.size(); ++m) {
    if (slots_[m].active) out.push_back(m);
  }
  return out;
}

bool FusionState::uses_gate() const {
  return mode_ == FusionMode::kFame || mode_ == FusionMode::kSigmoidOnly;
}

bool FusionState::uses_eddi_weights() const {
  return mode_ == FusionMode::kFame || mode_ == FusionMode::kEddiOnly;
}

bool FusionState::concatenates() const {
  return mode_ == FusionMode::kFame || mode_ == FusionMode::kEddiOnly ||
         mode_ == FusionMode::kSigmoidOnly;
}

std::size_t FusionState::fused_width() const {
  const std::size_t k = shape_.shared_width;
  return concatenates() ? k * active_modalities().size() : k;
}

std::vector<double> FusionState::normalized_weights() const {
  double total = 0.0;
  for (const auto& s : slots_) {
    if (s.active) total += s.raw_weight;
  }
  std::vector<double> out(slots_.size(), 0.0);
  for (std::size_t m = 0; m < slots_.size(); ++m) {
    if (slots_[m].active) out[m] = slots_[m].raw_weight / total;
  }
  return out;
}

std::vector<double> FusionState::fusion_weights() const {
  if (uses_eddi_weights()) return normalized_weights();
  const double uniform = 1.0 / static_cast<double>(active_modalities().size());
  std::vector<double> out(slots_.size(), 0.0);
  for (std::size_t m = 0; m < slots_.size(); ++m) {
    if (slots_[m].active) out[m] = uniform;
  }
  return out;
}

std::vector<Parameter*> FusionState::trainable() {
  std::vector<Parameter*> out;
  for (auto& s : slots_) {
    if (s.active) out.push_back(&s.projection);
  }
  if (uses_gate()) out.push_back(&gate_);
  out.push_back(&hidden_w_);
  out.push_back(&hidden_b_);
  out.push_back(&out_w_);
  out.push_back(&out_b_);
  return out;
}

std::vector<double> FusionState::gate_block_means() const {
  const auto active = active_modalities();
  const std::size_t k = shape_.shared_width;
  std::vector<double> out;
  if (!uses_gate()) return out;
  for (std::size_t block = 0; block < active.size(); ++block) {
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) total += ops::sigmoid(gate_.value[block * k + i]);
    out.push_back(total / static_cast<double>(k));
  }
  return out;
}

std::string FusionState::probe_digest() const {
  Sha256 h;
  for (const auto& s : slots_) {
    h.update(s.probe.weights);
    h.update(s.probe.bias);
  }
  return h.hex_digest();
}

// ---------------------------------------------------------------------------
// Batches

ModalityBatch::ModalityBatch(std::vector<Tensor2> inputs)
    : inputs_(std::move(inputs)), reads_(inputs_.size(), 0) {
  for (const auto& t : inputs_) {
    if (t.rows() != inputs_.front().rows()) {
      throw ShapeError("ModalityBatch: modalities disagree on row count");
    }
  }
}

ModalityBatch ModalityBatch::from_cohort(const Cohort& cohort, std::span<const std::size_t> rows) {
  std::vector<Tensor2> inputs;
  inputs.reserve(cohort.widths.size());
  for (std::size_t m = 0; m < cohort.widths.size(); ++m) {
    inputs.push_back(cohort.modality_matrix(m, rows));
  }
  return ModalityBatch(std::move(inputs));
}

const Tensor2& ModalityBatch::read(std::size_t m) const {
  reads_.at(m) += 1;
  return inputs_[m];
}

// ---------------------------------------------------------------------------
// Forward

namespace {

template <typename State>
ForwardResult forward_impl(Tape& tape, State& state, const ModalityBatch& batch, bool training,
                           std::mt19937_64* dropout_rng) {
  const auto leaf = [&tape](auto& p) {
    if constexpr (std::is_const_v<std::remove_reference_t<decltype(p)>>) {
      return tape.frozen(p.value);
    } else {
      return tape.parameter(p);
    }
  };

  if (batch.modality_count() != state.modality_count()) {
    throw ShapeError("forward: batch has " + std::to_string(batch.modality_count()) +
                     " modalities, model has " + std::to_string(state.modality_count()));
  }
  const auto active = state.active_modalities();
  std::vector<Var> projected;
  for (std::size_t m : active) {
    auto& slot = state.slot(m);
    const Tensor2& x = batch.read(m);
    if (x.cols() != slot.width) {
      throw ShapeError("forward: modality '" + slot.name + "' has width " +
                       std::to_string(x.cols()) + ", expected " + std::to_string(slot.width));
    }
    projected.push_back(ad::matmul(tape, tape.frozen(x), leaf(slot.projection)));
  }

  ForwardResult out;
  if (state.concatenates()) {
    const auto weights = state.fusion_weights();
    std::vector<Var> parts;
    for (std::size_t i = 0; i < active.size(); ++i) {
      parts.push_back(ad::scale(tape, projected[i], weights[active[i]]));
    }
    out.concat = ad::concat_cols(tape, parts);
    if (state.uses_gate()) {
      out.gate = ad::sigmoid(tape, leaf(state.gate()));
      out.fused = ad::elementwise_scale(tape, *out.gate, *out.concat);
    } else {
      out.fused = *out.concat;
    }
  } else {
    Var sum = projected.front();
    for (std::size_t i = 1; i < projected.size(); ++i) sum = ad::add(tape, sum, projected[i]);
    out.fused = ad::scale(tape, sum, 1.0 / static_cast<double>(projected.size()));
  }

  Var hidden = ad::add_row(tape, ad::matmul(tape, out.fused, leaf(state.hidden_weights())),
                           leaf(state.hidden_bias()));
  hidden = ad::relu(tape, hidden);
  if (training && dropout_rng != nullptr) {
    hidden = ad::dropout(tape, hidden, state.shape().dropout, true, *dropout_rng);
  }
  out.logits = ad::add_row(tape, ad::matmul(tape, hidden, leaf(state.output_weights())),
                           leaf(state.output_bias()));
  return out;
}

}  // namespace

ForwardResult forward(Tape& tape, FusionState& state, const ModalityBatch& batch, bool training,
                      std::mt19937_64& dropout_rng) {
  return forward_impl(tape, state, batch, training, &dropout_rng);
}

ForwardResult forward(Tape& tape, const FusionState& state, const ModalityBatch& batch) {
  return forward_impl(tape, state, batch, false, nullptr);
}

Tensor2 predict_proba(const FusionState& state, const Cohort& cohort,
                      std::span<const std::size_t> rows) {
  Tensor2 out(rows.size(), state.shape().tasks);
  const auto shards = static_cast<std::int64_t>((rows.size() + kShardRows - 1) / kShardRows);
  // Rows are independent, so shards write disjoint output ranges and the
  // result does not depend on the thread count.
#pragma omp parallel for schedule(static)
  for (std::int64_t shard = 0; shard < shards; ++shard) {
    const std::size_t begin = static_cast<std::size_t>(shard) * kShardRows;
    const std::size_t end = std::min(rows.size(), begin + kShardRows);
    const auto batch = ModalityBatch::from_cohort(cohort, rows.subspan(begin, end - begin));
    Tape tape(/*record=*/false);
    const auto fwd = forward(tape, state, batch);
    const Tensor2 probs = ops::sigmoid(tape.value(fwd.logits));
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      auto src = probs.row_span(r);
      std::copy(src.begin(), src.end(), out.row_span(begin + r).begin());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Probes and weight updates

Tensor2 probe_proba(const FusionState& state, std::size_t m, const Tensor2& inputs) {
  const auto& slot = state.slot(m);
  if (inputs.cols() != slot.width) {
    throw ShapeError("probe: modality '" + slot.name + "' input width " +
                     std::to_string(inputs.cols()) + ", expected " + std::to_string(slot.width));
  }
  const Tensor2 projected = kernels::matmul(inputs, slot.projection.value);
  Tensor2 logits = kernels::matmul(projected, slot.probe.weights);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    for (std::size_t c = 0; c < logits.cols(); ++c) logits(r, c) += slot.probe.bias[c];
  }
  return ops::sigmoid(logits);
}

std::vector<double> probe_eddi(const FusionState& state, const Cohort& cohort,
                               std::span<const std::size_t> rows, double threshold) {
  std::vector<double> out(state.modality_count(), 0.0);
  if (rows.empty()) return out;
  PredictionSet pred;
  pred.truth = cohort.label_matrix(rows);
  pred.attrs = cohort.attributes(rows);
  pred.threshold = threshold;
  for (std::size_t m : state.active_modalities()) {
    pred.scores = probe_proba(state, m, cohort.modality_matrix(m, rows));
    out[m] = mean_eddi(pred);
  }
  return out;
}

std::vector<double> update_weights(FusionState& state, std::span<const double> eddi, double gamma,
                                   double clip) {
  if (!(gamma >= 0.0)) throw ConfigError("update_weights: gamma must be >= 0");
  if (!(clip > 0.0)) throw ConfigError("update_weights: clip must be > 0");
  if (eddi.size() != state.modality_count()) {
    throw ShapeError("update_weights: one EDDI value per modality required");
  }
  const auto active = state.active_modalities();
  double worst = eddi[active.front()];
  for (std::size_t m : active) worst = std::max(worst, eddi[m]);
  for (std::size_t m : active) {
    const double increment = std::min(clip, gamma * (worst - eddi[m]));
    state.slot(m).raw_weight += increment;
  }
  return state.normalized_weights();
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json tensor_json(const Tensor2& t) {
  ordered_json j;
  j["rows"] = t.rows();
  j["cols"] = t.cols();
  j["data"] = std::vector<double>(t.values().begin(), t.values().end());
  return j;
}

Tensor2 tensor_from(const ordered_json& j) {
  return Tensor2(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                 j.at("data").get<std::vector<double>>());
}

}  // namespace

std::string save_checkpoint_json(const FusionState& state) {
  ordered_json j;
  j["format"] = "fairfuse-checkpoint";
  j["version"] = 1;
  j["mode"] = std::string(mode_name(state.mode()));
  j["seed"] = state.seed();
  j["epoch"] = state.epoch();
  const auto& shape = state.shape();
  j["shared_width"] = shape.shared_width;
  j["hidden_width"] = shape.hidden_width;
  j["tasks"] = shape.tasks;
  j["dropout"] = shape.dropout;
  ordered_json mods = ordered_json::array();
  for (std::size_t m = 0; m < state.modality_count(); ++m) {
    const auto& s = state.slot(m);
    ordered_json mj;
    mj["name"] = s.name;
    mj["width"] = s.width;
    mj["active"] = s.active;
    mj["raw_weight"] = s.raw_weight;
    mj["projection"] = tensor_json(s.projection.value);
    mj["probe_weights"] = tensor_json(s.probe.weights);
    mj["probe_bias"] = tensor_json(s.probe.bias);
    mods.push_back(std::move(mj));
  }
  j["modalities"] = std::move(mods);
  j["gate"] = tensor_json(state.gate().value);
  j["hidden_weights"] = tensor_json(state.hidden_weights().value);
  j["hidden_bias"] = tensor_json(state.hidden_bias().value);
  j["output_weights"] = tensor_json(state.output_weights().value);
  j["output_bias"] = tensor_json(state.output_bias().value);
  return j.dump() + "\n";
}

FusionState load_checkpoint_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
    if (j.at("format") != "fairfuse-checkpoint") throw InputError("not a fairfuse checkpoint");
    FusionState s;
    const auto mode = parse_mode(j.at("mode").get<std::string>());
    if (!mode) throw InputError("checkpoint: unknown mode");
    s.mode_ = *mode;
    s.seed_ = j.at("seed").get<std::uint64_t>();
    s.epoch_ = j.at("epoch").get<std::size_t>();
    s.shape_.shared_width = j.at("shared_width").get<std::size_t>();
    s.shape_.hidden_width = j.at("hidden_width").get<std::size_t>();
    s.shape_.tasks = j.at("tasks").get<std::size_t>();
    s.shape_.dropout = j.at("dropout").get<double>();
    for (const auto& mj : j.at("modalities")) {
      ModalitySlot slot;
      slot.name = mj.at("name").get<std::string>();
      slot.width = mj.at("width").get<std::size_t>();
      slot.active = mj.at("active").get<bool>();
      slot.raw_weight = mj.at("raw_weight").get<double>();
      slot.projection = Parameter(tensor_from(mj.at("projection")));
      slot.probe.weights = tensor_from(mj.at("probe_weights"));
      slot.probe.bias = tensor_from(mj.at("probe_bias"));
      s.shape_.modality_names.push_back(slot.name);
      s.shape_.widths.push_back(slot.width);
      s.slots_.push_back(std::move(slot));
    }
    s.gate_ = Parameter(tensor_from(j.at("gate")));
    s.hidden_w_ = Parameter(tensor_from(j.at("hidden_weights")));
    s.hidden_b_ = Parameter(tensor_from(j.at("hidden_bias")));
    s.out_w_ = Parameter(tensor_from(j.at("output_weights")));
    s.out_b_ = Parameter(tensor_from(j.at("output_bias")));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const FusionState& state, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint " + path);
  out << save_checkpoint_json(state);
  if (!out) throw InputError("write failed: " + path);
}

FusionState load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_checkpoint_json(buf.str());
}

}  // namespace fame

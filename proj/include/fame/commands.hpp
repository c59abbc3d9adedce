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

// Command implementations behind the `fame` executable. Each cmd_* writes its
// outputs and returns the in-memory results so tests can inspect them.

#ifndef FAME_COMMANDS_HPP_
#define FAME_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fame/cohort.hpp"
#include "fame/config.hpp"
#include "fame/fusion.hpp"
#include "fame/metrics.hpp"
#include "fame/training.hpp"

namespace fame {

// Default output directory: $FAME_OUT_DIR, else "fame_out".
std::filesystem::path default_out_dir();

// Training config with "active" and "task" resolved against the cohort.
struct Experiment {
  TrainConfig train;
  std::optional<std::size_t> task;  // per-task mode
};
Experiment resolve_experiment(const KeyValueConfig& cfg, const Cohort& cohort);

// Keeps a single label column.
Cohort restrict_to_task(const Cohort& cohort, std::size_t task);
std::vector<std::string> task_names_for(const Cohort& cohort, std::optional<std::size_t> task);

struct RunOutcome {
  Split split;
  TrainResult result;
  PredictionSet test_predictions;
  FairnessReport test_report;
};
// Split with cfg.seed, train, evaluate the best checkpoint on the test set.
RunOutcome run_experiment(const Cohort& cohort, const Experiment& exp,
                          const EpochCallback& on_epoch = nullptr);

// Long-format predictions CSV: id,task,score,label,ethnicity,insurance,age_bucket.
void write_predictions_csv(const PredictionSet& pred, const std::vector<std::string>& ids,
                           const std::vector<std::string>& task_names, std::ostream& out);
struct LoadedPredictions {
  PredictionSet pred;
  std::vector<std::string> ids;
  std::vector<std::string> task_names;
};
// Throws InputError citing the row number on malformed rows.
LoadedPredictions read_predictions_csv(std::istream& in, double threshold);

Cohort cmd_generate(const KeyValueConfig& cfg, const std::filesystem::path& out);

struct TrainOutputs {
  RunOutcome run;
  std::filesystem::path checkpoint;
  std::filesystem::path trajectory;
  std::filesystem::path metrics;
  std::filesystem::path predictions;
  std::filesystem::path manifest;
};
TrainOutputs cmd_train(const std::filesystem::path& cohort_path, const KeyValueConfig& cfg,
                       const std::filesystem::path& out_dir, std::ostream* log = nullptr);

// Evaluates a saved checkpoint on one split ("train", "val", "test" or
// "all"), using the checkpoint's seed to rebuild the split.
FairnessReport cmd_evaluate(const std::filesystem::path& checkpoint,
                            const std::filesystem::path& cohort_path, const KeyValueConfig& cfg,
                            const std::string& which);

FairnessReport cmd_audit(const std::filesystem::path& predictions, double threshold);

struct SweepRow {
  bool mean = false;
  std::string param;
  double value = 0.0;
  std::optional<std::uint64_t> seed;  // empty on mean rows
  std::optional<double> auroc;
  std::optional<double> auprc;
  double eddi = 0.0;
  std::optional<double> eo;
};
// One row per (value, seed) then one mean row per value. param is "lambda"
// or "gamma".
std::vector<SweepRow> cmd_sweep(const Cohort& cohort, const KeyValueConfig& base,
                                const std::string& param, const std::vector<double>& values,
                                const std::vector<std::uint64_t>& seeds);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

inline const std::vector<std::string> kAblationVariants = {
    "average", "sigmoid_only", "eddi_only", "fame", "dfc", "unimodal_structured",
    "unimodal_notes"};

struct AblationRow {
  std::string variant;
  std::size_t seeds = 0;
  std::optional<double> auroc;
  std::optional<double> auprc;
  double eddi = 0.0;
  std::optional<double> eo;
  double demographic_weight = 0.0;  // mean final normalised weight, 0 if absent
};
std::vector<AblationRow> cmd_ablate(const Cohort& cohort, const KeyValueConfig& base,
                                    const std::vector<std::string>& variants,
                                    const std::vector<std::uint64_t>& seeds);
std::string ablation_to_csv(const std::vector<AblationRow>& rows);

// Full command line: returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fame

#endif  // FAME_COMMANDS_HPP_

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

#include "fame/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fame/errors.hpp"
#include "fame/hash.hpp"

namespace fame {
namespace {

using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed for " + path.string());
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

double demographic_weight(const FusionState& state) {
  for (std::size_t m = 0; m < state.modality_count(); ++m) {
    if (state.slot(m).name == "demographic") return state.normalized_weights()[m];
  }
  return 0.0;
}

}  // namespace

fs::path default_out_dir() {
  if (const char* env = std::getenv("FAME_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return "fame_out";
}

Experiment resolve_experiment(const KeyValueConfig& cfg, const Cohort& cohort) {
  Experiment exp;
  exp.train = train_config(cfg);
  if (const auto active = cfg.get("active")) {
    std::vector<std::size_t> ids;
    for (const auto& name : split_list(*active)) {
      const auto m = cohort.modality_index(name);
      if (!m) throw ConfigError("active: cohort has no modality '" + name + "'");
      ids.push_back(*m);
    }
    if (ids.empty()) throw ConfigError("active: empty modality list");
    exp.train.active_modalities = ids;
  }
  if (const auto task = cfg.get("task")) {
    for (std::size_t t = 0; t < cohort.task_count; ++t) {
      if (task_name(t) == *task || std::to_string(t) == *task) exp.task = t;
    }
    if (!exp.task) throw ConfigError("task: cohort has no task '" + *task + "'");
  }
  return exp;
}

Cohort restrict_to_task(const Cohort& cohort, std::size_t task) {
  if (task >= cohort.task_count) throw ConfigError("task index out of range");
  Cohort out = cohort;
  out.task_count = 1;
  for (auto& r : out.records) r.labels = {r.labels[task]};
  return out;
}

std::vector<std::string> task_names_for(const Cohort& cohort, std::optional<std::size_t> task) {
  if (task) return {task_name(*task)};
  std::vector<std::string> names;
  for (std::size_t t = 0; t < cohort.task_count; ++t) names.push_back(task_name(t));
  return names;
}

RunOutcome run_experiment(const Cohort& cohort, const Experiment& exp,
                          const EpochCallback& on_epoch) {
  const Cohort* source = &cohort;
  Cohort restricted;
  if (exp.task) {
    restricted = restrict_to_task(cohort, *exp.task);
    source = &restricted;
  }
  RunOutcome out{split_cohort(*source, exp.train.seed), {}, {}, {}};
  out.result = train(*source, out.split, exp.train, on_epoch);
  out.test_predictions =
      predictions(out.result.best_state, *source, out.split.test, exp.train.threshold);
  out.test_report = evaluate_predictions(out.test_predictions);
  out.test_report.task_names = task_names_for(cohort, exp.task);
  return out;
}

// ---------------------------------------------------------------------------
// Predictions CSV

void write_predictions_csv(const PredictionSet& pred, const std::vector<std::string>& ids,
                           const std::vector<std::string>& task_names, std::ostream& out) {
  pred.validate();
  if (ids.size() != pred.samples() || task_names.size() != pred.tasks()) {
    throw ShapeError("write_predictions_csv: ids or task names do not match the predictions");
  }
  out << "id,task,score,label,ethnicity,insurance,age_bucket\n";
  for (std::size_t i = 0; i < pred.samples(); ++i) {
    for (std::size_t t = 0; t < pred.tasks(); ++t) {
      out << ids[i] << ',' << task_names[t] << ',' << num(pred.scores(i, t)) << ','
          << (pred.positive(i, t) ? 1 : 0);
      for (Attribute a : kAllAttributes) out << ',' << subgroup_name(a, pred.attrs[i].of(a));
      out << '\n';
    }
  }
}

LoadedPredictions read_predictions_csv(std::istream& in, double threshold) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("predictions: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,task,score,label,ethnicity,insurance,age_bucket") {
    throw InputError("predictions: row 1: unexpected header '" + line + "'");
  }
  LoadedPredictions out;
  std::map<std::string, std::size_t> id_index;
  std::map<std::string, std::size_t> task_index;
  struct Cell {
    std::size_t sample, task;
    double score, label;
  };
  std::vector<Cell> cells;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "predictions: row " + std::to_string(row) + ": ";
    const auto f = split_list(line);
    if (f.size() != 7) throw InputError(where + "expected 7 fields, got " + std::to_string(f.size()));
    double score = 0.0;
    try {
      std::size_t used = 0;
      score = std::stod(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError(where + "bad score '" + f[2] + "'");
    }
    if (!(score >= 0.0 && score <= 1.0)) throw InputError(where + "score outside [0, 1]");
    if (f[3] != "0" && f[3] != "1") throw InputError(where + "label must be 0 or 1");
    SensitiveAttributes attrs;
    for (Attribute a : kAllAttributes) {
      const auto& text = f[3 + 1 + static_cast<std::size_t>(a)];
      const auto g = parse_subgroup(a, text);
      if (!g) {
        throw InputError(where + "unknown " + std::string(attribute_name(a)) + " '" + text + "'");
      }
      attrs.subgroup[static_cast<std::size_t>(a)] = static_cast<std::uint8_t>(*g);
    }
    auto [it, fresh] = id_index.emplace(f[0], out.ids.size());
    if (fresh) {
      out.ids.push_back(f[0]);
      out.pred.attrs.push_back(attrs);
    } else if (!(out.pred.attrs[it->second] == attrs)) {
      throw InputError(where + "attributes differ from an earlier row for id " + f[0]);
    }
    auto [tit, tfresh] = task_index.emplace(f[1], out.task_names.size());
    if (tfresh) out.task_names.push_back(f[1]);
    cells.push_back({it->second, tit->second, score, f[3] == "1" ? 1.0 : 0.0});
  }
  if (out.ids.empty()) throw InputError("predictions: no rows");
  const std::size_t n = out.ids.size();
  const std::size_t tasks = out.task_names.size();
  out.pred.scores = Tensor2(n, tasks);
  out.pred.truth = Tensor2(n, tasks);
  std::vector<char> seen(n * tasks, 0);
  for (const auto& c : cells) {
    char& s = seen[c.sample * tasks + c.task];
    if (s) {
      throw InputError("predictions: duplicate row for id " + out.ids[c.sample] + ", task " +
                       out.task_names[c.task]);
    }
    s = 1;
    out.pred.scores(c.sample, c.task) = c.score;
    out.pred.truth(c.sample, c.task) = c.label;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw InputError("predictions: missing row for id " + out.ids[i / tasks] + ", task " +
                       out.task_names[i % tasks]);
    }
  }
  out.pred.threshold = threshold;
  return out;
}

// ---------------------------------------------------------------------------
// Commands

Cohort cmd_generate(const KeyValueConfig& cfg, const fs::path& out) {
  Cohort cohort = generate_cohort(generator_config(cfg));
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_cohort(cohort, out);
  return cohort;
}

TrainOutputs cmd_train(const fs::path& cohort_path, const KeyValueConfig& cfg,
                       const fs::path& out_dir, std::ostream* log) {
  const auto start = Clock::now();
  const Cohort cohort = load_cohort(cohort_path);
  const std::string cohort_hash = sha256_file(cohort_path);
  const double load_s = seconds_since(start);
  const Experiment exp = resolve_experiment(cfg, cohort);

  const auto train_start = Clock::now();
  EpochCallback on_epoch;
  if (log != nullptr) {
    on_epoch = [log](const TrajectoryRow& r) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "epoch %zu  train %.6f  val %.6f  val_eddi %.6f  lr %.3g\n",
                    r.epoch, r.train_loss, r.val_loss, r.val_eddi, r.lr);
      *log << buf << std::flush;
    };
  }
  TrainOutputs out;
  out.run = run_experiment(cohort, exp, on_epoch);
  const double train_s = seconds_since(train_start);

  fs::create_directories(out_dir);
  out.checkpoint = out_dir / "checkpoint.json";
  out.trajectory = out_dir / "trajectory.csv";
  out.metrics = out_dir / "metrics.json";
  out.predictions = out_dir / "predictions.csv";
  out.manifest = out_dir / "manifest.json";

  save_checkpoint(out.run.result.best_state, out.checkpoint.string());
  write_text(out.trajectory, out.run.result.trajectory.to_csv());
  write_text(out.metrics, report_to_json(out.run.test_report) + "\n");
  std::vector<std::string> ids;
  for (std::size_t r : out.run.split.test) ids.push_back(cohort.records[r].id);
  std::ostringstream pred;
  write_predictions_csv(out.run.test_predictions, ids, out.run.test_report.task_names, pred);
  write_text(out.predictions, pred.str());

  nlohmann::ordered_json m;
  m["command"] = "train";
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  for (const auto& [k, v] : cfg.entries()) config[k] = v;
  m["config"] = config;
  m["seed"] = exp.train.seed;
  m["mode"] = std::string(mode_name(exp.train.mode));
  m["cohort"] = {{"path", cohort_path.string()}, {"sha256", cohort_hash},
                 {"records", cohort.size()}};
  m["split"] = {{"train", out.run.split.train.size()},
                {"val", out.run.split.val.size()},
                {"test", out.run.split.test.size()}};
  m["epochs"] = out.run.result.trajectory.rows.size();
  m["best_epoch"] = out.run.result.best_epoch;
  m["outputs"] = {{"checkpoint", out.checkpoint.string()},
                  {"trajectory", out.trajectory.string()},
                  {"metrics", out.metrics.string()},
                  {"predictions", out.predictions.string()},
                  {"manifest", out.manifest.string()}};
  m["timings_seconds"] = {{"load", load_s}, {"train", train_s}, {"total", seconds_since(start)}};
  write_text(out.manifest, m.dump(2) + "\n");
  return out;
}

FairnessReport cmd_evaluate(const fs::path& checkpoint, const fs::path& cohort_path,
                            const KeyValueConfig& cfg, const std::string& which) {
  const FusionState state = load_checkpoint(checkpoint.string());
  const Cohort cohort = load_cohort(cohort_path);
  const Experiment exp = resolve_experiment(cfg, cohort);
  Cohort restricted;
  const Cohort* source = &cohort;
  if (exp.task) {
    restricted = restrict_to_task(cohort, *exp.task);
    source = &restricted;
  }
  if (source->task_count != state.shape().tasks) {
    throw ConfigError("checkpoint predicts " + std::to_string(state.shape().tasks) +
                      " tasks but the cohort has " + std::to_string(source->task_count) +
                      " (set task for per-task checkpoints)");
  }
  const Split split = split_cohort(*source, state.seed());
  std::vector<std::size_t> ids;
  if (which == "train") {
    ids = split.train;
  } else if (which == "val") {
    ids = split.val;
  } else if (which == "test") {
    ids = split.test;
  } else if (which == "all") {
    for (std::size_t i = 0; i < source->size(); ++i) ids.push_back(i);
  } else {
    throw ConfigError("split must be train, val, test or all");
  }
  FairnessReport report = evaluate(state, *source, ids, exp.train.threshold);
  report.task_names = task_names_for(cohort, exp.task);
  return report;
}

FairnessReport cmd_audit(const fs::path& predictions, double threshold) {
  std::ifstream in(predictions);
  if (!in) throw InputError("cannot open predictions file " + predictions.string());
  auto loaded = read_predictions_csv(in, threshold);
  FairnessReport report = evaluate_predictions(loaded.pred);
  report.task_names = loaded.task_names;
  return report;
}

std::vector<SweepRow> cmd_sweep(const Cohort& cohort, const KeyValueConfig& base,
                                const std::string& param, const std::vector<double>& values,
                                const std::vector<std::uint64_t>& seeds) {
  if (param != "lambda" && param != "gamma") throw ConfigError("sweep: param must be lambda or gamma");
  if (values.empty()) throw ConfigError("sweep: empty " + param + " list");
  if (seeds.empty()) throw ConfigError("sweep: empty seed list");
  std::vector<SweepRow> runs;
  std::vector<SweepRow> means;
  for (double value : values) {
    std::vector<std::optional<double>> auroc, auprc, eo;
    double eddi = 0.0;
    for (std::uint64_t seed : seeds) {
      KeyValueConfig cfg = base;
      cfg.set(param, num(value));
      cfg.set("seed", std::to_string(seed));
      const auto run = run_experiment(cohort, resolve_experiment(cfg, cohort));
      SweepRow row;
      row.param = param;
      row.value = value;
      row.seed = seed;
      row.auroc = run.test_report.mean_auroc();
      row.auprc = run.test_report.mean_auprc();
      row.eddi = run.test_report.eddi_overall;
      row.eo = run.test_report.eo_overall;
      auroc.push_back(row.auroc);
      auprc.push_back(row.auprc);
      eo.push_back(row.eo);
      eddi += row.eddi;
      runs.push_back(row);
    }
    SweepRow mean;
    mean.mean = true;
    mean.param = param;
    mean.value = value;
    mean.auroc = mean_of(auroc);
    mean.auprc = mean_of(auprc);
    mean.eddi = eddi / static_cast<double>(seeds.size());
    mean.eo = mean_of(eo);
    means.push_back(mean);
  }
  runs.insert(runs.end(), means.begin(), means.end());
  return runs;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "kind,param,value,seed,auroc,auprc,eddi,eo\n";
  for (const auto& r : rows) {
    out << (r.mean ? "mean" : "run") << ',' << r.param << ',' << num(r.value) << ','
        << (r.seed ? std::to_string(*r.seed) : std::string()) << ',' << opt_num(r.auroc) << ','
        << opt_num(r.auprc) << ',' << num(r.eddi) << ',' << opt_num(r.eo) << '\n';
  }
  return out.str();
}

std::vector<AblationRow> cmd_ablate(const Cohort& cohort, const KeyValueConfig& base,
                                    const std::vector<std::string>& variants,
                                    const std::vector<std::uint64_t>& seeds) {
  if (variants.empty()) throw ConfigError("ablate: empty variant list");
  if (seeds.empty()) throw ConfigError("ablate: empty seed list");
  std::vector<AblationRow> rows;
  for (const auto& variant : variants) {
    KeyValueConfig cfg = base;
    if (variant.rfind("unimodal_", 0) == 0) {
      cfg.set("mode", "average");
      cfg.set("active", variant.substr(9));
    } else if (parse_mode(variant)) {
      cfg.set("mode", variant);
    } else {
      throw ConfigError("ablate: unknown variant '" + variant + "'");
    }
    std::vector<std::optional<double>> auroc, auprc, eo;
    AblationRow row;
    row.variant = variant;
    row.seeds = seeds.size();
    for (std::uint64_t seed : seeds) {
      cfg.set("seed", std::to_string(seed));
      const auto run = run_experiment(cohort, resolve_experiment(cfg, cohort));
      auroc.push_back(run.test_report.mean_auroc());
      auprc.push_back(run.test_report.mean_auprc());
      eo.push_back(run.test_report.eo_overall);
      row.eddi += run.test_report.eddi_overall / static_cast<double>(seeds.size());
      row.demographic_weight +=
          demographic_weight(run.result.final_state) / static_cast<double>(seeds.size());
    }
    row.auroc = mean_of(auroc);
    row.auprc = mean_of(auprc);
    row.eo = mean_of(eo);
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_to_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "variant,seeds,auroc,auprc,eddi,eo,w_demographic\n";
  for (const auto& r : rows) {
    out << r.variant << ',' << r.seeds << ',' << opt_num(r.auroc) << ',' << opt_num(r.auprc) << ','
        << num(r.eddi) << ',' << opt_num(r.eo) << ',' << num(r.demographic_weight) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Command line

namespace {

// Turns leftover "--key value" / "--key=value" tokens into config entries.
KeyValueConfig overrides_from(const std::vector<std::string>& extras) {
  KeyValueConfig cfg;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() < 3) {
      throw ConfigError("unexpected argument '" + tok + "'");
    }
    std::string key = tok.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("missing value for --" + key);
      value = extras[++i];
    }
    std::replace(key.begin(), key.end(), '-', '_');
    cfg.set(key, value);
  }
  return cfg;
}

KeyValueConfig load_config(const std::string& path, const std::vector<std::string>& extras) {
  KeyValueConfig cfg = path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
  cfg.merge(overrides_from(extras));
  return cfg;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"fame: fairness-aware multimodal fusion"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");
  const std::string config_help = "Flat key = value config file";
  const std::string overrides_help =
      "Any config key may be overridden with --key value (e.g. --lambda 0.4)";

  std::string config_path;
  std::string out_path;
  std::string cohort_path;
  std::string checkpoint_path;
  std::string predictions_path;
  std::string which = "test";
  std::string param = "lambda";
  std::string values_text;
  std::string seeds_text = "0,1,2,3,4";
  std::string variants_text;
  double threshold = 0.5;

  auto* gen = app.add_subcommand("generate", "Write a synthetic cohort as JSONL");
  gen->add_option("--config", config_path, config_help);
  gen->add_option("-o,--out", out_path, "Cohort path (default <out dir>/cohort.jsonl)");

  auto* trn = app.add_subcommand("train", "Train a model and export metrics");
  trn->add_option("--cohort", cohort_path, "Cohort JSONL")->required();
  trn->add_option("--config", config_path, config_help);
  trn->add_option("-o,--out-dir", out_path, "Output directory (default $FAME_OUT_DIR or fame_out)");

  auto* evl = app.add_subcommand("evaluate", "Evaluate a checkpoint on a cohort split");
  evl->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON")->required();
  evl->add_option("--cohort", cohort_path, "Cohort JSONL")->required();
  evl->add_option("--config", config_path, config_help);
  evl->add_option("--split", which, "train, val, test or all")->capture_default_str();
  evl->add_option("-o,--out", out_path, "Report path (default stdout)");

  auto* aud = app.add_subcommand("audit", "Fairness report for a predictions CSV");
  aud->add_option("--predictions", predictions_path, "Predictions CSV")->required();
  aud->add_option("--threshold", threshold, "Decision threshold")->capture_default_str();
  aud->add_option("-o,--out", out_path, "Report path (default stdout)");

  auto* swp = app.add_subcommand("sweep", "Grid over lambda or gamma and seeds");
  swp->add_option("--cohort", cohort_path, "Cohort JSONL")->required();
  swp->add_option("--config", config_path, config_help);
  swp->add_option("--param", param, "lambda or gamma")->capture_default_str();
  swp->add_option("--values", values_text, "Comma-separated values")->required();
  swp->add_option("--seeds", seeds_text, "Comma-separated seeds")->capture_default_str();
  swp->add_option("-o,--out", out_path, "CSV path (default stdout)");

  auto* abl = app.add_subcommand("ablate", "Compare fusion variants over seeds");
  abl->add_option("--cohort", cohort_path, "Cohort JSONL")->required();
  abl->add_option("--config", config_path, config_help);
  abl->add_option("--variants", variants_text, "Comma-separated subset of the variants");
  abl->add_option("--seeds", seeds_text, "Comma-separated seeds")->capture_default_str();
  abl->add_option("-o,--out", out_path, "CSV path (default stdout)");

  for (auto* sub : {gen, trn, evl, swp, abl}) {
    sub->allow_extras();
    sub->footer(overrides_help);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const auto emit = [&](const std::string& text) {
    if (out_path.empty()) {
      out << text;
    } else {
      write_text(out_path, text);
      err << "wrote " << out_path << '\n';
    }
  };

  try {
    if (gen->parsed()) {
      const auto cfg = load_config(config_path, gen->remaining());
      const fs::path path = out_path.empty() ? default_out_dir() / "cohort.jsonl" : fs::path(out_path);
      const auto cohort = cmd_generate(cfg, path);
      err << "wrote " << cohort.size() << " records to " << path.string() << '\n';
    } else if (trn->parsed()) {
      const auto cfg = load_config(config_path, trn->remaining());
      const fs::path dir = out_path.empty() ? default_out_dir() : fs::path(out_path);
      const auto result = cmd_train(cohort_path, cfg, dir, &err);
      err << "best epoch " << result.run.result.best_epoch << "; outputs in " << dir.string()
          << '\n';
      out << report_to_json(result.run.test_report) << '\n';
    } else if (evl->parsed()) {
      const auto cfg = load_config(config_path, evl->remaining());
      emit(report_to_json(cmd_evaluate(checkpoint_path, cohort_path, cfg, which)) + "\n");
    } else if (aud->parsed()) {
      if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
      emit(report_to_json(cmd_audit(predictions_path, threshold)) + "\n");
    } else if (swp->parsed()) {
      const auto cfg = load_config(config_path, swp->remaining());
      const auto values = parse_double_list(values_text, "values");
      const auto seeds = parse_uint_list(seeds_text, "seeds");
      const auto cohort = load_cohort(cohort_path);
      emit(sweep_to_csv(cmd_sweep(cohort, cfg, param, values, seeds)));
    } else if (abl->parsed()) {
      const auto cfg = load_config(config_path, abl->remaining());
      const auto variants = variants_text.empty() ? kAblationVariants : split_list(variants_text);
      const auto seeds = parse_uint_list(seeds_text, "seeds");
      const auto cohort = load_cohort(cohort_path);
      emit(ablation_to_csv(cmd_ablate(cohort, cfg, variants, seeds)));
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace fame

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

#include "fame/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fame/errors.hpp"
#include "json.hpp"

namespace fame {

void PredictionSet::validate() const {
  require_same_shape(scores, truth, "PredictionSet");
  if (attrs.size() != scores.rows()) {
    throw ShapeError("PredictionSet: " + std::to_string(attrs.size()) + " attribute rows for " +
                     std::to_string(scores.rows()) + " samples");
  }
  if (scores.rows() == 0) throw InputError("PredictionSet: no samples");
  for (double s : scores.values()) {
    if (!(s >= 0.0 && s <= 1.0)) throw InputError("PredictionSet: score outside [0, 1]");
  }
  for (double y : truth.values()) {
    if (y != 0.0 && y != 1.0) throw InputError("PredictionSet: truth outside {0, 1}");
  }
}

ErrorRates error_rates(const PredictionSet& pred, Attribute attribute, std::size_t task) {
  const std::size_t n = pred.samples();
  if (n == 0) throw InputError("error_rates: empty prediction set");
  const std::size_t groups = subgroup_count(attribute);
  std::vector<std::size_t> wrong(groups, 0);
  ErrorRates out;
  out.counts.assign(groups, 0);
  std::size_t total_wrong = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = pred.attrs[i].of(attribute);
    const bool miss = pred.hard(i, task) != pred.positive(i, task);
    out.counts[g] += 1;
    wrong[g] += miss ? 1 : 0;
    total_wrong += miss ? 1 : 0;
  }
  out.overall = static_cast<double>(total_wrong) / static_cast<double>(n);
  out.subgroup.resize(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    if (out.counts[g] > 0) {
      out.subgroup[g] = static_cast<double>(wrong[g]) / static_cast<double>(out.counts[g]);
    }
  }
  return out;
}

double eddi_subgroup(double er_s, double oer) {
  return (er_s - oer) / std::max(oer, 1.0 - oer);
}

double eddi_attribute(std::span<const double> eddi_s) {
  if (eddi_s.empty()) throw InputError("eddi_attribute: no subgroups");
  double squares = 0.0;
  for (double v : eddi_s) squares += v * v;
  return std::sqrt(squares) / static_cast<double>(eddi_s.size());
}

double eddi_mean_legacy(std::span<const double> eddi_s) {
  if (eddi_s.empty()) throw InputError("eddi_mean_legacy: no subgroups");
  return std::accumulate(eddi_s.begin(), eddi_s.end(), 0.0) / static_cast<double>(eddi_s.size());
}

ConfusionRates confusion_rates(const PredictionSet& pred, Attribute attribute, std::size_t task) {
  const std::size_t groups = subgroup_count(attribute);
  std::vector<std::size_t> pos(groups, 0), neg(groups, 0), tp(groups, 0), fp(groups, 0);
  for (std::size_t i = 0; i < pred.samples(); ++i) {
    const std::size_t g = pred.attrs[i].of(attribute);
    const bool hit = pred.hard(i, task);
    if (pred.positive(i, task)) {
      pos[g] += 1;
      tp[g] += hit ? 1 : 0;
    } else {
      neg[g] += 1;
      fp[g] += hit ? 1 : 0;
    }
  }
  ConfusionRates out;
  out.tpr.resize(groups);
  out.fpr.resize(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    if (pos[g] > 0) out.tpr[g] = static_cast<double>(tp[g]) / static_cast<double>(pos[g]);
    if (neg[g] > 0) out.fpr[g] = static_cast<double>(fp[g]) / static_cast<double>(neg[g]);
  }
  return out;
}

std::optional<double> mean_pairwise_gap(std::span<const std::optional<double>> rates) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < rates.size(); ++a) {
    if (!rates[a]) continue;
    for (std::size_t b = a + 1; b < rates.size(); ++b) {
      if (!rates[b]) continue;
      total += std::abs(*rates[a] - *rates[b]);
      ++pairs;
    }
  }
  if (pairs == 0) return std::nullopt;
  return total / static_cast<double>(pairs);
}

std::optional<double> equalized_odds_gap(const ConfusionRates& rates) {
  const auto tpr_gap = mean_pairwise_gap(rates.tpr);
  const auto fpr_gap = mean_pairwise_gap(rates.fpr);
  if (tpr_gap && fpr_gap) return (*tpr_gap + *fpr_gap) / 2.0;
  if (tpr_gap) return tpr_gap;
  return fpr_gap;
}

std::optional<double> equalized_odds_gap(const PredictionSet& pred, Attribute attribute,
                                         std::size_t task) {
  return equalized_odds_gap(confusion_rates(pred, attribute, task));
}

// ---------------------------------------------------------------------------
// Ranking metrics

namespace {

void check_ranking_inputs(std::span<const double> scores, std::span<const double> truth,
                          const char* op) {
  if (scores.size() != truth.size()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(truth.size()) + " labels");
  }
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return idx;
}

}  // namespace

std::optional<double> auroc(std::span<const double> scores, std::span<const double> truth) {
  check_ranking_inputs(scores, truth, "auroc");
  const auto idx = order_by_score(scores, /*descending=*/false);
  double concordant = 0.0;  // counts in units of pairs; exact in double
  std::size_t neg_below = 0;
  std::size_t total_pos = 0;
  for (std::size_t start = 0; start < idx.size();) {
    std::size_t end = start;
    std::size_t pos_here = 0;
    std::size_t neg_here = 0;
    while (end < idx.size() && scores[idx[end]] == scores[idx[start]]) {
      if (truth[idx[end]] > 0.5) {
        ++pos_here;
      } else {
        ++neg_here;
      }
      ++end;
    }
    concordant += static_cast<double>(pos_here * neg_below) +
                  0.5 * static_cast<double>(pos_here * neg_here);
    neg_below += neg_here;
    total_pos += pos_here;
    start = end;
  }
  const std::size_t total_neg = neg_below;
  if (total_pos == 0 || total_neg == 0) return std::nullopt;
  return concordant / (static_cast<double>(total_pos) * static_cast<double>(total_neg));
}

std::optional<double> auprc(std::span<const double> scores, std::span<const double> truth) {
  check_ranking_inputs(scores, truth, "auprc");
  std::size_t positives = 0;
  for (double y : truth) positives += y > 0.5 ? 1 : 0;
  if (positives == 0) return std::nullopt;
  const auto idx = order_by_score(scores, /*descending=*/true);
  const double p = static_cast<double>(positives);
  double ap = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t start = 0; start < idx.size();) {
    const std::size_t prev_tp = tp;
    std::size_t end = start;
    while (end < idx.size() && scores[idx[end]] == scores[idx[start]]) {
      if (truth[idx[end]] > 0.5) {
        ++tp;
      } else {
        ++fp;
      }
      ++end;
    }
    ap += (static_cast<double>(tp - prev_tp) / p) *
          (static_cast<double>(tp) / static_cast<double>(tp + fp));
    start = end;
  }
  return ap;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

AttributeTaskStats attribute_task_stats(const PredictionSet& pred, Attribute a, std::size_t task,
                                        bool with_confusion) {
  AttributeTaskStats cell;
  const ErrorRates er = error_rates(pred, a, task);
  cell.overall_error = er.overall;
  std::vector<double> eddi_s;
  cell.subgroups.resize(er.subgroup.size());
  ConfusionRates conf;
  if (with_confusion) conf = confusion_rates(pred, a, task);
  for (std::size_t g = 0; g < er.subgroup.size(); ++g) {
    if (!er.subgroup[g]) continue;
    SubgroupStats s;
    s.count = er.counts[g];
    s.error_rate = *er.subgroup[g];
    s.eddi = eddi_subgroup(s.error_rate, er.overall);
    if (with_confusion) {
      s.tpr = conf.tpr[g];
      s.fpr = conf.fpr[g];
    }
    eddi_s.push_back(s.eddi);
    cell.subgroups[g] = s;
  }
  cell.eddi = eddi_attribute(eddi_s);
  cell.eddi_legacy = eddi_mean_legacy(eddi_s);
  if (with_confusion) cell.eo = equalized_odds_gap(conf);
  return cell;
}

std::optional<double> mean_defined(std::span<const std::optional<double>> values) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      total += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

std::vector<double> column(const Tensor2& t, std::size_t c) {
  std::vector<double> out(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) out[r] = t(r, c);
  return out;
}

}  // namespace

std::optional<double> FairnessReport::mean_auroc() const { return mean_defined(auroc); }
std::optional<double> FairnessReport::mean_auprc() const { return mean_defined(auprc); }

FairnessReport evaluate_predictions(const PredictionSet& pred) {
  pred.validate();
  const std::size_t tasks = pred.tasks();
  FairnessReport r;
  r.samples = pred.samples();
  r.threshold = pred.threshold;
  for (std::size_t t = 0; t < tasks; ++t) {
    r.task_names.push_back(task_name(t));
    const auto s = column(pred.scores, t);
    const auto y = column(pred.truth, t);
    r.auroc.push_back(auroc(s, y));
    r.auprc.push_back(auprc(s, y));
  }

  double legacy_total = 0.0;
  r.eddi_task.assign(tasks, 0.0);
  std::vector<std::vector<std::optional<double>>> eo_by_task(tasks);
  for (Attribute a : kAllAttributes) {
    const auto ai = static_cast<std::size_t>(a);
    std::vector<std::optional<double>> eo_values;
    double eddi_total = 0.0;
    for (std::size_t t = 0; t < tasks; ++t) {
      r.cells[ai].push_back(attribute_task_stats(pred, a, t, /*with_confusion=*/true));
      const auto& cell = r.cells[ai].back();
      eddi_total += cell.eddi;
      legacy_total += cell.eddi_legacy;
      r.eddi_task[t] += cell.eddi / static_cast<double>(kAllAttributes.size());
      eo_values.push_back(cell.eo);
      eo_by_task[t].push_back(cell.eo);
    }
    r.eddi_attribute[ai] = eddi_total / static_cast<double>(tasks);
    r.eo_attribute[ai] = mean_defined(eo_values);
  }
  double overall = 0.0;
  for (double v : r.eddi_attribute) overall += v;
  r.eddi_overall = overall / static_cast<double>(kAllAttributes.size());
  r.eo_overall = mean_defined(r.eo_attribute);
  r.eddi_legacy_overall =
      legacy_total / static_cast<double>(kAllAttributes.size() * tasks);
  for (std::size_t t = 0; t < tasks; ++t) r.eo_task.push_back(mean_defined(eo_by_task[t]));
  return r;
}

double mean_eddi(const PredictionSet& pred) {
  const std::size_t tasks = pred.tasks();
  if (pred.samples() == 0) throw InputError("mean_eddi: empty prediction set");
  double total = 0.0;
  for (Attribute a : kAllAttributes) {
    for (std::size_t t = 0; t < tasks; ++t) {
      total += attribute_task_stats(pred, a, t, /*with_confusion=*/false).eddi;
    }
  }
  return total / static_cast<double>(kAllAttributes.size() * tasks);
}

std::string report_to_json(const FairnessReport& r) {
  using ordered_json = nlohmann::ordered_json;
  const auto opt = [](const std::optional<double>& v) -> ordered_json {
    return v ? ordered_json(*v) : ordered_json(nullptr);
  };
  ordered_json j;
  j["samples"] = r.samples;
  j["threshold"] = r.threshold;
  j["tasks"] = r.task_names;

  ordered_json auroc_j = ordered_json::object();
  ordered_json auprc_j = ordered_json::object();
  for (std::size_t t = 0; t < r.task_names.size(); ++t) {
    auroc_j[r.task_names[t]] = opt(r.auroc[t]);
    auprc_j[r.task_names[t]] = opt(r.auprc[t]);
  }
  j["auroc"] = std::move(auroc_j);
  j["auprc"] = std::move(auprc_j);

  ordered_json eddi_j = ordered_json::object();
  ordered_json eo_j = ordered_json::object();
  ordered_json legacy_j = ordered_json::object();
  for (Attribute a : kAllAttributes) {
    const auto ai = static_cast<std::size_t>(a);
    const std::string an(attribute_name(a));
    ordered_json per_task = ordered_json::object();
    ordered_json eo_task = ordered_json::object();
    ordered_json legacy_task = ordered_json::object();
    ordered_json subgroups = ordered_json::object();
    for (std::size_t t = 0; t < r.task_names.size(); ++t) {
      const auto& cell = r.cells[ai][t];
      per_task[r.task_names[t]] = cell.eddi;
      eo_task[r.task_names[t]] = opt(cell.eo);
      legacy_task[r.task_names[t]] = cell.eddi_legacy;
      for (std::size_t g = 0; g < cell.subgroups.size(); ++g) {
        const auto& s = cell.subgroups[g];
        if (!s) continue;
        ordered_json sj;
        sj["count"] = s->count;
        sj["error_rate"] = s->error_rate;
        sj["eddi"] = s->eddi;
        sj["tpr"] = opt(s->tpr);
        sj["fpr"] = opt(s->fpr);
        subgroups[std::string(subgroup_name(a, g))][r.task_names[t]] = std::move(sj);
      }
    }
    ordered_json attr_j;
    attr_j["value"] = r.eddi_attribute[ai];
    attr_j["per_task"] = std::move(per_task);
    attr_j["subgroups"] = std::move(subgroups);
    eddi_j[an] = std::move(attr_j);

    ordered_json eo_attr;
    eo_attr["value"] = opt(r.eo_attribute[ai]);
    eo_attr["per_task"] = std::move(eo_task);
    eo_j[an] = std::move(eo_attr);
    legacy_j[an] = std::move(legacy_task);
  }
  j["eddi"] = std::move(eddi_j);
  j["eo"] = std::move(eo_j);
  j["eddi_overall"] = r.eddi_overall;
  j["eo_overall"] = opt(r.eo_overall);

  ordered_json task_j = ordered_json::object();
  for (std::size_t t = 0; t < r.task_names.size(); ++t) {
    task_j[r.task_names[t]] = {{"eddi", r.eddi_task[t]}, {"eo", opt(r.eo_task[t])}};
  }
  j["per_task"] = std::move(task_j);
  legacy_j["overall"] = r.eddi_legacy_overall;
  j["eddi_legacy"] = std::move(legacy_j);
  return j.dump(2) + "\n";
}

}  // namespace fame

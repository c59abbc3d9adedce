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

#include "fame/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <cstdio>

#include "fame/errors.hpp"
#include "fame/rng.hpp"
#include "json.hpp"

namespace fame {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::array<std::string_view, 5> kEthnicityNames = {"White", "Black", "Hispanic",
                                                             "Asian", "Other"};
constexpr std::array<std::string_view, 5> kInsuranceNames = {"Medicare", "Private", "Medicaid",
                                                             "Government", "SelfPay"};
constexpr std::array<std::string_view, 4> kAgeNames = {"15-29", "30-49", "50-69", "70+"};

std::span<const std::string_view> names_of(Attribute a) {
  switch (a) {
    case Attribute::kEthnicity:
      return kEthnicityNames;
    case Attribute::kInsurance:
      return kInsuranceNames;
    case Attribute::kAgeBucket:
      return kAgeNames;
  }
  return {};
}

}  // namespace

std::string_view attribute_name(Attribute a) {
  switch (a) {
    case Attribute::kEthnicity:
      return "ethnicity";
    case Attribute::kInsurance:
      return "insurance";
    case Attribute::kAgeBucket:
      return "age_bucket";
  }
  return "?";
}

std::size_t subgroup_count(Attribute a) { return names_of(a).size(); }

std::string_view subgroup_name(Attribute a, std::size_t subgroup) {
  return names_of(a)[subgroup];
}

std::optional<std::size_t> parse_subgroup(Attribute a, std::string_view name) {
  const auto names = names_of(a);
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

std::optional<Attribute> parse_attribute(std::string_view name) {
  for (Attribute a : kAllAttributes) {
    if (attribute_name(a) == name) return a;
  }
  return std::nullopt;
}

std::string task_name(std::size_t task) {
  if (task < kDefaultTaskNames.size()) return std::string(kDefaultTaskNames[task]);
  return "task_" + std::to_string(task);
}

// ---------------------------------------------------------------------------
// Cohort accessors

std::optional<std::size_t> Cohort::modality_index(std::string_view name) const {
  const auto it = std::find(modality_names.begin(), modality_names.end(), name);
  if (it == modality_names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - modality_names.begin());
}

Tensor2 Cohort::modality_matrix(std::size_t m, std::span<const std::size_t> rows) const {
  Tensor2 out(rows.size(), widths.at(m));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& src = records[rows[r]].modalities[m];
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  return out;
}

Tensor2 Cohort::label_matrix(std::span<const std::size_t> rows) const {
  Tensor2 out(rows.size(), task_count);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& labels = records[rows[r]].labels;
    for (std::size_t t = 0; t < task_count; ++t) out(r, t) = labels[t];
  }
  return out;
}

std::vector<SensitiveAttributes> Cohort::attributes(std::span<const std::size_t> rows) const {
  std::vector<SensitiveAttributes> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(records[r].attrs);
  return out;
}

void validate_cohort(const Cohort& cohort) {
  if (cohort.modality_names.size() != cohort.widths.size()) {
    throw SchemaError("cohort: modality names and widths disagree");
  }
  for (const auto& rec : cohort.records) {
    if (rec.modalities.size() != cohort.widths.size()) {
      throw SchemaError("record " + rec.id + ": expected " +
                        std::to_string(cohort.widths.size()) + " modalities");
    }
    for (std::size_t m = 0; m < cohort.widths.size(); ++m) {
      if (rec.modalities[m].size() != cohort.widths[m]) {
        throw SchemaError("record " + rec.id + ": modality '" + cohort.modality_names[m] +
                          "' has width " + std::to_string(rec.modalities[m].size()) +
                          ", cohort width is " + std::to_string(cohort.widths[m]));
      }
      for (double v : rec.modalities[m]) {
        if (!std::isfinite(v)) {
          throw SchemaError("record " + rec.id + ": non-finite value in '" +
                            cohort.modality_names[m] + "'");
        }
      }
    }
    if (rec.labels.size() != cohort.task_count) {
      throw SchemaError("record " + rec.id + ": expected " + std::to_string(cohort.task_count) +
                        " labels, got " + std::to_string(rec.labels.size()));
    }
    for (auto y : rec.labels) {
      if (y > 1) throw SchemaError("record " + rec.id + ": label outside {0,1}");
    }
    for (Attribute a : kAllAttributes) {
      if (rec.attrs.of(a) >= subgroup_count(a)) {
        throw SchemaError("record " + rec.id + ": bad " + std::string(attribute_name(a)));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

CohortRecord parse_record(const ordered_json& j, Cohort& cohort, bool first) {
  CohortRecord rec;
  if (!j.is_object()) throw InputError("record is not a JSON object");
  const auto& id = j.at("id");
  rec.id = id.is_string() ? id.get<std::string>() : id.dump();

  const auto& attrs = j.at("attrs");
  for (Attribute a : kAllAttributes) {
    const std::string key(attribute_name(a));
    if (!attrs.contains(key)) {
      throw SchemaError("record " + rec.id + ": missing attribute '" + key + "'");
    }
    const auto value = attrs.at(key).get<std::string>();
    const auto sub = parse_subgroup(a, value);
    if (!sub) {
      throw SchemaError("record " + rec.id + ": unknown " + key + " value '" + value + "'");
    }
    rec.attrs.subgroup[static_cast<std::size_t>(a)] = static_cast<std::uint8_t>(*sub);
  }

  const auto& labels = j.at("labels");
  if (!labels.is_array()) throw SchemaError("record " + rec.id + ": labels must be an array");
  for (const auto& y : labels) {
    if (!y.is_number_integer() || (y.get<long long>() != 0 && y.get<long long>() != 1)) {
      throw SchemaError("record " + rec.id + ": label value " + y.dump() + " outside {0,1}");
    }
    rec.labels.push_back(static_cast<std::uint8_t>(y.get<int>()));
  }

  const auto& mods = j.at("modalities");
  if (!mods.is_object() || mods.empty()) {
    throw SchemaError("record " + rec.id + ": modalities must be a non-empty object");
  }
  if (first) {
    for (const auto& [name, vec] : mods.items()) {
      cohort.modality_names.push_back(name);
      cohort.widths.push_back(vec.size());
    }
    cohort.task_count = rec.labels.size();
  }
  if (mods.size() != cohort.modality_names.size()) {
    throw SchemaError("record " + rec.id + ": expected " +
                      std::to_string(cohort.modality_names.size()) + " modalities, got " +
                      std::to_string(mods.size()));
  }
  rec.modalities.resize(cohort.modality_names.size());
  for (std::size_t m = 0; m < cohort.modality_names.size(); ++m) {
    const auto& name = cohort.modality_names[m];
    if (!mods.contains(name)) {
      throw SchemaError("record " + rec.id + ": missing modality '" + name + "'");
    }
    const auto& vec = mods.at(name);
    if (!vec.is_array()) throw SchemaError("record " + rec.id + ": '" + name + "' not an array");
    rec.modalities[m].reserve(vec.size());
    for (const auto& v : vec) {
      if (!v.is_number()) throw SchemaError("record " + rec.id + ": non-numeric embedding value");
      rec.modalities[m].push_back(v.get<double>());
    }
    if (rec.modalities[m].size() != cohort.widths[m]) {
      throw SchemaError("record " + rec.id + ": modality '" + name + "' has width " +
                        std::to_string(rec.modalities[m].size()) + ", expected " +
                        std::to_string(cohort.widths[m]));
    }
  }
  if (rec.labels.size() != cohort.task_count) {
    throw SchemaError("record " + rec.id + ": expected " + std::to_string(cohort.task_count) +
                      " labels, got " + std::to_string(rec.labels.size()));
  }
  return rec;
}

}  // namespace

Cohort read_cohort(std::istream& in) {
  Cohort cohort;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("cohort line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      cohort.records.push_back(parse_record(j, cohort, cohort.records.empty()));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("cohort line " + std::to_string(line_no) + ": " + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError("cohort line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (cohort.records.empty()) throw InputError("cohort: no records");
  try {
    validate_cohort(cohort);
  } catch (const SchemaError& e) {
    throw SchemaError(std::string("cohort: ") + e.what());
  }
  return cohort;
}

Cohort load_cohort(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open cohort file " + path.string());
  return read_cohort(in);
}

void write_cohort(const Cohort& cohort, std::ostream& out) {
  for (const auto& rec : cohort.records) {
    ordered_json j;
    j["id"] = rec.id;
    ordered_json attrs;
    for (Attribute a : kAllAttributes) {
      attrs[std::string(attribute_name(a))] = std::string(subgroup_name(a, rec.attrs.of(a)));
    }
    j["attrs"] = std::move(attrs);
    j["labels"] = std::vector<int>(rec.labels.begin(), rec.labels.end());
    ordered_json mods;
    for (std::size_t m = 0; m < cohort.modality_names.size(); ++m) {
      mods[cohort.modality_names[m]] = rec.modalities[m];
    }
    j["modalities"] = std::move(mods);
    out << j.dump() << '\n';
  }
}

void write_cohort(const Cohort& cohort, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write cohort file " + path.string());
  write_cohort(cohort, out);
  if (!out) throw InputError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Splits

Split split_cohort(const Cohort& cohort, std::uint64_t seed) {
  const std::size_t n = cohort.size();
  if (n < 3) throw InputError("split_cohort: need at least 3 records, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = stream(seed, kStreamSplit);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng() % (i + 1)]);
  }
  const auto round_count = [](double x) { return static_cast<std::size_t>(std::lround(x)); };
  const std::size_t n_test = std::max<std::size_t>(1, round_count(0.2 * static_cast<double>(n)));
  const std::size_t rest = n - n_test;
  const std::size_t n_val =
      std::max<std::size_t>(1, round_count(0.05 * static_cast<double>(rest)));

  Split s;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
               order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), order.end());
  return s;
}

// ---------------------------------------------------------------------------
// Generator

std::array<std::vector<double>, 3> GeneratorConfig::default_marginals() {
  constexpr double kStays = 33721.0;
  return {std::vector<double>{23887 / kStays, 2567 / kStays, 1076 / kStays, 670 / kStays,
                              5521 / kStays},
          std::vector<double>{17163 / kStays, 12151 / kStays, 2889 / kStays, 1060 / kStays,
                              458 / kStays},
          std::vector<double>{1832 / kStays, 5729 / kStays, 13344 / kStays, 12816 / kStays}};
}

void GeneratorConfig::validate() const {
  if (n == 0) throw ConfigError("generator: n must be positive");
  if (modality_names.empty()) throw ConfigError("generator: no modalities");
  if (widths.size() != modality_names.size() || signal_strength.size() != modality_names.size()) {
    throw ConfigError("generator: widths and signal strengths need one entry per modality");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("generator: modality widths must be positive");
  }
  for (double s : signal_strength) {
    if (!std::isfinite(s) || s < 0.0) throw ConfigError("generator: signal strength must be >= 0");
  }
  for (Attribute a : kAllAttributes) {
    const auto& p = marginals[static_cast<std::size_t>(a)];
    if (p.size() != subgroup_count(a)) {
      throw ConfigError("generator: " + std::string(attribute_name(a)) + " needs " +
                        std::to_string(subgroup_count(a)) + " marginals");
    }
    double total = 0.0;
    for (double v : p) {
      if (!(v >= 0.0)) throw ConfigError("generator: negative marginal");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ConfigError("generator: " + std::string(attribute_name(a)) + " marginals sum to " +
                        std::to_string(total) + ", not 1");
    }
  }
  if (prevalences.empty()) throw ConfigError("generator: need at least one task");
  for (double p : prevalences) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("generator: prevalences must lie in (0, 1)");
  }
  for (const auto& b : biases) {
    if (std::find(modality_names.begin(), modality_names.end(), b.modality) ==
        modality_names.end()) {
      throw ConfigError("generator: bias on unknown modality '" + b.modality + "'");
    }
    if (b.subgroup >= subgroup_count(b.attribute)) {
      throw ConfigError("generator: bias subgroup out of range");
    }
    if (!(b.noise_strength >= 0.0)) throw ConfigError("generator: noise_strength must be >= 0");
  }
}

namespace {

std::size_t draw_category(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

}  // namespace

Cohort generate_cohort(const GeneratorConfig& cfg) {
  cfg.validate();
  const std::size_t modalities = cfg.modality_names.size();
  const std::size_t tasks = cfg.prevalences.size();

  // One fixed unit direction per modality carries the class signal.
  std::vector<std::vector<double>> directions(modalities);
  {
    auto rng = stream(cfg.seed, kStreamDirections);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t m = 0; m < modalities; ++m) {
      auto& u = directions[m];
      u.resize(cfg.widths[m]);
      double norm = 0.0;
      do {
        norm = 0.0;
        for (double& v : u) {
          v = normal(rng);
          norm += v * v;
        }
      } while (norm == 0.0);
      norm = std::sqrt(norm);
      for (double& v : u) v /= norm;
    }
  }

  std::vector<std::size_t> bias_modality;
  for (const auto& b : cfg.biases) {
    bias_modality.push_back(static_cast<std::size_t>(
        std::find(cfg.modality_names.begin(), cfg.modality_names.end(), b.modality) -
        cfg.modality_names.begin()));
  }

  Cohort cohort;
  cohort.modality_names = cfg.modality_names;
  cohort.widths = cfg.widths;
  cohort.task_count = tasks;
  cohort.records.resize(cfg.n);

  const int id_width = std::max(4, static_cast<int>(std::to_string(cfg.n).size()));
  const std::uint64_t record_seed = mix_seed(cfg.seed ^ kStreamRecords);
  const auto n = static_cast<std::int64_t>(cfg.n);

  // Each record draws from its own stream, so the loop order is irrelevant.
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    auto rng = stream(record_seed, static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    CohortRecord& rec = cohort.records[static_cast<std::size_t>(i)];

    char id[32];
    std::snprintf(id, sizeof id, "p%0*lld", id_width, static_cast<long long>(i + 1));
    rec.id = id;

    for (Attribute a : kAllAttributes) {
      const auto& p = cfg.marginals[static_cast<std::size_t>(a)];
      rec.attrs.subgroup[static_cast<std::size_t>(a)] =
          static_cast<std::uint8_t>(draw_category(p, unit(rng)));
    }

    std::size_t positives = 0;
    rec.labels.resize(tasks);
    for (std::size_t t = 0; t < tasks; ++t) {
      rec.labels[t] = unit(rng) < cfg.prevalences[t] ? 1 : 0;
      positives += rec.labels[t];
    }
    // Majority vote over tasks, ties positive.
    const double sign = 2 * positives >= tasks ? 1.0 : -1.0;

    rec.modalities.resize(modalities);
    for (std::size_t m = 0; m < modalities; ++m) {
      auto& z = rec.modalities[m];
      z.resize(cfg.widths[m]);
      const double shift = sign * cfg.signal_strength[m];
      for (std::size_t d = 0; d < z.size(); ++d) z[d] = shift * directions[m][d] + normal(rng);
    }

    for (std::size_t b = 0; b < cfg.biases.size(); ++b) {
      const auto& spec = cfg.biases[b];
      if (rec.attrs.of(spec.attribute) != spec.subgroup || spec.noise_strength == 0.0) continue;
      for (double& v : rec.modalities[bias_modality[b]]) v += spec.noise_strength * normal(rng);
    }
  }
  return cohort;
}

}  // namespace fame

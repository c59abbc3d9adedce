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

// Multimodal patient cohorts: record model, JSONL ingestion, splitting and a
// synthetic generator with per-subgroup noise injection.

#ifndef FAME_COHORT_HPP_
#define FAME_COHORT_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fame/tensor.hpp"

namespace fame {

// The three sensitive attributes fairness is measured over.
enum class Attribute { kEthnicity = 0, kInsurance = 1, kAgeBucket = 2 };
inline constexpr std::array<Attribute, 3> kAllAttributes = {
    Attribute::kEthnicity, Attribute::kInsurance, Attribute::kAgeBucket};

std::string_view attribute_name(Attribute a);
std::size_t subgroup_count(Attribute a);
// Exact file spellings: "White", "SelfPay", "70+", ...
std::string_view subgroup_name(Attribute a, std::size_t subgroup);
std::optional<std::size_t> parse_subgroup(Attribute a, std::string_view name);
std::optional<Attribute> parse_attribute(std::string_view name);

// One subgroup index per attribute, indexed by static_cast<int>(Attribute).
struct SensitiveAttributes {
  std::array<std::uint8_t, 3> subgroup{};

  std::size_t of(Attribute a) const { return subgroup[static_cast<std::size_t>(a)]; }
  friend bool operator==(const SensitiveAttributes&, const SensitiveAttributes&) = default;
};

inline constexpr std::array<std::string_view, 3> kDefaultTaskNames = {"mortality", "los_ge_7",
                                                                      "mech_vent"};
inline constexpr std::array<std::string_view, 3> kDefaultModalities = {"demographic", "structured",
                                                                       "notes"};

std::string task_name(std::size_t task);

struct CohortRecord {
  std::string id;
  // One embedding per modality, in Cohort::modality_names order.
  std::vector<std::vector<double>> modalities;
  std::vector<std::uint8_t> labels;
  SensitiveAttributes attrs;

  friend bool operator==(const CohortRecord&, const CohortRecord&) = default;
};

struct Cohort {
  std::vector<std::string> modality_names;
  std::vector<std::size_t> widths;
  std::size_t task_count = 0;
  std::vector<CohortRecord> records;

  std::size_t size() const { return records.size(); }
  std::optional<std::size_t> modality_index(std::string_view name) const;

  // Rows of modality `m` for the given record indices.
  Tensor2 modality_matrix(std::size_t m, std::span<const std::size_t> rows) const;
  // N x T label matrix with 0/1 entries.
  Tensor2 label_matrix(std::span<const std::size_t> rows) const;
  std::vector<SensitiveAttributes> attributes(std::span<const std::size_t> rows) const;
};

// Throws SchemaError when records disagree with the cohort's layout.
void validate_cohort(const Cohort& cohort);

// JSON Lines, one record per line. Errors carry 1-based line numbers.
Cohort read_cohort(std::istream& in);
Cohort load_cohort(const std::filesystem::path& path);
void write_cohort(const Cohort& cohort, std::ostream& out);
void write_cohort(const Cohort& cohort, const std::filesystem::path& path);

// Record indices (into Cohort::records) for each partition.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Seeded shuffle of record order; test = round(0.2 n), val = round(0.05 of the
// rest), both at least 1; the remainder trains.
Split split_cohort(const Cohort& cohort, std::uint64_t seed);

struct BiasSpec {
  std::string modality;
  Attribute attribute = Attribute::kEthnicity;
  std::size_t subgroup = 0;
  double noise_strength = 0.0;
};

struct GeneratorConfig {
  std::size_t n = 33721;
  std::vector<std::string> modality_names{kDefaultModalities.begin(), kDefaultModalities.end()};
  std::vector<std::size_t> widths = {16, 64, 64};
  // Distance of each class mean from the origin along the modality direction.
  std::vector<double> signal_strength = {1.0, 1.0, 1.0};
  // Subgroup probabilities per attribute, indexed like kAllAttributes.
  std::array<std::vector<double>, 3> marginals = default_marginals();
  std::vector<double> prevalences = {0.1013, 0.1480, 0.9002};
  std::vector<BiasSpec> biases;
  std::uint64_t seed = 0;

  // Subgroup counts of the reference ICU cohort divided by its 33,721 stays.
  static std::array<std::vector<double>, 3> default_marginals();

  void validate() const;  // throws ConfigError
};

Cohort generate_cohort(const GeneratorConfig& cfg);

}  // namespace fame

#endif  // FAME_COHORT_HPP_

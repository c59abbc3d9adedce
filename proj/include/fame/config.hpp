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

// Flat "key = value" configuration files.
//
//   # benchmark cohort
//   n = 5000
//   widths = 16,64,64
//   bias = demographic:ethnicity:Black:3.0
//   mode = fame
//   lambda = 0.8
//
// Blank lines and text after '#' are ignored. Command-line "--key value"
// pairs are merged on top with set(), so they win over the file.

#ifndef FAME_CONFIG_HPP_
#define FAME_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fame/cohort.hpp"
#include "fame/training.hpp"

namespace fame {

class KeyValueConfig {
 public:
  // Throws ConfigError naming the source and line on malformed input or an
  // unknown key.
  static KeyValueConfig parse(std::istream& in, std::string_view source = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(std::string key, std::string value);  // throws on unknown key
  void merge(const KeyValueConfig& overrides);
  bool has(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;
  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

  std::string get_string(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::uint64_t get_uint(std::string_view key, std::uint64_t fallback) const;
  std::vector<double> get_doubles(std::string_view key, std::vector<double> fallback) const;
  std::vector<std::string> get_strings(std::string_view key,
                                       std::vector<std::string> fallback) const;

  // "key = value" lines in key order.
  std::string to_string() const;

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

bool is_known_key(std::string_view key);
const std::vector<std::string>& known_keys();

// Comma-separated helpers shared with the command line.
std::vector<double> parse_double_list(std::string_view text, std::string_view what);
std::vector<std::uint64_t> parse_uint_list(std::string_view text, std::string_view what);
std::vector<std::string> split_list(std::string_view text, char sep = ',');

// "modality:attribute:subgroup:noise", several joined by ';'.
std::vector<BiasSpec> parse_biases(std::string_view text);

GeneratorConfig generator_config(const KeyValueConfig& cfg);
TrainConfig train_config(const KeyValueConfig& cfg);

}  // namespace fame

#endif  // FAME_CONFIG_HPP_

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

#include "fame/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "fame/errors.hpp"

namespace fame {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(std::string(what) + ": expected a number, got '" + std::string(t) + "'");
  }
  return v;
}

std::uint64_t to_uint(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(std::string(what) + ": expected a non-negative integer, got '" +
                      std::string(t) + "'");
  }
  return v;
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      // generator
      "n", "seed", "modalities", "widths", "signal_strength", "prevalences",
      "marginals_ethnicity", "marginals_insurance", "marginals_age_bucket", "bias",
      // training
      "mode", "lambda", "gamma", "clip", "l1_alpha", "lr", "weight_decay", "batch_size",
      "patience", "max_epochs", "plateau_factor", "plateau_patience", "min_lr", "threshold",
      "shared_width", "hidden_width", "dropout", "active", "task"};
  return keys;
}

bool is_known_key(std::string_view key) {
  const auto& keys = known_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

KeyValueConfig KeyValueConfig::parse(std::istream& in, std::string_view source) {
  KeyValueConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
    const auto key = trim(view.substr(0, eq));
    const auto value = trim(view.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!is_known_key(key)) throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
    cfg.entries_[std::string(key)] = std::string(value);
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  return parse(in, path.string());
}

void KeyValueConfig::set(std::string key, std::string value) {
  if (!is_known_key(key)) throw ConfigError("unknown config key '" + key + "'");
  entries_[std::move(key)] = std::move(value);
}

void KeyValueConfig::merge(const KeyValueConfig& overrides) {
  for (const auto& [k, v] : overrides.entries_) entries_[k] = v;
}

bool KeyValueConfig::has(std::string_view key) const { return entries_.find(key) != entries_.end(); }

std::optional<std::string> KeyValueConfig::get(std::string_view key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(std::string_view key, std::string fallback) const {
  return get(key).value_or(std::move(fallback));
}

double KeyValueConfig::get_double(std::string_view key, double fallback) const {
  const auto v = get(key);
  return v ? to_double(*v, key) : fallback;
}

std::uint64_t KeyValueConfig::get_uint(std::string_view key, std::uint64_t fallback) const {
  const auto v = get(key);
  return v ? to_uint(*v, key) : fallback;
}

std::vector<double> KeyValueConfig::get_doubles(std::string_view key,
                                                std::vector<double> fallback) const {
  const auto v = get(key);
  return v ? parse_double_list(*v, key) : fallback;
}

std::vector<std::string> KeyValueConfig::get_strings(std::string_view key,
                                                     std::vector<std::string> fallback) const {
  const auto v = get(key);
  return v ? split_list(*v) : fallback;
}

std::string KeyValueConfig::to_string() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
  return out.str();
}

std::vector<std::string> split_list(std::string_view text, char sep) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.emplace_back(trim(text.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<double> parse_double_list(std::string_view text, std::string_view what) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(to_double(item, what));
  return out;
}

std::vector<std::uint64_t> parse_uint_list(std::string_view text, std::string_view what) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(text)) out.push_back(to_uint(item, what));
  return out;
}

std::vector<BiasSpec> parse_biases(std::string_view text) {
  std::vector<BiasSpec> out;
  for (const auto& item : split_list(text, ';')) {
    if (item.empty()) continue;
    const auto parts = split_list(item, ':');
    if (parts.size() != 4) {
      throw ConfigError("bias: expected modality:attribute:subgroup:noise, got '" + item + "'");
    }
    BiasSpec spec;
    spec.modality = parts[0];
    const auto attr = parse_attribute(parts[1]);
    if (!attr) throw ConfigError("bias: unknown attribute '" + parts[1] + "'");
    spec.attribute = *attr;
    const auto sub = parse_subgroup(*attr, parts[2]);
    if (!sub) throw ConfigError("bias: unknown subgroup '" + parts[2] + "' for " + parts[1]);
    spec.subgroup = *sub;
    spec.noise_strength = to_double(parts[3], "bias noise");
    if (!(spec.noise_strength >= 0.0)) throw ConfigError("bias: noise must be >= 0");
    out.push_back(spec);
  }
  return out;
}

GeneratorConfig generator_config(const KeyValueConfig& cfg) {
  GeneratorConfig g;
  g.n = cfg.get_uint("n", g.n);
  g.seed = cfg.get_uint("seed", g.seed);
  g.modality_names = cfg.get_strings("modalities", g.modality_names);
  if (const auto w = cfg.get("widths")) {
    g.widths.clear();
    for (auto v : parse_uint_list(*w, "widths")) g.widths.push_back(v);
  }
  g.signal_strength = cfg.get_doubles("signal_strength", g.signal_strength);
  g.prevalences = cfg.get_doubles("prevalences", g.prevalences);
  for (Attribute a : kAllAttributes) {
    const std::string key = "marginals_" + std::string(attribute_name(a));
    auto& m = g.marginals[static_cast<std::size_t>(a)];
    m = cfg.get_doubles(key, m);
  }
  if (const auto b = cfg.get("bias")) g.biases = parse_biases(*b);
  g.validate();
  return g;
}

TrainConfig train_config(const KeyValueConfig& cfg) {
  TrainConfig t;
  if (const auto m = cfg.get("mode")) {
    const auto mode = parse_mode(*m);
    if (!mode) throw ConfigError("unknown mode '" + *m + "'");
    t.mode = *mode;
  }
  t.lambda = cfg.get_double("lambda", t.lambda);
  t.gamma = cfg.get_double("gamma", t.gamma);
  t.clip = cfg.get_double("clip", t.clip);
  t.l1_alpha = cfg.get_double("l1_alpha", t.l1_alpha);
  t.lr = cfg.get_double("lr", t.lr);
  t.weight_decay = cfg.get_double("weight_decay", t.weight_decay);
  t.batch_size = cfg.get_uint("batch_size", t.batch_size);
  t.patience = cfg.get_uint("patience", t.patience);
  t.max_epochs = cfg.get_uint("max_epochs", t.max_epochs);
  t.plateau_factor = cfg.get_double("plateau_factor", t.plateau_factor);
  t.plateau_patience = cfg.get_uint("plateau_patience", t.plateau_patience);
  t.min_lr = cfg.get_double("min_lr", t.min_lr);
  t.seed = cfg.get_uint("seed", t.seed);
  t.threshold = cfg.get_double("threshold", t.threshold);
  t.shared_width = cfg.get_uint("shared_width", t.shared_width);
  t.hidden_width = cfg.get_uint("hidden_width", t.hidden_width);
  t.dropout = cfg.get_double("dropout", t.dropout);
  t.validate();
  return t;
}

}  // namespace fame

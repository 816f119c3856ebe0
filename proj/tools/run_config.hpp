// Copyright 2026 The tritrain Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tritrain/analysis.hpp"
#include "tritrain/datagen.hpp"
#include "tritrain/trainer.hpp"

namespace tritrain::cli {

struct KeySpec {
  const char* key;            // "section.name"
  const char* default_value;  // resolved when the key is absent
  const char* help;
};

/// Every accepted key, in documentation order.
std::span<const KeySpec> known_keys();

/// Flat sectioned key-value configuration. Files are INI; any key that is
/// not in known_keys() is rejected with its full path in the message.
class RunConfig {
 public:
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig parse(std::istream& is, const std::string& origin = "<stream>");

  void set(const std::string& key, const std::string& value);
  /// Parses "section.key=value".
  void set_assignment(const std::string& assignment);

  bool has_explicit(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key) const;

  double get_double(const std::string& key) const;
  std::size_t get_count(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  // "auto" or "none" (or empty) -> nullopt.
  std::optional<std::size_t> get_optional_count(const std::string& key) const;
  // Comma-separated counts; empty string -> empty list.
  std::vector<std::size_t> get_count_list(const std::string& key) const;

  /// Writes every known key of the given sections with its resolved value.
  void write_resolved(std::ostream& os, std::span<const std::string> sections) const;

 private:
  std::map<std::string, std::string> values_;
};

ShiftSpec shift_spec_from(const RunConfig& c);
NetConfig net_config_from(const RunConfig& c);
TrainConfig train_config_from(const RunConfig& c);
ADistanceOptions adist_options_from(const RunConfig& c);

struct LoadedData {
  DomainDataset data;
  LabeledSet test;  // data.test when given, otherwise the labeled target pool
};

/// Dataset named by [data], or generated from [gen] when data.source is empty.
/// Standardisation (data.standardize) is fitted on the source split.
LoadedData load_dataset(const RunConfig& c);

/// Small instance for bound-check, drawn from the [bound] keys: source,
/// target and a pseudo-labeled copy of the target with flipped labels.
struct BoundInstance {
  HypothesisClass h;
  LabeledSet source;
  LabeledSet target;
  LabeledSet pseudo;
};
BoundInstance bound_instance_from(const RunConfig& c);

// Upper limit on |H| * (n_source + n_target) accepted by bound-check.
inline constexpr std::size_t kBoundWorkCap = 2'000'000;

}  // namespace tritrain::cli

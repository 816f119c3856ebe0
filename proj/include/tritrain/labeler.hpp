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
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "tritrain/nnlib.hpp"
#include "tritrain/trinet.hpp"

namespace tritrain {

struct LabelingConfig {
  double threshold = 0.9;      // 0.95 for hard shifts
  std::size_t n_init = 5000;   // candidates for the initial labeling
  std::size_t cap = 40000;     // ceiling on candidates per step
  std::size_t steps_divisor = 20;

  void validate() const;
};

struct PseudoLabel {
  std::size_t target_index = 0;
  int label = 0;
  double confidence = 0.0;  // max of the two labeling branches' max-probabilities
  std::size_t step = 0;

  friend bool operator==(const PseudoLabel&, const PseudoLabel&) = default;
};

/// The pseudo-labeled target set for one step. Rebuilt from scratch on every
/// relabeling.
struct PseudoLabelSet {
  std::vector<PseudoLabel> entries;
  std::size_t step = 0;
  std::size_t n_candidates = 0;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
  std::vector<std::size_t> indices() const;
  std::vector<int> labels() const;

  // Throws InputError on duplicate indices or out-of-range labels/indices.
  void validate(std::size_t n_targets, std::size_t num_classes) const;

  friend bool operator==(const PseudoLabelSet&, const PseudoLabelSet&) = default;
};

/// Candidates considered at step k: min(n_init, n) at k = 0, otherwise
/// min(floor(k * n / steps_divisor), cap, n).
std::size_t candidate_count(std::size_t step_k, std::size_t n_targets, const LabelingConfig& cfg);

/// Uniform sample of `count` distinct indices from [0, n_targets) (partial
/// Fisher-Yates). `count` is clamped to n_targets.
std::vector<std::size_t> sample_candidates(std::size_t n_targets, std::size_t count, Rng& rng);

struct LabelDecision {
  std::size_t row = 0;
  int label = 0;
  double confidence = 0.0;
};

/// Keeps row r iff both branches predict the same class C and
/// max(max_prob1, max_prob2) > threshold. Kept rows are labeled C.
std::vector<LabelDecision> assign_pseudo_labels(const BranchOutput& p1, const BranchOutput& p2, double threshold);

/// Same rule; rows are mapped back through `candidates` to target indices.
PseudoLabelSet label_candidates(std::span<const std::size_t> candidates, const BranchOutput& p1,
                                const BranchOutput& p2, double threshold, std::size_t step);

/// Fraction of pseudo-labels matching ground truth; nullopt when the set is empty.
std::optional<double> labeling_accuracy(const PseudoLabelSet& set, std::span<const int> true_labels);

// CSV audit dump: target_index,label,confidence,step
void write_pseudo_labels_csv(const PseudoLabelSet& set, std::ostream& os);

}  // namespace tritrain

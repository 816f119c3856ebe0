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

#include "tritrain/labeler.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <unordered_set>

#include "tritrain/errors.hpp"

namespace tritrain {

void LabelingConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("label.threshold must be in (0, 1)");
  if (n_init > cap) throw ConfigError("label.n_init must not exceed label.cap");
  if (steps_divisor == 0) throw ConfigError("label.steps_divisor must be positive");
}

std::vector<std::size_t> PseudoLabelSet::indices() const {
  std::vector<std::size_t> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.target_index);
  return out;
}

std::vector<int> PseudoLabelSet::labels() const {
  std::vector<int> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.label);
  return out;
}

void PseudoLabelSet::validate(std::size_t n_targets, std::size_t num_classes) const {
  std::unordered_set<std::size_t> seen;
  for (const auto& e : entries) {
    if (e.target_index >= n_targets) throw InputError("pseudo-label target index out of range");
    if (e.label < 0 || static_cast<std::size_t>(e.label) >= num_classes)
      throw InputError("pseudo-label class out of range");
    if (!seen.insert(e.target_index).second) throw InputError("duplicate pseudo-label target index");
  }
}

std::size_t candidate_count(std::size_t step_k, std::size_t n_targets, const LabelingConfig& cfg) {
  if (step_k == 0) return std::min(cfg.n_init, n_targets);
  const std::size_t scheduled = step_k * n_targets / cfg.steps_divisor;
  return std::min({scheduled, cfg.cap, n_targets});
}

std::vector<std::size_t> sample_candidates(std::size_t n_targets, std::size_t count, Rng& rng) {
  count = std::min(count, n_targets);
  std::vector<std::size_t> idx(n_targets);
  for (std::size_t i = 0; i < n_targets; ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n_targets - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

std::vector<LabelDecision> assign_pseudo_labels(const BranchOutput& p1, const BranchOutput& p2, double threshold) {
  if (p1.rows() != p2.rows() || p1.predicted_class.size() != p2.predicted_class.size())
    throw DimensionError("assign_pseudo_labels: prediction row counts differ (" + std::to_string(p1.rows()) + " vs " +
                     std::to_string(p2.rows()) + ")");
  std::vector<LabelDecision> kept;
  for (std::size_t r = 0; r < p1.predicted_class.size(); ++r) {
    if (p1.predicted_class[r] != p2.predicted_class[r]) continue;
    const double conf = std::max(p1.max_prob[r], p2.max_prob[r]);
    if (conf > threshold) kept.push_back({r, p1.predicted_class[r], conf});
  }
  return kept;
}

PseudoLabelSet label_candidates(std::span<const std::size_t> candidates, const BranchOutput& p1,
                                const BranchOutput& p2, double threshold, std::size_t step) {
  if (candidates.size() != p1.rows())
    throw InputError("label_candidates: candidate list does not match prediction rows");
  PseudoLabelSet set;
  set.step = step;
  set.n_candidates = candidates.size();
  for (const auto& d : assign_pseudo_labels(p1, p2, threshold))
    set.entries.push_back({candidates[d.row], d.label, d.confidence, step});
  return set;
}

std::optional<double> labeling_accuracy(const PseudoLabelSet& set, std::span<const int> true_labels) {
  if (set.empty()) return std::nullopt;
  std::size_t correct = 0;
  for (const auto& e : set.entries) {
    if (e.target_index >= true_labels.size()) throw InputError("labeling_accuracy: target index out of range");
    correct += true_labels[e.target_index] == e.label;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

void write_pseudo_labels_csv(const PseudoLabelSet& set, std::ostream& os) {
  os << "target_index,label,confidence,step\n";
  char buf[64];
  for (const auto& e : set.entries) {
    std::snprintf(buf, sizeof buf, "%.17g", e.confidence);
    os << e.target_index << ',' << e.label << ',' << buf << ',' << e.step << '\n';
  }
}

}  // namespace tritrain

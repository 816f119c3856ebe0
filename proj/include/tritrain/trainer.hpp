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
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "tritrain/datagen.hpp"
#include "tritrain/labeler.hpp"
#include "tritrain/nnlib.hpp"
#include "tritrain/trinet.hpp"

namespace tritrain {

struct TrainConfig {
  NetConfig net;
  // Mini-batch iterations per phase; nullopt means one pass over the pool.
  std::optional<std::size_t> iter_per_phase;
  // Overrides the pretraining iteration count only.
  std::optional<std::size_t> pretrain_iters;
  std::size_t steps_k = 20;
  std::size_t batch_labeling = 64;  // batches for F, F1, F2
  std::size_t batch_target = 128;   // batches for F, Ft
  OptimizerKind optimizer = OptimizerKind::momentum_sgd;
  double lr = 0.01;
  double momentum = 0.9;
  double adagrad_eps = 1e-8;
  double lambda = 0.01;
  LabelingConfig labeling;
  GradientGates gates;
  std::uint64_t seed = 0;
  // After this adaptation step the learning rate switches to lr_decay_to.
  std::optional<std::size_t> lr_decay_step;
  double lr_decay_to = 0.001;
  bool verbose = false;

  void validate() const;
};

struct StepMetrics {
  std::size_t step = 0;
  std::optional<double> acc_f1, acc_f2, acc_ft;  // held-out target accuracy
  std::optional<double> labeling_acc;            // empty when nothing was labeled
  std::size_t n_pseudo = 0;
  std::size_t n_candidates = 0;
  double mean_E = 0.0;
  double mean_penalty = 0.0;
  double mean_target_loss = 0.0;
  bool ft_skipped = false;
  double lr = 0.0;

  friend bool operator==(const StepMetrics&, const StepMetrics&) = default;
};

/// Ground truth used only for reporting: a labeled target test set and the
/// hidden labels of the unlabeled pool (for labeling accuracy).
struct Evaluation {
  LabeledSet test;
  std::optional<HiddenLabels> target_truth;
};

/// Everything that evolves during a run; this is what a checkpoint stores.
struct TrainingSession {
  TriNet net;
  OptimizerState optimizer;
  Rng rng;
  PseudoLabelSet pseudo;
  std::size_t next_step = 0;  // 0 means not pretrained yet
  std::vector<StepMetrics> history;
};

/// Produces the pseudo-labeled set from the candidate rows of the target pool.
using LabelerFn = std::function<PseudoLabelSet(TriNet& net, const DenseMatrix& candidate_x,
                                               std::span<const std::size_t> candidate_index, std::size_t step)>;

/// The agreement + confidence labeler on F1/F2 eval-mode predictions.
LabelerFn agreement_labeler(double threshold);

TrainingSession make_session(const TrainConfig& cfg, std::size_t input_dim, std::size_t num_classes);

/// Source pretraining: every iteration updates F/F1/F2 with the joint loss and
/// F/Ft with the category loss on source mini-batches.
void pretrain(TrainingSession& s, const LabeledSet& source, const TrainConfig& cfg);

/// Resamples candidates for step k and relabels them from scratch.
PseudoLabelSet relabel(TrainingSession& s, const UnlabeledSet& target, std::size_t step_k, const TrainConfig& cfg,
                       const LabelerFn& labeler);

/// One adaptation step: interleaved updates on L = S + T_l and on T_l, then
/// relabeling with candidate_count(step_k).
StepMetrics adapt_step(TrainingSession& s, const LabeledSet& source, const UnlabeledSet& target,
                       const TrainConfig& cfg, std::size_t step_k, const Evaluation* eval,
                       const LabelerFn& labeler);

/// Pretrain, initial labeling (history row 0), then steps 1..steps_k.
TrainingSession run(const LabeledSet& source, const UnlabeledSet& target, const Evaluation* eval,
                    const TrainConfig& cfg, const LabelerFn& labeler = {});

/// Continues a session (e.g. restored from a checkpoint) up to cfg.steps_k.
void continue_run(TrainingSession& s, const LabeledSet& source, const UnlabeledSet& target,
                  const Evaluation* eval, const TrainConfig& cfg, const LabelerFn& labeler = {});

/// Fraction of argmax-correct predictions in eval mode.
double evaluate(TriNet& net, const LabeledSet& data, Branch branch);

// Metrics CSV (schema version 1). Missing values are written as NA.
void write_metrics_csv(std::span<const StepMetrics> history, std::ostream& os);
std::vector<StepMetrics> read_metrics_csv(std::istream& is);

}  // namespace tritrain

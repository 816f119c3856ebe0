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

#include <filesystem>
#include <iosfwd>

#include "tritrain/trainer.hpp"

namespace tritrain {

// Text checkpoint, format version 1. Doubles are stored as C99 hex floats so
// a save/load cycle is bit-exact. Layout:
//
//   tritrain-checkpoint 1
//   net <input_dim> <num_classes> <lambda> <gate_f12> <gate_ft>
//   part <f|f1|f2|ft> <n_layers>
//     layer <kind> <in> <out> <dropout_rate> <bn_eps> <bn_momentum> <n_params>
//       matrix <rows> <cols> <values...>           (one per param)
//       bnstats <batches_seen> matrix.. matrix..   (batch_norm only)
//   optimizer <kind> <lr> <momentum> <eps> <n_slots>  matrix...
//   rng <mt19937_64 state>
//   session <next_step> <pseudo_step> <n_candidates> <n_entries>
//     pl <target_index> <label> <confidence> <step>   (n_entries lines)
//   end
//
// The metrics history is not part of the checkpoint.

void save_checkpoint(const TrainingSession& s, std::ostream& os);
TrainingSession load_checkpoint(std::istream& is);

void save_checkpoint_file(const TrainingSession& s, const std::filesystem::path& path);
TrainingSession load_checkpoint_file(const std::filesystem::path& path);

}  // namespace tritrain

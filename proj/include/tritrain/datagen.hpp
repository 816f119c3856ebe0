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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tritrain/matrix.hpp"

namespace tritrain {

struct LabeledSet {
  DenseMatrix x;
  std::vector<int> y;

  std::size_t size() const { return x.rows(); }
  bool empty() const { return x.rows() == 0; }
};

struct UnlabeledSet {
  DenseMatrix x;

  std::size_t size() const { return x.rows(); }
};

/// Ground-truth target labels. Training entry points never accept this type;
/// only the evaluation and analysis APIs read it.
class HiddenLabels {
 public:
  HiddenLabels() = default;
  explicit HiddenLabels(std::vector<int> labels) : labels_(std::move(labels)) {}

  std::span<const int> reveal() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

 private:
  std::vector<int> labels_;
};

struct DomainDataset {
  LabeledSet source;
  UnlabeledSet target;
  std::optional<HiddenLabels> target_hidden;
  LabeledSet validation;  // small labeled target split, model selection only
  std::size_t num_classes = 2;

  std::size_t feature_dim() const { return source.x.cols(); }
  // Evaluation view of the target pool (requires hidden labels).
  LabeledSet target_eval_set() const;
  void validate() const;
};

enum class Generator { two_moons, gaussian_blobs };

const char* to_string(Generator g);
Generator generator_from_string(const std::string& name);

struct ShiftSpec {
  Generator generator = Generator::two_moons;
  std::size_t n_source = 500;
  std::size_t n_target = 500;
  std::size_t num_classes = 2;   // fixed at 2 for two_moons
  double rotation_deg = 0.0;     // about the generator's centre
  std::array<double, 2> translation{0.0, 0.0};
  double noise_sigma = 0.1;      // isotropic noise of the base generator
  double target_noise = 0.0;     // extra noise added to target points only
  std::uint64_t seed = 0;

  void validate() const;
};

/// Draws a labeled source set and a shifted target set whose labels are kept
/// hidden. Classes are balanced to within one sample.
DomainDataset generate(const ShiftSpec& spec);

// ---------------------------------------------------------------------------
// Sparse bag-of-words text: `<label> (<index>:<value>)*`, whitespace
// separated, 0-based indices. Labels 0/1 (also -1/+1, read as 0/1).

LabeledSet parse_sparse_bow(std::istream& is, std::size_t dim);
LabeledSet load_sparse_bow(const std::filesystem::path& path, std::size_t dim);
void write_sparse_bow(const LabeledSet& data, std::ostream& os);

// ---------------------------------------------------------------------------
// Dense CSV: header `x0,...,x{d-1},label`, label column last.

void write_labeled_csv(const DenseMatrix& x, std::span<const int> y, std::ostream& os);
LabeledSet read_labeled_csv(std::istream& is);
LabeledSet load_labeled_csv(const std::filesystem::path& path);

/// Builds a dataset from a labeled source file and a target file whose label
/// column becomes HiddenLabels.
DomainDataset dataset_from_parts(LabeledSet source, LabeledSet target_with_labels, std::size_t num_classes);

void write_shift_spec(const ShiftSpec& spec, std::ostream& os);

/// Moves `val_count` target rows (chosen by `seed`) into the validation split.
DomainDataset split(DomainDataset dataset, std::size_t val_count, std::uint64_t seed);

/// Per-feature standardisation fitted on source data only.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // 1 / std (1 for constant features)

  static Standardizer fit(const DenseMatrix& source);
  DenseMatrix apply(const DenseMatrix& x) const;
  void apply_to(DomainDataset& d) const;
};

}  // namespace tritrain

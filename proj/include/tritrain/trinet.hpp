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
#include <span>
#include <string>
#include <vector>

#include "tritrain/matrix.hpp"
#include "tritrain/nnlib.hpp"

namespace tritrain {

enum class Branch { f1, f2, ft };
// Parameter groups: the shared extractor and the three branches.
enum class Part { f, f1, f2, ft };

const char* to_string(Branch b);
Branch branch_from_string(const std::string& name);

/// Which branch losses may push gradients into the shared extractor.
struct GradientGates {
  bool from_f1_f2 = true;
  bool from_ft = true;

  // At least one gate must be open.
  void validate() const;
  friend bool operator==(const GradientGates&, const GradientGates&) = default;
};

/// Architecture knobs for a dense tri-branch network.
///
/// F    = [affine(hidden_i) -> activation]* -> batch_norm (when use_bn)
/// F1/2 = dropout(dropout_labeling) -> [affine -> activation]* -> affine(num_classes)
/// Ft   = dropout(dropout_target)   -> [affine -> activation]* -> affine(num_classes)
struct NetConfig {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden{16};
  LayerKind activation = LayerKind::relu;
  bool use_bn = true;
  std::vector<std::size_t> branch_hidden;
  double dropout_labeling = 0.0;
  double dropout_target = 0.0;
  std::size_t num_classes = 2;
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;

  void validate() const;
  std::vector<LayerSpec> extractor_specs() const;
  std::vector<LayerSpec> branch_specs(double dropout_rate) const;
  std::size_t feature_dim() const;
};

struct BranchOutput {
  DenseMatrix probs;
  std::vector<int> predicted_class;  // argmax, ties to the lowest index
  std::vector<double> max_prob;

  std::size_t rows() const { return probs.rows(); }
};

BranchOutput make_branch_output(DenseMatrix probs);

struct WeightDivergence {
  double value = 0.0;
  DenseMatrix grad_w1;
  DenseMatrix grad_w2;
};

/// sum_ij |(W1^T W2)_ij| with the sign subgradient (sign(0) = 0).
WeightDivergence weight_divergence(const DenseMatrix& w1, const DenseMatrix& w2);

class TriNet {
 public:
  TriNet() = default;
  TriNet(const NetConfig& cfg, double lambda, GradientGates gates);
  // Reassembles a network from stored stacks (checkpoint loading).
  TriNet(Sequential f, Sequential f1, Sequential f2, Sequential ft, std::size_t num_classes, double lambda,
         GradientGates gates);

  /// Initialises every part from an independent sub-seed of `seed`, so the
  /// three branches start from different weights.
  void init(std::uint64_t seed);

  BranchOutput forward(const DenseMatrix& x, Branch branch, Mode mode, Rng& rng);
  DenseMatrix logits(const DenseMatrix& x, Branch branch, Mode mode, Rng& rng);
  DenseMatrix features(const DenseMatrix& x, Mode mode, Rng& rng);

  Sequential& part(Part p);
  const Sequential& part(Part p) const;
  Sequential& branch(Branch b) { return part(part_of(b)); }
  static Part part_of(Branch b);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t num_classes() const { return num_classes_; }
  double lambda() const { return lambda_; }
  void set_lambda(double lambda);
  const GradientGates& gates() const { return gates_; }
  void set_gates(GradientGates gates);

  // Parameter/gradient references with stable optimiser slot ids.
  std::vector<ParamRef> parameters(std::span<const Part> parts);
  void zero_grad(std::span<const Part> parts);

  // First affine weights of F1 and F2, the ones the divergence penalty ties.
  DenseMatrix& labeling_weight(Branch b);

  friend bool same_parameters(const TriNet& a, const TriNet& b);

 private:
  void check_invariants() const;

  Sequential f_, f1_, f2_, ft_;
  std::size_t input_dim_ = 0;
  std::size_t num_classes_ = 0;
  double lambda_ = 0.0;
  GradientGates gates_;
};

/// Bit-exact comparison of every parameter and BN running statistic.
bool same_parameters(const TriNet& a, const TriNet& b);
// Trainable parameters of one part only; BN running statistics are ignored.
bool same_part_parameters(const TriNet& a, const TriNet& b, Part p);

struct JointLoss {
  double objective = 0.0;  // E = mean CE(F1) + mean CE(F2) + lambda * penalty
  double ce_f1 = 0.0;
  double ce_f2 = 0.0;
  double penalty = 0.0;
};

/// Labeling-branch objective. Fills gradients of F1 and F2 and, when
/// gates.from_f1_f2 is open, of F. Gradients of the touched parts are zeroed
/// first.
JointLoss joint_labeling_loss(TriNet& net, const DenseMatrix& x, std::span<const int> y, Rng& rng,
                              Mode mode = Mode::train);

/// Mean cross-entropy of Ft o F. Fills Ft gradients and, when gates.from_ft
/// is open, F gradients.
double target_loss(TriNet& net, const DenseMatrix& x, std::span<const int> y, Rng& rng, Mode mode = Mode::train);

// One optimiser update driven by the corresponding loss. Parts whose gate is
// closed are neither differentiated nor stepped.
JointLoss labeling_update(TriNet& net, OptimizerState& opt, const DenseMatrix& x, std::span<const int> y, Rng& rng);
double target_update(TriNet& net, OptimizerState& opt, const DenseMatrix& x, std::span<const int> y, Rng& rng);

}  // namespace tritrain

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
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tritrain/matrix.hpp"

namespace tritrain {

using Rng = std::mt19937_64;

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// Layer specifications

enum class LayerKind { affine, sigmoid, relu, batch_norm, dropout };

const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::affine;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  double dropout_rate = 0.0;
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;

  static LayerSpec affine(std::size_t in, std::size_t out) { return {LayerKind::affine, in, out}; }
  static LayerSpec sigmoid(std::size_t d) { return {LayerKind::sigmoid, d, d}; }
  static LayerSpec relu(std::size_t d) { return {LayerKind::relu, d, d}; }
  static LayerSpec batch_norm(std::size_t d, double eps = 1e-5, double momentum = 0.9) {
    return {LayerKind::batch_norm, d, d, 0.0, eps, momentum};
  }
  static LayerSpec dropout(std::size_t d, double rate) { return {LayerKind::dropout, d, d, rate}; }

  // Throws ConfigError on an invalid spec.
  void validate() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// ---------------------------------------------------------------------------
// Stateless primitives

DenseMatrix affine_forward(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& b);

struct AffineGrads {
  DenseMatrix dx;
  DenseMatrix dw;
  DenseMatrix db;
};
AffineGrads affine_backward(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& grad_out);

DenseMatrix sigmoid_forward(const DenseMatrix& x);
// Takes the forward *output*.
DenseMatrix sigmoid_backward(const DenseMatrix& y, const DenseMatrix& grad_out);
DenseMatrix relu_forward(const DenseMatrix& x);
// Takes the forward *input*.
DenseMatrix relu_backward(const DenseMatrix& x, const DenseMatrix& grad_out);

/// Row-wise softmax, stabilised by subtracting the row max.
DenseMatrix softmax(const DenseMatrix& logits);

struct LossResult {
  double loss = 0.0;
  DenseMatrix grad;
};

/// Mean softmax cross-entropy over rows and its gradient w.r.t. the logits,
/// (softmax - onehot) / B. Per-row log-probabilities are clamped at -700.
LossResult softmax_cross_entropy(const DenseMatrix& logits, std::span<const int> labels);

struct BatchNormStats {
  DenseMatrix running_mean;
  DenseMatrix running_var;
  std::size_t batches_seen = 0;
  bool populated() const { return batches_seen > 0; }
};

struct BatchNormCache {
  DenseMatrix x_hat;
  DenseMatrix inv_std;  // 1 x d
  bool train = true;
};

struct BatchNormOutput {
  DenseMatrix y;
  BatchNormCache cache;
};

/// Training-mode batch normalisation: standardise each column with the batch
/// mean and biased variance, then scale by gamma and shift by beta. Running
/// statistics follow r <- momentum * r + (1 - momentum) * batch.
BatchNormOutput batch_norm_train(const DenseMatrix& x, const DenseMatrix& gamma, const DenseMatrix& beta, double eps,
                                 double momentum, BatchNormStats& stats);

/// Inference-mode batch normalisation using the running statistics.
DenseMatrix batch_norm_eval(const DenseMatrix& x, const DenseMatrix& gamma, const DenseMatrix& beta, double eps,
                            const BatchNormStats& stats);
BatchNormOutput batch_norm_eval_cached(const DenseMatrix& x, const DenseMatrix& gamma, const DenseMatrix& beta,
                                       double eps, const BatchNormStats& stats);

struct BatchNormGrads {
  DenseMatrix dx;
  DenseMatrix dgamma;
  DenseMatrix dbeta;
};
BatchNormGrads batch_norm_backward(const BatchNormCache& cache, const DenseMatrix& gamma, const DenseMatrix& grad_out);

struct DropoutOutput {
  DenseMatrix y;
  DenseMatrix mask;  // entries are 0 or 1/(1-rate)
};

/// Inverted dropout. Eval mode is the identity, so there is no eval variant.
DropoutOutput dropout_train(const DenseMatrix& x, double rate, Rng& rng);

/// Glorot-uniform weights in [-sqrt(6/(in+out)), +sqrt(6/(in+out))], zero bias.
void init_affine(DenseMatrix& w, DenseMatrix& b, Rng& rng);

// ---------------------------------------------------------------------------
// Optimisers

enum class OptimizerKind { momentum_sgd, adagrad };

const char* to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

/// Per-parameter optimiser memory. `slots[i]` is the velocity (momentum SGD)
/// or squared-gradient accumulator (Adagrad) of the parameter registered
/// under slot id i; slots are sized lazily on first use.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::momentum_sgd;
  double lr = 0.01;
  double momentum = 0.9;
  double adagrad_eps = 1e-8;
  std::vector<DenseMatrix> slots;

  void validate() const;
  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

struct ParamRef {
  DenseMatrix* value = nullptr;
  const DenseMatrix* grad = nullptr;
  std::size_t slot = 0;
};

// v <- mu * v - lr * g ; p <- p + v
void momentum_sgd_step(OptimizerState& state, std::span<const ParamRef> params);
// a <- a + g^2 ; p <- p - lr * g / (sqrt(a) + eps)
void adagrad_step(OptimizerState& state, std::span<const ParamRef> params);
// Dispatches on state.kind.
void optimizer_step(OptimizerState& state, std::span<const ParamRef> params);

// ---------------------------------------------------------------------------
// Finite differences

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every entry.
DenseMatrix finite_difference_gradient(const std::function<double(const DenseMatrix&)>& f, const DenseMatrix& x,
                                       double h = 1e-5);

/// max_i |a_i - b_i| / max(|a_i| + |b_i|, floor). Used by gradient checks.
double max_relative_error(const DenseMatrix& analytic, const DenseMatrix& numeric, double floor = 1e-8);

// ---------------------------------------------------------------------------
// Sequential stacks

struct Layer {
  LayerSpec spec;
  // affine: {W (in x out), b (1 x out)}; batch_norm: {gamma, beta}; else empty.
  std::vector<DenseMatrix> params;
  std::vector<DenseMatrix> grads;
  BatchNormStats bn_stats;

  // Forward caches consumed by backward().
  DenseMatrix input;
  DenseMatrix output;
  BatchNormCache bn_cache;
  DenseMatrix dropout_mask;
  bool dropout_active = false;
};

/// A chain of layers with cached forward state. backward() accumulates into
/// the layer gradients; call zero_grad() first.
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<LayerSpec> specs);

  void init(Rng& rng);

  DenseMatrix forward(const DenseMatrix& x, Mode mode, Rng& rng);
  // Returns the gradient w.r.t. the input of the last forward().
  DenseMatrix backward(const DenseMatrix& grad_out);
  void zero_grad();

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::vector<LayerSpec> specs() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  // First affine layer, or nullptr.
  Layer* first_affine();
  const Layer* first_affine() const;

  std::size_t parameter_count() const;

 private:
  std::vector<Layer> layers_;
};

}  // namespace tritrain

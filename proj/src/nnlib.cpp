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

#include "tritrain/nnlib.hpp"

#include <algorithm>
#include <cmath>

#include "tritrain/errors.hpp"
#include "tritrain/kernels.hpp"

namespace tritrain {

namespace {


void require_row_vector(const DenseMatrix& v, std::size_t cols, const char* what) {
  if (v.rows() != 1 || v.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected 1x" + std::to_string(cols) + ", got " + v.shape_str());
  }
}

}  // namespace

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::affine: return "affine";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::relu: return "relu";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::dropout: return "dropout";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (auto k : {LayerKind::affine, LayerKind::sigmoid, LayerKind::relu, LayerKind::batch_norm, LayerKind::dropout})
    if (name == to_string(k)) return k;
  throw ConfigError("unknown layer kind '" + name + "'");
}

void LayerSpec::validate() const {
  if (kind == LayerKind::affine) {
    if (in_dim == 0 || out_dim == 0) throw ConfigError("affine layer needs positive in_dim and out_dim");
    return;
  }
  if (in_dim == 0 || in_dim != out_dim)
    throw ConfigError(std::string(to_string(kind)) + " layer requires in_dim == out_dim > 0");
  if (kind == LayerKind::dropout && !(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(dropout_rate));
  if (kind == LayerKind::batch_norm) {
    if (!(bn_eps > 0.0)) throw ConfigError("batch_norm eps must be positive");
    if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw ConfigError("batch_norm momentum must be in (0, 1)");
  }
}

DenseMatrix affine_forward(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& b) {
  if (x.cols() != w.rows())
    throw DimensionError("affine_forward: x " + x.shape_str() + " incompatible with W " + w.shape_str());
  require_row_vector(b, w.cols(), "affine_forward bias");
  DenseMatrix y = kernels::matmul(x, w);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < y.cols(); ++c) row[c] += b[c];
  }
  return y;
}

AffineGrads affine_backward(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& grad_out) {
  if (x.cols() != w.rows() || grad_out.rows() != x.rows() || grad_out.cols() != w.cols())
    throw DimensionError("affine_backward: shapes x " + x.shape_str() + ", W " + w.shape_str() + ", dy " +
                         grad_out.shape_str());
  AffineGrads g;
  g.dx = kernels::matmul_a_bt(grad_out, w);
  g.dw = kernels::matmul_at_b(x, grad_out);
  g.db = DenseMatrix(1, w.cols());
  for (std::size_t r = 0; r < grad_out.rows(); ++r)
    for (std::size_t c = 0; c < grad_out.cols(); ++c) g.db[c] += grad_out(r, c);
  return g;
}

DenseMatrix sigmoid_forward(const DenseMatrix& x) {
  DenseMatrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    // Split on sign so exp never overflows.
    if (v >= 0) {
      y[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      y[i] = e / (1.0 + e);
    }
  }
  return y;
}

DenseMatrix sigmoid_backward(const DenseMatrix& y, const DenseMatrix& grad_out) {
  require_same_shape(y, grad_out, "sigmoid_backward");
  DenseMatrix dx(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = grad_out[i] * y[i] * (1.0 - y[i]);
  return dx;
}

DenseMatrix relu_forward(const DenseMatrix& x) {
  DenseMatrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

DenseMatrix relu_backward(const DenseMatrix& x, const DenseMatrix& grad_out) {
  require_same_shape(x, grad_out, "relu_backward");
  DenseMatrix dx(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
  return dx;
}

DenseMatrix softmax(const DenseMatrix& logits) {
  DenseMatrix p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto out = p.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - mx);
      z += out[c];
    }
    for (auto& v : out) v /= z;
  }
  return p;
}

LossResult softmax_cross_entropy(const DenseMatrix& logits, std::span<const int> labels) {
  const std::size_t batch = logits.rows(), k = logits.cols();
  if (k < 2) throw InputError("softmax_cross_entropy: need at least 2 classes");
  if (labels.size() != batch)
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(batch) + " rows");
  if (batch == 0) throw InputError("softmax_cross_entropy: empty batch");
  LossResult res;
  res.grad = DenseMatrix(batch, k);
  const double inv_b = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= k)
      throw InputError("softmax_cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                       std::to_string(k) + ")");
    auto in = logits.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (double v : in) z += std::exp(v - mx);
    const double log_z = std::log(z);
    const double log_p = in[static_cast<std::size_t>(y)] - mx - log_z;
    total -= log_p;
    auto g = res.grad.row(r);
    for (std::size_t c = 0; c < k; ++c) g[c] = std::exp(in[c] - mx - log_z) * inv_b;
    g[static_cast<std::size_t>(y)] -= inv_b;
  }
  res.loss = total * inv_b;
  return res;
}

BatchNormOutput batch_norm_train(const DenseMatrix& x, const DenseMatrix& gamma, const DenseMatrix& beta, double eps,
                                 double momentum, BatchNormStats& stats) {
  const std::size_t batch = x.rows(), d = x.cols();
  if (batch < 2) throw InputError("batch_norm_train: need a batch of at least 2 rows, got " + std::to_string(batch));
  require_row_vector(gamma, d, "batch_norm gamma");
  require_row_vector(beta, d, "batch_norm beta");

  DenseMatrix mean(1, d), var(1, d);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t c = 0; c < d; ++c) mean[c] += x(r, c);
  for (std::size_t c = 0; c < d; ++c) mean[c] /= static_cast<double>(batch);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double dev = x(r, c) - mean[c];
      var[c] += dev * dev;
    }
  for (std::size_t c = 0; c < d; ++c) var[c] /= static_cast<double>(batch);

  BatchNormOutput out;
  out.cache.train = true;
  out.cache.inv_std = DenseMatrix(1, d);
  for (std::size_t c = 0; c < d; ++c) out.cache.inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
  out.cache.x_hat = DenseMatrix(batch, d);
  out.y = DenseMatrix(batch, d);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double xh = (x(r, c) - mean[c]) * out.cache.inv_std[c];
      out.cache.x_hat(r, c) = xh;
      out.y(r, c) = gamma[c] * xh + beta[c];
    }

  if (!stats.populated() || !stats.running_mean.same_shape(mean)) {
    stats.running_mean = mean;
    stats.running_var = var;
  } else {
    for (std::size_t c = 0; c < d; ++c) {
      stats.running_mean[c] = momentum * stats.running_mean[c] + (1.0 - momentum) * mean[c];
      stats.running_var[c] = momentum * stats.running_var[c] + (1.0 - momentum) * var[c];
    }
  }
  ++stats.batches_seen;
  return out;
}

BatchNormOutput batch_norm_eval_cached(const DenseMatrix& x, const DenseMatrix& gamma, const DenseMatrix& beta,
                                       double eps, const BatchNormStats& stats) {
  if (!stats.populated()) throw StateError("batch_norm_eval: running statistics are not populated");
  const std::size_t d = x.cols();
  require_row_vector(gamma, d, "batch_norm gamma");
  require_row_vector(beta, d, "batch_norm beta");
  require_row_vector(stats.running_mean, d, "batch_norm running mean");
  BatchNormOutput out;
  out.cache.train = false;
  out.cache.inv_std = DenseMatrix(1, d);
  for (std::size_t c = 0; c < d; ++c) out.cache.inv_std[c] = 1.0 / std::sqrt(stats.running_var[c] + eps);
  out.cache.x_hat = DenseMatrix(x.rows(), d);
  out.y = DenseMatrix(x.rows(), d);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double xh = (x(r, c) - stats.running_mean[c]) * out.cache.inv_std[c];
      out.cache.x_hat(r, c) = xh;
      out.y(r, c) = gamma[c] * xh + beta[c];
    }
  return out;
}

DenseMatrix batch_norm_eval(const DenseMatrix& x, const DenseMatrix& gamma, const DenseMatrix& beta, double eps,
                            const BatchNormStats& stats) {
  return batch_norm_eval_cached(x, gamma, beta, eps, stats).y;
}

BatchNormGrads batch_norm_backward(const BatchNormCache& cache, const DenseMatrix& gamma, const DenseMatrix& grad_out) {
  require_same_shape(cache.x_hat, grad_out, "batch_norm_backward");
  const std::size_t batch = grad_out.rows(), d = grad_out.cols();
  BatchNormGrads g;
  g.dgamma = DenseMatrix(1, d);
  g.dbeta = DenseMatrix(1, d);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      g.dgamma[c] += grad_out(r, c) * cache.x_hat(r, c);
      g.dbeta[c] += grad_out(r, c);
    }
  g.dx = DenseMatrix(batch, d);
  if (!cache.train) {
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t c = 0; c < d; ++c) g.dx(r, c) = grad_out(r, c) * gamma[c] * cache.inv_std[c];
    return g;
  }
  // dx = inv_std / B * (B * dxh - sum(dxh) - x_hat * sum(dxh * x_hat)), dxh = dy * gamma
  const double nb = static_cast<double>(batch);
  for (std::size_t c = 0; c < d; ++c) {
    const double sum_dxh = g.dbeta[c] * gamma[c];
    const double sum_dxh_xh = g.dgamma[c] * gamma[c];
    for (std::size_t r = 0; r < batch; ++r) {
      const double dxh = grad_out(r, c) * gamma[c];
      g.dx(r, c) = cache.inv_std[c] / nb * (nb * dxh - sum_dxh - cache.x_hat(r, c) * sum_dxh_xh);
    }
  }
  return g;
}

DropoutOutput dropout_train(const DenseMatrix& x, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  DropoutOutput out{x, DenseMatrix(x.rows(), x.cols(), 1.0)};
  if (rate == 0.0) return out;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = unif(rng) < rate ? 0.0 : keep_scale;
    out.mask[i] = m;
    out.y[i] = x[i] * m;
  }
  return out;
}

void init_affine(DenseMatrix& w, DenseMatrix& b, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  std::uniform_real_distribution<double> unif(-limit, limit);
  for (auto& v : w.values()) v = unif(rng);
  b.fill(0.0);
}

const char* to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adagrad ? "adagrad" : "momentum_sgd";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "momentum_sgd" || name == "momentum" || name == "sgd") return OptimizerKind::momentum_sgd;
  if (name == "adagrad") return OptimizerKind::adagrad;
  throw ConfigError("unknown optimizer '" + name + "' (expected momentum_sgd or adagrad)");
}

void OptimizerState::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(adagrad_eps >= 0.0)) throw ConfigError("adagrad eps must be non-negative");
}

namespace {

DenseMatrix& slot_for(OptimizerState& state, const ParamRef& p) {
  if (p.value == nullptr || p.grad == nullptr) throw InputError("optimizer: null parameter reference");
  require_same_shape(*p.value, *p.grad, "optimizer step");
  if (state.slots.size() <= p.slot) state.slots.resize(p.slot + 1);
  DenseMatrix& s = state.slots[p.slot];
  if (s.empty() && !p.value->empty()) s = DenseMatrix(p.value->rows(), p.value->cols());
  require_same_shape(s, *p.value, "optimizer slot");
  return s;
}

}  // namespace

void momentum_sgd_step(OptimizerState& state, std::span<const ParamRef> params) {
  for (const auto& p : params) {
    DenseMatrix& v = slot_for(state, p);
    DenseMatrix& w = *p.value;
    const DenseMatrix& g = *p.grad;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = state.momentum * v[i] - state.lr * g[i];
      w[i] += v[i];
    }
  }
}

void adagrad_step(OptimizerState& state, std::span<const ParamRef> params) {
  for (const auto& p : params) {
    DenseMatrix& a = slot_for(state, p);
    DenseMatrix& w = *p.value;
    const DenseMatrix& g = *p.grad;
    for (std::size_t i = 0; i < w.size(); ++i) {
      a[i] += g[i] * g[i];
      if (g[i] != 0.0) w[i] -= state.lr * g[i] / (std::sqrt(a[i]) + state.adagrad_eps);
    }
  }
}

void optimizer_step(OptimizerState& state, std::span<const ParamRef> params) {
  if (state.kind == OptimizerKind::adagrad) {
    adagrad_step(state, params);
  } else {
    momentum_sgd_step(state, params);
  }
}

DenseMatrix finite_difference_gradient(const std::function<double(const DenseMatrix&)>& f, const DenseMatrix& x,
                                       double h) {
  DenseMatrix grad(x.rows(), x.cols());
  DenseMatrix probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(const DenseMatrix& analytic, const DenseMatrix& numeric, double floor) {
  require_same_shape(analytic, numeric, "max_relative_error");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max(std::abs(analytic[i]) + std::abs(numeric[i]), floor);
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

// ---------------------------------------------------------------------------

Sequential::Sequential(std::vector<LayerSpec> specs) {
  std::size_t prev = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    s.validate();
    if (i > 0 && s.in_dim != prev)
      throw ConfigError("layer " + std::to_string(i) + " (" + to_string(s.kind) + ") expects input dim " +
                        std::to_string(s.in_dim) + " but previous layer outputs " + std::to_string(prev));
    prev = s.out_dim;
    Layer layer;
    layer.spec = s;
    if (s.kind == LayerKind::affine) {
      layer.params = {DenseMatrix(s.in_dim, s.out_dim), DenseMatrix(1, s.out_dim)};
    } else if (s.kind == LayerKind::batch_norm) {
      layer.params = {DenseMatrix(1, s.out_dim, 1.0), DenseMatrix(1, s.out_dim, 0.0)};
    }
    for (const auto& p : layer.params) layer.grads.emplace_back(p.rows(), p.cols());
    layers_.push_back(std::move(layer));
  }
}

void Sequential::init(Rng& rng) {
  for (auto& layer : layers_) {
    if (layer.spec.kind == LayerKind::affine) {
      init_affine(layer.params[0], layer.params[1], rng);
    } else if (layer.spec.kind == LayerKind::batch_norm) {
      layer.params[0].fill(1.0);
      layer.params[1].fill(0.0);
      layer.bn_stats = {};
    }
  }
}

DenseMatrix Sequential::forward(const DenseMatrix& x, Mode mode, Rng& rng) {
  if (!layers_.empty() && x.cols() != in_dim())
    throw InputError("forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                     std::to_string(in_dim()));
  DenseMatrix h = x;
  for (auto& layer : layers_) {
    layer.input = h;
    switch (layer.spec.kind) {
      case LayerKind::affine:
        h = affine_forward(h, layer.params[0], layer.params[1]);
        break;
      case LayerKind::sigmoid:
        h = sigmoid_forward(h);
        break;
      case LayerKind::relu:
        h = relu_forward(h);
        break;
      case LayerKind::batch_norm: {
        auto out = mode == Mode::train
                       ? batch_norm_train(h, layer.params[0], layer.params[1], layer.spec.bn_eps,
                                          layer.spec.bn_momentum, layer.bn_stats)
                       : batch_norm_eval_cached(h, layer.params[0], layer.params[1], layer.spec.bn_eps,
                                                layer.bn_stats);
        h = std::move(out.y);
        layer.bn_cache = std::move(out.cache);
        break;
      }
      case LayerKind::dropout:
        if (mode == Mode::train && layer.spec.dropout_rate > 0.0) {
          auto out = dropout_train(h, layer.spec.dropout_rate, rng);
          h = std::move(out.y);
          layer.dropout_mask = std::move(out.mask);
          layer.dropout_active = true;
        } else {
          layer.dropout_active = false;
        }
        break;
    }
    layer.output = h;
  }
  return h;
}

DenseMatrix Sequential::backward(const DenseMatrix& grad_out) {
  DenseMatrix g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    Layer& layer = *it;
    switch (layer.spec.kind) {
      case LayerKind::affine: {
        auto ag = affine_backward(layer.input, layer.params[0], g);
        for (std::size_t i = 0; i < ag.dw.size(); ++i) layer.grads[0][i] += ag.dw[i];
        for (std::size_t i = 0; i < ag.db.size(); ++i) layer.grads[1][i] += ag.db[i];
        g = std::move(ag.dx);
        break;
      }
      case LayerKind::sigmoid:
        g = sigmoid_backward(layer.output, g);
        break;
      case LayerKind::relu:
        g = relu_backward(layer.input, g);
        break;
      case LayerKind::batch_norm: {
        auto bg = batch_norm_backward(layer.bn_cache, layer.params[0], g);
        for (std::size_t i = 0; i < bg.dgamma.size(); ++i) layer.grads[0][i] += bg.dgamma[i];
        for (std::size_t i = 0; i < bg.dbeta.size(); ++i) layer.grads[1][i] += bg.dbeta[i];
        g = std::move(bg.dx);
        break;
      }
      case LayerKind::dropout:
        if (layer.dropout_active) {
          require_same_shape(layer.dropout_mask, g, "dropout backward");
          for (std::size_t i = 0; i < g.size(); ++i) g[i] *= layer.dropout_mask[i];
        }
        break;
    }
  }
  return g;
}

void Sequential::zero_grad() {
  for (auto& layer : layers_)
    for (auto& g : layer.grads) g.fill(0.0);
}

std::size_t Sequential::in_dim() const { return layers_.empty() ? 0 : layers_.front().spec.in_dim; }
std::size_t Sequential::out_dim() const { return layers_.empty() ? 0 : layers_.back().spec.out_dim; }

std::vector<LayerSpec> Sequential::specs() const {
  std::vector<LayerSpec> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) out.push_back(l.spec);
  return out;
}

Layer* Sequential::first_affine() {
  for (auto& l : layers_)
    if (l.spec.kind == LayerKind::affine) return &l;
  return nullptr;
}

const Layer* Sequential::first_affine() const {
  for (const auto& l : layers_)
    if (l.spec.kind == LayerKind::affine) return &l;
  return nullptr;
}

std::size_t Sequential::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_)
    for (const auto& p : l.params) n += p.size();
  return n;
}

}  // namespace tritrain

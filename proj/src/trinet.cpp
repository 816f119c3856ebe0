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

#include "tritrain/trinet.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "tritrain/errors.hpp"
#include "tritrain/kernels.hpp"

namespace tritrain {

namespace {

constexpr std::array<Part, 4> kAllParts{Part::f, Part::f1, Part::f2, Part::ft};

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void add_into(DenseMatrix& dst, const DenseMatrix& src, double scale) {
  require_same_shape(dst, src, "gradient accumulate");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

bool same_stack(const Sequential& a, const Sequential& b, bool with_stats) {
  if (a.layers().size() != b.layers().size()) return false;
  for (std::size_t i = 0; i < a.layers().size(); ++i) {
    const auto& la = a.layers()[i];
    const auto& lb = b.layers()[i];
    if (!(la.spec == lb.spec) || la.params != lb.params) return false;
    if (!with_stats) continue;
    if (la.bn_stats.batches_seen != lb.bn_stats.batches_seen || la.bn_stats.running_mean != lb.bn_stats.running_mean ||
        la.bn_stats.running_var != lb.bn_stats.running_var)
      return false;
  }
  return true;
}

}  // namespace

const char* to_string(Branch b) {
  switch (b) {
    case Branch::f1: return "f1";
    case Branch::f2: return "f2";
    case Branch::ft: return "ft";
  }
  return "?";
}

Branch branch_from_string(const std::string& name) {
  if (name == "f1") return Branch::f1;
  if (name == "f2") return Branch::f2;
  if (name == "ft") return Branch::ft;
  throw ConfigError("unknown branch '" + name + "' (expected f1, f2 or ft)");
}

void GradientGates::validate() const {
  if (!from_f1_f2 && !from_ft)
    throw ConfigError("gradient gates: at least one of from_f1_f2 / from_ft must be enabled");
}

void NetConfig::validate() const {
  if (input_dim == 0) throw ConfigError("net.input_dim must be positive");
  if (num_classes < 2) throw ConfigError("net.num_classes must be at least 2");
  for (auto h : hidden)
    if (h == 0) throw ConfigError("net.hidden sizes must be positive");
  for (auto h : branch_hidden)
    if (h == 0) throw ConfigError("net.branch_hidden sizes must be positive");
  if (activation != LayerKind::relu && activation != LayerKind::sigmoid)
    throw ConfigError("net.activation must be relu or sigmoid");
  if (!(dropout_labeling >= 0.0 && dropout_labeling < 1.0) || !(dropout_target >= 0.0 && dropout_target < 1.0))
    throw ConfigError("net dropout rates must be in [0, 1)");
}

std::size_t NetConfig::feature_dim() const { return hidden.empty() ? input_dim : hidden.back(); }

std::vector<LayerSpec> NetConfig::extractor_specs() const {
  std::vector<LayerSpec> specs;
  std::size_t prev = input_dim;
  for (auto h : hidden) {
    specs.push_back(LayerSpec::affine(prev, h));
    specs.push_back({activation, h, h});
    prev = h;
  }
  if (use_bn) specs.push_back(LayerSpec::batch_norm(prev, bn_eps, bn_momentum));
  return specs;
}

std::vector<LayerSpec> NetConfig::branch_specs(double dropout_rate) const {
  std::vector<LayerSpec> specs;
  std::size_t prev = feature_dim();
  if (dropout_rate > 0.0) specs.push_back(LayerSpec::dropout(prev, dropout_rate));
  for (auto h : branch_hidden) {
    specs.push_back(LayerSpec::affine(prev, h));
    specs.push_back({activation, h, h});
    prev = h;
  }
  specs.push_back(LayerSpec::affine(prev, num_classes));
  return specs;
}

BranchOutput make_branch_output(DenseMatrix probs) {
  BranchOutput out;
  out.predicted_class.resize(probs.rows());
  out.max_prob.resize(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    auto row = probs.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out.predicted_class[r] = static_cast<int>(best);
    out.max_prob[r] = row[best];
  }
  out.probs = std::move(probs);
  return out;
}

WeightDivergence weight_divergence(const DenseMatrix& w1, const DenseMatrix& w2) {
  if (w1.rows() != w2.rows())
    throw DimensionError("weight_divergence: W1 is " + w1.shape_str() + ", W2 is " + w2.shape_str());
  const DenseMatrix gram = kernels::matmul_at_b(w1, w2);  // h1 x h2
  DenseMatrix s(gram.rows(), gram.cols());
  WeightDivergence out;
  for (std::size_t i = 0; i < gram.size(); ++i) {
    out.value += std::abs(gram[i]);
    s[i] = sign(gram[i]);
  }
  // d/dW1 = W2 S^T, d/dW2 = W1 S
  out.grad_w1 = kernels::matmul_a_bt(w2, s);
  out.grad_w2 = kernels::matmul(w1, s);
  return out;
}

// ---------------------------------------------------------------------------

TriNet::TriNet(const NetConfig& cfg, double lambda, GradientGates gates)
    : f_(cfg.extractor_specs()),
      f1_(cfg.branch_specs(cfg.dropout_labeling)),
      f2_(cfg.branch_specs(cfg.dropout_labeling)),
      ft_(cfg.branch_specs(cfg.dropout_target)),
      input_dim_(cfg.input_dim),
      num_classes_(cfg.num_classes),
      lambda_(lambda),
      gates_(gates) {
  cfg.validate();
  check_invariants();
}

TriNet::TriNet(Sequential f, Sequential f1, Sequential f2, Sequential ft, std::size_t num_classes, double lambda,
               GradientGates gates)
    : f_(std::move(f)),
      f1_(std::move(f1)),
      f2_(std::move(f2)),
      ft_(std::move(ft)),
      input_dim_(0),
      num_classes_(num_classes),
      lambda_(lambda),
      gates_(gates) {
  input_dim_ = f_.layers().empty() ? f1_.in_dim() : f_.in_dim();
  check_invariants();
}

void TriNet::check_invariants() const {
  gates_.validate();
  if (!(lambda_ >= 0.0)) throw ConfigError("lambda must be non-negative");
  const std::size_t feat = f_.layers().empty() ? input_dim_ : f_.out_dim();
  for (const Sequential* b : {&f1_, &f2_, &ft_}) {
    if (b->layers().empty()) throw ConfigError("TriNet: empty branch");
    if (b->in_dim() != feat) throw ConfigError("TriNet: branch input dim does not match extractor output");
    if (b->out_dim() != num_classes_) throw ConfigError("TriNet: branch does not output num_classes logits");
    if (b->first_affine() == nullptr) throw ConfigError("TriNet: branch has no affine layer");
  }
  if (f1_.specs() != f2_.specs()) throw ConfigError("TriNet: F1 and F2 must have identical layer shapes");
}

void TriNet::init(std::uint64_t seed) {
  for (std::size_t i = 0; i < kAllParts.size(); ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(0x7a11u + i)};
    Rng rng(seq);
    part(kAllParts[i]).init(rng);
  }
}

Sequential& TriNet::part(Part p) {
  switch (p) {
    case Part::f: return f_;
    case Part::f1: return f1_;
    case Part::f2: return f2_;
    case Part::ft: return ft_;
  }
  return f_;
}

const Sequential& TriNet::part(Part p) const { return const_cast<TriNet*>(this)->part(p); }

Part TriNet::part_of(Branch b) {
  switch (b) {
    case Branch::f1: return Part::f1;
    case Branch::f2: return Part::f2;
    case Branch::ft: return Part::ft;
  }
  return Part::ft;
}

void TriNet::set_lambda(double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  lambda_ = lambda;
}

void TriNet::set_gates(GradientGates gates) {
  gates.validate();
  gates_ = gates;
}

DenseMatrix TriNet::features(const DenseMatrix& x, Mode mode, Rng& rng) {
  if (x.cols() != input_dim_)
    throw InputError("TriNet: input has " + std::to_string(x.cols()) + " columns, expected " +
                     std::to_string(input_dim_));
  return f_.forward(x, mode, rng);
}

DenseMatrix TriNet::logits(const DenseMatrix& x, Branch b, Mode mode, Rng& rng) {
  DenseMatrix feat = features(x, mode, rng);
  return branch(b).forward(feat, mode, rng);
}

BranchOutput TriNet::forward(const DenseMatrix& x, Branch b, Mode mode, Rng& rng) {
  return make_branch_output(softmax(logits(x, b, mode, rng)));
}

std::vector<ParamRef> TriNet::parameters(std::span<const Part> parts) {
  std::vector<ParamRef> refs;
  std::size_t slot = 0;
  for (Part p : kAllParts) {
    const bool wanted = std::find(parts.begin(), parts.end(), p) != parts.end();
    for (auto& layer : part(p).layers()) {
      for (std::size_t i = 0; i < layer.params.size(); ++i, ++slot) {
        if (wanted) refs.push_back({&layer.params[i], &layer.grads[i], slot});
      }
    }
  }
  return refs;
}

void TriNet::zero_grad(std::span<const Part> parts) {
  for (Part p : parts) part(p).zero_grad();
}

DenseMatrix& TriNet::labeling_weight(Branch b) {
  if (b == Branch::ft) throw InputError("labeling_weight: Ft carries no divergence penalty");
  return branch(b).first_affine()->params[0];
}

bool same_part_parameters(const TriNet& a, const TriNet& b, Part p) { return same_stack(a.part(p), b.part(p), false); }

bool same_parameters(const TriNet& a, const TriNet& b) {
  for (Part p : kAllParts)
    if (!same_stack(a.part(p), b.part(p), true)) return false;
  return a.num_classes_ == b.num_classes_ && a.input_dim_ == b.input_dim_;
}

// ---------------------------------------------------------------------------

JointLoss joint_labeling_loss(TriNet& net, const DenseMatrix& x, std::span<const int> y, Rng& rng, Mode mode) {
  if (x.rows() == 0) throw InputError("joint_labeling_loss: empty batch");
  const bool to_f = net.gates().from_f1_f2;
  const std::array<Part, 3> parts{Part::f1, Part::f2, Part::f};
  net.zero_grad(std::span(parts.data(), to_f ? 3 : 2));

  DenseMatrix feat = net.features(x, mode, rng);
  JointLoss out;
  auto l1 = softmax_cross_entropy(net.branch(Branch::f1).forward(feat, mode, rng), y);
  auto l2 = softmax_cross_entropy(net.branch(Branch::f2).forward(feat, mode, rng), y);
  out.ce_f1 = l1.loss;
  out.ce_f2 = l2.loss;

  DenseMatrix dfeat = net.branch(Branch::f1).backward(l1.grad);
  add_into(dfeat, net.branch(Branch::f2).backward(l2.grad), 1.0);

  auto& w1_layer = *net.branch(Branch::f1).first_affine();
  auto& w2_layer = *net.branch(Branch::f2).first_affine();
  auto div = weight_divergence(w1_layer.params[0], w2_layer.params[0]);
  out.penalty = div.value;
  if (net.lambda() != 0.0) {
    add_into(w1_layer.grads[0], div.grad_w1, net.lambda());
    add_into(w2_layer.grads[0], div.grad_w2, net.lambda());
  }
  out.objective = out.ce_f1 + out.ce_f2 + net.lambda() * out.penalty;

  if (to_f) net.part(Part::f).backward(dfeat);
  return out;
}

double target_loss(TriNet& net, const DenseMatrix& x, std::span<const int> y, Rng& rng, Mode mode) {
  if (x.rows() == 0) throw InputError("target_loss: empty batch");
  const bool to_f = net.gates().from_ft;
  const std::array<Part, 2> parts{Part::ft, Part::f};
  net.zero_grad(std::span(parts.data(), to_f ? 2 : 1));

  DenseMatrix feat = net.features(x, mode, rng);
  auto loss = softmax_cross_entropy(net.branch(Branch::ft).forward(feat, mode, rng), y);
  DenseMatrix dfeat = net.branch(Branch::ft).backward(loss.grad);
  if (to_f) net.part(Part::f).backward(dfeat);
  return loss.loss;
}

JointLoss labeling_update(TriNet& net, OptimizerState& opt, const DenseMatrix& x, std::span<const int> y, Rng& rng) {
  JointLoss loss = joint_labeling_loss(net, x, y, rng);
  const std::array<Part, 3> parts{Part::f1, Part::f2, Part::f};
  auto refs = net.parameters(std::span(parts.data(), net.gates().from_f1_f2 ? 3 : 2));
  optimizer_step(opt, refs);
  return loss;
}

double target_update(TriNet& net, OptimizerState& opt, const DenseMatrix& x, std::span<const int> y, Rng& rng) {
  const double loss = target_loss(net, x, y, rng);
  const std::array<Part, 2> parts{Part::ft, Part::f};
  auto refs = net.parameters(std::span(parts.data(), net.gates().from_ft ? 2 : 1));
  optimizer_step(opt, refs);
  return loss;
}

}  // namespace tritrain

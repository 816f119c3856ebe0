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

#include "tritrain/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "tritrain/errors.hpp"

namespace tritrain {

namespace {

constexpr const char* kMetricsHeader =
    "step,acc_f1,acc_f2,acc_ft,labeling_acc,n_pseudo,n_candidates,mean_E,mean_penalty,mean_target_loss,ft_skipped,lr";

bool has_batch_norm(const TriNet& net) {
  for (Part p : {Part::f, Part::f1, Part::f2, Part::ft})
    for (const auto& l : net.part(p).layers())
      if (l.spec.kind == LayerKind::batch_norm) return true;
  return false;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

// Epoch-style sampler: walks a shuffled permutation in fixed-size batches and
// reshuffles when fewer than a full batch remains.
class BatchSampler {
 public:
  BatchSampler(std::size_t pool, std::size_t batch) : batch_(std::min(batch, pool)), perm_(pool) {
    for (std::size_t i = 0; i < pool; ++i) perm_[i] = i;
    pos_ = pool;  // force a shuffle on first use
  }

  std::span<const std::size_t> next(Rng& rng) {
    if (pos_ + batch_ > perm_.size()) {
      std::shuffle(perm_.begin(), perm_.end(), rng);
      pos_ = 0;
    }
    std::span<const std::size_t> out(perm_.data() + pos_, batch_);
    pos_ += batch_;
    return out;
  }

  std::size_t batch() const { return batch_; }

 private:
  std::size_t batch_;
  std::vector<std::size_t> perm_;
  std::size_t pos_ = 0;
};

std::vector<int> gather(std::span<const int> y, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(y[i]);
  return out;
}

void warn(const TrainConfig& cfg, const std::string& msg) {
  if (cfg.verbose) std::clog << "warning: " << msg << '\n';
}

void record_eval(TrainingSession& s, const Evaluation* eval, StepMetrics& m) {
  if (eval == nullptr) return;
  if (!eval->test.empty()) {
    m.acc_f1 = evaluate(s.net, eval->test, Branch::f1);
    m.acc_f2 = evaluate(s.net, eval->test, Branch::f2);
    m.acc_ft = evaluate(s.net, eval->test, Branch::ft);
  }
  if (eval->target_truth) m.labeling_acc = labeling_accuracy(s.pseudo, eval->target_truth->reveal());
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

std::string fmt(double v) { return fmt_opt(v); }

std::optional<double> parse_opt(const std::string& s, std::size_t line_no) {
  if (s == "NA") return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw ParseError("metrics line " + std::to_string(line_no) + ": bad value '" + s + "'");
  return v;
}

std::size_t parse_count(const std::string& s, std::size_t line_no) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') throw ParseError("metrics line " + std::to_string(line_no) + ": bad count '" + s + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

void TrainConfig::validate() const {
  net.validate();
  gates.validate();
  labeling.validate();
  if (batch_labeling == 0 || batch_target == 0) throw ConfigError("batch sizes must be positive");
  if (net.use_bn && (batch_labeling < 2 || batch_target < 2))
    throw ConfigError("batch sizes must be at least 2 when batch normalisation is active");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must be in [0, 1)");
  if (!(lambda >= 0.0)) throw ConfigError("train.lambda must be non-negative");
  if (lr_decay_step && !(lr_decay_to > 0.0)) throw ConfigError("train.lr_decay_to must be positive");
}

LabelerFn agreement_labeler(double threshold) {
  return [threshold](TriNet& net, const DenseMatrix& x, std::span<const std::size_t> idx, std::size_t step) {
    Rng unused;  // eval mode draws nothing
    const BranchOutput p1 = net.forward(x, Branch::f1, Mode::eval, unused);
    const BranchOutput p2 = net.forward(x, Branch::f2, Mode::eval, unused);
    return label_candidates(idx, p1, p2, threshold, step);
  };
}

TrainingSession make_session(const TrainConfig& cfg, std::size_t input_dim, std::size_t num_classes) {
  cfg.validate();
  NetConfig nc = cfg.net;
  nc.input_dim = input_dim;
  nc.num_classes = num_classes;
  TrainingSession s{TriNet(nc, cfg.lambda, cfg.gates), OptimizerState{}, Rng{}, {}, 0, {}};
  s.net.init(cfg.seed);
  s.optimizer.kind = cfg.optimizer;
  s.optimizer.lr = cfg.lr;
  s.optimizer.momentum = cfg.momentum;
  s.optimizer.adagrad_eps = cfg.adagrad_eps;
  s.optimizer.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0x5e55u};
  s.rng.seed(seq);
  return s;
}

void pretrain(TrainingSession& s, const LabeledSet& source, const TrainConfig& cfg) {
  if (source.empty()) throw InputError("pretrain: empty source set");
  if (source.y.size() != source.size()) throw InputError("pretrain: source labels do not match rows");
  const std::size_t iters = cfg.pretrain_iters.value_or(
      cfg.iter_per_phase.value_or(ceil_div(source.size(), cfg.batch_labeling)));
  if (iters > 0 && has_batch_norm(s.net) && source.size() < 2)
    throw InputError("pretrain: batch normalisation needs at least 2 source samples");
  BatchSampler lab(source.size(), cfg.batch_labeling);
  BatchSampler tgt(source.size(), cfg.batch_target);
  StepMetrics m;
  for (std::size_t j = 0; j < iters; ++j) {
    auto idx = lab.next(s.rng);
    auto y = gather(source.y, idx);
    const JointLoss jl = labeling_update(s.net, s.optimizer, source.x.select_rows(idx), y, s.rng);
    m.mean_E += jl.objective;
    m.mean_penalty += jl.penalty;
    auto tidx = tgt.next(s.rng);
    auto ty = gather(source.y, tidx);
    m.mean_target_loss += target_update(s.net, s.optimizer, source.x.select_rows(tidx), ty, s.rng);
  }
  if (iters > 0) {
    m.mean_E /= static_cast<double>(iters);
    m.mean_penalty /= static_cast<double>(iters);
    m.mean_target_loss /= static_cast<double>(iters);
  }
  s.history.clear();
  s.history.push_back(m);
  s.next_step = 1;
}

PseudoLabelSet relabel(TrainingSession& s, const UnlabeledSet& target, std::size_t step_k, const TrainConfig& cfg,
                       const LabelerFn& labeler) {
  const std::size_t n = target.size();
  const auto candidates = sample_candidates(n, candidate_count(step_k, n, cfg.labeling), s.rng);
  if (candidates.empty()) return PseudoLabelSet{{}, step_k, 0};
  const DenseMatrix cx = target.x.select_rows(candidates);
  const LabelerFn& fn = labeler ? labeler : agreement_labeler(cfg.labeling.threshold);
  PseudoLabelSet out = fn(s.net, cx, candidates, step_k);
  out.step = step_k;
  out.n_candidates = candidates.size();
  out.validate(n, s.net.num_classes());
  return out;
}

StepMetrics adapt_step(TrainingSession& s, const LabeledSet& source, const UnlabeledSet& target,
                       const TrainConfig& cfg, std::size_t step_k, const Evaluation* eval,
                       const LabelerFn& labeler) {
  if (step_k == 0) throw InputError("adapt_step: steps are numbered from 1");
  if (cfg.lr_decay_step && step_k > *cfg.lr_decay_step) s.optimizer.lr = cfg.lr_decay_to;

  const auto tl_idx = s.pseudo.indices();
  const auto tl_y = s.pseudo.labels();
  LabeledSet tl{target.x.select_rows(tl_idx), tl_y};
  LabeledSet pool{DenseMatrix::vstack(source.x, tl.x), source.y};
  pool.y.insert(pool.y.end(), tl_y.begin(), tl_y.end());

  const bool bn = has_batch_norm(s.net);
  StepMetrics m;
  m.step = step_k;
  m.ft_skipped = tl.empty() || (bn && tl.size() < 2);
  if (m.ft_skipped) warn(cfg, "step " + std::to_string(step_k) + ": pseudo-labeled set too small, skipping Ft phase");

  const std::size_t iters = cfg.iter_per_phase.value_or(ceil_div(pool.size(), cfg.batch_labeling));
  BatchSampler lab(pool.size(), cfg.batch_labeling);
  BatchSampler tgt(std::max<std::size_t>(tl.size(), 1), cfg.batch_target);
  std::size_t target_updates = 0;
  for (std::size_t j = 0; j < iters; ++j) {
    auto idx = lab.next(s.rng);
    auto y = gather(pool.y, idx);
    const JointLoss jl = labeling_update(s.net, s.optimizer, pool.x.select_rows(idx), y, s.rng);
    m.mean_E += jl.objective;
    m.mean_penalty += jl.penalty;
    if (!m.ft_skipped) {
      auto tidx = tgt.next(s.rng);
      auto ty = gather(tl.y, tidx);
      m.mean_target_loss += target_update(s.net, s.optimizer, tl.x.select_rows(tidx), ty, s.rng);
      ++target_updates;
    }
  }
  if (iters > 0) {
    m.mean_E /= static_cast<double>(iters);
    m.mean_penalty /= static_cast<double>(iters);
  }
  if (target_updates > 0) m.mean_target_loss /= static_cast<double>(target_updates);

  s.pseudo = relabel(s, target, step_k, cfg, labeler);
  m.n_pseudo = s.pseudo.size();
  m.n_candidates = s.pseudo.n_candidates;
  m.lr = s.optimizer.lr;
  record_eval(s, eval, m);
  s.next_step = step_k + 1;
  return m;
}

TrainingSession run(const LabeledSet& source, const UnlabeledSet& target, const Evaluation* eval,
                    const TrainConfig& cfg, const LabelerFn& labeler) {
  if (target.x.rows() > 0 && target.x.cols() != source.x.cols())
    throw InputError("run: source and target feature dims differ");
  TrainingSession s = make_session(cfg, source.x.cols(), cfg.net.num_classes);
  pretrain(s, source, cfg);
  s.pseudo = relabel(s, target, 0, cfg, labeler);
  StepMetrics& row0 = s.history.front();
  row0.step = 0;
  row0.n_pseudo = s.pseudo.size();
  row0.n_candidates = s.pseudo.n_candidates;
  row0.lr = s.optimizer.lr;
  record_eval(s, eval, row0);
  continue_run(s, source, target, eval, cfg, labeler);
  return s;
}

void continue_run(TrainingSession& s, const LabeledSet& source, const UnlabeledSet& target,
                  const Evaluation* eval, const TrainConfig& cfg, const LabelerFn& labeler) {
  if (s.next_step == 0) throw StateError("continue_run: session has not been pretrained");
  for (std::size_t k = s.next_step; k <= cfg.steps_k; ++k)
    s.history.push_back(adapt_step(s, source, target, cfg, k, eval, labeler));
}

double evaluate(TriNet& net, const LabeledSet& data, Branch branch) {
  if (data.empty()) throw InputError("evaluate: empty set");
  if (data.y.size() != data.size()) throw InputError("evaluate: label count mismatch");
  Rng unused;
  const BranchOutput out = net.forward(data.x, branch, Mode::eval, unused);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += out.predicted_class[i] == data.y[i];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void write_metrics_csv(std::span<const StepMetrics> history, std::ostream& os) {
  os << kMetricsHeader << '\n';
  for (const auto& m : history) {
    os << m.step << ',' << fmt_opt(m.acc_f1) << ',' << fmt_opt(m.acc_f2) << ',' << fmt_opt(m.acc_ft) << ','
       << fmt_opt(m.labeling_acc) << ',' << m.n_pseudo << ',' << m.n_candidates << ',' << fmt(m.mean_E) << ','
       << fmt(m.mean_penalty) << ',' << fmt(m.mean_target_loss) << ',' << (m.ft_skipped ? 1 : 0) << ','
       << fmt(m.lr) << '\n';
  }
}

std::vector<StepMetrics> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMetricsHeader) throw ParseError("metrics CSV: unexpected header");
  std::vector<StepMetrics> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12) throw ParseError("metrics line " + std::to_string(line_no) + ": expected 12 fields");
    StepMetrics m;
    m.step = parse_count(cells[0], line_no);
    m.acc_f1 = parse_opt(cells[1], line_no);
    m.acc_f2 = parse_opt(cells[2], line_no);
    m.acc_ft = parse_opt(cells[3], line_no);
    m.labeling_acc = parse_opt(cells[4], line_no);
    m.n_pseudo = parse_count(cells[5], line_no);
    m.n_candidates = parse_count(cells[6], line_no);
    m.mean_E = parse_opt(cells[7], line_no).value_or(0.0);
    m.mean_penalty = parse_opt(cells[8], line_no).value_or(0.0);
    m.mean_target_loss = parse_opt(cells[9], line_no).value_or(0.0);
    m.ft_skipped = parse_count(cells[10], line_no) != 0;
    m.lr = parse_opt(cells[11], line_no).value_or(0.0);
    out.push_back(m);
  }
  return out;
}

}  // namespace tritrain

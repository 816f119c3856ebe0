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

#include "tritrain/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>

#include "json.hpp"
#include "tritrain/errors.hpp"
#include "tritrain/kernels.hpp"
#include "tritrain/nnlib.hpp"

namespace tritrain {

namespace {

using json = nlohmann::json;

std::vector<std::int64_t> error_counts(const std::vector<std::uint8_t>& table, std::size_t n_hyp, std::size_t n_pts,
                                       std::span<const int> labels) {
  std::vector<std::int64_t> out(n_hyp, 0);
  for (std::size_t h = 0; h < n_hyp; ++h) {
    const std::uint8_t* row = table.data() + h * n_pts;
    std::int64_t e = 0;
    for (std::size_t i = 0; i < n_pts; ++i) e += static_cast<int>(row[i]) != labels[i];
    out[h] = e;
  }
  return out;
}

void require_labeled(const LabeledSet& s, const char* what) {
  if (s.empty()) throw InputError(std::string(what) + ": empty sample set");
  if (s.y.size() != s.size()) throw InputError(std::string(what) + ": label count mismatch");
}

// Shared state of the two verifiers.
struct BoundContext {
  std::size_t ms = 0, mt = 0, n_hyp = 0;
  std::vector<std::int64_t> err_s, err_t;
  std::int64_t scaled_gap = 0;  // (d/2) * ms * mt
  std::int64_t scaled_c = 0;    // C * ms * mt
  std::size_t h_star = 0;
};

BoundContext prepare(const HypothesisClass& h, const LabeledSet& source, const LabeledSet& target) {
  require_labeled(source, "bound check source");
  require_labeled(target, "bound check target");
  if (source.x.cols() != target.x.cols()) throw InputError("bound check: feature dims differ");
  if (h.size() == 0) throw InputError("bound check: empty hypothesis class");
  BoundContext ctx;
  ctx.ms = source.size();
  ctx.mt = target.size();
  ctx.n_hyp = h.size();
  ctx.err_s = error_counts(h.predict_all(source.x), ctx.n_hyp, ctx.ms, source.y);
  ctx.err_t = error_counts(h.predict_all(target.x), ctx.n_hyp, ctx.mt, target.y);
  ctx.scaled_gap = empirical_hdh_distance(h, source.x, target.x).scaled_gap;
  const auto ms = static_cast<std::int64_t>(ctx.ms), mt = static_cast<std::int64_t>(ctx.mt);
  ctx.scaled_c = std::numeric_limits<std::int64_t>::max();
  for (std::size_t i = 0; i < ctx.n_hyp; ++i) {
    const std::int64_t joint = ctx.err_s[i] * mt + ctx.err_t[i] * ms;
    if (joint < ctx.scaled_c) {
      ctx.scaled_c = joint;
      ctx.h_star = i;
    }
  }
  return ctx;
}

BoundReport base_report(const BoundContext& ctx) {
  BoundReport r;
  r.n_hypotheses = ctx.n_hyp;
  r.n_source = ctx.ms;
  r.n_target = ctx.mt;
  const double scale = static_cast<double>(ctx.ms) * static_cast<double>(ctx.mt);
  for (std::size_t i = 0; i < ctx.n_hyp; ++i) {
    r.risk_source.push_back(static_cast<double>(ctx.err_s[i]) / static_cast<double>(ctx.ms));
    r.risk_target.push_back(static_cast<double>(ctx.err_t[i]) / static_cast<double>(ctx.mt));
  }
  r.d_hdh = 2.0 * static_cast<double>(ctx.scaled_gap) / scale;
  r.c = static_cast<double>(ctx.scaled_c) / scale;
  r.h_star = ctx.h_star;
  return r;
}

// lhs <= rhs + offset, everything in units of 1 / (ms * mt). With a zero
// offset both sides are exact integers well inside double range.
void check(BoundReport& r, const BoundContext& ctx, std::size_t h, const char* name, std::int64_t lhs,
           std::int64_t rhs, double offset_scaled) {
  const long double l = static_cast<long double>(lhs);
  const long double rr = static_cast<long double>(rhs) + static_cast<long double>(offset_scaled);
  if (l <= rr) return;
  const double scale = static_cast<double>(ctx.ms) * static_cast<double>(ctx.mt);
  r.violations.push_back({h, name, static_cast<double>(l) / scale, static_cast<double>(rr) / scale});
}

double logistic_error(const DenseMatrix& xtr, std::span<const int> ytr, const DenseMatrix& xte,
                      std::span<const int> yte, const ADistanceOptions& opts) {
  const std::size_t d = xtr.cols();
  // Standardise with training-split statistics.
  std::vector<double> mu(d, 0.0), inv_sd(d, 1.0);
  for (std::size_t r = 0; r < xtr.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c) mu[c] += xtr(r, c);
  for (auto& m : mu) m /= static_cast<double>(xtr.rows());
  for (std::size_t c = 0; c < d; ++c) {
    double v = 0.0;
    for (std::size_t r = 0; r < xtr.rows(); ++r) v += (xtr(r, c) - mu[c]) * (xtr(r, c) - mu[c]);
    const double sd = std::sqrt(v / static_cast<double>(xtr.rows()));
    inv_sd[c] = sd > 1e-12 ? 1.0 / sd : 0.0;
  }
  auto standardise = [&](const DenseMatrix& x) {
    DenseMatrix out(x.rows(), d);
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < d; ++c) out(r, c) = (x(r, c) - mu[c]) * inv_sd[c];
    return out;
  };
  const DenseMatrix tr = standardise(xtr), te = standardise(xte);

  DenseMatrix w(d, 2), b(1, 2);
  OptimizerState opt{OptimizerKind::momentum_sgd, opts.lr, 0.9, 1e-8, {}};
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    auto loss = softmax_cross_entropy(affine_forward(tr, w, b), ytr);
    auto g = affine_backward(tr, w, loss.grad);
    const ParamRef refs[] = {{&w, &g.dw, 0}, {&b, &g.db, 1}};
    momentum_sgd_step(opt, refs);
  }
  const DenseMatrix logits = affine_forward(te, w, b);
  std::size_t wrong = 0;
  for (std::size_t r = 0; r < te.rows(); ++r) {
    const int pred = logits(r, 1) > logits(r, 0) ? 1 : 0;
    wrong += pred != yte[r];
  }
  return static_cast<double>(wrong) / static_cast<double>(te.rows());
}

}  // namespace

// ---------------------------------------------------------------------------

HypothesisClass::HypothesisClass(std::vector<Stump> stumps) : stumps_(std::move(stumps)) {
  if (stumps_.size() > kMaxSize)
    throw ConfigError("hypothesis class has " + std::to_string(stumps_.size()) + " members, limit is " +
                      std::to_string(kMaxSize));
}

HypothesisClass HypothesisClass::stumps_for(const DenseMatrix& points, std::size_t max_thresholds_per_feature) {
  std::vector<Stump> out;
  const double neg_inf = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < points.cols(); ++f) {
    std::vector<double> vals;
    vals.reserve(points.rows());
    for (std::size_t r = 0; r < points.rows(); ++r) vals.push_back(points(r, f));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    std::vector<double> mids;
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) mids.push_back(0.5 * (vals[i] + vals[i + 1]));
    std::vector<double> chosen;
    if (mids.size() <= max_thresholds_per_feature) {
      chosen = mids;
    } else {
      // Interior quantiles of the midpoints: k thresholds split them into k + 1 runs.
      const std::size_t k = max_thresholds_per_feature;
      for (std::size_t j = 1; j <= k; ++j) chosen.push_back(mids[j * mids.size() / (k + 1)]);
      chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
    }
    for (int pol : {1, -1}) {
      out.push_back({f, neg_inf, pol});
      for (double t : chosen) out.push_back({f, t, pol});
    }
  }
  return HypothesisClass(std::move(out));
}

std::vector<std::uint8_t> HypothesisClass::predict_all(const DenseMatrix& x) const {
  std::vector<std::uint8_t> table(stumps_.size() * x.rows());
  for (std::size_t h = 0; h < stumps_.size(); ++h) {
    if (stumps_[h].feature >= x.cols()) throw DimensionError("stump feature index exceeds input dimension");
    for (std::size_t i = 0; i < x.rows(); ++i)
      table[h * x.rows() + i] = static_cast<std::uint8_t>(stumps_[h].predict(x.row(i)));
  }
  return table;
}

HdhDistance empirical_hdh_distance(const HypothesisClass& h, const DenseMatrix& source_x,
                                   const DenseMatrix& target_x) {
  if (source_x.rows() == 0 || target_x.rows() == 0) throw InputError("empirical_hdh_distance: empty sample set");
  if (source_x.cols() != target_x.cols()) throw InputError("empirical_hdh_distance: feature dims differ");
  const DenseMatrix both = DenseMatrix::vstack(source_x, target_x);
  const auto table = h.predict_all(both);
  kernels::PredictionTable t{table, h.size(), source_x.rows(), target_x.rows()};
  const auto best = kernels::max_pair_disagreement_gap(t);
  HdhDistance out;
  out.scaled_gap = best.scaled_gap;
  out.first = best.first;
  out.second = best.second;
  out.value = 2.0 * static_cast<double>(best.scaled_gap) /
              (static_cast<double>(source_x.rows()) * static_cast<double>(target_x.rows()));
  return out;
}

IdealJoint ideal_joint_error(const HypothesisClass& h, const LabeledSet& source, const LabeledSet& target) {
  require_labeled(source, "ideal_joint_error source");
  require_labeled(target, "ideal_joint_error target");
  if (h.size() == 0) throw InputError("ideal_joint_error: empty hypothesis class");
  const auto es = error_counts(h.predict_all(source.x), h.size(), source.size(), source.y);
  const auto et = error_counts(h.predict_all(target.x), h.size(), target.size(), target.y);
  const auto ms = static_cast<std::int64_t>(source.size()), mt = static_cast<std::int64_t>(target.size());
  IdealJoint best;
  std::int64_t best_scaled = std::numeric_limits<std::int64_t>::max();
  for (std::size_t i = 0; i < h.size(); ++i) {
    const std::int64_t joint = es[i] * mt + et[i] * ms;
    if (joint < best_scaled) {
      best_scaled = joint;
      best.h_star = i;
    }
  }
  best.c = static_cast<double>(best_scaled) / (static_cast<double>(ms) * static_cast<double>(mt));
  return best;
}

BoundReport verify_theorem1(const HypothesisClass& h, const LabeledSet& source, const LabeledSet& target,
                            const BoundCheckOptions& opts) {
  const BoundContext ctx = prepare(h, source, target);
  BoundReport r = base_report(ctx);
  const auto ms = static_cast<std::int64_t>(ctx.ms), mt = static_cast<std::int64_t>(ctx.mt);
  const double offset = opts.c_offset * static_cast<double>(ms) * static_cast<double>(mt);
  for (std::size_t i = 0; i < ctx.n_hyp; ++i) {
    check(r, ctx, i, "R_T <= R_S + d/2 + C", ctx.err_t[i] * ms, ctx.err_s[i] * mt + ctx.scaled_gap + ctx.scaled_c,
          offset);
  }
  return r;
}

BoundReport verify_rho_bound(const HypothesisClass& h, const LabeledSet& source, const LabeledSet& target,
                             const LabeledSet& pseudo, const BoundCheckOptions& opts) {
  require_labeled(pseudo, "rho bound pseudo-labeled set");
  if (!(pseudo.x == target.x)) throw InputError("verify_rho_bound: pseudo-labeled points differ from target points");
  const BoundContext ctx = prepare(h, source, target);
  BoundReport r = base_report(ctx);
  const auto ms = static_cast<std::int64_t>(ctx.ms), mt = static_cast<std::int64_t>(ctx.mt);

  std::int64_t false_labels = 0;
  for (std::size_t i = 0; i < ctx.mt; ++i) false_labels += pseudo.y[i] != target.y[i];
  const auto err_p = error_counts(h.predict_all(pseudo.x), ctx.n_hyp, ctx.mt, pseudo.y);
  std::int64_t scaled_c_prime = std::numeric_limits<std::int64_t>::max();
  for (std::size_t i = 0; i < ctx.n_hyp; ++i) scaled_c_prime = std::min(scaled_c_prime, ctx.err_s[i] * mt + err_p[i] * ms);

  const double scale = static_cast<double>(ms) * static_cast<double>(mt);
  for (auto e : err_p) r.risk_pseudo.push_back(static_cast<double>(e) / static_cast<double>(mt));
  r.rho = static_cast<double>(false_labels) / static_cast<double>(mt);
  r.c_prime = static_cast<double>(scaled_c_prime) / scale;

  const double offset = opts.c_offset * scale;
  const std::int64_t rho_scaled = false_labels * ms;
  check(r, ctx, ctx.h_star, "C <= C' + rho", ctx.scaled_c, scaled_c_prime + rho_scaled, offset);
  for (std::size_t i = 0; i < ctx.n_hyp; ++i) {
    const std::int64_t rs = ctx.err_s[i] * mt, rt = ctx.err_t[i] * ms, rp = err_p[i] * ms;
    check(r, ctx, i, "|R_Tl - R_T| <= rho", std::llabs(rp - rt), rho_scaled, 0.0);
    check(r, ctx, i, "R_S + R_T <= R_S + R_Tl + rho", rs + rt, rs + rp + rho_scaled, 0.0);
    check(r, ctx, i, "R_T <= R_S + d/2 + C", rt, rs + ctx.scaled_gap + ctx.scaled_c, offset);
    check(r, ctx, i, "R_T <= R_S + d/2 + C' + rho", rt, rs + ctx.scaled_gap + scaled_c_prime + rho_scaled, offset);
  }
  return r;
}

void write_bound_report_json(const BoundReport& r, std::ostream& os) {
  json j;
  j["schema_version"] = 1;
  j["n_hypotheses"] = r.n_hypotheses;
  j["n_source"] = r.n_source;
  j["n_target"] = r.n_target;
  j["d_hdh"] = r.d_hdh;
  j["C"] = r.c;
  j["h_star"] = r.h_star;
  j["C_prime"] = r.c_prime ? json(*r.c_prime) : json(nullptr);
  j["rho"] = r.rho ? json(*r.rho) : json(nullptr);
  j["risk_source"] = r.risk_source;
  j["risk_target"] = r.risk_target;
  j["risk_pseudo"] = r.risk_pseudo;
  j["violations"] = json::array();
  for (const auto& v : r.violations)
    j["violations"].push_back({{"hypothesis", v.hypothesis}, {"inequality", v.inequality}, {"lhs", v.lhs}, {"rhs", v.rhs}});
  os << j.dump(2) << '\n';
}

BoundReport read_bound_report_json(std::istream& is) {
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bound report: ") + e.what());
  }
  try {
    if (j.at("schema_version").get<int>() != 1) throw ParseError("bound report: unsupported schema version");
    BoundReport r;
    r.n_hypotheses = j.at("n_hypotheses").get<std::size_t>();
    r.n_source = j.at("n_source").get<std::size_t>();
    r.n_target = j.at("n_target").get<std::size_t>();
    r.d_hdh = j.at("d_hdh").get<double>();
    r.c = j.at("C").get<double>();
    r.h_star = j.at("h_star").get<std::size_t>();
    if (!j.at("C_prime").is_null()) r.c_prime = j["C_prime"].get<double>();
    if (!j.at("rho").is_null()) r.rho = j["rho"].get<double>();
    r.risk_source = j.at("risk_source").get<std::vector<double>>();
    r.risk_target = j.at("risk_target").get<std::vector<double>>();
    r.risk_pseudo = j.at("risk_pseudo").get<std::vector<double>>();
    for (const auto& v : j.at("violations"))
      r.violations.push_back({v.at("hypothesis").get<std::size_t>(), v.at("inequality").get<std::string>(),
                              v.at("lhs").get<double>(), v.at("rhs").get<double>()});
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bound report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

double a_distance_from_error(double epsilon) { return std::clamp(2.0 * (1.0 - 2.0 * epsilon), 0.0, 2.0); }

ADistance a_distance(const DenseMatrix& source_feats, const DenseMatrix& target_feats, const ADistanceOptions& opts) {
  if (source_feats.cols() != target_feats.cols()) throw DimensionError("a_distance: feature dims differ");
  if (!(opts.heldout_fraction > 0.0 && opts.heldout_fraction < 1.0))
    throw ConfigError("a_distance: heldout_fraction must be in (0, 1)");
  if (opts.folds == 0) throw ConfigError("a_distance: folds must be positive");
  auto split_sizes = [&](std::size_t m) {
    const auto test = static_cast<std::size_t>(std::llround(opts.heldout_fraction * static_cast<double>(m)));
    if (test < 2 || m - test < 2)
      throw InputError("a_distance: each domain needs at least 2 training and 2 held-out samples (got " +
                       std::to_string(m) + " samples)");
    return test;
  };
  const std::size_t test_s = split_sizes(source_feats.rows());
  const std::size_t test_t = split_sizes(target_feats.rows());

  double eps_sum = 0.0;
  for (std::size_t fold = 0; fold < opts.folds; ++fold) {
    std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                      static_cast<std::uint32_t>(0xad15u + fold)};
    std::mt19937_64 rng(seq);
    auto perm = [&](std::size_t m) {
      std::vector<std::size_t> p(m);
      for (std::size_t i = 0; i < m; ++i) p[i] = i;
      std::shuffle(p.begin(), p.end(), rng);
      return p;
    };
    const auto ps = perm(source_feats.rows());
    const auto pt = perm(target_feats.rows());
    std::vector<std::size_t> s_te(ps.begin(), ps.begin() + static_cast<std::ptrdiff_t>(test_s));
    std::vector<std::size_t> s_tr(ps.begin() + static_cast<std::ptrdiff_t>(test_s), ps.end());
    std::vector<std::size_t> t_te(pt.begin(), pt.begin() + static_cast<std::ptrdiff_t>(test_t));
    std::vector<std::size_t> t_tr(pt.begin() + static_cast<std::ptrdiff_t>(test_t), pt.end());

    const DenseMatrix xtr = DenseMatrix::vstack(source_feats.select_rows(s_tr), target_feats.select_rows(t_tr));
    const DenseMatrix xte = DenseMatrix::vstack(source_feats.select_rows(s_te), target_feats.select_rows(t_te));
    std::vector<int> ytr(s_tr.size(), 0), yte(s_te.size(), 0);
    ytr.resize(s_tr.size() + t_tr.size(), 1);
    yte.resize(s_te.size() + t_te.size(), 1);
    eps_sum += logistic_error(xtr, ytr, xte, yte, opts);
  }
  ADistance out;
  out.epsilon = eps_sum / static_cast<double>(opts.folds);
  out.value = a_distance_from_error(out.epsilon);
  return out;
}

// ---------------------------------------------------------------------------

void emit_report(std::span<const StepMetrics> history, const BoundReport* bound, const ReportSummary& summary,
                 const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory '" + dir.string() + "': " + ec.message());
  {
    std::ofstream csv(dir / "metrics.csv");
    if (!csv) throw IoError("cannot write '" + (dir / "metrics.csv").string() + "'");
    write_metrics_csv(history, csv);
    if (!csv) throw IoError("error writing metrics.csv");
  }
  json j;
  j["schema_version"] = 1;
  j["steps"] = history.size();
  if (!history.empty()) {
    const auto& last = history.back();
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    j["final"] = {{"step", last.step},          {"acc_f1", opt(last.acc_f1)},
                  {"acc_f2", opt(last.acc_f2)}, {"acc_ft", opt(last.acc_ft)},
                  {"labeling_acc", opt(last.labeling_acc)}, {"n_pseudo", last.n_pseudo}};
  }
  if (summary.a_distance_raw) j["d_A_raw"] = *summary.a_distance_raw;
  if (summary.a_distance_features) j["d_A_features"] = *summary.a_distance_features;
  if (bound != nullptr) {
    j["d_A"] = summary.a_distance_features ? json(*summary.a_distance_features)
                                           : (summary.a_distance_raw ? json(*summary.a_distance_raw) : json(nullptr));
    j["d_hdh"] = bound->d_hdh;
    j["C"] = bound->c;
    j["C_prime"] = bound->c_prime ? json(*bound->c_prime) : json(nullptr);
    j["rho"] = bound->rho ? json(*bound->rho) : json(nullptr);
    j["violations"] = bound->violations.size();
  }
  std::ofstream out(dir / "report.json");
  if (!out) throw IoError("cannot write '" + (dir / "report.json").string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace tritrain

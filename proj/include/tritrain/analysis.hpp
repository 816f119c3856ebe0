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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tritrain/datagen.hpp"
#include "tritrain/matrix.hpp"
#include "tritrain/trainer.hpp"

namespace tritrain {

// ---------------------------------------------------------------------------
// Hypothesis classes

/// Axis-aligned threshold stump: predicts `polarity > 0 ? 1 : 0` when
/// x[feature] > threshold and the opposite class otherwise.
struct Stump {
  std::size_t feature = 0;
  double threshold = 0.0;
  int polarity = 1;

  int predict(std::span<const double> x) const {
    const bool above = x[feature] > threshold;
    return (above == (polarity > 0)) ? 1 : 0;
  }
  friend bool operator==(const Stump&, const Stump&) = default;
};

class HypothesisClass {
 public:
  static constexpr std::size_t kMaxSize = 10000;

  HypothesisClass() = default;
  explicit HypothesisClass(std::vector<Stump> stumps);

  /// Both polarities of stumps on every feature of `points`, with thresholds
  /// at -inf (the two constant classifiers) and at up to
  /// `max_thresholds_per_feature` midpoints between sorted distinct values.
  static HypothesisClass stumps_for(const DenseMatrix& points, std::size_t max_thresholds_per_feature);

  std::size_t size() const { return stumps_.size(); }
  const Stump& operator[](std::size_t i) const { return stumps_[i]; }
  std::span<const Stump> stumps() const { return stumps_; }

  // n_hypotheses x n_points table of 0/1 predictions, row-major.
  std::vector<std::uint8_t> predict_all(const DenseMatrix& x) const;

 private:
  std::vector<Stump> stumps_;
};

// ---------------------------------------------------------------------------
// Divergence and ideal joint error

struct HdhDistance {
  double value = 0.0;             // 2 * sup |dis_S - dis_T|, in [0, 2]
  std::int64_t scaled_gap = 0;    // sup gap * n_source * n_target, exact
  std::size_t first = 0, second = 0;  // maximising pair
};

/// Exact empirical H-delta-H distance by enumerating every hypothesis pair.
HdhDistance empirical_hdh_distance(const HypothesisClass& h, const DenseMatrix& source_x,
                                   const DenseMatrix& target_x);

struct IdealJoint {
  std::size_t h_star = 0;
  double c = 0.0;  // R_S(h*) + R_T(h*)
};

IdealJoint ideal_joint_error(const HypothesisClass& h, const LabeledSet& source, const LabeledSet& target);

// ---------------------------------------------------------------------------
// Bound verification

struct Violation {
  std::size_t hypothesis = 0;
  std::string inequality;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct BoundReport {
  std::size_t n_hypotheses = 0;
  std::size_t n_source = 0;
  std::size_t n_target = 0;
  std::vector<double> risk_source;
  std::vector<double> risk_target;
  std::vector<double> risk_pseudo;  // empty for the plain Theorem 1 check
  double d_hdh = 0.0;
  double c = 0.0;
  std::size_t h_star = 0;
  std::optional<double> c_prime;
  std::optional<double> rho;
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

struct BoundCheckOptions {
  // Test-only fault injection: added to C (and C') before checking.
  double c_offset = 0.0;
};

/// Checks R_T(h) <= R_S(h) + d/2 + C for every h. All comparisons are done
/// on integer error counts, so the check has zero tolerance.
BoundReport verify_theorem1(const HypothesisClass& h, const LabeledSet& source, const LabeledSet& target,
                            const BoundCheckOptions& opts = {});

/// Checks, for every h, |R_Tl(h) - R_T(h)| <= rho,
/// R_S(h) + R_T(h) <= R_S(h) + R_Tl(h) + rho and
/// R_T(h) <= R_S(h) + d/2 + C <= R_S(h) + d/2 + C' + rho,
/// where `pseudo` holds the same points as `target` with pseudo-labels.
BoundReport verify_rho_bound(const HypothesisClass& h, const LabeledSet& source, const LabeledSet& target,
                             const LabeledSet& pseudo, const BoundCheckOptions& opts = {});

void write_bound_report_json(const BoundReport& r, std::ostream& os);
BoundReport read_bound_report_json(std::istream& is);

// ---------------------------------------------------------------------------
// A-distance

struct ADistanceOptions {
  double heldout_fraction = 0.5;
  std::size_t folds = 5;
  std::size_t epochs = 300;
  double lr = 0.5;
  std::uint64_t seed = 0;
};

struct ADistance {
  double value = 0.0;    // clamp(2 (1 - 2 eps), 0, 2)
  double epsilon = 0.0;  // mean held-out domain-classification error
};

double a_distance_from_error(double epsilon);

/// Proxy A-distance from a logistic-regression domain classifier trained on
/// a random split and scored on the held-out part, averaged over folds.
ADistance a_distance(const DenseMatrix& source_feats, const DenseMatrix& target_feats,
                     const ADistanceOptions& opts = {});

// ---------------------------------------------------------------------------
// Report emission

struct ReportSummary {
  std::optional<double> a_distance_raw;
  std::optional<double> a_distance_features;
};

/// Writes <dir>/metrics.csv and <dir>/report.json (schema version 1).
void emit_report(std::span<const StepMetrics> history, const BoundReport* bound, const ReportSummary& summary,
                 const std::filesystem::path& dir);

}  // namespace tritrain

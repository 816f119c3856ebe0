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


#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>
#include <vector>

#include "test_util.hpp"
#include "tritrain/errors.hpp"
#include "tritrain/labeler.hpp"

using namespace tritrain;
using testing::uniform_size;

namespace {

// Independent restatement of the labeling rule.
struct Oracle {
  std::size_t row;
  int label;
  double confidence;
};

std::vector<Oracle> brute_labels(const DenseMatrix& p1, const DenseMatrix& p2, double threshold) {
  std::vector<Oracle> out;
  for (std::size_t r = 0; r < p1.rows(); ++r) {
    std::size_t a1 = 0, a2 = 0;
    for (std::size_t c = 1; c < p1.cols(); ++c) {
      if (p1(r, c) > p1(r, a1)) a1 = c;
      if (p2(r, c) > p2(r, a2)) a2 = c;
    }
    const double conf = std::max(p1(r, a1), p2(r, a2));
    if (a1 == a2 && conf > threshold) out.push_back({r, static_cast<int>(a1), conf});
  }
  return out;
}

// Random probability rows with deliberate ties and values exactly at common thresholds.
DenseMatrix random_probs(std::size_t n, std::size_t k, Rng& rng) {
  DenseMatrix p(n, k);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto mode = uniform_size(rng, 0, 5);
    if (mode == 0) {  // exact tie between the two leading classes
      for (std::size_t c = 0; c < k; ++c) p(r, c) = c < 2 ? 0.5 : 0.0;
    } else if (mode == 1) {  // mass exactly at 0.9 on one class
      const std::size_t hot = uniform_size(rng, 0, k - 1);
      for (std::size_t c = 0; c < k; ++c) p(r, c) = c == hot ? 0.9 : 0.1 / static_cast<double>(k - 1);
    } else {
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double v = std::pow(u(rng), mode == 2 ? 8.0 : 1.0) + 1e-12;
        p(r, c) = v;
        s += v;
      }
      for (std::size_t c = 0; c < k; ++c) p(r, c) /= s;
    }
  }
  return p;
}

}  // namespace

TEST_CASE("assign_pseudo_labels equals the brute-force oracle on 1000 random pairs") {
  Rng rng(42);
  const double thresholds[] = {0.0, 0.5, 0.8, 0.9, 0.95, 0.99};
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = uniform_size(rng, 1, 30), k = uniform_size(rng, 2, 5);
    const DenseMatrix p1 = random_probs(n, k, rng), p2 = random_probs(n, k, rng);
    const double thr = thresholds[uniform_size(rng, 0, 5)];
    const auto got = assign_pseudo_labels(make_branch_output(p1), make_branch_output(p2), thr);
    const auto want = brute_labels(p1, p2, thr);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].row == want[i].row);
      CHECK(got[i].label == want[i].label);
      CHECK(got[i].confidence == want[i].confidence);
    }
  }
}

TEST_CASE("raising the threshold never adds pseudo-labels") {
  Rng rng(43);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = uniform_size(rng, 1, 30), k = uniform_size(rng, 2, 5);
    const auto o1 = make_branch_output(random_probs(n, k, rng));
    const auto o2 = make_branch_output(random_probs(n, k, rng));
    std::set<std::size_t> prev;
    bool first = true;
    for (double thr : {0.0, 0.3, 0.5, 0.7, 0.9, 0.95, 0.999}) {
      std::set<std::size_t> rows;
      for (const auto& d : assign_pseudo_labels(o1, o2, thr)) rows.insert(d.row);
      if (!first) CHECK(std::includes(prev.begin(), prev.end(), rows.begin(), rows.end()));
      prev = rows;
      first = false;
    }
  }
}

TEST_CASE("threshold is strict and requires agreement") {
  const auto a = make_branch_output(DenseMatrix{{0.9, 0.1}, {0.95, 0.05}, {0.2, 0.8}, {0.99, 0.01}});
  const auto b = make_branch_output(DenseMatrix{{0.9, 0.1}, {0.6, 0.4}, {0.7, 0.3}, {0.55, 0.45}});
  const auto d = assign_pseudo_labels(a, b, 0.9);
  // row 0: max 0.9 is not > 0.9; row 2: disagreement; rows 1 and 3 pass on F1's confidence.
  REQUIRE(d.size() == 2);
  CHECK(d[0].row == 1);
  CHECK(d[0].confidence == 0.95);
  CHECK(d[1].row == 3);
  CHECK(d[1].label == 0);
  CHECK_THROWS_AS(assign_pseudo_labels(a, make_branch_output(DenseMatrix(3, 2, 0.5)), 0.9), DimensionError);
}

TEST_CASE("candidate_count reproduces the published schedule") {
  const LabelingConfig cfg;  // 5000 initial, 40000 cap, k n / 20
  for (std::size_t n : {std::size_t{1000}, std::size_t{59001}, std::size_t{73257}}) {
    for (std::size_t k = 0; k <= 40; ++k) {
      const std::size_t want = k == 0 ? std::min<std::size_t>(5000, n) : std::min({k * n / 20, std::size_t{40000}, n});
      CAPTURE(n);
      CAPTURE(k);
      CHECK(candidate_count(k, n, cfg) == want);
    }
  }
  // Spot values.
  CHECK(candidate_count(0, 59001, cfg) == 5000);
  CHECK(candidate_count(1, 59001, cfg) == 2950);
  CHECK(candidate_count(13, 59001, cfg) == 38350);
  CHECK(candidate_count(14, 59001, cfg) == 40000);
  CHECK(candidate_count(10, 73257, cfg) == 36628);
  CHECK(candidate_count(11, 73257, cfg) == 40000);
  CHECK(candidate_count(0, 1000, cfg) == 1000);
  CHECK(candidate_count(7, 1000, cfg) == 350);
  CHECK(candidate_count(40, 1000, cfg) == 1000);
}

TEST_CASE("candidate_count is non-decreasing for k >= 1") {
  const LabelingConfig cfg;
  for (std::size_t n : {std::size_t{1}, std::size_t{19}, std::size_t{1000}, std::size_t{59001}, std::size_t{900000}})
    for (std::size_t k = 1; k < 60; ++k) CHECK(candidate_count(k + 1, n, cfg) >= candidate_count(k, n, cfg));
}

TEST_CASE("sample_candidates draws distinct, uniform indices") {
  Rng rng(44);
  constexpr std::size_t n = 20, count = 5, trials = 20000;
  std::vector<double> hits(n, 0.0);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto s = sample_candidates(n, count, rng);
    REQUIRE(s.size() == count);
    CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == count);
    for (auto i : s) hits[i] += 1.0;
  }
  const double expected = static_cast<double>(trials * count) / n;
  double chi2 = 0.0;
  for (double h : hits) chi2 += (h - expected) * (h - expected) / expected;
  // 19 degrees of freedom, p = 0.001 critical value.
  CHECK(chi2 < 43.82);
  CHECK(sample_candidates(3, 10, rng).size() == 3);
  CHECK(sample_candidates(0, 10, rng).empty());
}

TEST_CASE("label_candidates maps rows back to target indices") {
  const std::vector<std::size_t> cand{7, 2, 9};
  const auto a = make_branch_output(DenseMatrix{{0.99, 0.01}, {0.3, 0.7}, {0.05, 0.95}});
  const auto b = make_branch_output(DenseMatrix{{0.98, 0.02}, {0.6, 0.4}, {0.2, 0.8}});
  const PseudoLabelSet s = label_candidates(cand, a, b, 0.9, 4);
  CHECK(s.step == 4);
  CHECK(s.n_candidates == 3);
  CHECK(s.indices() == std::vector<std::size_t>{7, 9});
  CHECK(s.labels() == std::vector<int>{0, 1});
  CHECK_NOTHROW(s.validate(10, 2));
  CHECK_THROWS_AS(s.validate(8, 2), InputError);

  const std::vector<int> truth{0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK(labeling_accuracy(s, truth) == doctest::Approx(0.5));
  CHECK_FALSE(labeling_accuracy(PseudoLabelSet{}, truth).has_value());

  std::ostringstream os;
  write_pseudo_labels_csv(s, os);
  CHECK(os.str().rfind("target_index,label,confidence,step\n7,0,", 0) == 0);

  PseudoLabelSet dup = s;
  dup.entries.push_back(dup.entries.front());
  CHECK_THROWS_AS(dup.validate(10, 2), InputError);
}

TEST_CASE("labeling config validation") {
  LabelingConfig c;
  c.threshold = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.threshold = 0.9;
  c.steps_divisor = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

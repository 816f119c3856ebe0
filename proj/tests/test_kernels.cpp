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
#include <array>
#include <limits>
#include <cstdlib>
#include <vector>

#include "test_util.hpp"
#include "tritrain/errors.hpp"
#include "tritrain/kernels.hpp"

using namespace tritrain;
using testing::random_matrix;
using testing::uniform_size;

namespace {

// Textbook triple loop, independent of the kernel code.
DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

bool close(const DenseMatrix& a, const DenseMatrix& b, double tol) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol * (1.0 + std::abs(b[i]))) return false;
  return true;
}

}  // namespace

TEST_CASE("matmul variants match the naive product") {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const std::size_t m = uniform_size(rng, 1, 9), k = uniform_size(rng, 1, 9), n = uniform_size(rng, 1, 9);
    const DenseMatrix a = random_matrix(m, k, rng), b = random_matrix(k, n, rng);
    const DenseMatrix want = naive_matmul(a, b);
    CHECK(close(kernels::matmul(a, b), want, 1e-12));
    CHECK(close(kernels::matmul_at_b(a.transposed(), b), want, 1e-12));
    CHECK(close(kernels::matmul_a_bt(a, b.transposed()), want, 1e-12));
  }
}

TEST_CASE("parallel matmul is bit-identical to the serial reference") {
  Rng rng(12);
  // Includes shapes above the parallel threshold.
  for (auto [m, k, n] : {std::array<std::size_t, 3>{3, 4, 5}, {64, 64, 64}, {300, 50, 40}, {513, 17, 129}}) {
    const DenseMatrix a = random_matrix(m, k, rng), b = random_matrix(k, n, rng);
    CHECK(kernels::matmul(a, b) == kernels::reference::matmul(a, b));
    const DenseMatrix at = a.transposed(), bt = b.transposed();
    CHECK(kernels::matmul_at_b(at, b) == kernels::reference::matmul_at_b(at, b));
    CHECK(kernels::matmul_a_bt(a, bt) == kernels::reference::matmul_a_bt(a, bt));
  }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  CHECK_THROWS_AS(kernels::matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)), DimensionError);
  CHECK_THROWS_AS(kernels::matmul_at_b(DenseMatrix(2, 3), DenseMatrix(3, 3)), DimensionError);
  CHECK_THROWS_AS(kernels::matmul_a_bt(DenseMatrix(2, 3), DenseMatrix(3, 2)), DimensionError);
}

namespace {

// Brute force over all ordered pairs with per-pair recounting.
kernels::PairGap brute_pair_gap(const std::vector<std::uint8_t>& t, std::size_t nh, std::size_t ns, std::size_t nt) {
  const std::size_t n = ns + nt;
  kernels::PairGap best{-1, 0, 0};
  for (std::size_t i = 0; i < nh; ++i)
    for (std::size_t j = i; j < nh; ++j) {
      std::int64_t ds = 0, dt = 0;
      for (std::size_t s = 0; s < n; ++s) {
        const bool differ = t[i * n + s] != t[j * n + s];
        (s < ns ? ds : dt) += differ ? 1 : 0;
      }
      const std::int64_t gap = std::llabs(ds * static_cast<std::int64_t>(nt) - dt * static_cast<std::int64_t>(ns));
      if (gap > best.scaled_gap) best = {gap, i, j};
    }
  return best;
}

}  // namespace

TEST_CASE("pair-gap kernels agree with brute force and with each other") {
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    const std::size_t nh = uniform_size(rng, 1, 40), ns = uniform_size(rng, 1, 30), nt = uniform_size(rng, 1, 30);
    std::vector<std::uint8_t> table(nh * (ns + nt));
    for (auto& v : table) v = static_cast<std::uint8_t>(rng() & 1u);
    const kernels::PredictionTable pt{table, nh, ns, nt};
    const auto want = brute_pair_gap(table, nh, ns, nt);
    const auto ref = kernels::reference::max_pair_disagreement_gap(pt);
    const auto par = kernels::max_pair_disagreement_gap(pt);
    CHECK(ref.scaled_gap == want.scaled_gap);
    CHECK(par.scaled_gap == ref.scaled_gap);
    CHECK(par.first == ref.first);
    CHECK(par.second == ref.second);
  }
}

TEST_CASE("pair-gap of a single hypothesis is zero") {
  const std::vector<std::uint8_t> table{1, 0, 1, 1};
  const auto g = kernels::max_pair_disagreement_gap({table, 1, 2, 2});
  CHECK(g.scaled_gap == 0);
}

TEST_CASE("matrix helpers") {
  DenseMatrix m{{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}};
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 2);
  CHECK(m.sum() == doctest::Approx(21.0));
  CHECK(m.transposed()(1, 2) == 6.0);
  const std::vector<std::size_t> idx{2, 0};
  const DenseMatrix s = m.select_rows(idx);
  CHECK(s(0, 0) == 5.0);
  CHECK(s(1, 1) == 2.0);
  CHECK(DenseMatrix::vstack(DenseMatrix(), m) == m);
  CHECK_THROWS_AS(DenseMatrix::vstack(m, DenseMatrix(1, 3)), DimensionError);
  CHECK_THROWS_AS(require_same_shape(m, DenseMatrix(2, 2), "t"), DimensionError);
  m(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(m.all_finite());
}

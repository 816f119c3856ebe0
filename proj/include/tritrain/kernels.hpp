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

// Data-parallel kernels. Each kernel has a serial reference in
// `kernels::reference` that tests and benchmarks compare against. The
// parallel versions split work over output rows only, so every output
// element is accumulated in the same order as the reference and results
// are bit-identical regardless of thread count.

#include <cstddef>
#include <cstdint>
#include <span>

#include "tritrain/matrix.hpp"

namespace tritrain::kernels {

// C = A * B.   A: m x k, B: k x n.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// C = A^T * B. A: k x m, B: k x n.
DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b);
// C = A * B^T. A: m x k, B: n x k.
DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b);

/// Row-major table of hard predictions: one row per hypothesis, one column
/// per sample. The first `n_source` columns are source samples, the rest
/// target samples.
struct PredictionTable {
  std::span<const std::uint8_t> labels;
  std::size_t n_hypotheses = 0;
  std::size_t n_source = 0;
  std::size_t n_target = 0;
};

/// Result of the pairwise disagreement sweep. `scaled_gap` is
/// max over pairs of |dis_S * n_target - dis_T * n_source|, an exact
/// integer; the disagreement-rate gap is scaled_gap / (n_source * n_target).
struct PairGap {
  std::int64_t scaled_gap = 0;
  std::size_t first = 0;
  std::size_t second = 0;
};

PairGap max_pair_disagreement_gap(const PredictionTable& table);

// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

namespace reference {
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b);
PairGap max_pair_disagreement_gap(const PredictionTable& table);
}  // namespace reference

}  // namespace tritrain::kernels

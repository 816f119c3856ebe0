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

#include "tritrain/kernels.hpp"

#include <cstdlib>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include "tritrain/errors.hpp"

namespace tritrain::kernels {
namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelWork = 1u << 16;

void check_inner(std::size_t lhs, std::size_t rhs, const char* op, const DenseMatrix& a, const DenseMatrix& b) {
  if (lhs != rhs) {
    throw DimensionError(std::string(op) + ": inner dimension mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

// Row kernels shared by both variants so the accumulation order is identical.
inline void matmul_row(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c, std::size_t i) {
  const std::size_t k = a.cols(), n = b.cols();
  double* out = c.data() + i * n;
  const double* arow = a.data() + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = arow[p];
    const double* brow = b.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += av * brow[j];
  }
}

inline void matmul_at_b_row(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c, std::size_t i) {
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  double* out = c.data() + i * n;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a.data()[p * m + i];
    if (av == 0.0) continue;  // sparse bag-of-words inputs
    const double* brow = b.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += av * brow[j];
  }
}

inline void matmul_a_bt_row(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c, std::size_t i) {
  const std::size_t k = a.cols(), n = b.rows();
  const double* arow = a.data() + i * k;
  for (std::size_t j = 0; j < n; ++j) {
    const double* brow = b.data() + j * k;
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
    c(i, j) = s;
  }
}

inline std::int64_t pair_gap(const PredictionTable& t, std::size_t h, std::size_t g) {
  const std::size_t m = t.n_source + t.n_target;
  const std::uint8_t* a = t.labels.data() + h * m;
  const std::uint8_t* b = t.labels.data() + g * m;
  std::int64_t dis_s = 0, dis_t = 0;
  for (std::size_t i = 0; i < t.n_source; ++i) dis_s += a[i] != b[i];
  for (std::size_t i = t.n_source; i < m; ++i) dis_t += a[i] != b[i];
  return std::llabs(dis_s * static_cast<std::int64_t>(t.n_target) - dis_t * static_cast<std::int64_t>(t.n_source));
}

void check_table(const PredictionTable& t) {
  if (t.labels.size() != t.n_hypotheses * (t.n_source + t.n_target)) {
    throw DimensionError("prediction table size does not match hypotheses x samples");
  }
}

// Ties resolve to the lexicographically smallest (first, second) pair.
inline bool better(const PairGap& cand, const PairGap& best) {
  if (cand.scaled_gap != best.scaled_gap) return cand.scaled_gap > best.scaled_gap;
  if (cand.first != best.first) return cand.first < best.first;
  return cand.second < best.second;
}

}  // namespace

int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace reference {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  check_inner(a.cols(), b.rows(), "matmul", a, b);
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, c, i);
  return c;
}

DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
  check_inner(a.rows(), b.rows(), "matmul_at_b", a, b);
  DenseMatrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) matmul_at_b_row(a, b, c, i);
  return c;
}

DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
  check_inner(a.cols(), b.cols(), "matmul_a_bt", a, b);
  DenseMatrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_a_bt_row(a, b, c, i);
  return c;
}

PairGap max_pair_disagreement_gap(const PredictionTable& t) {
  check_table(t);
  PairGap best;
  for (std::size_t h = 0; h < t.n_hypotheses; ++h) {
    for (std::size_t g = h + 1; g < t.n_hypotheses; ++g) {
      PairGap cand{pair_gap(t, h, g), h, g};
      if (better(cand, best)) best = cand;
    }
  }
  return best;
}

}  // namespace reference

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  check_inner(a.cols(), b.rows(), "matmul", a, b);
  DenseMatrix c(a.rows(), b.cols());
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
  const bool par = a.rows() * a.cols() * b.cols() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < rows; ++i) matmul_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
  check_inner(a.rows(), b.rows(), "matmul_at_b", a, b);
  DenseMatrix c(a.cols(), b.cols());
  const auto rows = static_cast<std::ptrdiff_t>(a.cols());
  const bool par = a.rows() * a.cols() * b.cols() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < rows; ++i) matmul_at_b_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
  check_inner(a.cols(), b.cols(), "matmul_a_bt", a, b);
  DenseMatrix c(a.rows(), b.rows());
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
  const bool par = a.rows() * a.cols() * b.rows() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < rows; ++i) matmul_a_bt_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

PairGap max_pair_disagreement_gap(const PredictionTable& t) {
  check_table(t);
  const auto n = static_cast<std::ptrdiff_t>(t.n_hypotheses);
  PairGap best;
  const bool par = t.n_hypotheses * t.n_hypotheses * (t.n_source + t.n_target) >= kParallelWork;
#pragma omp parallel if (par)
  {
    PairGap local;
#pragma omp for schedule(dynamic, 4) nowait
    for (std::ptrdiff_t hi = 0; hi < n; ++hi) {
      const auto h = static_cast<std::size_t>(hi);
      for (std::size_t g = h + 1; g < t.n_hypotheses; ++g) {
        PairGap cand{pair_gap(t, h, g), h, g};
        if (better(cand, local)) local = cand;
      }
    }
#pragma omp critical(tritrain_pair_gap)
    {
      if (better(local, best)) best = local;
    }
  }
  return best;
}

}  // namespace tritrain::kernels

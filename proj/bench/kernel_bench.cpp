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


// Serial reference vs OpenMP kernels: GEMM and the pairwise disagreement sweep.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "tritrain/kernels.hpp"

namespace {

using tritrain::DenseMatrix;
namespace kernels = tritrain::kernels;

DenseMatrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  DenseMatrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = d(rng);
  return m;
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) {
    DenseMatrix c = Parallel ? kernels::matmul(a, b) : kernels::reference::matmul(a, b);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["threads"] = Parallel ? kernels::max_threads() : 1;
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

struct Table {
  std::vector<std::uint8_t> labels;
  kernels::PredictionTable view;
};

Table make_table(std::size_t hyps, std::size_t per_domain) {
  Table t;
  std::mt19937_64 rng(7);
  t.labels.resize(hyps * 2 * per_domain);
  for (auto& v : t.labels) v = static_cast<std::uint8_t>(rng() & 1u);
  t.view = {t.labels, hyps, per_domain, per_domain};
  return t;
}

template <bool Parallel>
void BM_PairGap(benchmark::State& state) {
  const auto hyps = static_cast<std::size_t>(state.range(0));
  const Table t = make_table(hyps, 50);
  for (auto _ : state) {
    const auto gap = Parallel ? kernels::max_pair_disagreement_gap(t.view)
                              : kernels::reference::max_pair_disagreement_gap(t.view);
    benchmark::DoNotOptimize(gap.scaled_gap);
  }
  state.counters["threads"] = Parallel ? kernels::max_threads() : 1;
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(hyps * (hyps - 1) / 2));
}

}  // namespace

BENCHMARK(BM_Matmul<false>)->Name("matmul/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Matmul<true>)->Name("matmul/omp")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_PairGap<false>)->Name("pair_gap/serial")->Arg(50)->Arg(200)->Arg(800);
BENCHMARK(BM_PairGap<true>)->Name("pair_gap/omp")->Arg(50)->Arg(200)->Arg(800);

BENCHMARK_MAIN();

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
#include <random>
#include <string>

#include "tritrain/matrix.hpp"
#include "tritrain/nnlib.hpp"

namespace tritrain::testing {

inline DenseMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  DenseMatrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = n(rng);
  return m;
}

inline std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("tritrain_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Relative-error tolerance of every analytic-vs-finite-difference check.
inline constexpr double kGradTol = 1e-4;
// Denominator floor of the relative error: central differences at h = 1e-5
// carry ~1e-10 of round-off, so entries below 1e-6 are judged absolutely.
inline constexpr double kGradFloor = 1e-6;

inline double grad_error(const DenseMatrix& analytic, const DenseMatrix& numeric) {
  return max_relative_error(analytic, numeric, kGradFloor);
}

}  // namespace tritrain::testing

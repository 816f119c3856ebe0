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

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "test_util.hpp"
#include "tritrain/datagen.hpp"
#include "tritrain/errors.hpp"

using namespace tritrain;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

LabeledSet bow(const std::string& text, std::size_t dim) {
  std::istringstream is(text);
  return parse_sparse_bow(is, dim);
}

double mean_of(const DenseMatrix& x, std::size_t c) {
  double s = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) s += x(r, c);
  return s / static_cast<double>(x.rows());
}

}  // namespace

TEST_CASE("generation is deterministic and balanced") {
  ShiftSpec spec;
  spec.rotation_deg = 30.0;
  spec.n_source = 101;
  spec.n_target = 60;
  spec.seed = 9;
  const DomainDataset a = generate(spec), b = generate(spec);
  CHECK(a.source.x == b.source.x);
  CHECK(a.source.y == b.source.y);
  CHECK(a.target.x == b.target.x);
  CHECK(a.source.size() == 101);
  CHECK(a.target.size() == 60);
  REQUIRE(a.target_hidden.has_value());
  CHECK(a.target_hidden->size() == 60);
  const auto ones = std::count(a.source.y.begin(), a.source.y.end(), 1);
  CHECK((ones == 50 || ones == 51));
  spec.seed = 10;
  CHECK_FALSE(generate(spec).source.x == a.source.x);
}

TEST_CASE("target shift is a rotation about the origin plus a translation") {
  ShiftSpec base;
  base.n_source = base.n_target = 2000;
  base.seed = 3;
  ShiftSpec shifted = base;
  shifted.rotation_deg = 90.0;
  shifted.translation = {1.0, -2.0};
  // Source draws are unaffected by the shift; the target uses the same base
  // stream, so point i of the shifted target is point i of the base target, moved.
  const DomainDataset d0 = generate(base), d1 = generate(shifted);
  CHECK(d0.source.x == d1.source.x);
  for (std::size_t i = 0; i < 50; ++i) {
    const double x = d0.target.x(i, 0), y = d0.target.x(i, 1);
    CHECK(d1.target.x(i, 0) == doctest::Approx(-y + 1.0));
    CHECK(d1.target.x(i, 1) == doctest::Approx(x - 2.0));
  }
  // Moons class means: (0, 2/pi) and (1, 0.5 - 2/pi).
  CHECK(mean_of(d0.source.x, 0) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("gaussian blobs sit on a circle of radius 2") {
  ShiftSpec spec;
  spec.generator = Generator::gaussian_blobs;
  spec.num_classes = 4;
  spec.noise_sigma = 0.01;
  spec.seed = 1;
  const DomainDataset d = generate(spec);
  for (std::size_t i = 0; i < d.source.size(); ++i) {
    const double a = 2.0 * std::numbers::pi * d.source.y[i] / 4.0;
    CHECK(d.source.x(i, 0) == doctest::Approx(2.0 * std::cos(a)).epsilon(0.05).scale(1.0));
    CHECK(d.source.x(i, 1) == doctest::Approx(2.0 * std::sin(a)).epsilon(0.05).scale(1.0));
  }
}

TEST_CASE("shift spec validation") {
  ShiftSpec s;
  s.num_classes = 3;  // two_moons is binary
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.noise_sigma = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.n_target = 1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_THROWS_AS(generator_from_string("spirals"), ConfigError);
}

TEST_CASE("sparse bag-of-words parsing") {
  const LabeledSet d = bow("1 0:2 3:0.5\n\n0 1:1\n-1 2:4\n+1\n", 4);
  REQUIRE(d.size() == 4);
  CHECK(d.y == std::vector<int>{1, 0, 0, 1});
  CHECK(d.x(0, 0) == 2.0);
  CHECK(d.x(0, 3) == 0.5);
  CHECK(d.x(1, 1) == 1.0);
  CHECK(d.x(2, 2) == 4.0);
  CHECK(d.x.row(3)[0] == 0.0);
}

TEST_CASE("sparse parse errors name the line") {
  CHECK(message_of([] { bow("1 0:1\n0 7:1\n", 4); }).find("line 2") != std::string::npos);
  CHECK(message_of([] { bow("1 0:1\n0 7:1\n", 4); }).find("out of range") != std::string::npos);
  CHECK(message_of([] { bow("1 x:1\n", 4); }).find("line 1") != std::string::npos);
  CHECK(message_of([] { bow("1 0:1\n\n2 0:1\n", 4); }).find("line 3") != std::string::npos);
  CHECK(message_of([] { bow("1 01\n", 4); }).find("index") != std::string::npos);
  CHECK(message_of([] { bow("1 0:abc\n", 4); }).find("line 1") != std::string::npos);
  CHECK_THROWS_AS(bow("1 -3:1\n", 4), ParseError);
  CHECK_THROWS_AS(bow("pos 0:1\n", 4), ParseError);
  CHECK_THROWS_AS(bow("1 0:1\n", 0), ConfigError);
}

TEST_CASE("sparse and CSV round trips are exact") {
  Rng rng(4);
  LabeledSet d;
  d.x = testing::random_matrix(30, 6, rng);
  for (std::size_t i = 0; i < d.x.size(); i += 3) d.x[i] = 0.0;
  d.y.resize(30);
  for (std::size_t i = 0; i < 30; ++i) d.y[i] = static_cast<int>(i % 2);

  std::stringstream sb;
  write_sparse_bow(d, sb);
  const LabeledSet back = parse_sparse_bow(sb, 6);
  CHECK(back.x == d.x);
  CHECK(back.y == d.y);

  std::stringstream sc;
  write_labeled_csv(d.x, d.y, sc);
  const LabeledSet csv = read_labeled_csv(sc);
  CHECK(csv.x == d.x);
  CHECK(csv.y == d.y);
}

TEST_CASE("CSV errors") {
  auto csv = [](const std::string& s) {
    std::istringstream is(s);
    return read_labeled_csv(is);
  };
  CHECK_THROWS_AS(csv(""), ParseError);
  CHECK_THROWS_AS(csv("x0,x1\n1,2\n"), ParseError);
  CHECK(message_of([&] { csv("x0,label\n1,0\n1,2,3\n"); }).find("line 3") != std::string::npos);
  CHECK(message_of([&] { csv("x0,label\nabc,0\n"); }).find("line 2") != std::string::npos);
  CHECK_THROWS_AS(csv("x0,label\n1,-1\n"), ParseError);
  CHECK_THROWS_AS(load_labeled_csv("/nonexistent/file.csv"), IoError);
}

TEST_CASE("validation split and standardisation") {
  ShiftSpec spec;
  spec.seed = 5;
  const DomainDataset d = generate(spec);
  const DomainDataset s = split(d, 50, 1);
  CHECK(s.validation.size() == 50);
  CHECK(s.target.size() == 450);
  CHECK(s.target_hidden->size() == 450);
  CHECK(split(d, 50, 1).validation.x == s.validation.x);
  CHECK_THROWS_AS(split(d, 500, 1), ConfigError);

  DomainDataset z = d;
  const Standardizer st = Standardizer::fit(z.source.x);
  st.apply_to(z);
  CHECK(mean_of(z.source.x, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(mean_of(z.source.x, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  // Target is transformed with source statistics, so its mean is not forced to zero.
  CHECK(z.target.x(0, 0) == doctest::Approx((d.target.x(0, 0) - st.mean[0]) * st.scale[0]));
}

TEST_CASE("hidden labels are only exposed through the evaluation view") {
  ShiftSpec spec;
  spec.n_target = 20;
  const DomainDataset d = generate(spec);
  const LabeledSet ev = d.target_eval_set();
  CHECK(ev.x == d.target.x);
  CHECK(std::vector<int>(d.target_hidden->reveal().begin(), d.target_hidden->reveal().end()) == ev.y);
  DomainDataset no_truth = d;
  no_truth.target_hidden.reset();
  CHECK_THROWS_AS(no_truth.target_eval_set(), InputError);
}

TEST_CASE("shift spec sidecar lists every field") {
  ShiftSpec spec;
  spec.rotation_deg = 30.0;
  std::ostringstream os;
  write_shift_spec(spec, os);
  const std::string s = os.str();
  for (const char* key : {"generator", "n_source", "n_target", "rotation_deg", "noise_sigma", "seed"})
    CHECK(s.find(key) != std::string::npos);
}

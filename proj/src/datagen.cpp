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

#include "tritrain/datagen.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "tritrain/errors.hpp"

namespace tritrain {

namespace {

using Rng64 = std::mt19937_64;

Rng64 sub_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return Rng64(seq);
}

// Rotation pivot. Both generators rotate about the origin; for two_moons this
// moves the class-mean centroid (0.5, 0.25) as well as the orientation.
std::array<double, 2> centre_of(Generator) { return {0.0, 0.0}; }

// Balanced labels in shuffled order.
std::vector<int> balanced_labels(std::size_t n, std::size_t k, Rng64& rng) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % k);
  std::shuffle(y.begin(), y.end(), rng);
  return y;
}

LabeledSet draw_base(const ShiftSpec& spec, std::size_t n, Rng64& rng) {
  LabeledSet out;
  out.y = balanced_labels(n, spec.num_classes, rng);
  out.x = DenseMatrix(n, 2);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  for (std::size_t i = 0; i < n; ++i) {
    double px, py;
    if (spec.generator == Generator::two_moons) {
      const double t = angle(rng);
      if (out.y[i] == 0) {
        px = std::cos(t);
        py = std::sin(t);
      } else {
        px = 1.0 - std::cos(t);
        py = 0.5 - std::sin(t);
      }
    } else {
      const double a = 2.0 * std::numbers::pi * out.y[i] / static_cast<double>(spec.num_classes);
      px = 2.0 * std::cos(a);
      py = 2.0 * std::sin(a);
    }
    out.x(i, 0) = px + noise(rng);
    out.x(i, 1) = py + noise(rng);
  }
  return out;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& tok, std::size_t line_no) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (tok.empty() || end != tok.c_str() + tok.size() || errno == ERANGE || !std::isfinite(v))
    parse_fail(line_no, "bad numeric value '" + tok + "'");
  return v;
}

int parse_label(const std::string& tok, std::size_t line_no) {
  if (tok == "1" || tok == "+1") return 1;
  if (tok == "0" || tok == "-1") return 0;
  parse_fail(line_no, "label must be 0/1 (or -1/+1), got '" + tok + "'");
}

}  // namespace

LabeledSet DomainDataset::target_eval_set() const {
  if (!target_hidden) throw InputError("target labels are not available for evaluation");
  auto labels = target_hidden->reveal();
  return LabeledSet{target.x, std::vector<int>(labels.begin(), labels.end())};
}

void DomainDataset::validate() const {
  const std::size_t d = source.x.cols();
  if (source.y.size() != source.x.rows()) throw InputError("source labels do not match source rows");
  if (target.x.rows() > 0 && target.x.cols() != d) throw InputError("target feature dim differs from source");
  if (validation.x.rows() > 0 && validation.x.cols() != d) throw InputError("validation feature dim differs from source");
  if (validation.y.size() != validation.x.rows()) throw InputError("validation labels do not match rows");
  if (target_hidden && target_hidden->size() != target.x.rows())
    throw InputError("hidden target labels do not match target rows");
  auto check = [&](std::span<const int> ys, const char* what) {
    for (int v : ys)
      if (v < 0 || static_cast<std::size_t>(v) >= num_classes)
        throw InputError(std::string(what) + " label " + std::to_string(v) + " out of range");
  };
  check(source.y, "source");
  check(validation.y, "validation");
  if (target_hidden) check(target_hidden->reveal(), "target");
}

const char* to_string(Generator g) { return g == Generator::two_moons ? "two_moons" : "gaussian_blobs"; }

Generator generator_from_string(const std::string& name) {
  if (name == "two_moons") return Generator::two_moons;
  if (name == "gaussian_blobs") return Generator::gaussian_blobs;
  throw ConfigError("unknown generator '" + name + "' (expected two_moons or gaussian_blobs)");
}

void ShiftSpec::validate() const {
  if (generator == Generator::two_moons && num_classes != 2) throw ConfigError("two_moons has exactly 2 classes");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (n_source < 2 * num_classes || n_target < 2 * num_classes)
    throw ConfigError("n_source and n_target must be at least 2 * num_classes");
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be positive");
  if (!(target_noise >= 0.0) || !std::isfinite(target_noise)) throw ConfigError("target_noise must be non-negative");
  if (!std::isfinite(rotation_deg) || !std::isfinite(translation[0]) || !std::isfinite(translation[1]))
    throw ConfigError("rotation/translation must be finite");
}

DomainDataset generate(const ShiftSpec& spec) {
  spec.validate();
  Rng64 src_rng = sub_rng(spec.seed, 1);
  Rng64 tgt_rng = sub_rng(spec.seed, 2);

  DomainDataset d;
  d.num_classes = spec.num_classes;
  d.source = draw_base(spec, spec.n_source, src_rng);

  LabeledSet tgt = draw_base(spec, spec.n_target, tgt_rng);
  const double theta = spec.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const auto centre = centre_of(spec.generator);
  std::normal_distribution<double> extra(0.0, spec.target_noise > 0.0 ? spec.target_noise : 1.0);
  for (std::size_t i = 0; i < tgt.x.rows(); ++i) {
    const double px = tgt.x(i, 0) - centre[0], py = tgt.x(i, 1) - centre[1];
    double rx = c * px - s * py + centre[0] + spec.translation[0];
    double ry = s * px + c * py + centre[1] + spec.translation[1];
    if (spec.target_noise > 0.0) {
      rx += extra(tgt_rng);
      ry += extra(tgt_rng);
    }
    tgt.x(i, 0) = rx;
    tgt.x(i, 1) = ry;
  }
  d.target.x = std::move(tgt.x);
  d.target_hidden = HiddenLabels(std::move(tgt.y));
  d.validation.x = DenseMatrix(0, 2);
  return d;
}

// ---------------------------------------------------------------------------

LabeledSet parse_sparse_bow(std::istream& is, std::size_t dim) {
  if (dim == 0) throw ConfigError("sparse input dimension must be positive");
  std::vector<double> values;
  std::vector<int> labels;
  std::string line, tok;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    if (!(ls >> tok)) continue;  // blank line
    labels.push_back(parse_label(tok, line_no));
    const std::size_t base = values.size();
    values.resize(base + dim, 0.0);
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0) parse_fail(line_no, "expected <index>:<value>, got '" + tok + "'");
      const std::string idx_s = tok.substr(0, colon);
      if (!std::all_of(idx_s.begin(), idx_s.end(), [](char ch) { return ch >= '0' && ch <= '9'; }))
        parse_fail(line_no, "bad feature index '" + idx_s + "'");
      errno = 0;
      const unsigned long long idx = std::strtoull(idx_s.c_str(), nullptr, 10);
      if (errno == ERANGE || idx >= dim)
        parse_fail(line_no, "feature index " + idx_s + " out of range for dimension " + std::to_string(dim));
      values[base + idx] = parse_double(tok.substr(colon + 1), line_no);
    }
  }
  LabeledSet out;
  out.x = DenseMatrix(labels.size(), dim, std::move(values));
  out.y = std::move(labels);
  return out;
}

LabeledSet load_sparse_bow(const std::filesystem::path& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sparse input '" + path.string() + "'");
  try {
    return parse_sparse_bow(in, dim);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_sparse_bow(const LabeledSet& data, std::ostream& os) {
  for (std::size_t r = 0; r < data.x.rows(); ++r) {
    os << data.y[r];
    auto row = data.x.row(r);
    for (std::size_t c = 0; c < row.size(); ++c)
      if (row[c] != 0.0) os << ' ' << c << ':' << format_double(row[c]);
    os << '\n';
  }
}

void write_labeled_csv(const DenseMatrix& x, std::span<const int> y, std::ostream& os) {
  if (y.size() != x.rows()) throw DimensionError("write_labeled_csv: label count mismatch");
  for (std::size_t c = 0; c < x.cols(); ++c) os << 'x' << c << ',';
  os << "label\n";
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (double v : x.row(r)) os << format_double(v) << ',';
    os << y[r] << '\n';
  }
}

LabeledSet read_labeled_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("line 1: missing CSV header");
  const std::size_t n_cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (n_cols < 2 || line.substr(line.rfind(',') + 1).rfind("label", 0) != 0)
    throw ParseError("line 1: CSV header must end with a 'label' column");
  const std::size_t dim = n_cols - 1;
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ls, cell, ',')) {
      if (col < dim) {
        values.push_back(parse_double(cell, line_no));
      } else if (col == dim) {
        char* end = nullptr;
        const long v = std::strtol(cell.c_str(), &end, 10);
        if (cell.empty() || *end != '\0' || v < 0) parse_fail(line_no, "bad label '" + cell + "'");
        labels.push_back(static_cast<int>(v));
      }
      ++col;
    }
    if (col != n_cols) parse_fail(line_no, "expected " + std::to_string(n_cols) + " columns, got " + std::to_string(col));
  }
  LabeledSet out;
  out.x = DenseMatrix(labels.size(), dim, std::move(values));
  out.y = std::move(labels);
  return out;
}

LabeledSet load_labeled_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV '" + path.string() + "'");
  try {
    return read_labeled_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

DomainDataset dataset_from_parts(LabeledSet source, LabeledSet target_with_labels, std::size_t num_classes) {
  DomainDataset d;
  d.num_classes = num_classes;
  d.source = std::move(source);
  d.target.x = std::move(target_with_labels.x);
  d.target_hidden = HiddenLabels(std::move(target_with_labels.y));
  d.validation.x = DenseMatrix(0, d.source.x.cols());
  d.validate();
  return d;
}

void write_shift_spec(const ShiftSpec& spec, std::ostream& os) {
  os << "[gen]\n"
     << "generator = " << to_string(spec.generator) << '\n'
     << "n_source = " << spec.n_source << '\n'
     << "n_target = " << spec.n_target << '\n'
     << "num_classes = " << spec.num_classes << '\n'
     << "rotation_deg = " << format_double(spec.rotation_deg) << '\n'
     << "translation_x = " << format_double(spec.translation[0]) << '\n'
     << "translation_y = " << format_double(spec.translation[1]) << '\n'
     << "noise_sigma = " << format_double(spec.noise_sigma) << '\n'
     << "target_noise = " << format_double(spec.target_noise) << '\n'
     << "seed = " << spec.seed << '\n';
}

DomainDataset split(DomainDataset dataset, std::size_t val_count, std::uint64_t seed) {
  if (val_count == 0) return dataset;
  if (!dataset.target_hidden) throw ConfigError("split: target labels are required for a validation split");
  const std::size_t n = dataset.target.x.rows();
  if (val_count >= n)
    throw ConfigError("split: val_count " + std::to_string(val_count) + " must be smaller than the " +
                      std::to_string(n) + " target rows");
  Rng64 rng = sub_rng(seed, 3);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<char> is_val(n, 0);
  for (std::size_t i = 0; i < val_count; ++i) is_val[perm[i]] = 1;

  std::vector<std::size_t> keep, val;
  for (std::size_t i = 0; i < n; ++i) (is_val[i] ? val : keep).push_back(i);
  auto labels = dataset.target_hidden->reveal();

  LabeledSet v;
  v.x = dataset.target.x.select_rows(val);
  for (auto i : val) v.y.push_back(labels[i]);
  std::vector<int> kept_labels;
  for (auto i : keep) kept_labels.push_back(labels[i]);

  dataset.validation.x = DenseMatrix::vstack(dataset.validation.x, v.x);
  dataset.validation.y.insert(dataset.validation.y.end(), v.y.begin(), v.y.end());
  dataset.target.x = dataset.target.x.select_rows(keep);
  dataset.target_hidden = HiddenLabels(std::move(kept_labels));
  return dataset;
}

Standardizer Standardizer::fit(const DenseMatrix& source) {
  Standardizer s;
  const std::size_t d = source.cols();
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 1.0);
  if (source.rows() == 0) return s;
  for (std::size_t r = 0; r < source.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c) s.mean[c] += source(r, c);
  for (auto& m : s.mean) m /= static_cast<double>(source.rows());
  std::vector<double> var(d, 0.0);
  for (std::size_t r = 0; r < source.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c) var[c] += (source(r, c) - s.mean[c]) * (source(r, c) - s.mean[c]);
  for (std::size_t c = 0; c < d; ++c) {
    const double sd = std::sqrt(var[c] / static_cast<double>(source.rows()));
    s.scale[c] = sd > 0.0 ? 1.0 / sd : 1.0;  // constant features stay centred
  }
  return s;
}

DenseMatrix Standardizer::apply(const DenseMatrix& x) const {
  if (x.rows() > 0 && x.cols() != mean.size()) throw DimensionError("Standardizer: feature dim mismatch");
  DenseMatrix out = x;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean[c]) * scale[c];
  return out;
}

void Standardizer::apply_to(DomainDataset& d) const {
  d.source.x = apply(d.source.x);
  d.target.x = apply(d.target.x);
  if (d.validation.x.rows() > 0) d.validation.x = apply(d.validation.x);
}

}  // namespace tritrain

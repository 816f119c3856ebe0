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


#include "run_config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tritrain/errors.hpp"

namespace tritrain::cli {
namespace {

constexpr KeySpec kKeys[] = {
    {"run.seed", "0", "single seed for data generation, initialisation, batching and sampling"},
    {"run.output_dir", "out", "directory receiving manifest.ini and all outputs"},

    {"data.format", "csv", "csv (x0..x{d-1},label) or bow (sparse `label idx:val ...`)"},
    {"data.source", "", "labeled source file; empty = generate from [gen]"},
    {"data.target", "", "target file; its labels are hidden from training"},
    {"data.test", "", "optional labeled target test file; default = the target pool"},
    {"data.dim", "0", "feature dimension (bow only)"},
    {"data.num_classes", "2", "number of classes in loaded data"},
    {"data.val_count", "0", "target rows moved into a labeled validation split"},
    {"data.standardize", "false", "standardise features with source mean/std"},

    {"gen.generator", "two_moons", "two_moons or gaussian_blobs"},
    {"gen.n_source", "500", "source samples"},
    {"gen.n_target", "500", "target samples"},
    {"gen.num_classes", "2", "classes (two_moons requires 2)"},
    {"gen.rotation_deg", "30", "target rotation about the origin, degrees"},
    {"gen.translation_x", "0", "target translation, x"},
    {"gen.translation_y", "0", "target translation, y"},
    {"gen.noise_sigma", "0.1", "isotropic noise of the base generator"},
    {"gen.target_noise", "0", "extra isotropic noise on target points"},

    {"net.hidden", "16", "comma-separated hidden widths of F"},
    {"net.activation", "relu", "relu or sigmoid"},
    {"net.use_bn", "true", "batch normalisation on the output of F"},
    {"net.branch_hidden", "", "comma-separated hidden widths of each branch"},
    {"net.dropout_labeling", "0", "dropout rate at the input of F1 and F2"},
    {"net.dropout_target", "0", "dropout rate at the input of Ft"},
    {"net.bn_eps", "1e-05", "batch-norm epsilon"},
    {"net.bn_momentum", "0.9", "batch-norm running-average momentum"},

    {"train.steps", "20", "adaptation steps after pretraining (0 = pretrain only)"},
    {"train.iter_per_phase", "auto", "mini-batch iterations per phase; auto = one pass"},
    {"train.pretrain_iters", "auto", "source pretraining iterations; auto = iter_per_phase"},
    {"train.batch_labeling", "64", "batch size for F, F1, F2 updates"},
    {"train.batch_target", "128", "batch size for F, Ft updates"},
    {"train.optimizer", "momentum_sgd", "momentum_sgd or adagrad"},
    {"train.lr", "0.01", "learning rate"},
    {"train.momentum", "0.9", "momentum coefficient (momentum_sgd)"},
    {"train.adagrad_eps", "1e-08", "Adagrad epsilon"},
    {"train.lambda", "0.01", "weight of the |W1^T W2| penalty (0 disables it)"},
    {"train.gate_f1_f2", "true", "let F1/F2 losses update F"},
    {"train.gate_ft", "true", "let the Ft loss update F"},
    {"train.lr_decay_step", "none", "after this step the learning rate becomes lr_decay_to"},
    {"train.lr_decay_to", "0.001", "learning rate after lr_decay_step"},
    {"train.verbose", "false", "log per-step metrics to stderr"},

    {"label.threshold", "0.9", "confidence threshold (strict >) for pseudo-labels"},
    {"label.n_init", "5000", "candidates at the initial labeling"},
    {"label.cap", "40000", "ceiling on candidates per step"},
    {"label.steps_divisor", "20", "candidates at step k = floor(k n / divisor)"},

    {"eval.checkpoint", "", "checkpoint read by eval and adist"},
    {"eval.branch", "ft", "f1, f2, ft or all"},

    {"adist.layer", "f", "features compared besides raw inputs: f (output of F)"},
    {"adist.heldout_fraction", "0.5", "fraction of each fold held out for scoring"},
    {"adist.folds", "5", "random splits averaged"},
    {"adist.epochs", "300", "domain-classifier training epochs"},
    {"adist.lr", "0.5", "domain-classifier learning rate"},

    {"bound.generator", "gaussian_blobs", "generator of the bound-check instance"},
    {"bound.n_source", "50", "source samples"},
    {"bound.n_target", "50", "target samples"},
    {"bound.rotation_deg", "0", "target rotation, degrees"},
    {"bound.translation_x", "0.5", "target translation, x"},
    {"bound.translation_y", "0", "target translation, y"},
    {"bound.noise_sigma", "0.5", "base generator noise"},
    {"bound.thresholds_per_feature", "3", "stump thresholds per feature"},
    {"bound.pseudo_flip", "0.2", "fraction of target labels flipped to form pseudo-labels"},
    {"bound.fault_c_offset", "0", "test only: offset added to C before checking"},
};

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : kKeys)
    if (key == k.key) return &k;
  return nullptr;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError(key + ": invalid value '" + value + "' (expected " + expected + ")");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  if (v.empty() || v[0] == '-' || v[0] == '+') bad_value(key, v, "a non-negative integer");
  char* end = nullptr;
  errno = 0;
  const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
  if (*end != '\0' || errno == ERANGE) bad_value(key, v, "a non-negative integer");
  return static_cast<std::size_t>(n);
}

template <class F>
auto wrap(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

}  // namespace

std::span<const KeySpec> known_keys() { return kKeys; }

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  return parse(in, path.string());
}

RunConfig RunConfig::parse(std::istream& is, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(origin + ": key '" + section + "' is outside any [section]");
    for (const auto& [name, leaf] : body) c.set(section + "." + name, leaf.data());
  }
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (find_key(key) == nullptr) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = trim(value);
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string RunConfig::get(const std::string& key) const {
  const KeySpec* spec = find_key(key);
  if (spec == nullptr) throw ConfigError("unknown config key '" + key + "'");
  const auto it = values_.find(key);
  return it != values_.end() ? it->second : spec->default_value;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string v = get(key);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || !std::isfinite(d)) bad_value(key, v, "a finite number");
  return d;
}

std::size_t RunConfig::get_count(const std::string& key) const { return parse_count(key, get(key)); }

std::uint64_t RunConfig::get_u64(const std::string& key) const { return parse_count(key, get(key)); }

bool RunConfig::get_bool(const std::string& key) const {
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true or false");
}

std::optional<std::size_t> RunConfig::get_optional_count(const std::string& key) const {
  const std::string v = get(key);
  if (v.empty() || v == "auto" || v == "none") return std::nullopt;
  return parse_count(key, v);
}

std::vector<std::size_t> RunConfig::get_count_list(const std::string& key) const {
  const std::string v = get(key);
  std::vector<std::size_t> out;
  if (v.empty()) return out;
  for (const auto& item : split_list(v)) out.push_back(parse_count(key, item));
  return out;
}

void RunConfig::write_resolved(std::ostream& os, std::span<const std::string> sections) const {
  for (const auto& section : sections) {
    os << '[' << section << "]\n";
    const std::string prefix = section + ".";
    for (const auto& k : kKeys) {
      const std::string key = k.key;
      if (key.rfind(prefix, 0) != 0) continue;
      os << "; " << k.help << '\n' << key.substr(prefix.size()) << " = " << get(key) << '\n';
    }
    os << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

ShiftSpec shift_spec(const RunConfig& c, const std::string& s) {
  ShiftSpec spec;
  spec.generator = wrap(s + ".generator", [&] { return generator_from_string(c.get(s + ".generator")); });
  spec.n_source = c.get_count(s + ".n_source");
  spec.n_target = c.get_count(s + ".n_target");
  spec.rotation_deg = c.get_double(s + ".rotation_deg");
  spec.translation = {c.get_double(s + ".translation_x"), c.get_double(s + ".translation_y")};
  spec.noise_sigma = c.get_double(s + ".noise_sigma");
  spec.seed = c.get_u64("run.seed");
  return spec;
}

}  // namespace

ShiftSpec shift_spec_from(const RunConfig& c) {
  ShiftSpec spec = shift_spec(c, "gen");
  spec.num_classes = c.get_count("gen.num_classes");
  spec.target_noise = c.get_double("gen.target_noise");
  wrap("gen", [&] { spec.validate(); });
  return spec;
}

NetConfig net_config_from(const RunConfig& c) {
  NetConfig n;
  n.hidden = c.get_count_list("net.hidden");
  n.activation = wrap("net.activation", [&] { return layer_kind_from_string(c.get("net.activation")); });
  if (n.activation != LayerKind::relu && n.activation != LayerKind::sigmoid)
    bad_value("net.activation", c.get("net.activation"), "relu or sigmoid");
  n.use_bn = c.get_bool("net.use_bn");
  n.branch_hidden = c.get_count_list("net.branch_hidden");
  n.dropout_labeling = c.get_double("net.dropout_labeling");
  n.dropout_target = c.get_double("net.dropout_target");
  n.bn_eps = c.get_double("net.bn_eps");
  n.bn_momentum = c.get_double("net.bn_momentum");
  return n;
}

TrainConfig train_config_from(const RunConfig& c) {
  TrainConfig t;
  t.net = net_config_from(c);
  t.iter_per_phase = c.get_optional_count("train.iter_per_phase");
  t.pretrain_iters = c.get_optional_count("train.pretrain_iters");
  t.steps_k = c.get_count("train.steps");
  t.batch_labeling = c.get_count("train.batch_labeling");
  t.batch_target = c.get_count("train.batch_target");
  t.optimizer = wrap("train.optimizer", [&] { return optimizer_kind_from_string(c.get("train.optimizer")); });
  t.lr = c.get_double("train.lr");
  t.momentum = c.get_double("train.momentum");
  t.adagrad_eps = c.get_double("train.adagrad_eps");
  t.lambda = c.get_double("train.lambda");
  t.gates.from_f1_f2 = c.get_bool("train.gate_f1_f2");
  t.gates.from_ft = c.get_bool("train.gate_ft");
  t.lr_decay_step = c.get_optional_count("train.lr_decay_step");
  t.lr_decay_to = c.get_double("train.lr_decay_to");
  t.verbose = c.get_bool("train.verbose");
  t.labeling.threshold = c.get_double("label.threshold");
  t.labeling.n_init = c.get_count("label.n_init");
  t.labeling.cap = c.get_count("label.cap");
  t.labeling.steps_divisor = c.get_count("label.steps_divisor");
  t.seed = c.get_u64("run.seed");
  return t;
}

ADistanceOptions adist_options_from(const RunConfig& c) {
  if (c.get("adist.layer") != "f") bad_value("adist.layer", c.get("adist.layer"), "f");
  ADistanceOptions o;
  o.heldout_fraction = c.get_double("adist.heldout_fraction");
  o.folds = c.get_count("adist.folds");
  o.epochs = c.get_count("adist.epochs");
  o.lr = c.get_double("adist.lr");
  o.seed = c.get_u64("run.seed");
  return o;
}

namespace {

LabeledSet load_labeled(const RunConfig& c, const std::string& key) {
  const std::filesystem::path path = c.get(key);
  if (!std::filesystem::exists(path)) throw IoError(key + ": file '" + path.string() + "' does not exist");
  const std::string format = c.get("data.format");
  if (format == "csv") return load_labeled_csv(path);
  if (format == "bow") {
    const std::size_t dim = c.get_count("data.dim");
    if (dim == 0) throw ConfigError("data.dim: must be positive for bow data");
    return load_sparse_bow(path, dim);
  }
  bad_value("data.format", format, "csv or bow");
}

}  // namespace

LoadedData load_dataset(const RunConfig& c) {
  LoadedData out;
  if (c.get("data.source").empty()) {
    const ShiftSpec spec = shift_spec_from(c);
    out.data = generate(spec);
  } else {
    if (c.get("data.target").empty()) throw ConfigError("data.target: required when data.source is set");
    LabeledSet source = load_labeled(c, "data.source");
    LabeledSet target = load_labeled(c, "data.target");
    out.data = dataset_from_parts(std::move(source), std::move(target), c.get_count("data.num_classes"));
  }
  out.data = split(std::move(out.data), c.get_count("data.val_count"), c.get_u64("run.seed"));
  if (!c.get("data.test").empty()) {
    out.test = load_labeled(c, "data.test");
  } else if (out.data.target_hidden) {
    out.test = out.data.target_eval_set();
  }
  if (c.get_bool("data.standardize")) {
    const Standardizer z = Standardizer::fit(out.data.source.x);
    z.apply_to(out.data);
    if (!out.test.empty()) out.test.x = z.apply(out.test.x);
  }
  out.data.validate();
  return out;
}

BoundInstance bound_instance_from(const RunConfig& c) {
  const ShiftSpec spec = shift_spec(c, "bound");
  wrap("bound", [&] { spec.validate(); });
  const DomainDataset d = generate(spec);
  BoundInstance inst;
  inst.source = d.source;
  inst.target = d.target_eval_set();

  const std::size_t per_feature = c.get_count("bound.thresholds_per_feature");
  const DenseMatrix all = DenseMatrix::vstack(inst.source.x, inst.target.x);
  inst.h = wrap("bound", [&] { return HypothesisClass::stumps_for(all, per_feature); });
  const std::size_t work = inst.h.size() * all.rows();
  if (work > kBoundWorkCap)
    throw ConfigError("bound: instance too large (|H| * samples = " + std::to_string(work) + " > " +
                      std::to_string(kBoundWorkCap) + ")");

  const double flip = c.get_double("bound.pseudo_flip");
  if (flip < 0.0 || flip > 1.0) bad_value("bound.pseudo_flip", c.get("bound.pseudo_flip"), "a value in [0, 1]");
  inst.pseudo = inst.target;
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32), 4u};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(inst.pseudo.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_flip = static_cast<std::size_t>(flip * static_cast<double>(order.size()));
  for (std::size_t i = 0; i < n_flip; ++i) {
    int& y = inst.pseudo.y[order[i]];
    y = 1 - y;
  }
  return inst;
}

}  // namespace tritrain::cli

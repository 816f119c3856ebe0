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

#include "tritrain/checkpoint.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "tritrain/errors.hpp"

namespace tritrain {

namespace {

constexpr int kVersion = 1;

std::string hex(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

void put_matrix(std::ostream& os, const DenseMatrix& m) {
  os << "matrix " << m.rows() << ' ' << m.cols();
  for (double v : m.values()) os << ' ' << hex(v);
  os << '\n';
}

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::string word() {
    std::string w;
    if (!(is_ >> w)) throw ParseError("checkpoint: unexpected end of file");
    return w;
  }

  void expect(const std::string& w) {
    const std::string got = word();
    if (got != w) throw ParseError("checkpoint: expected '" + w + "', found '" + got + "'");
  }

  std::size_t count() {
    const std::string w = word();
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(w.c_str(), &end, 10);
    if (w.empty() || *end != '\0' || errno == ERANGE || w[0] == '-')
      throw ParseError("checkpoint: bad count '" + w + "'");
    return static_cast<std::size_t>(v);
  }

  double real() {
    const std::string w = word();
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (w.empty() || *end != '\0') throw ParseError("checkpoint: bad number '" + w + "'");
    return v;
  }

  DenseMatrix matrix() {
    expect("matrix");
    const std::size_t r = count(), c = count();
    if (r > (1u << 24) || c > (1u << 24) || r * c > (1u << 28)) throw ParseError("checkpoint: matrix too large");
    std::vector<double> data(r * c);
    for (auto& v : data) v = real();
    return DenseMatrix(r, c, std::move(data));
  }

  std::string rest_of_line() {
    std::string line;
    std::getline(is_ >> std::ws, line);
    return line;
  }

 private:
  std::istream& is_;
};

Sequential read_part(Reader& rd, const char* name) {
  rd.expect("part");
  rd.expect(name);
  const std::size_t n_layers = rd.count();
  std::vector<LayerSpec> specs;
  std::vector<Layer> layers;
  for (std::size_t i = 0; i < n_layers; ++i) {
    rd.expect("layer");
    LayerSpec spec;
    spec.kind = layer_kind_from_string(rd.word());
    spec.in_dim = rd.count();
    spec.out_dim = rd.count();
    spec.dropout_rate = rd.real();
    spec.bn_eps = rd.real();
    spec.bn_momentum = rd.real();
    Layer layer;
    layer.spec = spec;
    const std::size_t n_params = rd.count();
    for (std::size_t p = 0; p < n_params; ++p) layer.params.push_back(rd.matrix());
    if (spec.kind == LayerKind::batch_norm) {
      rd.expect("bnstats");
      layer.bn_stats.batches_seen = rd.count();
      layer.bn_stats.running_mean = rd.matrix();
      layer.bn_stats.running_var = rd.matrix();
    }
    specs.push_back(spec);
    layers.push_back(std::move(layer));
  }
  Sequential seq(specs);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& dst = seq.layers()[i];
    if (layers[i].params.size() != dst.params.size())
      throw ParseError(std::string("checkpoint: wrong parameter count in part ") + name);
    for (std::size_t p = 0; p < dst.params.size(); ++p) {
      if (!layers[i].params[p].same_shape(dst.params[p]))
        throw ParseError(std::string("checkpoint: parameter shape mismatch in part ") + name);
      dst.params[p] = std::move(layers[i].params[p]);
    }
    dst.bn_stats = std::move(layers[i].bn_stats);
  }
  return seq;
}

}  // namespace

void save_checkpoint(const TrainingSession& s, std::ostream& os) {
  const TriNet& net = s.net;
  os << "tritrain-checkpoint " << kVersion << '\n';
  os << "net " << net.input_dim() << ' ' << net.num_classes() << ' ' << hex(net.lambda()) << ' '
     << net.gates().from_f1_f2 << ' ' << net.gates().from_ft << '\n';
  const std::pair<Part, const char*> parts[] = {{Part::f, "f"}, {Part::f1, "f1"}, {Part::f2, "f2"}, {Part::ft, "ft"}};
  for (const auto& [p, name] : parts) {
    const auto& layers = net.part(p).layers();
    os << "part " << name << ' ' << layers.size() << '\n';
    for (const auto& l : layers) {
      os << "layer " << to_string(l.spec.kind) << ' ' << l.spec.in_dim << ' ' << l.spec.out_dim << ' '
         << hex(l.spec.dropout_rate) << ' ' << hex(l.spec.bn_eps) << ' ' << hex(l.spec.bn_momentum) << ' '
         << l.params.size() << '\n';
      for (const auto& m : l.params) put_matrix(os, m);
      if (l.spec.kind == LayerKind::batch_norm) {
        os << "bnstats " << l.bn_stats.batches_seen << '\n';
        put_matrix(os, l.bn_stats.running_mean);
        put_matrix(os, l.bn_stats.running_var);
      }
    }
  }
  const auto& opt = s.optimizer;
  os << "optimizer " << to_string(opt.kind) << ' ' << hex(opt.lr) << ' ' << hex(opt.momentum) << ' '
     << hex(opt.adagrad_eps) << ' ' << opt.slots.size() << '\n';
  for (const auto& m : opt.slots) put_matrix(os, m);
  os << "rng " << s.rng << '\n';
  os << "session " << s.next_step << ' ' << s.pseudo.step << ' ' << s.pseudo.n_candidates << ' '
     << s.pseudo.entries.size() << '\n';
  for (const auto& e : s.pseudo.entries)
    os << "pl " << e.target_index << ' ' << e.label << ' ' << hex(e.confidence) << ' ' << e.step << '\n';
  os << "end\n";
}

namespace {

TrainingSession load_checkpoint_impl(std::istream& is) {
  Reader rd(is);
  rd.expect("tritrain-checkpoint");
  if (rd.count() != kVersion) throw ParseError("checkpoint: unsupported format version");
  rd.expect("net");
  const std::size_t input_dim = rd.count();
  const std::size_t num_classes = rd.count();
  const double lambda = rd.real();
  GradientGates gates{rd.count() != 0, rd.count() != 0};
  Sequential f = read_part(rd, "f");
  Sequential f1 = read_part(rd, "f1");
  Sequential f2 = read_part(rd, "f2");
  Sequential ft = read_part(rd, "ft");

  TrainingSession s;
  try {
    s.net = TriNet(std::move(f), std::move(f1), std::move(f2), std::move(ft), num_classes, lambda, gates);
  } catch (const ConfigError& e) {
    throw ParseError(std::string("checkpoint: inconsistent network: ") + e.what());
  }
  if (s.net.input_dim() != input_dim) throw ParseError("checkpoint: input dimension mismatch");

  rd.expect("optimizer");
  s.optimizer.kind = optimizer_kind_from_string(rd.word());
  s.optimizer.lr = rd.real();
  s.optimizer.momentum = rd.real();
  s.optimizer.adagrad_eps = rd.real();
  const std::size_t n_slots = rd.count();
  for (std::size_t i = 0; i < n_slots; ++i) s.optimizer.slots.push_back(rd.matrix());

  rd.expect("rng");
  std::istringstream rng_state(rd.rest_of_line());
  if (!(rng_state >> s.rng)) throw ParseError("checkpoint: bad rng state");

  rd.expect("session");
  s.next_step = rd.count();
  s.pseudo.step = rd.count();
  s.pseudo.n_candidates = rd.count();
  const std::size_t n_entries = rd.count();
  for (std::size_t i = 0; i < n_entries; ++i) {
    rd.expect("pl");
    PseudoLabel e;
    e.target_index = rd.count();
    e.label = static_cast<int>(rd.count());
    e.confidence = rd.real();
    e.step = rd.count();
    s.pseudo.entries.push_back(e);
  }
  rd.expect("end");
  return s;
}

}  // namespace

TrainingSession load_checkpoint(std::istream& is) {
  try {
    return load_checkpoint_impl(is);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint_file(const TrainingSession& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  save_checkpoint(s, out);
  if (!out) throw IoError("error writing checkpoint '" + path.string() + "'");
}

TrainingSession load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  try {
    return load_checkpoint(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace tritrain

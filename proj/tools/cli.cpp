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


#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "run_config.hpp"
#include "tritrain/analysis.hpp"
#include "tritrain/checkpoint.hpp"
#include "tritrain/errors.hpp"
#include "tritrain/trainer.hpp"

namespace tritrain::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Flags {
  std::string config_path;
  std::string output_dir;
  std::string seed;
  std::vector<std::string> sets;
  std::string checkpoint;
  std::string branch;
  bool inject_fault = false;
};

struct Command {
  const char* name;
  const char* summary;
  std::vector<std::string> sections;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> cmds = {
      {"gen-data", "generate a synthetic source/target pair from [gen]", {"run", "gen"}},
      {"train", "run asymmetric tri-training; writes metrics, checkpoint, report",
       {"run", "data", "gen", "net", "train", "label", "adist"}},
      {"eval", "target accuracy of a checkpoint, per branch", {"run", "data", "gen", "eval"}},
      {"adist", "proxy A-distance on raw inputs and on F features", {"run", "data", "gen", "eval", "adist"}},
      {"bound-check", "exhaustively verify the target-risk bounds on a small instance", {"run", "bound"}},
  };
  return cmds;
}

std::string keys_help(const std::vector<std::string>& sections) {
  std::ostringstream os;
  os << "\nConfig keys (INI sections; override with --set section.key=value):\n";
  for (const auto& k : known_keys()) {
    const std::string key = k.key;
    const std::string section = key.substr(0, key.find('.'));
    if (std::find(sections.begin(), sections.end(), section) == sections.end()) continue;
    os << "  " << key << " [" << (*k.default_value ? k.default_value : "\"\"") << "]\n      " << k.help << '\n';
  }
  os << "\nExit codes: 0 ok, 1 internal error, 2 usage/config, 3 I/O, 4 verification failure,\n"
        "            5 malformed data or checkpoint, 6 inconsistent input.\n";
  return os.str();
}

fs::path prepare_output(const RunConfig& c) {
  const fs::path dir = c.get("run.output_dir");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void write_manifest(const RunConfig& c, const Command& cmd, const Flags& flags, const fs::path& dir) {
  std::ofstream os(dir / "manifest.ini");
  if (!os) throw IoError("cannot write '" + (dir / "manifest.ini").string() + "'");
  os << "; tritrain run manifest: every key resolved, no hidden defaults.\n"
     << "; command: " << cmd.name << '\n'
     << "; config: " << (flags.config_path.empty() ? "(none)" : flags.config_path) << '\n'
     << "; re-run: tritrain " << cmd.name << " --config " << (dir / "manifest.ini").string() << "\n\n";
  c.write_resolved(os, cmd.sections);
  if (!os) throw IoError("error writing manifest");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  return os;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const RunConfig& c, const Command& cmd, const Flags& flags, std::ostream& out) {
  const ShiftSpec spec = shift_spec_from(c);
  const fs::path dir = prepare_output(c);
  write_manifest(c, cmd, flags, dir);
  const DomainDataset d = generate(spec);
  const LabeledSet target = d.target_eval_set();
  {
    auto os = open_out(dir / "source.csv");
    write_labeled_csv(d.source.x, d.source.y, os);
  }
  {
    auto os = open_out(dir / "target.csv");
    write_labeled_csv(target.x, target.y, os);
  }
  {
    auto os = open_out(dir / "shift_spec.ini");
    write_shift_spec(spec, os);
  }
  out << "wrote " << d.source.size() << " source and " << target.size() << " target rows to " << dir.string()
      << '\n';
  return kOk;
}

DenseMatrix features_of(TriNet& net, const DenseMatrix& x) {
  Rng unused(0);
  return net.features(x, Mode::eval, unused);
}

int cmd_train(const RunConfig& c, const Command& cmd, const Flags& flags, std::ostream& out) {
  TrainConfig cfg = train_config_from(c);
  const ADistanceOptions aopt = adist_options_from(c);
  LoadedData ld = load_dataset(c);
  cfg.net.input_dim = ld.data.feature_dim();
  cfg.net.num_classes = ld.data.num_classes;
  cfg.validate();
  const fs::path dir = prepare_output(c);
  write_manifest(c, cmd, flags, dir);

  Evaluation ev{ld.test, ld.data.target_hidden};
  const Evaluation* evp = ld.test.empty() && !ld.data.target_hidden ? nullptr : &ev;
  TrainingSession s = run(ld.data.source, ld.data.target, evp, cfg);

  ReportSummary summary;
  summary.a_distance_raw = a_distance(ld.data.source.x, ld.data.target.x, aopt).value;
  summary.a_distance_features =
      a_distance(features_of(s.net, ld.data.source.x), features_of(s.net, ld.data.target.x), aopt).value;
  emit_report(s.history, nullptr, summary, dir);
  save_checkpoint_file(s, dir / "checkpoint.txt");
  {
    auto os = open_out(dir / "pseudo_labels.csv");
    write_pseudo_labels_csv(s.pseudo, os);
  }

  const StepMetrics& last = s.history.back();
  out << "step " << last.step << ": n_pseudo " << last.n_pseudo;
  if (last.acc_ft) out << ", acc_f1 " << fmt(*last.acc_f1) << ", acc_f2 " << fmt(*last.acc_f2) << ", acc_ft "
                       << fmt(*last.acc_ft);
  out << ", d_A raw " << fmt(*summary.a_distance_raw) << ", d_A F " << fmt(*summary.a_distance_features) << '\n'
      << "outputs in " << dir.string() << '\n';
  return kOk;
}

TrainingSession load_session(const RunConfig& c) {
  const std::string path = c.get("eval.checkpoint");
  if (path.empty()) throw ConfigError("eval.checkpoint: required (or pass --checkpoint)");
  if (!fs::exists(path)) throw IoError("eval.checkpoint: file '" + path + "' does not exist");
  return load_checkpoint_file(path);
}

void check_dims(const TrainingSession& s, const DenseMatrix& x, const char* what) {
  if (x.cols() != s.net.input_dim())
    throw InputError(std::string(what) + " has " + std::to_string(x.cols()) + " features, checkpoint expects " +
                     std::to_string(s.net.input_dim()));
}

int cmd_eval(const RunConfig& c, const Command& cmd, const Flags& flags, std::ostream& out) {
  const std::string which = c.get("eval.branch");
  std::vector<Branch> branches;
  if (which == "all") {
    branches = {Branch::f1, Branch::f2, Branch::ft};
  } else {
    try {
      branches = {branch_from_string(which)};
    } catch (const Error&) {
      throw ConfigError("eval.branch: invalid value '" + which + "' (expected f1, f2, ft or all)");
    }
  }
  TrainingSession s = load_session(c);
  const LoadedData ld = load_dataset(c);
  if (ld.test.empty()) throw InputError("eval: no labeled target data (set data.test or use a labeled target)");
  check_dims(s, ld.test.x, "test data");
  const fs::path dir = prepare_output(c);
  write_manifest(c, cmd, flags, dir);

  json j;
  j["schema_version"] = 1;
  j["checkpoint"] = c.get("eval.checkpoint");
  j["n_test"] = ld.test.size();
  for (Branch b : branches) {
    const double acc = evaluate(s.net, ld.test, b);
    j["accuracy"][to_string(b)] = acc;
    out << "acc_" << to_string(b) << ' ' << fmt(acc) << '\n';
  }
  auto os = open_out(dir / "eval.json");
  os << j.dump(2) << '\n';
  return kOk;
}

int cmd_adist(const RunConfig& c, const Command& cmd, const Flags& flags, std::ostream& out) {
  const ADistanceOptions aopt = adist_options_from(c);
  TrainingSession s = load_session(c);
  const LoadedData ld = load_dataset(c);
  check_dims(s, ld.data.source.x, "source data");
  const fs::path dir = prepare_output(c);
  write_manifest(c, cmd, flags, dir);

  const ADistance raw = a_distance(ld.data.source.x, ld.data.target.x, aopt);
  const ADistance feat =
      a_distance(features_of(s.net, ld.data.source.x), features_of(s.net, ld.data.target.x), aopt);
  json j;
  j["schema_version"] = 1;
  j["raw"] = {{"d_A", raw.value}, {"epsilon", raw.epsilon}};
  j[c.get("adist.layer")] = {{"d_A", feat.value}, {"epsilon", feat.epsilon}};
  auto os = open_out(dir / "adist.json");
  os << j.dump(2) << '\n';
  out << "d_A raw " << fmt(raw.value) << "\nd_A " << c.get("adist.layer") << ' ' << fmt(feat.value) << '\n';
  return kOk;
}

json bound_json(const BoundReport& r) {
  json v = json::array();
  for (const auto& x : r.violations)
    v.push_back({{"hypothesis", x.hypothesis}, {"inequality", x.inequality}, {"lhs", x.lhs}, {"rhs", x.rhs}});
  json j = {{"n_hypotheses", r.n_hypotheses}, {"d_hdh", r.d_hdh}, {"C", r.c}, {"violations", v}};
  if (r.c_prime) j["C_prime"] = *r.c_prime;
  if (r.rho) j["rho"] = *r.rho;
  return j;
}

int cmd_bound_check(const RunConfig& c, const Command& cmd, const Flags& flags, std::ostream& out) {
  const BoundInstance inst = bound_instance_from(c);
  BoundCheckOptions opts;
  opts.c_offset = c.get_double("bound.fault_c_offset");
  const fs::path dir = prepare_output(c);
  write_manifest(c, cmd, flags, dir);

  const BoundReport t1 = verify_theorem1(inst.h, inst.source, inst.target, opts);
  const BoundReport rho = verify_rho_bound(inst.h, inst.source, inst.target, inst.pseudo, opts);
  {
    auto os = open_out(dir / "bound_theorem1.json");
    write_bound_report_json(t1, os);
  }
  {
    auto os = open_out(dir / "bound_rho.json");
    write_bound_report_json(rho, os);
  }
  const bool ok = t1.ok() && rho.ok();
  json j = {{"schema_version", 1}, {"ok", ok}, {"theorem1", bound_json(t1)}, {"rho_bound", bound_json(rho)}};
  {
    auto os = open_out(dir / "report.json");
    os << j.dump(2) << '\n';
  }
  out << "|H| " << t1.n_hypotheses << ", d_HdH " << fmt(t1.d_hdh) << ", C " << fmt(t1.c) << ", C' "
      << fmt(*rho.c_prime) << ", rho " << fmt(*rho.rho) << '\n'
      << "violations: theorem1 " << t1.violations.size() << ", rho-bound " << rho.violations.size() << '\n';
  for (const auto* r : {&t1, &rho})
    for (std::size_t i = 0; i < r->violations.size() && i < 5; ++i) {
      const auto& v = r->violations[i];
      out << "  h" << v.hypothesis << ' ' << v.inequality << ": " << v.lhs << " > " << v.rhs << '\n';
    }
  return ok ? kOk : kVerification;
}

int dispatch(const Command& cmd, const Flags& flags, std::ostream& out) {
  RunConfig c = flags.config_path.empty() ? RunConfig{} : RunConfig::load(flags.config_path);
  for (const auto& s : flags.sets) c.set_assignment(s);
  if (!flags.seed.empty()) c.set("run.seed", flags.seed);
  if (!flags.output_dir.empty()) c.set("run.output_dir", flags.output_dir);
  if (!flags.checkpoint.empty()) c.set("eval.checkpoint", flags.checkpoint);
  if (!flags.branch.empty()) c.set("eval.branch", flags.branch);
  if (flags.inject_fault) c.set("bound.fault_c_offset", "-0.1");
  c.get_u64("run.seed");

  const std::string name = cmd.name;
  if (name == "gen-data") return cmd_gen_data(c, cmd, flags, out);
  if (name == "train") return cmd_train(c, cmd, flags, out);
  if (name == "eval") return cmd_eval(c, cmd, flags, out);
  if (name == "adist") return cmd_adist(c, cmd, flags, out);
  return cmd_bound_check(c, cmd, flags, out);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"tritrain: asymmetric tri-training for unsupervised domain adaptation", "tritrain"};
  app.require_subcommand(1);
  std::vector<std::string> all_sections = {"run", "data", "gen", "net", "train", "label", "eval", "adist", "bound"};
  app.footer(keys_help(all_sections));

  Flags flags;
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& cmd : commands()) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.summary);
    sub->add_option("-c,--config", flags.config_path, "INI config file");
    sub->add_option("-o,--output-dir", flags.output_dir, "override run.output_dir");
    sub->add_option("--seed", flags.seed, "override run.seed");
    sub->add_option("--set", flags.sets, "override any key: section.key=value (repeatable)");
    const std::string name = cmd.name;
    if (name == "eval" || name == "adist")
      sub->add_option("--checkpoint", flags.checkpoint, "override eval.checkpoint");
    if (name == "eval") sub->add_option("--branch", flags.branch, "f1, f2, ft (default) or all");
    if (name == "bound-check")
      sub->add_flag("--inject-fault", flags.inject_fault, "test only: mis-compute C by -0.1 (must fail)");
    sub->footer(keys_help(cmd.sections));
    subs.emplace_back(sub, &cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  const Command* chosen = nullptr;
  for (const auto& [sub, cmd] : subs)
    if (sub->parsed()) chosen = cmd;

  try {
    return dispatch(*chosen, flags, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const Error& e) {
    err << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace tritrain::cli

#include "maxent/cli.hpp"

#include "maxent/ccp.hpp"
#include "maxent/fsc.hpp"
#include "maxent/mc_analysis.hpp"
#include "maxent/model.hpp"
#include "maxent/product.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace maxent {

namespace {

using ordered_json = nlohmann::ordered_json;

struct SynthFlags {
  Index memory = 1;
  double gamma = 0.0;
  int restarts = 10;
  std::uint64_t seed = 0;
  std::string mode = "maxent";
  double tau_max = CcpConfig{}.tau_max;
  int max_iters = CcpConfig{}.max_iters;
  int threads = 0;
};

void add_synth_flags(CLI::App* cmd, SynthFlags& f, bool with_memory, bool with_mode) {
  if (with_memory) cmd->add_option("--memory,-k", f.memory, "memory states k")->check(CLI::PositiveNumber);
  cmd->add_option("--gamma", f.gamma, "expected-reward threshold")->check(CLI::NonNegativeNumber);
  cmd->add_option("--restarts", f.restarts, "random restarts")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "base seed");
  if (with_mode) cmd->add_option("--mode", f.mode, "maxent, feasibility or mdp_bound");
  cmd->add_option("--tau-max", f.tau_max, "largest penalty weight")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iters", f.max_iters, "CCP iterations per restart")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", f.threads, "worker threads (0: MAXENT_THREADS or all cores)");
}

CcpConfig config_of(const SynthFlags& f) {
  CcpConfig cfg;
  cfg.restarts = f.restarts;
  cfg.seed = f.seed;
  cfg.tau_max = f.tau_max;
  cfg.max_iters = f.max_iters;
  cfg.threads = f.threads;
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream o(path, std::ios::binary);
  if (!o || !(o << text)) throw Error("io", "cannot write '" + path + "'");
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// JSON has no infinity; non-finite values become null.
ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

int exit_code_of(const SynthesisResult& r) {
  if (!r.entropy_finite) return kExitInfiniteEntropy;
  return r.converged ? kExitOk : kExitNotConverged;
}

ordered_json result_json(const SynthesisResult& r, SynthesisMode mode, Index memory, double gamma) {
  ordered_json doc;
  doc["mode"] = to_string(mode);
  doc["memory"] = memory;
  doc["gamma"] = gamma;
  doc["entropy_bits"] = number(r.entropy_bits);
  doc["expected_reward"] = number(r.expected_reward);
  doc["nu_initial"] = number(r.nu_initial);
  doc["converged"] = r.converged;
  doc["entropy_finite"] = r.entropy_finite;
  doc["iterations"] = r.iterations;
  doc["restart_index"] = r.restart_index;
  doc["slack_final"] = number(r.slack_final);
  if (!r.message.empty()) doc["message"] = r.message;
  return doc;
}

SynthesisResult run_synthesis(const Pomdp& m, const SynthFlags& f, SynthesisMode mode, Index memory, double gamma) {
  const auto problem = make_problem(m, memory, gamma, mode);
  return synthesize(problem, config_of(f));
}

int cmd_validate(const std::string& model_path, std::ostream& out) {
  const Pomdp m = load_model_or_builtin(model_path);
  const auto report = validate(m);
  out << report_to_json(report, m);
  return report.ok() ? kExitOk : kExitInput;
}

int cmd_synthesize(const std::string& model_path, const SynthFlags& f, const std::string& out_path,
                   const std::string& dump_path, std::ostream& out) {
  const Pomdp m = load_model_or_builtin(model_path);
  const auto mode = parse_mode(f.mode);
  if (!dump_path.empty()) {
    // First subproblem of restart 0, for checking with an external solver.
    const auto problem = make_problem(m, f.memory, f.gamma, mode);
    const auto cfg = config_of(f);
    const auto start = initialize(problem, cfg.seed, 0);
    write_file(dump_path, dump_subproblem(convexify(problem, start, cfg.tau0, cfg).sp));
  }
  const auto r = run_synthesis(m, f, mode, f.memory, f.gamma);
  const auto problem_memory = mode == SynthesisMode::mdp_bound ? Index{1} : f.memory;
  auto doc = result_json(r, mode, problem_memory, f.gamma);

  const Pomdp target = mode == SynthesisMode::mdp_bound ? to_fully_observable(m) : m;
  const auto controller = fsc_to_json(fsc_from_instantiation(r.best_u, target.observations, target.actions));
  if (out_path.empty()) {
    doc["controller"] = ordered_json::parse(controller);
  } else {
    write_file(out_path, controller);
    doc["controller_path"] = out_path;
  }
  out << doc.dump(2) << "\n";
  return exit_code_of(r);
}

int cmd_evaluate(const std::string& model_path, const std::string& controller_path, std::ostream& out) {
  const Pomdp m = load_model_or_builtin(model_path);
  const Fsc c = align_to(fsc_from_json(read_file(controller_path)), m.observations, m.actions);
  const auto eval = evaluate(instantiate(build_pmc(m, c.k), instantiation_of(c)));
  ordered_json doc;
  doc["memory"] = c.k;
  doc["entropy_bits"] = number(eval.entropy_bits);
  doc["expected_reward"] = number(eval.expected_reward);
  doc["entropy_finite"] = eval.entropy_finite;
  doc["reward_finite"] = eval.reward_finite;
  if (!eval.diagnostic.empty()) doc["diagnostic"] = eval.diagnostic;
  out << doc.dump(2) << "\n";
  return eval.entropy_finite ? kExitOk : kExitInfiniteEntropy;
}

int cmd_bound(const std::string& model_path, const SynthFlags& f, std::ostream& out) {
  const Pomdp m = load_model_or_builtin(model_path);
  const auto r = run_synthesis(m, f, SynthesisMode::mdp_bound, 1, f.gamma);
  auto doc = result_json(r, SynthesisMode::mdp_bound, 1, f.gamma);
  out << doc.dump(2) << "\n";
  return exit_code_of(r);
}

struct SweepFlags {
  std::string param;
  double from = 0.0;
  double to = 0.0;
  double step = 0.0;
  std::string out_path;
};

std::vector<double> sweep_values(const SweepFlags& s) {
  if (!(s.step > 0.0) || !(s.to >= s.from)) throw Error("range", "sweep range is empty");
  // Tolerance keeps 0.5..1.0 step 0.1 at six points despite rounding.
  const auto count = static_cast<long>(std::floor((s.to - s.from) / s.step + 1e-9)) + 1;
  std::vector<double> values;
  for (long i = 0; i < count; ++i) values.push_back(s.from + static_cast<double>(i) * s.step);
  return values;
}

int cmd_sweep(const std::string& model_path, const SweepFlags& s, const SynthFlags& f, std::ostream& out) {
  const Pomdp m = load_model_or_builtin(model_path);
  const auto mode = parse_mode(f.mode);
  const auto values = sweep_values(s);
  if (s.param == "memory") {
    for (double v : values) {
      if (v < 1.0 || std::abs(v - std::round(v)) > 1e-9) throw Error("range", "memory sweep needs integers >= 1");
    }
  }

  std::ostringstream csv;
  csv << "param,entropy_bits,expected_reward,converged,restart_best,iterations,wall_ms\n";
  int code = kExitOk;
  for (double v : values) {
    const auto start = std::chrono::steady_clock::now();
    const bool by_memory = s.param == "memory";
    const auto memory = by_memory ? static_cast<Index>(std::lround(v)) : f.memory;
    const double gamma = by_memory ? f.gamma : v;
    const auto r = run_synthesis(m, f, mode, memory, gamma);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    csv << (by_memory ? std::to_string(memory) : fmt6(v)) << ',' << fmt6(r.entropy_bits) << ','
        << fmt6(r.expected_reward) << ',' << (r.converged ? 1 : 0) << ',' << r.restart_index << ','
        << r.iterations << ',' << fmt6(ms) << '\n';
    code = std::max(code, exit_code_of(r));
  }
  if (s.out_path.empty()) {
    out << csv.str();
  } else {
    write_file(s.out_path, csv.str());
  }
  return code;
}

int cmd_export(const std::string& model_path, const std::string& out_path, std::ostream& out) {
  const auto text = serialize_model(load_model_or_builtin(model_path));
  if (out_path.empty()) {
    out << text;
  } else {
    write_file(out_path, text);
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Maximum-entropy finite-state controller synthesis for POMDPs"};
  app.require_subcommand(1);

  std::string model_path;
  std::string out_path;
  std::string controller_path;
  std::string dump_path;
  SynthFlags synth;
  SynthFlags bound_flags;
  SynthFlags sweep_flags;
  SweepFlags sweep;

  auto* validate_cmd = app.add_subcommand("validate", "check a model and print the report as JSON");
  validate_cmd->add_option("model", model_path, "model file or builtin:<name>")->required();

  auto* synth_cmd = app.add_subcommand("synthesize", "synthesize a controller");
  synth_cmd->add_option("model", model_path, "model file or builtin:<name>")->required();
  add_synth_flags(synth_cmd, synth, true, true);
  synth_cmd->add_option("--out", out_path, "write the controller JSON here");
  synth_cmd->add_option("--dump-subproblem", dump_path, "write the first convex subproblem here");

  auto* eval_cmd = app.add_subcommand("evaluate", "certify a controller on a model");
  eval_cmd->add_option("model", model_path, "model file or builtin:<name>")->required();
  eval_cmd->add_option("controller", controller_path, "controller JSON")->required();

  auto* bound_cmd = app.add_subcommand("bound", "fully observable upper-bound estimate");
  bound_cmd->add_option("model", model_path, "model file or builtin:<name>")->required();
  add_synth_flags(bound_cmd, bound_flags, false, false);

  auto* sweep_cmd = app.add_subcommand("sweep", "synthesize over a range of gamma or memory values");
  sweep_cmd->add_option("model", model_path, "model file or builtin:<name>")->required();
  sweep_cmd->add_option("--param", sweep.param, "gamma or memory")
      ->required()
      ->check(CLI::IsMember({"gamma", "memory"}));
  sweep_cmd->add_option("--from", sweep.from)->required();
  sweep_cmd->add_option("--to", sweep.to)->required();
  sweep_cmd->add_option("--step", sweep.step)->required();
  sweep_cmd->add_option("--out", sweep.out_path, "write the CSV here instead of stdout");
  add_synth_flags(sweep_cmd, sweep_flags, true, true);

  auto* export_cmd = app.add_subcommand("export-model", "print a model in canonical JSON");
  export_cmd->add_option("model", model_path, "model file or builtin:<name>")->required();
  export_cmd->add_option("--out", out_path, "write here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*validate_cmd) return cmd_validate(model_path, out);
    if (*synth_cmd) return cmd_synthesize(model_path, synth, out_path, dump_path, out);
    if (*eval_cmd) return cmd_evaluate(model_path, controller_path, out);
    if (*bound_cmd) return cmd_bound(model_path, bound_flags, out);
    if (*sweep_cmd) return cmd_sweep(model_path, sweep, sweep_flags, out);
    if (*export_cmd) return cmd_export(model_path, out_path, out);
  } catch (const Error& e) {
    err << "error [" << e.code() << "]: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace maxent

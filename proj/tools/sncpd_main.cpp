// Command line front end: train | detect | evaluate | verify | experiment.
//
// Every subcommand reads an optional flat key=value config file; any config
// key can be overridden with --set key=value, and the common knobs have
// dedicated flags. Precedence is flags > file > defaults. Exit codes: 0 on
// success, 2 usage/config, 3 parse, 4 convergence, 5 io, 1 anything else.

#include <exception>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "sncpd/commands.hpp"
#include "sncpd/errors.hpp"
#include "sncpd/runconfig.hpp"

namespace {

struct CommonFlags {
  std::string config_file;
  std::vector<std::string> sets;
  // value + provided flag for each dedicated option
  std::uint64_t seed = 0;
  std::string out, statistic, model, checkpoint;
  std::size_t window = 0, steps = 0;
  double cap_c = 0.0;
  std::vector<std::size_t> margins;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("-c,--config", f.config_file, "flat key=value config file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", f.sets, "extra key=value override (repeatable)");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out, "output root directory");
  cmd->add_option("--margin", f.margins, "detection margin (repeatable)");
  cmd->add_option("--statistic", f.statistic, "cos or mmd");
  cmd->add_option("--window", f.window, "detection window length");
  cmd->add_option("--cap-c", f.cap_c, "spectral norm cap");
  cmd->add_option("--model", f.model,
                  "sn-ts2vec, ts2vec, sn-byol or ts-byol");
  cmd->add_option("--steps", f.steps, "training steps");
  cmd->add_option("--checkpoint", f.checkpoint, "encoder checkpoint to load");
}

sncpd::RunConfig build_config(const CLI::App* cmd, const CommonFlags& f) {
  sncpd::RunConfig cfg;
  if (!f.config_file.empty()) cfg = sncpd::RunConfig::from_file(f.config_file);

  std::vector<std::pair<std::string, std::string>> overrides;
  for (const std::string& kv : f.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw sncpd::ConfigError("--set expects key=value, got '" + kv + "'");
    overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (cmd->count("--seed")) overrides.emplace_back("seed", std::to_string(f.seed));
  if (cmd->count("--out")) overrides.emplace_back("out", f.out);
  if (cmd->count("--margin")) {
    std::string joined;
    for (std::size_t i = 0; i < f.margins.size(); ++i) {
      if (i) joined += ',';
      joined += std::to_string(f.margins[i]);
    }
    overrides.emplace_back("margins", joined);
  }
  if (cmd->count("--statistic")) overrides.emplace_back("statistic", f.statistic);
  if (cmd->count("--window"))
    overrides.emplace_back("window", std::to_string(f.window));
  if (cmd->count("--cap-c")) overrides.emplace_back("cap_c", std::to_string(f.cap_c));
  if (cmd->count("--model")) overrides.emplace_back("model", f.model);
  if (cmd->count("--steps")) overrides.emplace_back("steps", std::to_string(f.steps));
  if (cmd->count("--checkpoint")) overrides.emplace_back("checkpoint", f.checkpoint);

  cfg.apply(overrides);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectrally normalized change point detection"};
  app.require_subcommand(1);

  CommonFlags train_f, detect_f, eval_f, verify_f, exp_f;
  std::string trace_path, experiment_kind;

  CLI::App* train = app.add_subcommand("train", "fit an encoder on the train split");
  add_common_flags(train, train_f);

  CLI::App* detect =
      app.add_subcommand("detect", "score the test split and write a trace");
  add_common_flags(detect, detect_f);

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "margin precision/recall/f1 of a trace");
  add_common_flags(evaluate, eval_f);
  evaluate->add_option("--trace", trace_path, "trace.csv to evaluate");

  CLI::App* verify = app.add_subcommand(
      "verify", "certify the norm cap, inversion, likelihood ratios and power");
  add_common_flags(verify, verify_f);

  CLI::App* experiment =
      app.add_subcommand("experiment", "dynamics or rejection study");
  add_common_flags(experiment, exp_f);
  experiment->add_option("kind", experiment_kind, "dynamics or rejection")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return sncpd::cmd_train(build_config(train, train_f));
    if (detect->parsed()) return sncpd::cmd_detect(build_config(detect, detect_f));
    if (evaluate->parsed())
      return sncpd::cmd_evaluate(build_config(evaluate, eval_f), trace_path);
    if (verify->parsed()) return sncpd::cmd_verify(build_config(verify, verify_f));
    if (experiment->parsed())
      return sncpd::cmd_experiment(build_config(experiment, exp_f), experiment_kind);
  } catch (const sncpd::ConfigError& e) {
    std::cerr << "error category=config: " << e.what() << '\n';
    return 2;
  } catch (const sncpd::DimensionError& e) {
    std::cerr << "error category=config: " << e.what() << '\n';
    return 2;
  } catch (const sncpd::ParseError& e) {
    std::cerr << "error category=parse: " << e.what() << '\n';
    return 3;
  } catch (const sncpd::ConvergenceError& e) {
    std::cerr << "error category=convergence: " << e.what() << '\n';
    return 4;
  } catch (const sncpd::IoError& e) {
    std::cerr << "error category=io: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error category=internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

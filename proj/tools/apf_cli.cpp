#include "apf/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace apf::cli;

  CLI::App app{"Active learning of plan feasibility for block stacking"};
  app.require_subcommand(1);

  LearnOptions learn;
  std::string learn_config, learn_resume, learn_out;
  auto* learn_cmd = app.add_subcommand("learn", "run the active learning loop");
  learn_cmd->add_option("--config", learn_config, "experiment config (JSON)");
  learn_cmd->add_option("--resume", learn_resume, "continue the run stored in this directory");
  learn_cmd->add_option("--out", learn_out, "output directory (default: $APF_OUTPUT_ROOT/<config name>)");
  learn_cmd->add_option("--threads", learn.threads, "worker threads for ensemble training")->check(CLI::NonNegativeNumber);

  EvaluateOptions eval;
  std::string eval_checkpoint, eval_out = ".";
  auto* eval_cmd = app.add_subcommand("evaluate", "plan towers with a feasibility model and report regret");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "model checkpoint (model.json)");
  eval_cmd->add_option("--task", eval.task, "tallest, overhang, unsupported or all");
  eval_cmd->add_option("--trials", eval.trials, "planning runs per task");
  eval_cmd->add_option("--samples", eval.samples, "Monte-Carlo samples per planning run");
  eval_cmd->add_option("--model", eval.model, "learned, analytical or simulation")
      ->check(CLI::IsMember({"learned", "analytical", "simulation"}));
  eval_cmd->add_option("--noise-sigma", eval.noise_sigma, "execution noise std (m); 0 for noiseless");
  eval_cmd->add_option("--seed", eval.seed, "evaluation seed");
  eval_cmd->add_option("--out", eval_out, "output directory");

  OracleOptions oracle;
  std::string oracle_out;
  auto* oracle_cmd = app.add_subcommand("oracle", "generate a balanced oracle-labelled test set");
  oracle_cmd->add_option("--count", oracle.count, "towers per size")->required();
  oracle_cmd->add_option("--sizes", oracle.sizes, "tower sizes, A..B")->required();
  oracle_cmd->add_option("--out", oracle_out, "output file")->required();
  oracle_cmd->add_option("--seed", oracle.seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*learn_cmd) {
    if (!learn_config.empty()) learn.config = learn_config;
    if (!learn_resume.empty()) learn.resume = learn_resume;
    if (!learn_out.empty()) learn.out = learn_out;
    return cmd_learn(learn, std::cerr);
  }
  if (*eval_cmd) {
    if (!eval_checkpoint.empty()) eval.checkpoint = eval_checkpoint;
    eval.out = eval_out;
    return cmd_evaluate(eval, std::cerr);
  }
  oracle.out = oracle_out;
  return cmd_oracle(oracle, std::cerr);
}

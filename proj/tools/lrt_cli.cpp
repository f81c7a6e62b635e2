// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   lrt_cli.cpp
 * @brief  `lrt` command-line entry point.
 *
 * Exit codes: 0 success, 1 usage error, 2 data/config error,
 * 3 numerical abort.
 */

#include <iostream>

#include <CLI11.hpp>

#include "lrt/commands.hpp"

int main(int argc, char **argv) {
  CLI::App app{"Liquid Reasoning Transformer on generated Sudoku"};
  app.require_subcommand(1, 1);

  lrt::GenDataOptions gen;
  std::string clues = "8";
  auto *gen_cmd = app.add_subcommand("gen-data", "Generate a unique-solution puzzle dataset");
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->default_val(1);
  gen_cmd->add_option("--box-size", gen.box_size, "Box size n (2 or 3)")->default_val(2);
  gen_cmd->add_option("--count", gen.count, "Number of puzzles")->default_val(100);
  gen_cmd->add_option("--clues", clues, "Target clue count, K or LO-HI")->default_val("8");
  gen_cmd->add_option("--out", gen.out, "Dataset path")->required();

  lrt::TrainOptions tr;
  auto *train_cmd = app.add_subcommand("train", "Train a model and write the best checkpoint");
  train_cmd->add_option("--data", tr.data, "Dataset path")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--config", tr.config, "Config file (key = value)")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.checkpoint, "Checkpoint path")->required();
  train_cmd->add_option("--log", tr.log, "Per-epoch log path")->required();
  train_cmd->add_option("--epochs", tr.epochs, "Override the configured epoch count");

  lrt::EvalOptions ev;
  auto *eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev.data, "Dataset path")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--metrics-out", ev.metrics_out, "Write metrics as key = value lines");
  eval_cmd->add_option("--trace-out", ev.trace_out, "Write per-puzzle reasoning traces");
  eval_cmd->add_option("--workers", ev.workers, "Parallel inference workers")
      ->default_val(1)
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--tau-s", ev.tau_s, "Stop threshold")->default_val(0.5);

  lrt::TraceOptions tc;
  auto *trace_cmd = app.add_subcommand("trace", "Print the reasoning trace for one puzzle");
  trace_cmd->add_option("--checkpoint", tc.checkpoint, "Checkpoint path")
      ->required()
      ->check(CLI::ExistingFile);
  trace_cmd->add_option("--puzzle", tc.puzzle, "Puzzle digits, 0 = empty")->required();
  trace_cmd->add_option("--tau-s", tc.tau_s, "Stop threshold")->default_val(0.5);

  std::string inspect_path;
  auto *inspect_cmd = app.add_subcommand("inspect", "Print a checkpoint's header and tensors");
  inspect_cmd->add_option("--checkpoint", inspect_path, "Checkpoint path")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? lrt::kExitOk : lrt::kExitUsage;
  }

  try {
    if (*gen_cmd) {
      gen.clues = lrt::parse_clue_range(clues);
      lrt::cmd_gen_data(gen, std::cout);
    } else if (*train_cmd) {
      lrt::cmd_train(tr, std::cout);
    } else if (*eval_cmd) {
      lrt::cmd_eval(ev, std::cout);
    } else if (*trace_cmd) {
      lrt::cmd_trace(tc, std::cout);
    } else if (*inspect_cmd) {
      lrt::cmd_inspect(inspect_path, std::cout);
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return lrt::exit_code_for(e);
  }
  return lrt::kExitOk;
}

// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   commands.hpp
 * @brief  Implementations behind the `lrt` subcommands.
 *
 * Each command writes human-readable text to `out` and throws on failure;
 * the executable maps exceptions onto exit codes (see exit_code_for).
 */

#ifndef LRT_COMMANDS_HPP_
#define LRT_COMMANDS_HPP_

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace lrt {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumerical = 3,
};

/// 2 for data/config/checkpoint problems, 3 for numerical aborts.
int exit_code_for(const std::exception &e);

struct ClueRange {
  int lo = 0;
  int hi = 0;
};

/// "8" or "6-10".
ClueRange parse_clue_range(const std::string &text);

struct GenDataOptions {
  std::uint64_t seed = 1;
  int box_size = 2;
  int count = 100;
  ClueRange clues{8, 8};
  std::filesystem::path out;
};
void cmd_gen_data(const GenDataOptions &opt, std::ostream &out);

struct TrainOptions {
  std::filesystem::path data;
  std::filesystem::path config;
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  std::optional<int> epochs; ///< overrides the config file
};
void cmd_train(const TrainOptions &opt, std::ostream &out);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::filesystem::path metrics_out;
  std::filesystem::path trace_out;
  int workers = 1;
  double tau_s = 0.5;
};
void cmd_eval(const EvalOptions &opt, std::ostream &out);

struct TraceOptions {
  std::filesystem::path checkpoint;
  std::string puzzle;
  double tau_s = 0.5;
};
void cmd_trace(const TraceOptions &opt, std::ostream &out);

void cmd_inspect(const std::filesystem::path &checkpoint, std::ostream &out);

} // namespace lrt

#endif // LRT_COMMANDS_HPP_

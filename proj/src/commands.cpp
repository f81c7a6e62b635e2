// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   commands.cpp
 * @brief  Subcommand implementations for the `lrt` tool.
 */

#include "lrt/commands.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>

#include "lrt/io.hpp"
#include "lrt/training.hpp"

namespace lrt {

namespace {

struct LoadedModel {
  ModelConfig config;
  ParamRegistry<float> params;
};

LoadedModel load_model(const std::filesystem::path &path, double tau_s) {
  auto ck = read_checkpoint(path);
  LoadedModel m{ModelConfig::from_checkpoint(ck), std::move(ck.params)};
  m.config.tau_s = tau_s;
  m.config.validate();
  return m;
}

std::ofstream open_out(const std::filesystem::path &path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  return f;
}

template <typename Scalar>
void run_training(const Dataset &ds, const TrainConfig &cfg, const TrainOptions &opt,
                  std::ostream &out) {
  auto log_file = open_out(opt.log);
  out << "epoch\ttrain_loss\ttask\tthink\tstep_reg\tval_loss\tdigit_acc\tpuzzle_acc\tmean_steps\tmean_discards\n";
  auto res = train<Scalar>(std::span<const PuzzlePair>(ds.pairs), cfg, [&](const EpochLog &e) {
    const auto line = format_epoch_line(e);
    log_file << line << '\n';
    log_file.flush();
    out << line << '\n';
    out.flush();
  });
  save_checkpoint(opt.checkpoint, cfg.model.header(), res.params);
  const auto &best = res.log[static_cast<std::size_t>(res.best_epoch)];
  out << "best epoch " << res.best_epoch << ": val_loss " << best.val.validation_loss
      << ", digit_acc " << best.val.digit_accuracy << ", puzzle_acc "
      << best.val.puzzle_accuracy << '\n';
  out << "wrote " << opt.checkpoint.string() << " and " << opt.log.string() << '\n';
}

} // namespace

int exit_code_for(const std::exception &e) {
  if (dynamic_cast<const NumericalAbort *>(&e))
    return kExitNumerical;
  return kExitData;
}

ClueRange parse_clue_range(const std::string &text) {
  auto to_int = [&](const std::string &s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used != s.size() || s.empty())
      throw std::invalid_argument("invalid clue target '" + text + "'");
    return v;
  };
  const auto dash = text.find('-');
  ClueRange r;
  if (dash == std::string::npos) {
    r.lo = r.hi = to_int(text);
  } else {
    r.lo = to_int(text.substr(0, dash));
    r.hi = to_int(text.substr(dash + 1));
  }
  if (r.lo > r.hi)
    throw std::invalid_argument("invalid clue range '" + text + "'");
  return r;
}

void cmd_gen_data(const GenDataOptions &opt, std::ostream &out) {
  if (!supported_box_size(opt.box_size))
    throw std::invalid_argument("box size must be 2 or 3");
  if (opt.count < 0)
    throw std::invalid_argument("count must be >= 0");
  const int cells = opt.box_size * opt.box_size * opt.box_size * opt.box_size;
  if (opt.clues.lo < minimal_clue_bound(opt.box_size) || opt.clues.hi > cells)
    throw std::invalid_argument("clue target must lie in [" +
                                std::to_string(minimal_clue_bound(opt.box_size)) + ", " +
                                std::to_string(cells) + "]");
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<int> target(opt.clues.lo, opt.clues.hi);
  std::vector<PuzzlePair> pairs;
  pairs.reserve(static_cast<std::size_t>(opt.count));
  std::map<int, int> histogram;
  for (int i = 0; i < opt.count; ++i) {
    const std::uint64_t puzzle_seed = rng();
    const int clues = target(rng);
    pairs.push_back(generate_puzzle(puzzle_seed, opt.box_size, clues));
    ++histogram[pairs.back().puzzle.clue_count()];
  }
  write_dataset(opt.box_size, pairs, opt.out);
  out << "wrote " << opt.count << " puzzles (n=" << opt.box_size << ") to " << opt.out.string()
      << '\n';
  out << "clue distribution:";
  for (const auto &[clues, n] : histogram)
    out << ' ' << clues << ':' << n;
  out << '\n';
}

void cmd_train(const TrainOptions &opt, std::ostream &out) {
  const auto ds = read_dataset(opt.data);
  auto cfg = read_train_config(opt.config);
  if (opt.epochs)
    cfg.epochs = *opt.epochs;
  if (ds.pairs.empty())
    throw std::invalid_argument("dataset " + opt.data.string() + " is empty");
  if (ds.box_size != cfg.model.box_size)
    throw std::invalid_argument("box_size mismatch: config has n=" +
                                std::to_string(cfg.model.box_size) + ", dataset has n=" +
                                std::to_string(ds.box_size));
  if (cfg.model.precision == Precision::Float64)
    run_training<double>(ds, cfg, opt, out);
  else
    run_training<float>(ds, cfg, opt, out);
}

void cmd_eval(const EvalOptions &opt, std::ostream &out) {
  const auto model = load_model(opt.checkpoint, opt.tau_s);
  const auto ds = read_dataset(opt.data);
  if (ds.box_size != model.config.box_size)
    throw std::invalid_argument("box_size mismatch: checkpoint has n=" +
                                std::to_string(model.config.box_size) + ", dataset has n=" +
                                std::to_string(ds.box_size));
  if (ds.pairs.empty())
    throw std::invalid_argument("dataset " + opt.data.string() + " is empty");
  const auto res =
      evaluate(model.params, std::span<const PuzzlePair>(ds.pairs), model.config, opt.workers);
  write_metrics(out, res.metrics);
  if (!opt.metrics_out.empty()) {
    auto f = open_out(opt.metrics_out);
    write_metrics(f, res.metrics);
  }
  if (!opt.trace_out.empty()) {
    auto f = open_out(opt.trace_out);
    write_trace_header(f);
    for (std::size_t i = 0; i < res.records.size(); ++i)
      write_trace_record(f, i, res.records[i]);
  }
}

void cmd_trace(const TraceOptions &opt, std::ostream &out) {
  const auto model = load_model(opt.checkpoint, opt.tau_s);
  Grid puzzle;
  try {
    puzzle = Grid::from_string(model.config.box_size, opt.puzzle);
  } catch (const std::invalid_argument &e) {
    throw std::invalid_argument(std::string("malformed puzzle string: ") + e.what());
  }
  const auto solutions = solve_brute_force(puzzle, 2);
  const Grid solution = solutions.size() == 1 ? solutions[0] : Grid(model.config.box_size);

  auto pred = predict(puzzle, model.params, model.config);
  out << kTraceColumns << '\n';
  for (const auto &s : pred.trace.steps)
    out << s.t << '\t' << format_double(s.d_gate) << '\t' << (s.accepted ? 1 : 0) << '\t'
        << format_double(s.s_gate) << '\t' << format_double(s.c_score) << '\t'
        << (s.halted ? 1 : 0) << '\t'
        << (solutions.size() == 1 && s.decoded == solution.cells() ? 1 : 0) << '\n';
  out << "steps_taken = " << pred.trace.steps_taken << '\n';
  out << "discard_events = " << pred.trace.discard_event_count << '\n';
  out << "prediction = " << pred.grid.to_string() << '\n';
  out << "valid = " << (violation_count(pred.grid) == 0 ? "yes" : "no") << '\n';
  if (solutions.empty())
    out << "oracle = unsatisfiable\n";
  else if (solutions.size() > 1)
    out << "oracle = ambiguous (multiple solutions)\n";
  else
    out << "oracle = " << (pred.grid == solution ? "match" : "mismatch") << '\n';
}

void cmd_inspect(const std::filesystem::path &checkpoint, std::ostream &out) {
  const auto ck = read_checkpoint(checkpoint);
  out << "magic = " << std::string(kCheckpointMagic, sizeof(kCheckpointMagic)) << '\n'
      << "box_size = " << ck.header.box_size << '\n'
      << "d_model = " << ck.header.d_model << '\n'
      << "n_layers = " << ck.header.n_layers << '\n'
      << "n_heads = " << ck.header.n_heads << '\n'
      << "t_max = " << ck.header.t_max << '\n';
  std::size_t total = 0;
  for (const auto &p : ck.params) {
    std::string shape;
    for (std::size_t i = 0; i < p.shape.size(); ++i)
      shape += (i ? "x" : "") + std::to_string(p.shape[i]);
    out << std::left << std::setw(32) << p.name << ' ' << std::setw(10) << shape << ' '
        << p.numel() << '\n';
    total += p.numel();
  }
  out << "total_parameters = " << total << '\n';
}

} // namespace lrt

// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   training.cpp
 * @brief  Metric reduction and training helpers that do not depend on the
 *         scalar type.
 */

#include "lrt/training.hpp"

#include <cstdio>

namespace lrt {

void TrainConfig::validate() const {
  auto fail = [](const std::string &msg) { throw std::invalid_argument("train config: " + msg); };
  model.validate();
  if (epochs < 1)
    fail("epochs must be >= 1");
  if (batch_size < 1)
    fail("batch_size must be >= 1");
  if (warmup_steps < 0)
    fail("warmup_steps must be >= 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    fail("learning_rate must be a finite value >= 0");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    fail("val_fraction must lie in [0, 1)");
  if (!(grad_clip >= 0.0))
    fail("grad_clip must be >= 0");
  if (!(weights.task > 0.0))
    fail("lambda_task must be > 0");
  for (double w : {weights.think, weights.step, weights.margin, weights.halt})
    if (!(w >= 0.0))
      fail("loss weights must be non-negative");
}

double bce_probability(double s, bool target) {
  constexpr double lo = 1e-12;
  const double p = std::clamp(s, lo, 1.0 - lo);
  return target ? -std::log(p) : -std::log1p(-p);
}

double cross_entropy_rows(const Eigen::MatrixXd &logits, const Grid &solution) {
  if (logits.rows() != solution.size() || logits.cols() != solution.side())
    throw std::invalid_argument("logits do not match the solution grid");
  const auto targets = digit_targets(solution);
  double total = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    total += lse - logits(i, targets[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(logits.rows());
}

double answer_gate_penalty(const Eigen::MatrixXd &logits) {
  double total = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double denom = (logits.row(i).array() - mx).exp().sum();
    total += 1.0 - 1.0 / denom;
  }
  return total / static_cast<double>(logits.rows());
}

EvalMetrics aggregate_metrics(std::span<const PuzzleRecord> records) {
  EvalMetrics m;
  m.puzzles = records.size();
  if (records.empty())
    return m;
  std::size_t cells = 0, correct_cells = 0, solved = 0, disagree = 0;
  double steps = 0, discards = 0, stop_loss = 0, answer = 0, val_loss = 0, epochs = 0;
  for (const auto &r : records) {
    bool all = true;
    for (int i = 0; i < r.solution.size(); ++i) {
      ++cells;
      if (r.prediction[i] == r.solution[i])
        ++correct_cells;
      else
        all = false;
      if (r.prediction[i] != r.soft_prediction[i])
        ++disagree;
    }
    if (all)
      ++solved;
    steps += static_cast<double>(r.steps.size());
    double puzzle_stop = 0;
    int runs = 0;
    bool in_run = false;
    for (const auto &s : r.steps) {
      if (!s.accepted)
        discards += 1.0;
      if (s.accepted && !in_run)
        ++runs;
      in_run = s.accepted;
      puzzle_stop += bce_probability(s.s_gate, s.solved);
    }
    if (!r.steps.empty())
      stop_loss += puzzle_stop / static_cast<double>(r.steps.size());
    epochs += runs;
    answer += r.answer_gate;
    val_loss += r.task_loss;
  }
  const double n = static_cast<double>(records.size());
  m.digit_accuracy = static_cast<double>(correct_cells) / static_cast<double>(cells);
  m.puzzle_accuracy = static_cast<double>(solved) / n;
  m.mean_thinking_steps = steps / n;
  m.mean_discard_events = discards / n;
  m.mean_discarded_tokens = m.mean_discard_events;
  m.mean_stop_gate_loss = stop_loss / n;
  m.mean_answer_gate_penalty = answer / n;
  m.validation_loss = val_loss / n;
  m.mean_thinking_epochs = epochs / n;
  m.mean_steps_per_thinking_epoch = epochs > 0 ? steps / epochs : 0.0;
  m.train_infer_disagreement = static_cast<double>(disagree) / static_cast<double>(cells);
  return m;
}

std::string format_epoch_line(const EpochLog &log) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.4f\t%.4f",
                log.epoch, log.train_loss, log.task, log.think, log.step_reg,
                log.val.validation_loss, log.val.digit_accuracy, log.val.puzzle_accuracy,
                log.val.mean_thinking_steps, log.val.mean_discard_events);
  return buf;
}

Split split_dataset(std::span<const PuzzlePair> pairs, double val_fraction, std::uint64_t seed) {
  Split s;
  if (pairs.empty())
    return s;
  if (pairs.size() == 1) {
    s.train.push_back(pairs[0]);
    s.validation.push_back(pairs[0]);
    return s;
  }
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(pairs.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, pairs.size() - 1);
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_val ? s.validation : s.train).push_back(pairs[order[i]]);
  return s;
}

} // namespace lrt

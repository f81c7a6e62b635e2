// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   training.hpp
 * @brief  Composite objective, Adam with linear warmup, and evaluation.
 *
 * total = w_task * task + w_think * think + w_step * step_reg + w_halt * halt
 *
 *   task      cross-entropy of the final decoding over every cell
 *   think     mean_t c_t + w_margin * mean_t margin(d_t, tau_d)
 *   step_reg  mean_t (1 - s_t)
 *   halt      mean_t BCE(s_t, [decoding of r_t solves the puzzle])
 */

#ifndef LRT_TRAINING_HPP_
#define LRT_TRAINING_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "lrt/model.hpp"

namespace lrt {

struct LossWeights {
  double task = 1.0;
  double think = 0.1;
  double step = 0.01;
  /// Weight of the gate-indecision term inside the thinking loss.
  double margin = 0.1;
  /// Stop-gate calibration against per-step correctness.
  double halt = 0.0;
  friend bool operator==(const LossWeights &, const LossWeights &) = default;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 3e-4;
  int warmup_steps = 200;
  std::uint64_t seed = 1;
  double val_fraction = 0.1;
  /// Apply the task loss to every step's decoding, not only the last.
  bool deep_supervision = false;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
  /// Draw a fresh random GridSymmetry for every training example.
  bool augment = false;
  /// After warmup, anneal the rate to zero along a half cosine.
  bool cosine_decay = false;
  LossWeights weights;
  ModelConfig model;

  void validate() const;
  friend bool operator==(const TrainConfig &, const TrainConfig &) = default;
};

class NumericalAbort : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Loss terms
// ---------------------------------------------------------------------------

/// Digits 1..side map to classes 0..side-1.
inline std::vector<int> digit_targets(const Grid &solution) {
  std::vector<int> t;
  t.reserve(static_cast<std::size_t>(solution.size()));
  for (int i = 0; i < solution.size(); ++i) {
    if (solution[i] == 0)
      throw std::invalid_argument("solution has an empty cell at " + std::to_string(i));
    t.push_back(solution[i] - 1);
  }
  return t;
}

template <typename Scalar>
ad::Var<Scalar> task_loss(const ad::Var<Scalar> &logits, const Grid &solution) {
  const auto targets = digit_targets(solution);
  return ad::cross_entropy(logits, std::span<const int>(targets));
}

/// Zero at d in {0, 1}, peaks at 1/4 where d == tau, and reduces to d(1-d)
/// when tau = 1/2. Pushes tau away from the gate values around it.
template <typename Scalar>
ad::Var<Scalar> discard_margin(const ad::Var<Scalar> &d, const ad::Var<Scalar> &tau) {
  using Mat = ad::Matrix<Scalar>;
  const Scalar dv = d.scalar(), tv = tau.scalar();
  const bool upper = dv >= tv;
  const Scalar a = upper ? (dv - tv) / (Scalar(1) - tv) : (tv - dv) / tv;
  const Scalar value = Scalar(0.25) * (Scalar(1) - a * a);
  return d.tape()->record(
      Mat::Constant(1, 1, value), {d, tau},
      [d, tau, upper, a, dv, tv](ad::Tape<Scalar> &tp, const Mat &, const Mat &g) {
        const Scalar dp_da = Scalar(-0.5) * a * g(0, 0);
        Scalar da_dd, da_dt;
        if (upper) {
          da_dd = Scalar(1) / (Scalar(1) - tv);
          da_dt = (dv - Scalar(1)) / ((Scalar(1) - tv) * (Scalar(1) - tv));
        } else {
          da_dd = Scalar(-1) / tv;
          da_dt = dv / (tv * tv);
        }
        tp.accumulate(d, Mat::Constant(1, 1, dp_da * da_dd));
        tp.accumulate(tau, Mat::Constant(1, 1, dp_da * da_dt));
      });
}

template <typename Scalar> struct ThinkingLoss {
  ad::Var<Scalar> total;
  ad::Var<Scalar> consistency;
  ad::Var<Scalar> margin;
};

template <typename Scalar>
ThinkingLoss<Scalar> thinking_loss(std::span<const StepVars<Scalar>> steps,
                                   const ad::Var<Scalar> &tau_d, double margin_weight) {
  if (steps.empty())
    throw std::invalid_argument("thinking_loss needs at least one step");
  std::vector<ad::Var<Scalar>> cs, ms;
  for (const auto &s : steps) {
    cs.push_back(s.c);
    ms.push_back(discard_margin(s.d, tau_d));
  }
  const Scalar inv = Scalar(1) / static_cast<Scalar>(steps.size());
  ThinkingLoss<Scalar> out;
  out.consistency = ad::add_n(std::span<const ad::Var<Scalar>>(cs)) * inv;
  out.margin = ad::add_n(std::span<const ad::Var<Scalar>>(ms)) * inv;
  out.total = out.consistency + out.margin * static_cast<Scalar>(margin_weight);
  return out;
}

/// mean_t (1 - s_t)
template <typename Scalar>
ad::Var<Scalar> step_regularization(std::span<const StepVars<Scalar>> steps) {
  if (steps.empty())
    throw std::invalid_argument("step_regularization needs at least one step");
  std::vector<ad::Var<Scalar>> ss;
  for (const auto &s : steps)
    ss.push_back(s.s);
  const Scalar inv = Scalar(1) / static_cast<Scalar>(steps.size());
  return ad::affine(ad::add_n(std::span<const ad::Var<Scalar>>(ss)), -inv, Scalar(1));
}

/// mean_t BCE(s_t, solved_t), from the stop logits.
template <typename Scalar>
ad::Var<Scalar> halt_loss(std::span<const StepVars<Scalar>> steps, const std::vector<bool> &solved) {
  if (steps.empty() || steps.size() != solved.size())
    throw std::invalid_argument("halt_loss needs one target per step");
  std::vector<ad::Var<Scalar>> terms;
  for (std::size_t i = 0; i < steps.size(); ++i)
    terms.push_back(ad::bce_with_logit(steps[i].s_logit, solved[i] ? Scalar(1) : Scalar(0)));
  return ad::add_n(std::span<const ad::Var<Scalar>>(terms)) *
         (Scalar(1) / static_cast<Scalar>(steps.size()));
}

template <typename Scalar> struct LossBreakdown {
  ad::Var<Scalar> total;
  double task = 0;
  double think = 0;
  double think_consistency = 0;
  double think_margin = 0;
  double step_reg = 0;
  double halt = 0;
};

/// Weighted sum of the terms on a train-mode loop result.
template <typename Scalar>
LossBreakdown<Scalar> total_loss(const LiquidReasoner<Scalar> &model,
                                 const LoopResult<Scalar> &loop, const Grid &solution,
                                 const LossWeights &w, bool deep_supervision = false) {
  using V = ad::Var<Scalar>;
  const std::span<const StepVars<Scalar>> steps(loop.steps);
  LossBreakdown<Scalar> out;

  V task;
  if (deep_supervision) {
    std::vector<V> per_step;
    for (const auto &s : steps)
      per_step.push_back(task_loss(s.logits, solution));
    task = ad::add_n(std::span<const V>(per_step)) *
           (Scalar(1) / static_cast<Scalar>(per_step.size()));
  } else {
    task = task_loss(loop.logits, solution);
  }
  auto think = thinking_loss(steps, model.tau_d(), w.margin);
  V step = step_regularization(steps);

  std::vector<bool> solved;
  for (const auto &st : loop.trace.steps)
    solved.push_back(st.decoded == solution.cells());
  V halt = halt_loss(steps, solved);

  out.total = task * static_cast<Scalar>(w.task) + think.total * static_cast<Scalar>(w.think) +
              step * static_cast<Scalar>(w.step) + halt * static_cast<Scalar>(w.halt);
  out.task = static_cast<double>(task.scalar());
  out.think = static_cast<double>(think.total.scalar());
  out.think_consistency = static_cast<double>(think.consistency.scalar());
  out.think_margin = static_cast<double>(think.margin.scalar());
  out.step_reg = static_cast<double>(step.scalar());
  out.halt = static_cast<double>(halt.scalar());
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

/// Adam (beta1 0.9, beta2 0.999, eps 1e-8) over a registry.
template <typename Scalar> class AdamOptimizer {
public:
  using Mat = ad::Matrix<Scalar>;

  explicit AdamOptimizer(const ParamRegistry<Scalar> &params, double beta1 = 0.9,
                         double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto &p : params) {
      m_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    }
  }

  void step(ParamRegistry<Scalar> &params, const std::vector<Mat> &grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
    const auto step_size = static_cast<Scalar>(lr / bc1);
    const auto inv_bc2 = static_cast<Scalar>(1.0 / bc2);
    const auto eps = static_cast<Scalar>(eps_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * grads[i];
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * grads[i].cwiseProduct(grads[i]);
      params[i].value.array() -=
          step_size * m_[i].array() / ((v_[i].array() * inv_bc2).sqrt() + eps);
    }
  }

  long long steps_taken() const { return t_; }

private:
  double beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<Mat> m_, v_;
};

/// Linear ramp from lr/warmup to lr over the first `warmup` updates.
inline double warmup_rate(double lr, int warmup, long long update_index) {
  if (warmup <= 0)
    return lr;
  return lr * std::min(1.0, static_cast<double>(update_index + 1) / warmup);
}

/// warmup_rate, then with `cosine` a half cosine from lr at the end of
/// warmup down to 0 after update `total_updates - 1`.
inline double scheduled_rate(double lr, int warmup, long long update_index,
                             long long total_updates, bool cosine) {
  const double base = warmup_rate(lr, warmup, update_index);
  const long long start = std::max(warmup, 0);
  if (!cosine || update_index < start || total_updates <= start)
    return base;
  const double progress =
      static_cast<double>(update_index + 1 - start) / static_cast<double>(total_updates - start);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

/// FNV-1a over the raw parameter bytes.
template <typename Scalar> std::uint64_t param_checksum(const ParamRegistry<Scalar> &params) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto &p : params) {
    const auto *bytes = reinterpret_cast<const unsigned char *>(p.value.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(p.value.size()) * sizeof(Scalar); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct StepRecord {
  int t = 0;
  double d_gate = 0;
  bool accepted = false;
  double s_gate = 0;
  double c_score = 0;
  bool halted = false;
  /// Whether the decoding at this step equals the solution.
  bool solved = false;
  friend bool operator==(const StepRecord &, const StepRecord &) = default;
};

/// Everything the metrics are computed from, per evaluated puzzle.
struct PuzzleRecord {
  Grid puzzle;
  Grid solution;
  Grid prediction;      ///< infer mode, hard gates
  Grid soft_prediction; ///< train-mode unroll of the same parameters
  std::vector<StepRecord> steps;
  double task_loss = 0;   ///< cross-entropy of the final logits
  double answer_gate = 0; ///< mean over cells of 1 - max softmax probability
  friend bool operator==(const PuzzleRecord &, const PuzzleRecord &) = default;
};

struct EvalMetrics {
  double digit_accuracy = 0;
  double puzzle_accuracy = 0;
  double mean_thinking_steps = 0;
  double mean_discard_events = 0;
  /// Logged equal to mean_discard_events; no separate mechanism exists.
  double mean_discarded_tokens = 0;
  double mean_stop_gate_loss = 0;
  double mean_answer_gate_penalty = 0;
  double validation_loss = 0;
  /// A thinking epoch is a maximal run of consecutive accepted steps.
  double mean_thinking_epochs = 0;
  double mean_steps_per_thinking_epoch = 0;
  /// Fraction of cells where hard-gate inference and the train-mode
  /// unroll predict different digits.
  double train_infer_disagreement = 0;
  std::size_t puzzles = 0;
  friend bool operator==(const EvalMetrics &, const EvalMetrics &) = default;
};

struct EvalResult {
  EvalMetrics metrics;
  std::vector<PuzzleRecord> records;
};

/// Binary cross-entropy of a probability, clamped away from 0 and 1.
double bce_probability(double s, bool target);
/// Mean cross-entropy of logits rows against digits 1..side.
double cross_entropy_rows(const Eigen::MatrixXd &logits, const Grid &solution);
/// Mean over rows of 1 - max softmax probability.
double answer_gate_penalty(const Eigen::MatrixXd &logits);

/// Reduces records in order; identical records give identical metrics.
EvalMetrics aggregate_metrics(std::span<const PuzzleRecord> records);

template <typename Scalar>
PuzzleRecord evaluate_one(const ParamRegistry<Scalar> &params, const ModelConfig &cfg,
                          const PuzzlePair &pair) {
  PuzzleRecord rec;
  rec.puzzle = pair.puzzle;
  rec.solution = pair.solution;
  auto pred = predict(pair.puzzle, params, cfg);
  rec.prediction = pred.grid;
  for (const auto &s : pred.trace.steps)
    rec.steps.push_back(
        {s.t, s.d_gate, s.accepted, s.s_gate, s.c_score, s.halted, s.decoded == pair.solution.cells()});
  rec.task_loss = cross_entropy_rows(pred.trace.logits, pair.solution);
  rec.answer_gate = answer_gate_penalty(pred.trace.logits);

  ad::Tape<Scalar> tape;
  LiquidReasoner<Scalar> model(cfg, params, tape, false);
  auto soft = model.run(pair.puzzle, RunMode::Train);
  rec.soft_prediction = Grid(cfg.box_size, argmax_digits(soft.trace.logits));
  return rec;
}

/// Runs every puzzle in infer mode. Workers split the puzzles; records keep
/// input order.
template <typename Scalar>
EvalResult evaluate(const ParamRegistry<Scalar> &params, std::span<const PuzzlePair> pairs,
                    const ModelConfig &cfg, int workers = 1) {
  if (pairs.empty())
    throw std::invalid_argument("evaluate: empty dataset");
  EvalResult out;
  out.records.resize(pairs.size());
  workers = std::clamp(workers, 1, static_cast<int>(pairs.size()));
  auto job = [&](int w) {
    for (std::size_t i = static_cast<std::size_t>(w); i < pairs.size();
         i += static_cast<std::size_t>(workers))
      out.records[i] = evaluate_one(params, cfg, pairs[i]);
  };
  if (workers == 1) {
    job(0);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back(job, w);
  }
  out.metrics = aggregate_metrics(out.records);
  return out;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double task = 0;
  double think = 0;
  double step_reg = 0;
  double halt = 0;
  EvalMetrics val;
  std::uint64_t checksum = 0;
  double seconds = 0;
};

/// Tab-separated: epoch, train_loss, task, think, step_reg, val_loss,
/// digit_acc, puzzle_acc, mean_steps, mean_discards.
std::string format_epoch_line(const EpochLog &log);

struct Split {
  std::vector<PuzzlePair> train;
  std::vector<PuzzlePair> validation;
};

/// Deterministic shuffle under `seed`, then the first share goes to
/// validation. A single puzzle is used for both sides.
Split split_dataset(std::span<const PuzzlePair> pairs, double val_fraction, std::uint64_t seed);

/// Forward + backward for one pair; adds parameter gradients into `grads`.
template <typename Scalar>
double accumulate_example(const ParamRegistry<Scalar> &params, const TrainConfig &cfg,
                          const PuzzlePair &pair, std::vector<ad::Matrix<Scalar>> &grads,
                          LossBreakdown<Scalar> *parts = nullptr) {
  ad::Tape<Scalar> tape;
  LiquidReasoner<Scalar> model(cfg.model, params, tape, true);
  auto loop = model.run(pair.puzzle, RunMode::Train);
  auto loss = total_loss(model, loop, pair.solution, cfg.weights, cfg.deep_supervision);
  const double value = static_cast<double>(loss.total.scalar());
  if (!std::isfinite(value)) {
    if (parts)
      *parts = loss;
    return value;
  }
  tape.backward(loss.total);
  const auto &leaves = model.leaves();
  for (std::size_t i = 0; i < leaves.size(); ++i)
    if (leaves[i].grad().size() != 0)
      grads[i] += leaves[i].grad();
  if (parts)
    *parts = loss;
  return value;
}

template <typename Scalar> struct TrainResult {
  ParamRegistry<Scalar> params;
  std::vector<EpochLog> log;
  int best_epoch = 0;
  Split split;
};

template <typename Scalar>
TrainResult<Scalar> train(std::span<const PuzzlePair> dataset, const TrainConfig &cfg,
                          const std::function<void(const EpochLog &)> &on_epoch = {}) {
  using Mat = ad::Matrix<Scalar>;
  cfg.validate();
  if (dataset.empty())
    throw std::invalid_argument("train: empty dataset");
  for (const auto &p : dataset)
    if (p.puzzle.box_size() != cfg.model.box_size)
      throw std::invalid_argument("train: dataset box size " +
                                  std::to_string(p.puzzle.box_size()) +
                                  " does not match model box size " +
                                  std::to_string(cfg.model.box_size));

  TrainResult<Scalar> res;
  res.split = split_dataset(dataset, cfg.val_fraction, cfg.seed);
  auto params = init_params<Scalar>(cfg.model, cfg.seed);
  res.params = params;
  AdamOptimizer<Scalar> adam(params);
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::mt19937_64 augment_rng(cfg.seed ^ 0xc2b2ae3d27d4eb4full);
  std::vector<std::size_t> order(res.split.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best_val = std::numeric_limits<double>::infinity();
  long long batch_counter = 0;
  const auto batches = static_cast<long long>((order.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                              static_cast<std::size_t>(cfg.batch_size));
  const long long total_updates = batches * cfg.epochs;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochLog log;
    log.epoch = epoch;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size), ++batch_counter) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Mat> grads;
      for (const auto &p : params)
        grads.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
      for (std::size_t i = start; i < stop; ++i) {
        LossBreakdown<Scalar> parts;
        const PuzzlePair &source = res.split.train[order[i]];
        const double value =
            cfg.augment
                ? accumulate_example(params, cfg,
                                     GridSymmetry::random(cfg.model.box_size, augment_rng).apply(source),
                                     grads, &parts)
                : accumulate_example(params, cfg, source, grads, &parts);
        if (!std::isfinite(value))
          throw NumericalAbort("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(start / static_cast<std::size_t>(cfg.batch_size)) +
                               " (update " + std::to_string(batch_counter) + ")");
        log.train_loss += value;
        log.task += parts.task;
        log.think += parts.think;
        log.step_reg += parts.step_reg;
        log.halt += parts.halt;
        ++seen;
      }
      const auto inv = static_cast<Scalar>(1.0 / static_cast<double>(stop - start));
      double norm_sq = 0;
      for (auto &g : grads) {
        g *= inv;
        norm_sq += static_cast<double>(g.squaredNorm());
      }
      if (!std::isfinite(norm_sq))
        throw NumericalAbort("non-finite gradient in epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(start / static_cast<std::size_t>(cfg.batch_size)));
      if (cfg.grad_clip > 0 && std::sqrt(norm_sq) > cfg.grad_clip) {
        const auto scale = static_cast<Scalar>(cfg.grad_clip / std::sqrt(norm_sq));
        for (auto &g : grads)
          g *= scale;
      }
      adam.step(params, grads,
                scheduled_rate(cfg.learning_rate, cfg.warmup_steps, batch_counter, total_updates,
                               cfg.cosine_decay));
    }
    const double n = static_cast<double>(std::max<std::size_t>(seen, 1));
    log.train_loss /= n;
    log.task /= n;
    log.think /= n;
    log.step_reg /= n;
    log.halt /= n;
    log.val = evaluate(params, std::span<const PuzzlePair>(res.split.validation), cfg.model).metrics;
    log.checksum = param_checksum(params);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (log.val.validation_loss < best_val) {
      best_val = log.val.validation_loss;
      res.best_epoch = epoch;
      res.params = params;
    }
    res.log.push_back(log);
    if (on_epoch)
      on_epoch(log);
  }
  return res;
}

} // namespace lrt

#endif // LRT_TRAINING_HPP_

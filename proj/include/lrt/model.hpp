// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   model.hpp
 * @brief  Liquid Reasoning Transformer: a single reasoning token appended to
 *         the embedded puzzle is rewritten over a variable number of encoder
 *         passes. Each pass proposes an update, a discard gate may reject it,
 *         and a stop gate decides whether to halt.
 *
 *   r_0 --> [embed | r_t] --> encoder --> r~ --> u = gelu(W_u r~ + b_u)
 *                                                  |
 *            d = sigmoid(W_d [r_{t-1}; u] + b_d) --+--> r_t = d > tau_d ? r_{t-1} : u
 *            s = sigmoid(W_s r_t + b_s)  ----------------> halt when s > tau_s
 */

#ifndef LRT_MODEL_HPP_
#define LRT_MODEL_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lrt/params.hpp"
#include "lrt/sudoku.hpp"
#include "lrt/tensor.hpp"

namespace lrt {

enum class Precision { Float32, Float64 };
enum class DiscardMode { SoftBlend, StraightThrough };
enum class RunMode { Train, Infer };

struct ModelConfig {
  int box_size = 2;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int ff_width = 128;
  int t_max = 8;
  double tau_s = 0.5;
  Precision precision = Precision::Float32;
  /// How the discard branch is differentiated in train mode.
  DiscardMode discard_mode = DiscardMode::SoftBlend;

  int side() const { return box_size * box_size; }
  int cells() const { return side() * side(); }
  int seq_len() const { return cells() + 1; }

  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;

  /// n=2: d=64, L=2, heads=4, ff=128, T_max=8.
  /// n=3: d=128, L=4, heads=8, ff=256, T_max=32.
  static ModelConfig defaults_for(int box_size);

  CheckpointHeader header() const;
  /// Rebuilds the config from a checkpoint header; ff_width comes from the
  /// stored feed-forward weights.
  static ModelConfig from_checkpoint(const Checkpoint &ck);

  friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

/// Closed-form parameter count for a config.
std::size_t analytic_param_count(const ModelConfig &cfg);

/// Weight layout for a config, in registry order.
std::vector<std::pair<std::string, std::vector<std::uint32_t>>>
param_layout(const ModelConfig &cfg);

/// Checks that a registry carries exactly the layout of `cfg`.
template <typename Scalar>
void check_param_layout(const ModelConfig &cfg, const ParamRegistry<Scalar> &params) {
  const auto layout = param_layout(cfg);
  if (layout.size() != params.size())
    throw std::invalid_argument("parameter count mismatch: expected " +
                                std::to_string(layout.size()) + " tensors, got " +
                                std::to_string(params.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params[i].name != layout[i].first)
      throw std::invalid_argument("expected parameter " + layout[i].first + " at slot " +
                                  std::to_string(i) + ", got " + params[i].name);
    if (params[i].shape != layout[i].second)
      throw std::invalid_argument("parameter " + params[i].name + " has wrong shape");
  }
}

inline constexpr double kInitTauD = 0.5;
inline constexpr double kInitDiscardBias = -1.0;
inline constexpr double kInitStopBias = -2.0;

/// Embeddings and r_0 ~ N(0, 0.02); projections ~ N(0, 1/sqrt(fan_in)),
/// residual outputs further scaled by 1/sqrt(2L); tau_d starts at 0.5.
template <typename Scalar>
ParamRegistry<Scalar> init_params(const ModelConfig &cfg, std::uint64_t seed) {
  cfg.validate();
  using Mat = ad::Matrix<Scalar>;
  std::mt19937_64 rng(seed);
  ParamRegistry<Scalar> reg;
  const double residual_scale = cfg.n_layers > 0 ? 1.0 / std::sqrt(2.0 * cfg.n_layers) : 1.0;
  for (auto &[name, shape] : param_layout(cfg)) {
    const Eigen::Index rows = shape.size() == 2 ? shape[0] : 1;
    const Eigen::Index cols = shape.back();
    auto ends_with = [&](const char *suffix) {
      const std::string s(suffix);
      return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    auto normal = [&](double stddev) {
      std::normal_distribution<double> dist(0.0, stddev);
      Mat m(rows, cols);
      for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<Scalar>(dist(rng));
      return m;
    };
    Mat value;
    if (name.rfind("embed.", 0) == 0 || name == "reasoning.r0") {
      value = normal(0.02);
    } else if (ends_with(".gain")) {
      value = Mat::Ones(rows, cols);
    } else if (name == "discard.tau_logit") {
      value = Mat::Constant(1, 1, static_cast<Scalar>(std::log(kInitTauD / (1.0 - kInitTauD))));
    } else if (name == "discard.b") {
      value = Mat::Constant(1, 1, static_cast<Scalar>(kInitDiscardBias));
    } else if (name == "stop.b") {
      value = Mat::Constant(1, 1, static_cast<Scalar>(kInitStopBias));
    } else if (name == "discard.w" || name == "stop.w") {
      value = normal(0.02);
    } else if (name == "decoder.cross.b") {
      value = Mat::Ones(rows, cols);
    } else if (shape.size() == 1) {
      value = Mat::Zero(rows, cols);
    } else {
      double stddev = 1.0 / std::sqrt(static_cast<double>(rows));
      if (ends_with(".attn.wo") || ends_with(".ff.w2"))
        stddev *= residual_scale;
      value = normal(stddev);
    }
    reg.add(name, shape, std::move(value));
  }
  return reg;
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

struct ReasoningStep {
  int t = 0; ///< 1-based step index
  Eigen::RowVectorXd r_before, r_tilde, u, r_after;
  double d_gate = 0;
  double tau_d = 0;
  bool accepted = false; ///< d_gate <= tau_d
  double s_gate = 0;
  double c_score = 0;
  bool halted = false; ///< s_gate > tau_s or t == T_max
  /// Per-cell argmax of the decoder applied to r_after.
  std::vector<std::uint8_t> decoded;
};

struct ReasoningTrace {
  std::vector<ReasoningStep> steps;
  int steps_taken = 0;
  int discard_event_count = 0;
  /// First step whose halting rule fired (train mode runs past it).
  int halt_step = 0;
  Eigen::MatrixXd logits; ///< final decoder logits [cells x side]
};

/// Per-cell argmax over digit logits; ties go to the smaller digit.
template <typename Derived>
std::vector<std::uint8_t> argmax_digits(const Eigen::MatrixBase<Derived> &logits) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k)
      if (logits(i, k) > logits(i, best))
        best = k;
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(best + 1);
  }
  return out;
}

/// Unit-mass consistency score of a per-cell digit distribution table
/// P [cells x side]: mean over (unit, digit) of (sum of P over the unit - 1)^2.
/// A uniform table also scores 0.
double consistency_of_table(const Eigen::MatrixXd &probs, int box_size);

/// Unit membership [units x cells] with 1 where a cell belongs to a unit.
Eigen::MatrixXd unit_membership(int box_size);

// ---------------------------------------------------------------------------
// Forward pass on a tape
// ---------------------------------------------------------------------------

template <typename Scalar> struct EncoderOutput {
  ad::Var<Scalar> hidden;   ///< [seq x d]
  ad::Var<Scalar> r_tilde;  ///< last position, [1 x d]
  std::vector<ad::Var<Scalar>> attention; ///< per layer, per head [seq x seq]
};

template <typename Scalar> struct GateDecision {
  ad::Var<Scalar> d;      ///< [1 x 1]
  ad::Var<Scalar> r_next; ///< [1 x d]
  bool accepted = false;
};

template <typename Scalar> struct StopDecision {
  ad::Var<Scalar> logit;
  ad::Var<Scalar> s;
};

/// Differentiable per-step quantities, parallel to ReasoningTrace::steps.
template <typename Scalar> struct StepVars {
  ad::Var<Scalar> d;
  ad::Var<Scalar> s;
  ad::Var<Scalar> s_logit;
  ad::Var<Scalar> c;
  ad::Var<Scalar> logits;
  ad::Var<Scalar> r;
};

template <typename Scalar> struct LoopResult {
  ad::Var<Scalar> r_final;
  ad::Var<Scalar> logits;
  std::vector<StepVars<Scalar>> steps;
  ReasoningTrace trace;
};

/// Optional per-step gate values that replace the learned gates. Forced
/// values carry no gradient.
struct GateOverrides {
  std::function<std::optional<double>(int t)> discard;
  std::function<std::optional<double>(int t)> stop;
};

template <typename Scalar> class LiquidReasoner {
public:
  using V = ad::Var<Scalar>;
  using Mat = ad::Matrix<Scalar>;

  /// Binds every parameter into `tape`: as gradient leaves when
  /// `trainable`, otherwise as constants.
  LiquidReasoner(const ModelConfig &cfg, const ParamRegistry<Scalar> &params,
                 ad::Tape<Scalar> &tape, bool trainable)
      : cfg_(cfg), tape_(tape), membership_(unit_membership(cfg.box_size).cast<Scalar>()) {
    cfg.validate();
    check_param_layout(cfg, params);
    leaves_.reserve(params.size());
    for (const auto &p : params) {
      leaves_.push_back(trainable ? tape.variable(p.value) : tape.constant(p.value));
      slots_.emplace(p.name, leaves_.size() - 1);
    }
  }

  const ModelConfig &config() const { return cfg_; }
  ad::Tape<Scalar> &tape() const { return tape_; }
  const std::vector<V> &leaves() const { return leaves_; }
  V param(const std::string &name) const {
    auto it = slots_.find(name);
    if (it == slots_.end())
      throw std::out_of_range("unknown parameter " + name);
    return leaves_[it->second];
  }

  /// token_embed[digit_i] + pos_embed[i] for every cell, [cells x d].
  V embed_puzzle(const OneHotGrid &puzzle) const {
    if (puzzle.box_size != cfg_.box_size || puzzle.rows.rows() != cfg_.cells() ||
        puzzle.rows.cols() != cfg_.side() + 1)
      throw ad::ShapeError("puzzle does not match model box size " +
                           std::to_string(cfg_.box_size));
    V onehot = tape_.constant(puzzle.rows.template cast<Scalar>());
    return ad::matmul(onehot, param("embed.token")) +
           ad::slice_rows(param("embed.pos"), 0, cfg_.cells());
  }

  /// Appends r + pos_embed[cells] to the cached puzzle embeddings.
  V embed_sequence(const V &puzzle_embed, const V &r) const {
    V slot = r + ad::slice_rows(param("embed.pos"), cfg_.cells(), 1);
    return ad::concat_rows({puzzle_embed, slot});
  }

  /// Pre-norm encoder stack; r_tilde is the last row of the output.
  EncoderOutput<Scalar> encode(const V &seq, bool keep_attention = false) const {
    if (seq.rows() != cfg_.seq_len() || seq.cols() != cfg_.d_model)
      throw ad::ShapeError("encoder input must be " +
                           ad::shape_str(cfg_.seq_len(), cfg_.d_model));
    EncoderOutput<Scalar> out;
    const int dh = cfg_.d_model / cfg_.n_heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    V h = seq;
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const std::string p = "encoder.layer" + std::to_string(l) + ".";
      V a = ad::layer_norm(h, param(p + "ln1.gain"), param(p + "ln1.bias"));
      V q = ad::add_rowwise(ad::matmul(a, param(p + "attn.wq")), param(p + "attn.bq"));
      V k = ad::add_rowwise(ad::matmul(a, param(p + "attn.wk")), param(p + "attn.bk"));
      V v = ad::add_rowwise(ad::matmul(a, param(p + "attn.wv")), param(p + "attn.bv"));
      std::vector<V> heads;
      for (int hd = 0; hd < cfg_.n_heads; ++hd) {
        V qh = ad::slice_cols(q, hd * dh, dh);
        V kh = ad::slice_cols(k, hd * dh, dh);
        V vh = ad::slice_cols(v, hd * dh, dh);
        V weights = ad::softmax(ad::matmul(qh, ad::transpose(kh)) * scale, 1);
        if (keep_attention)
          out.attention.push_back(weights);
        heads.push_back(ad::matmul(weights, vh));
      }
      V attn = ad::add_rowwise(ad::matmul(ad::concat_cols(std::span<const V>(heads)),
                                          param(p + "attn.wo")),
                               param(p + "attn.bo"));
      h = h + attn;
      V b = ad::layer_norm(h, param(p + "ln2.gain"), param(p + "ln2.bias"));
      V f = ad::gelu(ad::add_rowwise(ad::matmul(b, param(p + "ff.w1")), param(p + "ff.b1")));
      h = h + ad::add_rowwise(ad::matmul(f, param(p + "ff.w2")), param(p + "ff.b2"));
    }
    out.hidden = h;
    out.r_tilde = ad::slice_rows(h, cfg_.cells(), 1);
    return out;
  }

  /// u = gelu(r_tilde W_u + b_u)
  V propose_update(const V &r_tilde) const {
    return ad::gelu(ad::add_rowwise(ad::matmul(r_tilde, param("update.w")), param("update.b")));
  }

  V tau_d() const { return ad::sigmoid(param("discard.tau_logit")); }

  /// d = sigmoid(W_d [r_prev; u] + b_d), or the forced value.
  V discard_score(const V &r_prev, const V &u, std::optional<double> forced = {}) const {
    if (forced)
      return tape_.constant(Mat::Constant(1, 1, static_cast<Scalar>(*forced)));
    V z = ad::matmul(ad::concat_cols({r_prev, u}), ad::transpose(param("discard.w"))) +
          param("discard.b");
    return ad::sigmoid(z);
  }

  GateDecision<Scalar> discard_gate(const V &r_prev, const V &u, RunMode mode,
                                    std::optional<double> forced = {}) const {
    V d = discard_score(r_prev, u, forced);
    return select_next_state(r_prev, u, d, tau_d().scalar(), mode, cfg_.discard_mode);
  }

  /// Hard branch in infer mode (r_next is exactly r_prev or exactly u).
  /// Train mode blends d r_prev + (1-d) u, or with straight-through keeps the
  /// hard value and routes gradients as the blend would.
  static GateDecision<Scalar> select_next_state(const V &r_prev, const V &u, const V &d,
                                                Scalar tau, RunMode mode,
                                                DiscardMode discard_mode) {
    GateDecision<Scalar> g;
    g.d = d;
    g.accepted = !(d.scalar() > tau);
    if (mode == RunMode::Infer) {
      g.r_next = g.accepted ? u : r_prev;
    } else if (discard_mode == DiscardMode::SoftBlend) {
      g.r_next = ad::scalar_mul(d, r_prev - u) + u;
    } else {
      auto &tp = *u.tape();
      g.r_next = tp.record(
          g.accepted ? u.value() : r_prev.value(), {d, r_prev, u},
          [d, r_prev, u](ad::Tape<Scalar> &t, const Mat &, const Mat &grad) {
            const Scalar dv = d.scalar();
            if (d.requires_grad())
              t.accumulate(d, Mat::Constant(1, 1, grad.cwiseProduct(r_prev.value() - u.value()).sum()));
            t.accumulate(r_prev, dv * grad);
            t.accumulate(u, (Scalar(1) - dv) * grad);
          });
    }
    return g;
  }

  /// Each puzzle embedding, layer-normed, is modulated by a projection of
  /// the reasoning token, then classified into digits 1..side. [cells x side]
  V decode(const V &r, const V &puzzle_embed) const {
    V cross = ad::add_rowwise(ad::matmul(r, param("decoder.cross.w")), param("decoder.cross.b"));
    V x = ad::layer_norm(puzzle_embed, param("decoder.ln.gain"), param("decoder.ln.bias"));
    return ad::add_rowwise(ad::matmul(ad::mul_rowwise(x, cross), param("decoder.classifier.w")),
                           param("decoder.classifier.b"));
  }

  /// Softmax of the logits with clue cells pinned to their one-hot digit,
  /// scored by unit mass.
  V consistency(const V &logits, const Grid &puzzle) const {
    const int side = cfg_.side();
    Mat free_mask = Mat::Ones(cfg_.cells(), side);
    Mat clue_table = Mat::Zero(cfg_.cells(), side);
    for (int i = 0; i < cfg_.cells(); ++i) {
      if (puzzle[i]) {
        free_mask.row(i).setZero();
        clue_table(i, puzzle[i] - 1) = Scalar(1);
      }
    }
    V probs = ad::hadamard(ad::softmax(logits, 1), tape_.constant(std::move(free_mask))) +
              tape_.constant(std::move(clue_table));
    V unit_mass = ad::matmul(tape_.constant(membership_), probs);
    return ad::mean(ad::square(ad::affine(unit_mass, Scalar(1), Scalar(-1))));
  }

  StopDecision<Scalar> stop_gate(const V &r, std::optional<double> forced = {}) const {
    StopDecision<Scalar> out;
    if (forced) {
      const double s = *forced;
      out.s = tape_.constant(Mat::Constant(1, 1, static_cast<Scalar>(s)));
      out.logit = tape_.constant(Mat::Constant(1, 1, static_cast<Scalar>(std::log(s / (1.0 - s)))));
      return out;
    }
    out.logit = ad::matmul(r, ad::transpose(param("stop.w"))) + param("stop.b");
    out.s = ad::sigmoid(out.logit);
    return out;
  }

  /// Infer mode halts at the first s_t > tau_s (or T_max); train mode always
  /// unrolls T_max steps and only records where it would have halted.
  LoopResult<Scalar> run(const Grid &puzzle, RunMode mode,
                         const GateOverrides &overrides = {}) const {
    if (puzzle.box_size() != cfg_.box_size)
      throw std::invalid_argument("puzzle box size " + std::to_string(puzzle.box_size()) +
                                  " does not match model box size " +
                                  std::to_string(cfg_.box_size));
    LoopResult<Scalar> res;
    V x = embed_puzzle(encode_grid(puzzle));
    V r = param("reasoning.r0");
    const Scalar tau = tau_d().scalar();
    for (int t = 1; t <= cfg_.t_max; ++t) {
      auto enc = encode(embed_sequence(x, r));
      V u = propose_update(enc.r_tilde);
      auto gate = discard_gate(r, u, mode, overrides.discard ? overrides.discard(t) : std::nullopt);
      V logits = decode(gate.r_next, x);
      V c = consistency(logits, puzzle);
      auto stop = stop_gate(gate.r_next, overrides.stop ? overrides.stop(t) : std::nullopt);

      ReasoningStep step;
      step.t = t;
      step.r_before = r.value().row(0).template cast<double>();
      step.r_tilde = enc.r_tilde.value().row(0).template cast<double>();
      step.u = u.value().row(0).template cast<double>();
      step.r_after = gate.r_next.value().row(0).template cast<double>();
      step.d_gate = static_cast<double>(gate.d.scalar());
      step.tau_d = static_cast<double>(tau);
      step.accepted = gate.accepted;
      step.s_gate = static_cast<double>(stop.s.scalar());
      step.c_score = static_cast<double>(c.scalar());
      step.halted = stop.s.scalar() > static_cast<Scalar>(cfg_.tau_s) || t == cfg_.t_max;
      step.decoded = argmax_digits(logits.value());
      if (!step.accepted)
        ++res.trace.discard_event_count;
      if (step.halted && res.trace.halt_step == 0)
        res.trace.halt_step = t;
      res.trace.steps.push_back(std::move(step));
      res.steps.push_back({gate.d, stop.s, stop.logit, c, logits, gate.r_next});

      r = gate.r_next;
      res.logits = logits;
      if (mode == RunMode::Infer && res.trace.steps.back().halted)
        break;
    }
    res.r_final = r;
    res.trace.steps_taken = static_cast<int>(res.trace.steps.size());
    res.trace.logits = res.logits.value().template cast<double>();
    return res;
  }

private:
  ModelConfig cfg_;
  ad::Tape<Scalar> &tape_;
  Mat membership_;
  std::vector<V> leaves_;
  std::unordered_map<std::string, std::size_t> slots_;
};

struct Prediction {
  Grid grid;
  ReasoningTrace trace;
};

/// Infer-mode run followed by a per-cell argmax. Clue cells are predicted
/// too, never copied.
template <typename Scalar>
Prediction predict(const Grid &puzzle, const ParamRegistry<Scalar> &params,
                   const ModelConfig &cfg) {
  ad::Tape<Scalar> tape;
  LiquidReasoner<Scalar> model(cfg, params, tape, false);
  auto res = model.run(puzzle, RunMode::Infer);
  Prediction p{Grid(cfg.box_size, argmax_digits(res.trace.logits)), std::move(res.trace)};
  return p;
}

} // namespace lrt

#endif // LRT_MODEL_HPP_

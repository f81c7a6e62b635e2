// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   fixtures.hpp
 * @brief  Small models and reusable mechanism checks shared by the unit
 *         tests and the acceptance binary.
 */

#ifndef LRT_TESTS_FIXTURES_HPP_
#define LRT_TESTS_FIXTURES_HPP_

#include <cstdint>
#include <random>
#include <string>

#include "gradcheck.hpp"
#include "lrt/model.hpp"
#include "lrt/training.hpp"

namespace lrt::testing {

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.box_size = 2;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.ff_width = 16;
  c.t_max = 3;
  c.precision = Precision::Float64;
  return c;
}

/// Random parameters with the gates moved off their initial biases so every
/// path carries signal.
template <typename Scalar = double>
ParamRegistry<Scalar> lively_params(const ModelConfig &cfg, std::uint64_t seed) {
  auto p = init_params<Scalar>(cfg, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (const char *name : {"embed.token", "embed.pos", "reasoning.r0", "discard.w", "stop.w"}) {
    auto &v = p.at(name).value;
    v = random_matrix(rng, v.rows(), v.cols(), 0.5).template cast<Scalar>();
  }
  p.at("discard.b").value(0, 0) = Scalar(0.1);
  p.at("stop.b").value(0, 0) = Scalar(0);
  return p;
}

/// Total loss of a train-mode unroll, without gradients.
inline double loss_value(const ParamRegistry<double> &params, const TrainConfig &cfg,
                         const PuzzlePair &pair) {
  ad::Tape<double> tape;
  LiquidReasoner<double> model(cfg.model, params, tape, false);
  auto loop = model.run(pair.puzzle, RunMode::Train);
  return total_loss(model, loop, pair.solution, cfg.weights, cfg.deep_supervision).total.scalar();
}

struct GroupError {
  std::string name;
  double relative = 0;
};

/// Tape gradient of the full objective against central differences, per
/// parameter tensor. Returns the tensor with the largest relative error.
inline GroupError composed_gradcheck(const TrainConfig &cfg, const ParamRegistry<double> &params,
                                     const PuzzlePair &pair, double eps = 1e-6) {
  std::vector<MatD> grads;
  for (const auto &p : params)
    grads.push_back(MatD::Zero(p.value.rows(), p.value.cols()));
  accumulate_example(params, cfg, pair, grads);

  GroupError worst;
  auto probe = params;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    MatD numeric(probe[k].value.rows(), probe[k].value.cols());
    for (ad::Index i = 0; i < numeric.size(); ++i) {
      double &x = probe[k].value.data()[i];
      const double orig = x;
      x = orig + eps;
      const double up = loss_value(probe, cfg, pair);
      x = orig - eps;
      const double down = loss_value(probe, cfg, pair);
      x = orig;
      numeric.data()[i] = (up - down) / (2 * eps);
    }
    const double scale = std::max(grads[k].norm(), numeric.norm());
    const double diff = (grads[k] - numeric).norm();
    const double rel = scale < 1e-7 ? diff : diff / scale;
    if (rel >= worst.relative)
      worst = {probe[k].name, rel};
  }
  return worst;
}

/// Small 2-step objective with every loss term switched on.
inline TrainConfig gradcheck_train_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.model = tiny_config();
  cfg.model.t_max = 2;
  cfg.deep_supervision = seed % 2 == 1;
  cfg.weights = {1.0, 0.7, 0.3, 0.5, 0.2};
  return cfg;
}

struct CheckCount {
  int checked = 0;
  int failures = 0;
  std::string first_failure;
  void fail(const std::string &what) {
    if (failures++ == 0)
      first_failure = what;
  }
};

/// Infer-mode runs with forced gate values: every step must take exactly
/// r_prev or u, and the loop must stop at the first s_t > tau_s or T_max.
inline CheckCount check_gate_semantics(int traces, std::uint64_t seed) {
  CheckCount out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.001, 0.999);
  const auto base = ModelConfig::defaults_for(2);
  for (int k = 0; k < traces; ++k) {
    auto cfg = base;
    cfg.tau_s = std::uniform_real_distribution<double>(0.2, 0.95)(rng);
    auto params = init_params<double>(cfg, rng());
    params.at("discard.tau_logit").value(0, 0) = std::normal_distribution<double>(0, 1)(rng);
    const Grid puzzle = generate_puzzle(rng(), 2, 6 + static_cast<int>(rng() % 5)).puzzle;

    std::vector<double> d(static_cast<std::size_t>(cfg.t_max) + 1), s(d.size());
    for (auto &x : d)
      x = unit(rng);
    for (auto &x : s)
      x = unit(rng) * (cfg.tau_s + 0.15);
    GateOverrides forced;
    forced.discard = [&](int t) { return std::optional<double>(d[static_cast<std::size_t>(t)]); };
    forced.stop = [&](int t) { return std::optional<double>(s[static_cast<std::size_t>(t)]); };

    ad::Tape<double> tape;
    LiquidReasoner<double> model(cfg, params, tape, false);
    const double tau = model.tau_d().scalar();
    const auto res = model.run(puzzle, RunMode::Infer, forced);

    int expected = cfg.t_max;
    for (int t = 1; t <= cfg.t_max; ++t)
      if (s[static_cast<std::size_t>(t)] > cfg.tau_s) {
        expected = t;
        break;
      }
    ++out.checked;
    if (res.trace.steps_taken != expected)
      out.fail("trace " + std::to_string(k) + ": steps_taken " +
               std::to_string(res.trace.steps_taken) + ", expected " + std::to_string(expected));
    for (const auto &st : res.trace.steps) {
      const bool reject = d[static_cast<std::size_t>(st.t)] > tau;
      const auto &want = reject ? st.r_before : st.u;
      if (st.r_after != want || st.accepted == reject)
        out.fail("trace " + std::to_string(k) + " step " + std::to_string(st.t) +
                 ": next state is not the selected branch");
      const bool halt = s[static_cast<std::size_t>(st.t)] > cfg.tau_s || st.t == cfg.t_max;
      if (st.halted != halt)
        out.fail("trace " + std::to_string(k) + " step " + std::to_string(st.t) +
                 ": halted flag disagrees with the rule");
    }
  }
  return out;
}

/// Complete grids, half valid and half corrupted by digit swaps: the hard
/// one-hot consistency score is zero exactly when the grid has no violation.
inline CheckCount check_consistency_oracle(int grids, std::uint64_t seed) {
  CheckCount out;
  std::mt19937_64 rng(seed);
  for (int k = 0; k < grids; ++k) {
    const int n = k % 4 == 3 ? 3 : 2;
    Grid g = generate_puzzle(rng(), n, n == 2 ? 16 : 81).solution;
    if (k % 2 == 1) {
      std::uniform_int_distribution<int> cell(0, g.size() - 1);
      const int swaps = 1 + static_cast<int>(rng() % 3);
      for (int j = 0; j < swaps; ++j) {
        const int a = cell(rng), b = cell(rng);
        const auto va = g[a];
        g.set(a, g[b]);
        g.set(b, va);
      }
    }
    const Eigen::MatrixXd table = encode_grid(g).rows.rightCols(g.side());
    const double c = consistency_of_table(table, n);
    const int v = violation_count(g);
    ++out.checked;
    if ((c == 0.0) != (v == 0))
      out.fail("grid " + g.to_string() + ": c = " + std::to_string(c) +
               ", violations = " + std::to_string(v));
  }
  return out;
}

} // namespace lrt::testing

#endif // LRT_TESTS_FIXTURES_HPP_

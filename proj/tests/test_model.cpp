// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   test_model.cpp
 * @brief  Embeddings, encoder, gates, consistency score and the reasoning loop.
 */

#include <doctest.h>

#include "fixtures.hpp"

using namespace lrt;
using namespace lrt::testing;
using ad::Tape;

namespace {

const char *kSolved4 = "1234341221434321";

Grid sample_puzzle(std::uint64_t seed) { return generate_puzzle(seed, 2, 8).puzzle; }

} // namespace

TEST_CASE("config validation and parameter layout") {
  auto cfg = ModelConfig::defaults_for(2);
  CHECK(cfg.d_model == 64);
  CHECK(cfg.t_max == 8);
  cfg.validate();
  auto bad = cfg;
  bad.n_heads = 5;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.t_max = 0;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.tau_s = 1.0;
  CHECK_THROWS(bad.validate());

  for (auto c : {cfg, ModelConfig::defaults_for(3), tiny_config()}) {
    auto p = init_params<float>(c, 1);
    CHECK(p.total_elements() == analytic_param_count(c));
    check_param_layout(c, p);
  }
  const auto p = init_params<double>(cfg, 3);
  CHECK(p.at("discard.w").value.cols() == 2 * cfg.d_model);
  CHECK(p.at("decoder.classifier.w").value.cols() == cfg.side());
  CHECK(p.at("embed.token").value.rows() == cfg.side() + 1);
  CHECK(p.at("embed.pos").value.rows() == cfg.cells() + 1);
}

TEST_CASE("embeddings") {
  const auto cfg = tiny_config();
  auto params = lively_params(cfg, 1);
  Tape<double> tape;
  LiquidReasoner<double> m(cfg, params, tape, false);
  Grid a = Grid::from_string(2, "1000000000000000");
  Grid b = a;
  b.set(3, 2);
  auto r = m.param("reasoning.r0");
  auto sa = m.embed_sequence(m.embed_puzzle(encode_grid(a)), r).value();
  auto sb = m.embed_sequence(m.embed_puzzle(encode_grid(b)), r).value();
  CHECK(sa.rows() == 17);
  for (int i = 0; i < 17; ++i)
    CHECK(((sa.row(i) - sb.row(i)).norm() != 0.0) == (i == 3));

  auto zero = params;
  zero.at("embed.token").value.setZero();
  zero.at("embed.pos").value.setZero();
  Tape<double> t2;
  LiquidReasoner<double> z(cfg, zero, t2, false);
  CHECK(z.embed_puzzle(encode_grid(a)).value().norm() == 0.0);

  CHECK_THROWS_AS(m.embed_puzzle(encode_grid(Grid(3))), ad::ShapeError);
}

TEST_CASE("encoder") {
  auto cfg = tiny_config();
  cfg.n_layers = 2;
  const auto params = lively_params(cfg, 2);
  Tape<double> tape;
  LiquidReasoner<double> m(cfg, params, tape, false);
  auto seq = m.embed_sequence(m.embed_puzzle(encode_grid(sample_puzzle(3))),
                              m.param("reasoning.r0"));

  SUBCASE("joint permutation of puzzle positions leaves r_tilde unchanged") {
    MatD swapped = seq.value();
    swapped.row(2).swap(swapped.row(11));
    swapped.row(0).swap(swapped.row(15));
    auto a = m.encode(seq).r_tilde.value();
    auto b = m.encode(tape.constant(swapped)).r_tilde.value();
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("attention rows are distributions") {
    auto out = m.encode(seq, true);
    REQUIRE(out.attention.size() == static_cast<std::size_t>(cfg.n_layers * cfg.n_heads));
    for (const auto &w : out.attention)
      for (ad::Index i = 0; i < w.rows(); ++i)
        CHECK(std::abs(w.value().row(i).sum() - 1.0) <= 1e-9);
  }
  SUBCASE("an empty stack is the identity") {
    auto c0 = cfg;
    c0.n_layers = 0;
    const auto p0 = lively_params(c0, 4);
    Tape<double> t0;
    LiquidReasoner<double> m0(c0, p0, t0, false);
    auto s0 = m0.embed_sequence(m0.embed_puzzle(encode_grid(sample_puzzle(3))),
                                m0.param("reasoning.r0"));
    CHECK(m0.encode(s0).r_tilde.value() == s0.value().row(16));
  }
  SUBCASE("wrong sequence length is rejected") {
    CHECK_THROWS_AS(m.encode(tape.constant(MatD::Zero(5, cfg.d_model))), ad::ShapeError);
  }
}

TEST_CASE("propose_update") {
  const auto cfg = tiny_config();
  auto params = lively_params(cfg, 5);
  std::mt19937_64 rng(5);
  {
    auto p = params;
    p.at("update.w").value.setZero();
    p.at("update.b").value.setZero();
    Tape<double> t;
    LiquidReasoner<double> m(cfg, p, t, false);
    CHECK(m.propose_update(t.constant(random_matrix(rng, 1, 8))).value().norm() == 0.0);
  }
  {
    auto p = params;
    p.at("update.w").value = MatD::Identity(8, 8);
    p.at("update.b").value.setZero();
    Tape<double> t;
    LiquidReasoner<double> m(cfg, p, t, false);
    CHECK(m.propose_update(t.constant(MatD::Zero(1, 8))).value().norm() == 0.0);
  }
  double worst = 0;
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 r(static_cast<std::uint64_t>(seed));
    worst = std::max(worst, gradcheck(
                                [](Tape<double> &t, const std::vector<VarD> &v) {
                                  return weighted_sum(
                                      t, ad::gelu(ad::add_rowwise(ad::matmul(v[0], v[1]), v[2])));
                                },
                                {random_matrix(r, 1, 8), random_matrix(r, 8, 8, 0.4),
                                 random_matrix(r, 1, 8, 0.1)}));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("discard branch") {
  Tape<double> t;
  std::mt19937_64 rng(6);
  auto prev = t.constant(random_matrix(rng, 1, 8));
  auto u = t.constant(random_matrix(rng, 1, 8));
  auto gate = [&](double d, RunMode mode) {
    return LiquidReasoner<double>::select_next_state(prev, u, t.constant(MatD::Constant(1, 1, d)),
                                                     0.5, mode, DiscardMode::SoftBlend);
  };
  auto keep = gate(0.99, RunMode::Infer);
  CHECK_FALSE(keep.accepted);
  CHECK(keep.r_next.value() == prev.value());
  auto take = gate(0.01, RunMode::Infer);
  CHECK(take.accepted);
  CHECK(take.r_next.value() == u.value());
  auto mid = gate(0.5, RunMode::Train);
  CHECK(((mid.r_next.value() - (prev.value() + u.value()) / 2).cwiseAbs().maxCoeff()) <= 1e-15);
  CHECK(mid.accepted);

  auto st = LiquidReasoner<double>::select_next_state(
      prev, u, t.constant(MatD::Constant(1, 1, 0.7)), 0.5, RunMode::Train,
      DiscardMode::StraightThrough);
  CHECK(st.r_next.value() == prev.value());

  SUBCASE("straight-through routes gradients like the blend") {
    std::mt19937_64 r(8);
    const MatD a = random_matrix(r, 1, 4), b = random_matrix(r, 1, 4), w = random_matrix(r, 1, 4);
    auto grads = [&](DiscardMode mode) {
      Tape<double> tp;
      auto va = tp.variable(a), vb = tp.variable(b), vd = tp.variable(MatD::Constant(1, 1, 0.3));
      auto g = LiquidReasoner<double>::select_next_state(va, vb, vd, 0.5, RunMode::Train, mode);
      tp.backward(ad::sum(ad::hadamard(g.r_next, tp.constant(w))));
      return std::vector<MatD>{va.grad(), vb.grad(), vd.grad()};
    };
    auto soft = grads(DiscardMode::SoftBlend);
    auto hard = grads(DiscardMode::StraightThrough);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK((soft[i] - hard[i]).norm() <= 1e-15);
  }
}

TEST_CASE("consistency score") {
  const MatD solved = encode_grid(Grid::from_string(2, kSolved4)).rows.rightCols(4);
  CHECK(consistency_of_table(solved, 2) == 0.0);
  CHECK(consistency_of_table(MatD::Constant(16, 4, 0.25), 2) == doctest::Approx(0.0));
  MatD moved = solved;
  moved.row(1).setZero();
  moved(1, 0) = 1.0; // digit 1 is already in row 0
  CHECK(consistency_of_table(moved, 2) > 0.0);

  SUBCASE("tape score matches the table score with clues pinned") {
    const auto cfg = tiny_config();
    const auto params = lively_params(cfg, 9);
    std::mt19937_64 rng(9);
    for (int k = 0; k < 10; ++k) {
      Tape<double> t;
      LiquidReasoner<double> m(cfg, params, t, false);
      const Grid puzzle = sample_puzzle(static_cast<std::uint64_t>(k));
      const MatD logits = random_matrix(rng, 16, 4, 2.0);
      MatD p(16, 4);
      for (int i = 0; i < 16; ++i) {
        if (puzzle[i]) {
          p.row(i).setZero();
          p(i, puzzle[i] - 1) = 1.0;
        } else {
          p.row(i) = logits.row(i).array().exp().matrix();
          p.row(i) /= p.row(i).sum();
        }
      }
      CHECK(m.consistency(t.constant(logits), puzzle).scalar() ==
            doctest::Approx(consistency_of_table(p, 2)).epsilon(1e-12));
    }
  }
}

TEST_CASE("stop gate") {
  const auto cfg = tiny_config();
  auto params = lively_params(cfg, 10);
  std::mt19937_64 rng(10);
  auto zero = params;
  zero.at("stop.w").value.setZero();
  zero.at("stop.b").value.setZero();
  Tape<double> t;
  LiquidReasoner<double> m(cfg, zero, t, false);
  CHECK(m.stop_gate(t.constant(random_matrix(rng, 1, 8))).s.scalar() == 0.5);

  auto sat = params;
  sat.at("stop.b").value(0, 0) = 20.0;
  Tape<double> t2;
  LiquidReasoner<double> ms(cfg, sat, t2, false);
  CHECK(ms.stop_gate(t2.constant(random_matrix(rng, 1, 8, 0.1))).s.scalar() > 0.999);
  CHECK(ms.run(sample_puzzle(1), RunMode::Infer).trace.steps_taken == 1);

  double worst = 0;
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 r(static_cast<std::uint64_t>(seed));
    worst = std::max(worst, gradcheck(
                                [](Tape<double> &, const std::vector<VarD> &v) {
                                  return ad::sigmoid(
                                      ad::matmul(v[0], ad::transpose(v[1])) + v[2]);
                                },
                                {random_matrix(r, 1, 8), random_matrix(r, 1, 8, 0.3),
                                 random_matrix(r, 1, 1)}));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("reasoning loop") {
  const auto cfg = tiny_config();
  auto params = lively_params(cfg, 11);
  const Grid puzzle = sample_puzzle(11);

  SUBCASE("a very negative stop bias runs to T_max") {
    auto p = params;
    p.at("stop.b").value(0, 0) = -20.0;
    Tape<double> t;
    LiquidReasoner<double> m(cfg, p, t, false);
    auto res = m.run(puzzle, RunMode::Infer);
    CHECK(res.trace.steps_taken == cfg.t_max);
    CHECK(res.trace.steps.back().halted);
  }
  SUBCASE("train mode always unrolls T_max steps") {
    auto p = params;
    p.at("stop.b").value(0, 0) = 20.0;
    Tape<double> t;
    LiquidReasoner<double> m(cfg, p, t, false);
    auto res = m.run(puzzle, RunMode::Train);
    CHECK(res.trace.steps_taken == cfg.t_max);
    CHECK(res.trace.halt_step == 1);
  }
  SUBCASE("wrong box size is rejected") {
    Tape<double> t;
    LiquidReasoner<double> m(cfg, params, t, false);
    CHECK_THROWS_AS(m.run(Grid(3), RunMode::Infer), std::invalid_argument);
  }
  SUBCASE("trace bookkeeping") {
    Tape<double> t;
    LiquidReasoner<double> m(cfg, params, t, false);
    auto res = m.run(puzzle, RunMode::Infer);
    int discards = 0;
    for (const auto &s : res.trace.steps) {
      discards += !s.accepted;
      CHECK(s.accepted == (s.d_gate <= s.tau_d));
      CHECK(s.c_score >= 0.0);
    }
    CHECK(discards == res.trace.discard_event_count);
    CHECK(res.trace.logits.rows() == 16);
    CHECK(res.trace.logits.cols() == 4);
  }
}

TEST_CASE("decoder") {
  const auto cfg = tiny_config();
  auto params = lively_params(cfg, 12);
  params.at("decoder.classifier.w").value.setZero();
  params.at("decoder.classifier.b").value.setZero();
  Tape<double> t;
  LiquidReasoner<double> m(cfg, params, t, false);
  auto x = m.embed_puzzle(encode_grid(sample_puzzle(12)));
  auto logits = m.decode(m.param("reasoning.r0"), x).value();
  CHECK(logits.rows() == 16);
  CHECK(logits.cols() == 4);
  CHECK(logits.norm() == 0.0);
  CHECK(argmax_digits(logits) == std::vector<std::uint8_t>(16, 1));
}

TEST_CASE("predict") {
  const auto cfg = tiny_config();
  const auto params = lively_params(cfg, 13);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Grid puzzle = sample_puzzle(s);
    auto a = predict(puzzle, params, cfg);
    auto b = predict(puzzle, params, cfg);
    CHECK(a.grid == b.grid);
    CHECK(a.trace.logits == b.trace.logits);
    CHECK(a.trace.steps_taken == b.trace.steps_taken);
    CHECK(a.grid.complete());
  }
}

TEST_CASE("hard-gate semantics and halting soundness with learned gates") {
  auto cfg = tiny_config();
  cfg.t_max = 6;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto params = lively_params(cfg, seed);
    params.at("stop.b").value(0, 0) = static_cast<double>(seed % 5) - 2.0;
    params.at("discard.b").value(0, 0) = static_cast<double>(seed % 3) - 1.0;
    Tape<double> t;
    LiquidReasoner<double> m(cfg, params, t, false);
    auto res = m.run(sample_puzzle(seed), RunMode::Infer);
    int first = cfg.t_max;
    for (const auto &s : res.trace.steps) {
      CHECK((s.r_after == s.u || s.r_after == s.r_before));
      CHECK(s.r_after == (s.accepted ? s.u : s.r_before));
      if (s.s_gate > cfg.tau_s)
        first = std::min(first, s.t);
    }
    CHECK(res.trace.steps_taken == first);
  }
}

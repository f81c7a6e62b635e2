// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   test_training.cpp
 * @brief  Loss terms, the composed gradient, the optimizer loop and metrics.
 */

#include <cmath>
#include <sstream>
#include <utility>

#include <doctest.h>

#include "fixtures.hpp"
#include "lrt/io.hpp"

using namespace lrt;
using namespace lrt::testing;
using ad::Tape;

namespace {

std::vector<PuzzlePair> small_dataset(int count, std::uint64_t seed = 0) {
  std::vector<PuzzlePair> out;
  for (int i = 0; i < count; ++i)
    out.push_back(generate_puzzle(seed + static_cast<std::uint64_t>(i), 2, 6 + i % 5));
  return out;
}

StepVars<double> const_step(Tape<double> &t, double d, double s, double c) {
  StepVars<double> v;
  v.d = t.constant(MatD::Constant(1, 1, d));
  v.s = t.constant(MatD::Constant(1, 1, s));
  v.s_logit = t.constant(MatD::Constant(1, 1, std::log(s / (1 - s))));
  v.c = t.constant(MatD::Constant(1, 1, c));
  return v;
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.model = tiny_config();
  cfg.model.precision = Precision::Float64;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.warmup_steps = 2;
  return cfg;
}

} // namespace

TEST_CASE("task_loss") {
  Tape<double> t;
  const Grid solved9 = Grid::from_string(
      3, "534678912672195348198342567859761423426853791713924856961537284287419635345286179");
  CHECK(task_loss(t.constant(MatD::Zero(81, 9)), solved9).scalar() ==
        doctest::Approx(std::log(9.0)).epsilon(1e-12));

  const Grid solved4 = Grid::from_string(2, "1234341221434321");
  MatD confident = MatD::Constant(16, 4, -40.0);
  for (int i = 0; i < 16; ++i)
    confident(i, solved4[i] - 1) = 40.0;
  CHECK(task_loss(t.constant(confident), solved4).scalar() <= 1e-12);

  // Row i puts logit a_i = i/4 on the correct digit and 0 elsewhere, so its
  // loss is log(e^{a_i} + 3) - a_i.
  MatD crafted = MatD::Zero(16, 4);
  double expected = 0;
  for (int i = 0; i < 16; ++i) {
    const double a = i / 4.0;
    crafted(i, solved4[i] - 1) = a;
    expected += std::log(std::exp(a) + 3.0) - a;
  }
  expected /= 16;
  CHECK(task_loss(t.constant(crafted), solved4).scalar() ==
        doctest::Approx(expected).epsilon(1e-12));

  Grid holed = solved4;
  holed.set(5, 0);
  CHECK_THROWS_AS(task_loss(t.constant(crafted), holed), std::invalid_argument);
}

TEST_CASE("thinking_loss") {
  Tape<double> t;
  auto tau = t.constant(MatD::Constant(1, 1, 0.5));
  SUBCASE("decisive gates and consistent tables cost nothing") {
    std::vector<StepVars<double>> steps{const_step(t, 0.0, 0.3, 0.0), const_step(t, 1.0, 0.3, 0.0)};
    CHECK(thinking_loss<double>(steps, tau, 1.0).total.scalar() == 0.0);
  }
  SUBCASE("undecided gates at one half") {
    std::vector<StepVars<double>> steps(3, const_step(t, 0.5, 0.3, 0.0));
    CHECK(thinking_loss<double>(steps, tau, 1.0).total.scalar() == doctest::Approx(0.25));
  }
  SUBCASE("margin reduces to d(1-d) at tau = 1/2") {
    for (double d : {0.05, 0.2, 0.5, 0.61, 0.9})
      CHECK(discard_margin(t.constant(MatD::Constant(1, 1, d)), tau).scalar() ==
            doctest::Approx(d * (1 - d)).epsilon(1e-12));
  }
  SUBCASE("components add up") {
    std::vector<StepVars<double>> steps{const_step(t, 0.3, 0.3, 0.2), const_step(t, 0.8, 0.3, 0.4)};
    auto th = thinking_loss<double>(steps, tau, 0.5);
    CHECK(th.consistency.scalar() == doctest::Approx(0.3));
    CHECK(th.margin.scalar() == doctest::Approx((0.3 * 0.7 + 0.8 * 0.2) / 2));
    CHECK(th.total.scalar() == doctest::Approx(0.3 + 0.5 * th.margin.scalar()));
  }
  SUBCASE("margin gradient matches finite differences") {
    double worst = 0;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int k = 0; k < 20; ++k) {
      MatD d = MatD::Constant(1, 1, u(rng)), tv = MatD::Constant(1, 1, u(rng));
      if (std::abs(d(0, 0) - tv(0, 0)) < 1e-3)
        continue;
      worst = std::max(worst, gradcheck(
                                  [](Tape<double> &, const std::vector<VarD> &v) {
                                    return discard_margin(v[0], v[1]);
                                  },
                                  {d, tv}));
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("step_regularization") {
  Tape<double> t;
  std::vector<StepVars<double>> ones(4, const_step(t, 0.5, 0.5, 0.0));
  for (auto &s : ones)
    s.s = t.constant(MatD::Constant(1, 1, 1.0));
  CHECK(step_regularization<double>(ones).scalar() == 0.0);
  for (auto &s : ones)
    s.s = t.constant(MatD::Constant(1, 1, 0.0));
  CHECK(step_regularization<double>(ones).scalar() == 1.0);

  double worst = 0;
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const MatD rs = random_matrix(rng, 3, 8);
    worst = std::max(worst, gradcheck(
                                [&rs](Tape<double> &tp, const std::vector<VarD> &v) {
                                  std::vector<StepVars<double>> steps;
                                  for (int i = 0; i < 3; ++i) {
                                    StepVars<double> sv;
                                    sv.s = ad::sigmoid(
                                        ad::matmul(tp.constant(rs.row(i)), ad::transpose(v[0])) +
                                        v[1]);
                                    steps.push_back(sv);
                                  }
                                  return step_regularization<double>(steps);
                                },
                                {random_matrix(rng, 1, 8, 0.5), random_matrix(rng, 1, 1)}));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("halt_loss") {
  Tape<double> t;
  std::vector<StepVars<double>> steps{const_step(t, 0.5, 0.5, 0.0), const_step(t, 0.5, 0.5, 0.0)};
  CHECK(halt_loss<double>(steps, {true, false}).scalar() == doctest::Approx(std::log(2.0)));
  CHECK_THROWS(halt_loss<double>(steps, {true}));
}

TEST_CASE("total_loss weights") {
  auto cfg = gradcheck_train_config(0);
  const auto params = lively_params(cfg.model, 21);
  const auto pair = generate_puzzle(21, 2, 7);

  auto run = [&](const LossWeights &w) {
    Tape<double> t;
    LiquidReasoner<double> m(cfg.model, params, t, false);
    auto loop = m.run(pair.puzzle, RunMode::Train);
    const auto loss = total_loss(m, loop, pair.solution, w);
    return std::pair{static_cast<double>(loss.total.scalar()), loss.task};
  };
  const auto [only_task, task] = run({1, 0, 0, 0, 0});
  CHECK(only_task == doctest::Approx(task).epsilon(1e-14));

  const LossWeights base{1.0, 0.4, 0.3, 0.2, 0.6};
  for (int which = 0; which < 5; ++which) {
    double values[3];
    for (int k = 0; k < 3; ++k) {
      LossWeights w = base;
      double *slot[] = {&w.task, &w.think, &w.step, &w.margin, &w.halt};
      *slot[which] *= k;
      values[k] = run(w).first;
    }
    CHECK(values[2] - values[1] == doctest::Approx(values[1] - values[0]).epsilon(1e-12));
  }
}

TEST_CASE("composed gradient on a 4x4 puzzle, 2-step unroll") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto cfg = gradcheck_train_config(seed);
    const auto params = lively_params(cfg.model, 100 + seed);
    const auto pair = generate_puzzle(seed, 2, 7);
    const auto worst = composed_gradcheck(cfg, params, pair);
    INFO("parameter " << worst.name);
    CHECK(worst.relative <= 1e-3);
  }
}

TEST_CASE("warmup and optimizer") {
  CHECK(warmup_rate(1.0, 4, 0) == 0.25);
  CHECK(warmup_rate(1.0, 4, 3) == 1.0);
  CHECK(warmup_rate(1.0, 4, 10) == 1.0);
  CHECK(warmup_rate(0.5, 0, 0) == 0.5);

  CHECK(scheduled_rate(1.0, 4, 10, 20, false) == 1.0);
  CHECK(scheduled_rate(1.0, 4, 1, 20, true) == 0.5);
  CHECK(scheduled_rate(1.0, 4, 11, 20, true) == doctest::Approx(0.5));
  CHECK(scheduled_rate(1.0, 4, 19, 20, true) == doctest::Approx(0.0));
  CHECK(scheduled_rate(1.0, 0, 0, 2, true) == doctest::Approx(0.5));

  ParamRegistry<double> p;
  p.add("w", {2}, MatD::Constant(1, 2, 1.0));
  AdamOptimizer<double> adam(p);
  adam.step(p, {MatD::Constant(1, 2, 3.0)}, 0.1);
  // The first bias-corrected Adam step moves each coordinate by lr * sign(g).
  CHECK(p[0].value(0, 0) == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("train loop") {
  const auto data = small_dataset(24);
  auto cfg = tiny_train_config();

  SUBCASE("fixed seed reproduces loss and parameters") {
    cfg.epochs = 2;
    auto a = train<double>(data, cfg);
    auto b = train<double>(data, cfg);
    REQUIRE(a.log.size() == 2);
    CHECK(a.log[0].train_loss == b.log[0].train_loss);
    for (std::size_t e = 0; e < a.log.size(); ++e)
      CHECK(a.log[e].checksum == b.log[e].checksum);
    CHECK(a.log[0].checksum != a.log[1].checksum);
  }
  SUBCASE("learning rate zero leaves parameters unchanged") {
    cfg.learning_rate = 0.0;
    auto res = train<double>(data, cfg);
    CHECK(param_checksum(res.params) == param_checksum(init_params<double>(cfg.model, cfg.seed)));
  }
  SUBCASE("empty dataset and mismatched box size are rejected") {
    CHECK_THROWS(train<double>(std::span<const PuzzlePair>(), cfg));
    std::vector<PuzzlePair> big{generate_puzzle(1, 3, 40)};
    CHECK_THROWS(train<double>(big, cfg));
  }
  SUBCASE("best epoch has the lowest validation loss") {
    cfg.epochs = 3;
    auto res = train<double>(data, cfg);
    for (const auto &e : res.log)
      CHECK(res.log[static_cast<std::size_t>(res.best_epoch)].val.validation_loss <=
            e.val.validation_loss);
  }
  SUBCASE("float and double both train") {
    auto res = train<float>(data, cfg);
    CHECK(std::isfinite(res.log[0].train_loss));
  }
}

TEST_CASE("split_dataset") {
  const auto data = small_dataset(50);
  auto a = split_dataset(data, 0.1, 7);
  auto b = split_dataset(data, 0.1, 7);
  CHECK(a.validation.size() == 5);
  CHECK(a.train.size() == 45);
  CHECK(a.validation == b.validation);
  CHECK_FALSE(split_dataset(data, 0.1, 8).validation == a.validation);
}

TEST_CASE("evaluation metrics") {
  const auto data = small_dataset(30, 500);

  SUBCASE("perfect predictions score one") {
    std::vector<PuzzleRecord> recs;
    for (const auto &p : data) {
      PuzzleRecord r;
      r.puzzle = p.puzzle;
      r.solution = r.prediction = r.soft_prediction = p.solution;
      r.steps.push_back({1, 0.2, true, 0.9, 0.0, true, true});
      recs.push_back(r);
    }
    auto m = aggregate_metrics(recs);
    CHECK(m.digit_accuracy == 1.0);
    CHECK(m.puzzle_accuracy == 1.0);
    CHECK(m.mean_thinking_steps == 1.0);
    CHECK(m.train_infer_disagreement == 0.0);
  }

  SUBCASE("copying clues and guessing the smallest digit elsewhere") {
    // Clue tokens embed to a basis direction the classifier maps onto their
    // digit; the empty token embeds to zero, giving uniform logits that
    // break toward digit 1.
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 3);
    auto &tok = params.at("embed.token").value;
    tok.setZero();
    for (int k = 1; k <= 4; ++k)
      tok(k, k - 1) = 1.0;
    params.at("embed.pos").value.setZero();
    params.at("decoder.cross.w").value.setZero();
    params.at("decoder.cross.b").value.setOnes();
    auto &cls = params.at("decoder.classifier.w").value;
    cls.setZero();
    for (int k = 0; k < 4; ++k)
      cls(k, k) = 1.0;
    params.at("decoder.classifier.b").value.setZero();

    long correct = 0, cells = 0, solved = 0;
    for (const auto &p : data) {
      bool all = true;
      for (int i = 0; i < 16; ++i) {
        const bool ok = p.puzzle[i] ? true : p.solution[i] == 1;
        correct += ok;
        all = all && ok;
      }
      cells += 16;
      solved += all;
    }
    auto res = evaluate(params, std::span<const PuzzlePair>(data), cfg);
    CHECK(res.metrics.digit_accuracy == doctest::Approx(double(correct) / double(cells)));
    CHECK(res.metrics.puzzle_accuracy == doctest::Approx(double(solved) / double(data.size())));
  }

  SUBCASE("puzzle accuracy never exceeds digit accuracy") {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 20; ++k) {
      const auto params = lively_params(tiny_config(), rng());
      auto m = evaluate(params, std::span<const PuzzlePair>(data), tiny_config()).metrics;
      CHECK(m.puzzle_accuracy <= m.digit_accuracy);
      CHECK(m.mean_discarded_tokens == m.mean_discard_events);
    }
  }

  SUBCASE("parallel workers give identical results") {
    const auto params = lively_params(tiny_config(), 5);
    auto a = evaluate(params, std::span<const PuzzlePair>(data), tiny_config(), 1);
    auto b = evaluate(params, std::span<const PuzzlePair>(data), tiny_config(), 4);
    CHECK(a.metrics == b.metrics);
    CHECK(a.records == b.records);
  }

  SUBCASE("metrics recomputed from an exported trace match exactly") {
    const auto params = lively_params(tiny_config(), 6);
    auto res = evaluate(params, std::span<const PuzzlePair>(data), tiny_config());
    std::stringstream ss;
    write_trace_header(ss);
    for (std::size_t i = 0; i < res.records.size(); ++i)
      write_trace_record(ss, i, res.records[i]);
    auto back = read_trace_records(ss);
    CHECK(back == res.records);
    CHECK(aggregate_metrics(back) == res.metrics);
  }

  CHECK_THROWS(evaluate(lively_params(tiny_config(), 1), std::span<const PuzzlePair>(),
                        tiny_config()));
}

TEST_CASE("epoch log line") {
  EpochLog e;
  e.epoch = 3;
  const auto line = format_epoch_line(e);
  CHECK(std::count(line.begin(), line.end(), '\t') == 9);
  CHECK(line.rfind("3\t", 0) == 0);
}

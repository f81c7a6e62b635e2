// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   model.cpp
 * @brief  Model configuration, parameter layout and the plain-matrix
 *         consistency score.
 */

#include "lrt/model.hpp"

namespace lrt {

void ModelConfig::validate() const {
  auto fail = [](const std::string &msg) { throw std::invalid_argument("model config: " + msg); };
  if (!supported_box_size(box_size))
    fail("box_size must be 2 or 3");
  if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0)
    fail("d_model must be a positive multiple of n_heads");
  if (n_layers < 0)
    fail("n_layers must be >= 0");
  if (ff_width < 1)
    fail("ff_width must be >= 1");
  if (t_max < 1)
    fail("t_max must be >= 1");
  if (!(tau_s > 0.0 && tau_s < 1.0))
    fail("tau_s must lie in (0, 1)");
}

ModelConfig ModelConfig::defaults_for(int box_size) {
  ModelConfig c;
  c.box_size = box_size;
  if (box_size == 3) {
    c.d_model = 128;
    c.n_layers = 4;
    c.n_heads = 8;
    c.ff_width = 256;
    c.t_max = 32;
  }
  c.validate();
  return c;
}

CheckpointHeader ModelConfig::header() const {
  return {static_cast<std::uint32_t>(box_size), static_cast<std::uint32_t>(d_model),
          static_cast<std::uint32_t>(n_layers), static_cast<std::uint32_t>(n_heads),
          static_cast<std::uint32_t>(t_max)};
}

ModelConfig ModelConfig::from_checkpoint(const Checkpoint &ck) {
  ModelConfig c;
  c.box_size = static_cast<int>(ck.header.box_size);
  c.d_model = static_cast<int>(ck.header.d_model);
  c.n_layers = static_cast<int>(ck.header.n_layers);
  c.n_heads = static_cast<int>(ck.header.n_heads);
  c.t_max = static_cast<int>(ck.header.t_max);
  if (c.n_layers > 0) {
    if (!ck.params.contains("encoder.layer0.ff.w1"))
      throw CorruptCheckpoint("checkpoint lacks encoder.layer0.ff.w1");
    const auto &shape = ck.params.at("encoder.layer0.ff.w1").shape;
    if (shape.size() != 2)
      throw CorruptCheckpoint("encoder.layer0.ff.w1 must be rank 2");
    c.ff_width = static_cast<int>(shape[1]);
  }
  try {
    c.validate();
    check_param_layout(c, ck.params);
  } catch (const std::invalid_argument &e) {
    throw CorruptCheckpoint(std::string("checkpoint inconsistent with its header: ") + e.what());
  }
  return c;
}

std::vector<std::pair<std::string, std::vector<std::uint32_t>>>
param_layout(const ModelConfig &cfg) {
  const auto d = static_cast<std::uint32_t>(cfg.d_model);
  const auto ff = static_cast<std::uint32_t>(cfg.ff_width);
  const auto side = static_cast<std::uint32_t>(cfg.side());
  const auto cells = static_cast<std::uint32_t>(cfg.cells());
  std::vector<std::pair<std::string, std::vector<std::uint32_t>>> out = {
      {"embed.token", {side + 1, d}},
      {"embed.pos", {cells + 1, d}},
      {"reasoning.r0", {d}},
  };
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l) + ".";
    out.push_back({p + "ln1.gain", {d}});
    out.push_back({p + "ln1.bias", {d}});
    for (const char *w : {"q", "k", "v", "o"}) {
      out.push_back({p + "attn.w" + w, {d, d}});
      out.push_back({p + "attn.b" + w, {d}});
    }
    out.push_back({p + "ln2.gain", {d}});
    out.push_back({p + "ln2.bias", {d}});
    out.push_back({p + "ff.w1", {d, ff}});
    out.push_back({p + "ff.b1", {ff}});
    out.push_back({p + "ff.w2", {ff, d}});
    out.push_back({p + "ff.b2", {d}});
  }
  out.push_back({"update.w", {d, d}});
  out.push_back({"update.b", {d}});
  out.push_back({"discard.w", {1, 2 * d}});
  out.push_back({"discard.b", {1}});
  out.push_back({"discard.tau_logit", {1}});
  out.push_back({"stop.w", {1, d}});
  out.push_back({"stop.b", {1}});
  out.push_back({"decoder.ln.gain", {d}});
  out.push_back({"decoder.ln.bias", {d}});
  out.push_back({"decoder.cross.w", {d, d}});
  out.push_back({"decoder.cross.b", {d}});
  out.push_back({"decoder.classifier.w", {d, side}});
  out.push_back({"decoder.classifier.b", {side}});
  return out;
}

std::size_t analytic_param_count(const ModelConfig &cfg) {
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  const std::size_t ff = static_cast<std::size_t>(cfg.ff_width);
  const std::size_t side = static_cast<std::size_t>(cfg.side());
  const std::size_t cells = side * side;
  const std::size_t embeddings = (side + 1) * d + (cells + 1) * d + d;
  const std::size_t per_layer = 4 * d * d + 4 * d   // attention
                                + 4 * d             // two layer norms
                                + 2 * d * ff + ff + d; // feed-forward
  const std::size_t update = d * d + d;
  const std::size_t discard = 2 * d + 1 + 1;
  const std::size_t stop = d + 1;
  const std::size_t decoder = 2 * d + d * d + d + d * side + side;
  return embeddings + static_cast<std::size_t>(cfg.n_layers) * per_layer + update + discard +
         stop + decoder;
}

Eigen::MatrixXd unit_membership(int box_size) {
  const auto &units = sudoku_units(box_size);
  const int cells = box_size * box_size * box_size * box_size;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(units.size()), cells);
  for (std::size_t u = 0; u < units.size(); ++u)
    for (int cell : units[u])
      m(static_cast<Eigen::Index>(u), cell) = 1.0;
  return m;
}

double consistency_of_table(const Eigen::MatrixXd &probs, int box_size) {
  const int side = box_size * box_size;
  if (probs.rows() != side * side || probs.cols() != side)
    throw std::invalid_argument("probability table must be cells x side");
  const Eigen::MatrixXd mass = unit_membership(box_size) * probs;
  return (mass.array() - 1.0).square().mean();
}

} // namespace lrt

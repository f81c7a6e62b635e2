// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   io.cpp
 * @brief  Config, metrics and trace text formats.
 */

#include "lrt/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace lrt {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_tabs(const std::string &line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos)
      break;
    start = tab + 1;
  }
  return out;
}

template <typename Int> Int parse_int(const std::string &text) {
  Int v{};
  const auto *end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw std::invalid_argument("expected an integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string &text) {
  if (text == "true" || text == "1")
    return true;
  if (text == "false" || text == "0")
    return false;
  throw std::invalid_argument("expected true or false, got '" + text + "'");
}

std::map<std::string, std::string> read_key_values(std::istream &in,
                                                   std::map<std::string, std::size_t> *lines) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty())
      continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ParseError(line_no, "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError(line_no, "expected 'key = value'");
    if (kv.count(key))
      throw ParseError(line_no, "duplicate key '" + key + "'");
    kv.emplace(key, value);
    if (lines)
      (*lines)[key] = line_no;
  }
  return kv;
}

} // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc())
    throw std::runtime_error("cannot format number");
  return std::string(buf, ptr);
}

double parse_double(const std::string &text) {
  double v = 0;
  const auto *end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw std::invalid_argument("expected a number, got '" + text + "'");
  return v;
}

TrainConfig parse_train_config(std::istream &in) {
  std::map<std::string, std::size_t> lines;
  const auto kv = read_key_values(in, &lines);
  TrainConfig cfg;
  if (auto it = kv.find("box_size"); it != kv.end()) {
    try {
      cfg.model = ModelConfig::defaults_for(parse_int<int>(it->second));
    } catch (const std::invalid_argument &e) {
      throw ParseError(lines.at("box_size"), e.what());
    }
  }
  for (const auto &[key, value] : kv) {
    try {
      if (key == "box_size") {
        // applied above
      } else if (key == "d_model") {
        cfg.model.d_model = parse_int<int>(value);
      } else if (key == "n_layers") {
        cfg.model.n_layers = parse_int<int>(value);
      } else if (key == "n_heads") {
        cfg.model.n_heads = parse_int<int>(value);
      } else if (key == "ff_width") {
        cfg.model.ff_width = parse_int<int>(value);
      } else if (key == "t_max") {
        cfg.model.t_max = parse_int<int>(value);
      } else if (key == "tau_s") {
        cfg.model.tau_s = parse_double(value);
      } else if (key == "precision") {
        if (value == "float32")
          cfg.model.precision = Precision::Float32;
        else if (value == "float64")
          cfg.model.precision = Precision::Float64;
        else
          throw std::invalid_argument("precision must be float32 or float64");
      } else if (key == "discard_mode") {
        if (value == "soft")
          cfg.model.discard_mode = DiscardMode::SoftBlend;
        else if (value == "straight_through")
          cfg.model.discard_mode = DiscardMode::StraightThrough;
        else
          throw std::invalid_argument("discard_mode must be soft or straight_through");
      } else if (key == "epochs") {
        cfg.epochs = parse_int<int>(value);
      } else if (key == "batch_size") {
        cfg.batch_size = parse_int<int>(value);
      } else if (key == "learning_rate") {
        cfg.learning_rate = parse_double(value);
      } else if (key == "warmup_steps") {
        cfg.warmup_steps = parse_int<int>(value);
      } else if (key == "seed") {
        cfg.seed = parse_int<std::uint64_t>(value);
      } else if (key == "val_fraction") {
        cfg.val_fraction = parse_double(value);
      } else if (key == "deep_supervision") {
        cfg.deep_supervision = parse_bool(value);
      } else if (key == "grad_clip") {
        cfg.grad_clip = parse_double(value);
      } else if (key == "augment") {
        cfg.augment = parse_bool(value);
      } else if (key == "cosine_decay") {
        cfg.cosine_decay = parse_bool(value);
      } else if (key == "lambda_task") {
        cfg.weights.task = parse_double(value);
      } else if (key == "lambda_think") {
        cfg.weights.think = parse_double(value);
      } else if (key == "lambda_step") {
        cfg.weights.step = parse_double(value);
      } else if (key == "lambda_margin") {
        cfg.weights.margin = parse_double(value);
      } else if (key == "lambda_halt") {
        cfg.weights.halt = parse_double(value);
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument &e) {
      throw ParseError(lines.at(key), e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument &e) {
    throw ParseError(0, e.what());
  }
  return cfg;
}

TrainConfig read_train_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  return parse_train_config(in);
}

std::string format_train_config(const TrainConfig &cfg) {
  std::ostringstream os;
  const auto &m = cfg.model;
  os << "box_size = " << m.box_size << '\n'
     << "d_model = " << m.d_model << '\n'
     << "n_layers = " << m.n_layers << '\n'
     << "n_heads = " << m.n_heads << '\n'
     << "ff_width = " << m.ff_width << '\n'
     << "t_max = " << m.t_max << '\n'
     << "tau_s = " << format_double(m.tau_s) << '\n'
     << "precision = " << (m.precision == Precision::Float32 ? "float32" : "float64") << '\n'
     << "discard_mode = "
     << (m.discard_mode == DiscardMode::SoftBlend ? "soft" : "straight_through") << '\n'
     << "epochs = " << cfg.epochs << '\n'
     << "batch_size = " << cfg.batch_size << '\n'
     << "learning_rate = " << format_double(cfg.learning_rate) << '\n'
     << "warmup_steps = " << cfg.warmup_steps << '\n'
     << "seed = " << cfg.seed << '\n'
     << "val_fraction = " << format_double(cfg.val_fraction) << '\n'
     << "deep_supervision = " << (cfg.deep_supervision ? "true" : "false") << '\n'
     << "grad_clip = " << format_double(cfg.grad_clip) << '\n'
     << "augment = " << (cfg.augment ? "true" : "false") << '\n'
     << "cosine_decay = " << (cfg.cosine_decay ? "true" : "false") << '\n'
     << "lambda_task = " << format_double(cfg.weights.task) << '\n'
     << "lambda_think = " << format_double(cfg.weights.think) << '\n'
     << "lambda_step = " << format_double(cfg.weights.step) << '\n'
     << "lambda_margin = " << format_double(cfg.weights.margin) << '\n'
     << "lambda_halt = " << format_double(cfg.weights.halt) << '\n';
  return os.str();
}

namespace {

struct MetricField {
  const char *key;
  double EvalMetrics::*field;
};

constexpr MetricField kMetricFields[] = {
    {"digit_accuracy", &EvalMetrics::digit_accuracy},
    {"puzzle_accuracy", &EvalMetrics::puzzle_accuracy},
    {"mean_thinking_steps", &EvalMetrics::mean_thinking_steps},
    {"mean_discard_events", &EvalMetrics::mean_discard_events},
    {"mean_discarded_tokens", &EvalMetrics::mean_discarded_tokens},
    {"mean_stop_gate_loss", &EvalMetrics::mean_stop_gate_loss},
    {"mean_answer_gate_penalty", &EvalMetrics::mean_answer_gate_penalty},
    {"validation_loss", &EvalMetrics::validation_loss},
    {"mean_thinking_epochs", &EvalMetrics::mean_thinking_epochs},
    {"mean_steps_per_thinking_epoch", &EvalMetrics::mean_steps_per_thinking_epoch},
    {"train_infer_disagreement", &EvalMetrics::train_infer_disagreement},
};

} // namespace

void write_metrics(std::ostream &out, const EvalMetrics &m) {
  out << "puzzles = " << m.puzzles << '\n';
  for (const auto &f : kMetricFields)
    out << f.key << " = " << format_double(m.*(f.field)) << '\n';
}

EvalMetrics parse_metrics(std::istream &in) {
  std::map<std::string, std::size_t> lines;
  const auto kv = read_key_values(in, &lines);
  EvalMetrics m;
  std::set<std::string> seen;
  for (const auto &[key, value] : kv) {
    try {
      if (key == "puzzles") {
        m.puzzles = parse_int<std::size_t>(value);
        continue;
      }
      bool known = false;
      for (const auto &f : kMetricFields) {
        if (key == f.key) {
          m.*(f.field) = parse_double(value);
          known = true;
        }
      }
      if (!known)
        throw std::invalid_argument("unknown metric '" + key + "'");
    } catch (const std::invalid_argument &e) {
      throw ParseError(lines.at(key), e.what());
    }
  }
  return m;
}

void write_trace_header(std::ostream &out) {
  out << kTraceMagic << '\n' << kTraceColumns << '\n';
}

void write_trace_record(std::ostream &out, std::size_t index, const PuzzleRecord &rec) {
  out << "puzzle\t" << index << '\t' << rec.puzzle.to_string() << '\t'
      << rec.solution.to_string() << '\t' << rec.prediction.to_string() << '\t'
      << rec.soft_prediction.to_string() << '\t' << rec.steps.size() << '\t'
      << format_double(rec.task_loss) << '\t' << format_double(rec.answer_gate) << '\n';
  for (const auto &s : rec.steps)
    out << s.t << '\t' << format_double(s.d_gate) << '\t' << (s.accepted ? 1 : 0) << '\t'
        << format_double(s.s_gate) << '\t' << format_double(s.c_score) << '\t'
        << (s.halted ? 1 : 0) << '\t' << (s.solved ? 1 : 0) << '\n';
}

std::vector<PuzzleRecord> read_trace_records(std::istream &in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() {
    ++line_no;
    return static_cast<bool>(std::getline(in, line));
  };
  if (!next() || line != kTraceMagic)
    throw ParseError(1, "missing trace header");
  if (!next() || line != kTraceColumns)
    throw ParseError(2, "unexpected trace column header");

  std::vector<PuzzleRecord> records;
  while (next()) {
    if (line.empty())
      continue;
    try {
      const auto f = split_tabs(line);
      if (f.size() != 9 || f[0] != "puzzle")
        throw std::invalid_argument("expected a puzzle record line");
      const int box = f[2].size() == 16 ? 2 : 3;
      PuzzleRecord rec;
      rec.puzzle = Grid::from_string(box, f[2]);
      rec.solution = Grid::from_string(box, f[3]);
      rec.prediction = Grid::from_string(box, f[4]);
      rec.soft_prediction = Grid::from_string(box, f[5]);
      const auto n_steps = parse_int<std::size_t>(f[6]);
      rec.task_loss = parse_double(f[7]);
      rec.answer_gate = parse_double(f[8]);
      for (std::size_t i = 0; i < n_steps; ++i) {
        if (!next())
          throw std::invalid_argument("trace ends inside a record");
        const auto s = split_tabs(line);
        if (s.size() != 7)
          throw std::invalid_argument("step line needs 7 columns");
        rec.steps.push_back({parse_int<int>(s[0]), parse_double(s[1]), parse_bool(s[2]),
                             parse_double(s[3]), parse_double(s[4]), parse_bool(s[5]),
                             parse_bool(s[6])});
      }
      records.push_back(std::move(rec));
    } catch (const std::invalid_argument &e) {
      throw ParseError(line_no, e.what());
    }
  }
  return records;
}

} // namespace lrt

// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   io.hpp
 * @brief  Text formats: training config, metrics files and trace export.
 */

#ifndef LRT_IO_HPP_
#define LRT_IO_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lrt/training.hpp"

namespace lrt {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string &text);

// Config file: one `key = value` per line, `#` starts a comment. Unknown or
// repeated keys are errors. `box_size` selects the model defaults that the
// other keys then override.
TrainConfig parse_train_config(std::istream &in);
TrainConfig read_train_config(const std::filesystem::path &path);
std::string format_train_config(const TrainConfig &cfg);

/// `key = value` lines, one per EvalMetrics field.
void write_metrics(std::ostream &out, const EvalMetrics &m);
EvalMetrics parse_metrics(std::istream &in);

// Trace export. After the two header lines, each puzzle is a record line
//
//   puzzle <index> <puzzle> <solution> <prediction> <soft_prediction>
//          <steps> <task_loss> <answer_gate>
//
// followed by one line per reasoning step with the columns named in the
// second header line. Fields are tab-separated; reals round-trip exactly.
inline constexpr const char *kTraceMagic = "# lrt-trace-v1";
inline constexpr const char *kTraceColumns = "t\td_gate\taccepted\ts_gate\tc_score\thalted\tsolved";

void write_trace_header(std::ostream &out);
void write_trace_record(std::ostream &out, std::size_t index, const PuzzleRecord &rec);
std::vector<PuzzleRecord> read_trace_records(std::istream &in);

} // namespace lrt

#endif // LRT_IO_HPP_

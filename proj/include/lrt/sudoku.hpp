// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   sudoku.hpp
 * @brief  Sudoku grids parameterized by box size: encoding, validation,
 *         brute-force solving, puzzle generation and dataset files.
 */

#ifndef LRT_SUDOKU_HPP_
#define LRT_SUDOKU_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace lrt {

/// Thrown for malformed text input. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t line, const std::string &what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what
                                : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// An n^2 x n^2 grid stored row-major; 0 marks an empty cell.
class Grid {
public:
  Grid() = default;
  explicit Grid(int box_size);
  Grid(int box_size, std::vector<std::uint8_t> cells);

  /// Parses n^4 digit characters ('0' = empty).
  static Grid from_string(int box_size, std::string_view digits);

  int box_size() const noexcept { return box_size_; }
  int side() const noexcept { return box_size_ * box_size_; }
  int size() const noexcept { return side() * side(); }

  std::uint8_t operator[](int i) const { return cells_[static_cast<std::size_t>(i)]; }
  std::uint8_t at(int row, int col) const { return (*this)[row * side() + col]; }
  void set(int i, std::uint8_t digit);

  const std::vector<std::uint8_t> &cells() const noexcept { return cells_; }
  int clue_count() const;
  bool complete() const { return clue_count() == size(); }
  std::string to_string() const;

  friend bool operator==(const Grid &, const Grid &) = default;

private:
  int box_size_ = 0;
  std::vector<std::uint8_t> cells_;
};

struct PuzzlePair {
  Grid puzzle;
  Grid solution;
  friend bool operator==(const PuzzlePair &, const PuzzlePair &) = default;
};

/// Rows are cells, columns are digits 0..n^2; every row holds a single 1.
using OneHotMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct OneHotGrid {
  int box_size = 0;
  OneHotMatrix rows;
};

/// Box sizes accepted by the generator, dataset files and the CLI.
bool supported_box_size(int box_size) noexcept;

/// Cell indices of every row, column and box, in that order.
const std::vector<std::vector<int>> &sudoku_units(int box_size);

OneHotGrid encode_grid(const Grid &g);
/// Throws std::invalid_argument when a row is not exactly one-hot.
Grid decode_grid(const OneHotGrid &o);

/// Sum over (unit, digit) of max(0, occurrences - 1). Empties never conflict.
int violation_count(const Grid &g);

/// Exhaustive backtracking: first empty cell, digits ascending. Returns at
/// most `limit` completions in discovery order.
std::vector<Grid> solve_brute_force(const Grid &g, std::size_t limit);

/// Smallest clue count for which unique puzzles exist (4 for 4x4, 17 for 9x9).
int minimal_clue_bound(int box_size);

/// Random solved grid, then clues dug in random order while the puzzle keeps
/// a unique completion. Stops at `target_clues` or when no clue can go.
PuzzlePair generate_puzzle(std::uint64_t seed, int box_size, int target_clues);

/// A validity-preserving relabeling of the grid: digits permuted, rows
/// shuffled within bands and bands among themselves, likewise columns and
/// stacks, optionally transposed. Unique puzzles stay unique.
struct GridSymmetry {
  std::vector<int> source;           ///< output cell i takes input cell source[i]
  std::vector<std::uint8_t> digits;  ///< digits[d] replaces d; digits[0] == 0

  static GridSymmetry identity(int box_size);
  static GridSymmetry random(int box_size, std::mt19937_64 &rng);
  Grid apply(const Grid &g) const;
  PuzzlePair apply(const PuzzlePair &p) const { return {apply(p.puzzle), apply(p.solution)}; }
};

struct Dataset {
  int box_size = 0;
  std::vector<PuzzlePair> pairs;
  friend bool operator==(const Dataset &, const Dataset &) = default;
};

/// Structural check of a pair: shapes, solved and valid solution, and the
/// puzzle's clues agree with it. Uniqueness is not checked here.
void validate_pair(const PuzzlePair &p);

std::string dataset_header(int box_size);
void write_dataset(int box_size, std::span<const PuzzlePair> pairs,
                   const std::filesystem::path &path);
Dataset read_dataset(const std::filesystem::path &path);

} // namespace lrt

#endif // LRT_SUDOKU_HPP_

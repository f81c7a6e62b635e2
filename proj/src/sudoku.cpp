// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   sudoku.cpp
 * @brief  Sudoku grid utilities and the brute-force oracle.
 */

#include "lrt/sudoku.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>

namespace lrt {

namespace {

void check_box_size(int box_size) {
  if (box_size < 2)
    throw std::invalid_argument("box size must be >= 2, got " +
                                std::to_string(box_size));
}

// Row/col/box occupancy as digit bitmasks, used by the solver and generator.
class Occupancy {
public:
  explicit Occupancy(int box_size)
      : n_(box_size), side_(box_size * box_size),
        row_(static_cast<std::size_t>(side_), 0),
        col_(static_cast<std::size_t>(side_), 0),
        box_(static_cast<std::size_t>(side_), 0) {}

  int box_of(int r, int c) const { return (r / n_) * n_ + c / n_; }

  std::uint32_t used(int cell) const {
    const int r = cell / side_, c = cell % side_;
    return row_[r] | col_[c] | box_[box_of(r, c)];
  }

  // Returns false when the digit is already present in one of the units.
  bool place(int cell, int digit) {
    const std::uint32_t bit = 1u << digit;
    if (used(cell) & bit)
      return false;
    toggle(cell, bit);
    return true;
  }

  void remove(int cell, int digit) { toggle(cell, 1u << digit); }

private:
  void toggle(int cell, std::uint32_t bit) {
    const int r = cell / side_, c = cell % side_;
    row_[r] ^= bit;
    col_[c] ^= bit;
    box_[box_of(r, c)] ^= bit;
  }

  int n_, side_;
  std::vector<std::uint32_t> row_, col_, box_;
};

class Backtracker {
public:
  Backtracker(const Grid &g, std::size_t limit)
      : grid_(g), occ_(g.box_size()), limit_(limit) {}

  std::vector<Grid> run() {
    if (limit_ == 0)
      return {};
    for (int i = 0; i < grid_.size(); ++i) {
      if (grid_[i] && !occ_.place(i, grid_[i]))
        return {}; // clues already conflict
    }
    search(0);
    return std::move(found_);
  }

private:
  void search(int from) {
    int cell = from;
    while (cell < grid_.size() && grid_[cell] != 0)
      ++cell;
    if (cell == grid_.size()) {
      found_.push_back(grid_);
      return;
    }
    const std::uint32_t used = occ_.used(cell);
    for (int digit = 1; digit <= grid_.side(); ++digit) {
      if (used & (1u << digit))
        continue;
      occ_.place(cell, digit);
      grid_.set(cell, static_cast<std::uint8_t>(digit));
      search(cell + 1);
      grid_.set(cell, 0);
      occ_.remove(cell, digit);
      if (found_.size() >= limit_)
        return;
    }
  }

  Grid grid_;
  Occupancy occ_;
  std::size_t limit_;
  std::vector<Grid> found_;
};

bool fill_random(Grid &g, Occupancy &occ, int cell, std::mt19937_64 &rng) {
  if (cell == g.size())
    return true;
  std::vector<int> digits(static_cast<std::size_t>(g.side()));
  std::iota(digits.begin(), digits.end(), 1);
  std::shuffle(digits.begin(), digits.end(), rng);
  for (int digit : digits) {
    if (!occ.place(cell, digit))
      continue;
    g.set(cell, static_cast<std::uint8_t>(digit));
    if (fill_random(g, occ, cell + 1, rng))
      return true;
    g.set(cell, 0);
    occ.remove(cell, digit);
  }
  return false;
}

std::vector<std::vector<int>> build_units(int n) {
  const int side = n * n;
  std::vector<std::vector<int>> units;
  for (int r = 0; r < side; ++r) {
    std::vector<int> u;
    for (int c = 0; c < side; ++c)
      u.push_back(r * side + c);
    units.push_back(std::move(u));
  }
  for (int c = 0; c < side; ++c) {
    std::vector<int> u;
    for (int r = 0; r < side; ++r)
      u.push_back(r * side + c);
    units.push_back(std::move(u));
  }
  for (int br = 0; br < n; ++br) {
    for (int bc = 0; bc < n; ++bc) {
      std::vector<int> u;
      for (int r = br * n; r < (br + 1) * n; ++r)
        for (int c = bc * n; c < (bc + 1) * n; ++c)
          u.push_back(r * side + c);
      units.push_back(std::move(u));
    }
  }
  return units;
}

} // namespace

Grid::Grid(int box_size) : box_size_(box_size) {
  check_box_size(box_size);
  cells_.assign(static_cast<std::size_t>(size()), 0);
}

Grid::Grid(int box_size, std::vector<std::uint8_t> cells)
    : box_size_(box_size), cells_(std::move(cells)) {
  check_box_size(box_size);
  if (static_cast<int>(cells_.size()) != size())
    throw std::invalid_argument("grid needs " + std::to_string(size()) +
                                " cells, got " + std::to_string(cells_.size()));
  for (auto v : cells_)
    if (v > side())
      throw std::invalid_argument("cell value " + std::to_string(v) +
                                  " out of range 0.." + std::to_string(side()));
}

Grid Grid::from_string(int box_size, std::string_view digits) {
  if (!supported_box_size(box_size))
    throw std::invalid_argument("digit strings need box size 2 or 3");
  const auto expected = static_cast<std::size_t>(box_size) * box_size *
                        box_size * box_size;
  if (digits.size() != expected)
    throw std::invalid_argument("expected " + std::to_string(expected) +
                                " digit characters, got " +
                                std::to_string(digits.size()));
  std::vector<std::uint8_t> cells;
  cells.reserve(expected);
  for (char ch : digits) {
    if (ch < '0' || ch > '0' + box_size * box_size)
      throw std::invalid_argument(std::string("invalid digit character '") +
                                  ch + "'");
    cells.push_back(static_cast<std::uint8_t>(ch - '0'));
  }
  return Grid(box_size, std::move(cells));
}

void Grid::set(int i, std::uint8_t digit) {
  if (digit > side())
    throw std::invalid_argument("digit out of range");
  cells_.at(static_cast<std::size_t>(i)) = digit;
}

int Grid::clue_count() const {
  return static_cast<int>(
      std::count_if(cells_.begin(), cells_.end(), [](auto v) { return v != 0; }));
}

std::string Grid::to_string() const {
  std::string s;
  s.reserve(cells_.size());
  for (auto v : cells_)
    s.push_back(static_cast<char>('0' + v));
  return s;
}

bool supported_box_size(int box_size) noexcept {
  return box_size == 2 || box_size == 3;
}

const std::vector<std::vector<int>> &sudoku_units(int box_size) {
  check_box_size(box_size);
  static std::mutex mu;
  static std::map<int, std::unique_ptr<std::vector<std::vector<int>>>> cache;
  std::lock_guard lock(mu);
  auto &slot = cache[box_size];
  if (!slot)
    slot = std::make_unique<std::vector<std::vector<int>>>(build_units(box_size));
  return *slot;
}

OneHotGrid encode_grid(const Grid &g) {
  OneHotGrid o{g.box_size(), OneHotMatrix::Zero(g.size(), g.side() + 1)};
  for (int i = 0; i < g.size(); ++i)
    o.rows(i, g[i]) = 1.0;
  return o;
}

Grid decode_grid(const OneHotGrid &o) {
  check_box_size(o.box_size);
  const int side = o.box_size * o.box_size;
  if (o.rows.rows() != side * side || o.rows.cols() != side + 1)
    throw std::invalid_argument("one-hot grid has wrong shape");
  std::vector<std::uint8_t> cells(static_cast<std::size_t>(side * side));
  for (int i = 0; i < side * side; ++i) {
    int hot = -1;
    for (int k = 0; k <= side; ++k) {
      const double v = o.rows(i, k);
      if (v == 1.0 && hot < 0) {
        hot = k;
      } else if (v != 0.0) {
        hot = -2;
        break;
      }
    }
    if (hot < 0)
      throw std::invalid_argument("row " + std::to_string(i) +
                                  " is not one-hot");
    cells[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(hot);
  }
  return Grid(o.box_size, std::move(cells));
}

int violation_count(const Grid &g) {
  int excess = 0;
  std::vector<int> counts(static_cast<std::size_t>(g.side() + 1));
  for (const auto &unit : sudoku_units(g.box_size())) {
    std::fill(counts.begin(), counts.end(), 0);
    for (int cell : unit)
      ++counts[g[cell]];
    for (int digit = 1; digit <= g.side(); ++digit)
      excess += std::max(0, counts[static_cast<std::size_t>(digit)] - 1);
  }
  return excess;
}

std::vector<Grid> solve_brute_force(const Grid &g, std::size_t limit) {
  if (g.side() > 31)
    throw std::invalid_argument("box size too large for the solver");
  return Backtracker(g, limit).run();
}

int minimal_clue_bound(int box_size) {
  switch (box_size) {
  case 2:
    return 4;
  case 3:
    return 17;
  default:
    throw std::invalid_argument("no clue bound known for box size " +
                                std::to_string(box_size));
  }
}

PuzzlePair generate_puzzle(std::uint64_t seed, int box_size, int target_clues) {
  if (!supported_box_size(box_size))
    throw std::invalid_argument("generator supports box size 2 or 3");
  const int cells = box_size * box_size * box_size * box_size;
  if (target_clues < minimal_clue_bound(box_size) || target_clues > cells)
    throw std::invalid_argument(
        "target clues " + std::to_string(target_clues) + " outside [" +
        std::to_string(minimal_clue_bound(box_size)) + ", " +
        std::to_string(cells) + "]");

  std::mt19937_64 rng(seed);
  Grid solution(box_size);
  Occupancy occ(box_size);
  fill_random(solution, occ, 0, rng);

  Grid puzzle = solution;
  std::vector<int> order(static_cast<std::size_t>(cells));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  int clues = cells;
  for (int cell : order) {
    if (clues <= target_clues)
      break;
    const auto digit = puzzle[cell];
    puzzle.set(cell, 0);
    if (solve_brute_force(puzzle, 2).size() == 1)
      --clues;
    else
      puzzle.set(cell, digit);
  }
  return {std::move(puzzle), std::move(solution)};
}

GridSymmetry GridSymmetry::identity(int box_size) {
  const int side = box_size * box_size;
  GridSymmetry s;
  s.source.resize(static_cast<std::size_t>(side * side));
  std::iota(s.source.begin(), s.source.end(), 0);
  s.digits.resize(static_cast<std::size_t>(side + 1));
  std::iota(s.digits.begin(), s.digits.end(), std::uint8_t{0});
  return s;
}

GridSymmetry GridSymmetry::random(int box_size, std::mt19937_64 &rng) {
  if (!supported_box_size(box_size))
    throw std::invalid_argument("unsupported box size " + std::to_string(box_size));
  const int n = box_size, side = n * n;
  auto line_order = [&] {
    std::vector<int> bands(static_cast<std::size_t>(n));
    std::iota(bands.begin(), bands.end(), 0);
    std::shuffle(bands.begin(), bands.end(), rng);
    std::vector<int> out;
    for (int b : bands) {
      std::vector<int> within(static_cast<std::size_t>(n));
      std::iota(within.begin(), within.end(), 0);
      std::shuffle(within.begin(), within.end(), rng);
      for (int w : within)
        out.push_back(b * n + w);
    }
    return out;
  };
  const auto rows = line_order();
  const auto cols = line_order();
  const bool transpose = (rng() & 1u) != 0;

  GridSymmetry s = identity(box_size);
  std::shuffle(s.digits.begin() + 1, s.digits.end(), rng);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      const int sr = rows[static_cast<std::size_t>(transpose ? c : r)];
      const int sc = cols[static_cast<std::size_t>(transpose ? r : c)];
      s.source[static_cast<std::size_t>(r * side + c)] = sr * side + sc;
    }
  return s;
}

Grid GridSymmetry::apply(const Grid &g) const {
  if (static_cast<std::size_t>(g.size()) != source.size())
    throw std::invalid_argument("symmetry does not match the grid size");
  Grid out(g.box_size());
  for (int i = 0; i < g.size(); ++i)
    out.set(i, digits[g[source[static_cast<std::size_t>(i)]]]);
  return out;
}

void validate_pair(const PuzzlePair &p) {
  if (p.puzzle.box_size() != p.solution.box_size() || p.puzzle.box_size() == 0)
    throw std::invalid_argument("puzzle and solution box sizes differ");
  if (!p.solution.complete())
    throw std::invalid_argument("solution has empty cells");
  if (violation_count(p.solution) != 0)
    throw std::invalid_argument("solution violates sudoku constraints");
  for (int i = 0; i < p.puzzle.size(); ++i)
    if (p.puzzle[i] && p.puzzle[i] != p.solution[i])
      throw std::invalid_argument("clue at cell " + std::to_string(i) +
                                  " disagrees with solution");
}

std::string dataset_header(int box_size) {
  return "sudoku-v1 n=" + std::to_string(box_size);
}

void write_dataset(int box_size, std::span<const PuzzlePair> pairs,
                   const std::filesystem::path &path) {
  if (!supported_box_size(box_size))
    throw std::invalid_argument("dataset files support box size 2 or 3");
  for (const auto &p : pairs) {
    if (p.puzzle.box_size() != box_size)
      throw std::invalid_argument("pair box size does not match dataset");
    validate_pair(p);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << dataset_header(box_size) << '\n';
  for (const auto &p : pairs)
    out << p.puzzle.to_string() << ',' << p.solution.to_string() << '\n';
  if (!out.flush())
    throw std::runtime_error("write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw ParseError(1, "missing header");
  constexpr std::string_view prefix = "sudoku-v1 n=";
  if (line.rfind(prefix, 0) != 0)
    throw ParseError(1, "bad header '" + line + "'");
  Dataset ds;
  const auto n_text = line.substr(prefix.size());
  if (n_text == "2")
    ds.box_size = 2;
  else if (n_text == "3")
    ds.box_size = 3;
  else
    throw ParseError(1, "unsupported box size '" + n_text + "'");

  const std::size_t cells = static_cast<std::size_t>(
      ds.box_size * ds.box_size * ds.box_size * ds.box_size);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.size() != 2 * cells + 1 || line[cells] != ',')
      throw ParseError(line_no, "expected " + std::to_string(cells) +
                                    " digits, a comma, and " +
                                    std::to_string(cells) + " digits");
    try {
      PuzzlePair p{Grid::from_string(ds.box_size, std::string_view(line).substr(0, cells)),
                   Grid::from_string(ds.box_size, std::string_view(line).substr(cells + 1))};
      validate_pair(p);
      ds.pairs.push_back(std::move(p));
    } catch (const std::invalid_argument &e) {
      throw ParseError(line_no, e.what());
    }
  }
  return ds;
}

} // namespace lrt

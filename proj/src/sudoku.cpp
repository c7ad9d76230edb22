#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "dlab/error.hpp"
#include "dlab/puzzles.hpp"
#include "dlab/rng.hpp"

namespace dlab::puzzles {
namespace {

constexpr const char* kModule = "puzzles";

std::array<int, 3> units_of(int cell) {
  const int r = cell / 9;
  const int c = cell % 9;
  return {r, 9 + c, 18 + (r / 3) * 3 + c / 3};
}

}  // namespace

SudokuGrid::SudokuGrid() = default;

SudokuGrid::SudokuGrid(const std::array<std::uint8_t, kCells>& cells, GridRole role) {
  for (int cell = 0; cell < kCells; ++cell) {
    const int d = cells[static_cast<std::size_t>(cell)];
    if (d > 9) {
      throw ValidationError(kModule, "sudoku", "cells", fmt::format("cell {} holds {}, expected 0-9", cell, d));
    }
    if (d == 0 && role == GridRole::solution) {
      throw ValidationError(kModule, "sudoku", "cells", fmt::format("solution grid has a blank at cell {}", cell));
    }
    if (d != 0) assign(cell, d);
  }
  if (!consistent()) throw ValidationError(kModule, "sudoku", "cells", "duplicate digit in a row, column or box");
}

void SudokuGrid::bump(int cell, int digit, int delta) {
  for (int u : units_of(cell)) {
    auto& n = unit_counts_[static_cast<std::size_t>(u)][static_cast<std::size_t>(digit)];
    if (delta > 0) {
      if (n >= 1) ++conflicts_;
      ++n;
    } else {
      --n;
      if (n >= 1) --conflicts_;
    }
  }
}

void SudokuGrid::assign(int cell, int value) {
  clear(cell);
  cells_[static_cast<std::size_t>(cell)] = static_cast<std::uint8_t>(value);
  bump(cell, value, +1);
}

void SudokuGrid::clear(int cell) {
  const int old = cells_[static_cast<std::size_t>(cell)];
  if (old == 0) return;
  bump(cell, old, -1);
  cells_[static_cast<std::size_t>(cell)] = 0;
}

int SudokuGrid::givens() const {
  return static_cast<int>(std::count_if(cells_.begin(), cells_.end(), [](auto d) { return d != 0; }));
}

bool SudokuGrid::complete() const { return givens() == kCells; }

std::vector<int> SudokuGrid::blank_cells() const {
  std::vector<int> out;
  for (int cell = 0; cell < kCells; ++cell) {
    if (cells_[static_cast<std::size_t>(cell)] == 0) out.push_back(cell);
  }
  return out;
}

std::vector<int> SudokuGrid::candidates(int cell) const {
  std::vector<int> out;
  const auto units = units_of(cell);
  for (int d = 1; d <= 9; ++d) {
    bool free = true;
    for (int u : units) free = free && unit_counts_[static_cast<std::size_t>(u)][static_cast<std::size_t>(d)] == 0;
    if (free) out.push_back(d);
  }
  return out;
}

std::size_t count_solutions(const SudokuGrid& grid, std::size_t cutoff) {
  return count_completions(grid, cutoff);
}

namespace {

bool fill_random(SudokuGrid& g, int cell, Rng& rng) {
  if (cell == SudokuGrid::kCells) return true;
  if (g.at(cell) != 0) return fill_random(g, cell + 1, rng);
  auto cands = g.candidates(cell);
  std::shuffle(cands.begin(), cands.end(), rng);
  for (int d : cands) {
    g.assign(cell, d);
    if (fill_random(g, cell + 1, rng)) return true;
    g.clear(cell);
  }
  return false;
}

}  // namespace

SudokuPuzzle generate_sudoku(std::uint64_t seed, int givens_target) {
  if (givens_target < 17 || givens_target > 80) {
    throw DomainError(kModule, fmt::format("givens_target {} outside [17, 80]", givens_target));
  }
  Rng rng(seed);
  SudokuGrid full;
  fill_random(full, 0, rng);

  SudokuGrid puzzle = full;
  std::array<int, SudokuGrid::kCells> order{};
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (int cell : order) {
    if (puzzle.givens() <= givens_target) break;
    const int d = puzzle.at(cell);
    puzzle.clear(cell);
    if (count_solutions(puzzle, 2) != 1) puzzle.assign(cell, d);
  }
  return {puzzle, SudokuGrid(full.cells(), GridRole::solution), givens_target, puzzle.givens() > givens_target};
}

bool verify_solution(const SudokuGrid& puzzle, const SudokuGrid& solution) {
  if (!solution.complete() || !solution.consistent()) return false;
  for (int cell = 0; cell < SudokuGrid::kCells; ++cell) {
    if (puzzle.at(cell) != 0 && puzzle.at(cell) != solution.at(cell)) return false;
  }
  return true;
}

std::optional<SudokuGrid> read_sudoku(std::istream& in) {
  std::array<std::uint8_t, SudokuGrid::kCells> cells{};
  int row = 0;
  std::string line;
  std::size_t lineno = 0;
  while (row < 9 && std::getline(in, line)) {
    ++lineno;
    std::string digits;
    for (char ch : line) {
      if (ch == ' ' || ch == '\t' || ch == '\r') continue;
      digits.push_back(ch);
    }
    if (digits.empty() || (row == 0 && digits[0] == '#')) continue;
    if (digits.size() != 9) {
      throw ParseError(kModule, lineno, fmt::format("sudoku row {} has {} cells, expected 9", row + 1, digits.size()));
    }
    for (int c = 0; c < 9; ++c) {
      const char ch = digits[static_cast<std::size_t>(c)];
      if (ch < '0' || ch > '9') throw ParseError(kModule, lineno, fmt::format("sudoku row {} has non-digit '{}'", row + 1, ch));
      cells[static_cast<std::size_t>(row * 9 + c)] = static_cast<std::uint8_t>(ch - '0');
    }
    ++row;
  }
  if (row == 0) return std::nullopt;
  if (row != 9) throw ParseError(kModule, lineno, fmt::format("sudoku grid truncated after {} rows", row));
  return SudokuGrid(cells);
}

void write_sudoku(std::ostream& out, const SudokuGrid& grid) {
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 9; ++c) out << static_cast<char>('0' + grid.at(r, c));
    out << '\n';
  }
}

trace::DecodingTrace to_decoding_trace(const SolveTrace& solve, std::string sample_id) {
  trace::DecodingTrace t;
  t.sample_id = std::move(sample_id);
  t.step_scope = trace::StepScope::global;
  t.metadata["strategy"] = solve.strategy;
  for (const auto& e : solve.entries) {
    trace::TraceToken tok;
    tok.position = e.blank_index;
    tok.finalize_step = e.step;
    tok.block_index = 0;
    t.tokens.push_back(tok);
  }
  trace::validate(t);
  return t;
}

}  // namespace dlab::puzzles

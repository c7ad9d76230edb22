#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "dlab/solver.hpp"

namespace dlab::puzzles {

enum class GridRole { puzzle, solution };

/// 9x9 Sudoku; 0 marks a blank. Per-unit digit counts make candidate
/// queries O(1) per digit and let transiently conflicting assignments be
/// detected by consistent().
class SudokuGrid {
 public:
  static constexpr int kCells = 81;

  SudokuGrid();
  /// Throws ValidationError on digits outside 0-9, duplicate digits in a
  /// unit, or a zero in a solution-role grid.
  explicit SudokuGrid(const std::array<std::uint8_t, kCells>& cells, GridRole role = GridRole::puzzle);

  int at(int cell) const { return cells_[static_cast<std::size_t>(cell)]; }
  int at(int row, int col) const { return at(row * 9 + col); }
  const std::array<std::uint8_t, kCells>& cells() const { return cells_; }
  int givens() const;
  bool complete() const;

  std::vector<int> blank_cells() const;
  std::vector<int> candidates(int cell) const;
  bool consistent() const { return conflicts_ == 0; }
  void assign(int cell, int value);
  void clear(int cell);

  bool operator==(const SudokuGrid& o) const { return cells_ == o.cells_; }

 private:
  void bump(int cell, int digit, int delta);

  std::array<std::uint8_t, kCells> cells_{};
  std::array<std::array<std::uint8_t, 10>, 27> unit_counts_{};  // rows 0-8, cols 9-17, boxes 18-26
  int conflicts_ = 0;
};

struct SudokuPuzzle {
  SudokuGrid puzzle;
  SudokuGrid solution;
  int givens_target = 0;
  bool target_overshot = false;  // digging stopped above the target to keep uniqueness
};

std::size_t count_solutions(const SudokuGrid& grid, std::size_t cutoff);

/// Random full grid, then cells are removed in random order while the
/// solution stays unique and givens exceed the target. Deterministic per seed.
SudokuPuzzle generate_sudoku(std::uint64_t seed, int givens_target);

/// Rows, columns and boxes of `solution` are permutations of 1-9 and every given of `puzzle` is kept.
bool verify_solution(const SudokuGrid& puzzle, const SudokuGrid& solution);

/// 9 lines of 9 digits, 0 = blank; blank lines between grids are skipped.
std::optional<SudokuGrid> read_sudoku(std::istream& in);
void write_sudoku(std::ostream& out, const SudokuGrid& grid);

enum class Op : char { add = '+', sub = '-', mul = '*' };

/// 5x5 cross-math grid. The nine number slots form a 3x3 matrix n[r][c]
/// (grid cell (2r, 2c)); rows read n[r][0] op n[r][1] = n[r][2] and
/// columns read n[0][c] op n[1][c] = n[2][c]. All numbers lie in
/// [1, max_value]; operators are always given. Board cells are the number
/// slots 0..8 in row-major order.
class CrossMathGrid {
 public:
  using Numbers = std::array<std::optional<int>, 9>;

  CrossMathGrid(Numbers numbers, std::array<Op, 3> row_ops, std::array<Op, 3> col_ops, int max_value,
                GridRole role = GridRole::puzzle);

  const Numbers& numbers() const { return numbers_; }
  const std::array<Op, 3>& row_ops() const { return row_ops_; }
  const std::array<Op, 3>& col_ops() const { return col_ops_; }
  int max_value() const { return max_value_; }
  bool complete() const;
  /// All six equations hold (requires a complete grid).
  bool satisfied() const;

  std::vector<int> blank_cells() const;
  std::vector<int> candidates(int cell) const;
  bool consistent() const;
  void assign(int cell, int value) { numbers_[static_cast<std::size_t>(cell)] = value; }
  void clear(int cell) { numbers_[static_cast<std::size_t>(cell)].reset(); }

  bool operator==(const CrossMathGrid&) const = default;

 private:
  struct Equation {
    std::array<int, 3> cells;  // a, b, result
    Op op;
  };
  std::array<Equation, 6> equations() const;
  bool feasible(const Equation& eq) const;

  Numbers numbers_;
  std::array<Op, 3> row_ops_;
  std::array<Op, 3> col_ops_;
  int max_value_;
};

struct CrossMathPuzzle {
  CrossMathGrid puzzle;
  CrossMathGrid solution;
  std::size_t attempts = 0;
};

std::size_t count_solutions(const CrossMathGrid& grid, std::size_t cutoff);

/// Samples operands and operators until all nine numbers lie in [1, max_value]
/// and the corner agrees, then blanks number slots while the solution stays
/// unique. Throws GenerationError after `max_attempts` rejected samples.
CrossMathPuzzle generate_crossmath(std::uint64_t seed, int max_value, std::size_t max_attempts = 200000);

bool verify_solution(const CrossMathGrid& puzzle, const CrossMathGrid& solution);

/// Five lines of five cells: numbers, "_" blanks, "+ - *" operators, "=" and
/// "." for the unused slots. An optional "# range 1 N" line sets max_value (default 99).
std::optional<CrossMathGrid> read_crossmath(std::istream& in);
void write_crossmath(std::ostream& out, const CrossMathGrid& grid);

}  // namespace dlab::puzzles

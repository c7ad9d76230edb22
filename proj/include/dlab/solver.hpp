#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <string>
#include <vector>

#include "dlab/error.hpp"
#include "dlab/trace.hpp"

namespace dlab::puzzles {

/// Minimal constraint-satisfaction surface shared by Sudoku and cross-math.
/// Cells are identified by their row-major index; candidates must be
/// sorted ascending.
template <class B>
concept PuzzleBoard = requires(B b, const B cb, int cell, int value) {
  { cb.blank_cells() } -> std::same_as<std::vector<int>>;
  { cb.candidates(cell) } -> std::same_as<std::vector<int>>;
  { cb.consistent() } -> std::same_as<bool>;
  b.assign(cell, value);
  b.clear(cell);
};

struct SolveStep {
  int cell = 0;
  std::size_t blank_index = 0;  // rank of the cell among the puzzle's blanks, row-major
  std::int64_t step = 0;
  bool branched = false;        // committed by a guess with > 1 candidate
};

/// Committed finalization order of the blanks (retracted guesses excluded).
struct SolveTrace {
  std::vector<SolveStep> entries;  // ordered by blank_index
  std::string strategy;
};

template <class Board>
struct SolveResult {
  Board solution;
  SolveTrace trace;
};

namespace detail {

template <PuzzleBoard Board>
struct Search {
  Board& board;
  bool parallel_wave;
  std::vector<std::int64_t> step_of;  // indexed by cell
  std::vector<char> branched;

  bool run(std::int64_t step) {
    const auto blanks = board.blank_cells();
    if (blanks.empty()) return board.consistent();
    std::vector<std::vector<int>> cands;
    cands.reserve(blanks.size());
    std::size_t best = 0;
    for (std::size_t k = 0; k < blanks.size(); ++k) {
      cands.push_back(board.candidates(blanks[k]));
      if (cands.back().empty()) return false;
      if (cands[k].size() < cands[best].size()) best = k;
    }
    if (parallel_wave) {
      std::vector<std::size_t> singles;
      for (std::size_t k = 0; k < blanks.size(); ++k) {
        if (cands[k].size() == 1) singles.push_back(k);
      }
      if (!singles.empty()) {
        for (auto k : singles) commit(blanks[k], cands[k][0], step, false);
        if (board.consistent() && run(step + 1)) return true;
        for (auto k : singles) retract(blanks[k]);
        return false;
      }
    }
    const int cell = blanks[best];
    const bool guess = cands[best].size() > 1;
    for (int value : cands[best]) {
      commit(cell, value, step, guess);
      if (board.consistent() && run(step + 1)) return true;
      retract(cell);
    }
    return false;
  }

  void commit(int cell, int value, std::int64_t step, bool guess) {
    board.assign(cell, value);
    step_of[static_cast<std::size_t>(cell)] = step;
    branched[static_cast<std::size_t>(cell)] = guess;
  }

  void retract(int cell) {
    board.clear(cell);
    step_of[static_cast<std::size_t>(cell)] = 0;
    branched[static_cast<std::size_t>(cell)] = 0;
  }
};

template <PuzzleBoard Board>
bool left_to_right(Board& board, const std::vector<int>& blanks, std::size_t k) {
  if (k == blanks.size()) return board.consistent();
  for (int value : board.candidates(blanks[k])) {
    board.assign(blanks[k], value);
    if (board.consistent() && left_to_right(board, blanks, k + 1)) return true;
    board.clear(blanks[k]);
  }
  return false;
}

template <PuzzleBoard Board>
void count(Board& board, std::size_t cutoff, std::size_t& found) {
  const auto blanks = board.blank_cells();
  if (blanks.empty()) {
    if (board.consistent()) ++found;
    return;
  }
  std::vector<int> best;
  int best_cell = -1;
  for (int cell : blanks) {
    auto c = board.candidates(cell);
    if (c.empty()) return;
    if (best_cell < 0 || c.size() < best.size()) {
      best = std::move(c);
      best_cell = cell;
    }
  }
  for (int value : best) {
    board.assign(best_cell, value);
    if (board.consistent()) count(board, cutoff, found);
    board.clear(best_cell);
    if (found >= cutoff) return;
  }
}

template <PuzzleBoard Board>
SolveTrace make_trace(const std::vector<int>& blanks, const std::vector<std::int64_t>& step_of,
                      const std::vector<char>& branched, std::string strategy) {
  SolveTrace t;
  t.strategy = std::move(strategy);
  for (std::size_t k = 0; k < blanks.size(); ++k) {
    const auto cell = static_cast<std::size_t>(blanks[k]);
    t.entries.push_back({blanks[k], k, step_of[cell], branched[cell] != 0});
  }
  return t;
}

}  // namespace detail

/// Number of completions, exhaustively, stopping once `cutoff` is reached.
template <PuzzleBoard Board>
std::size_t count_completions(Board board, std::size_t cutoff) {
  std::size_t found = 0;
  if (cutoff > 0) detail::count(board, cutoff, found);
  return found;
}

/// Easiest-first solving: the blank with the fewest candidates is committed
/// next (lowest index on ties), guessing with backtracking only when no
/// blank is forced. With `parallel_wave`, every naked single of a step is
/// committed together in that step.
template <PuzzleBoard Board>
SolveResult<Board> solve_any_order(Board board, bool parallel_wave) {
  const auto blanks = board.blank_cells();
  const auto cells = blanks.empty() ? std::size_t{0} : static_cast<std::size_t>(*std::max_element(blanks.begin(), blanks.end())) + 1;
  detail::Search<Board> search{board, parallel_wave, std::vector<std::int64_t>(cells, 0), std::vector<char>(cells, 0)};
  if (!board.consistent() || !search.run(1)) throw NoSolutionError("puzzles", "puzzle has no solution");
  auto trace = detail::make_trace<Board>(blanks, search.step_of, search.branched,
                                         parallel_wave ? "parallel_wave" : "easiest_first");
  return {std::move(board), std::move(trace)};
}

/// Baseline: backtracking in strict row-major blank order; blank k is committed at step k + 1.
template <PuzzleBoard Board>
SolveResult<Board> solve_left_to_right(Board board) {
  const auto blanks = board.blank_cells();
  if (!board.consistent() || !detail::left_to_right(board, blanks, 0)) {
    throw NoSolutionError("puzzles", "puzzle has no solution");
  }
  SolveTrace t;
  t.strategy = "left_to_right";
  for (std::size_t k = 0; k < blanks.size(); ++k) {
    t.entries.push_back({blanks[k], k, static_cast<std::int64_t>(k + 1), false});
  }
  return {std::move(board), std::move(t)};
}

/// Blanks become positions 0..n-1 of a single-block global trace.
trace::DecodingTrace to_decoding_trace(const SolveTrace& solve, std::string sample_id);

}  // namespace dlab::puzzles

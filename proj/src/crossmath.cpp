#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "dlab/error.hpp"
#include "dlab/puzzles.hpp"
#include "dlab/rng.hpp"

namespace dlab::puzzles {
namespace {

constexpr const char* kModule = "puzzles";
constexpr std::array<Op, 3> kOps{Op::add, Op::sub, Op::mul};

std::int64_t apply(Op op, std::int64_t a, std::int64_t b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
  }
  return 0;
}

bool in_range(std::int64_t v, int n) { return v >= 1 && v <= n; }

/// Value of the single unknown slot `k` (0 = a, 1 = b, 2 = result) that
/// satisfies a op b = r, if it is an integer in range.
std::optional<std::int64_t> solve_slot(Op op, int k, std::int64_t a, std::int64_t b, std::int64_t r, int n) {
  std::optional<std::int64_t> v;
  if (k == 2) {
    v = apply(op, a, b);
  } else if (op == Op::add) {
    v = r - (k == 0 ? b : a);
  } else if (op == Op::sub) {
    v = k == 0 ? r + b : a - r;
  } else {
    const std::int64_t other = k == 0 ? b : a;
    if (r % other == 0) v = r / other;
  }
  if (v && !in_range(*v, n)) v.reset();
  return v;
}

char op_char(Op op) { return static_cast<char>(op); }

std::optional<Op> parse_op(const std::string& tok) {
  if (tok == "+") return Op::add;
  if (tok == "-" || tok == "−") return Op::sub;
  if (tok == "*" || tok == "x" || tok == "×") return Op::mul;
  return std::nullopt;
}

}  // namespace

CrossMathGrid::CrossMathGrid(Numbers numbers, std::array<Op, 3> row_ops, std::array<Op, 3> col_ops, int max_value,
                             GridRole role)
    : numbers_(numbers), row_ops_(row_ops), col_ops_(col_ops), max_value_(max_value) {
  if (max_value_ < 1) throw ValidationError(kModule, "crossmath", "max_value", "max_value must be >= 1");
  for (std::size_t k = 0; k < numbers_.size(); ++k) {
    if (numbers_[k] && !in_range(*numbers_[k], max_value_)) {
      throw ValidationError(kModule, "crossmath", "numbers",
                            fmt::format("slot {} holds {}, outside [1, {}]", k, *numbers_[k], max_value_));
    }
  }
  if (role == GridRole::solution && !satisfied()) {
    throw ValidationError(kModule, "crossmath", "numbers", "solution grid is incomplete or violates an equation");
  }
}

std::array<CrossMathGrid::Equation, 6> CrossMathGrid::equations() const {
  std::array<Equation, 6> eqs{};
  for (int i = 0; i < 3; ++i) {
    eqs[static_cast<std::size_t>(i)] = {{3 * i, 3 * i + 1, 3 * i + 2}, row_ops_[static_cast<std::size_t>(i)]};
    eqs[static_cast<std::size_t>(3 + i)] = {{i, 3 + i, 6 + i}, col_ops_[static_cast<std::size_t>(i)]};
  }
  return eqs;
}

bool CrossMathGrid::complete() const {
  return std::all_of(numbers_.begin(), numbers_.end(), [](const auto& v) { return v.has_value(); });
}

bool CrossMathGrid::satisfied() const {
  if (!complete()) return false;
  for (const auto& eq : equations()) {
    const auto& n = numbers_;
    if (apply(eq.op, *n[static_cast<std::size_t>(eq.cells[0])], *n[static_cast<std::size_t>(eq.cells[1])]) !=
        *n[static_cast<std::size_t>(eq.cells[2])]) {
      return false;
    }
  }
  return true;
}

bool CrossMathGrid::feasible(const Equation& eq) const {
  std::array<std::optional<std::int64_t>, 3> v;
  std::vector<int> unknown;
  for (int k = 0; k < 3; ++k) {
    const auto& slot = numbers_[static_cast<std::size_t>(eq.cells[static_cast<std::size_t>(k)])];
    if (slot) v[static_cast<std::size_t>(k)] = *slot;
    else unknown.push_back(k);
  }
  if (unknown.empty()) return apply(eq.op, *v[0], *v[1]) == *v[2];
  // Enumerate all unknowns but the last, then solve for it directly.
  const int last = unknown.back();
  unknown.pop_back();
  std::array<std::int64_t, 3> x{v[0].value_or(0), v[1].value_or(0), v[2].value_or(0)};
  const auto solvable = [&] { return solve_slot(eq.op, last, x[0], x[1], x[2], max_value_).has_value(); };
  if (unknown.empty()) return solvable();
  for (std::int64_t p = 1; p <= max_value_; ++p) {
    x[static_cast<std::size_t>(unknown[0])] = p;
    if (unknown.size() == 1) {
      if (solvable()) return true;
      continue;
    }
    for (std::int64_t q = 1; q <= max_value_; ++q) {
      x[static_cast<std::size_t>(unknown[1])] = q;
      if (solvable()) return true;
    }
  }
  return false;
}

std::vector<int> CrossMathGrid::blank_cells() const {
  std::vector<int> out;
  for (int k = 0; k < 9; ++k) {
    if (!numbers_[static_cast<std::size_t>(k)]) out.push_back(k);
  }
  return out;
}

std::vector<int> CrossMathGrid::candidates(int cell) const {
  std::vector<Equation> touching;
  for (const auto& eq : equations()) {
    if (std::find(eq.cells.begin(), eq.cells.end(), cell) != eq.cells.end()) touching.push_back(eq);
  }
  CrossMathGrid probe = *this;
  std::vector<int> out;
  for (int v = 1; v <= max_value_; ++v) {
    probe.assign(cell, v);
    if (std::all_of(touching.begin(), touching.end(), [&](const Equation& eq) { return probe.feasible(eq); })) {
      out.push_back(v);
    }
  }
  return out;
}

bool CrossMathGrid::consistent() const {
  for (const auto& eq : equations()) {
    const auto& n = numbers_;
    const auto& a = n[static_cast<std::size_t>(eq.cells[0])];
    const auto& b = n[static_cast<std::size_t>(eq.cells[1])];
    const auto& r = n[static_cast<std::size_t>(eq.cells[2])];
    if (a && b && r && apply(eq.op, *a, *b) != *r) return false;
  }
  return true;
}

std::size_t count_solutions(const CrossMathGrid& grid, std::size_t cutoff) { return count_completions(grid, cutoff); }

CrossMathPuzzle generate_crossmath(std::uint64_t seed, int max_value, std::size_t max_attempts) {
  if (max_value < 9) throw DomainError(kModule, fmt::format("operand range [1, {}] too small, need N >= 9", max_value));
  Rng rng(seed);
  std::uniform_int_distribution<int> pick_value(1, max_value);
  std::uniform_int_distribution<std::size_t> pick_op(0, kOps.size() - 1);

  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    std::array<Op, 3> row_ops{};
    std::array<Op, 3> col_ops{};
    for (auto& op : row_ops) op = kOps[pick_op(rng)];
    for (auto& op : col_ops) op = kOps[pick_op(rng)];
    std::array<std::int64_t, 9> n{};
    n[0] = pick_value(rng);
    n[1] = pick_value(rng);
    n[3] = pick_value(rng);
    n[4] = pick_value(rng);
    n[2] = apply(row_ops[0], n[0], n[1]);
    n[5] = apply(row_ops[1], n[3], n[4]);
    n[6] = apply(col_ops[0], n[0], n[3]);
    n[7] = apply(col_ops[1], n[1], n[4]);
    n[8] = apply(row_ops[2], n[6], n[7]);
    if (apply(col_ops[2], n[2], n[5]) != n[8]) continue;
    if (!std::all_of(n.begin(), n.end(), [&](auto v) { return in_range(v, max_value); })) continue;

    CrossMathGrid::Numbers full;
    for (std::size_t k = 0; k < 9; ++k) full[k] = static_cast<int>(n[k]);
    CrossMathGrid solution(full, row_ops, col_ops, max_value, GridRole::solution);
    CrossMathGrid puzzle = solution;
    std::array<int, 9> order{};
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int cell : order) {
      const int v = *puzzle.numbers()[static_cast<std::size_t>(cell)];
      puzzle.clear(cell);
      if (count_solutions(puzzle, 2) != 1) puzzle.assign(cell, v);
    }
    return {puzzle, solution, attempt};
  }
  throw GenerationError(kModule, fmt::format("no valid cross-math grid in [1, {}] after {} attempts", max_value, max_attempts),
                        max_attempts);
}

bool verify_solution(const CrossMathGrid& puzzle, const CrossMathGrid& solution) {
  if (puzzle.row_ops() != solution.row_ops() || puzzle.col_ops() != solution.col_ops()) return false;
  if (!solution.satisfied()) return false;
  for (std::size_t k = 0; k < 9; ++k) {
    const auto& v = solution.numbers()[k];
    if (!in_range(*v, puzzle.max_value())) return false;
    if (puzzle.numbers()[k] && puzzle.numbers()[k] != v) return false;
  }
  return true;
}

std::optional<CrossMathGrid> read_crossmath(std::istream& in) {
  int max_value = 99;
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (rows.size() < 5 && std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> cells;
    for (std::string tok; ls >> tok;) cells.push_back(tok);
    if (cells.empty()) continue;
    if (cells[0] == "#") {
      if (cells.size() == 4 && cells[1] == "range") {
        if (cells[2] != "1") throw ParseError(kModule, lineno, "cross-math range must start at 1");
        try {
          max_value = std::stoi(cells[3]);
        } catch (const std::exception&) {
          throw ParseError(kModule, lineno, fmt::format("bad range bound '{}'", cells[3]));
        }
      }
      continue;
    }
    if (cells.size() != 5) throw ParseError(kModule, lineno, fmt::format("expected 5 cells, found {}", cells.size()));
    rows.push_back(cells);
  }
  if (rows.empty()) return std::nullopt;
  if (rows.size() != 5) throw ParseError(kModule, lineno, "cross-math grid truncated");

  const auto expect = [&](const std::string& tok, const char* want, int r, int c) {
    if (tok != want) throw ParseError(kModule, lineno, fmt::format("cell ({}, {}) must be '{}', found '{}'", r, c, want, tok));
  };
  const auto op_at = [&](int r, int c) {
    const auto op = parse_op(rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
    if (!op) throw ParseError(kModule, lineno, fmt::format("cell ({}, {}) must be an operator", r, c));
    return *op;
  };
  CrossMathGrid::Numbers numbers;
  std::array<Op, 3> row_ops{};
  std::array<Op, 3> col_ops{};
  for (int i = 0; i < 3; ++i) {
    const auto& row = rows[static_cast<std::size_t>(2 * i)];
    row_ops[static_cast<std::size_t>(i)] = op_at(2 * i, 1);
    expect(row[3], "=", 2 * i, 3);
    for (int j = 0; j < 3; ++j) {
      const auto& tok = row[static_cast<std::size_t>(2 * j)];
      if (tok == "_") continue;
      try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        numbers[static_cast<std::size_t>(3 * i + j)] = v;
      } catch (const std::exception&) {
        throw ParseError(kModule, lineno, fmt::format("cell ({}, {}) must be a number or '_', found '{}'", 2 * i, 2 * j, tok));
      }
    }
  }
  for (int j = 0; j < 3; ++j) {
    col_ops[static_cast<std::size_t>(j)] = op_at(1, 2 * j);
    expect(rows[3][static_cast<std::size_t>(2 * j)], "=", 3, 2 * j);
  }
  for (int r : {1, 3}) {
    for (int c : {1, 3}) expect(rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)], ".", r, c);
  }
  return CrossMathGrid(numbers, row_ops, col_ops, max_value);
}

void write_crossmath(std::ostream& out, const CrossMathGrid& grid) {
  const auto num = [&](int k) {
    const auto& v = grid.numbers()[static_cast<std::size_t>(k)];
    return v ? std::to_string(*v) : std::string("_");
  };
  out << "# range 1 " << grid.max_value() << '\n';
  for (int i = 0; i < 3; ++i) {
    out << fmt::format("{} {} {} = {}\n", num(3 * i), op_char(grid.row_ops()[static_cast<std::size_t>(i)]), num(3 * i + 1),
                       num(3 * i + 2));
    if (i == 0) {
      out << fmt::format("{} . {} . {}\n", op_char(grid.col_ops()[0]), op_char(grid.col_ops()[1]), op_char(grid.col_ops()[2]));
    } else if (i == 1) {
      out << "= . = . =\n";
    }
  }
}

}  // namespace dlab::puzzles

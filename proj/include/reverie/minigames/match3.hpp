#pragma once

// Chain-drag match-3: the player drags a path through orthogonally adjacent
// tiles of one kind; paths of three or more are cleared, columns fall, and
// the gaps refill from the top with the board's seeded generator.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "reverie/minigames/result.hpp"

namespace reverie {

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

class BadDimensions : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kEmptyTile = -1;
inline constexpr int kMinChain = 3;
inline constexpr int kReshuffleAttempts = 100;

struct Match3Board {
  int width = 0;
  int height = 0;
  int kinds = 0;
  std::vector<int> cells;  // row-major, row 0 at the top
  std::mt19937_64 rng;
  long score = 0;

  bool in_bounds(Cell c) const { return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width; }
  int& at(Cell c) { return cells[static_cast<std::size_t>(c.row * width + c.col)]; }
  int at(Cell c) const { return cells[static_cast<std::size_t>(c.row * width + c.col)]; }

  bool operator==(const Match3Board&) const = default;
};

namespace detail {

// Unbiased draw in [0, bound) built only on the engine's raw output, so
// boards are reproducible across standard library implementations.
inline int draw_below(std::mt19937_64& rng, int bound) {
  const auto b = static_cast<std::uint64_t>(bound);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % b;
  std::uint64_t x = 0;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<int>(x % b);
}

inline void shuffle_cells(std::vector<int>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(draw_below(rng, static_cast<int>(i)));
    std::swap(v[i - 1], v[j]);
  }
}

inline bool adjacent(Cell a, Cell b) {
  return std::abs(a.row - b.row) + std::abs(a.col - b.col) == 1;
}

}  // namespace detail

/// True iff some chain of at least three same-kind tiles exists. Any
/// connected same-kind region of three or more cells contains such a path,
/// so this reduces to a component-size check.
inline bool match3_has_moves(const Match3Board& b) {
  const int n = b.width * b.height;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<Cell> stack;
  for (int start = 0; start < n; ++start) {
    if (seen[start] || b.cells[start] == kEmptyTile) continue;
    const int kind = b.cells[start];
    int size = 0;
    stack.push_back({start / b.width, start % b.width});
    seen[start] = 1;
    while (!stack.empty()) {
      Cell c = stack.back();
      stack.pop_back();
      if (++size >= kMinChain) return true;
      const Cell nbrs[4] = {{c.row - 1, c.col}, {c.row + 1, c.col}, {c.row, c.col - 1}, {c.row, c.col + 1}};
      for (Cell nb : nbrs) {
        if (!b.in_bounds(nb)) continue;
        const int idx = nb.row * b.width + nb.col;
        if (!seen[idx] && b.cells[idx] == kind) {
          seen[idx] = 1;
          stack.push_back(nb);
        }
      }
    }
  }
  return false;
}

namespace detail {

inline void fill_random(Match3Board& b) {
  for (auto& c : b.cells) c = draw_below(b.rng, b.kinds);
}

// Plants a straight run so a board is guaranteed playable; used only after
// repeated random fills failed (tiny boards with many kinds).
inline void plant_run(Match3Board& b) {
  const int kind = b.cells[0];
  if (b.width >= kMinChain) {
    for (int c = 0; c < kMinChain; ++c) b.at({0, c}) = kind;
  } else {
    for (int r = 0; r < kMinChain; ++r) b.at({r, 0}) = kind;
  }
}

}  // namespace detail

/// Permutes the existing tiles until a move exists; after the bounded number
/// of attempts the board is regenerated from the generator.
inline void match3_reshuffle(Match3Board& b) {
  for (int attempt = 0; attempt < kReshuffleAttempts; ++attempt) {
    if (match3_has_moves(b)) return;
    detail::shuffle_cells(b.cells, b.rng);
  }
  for (int attempt = 0; attempt < kReshuffleAttempts; ++attempt) {
    if (match3_has_moves(b)) return;
    detail::fill_random(b);
  }
  if (!match3_has_moves(b)) detail::plant_run(b);
}

inline Match3Board match3_generate(std::uint64_t seed, int width = 8, int height = 8, int kinds = 6) {
  if (width < 1 || height < 1 || width * height < 9) {
    throw BadDimensions("match-3 board needs at least 9 cells");
  }
  if (kinds < 3) throw BadDimensions("match-3 board needs at least 3 tile kinds");
  Match3Board b;
  b.width = width;
  b.height = height;
  b.kinds = kinds;
  b.rng.seed(seed);
  b.cells.assign(static_cast<std::size_t>(width * height), kEmptyTile);
  detail::fill_random(b);
  match3_reshuffle(b);
  return b;
}

inline bool match3_valid_chain(const Match3Board& b, const std::vector<Cell>& path) {
  if (static_cast<int>(path.size()) < kMinChain) return false;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!b.in_bounds(path[i])) return false;
    if (b.at(path[i]) == kEmptyTile || b.at(path[i]) != b.at(path[0])) return false;
    if (i > 0 && !detail::adjacent(path[i - 1], path[i])) return false;
    for (std::size_t j = 0; j < i; ++j) {
      if (path[j] == path[i]) return false;
    }
  }
  return true;
}

struct Match3Move {
  Match3Board board;
  int eliminated = 0;
};

inline Match3Move match3_apply_chain(Match3Board b, const std::vector<Cell>& path) {
  if (!match3_valid_chain(b, path)) return {std::move(b), 0};
  for (Cell c : path) b.at(c) = kEmptyTile;

  for (int col = 0; col < b.width; ++col) {
    int write = b.height - 1;
    for (int row = b.height - 1; row >= 0; --row) {
      const int v = b.at({row, col});
      if (v != kEmptyTile) {
        b.at({write, col}) = v;
        if (write != row) b.at({row, col}) = kEmptyTile;
        --write;
      }
    }
    for (int row = write; row >= 0; --row) b.at({row, col}) = detail::draw_below(b.rng, b.kinds);
  }

  const int eliminated = static_cast<int>(path.size());
  b.score += eliminated;
  match3_reshuffle(b);
  return {std::move(b), eliminated};
}

/// Some valid chain of exactly three cells, scanning row-major; empty when
/// the board has no moves.
inline std::vector<Cell> match3_find_chain(const Match3Board& b) {
  for (int r = 0; r < b.height; ++r) {
    for (int c = 0; c < b.width; ++c) {
      const Cell mid{r, c};
      const int kind = b.at(mid);
      if (kind == kEmptyTile) continue;
      std::vector<Cell> same;
      const Cell nbrs[4] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (Cell nb : nbrs) {
        if (b.in_bounds(nb) && b.at(nb) == kind) same.push_back(nb);
      }
      if (same.size() >= 2) return {same[0], mid, same[1]};
      if (same.size() == 1) {
        const Cell next = same[0];
        const Cell far[4] = {{next.row - 1, next.col}, {next.row + 1, next.col}, {next.row, next.col - 1},
                             {next.row, next.col + 1}};
        for (Cell f : far) {
          if (b.in_bounds(f) && !(f == mid) && b.at(f) == kind) return {mid, next, f};
        }
      }
    }
  }
  return {};
}

/// A match-3 round inside a session: finished once enough tiles are cleared.
struct Match3Game {
  Match3Board board;
  int target_tiles = 9;
  int eliminated_total = 0;
  int moves = 0;

  bool done() const { return eliminated_total >= target_tiles; }
  bool operator==(const Match3Game&) const = default;
};

inline int match3_play(Match3Game& g, const std::vector<Cell>& path) {
  auto mv = match3_apply_chain(std::move(g.board), path);
  g.board = std::move(mv.board);
  g.eliminated_total += mv.eliminated;
  if (mv.eliminated > 0) ++g.moves;
  return mv.eliminated;
}

inline MiniGameResult match3_result(const Match3Game& g) {
  if (!g.done()) return abandoned_result(MiniGameKind::match3);
  return {MiniGameKind::match3, true, std::min(kMatch3PointsCap, kMatch3PointsPerTile * g.eliminated_total)};
}

inline std::string rng_state_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace reverie

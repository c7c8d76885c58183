#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gsvin/cell.hpp"

namespace gsvin {

inline constexpr int kNumActions = 8;

struct Offset {
  int drow;
  int dcol;
};

/// Moves in fixed order N, NE, E, SE, S, SW, W, NW; the index is the action label.
inline constexpr std::array<Offset, kNumActions> kActionOffsets = {
    {{-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}}};

std::string_view action_name(int action);
/// Action whose offset is `to - from`; throws ValidationError if the cells are not neighbours.
int action_between(Cell from, Cell to);

inline int chebyshev(Cell a, Cell b) {
  const int dr = a.row > b.row ? a.row - b.row : b.row - a.row;
  const int dc = a.col > b.col ? a.col - b.col : b.col - a.col;
  return dr > dc ? dr : dc;
}

/// Occupancy grid with a goal cell. Obstacles are stored row-major, 1 = blocked.
class GridMap {
 public:
  GridMap() = default;
  GridMap(int height, int width);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t cells() const { return obstacles_.size(); }
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.row) * width_ + c.col; }
  Cell cell(std::size_t index) const { return {static_cast<int>(index / width_), static_cast<int>(index % width_)}; }

  bool in_bounds(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < height_ && c.col < width_; }
  bool blocked(Cell c) const { return obstacles_[index(c)] != 0; }
  /// Free means in bounds and not an obstacle.
  bool free(Cell c) const { return in_bounds(c) && !blocked(c); }
  void set_obstacle(Cell c, bool on) { obstacles_[index(c)] = on ? 1 : 0; }
  std::size_t obstacle_count() const;
  std::size_t free_count() const { return cells() - obstacle_count(); }

  Cell goal() const { return goal_; }
  void set_goal(Cell goal) { goal_ = goal; }

  /// Result of taking `action` from `from`: moves unless the target is off-map or an obstacle.
  Cell step(Cell from, int action) const;

  /// Throws ValidationError unless the goal is free and another free cell exists.
  void validate() const;

  const std::vector<std::uint8_t>& obstacles() const { return obstacles_; }

  bool operator==(const GridMap&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> obstacles_;
  Cell goal_;
};

struct PathResult {
  std::vector<Cell> path;  // start first, goal last
  int length = 0;          // number of moves
};

/// Minimum-move path from `start` to the map goal under unit cost for all eight moves
/// (corner cutting allowed). Heuristic: Chebyshev distance. Open-list priority is
/// (f, h, row, col) and neighbours expand in N..NW order, so results are deterministic.
/// Returns nullopt when the goal is unreachable.
std::optional<PathResult> astar_shortest(const GridMap& map, Cell start);

/// Single-source shortest move counts from `source` (-1 = unreachable). Uses a binary heap.
std::vector<int> dijkstra_distances(const GridMap& map, Cell source);

enum class RewardTiming : std::uint8_t {
  OnEntry,      // R(s, a, s') = reward[s']
  OnDeparture,  // R(s, a, s') = reward[s]
};

enum class BoundaryRule : std::uint8_t {
  Stay,  // a blocked move leaves the agent in place
  Exit,  // a blocked move ends the episode with zero continuation value
};

struct ValueIterationOptions {
  double gamma = 0.9;
  int max_iters = 1000;
  double tol = 1e-9;
  RewardTiming reward = RewardTiming::OnEntry;
  BoundaryRule boundary = BoundaryRule::Stay;
  bool obstacles_block = true;  // false: obstacle cells are ordinary states
  bool goal_absorbing = true;   // goal value pinned to 0
};

struct ValueIterationResult {
  std::vector<double> values;  // row-major, one per cell
  int iterations = 0;
  bool converged = false;
};

/// Synchronous Bellman optimality sweeps from V = 0 over the deterministic grid MDP:
///   V_{k+1}(s) = max_a [ R(s, a, s') + gamma * V_k(s') ].
/// Stops when the max change drops below `tol` or after `max_iters` sweeps.
/// Blocked obstacle cells keep value 0.
ValueIterationResult tabular_vi(const GridMap& map, std::span<const double> reward, const ValueIterationOptions& options);

/// Greedy action w.r.t. a converged value grid under the same MDP (lowest index on ties).
int greedy_action(const GridMap& map, std::span<const double> reward, std::span<const double> values, Cell s,
                  const ValueIterationOptions& options);

}  // namespace gsvin

#include "gsvin/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <tuple>

#include "gsvin/errors.hpp"

namespace gsvin {

std::string_view action_name(int action) {
  static constexpr std::array<std::string_view, kNumActions> names = {"N", "NE", "E", "SE", "S", "SW", "W", "NW"};
  if (action < 0 || action >= kNumActions) throw ValidationError("action index out of range: " + std::to_string(action));
  return names[static_cast<std::size_t>(action)];
}

int action_between(Cell from, Cell to) {
  for (int a = 0; a < kNumActions; ++a) {
    const Offset o = kActionOffsets[static_cast<std::size_t>(a)];
    if (from.row + o.drow == to.row && from.col + o.dcol == to.col) return a;
  }
  throw ValidationError("cells are not neighbours");
}

GridMap::GridMap(int height, int width) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) throw ValidationError("grid dimensions must be positive");
  obstacles_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0);
}

std::size_t GridMap::obstacle_count() const {
  return static_cast<std::size_t>(std::count(obstacles_.begin(), obstacles_.end(), std::uint8_t{1}));
}

Cell GridMap::step(Cell from, int action) const {
  const Offset o = kActionOffsets[static_cast<std::size_t>(action)];
  const Cell to{from.row + o.drow, from.col + o.dcol};
  return free(to) ? to : from;
}

void GridMap::validate() const {
  if (!in_bounds(goal_)) throw ValidationError("goal lies outside the map");
  if (blocked(goal_)) throw ValidationError("goal cell is an obstacle");
  if (free_count() < 2) throw ValidationError("map needs a free cell besides the goal");
}

std::optional<PathResult> astar_shortest(const GridMap& map, Cell start) {
  if (!map.free(start)) throw ValidationError("A* start cell is not free");
  const Cell goal = map.goal();
  constexpr int kUnseen = std::numeric_limits<int>::max();

  // (f, h, row, col); std::greater turns the heap into a min-heap in lexicographic order.
  using Entry = std::tuple<int, int, int, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::vector<int> g(map.cells(), kUnseen);
  std::vector<std::size_t> parent(map.cells(), map.cells());
  std::vector<std::uint8_t> closed(map.cells(), 0);

  g[map.index(start)] = 0;
  const int h0 = chebyshev(start, goal);
  open.emplace(h0, h0, start.row, start.col);
  while (!open.empty()) {
    const auto [f, h, row, col] = open.top();
    open.pop();
    const Cell cur{row, col};
    const std::size_t ci = map.index(cur);
    if (closed[ci]) continue;
    closed[ci] = 1;
    if (cur == goal) {
      PathResult result;
      result.length = g[ci];
      for (std::size_t i = ci; i != map.cells(); i = parent[i]) result.path.push_back(map.cell(i));
      std::reverse(result.path.begin(), result.path.end());
      return result;
    }
    for (const Offset o : kActionOffsets) {
      const Cell next{cur.row + o.drow, cur.col + o.dcol};
      if (!map.free(next)) continue;
      const std::size_t ni = map.index(next);
      if (closed[ni]) continue;
      const int cost = g[ci] + 1;
      if (cost < g[ni]) {
        g[ni] = cost;
        parent[ni] = ci;
        const int hn = chebyshev(next, goal);
        open.emplace(cost + hn, hn, next.row, next.col);
      }
    }
  }
  return std::nullopt;
}

std::vector<int> dijkstra_distances(const GridMap& map, Cell source) {
  std::vector<int> dist(map.cells(), -1);
  if (!map.free(source)) return dist;
  using Entry = std::pair<int, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  std::vector<int> best(map.cells(), std::numeric_limits<int>::max());
  best[map.index(source)] = 0;
  heap.emplace(0, map.index(source));
  while (!heap.empty()) {
    const auto [d, i] = heap.top();
    heap.pop();
    if (dist[i] >= 0) continue;
    dist[i] = d;
    const Cell cur = map.cell(i);
    for (const Offset o : kActionOffsets) {
      const Cell next{cur.row + o.drow, cur.col + o.dcol};
      if (!map.free(next)) continue;
      const std::size_t ni = map.index(next);
      if (d + 1 < best[ni]) {
        best[ni] = d + 1;
        heap.emplace(d + 1, ni);
      }
    }
  }
  return dist;
}

namespace {

struct Transition {
  bool terminal;  // exited: continuation value is zero
  std::size_t next;
};

Transition transition(const GridMap& map, Cell s, int action, const ValueIterationOptions& opt) {
  const Offset o = kActionOffsets[static_cast<std::size_t>(action)];
  const Cell t{s.row + o.drow, s.col + o.dcol};
  const bool blocked = !map.in_bounds(t) || (opt.obstacles_block && map.blocked(t));
  if (!blocked) return {false, map.index(t)};
  if (opt.boundary == BoundaryRule::Exit) return {true, 0};
  return {false, map.index(s)};
}

bool is_state(const GridMap& map, Cell s, const ValueIterationOptions& opt) {
  return !(opt.obstacles_block && map.blocked(s));
}

double action_value(const GridMap& map, std::span<const double> reward, std::span<const double> values, Cell s,
                    int action, const ValueIterationOptions& opt) {
  const Transition tr = transition(map, s, action, opt);
  double r = 0.0;
  if (opt.reward == RewardTiming::OnDeparture) {
    r = reward[map.index(s)];
  } else if (!tr.terminal) {
    r = reward[tr.next];
  }
  return r + (tr.terminal ? 0.0 : opt.gamma * values[tr.next]);
}

}  // namespace

ValueIterationResult tabular_vi(const GridMap& map, std::span<const double> reward,
                                const ValueIterationOptions& options) {
  if (reward.size() != map.cells()) throw ShapeError("tabular_vi: reward grid size does not match map");
  if (!(options.gamma >= 0.0 && options.gamma <= 1.0)) throw ValidationError("tabular_vi: gamma must lie in [0,1]");
  ValueIterationResult result;
  result.values.assign(map.cells(), 0.0);
  std::vector<double> next(map.cells(), 0.0);
  const std::size_t goal = map.index(map.goal());
  while (result.iterations < options.max_iters) {
    double change = 0.0;
    for (std::size_t i = 0; i < map.cells(); ++i) {
      const Cell s = map.cell(i);
      if (!is_state(map, s, options) || (options.goal_absorbing && i == goal)) {
        next[i] = 0.0;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kNumActions; ++a) best = std::max(best, action_value(map, reward, result.values, s, a, options));
      next[i] = best;
      change = std::max(change, std::abs(best - result.values[i]));
    }
    result.values.swap(next);
    ++result.iterations;
    if (change < options.tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

int greedy_action(const GridMap& map, std::span<const double> reward, std::span<const double> values, Cell s,
                  const ValueIterationOptions& options) {
  int best_action = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < kNumActions; ++a) {
    const double q = action_value(map, reward, values, s, a, options);
    if (q > best) {
      best = q;
      best_action = a;
    }
  }
  return best_action;
}

}  // namespace gsvin

#include <gtest/gtest.h>

#include <cmath>
#include <deque>

#include "gsvin/dataset.hpp"
#include "gsvin/errors.hpp"
#include "gsvin/grid.hpp"

using namespace gsvin;

namespace {

GridMap empty_map(int h, int w, Cell goal) {
  GridMap m(h, w);
  m.set_goal(goal);
  return m;
}

// Breadth-first search over the 8-neighbourhood; an oracle independent of both A* and Dijkstra.
std::vector<int> bfs(const GridMap& map, Cell source) {
  std::vector<int> dist(map.cells(), -1);
  std::deque<Cell> queue{source};
  dist[map.index(source)] = 0;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const Cell n{c.row + dr, c.col + dc};
        if ((dr == 0 && dc == 0) || !map.free(n) || dist[map.index(n)] >= 0) continue;
        dist[map.index(n)] = dist[map.index(c)] + 1;
        queue.push_back(n);
      }
  }
  return dist;
}

std::vector<double> goal_reward(const GridMap& map, double value) {
  std::vector<double> r(map.cells(), 0.0);
  r[map.index(map.goal())] = value;
  return r;
}

}  // namespace

TEST(Grid, ActionOffsetsAndNames) {
  EXPECT_EQ(action_name(0), "N");
  EXPECT_EQ(action_name(2), "E");
  EXPECT_EQ(action_between({3, 3}, {3, 4}), 2);
  EXPECT_EQ(action_between({3, 3}, {2, 2}), 7);
  EXPECT_THROW(action_between({0, 0}, {0, 2}), ValidationError);
}

TEST(Grid, StepStaysWhenBlocked) {
  GridMap m = empty_map(4, 4, {3, 3});
  m.set_obstacle({1, 1}, true);
  EXPECT_EQ(m.step({0, 0}, 3), (Cell{0, 0}));  // SE into obstacle
  EXPECT_EQ(m.step({0, 0}, 0), (Cell{0, 0}));  // N off map
  EXPECT_EQ(m.step({0, 0}, 2), (Cell{0, 1}));
}

TEST(AStar, DiagonalNeighbour) {
  const GridMap m = empty_map(8, 8, {4, 4});
  const auto p = astar_shortest(m, {3, 3});
  ASSERT_TRUE(p);
  EXPECT_EQ(p->length, 1);
  EXPECT_EQ(p->path, (std::vector<Cell>{{3, 3}, {4, 4}}));
}

TEST(AStar, EmptyMapChebyshev) {
  const GridMap m = empty_map(8, 8, {7, 7});
  const auto p = astar_shortest(m, {0, 0});
  ASSERT_TRUE(p);
  EXPECT_EQ(p->length, 7);
}

TEST(AStar, Unreachable) {
  GridMap m = empty_map(4, 4, {0, 0});
  m.set_obstacle({0, 1}, true);
  m.set_obstacle({1, 0}, true);
  m.set_obstacle({1, 1}, true);
  EXPECT_FALSE(astar_shortest(m, {3, 3}));
  EXPECT_EQ(dijkstra_distances(m, {3, 3})[0], -1);
}

TEST(AStar, DeterministicOnTies) {
  const GridMap m = empty_map(8, 8, {7, 0});
  const auto a = astar_shortest(m, {0, 3});
  const auto b = astar_shortest(m, {0, 3});
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->path, b->path);
}

TEST(AStar, MatchesBreadthFirstAndDijkstra) {
  for (int size : {8, 16, 32}) {
    for (int i = 0; i < 200; ++i) {
      Rng rng = derive_rng(99, {static_cast<std::uint64_t>(size), static_cast<std::uint64_t>(i)});
      const GridMap m = generate_map(size, size, {0.1, 0.4}, rng);
      Cell start;
      do start = m.cell(uniform_below(rng, m.cells()));
      while (!m.free(start));
      const int want = bfs(m, start)[m.index(m.goal())];
      EXPECT_EQ(dijkstra_distances(m, start)[m.index(m.goal())], want);
      const auto p = astar_shortest(m, start);
      if (want < 0) {
        EXPECT_FALSE(p);
        continue;
      }
      ASSERT_TRUE(p);
      ASSERT_EQ(p->length, want);
      ASSERT_EQ(p->path.size(), static_cast<std::size_t>(want + 1));
      for (std::size_t j = 1; j < p->path.size(); ++j) {
        ASSERT_TRUE(m.free(p->path[j]));
        ASSERT_EQ(chebyshev(p->path[j - 1], p->path[j]), 1);
      }
    }
  }
}

TEST(TabularVi, ZeroDiscountRewardsNeighboursOnly) {
  const GridMap m = empty_map(5, 5, {2, 2});
  ValueIterationOptions opt;
  opt.gamma = 0.0;
  const auto r = tabular_vi(m, goal_reward(m, 10.0), opt);
  for (std::size_t i = 0; i < m.cells(); ++i) {
    const Cell c = m.cell(i);
    if (c == m.goal()) continue;
    EXPECT_EQ(r.values[i], chebyshev(c, m.goal()) == 1 ? 10.0 : 0.0) << c.row << "," << c.col;
  }
}

TEST(TabularVi, EmptyFourByFourClosedForm) {
  const GridMap m = empty_map(4, 4, {0, 0});
  ValueIterationOptions opt;
  opt.gamma = 0.9;
  const auto r = tabular_vi(m, goal_reward(m, 10.0), opt);
  EXPECT_TRUE(r.converged);
  for (std::size_t i = 0; i < m.cells(); ++i) {
    const Cell c = m.cell(i);
    if (c == m.goal()) continue;
    const int d = chebyshev(c, m.goal());
    EXPECT_NEAR(r.values[i], 10.0 * std::pow(0.9, d - 1), 1e-12);
  }
}

TEST(TabularVi, MonotoneFromZero) {
  Rng rng = derive_rng(5, {1});
  const GridMap m = generate_map(10, 10, {0.1, 0.3}, rng);
  std::vector<double> reward(m.cells());
  for (double& v : reward) v = uniform_unit(rng);
  ValueIterationOptions opt;
  opt.tol = -1.0;
  std::vector<double> prev(m.cells(), 0.0);
  for (int k = 1; k <= 15; ++k) {
    opt.max_iters = k;
    const auto r = tabular_vi(m, reward, opt);
    EXPECT_EQ(r.iterations, k);
    for (std::size_t i = 0; i < m.cells(); ++i) EXPECT_GE(r.values[i], prev[i] - 1e-15);
    prev = r.values;
  }
}

TEST(TabularVi, GreedyPolicyReachesGoal) {
  for (int i = 0; i < 30; ++i) {
    Rng rng = derive_rng(6, {static_cast<std::uint64_t>(i)});
    const GridMap m = generate_map(12, 12, {0.1, 0.3}, rng);
    const std::vector<double> reward = goal_reward(m, 1.0);
    ValueIterationOptions opt;
    const auto r = tabular_vi(m, reward, opt);
    ASSERT_TRUE(r.converged);
    const std::vector<int> dist = bfs(m, m.goal());
    for (std::size_t s = 0; s < m.cells(); ++s) {
      Cell c = m.cell(s);
      if (!m.free(c) || dist[s] < 0 || c == m.goal()) continue;
      int steps = 0;
      while (c != m.goal() && steps <= 144) {
        c = m.step(c, greedy_action(m, reward, r.values, c, opt));
        ++steps;
      }
      EXPECT_EQ(c, m.goal());
      EXPECT_EQ(steps, dist[s]);
    }
  }
}

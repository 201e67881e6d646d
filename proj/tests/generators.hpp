#pragma once

// Hand-rolled generators shared by the unit and acceptance tests. Everything
// is driven by an explicit mt19937_64 so failures replay from the seed.

#include "gridpush/gridpush.hpp"

#include <random>
#include <set>
#include <utility>
#include <vector>

namespace gridpush::testgen {

using Rng = std::mt19937_64;

inline Real uniform(Rng& rng, Real lo, Real hi) { return std::uniform_real_distribution<Real>(lo, hi)(rng); }

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline std::vector<GridCoord> rectangle_cells(int rows, int cols) {
  std::vector<GridCoord> occ;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) occ.push_back({r, c});
  return occ;
}

// Random edge-connected polyomino of n cells grown from the origin.
inline std::vector<GridCoord> random_polyomino(Rng& rng, int n) {
  std::set<std::pair<int, int>> seen{{0, 0}};
  std::vector<std::pair<int, int>> cells{{0, 0}};
  while (static_cast<int>(cells.size()) < n) {
    auto c = cells[std::uniform_int_distribution<std::size_t>(0, cells.size() - 1)(rng)];
    switch (uniform_int(rng, 0, 3)) {
      case 0: ++c.first; break;
      case 1: --c.first; break;
      case 2: ++c.second; break;
      default: --c.second; break;
    }
    if (seen.insert(c).second) cells.push_back(c);
  }
  std::vector<GridCoord> occ;
  for (const auto& [r, c] : cells) occ.push_back({r, c});
  return occ;
}

// Random tree-shaped polyomino: each new cell touches exactly one old cell,
// so the adjacency graph has no cycles.
inline std::vector<GridCoord> random_tree_polyomino(Rng& rng, int n) {
  std::set<std::pair<int, int>> seen{{0, 0}};
  std::vector<std::pair<int, int>> cells{{0, 0}};
  auto degree = [&](std::pair<int, int> q) {
    int k = 0;
    for (auto d : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}})
      k += seen.count({q.first + d.first, q.second + d.second});
    return k;
  };
  for (int guard = 0; static_cast<int>(cells.size()) < n && guard < 100000; ++guard) {
    auto c = cells[std::uniform_int_distribution<std::size_t>(0, cells.size() - 1)(rng)];
    switch (uniform_int(rng, 0, 3)) {
      case 0: ++c.first; break;
      case 1: --c.first; break;
      case 2: ++c.second; break;
      default: --c.second; break;
    }
    if (seen.count(c) || degree(c) != 1) continue;
    seen.insert(c);
    cells.push_back(c);
  }
  std::vector<GridCoord> occ;
  for (const auto& [r, c] : cells) occ.push_back({r, c});
  return occ;
}

// Parameters drawn uniformly in [lo, hi] times the bounds.
inline GridBody randomize_parameters(Rng& rng, const GridBody& geometry, Real lo = 0.1, Real hi = 1.0) {
  Vector m(geometry.size()), f(geometry.size());
  for (Index i = 0; i < geometry.size(); ++i) {
    m[i] = uniform(rng, lo, hi) * geometry.bounds().m_max;
    f[i] = uniform(rng, lo, hi) * geometry.bounds().mu_max;
  }
  return geometry.with_parameters(m, f);
}

// Square-ish polyomino of exactly n cells, filled row by row.
inline std::vector<GridCoord> compact_cells(int n) {
  int cols = 1;
  while (cols * cols < n) ++cols;
  std::vector<GridCoord> occ;
  for (int k = 0; k < n; ++k) occ.push_back({k / cols, k % cols});
  return occ;
}

// Hammer: an 8-cell handle along +y ending in a 3x2 head.
inline std::vector<GridCoord> hammer_cells() {
  std::vector<GridCoord> occ;
  for (int c = 0; c < 8; ++c) occ.push_back({1, c});
  for (int r = 0; r < 3; ++r)
    for (int c = 8; c < 10; ++c) occ.push_back({r, c});
  return occ;
}

inline GridBody hammer_truth(Real w = 0.02) {
  GridBody g = build_from_occupancy(hammer_cells(), w, 0.5, 0.5);
  Vector m(g.size()), f(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    const bool head = g.cells()[i].col >= 8;
    m[i] = head ? 1.0 : 0.08;
    f[i] = head ? 0.6 : 0.3;
  }
  return g.with_parameters(m, f);
}

// Trajectory of `steps` states from rest: a random exploration push held
// for `push_steps` steps, then coasting.
inline TrajectoryRecord random_push_record(Rng& rng, const GridBody& body, int push_steps, int steps,
                                           Real force_scale = 0.6) {
  const Real dt = 0.05;
  const auto push = explore(body, 1, rng(), exploration_force(body.size(), body.bounds().m_max,
                                                               body.bounds().mu_max, dt, force_scale), dt);
  return push_trajectory(body, initial_state(body), push.front(), push_steps, steps);
}

// Record whose transitions all move: the push is held for every step, so the
// body keeps sliding. `transitions` moving loss terms result. Pushes too weak
// to break static friction are retried harder.
inline TrajectoryRecord moving_record(Rng& rng, const GridBody& body, int transitions, Real force_scale = 0.8) {
  for (int attempt = 0;; ++attempt, force_scale *= 1.25) {
    TrajectoryRecord rec = random_push_record(rng, body, transitions + 1, transitions + 2, force_scale);
    bool ok = true;
    for (int t = 0; t < transitions; ++t) ok = ok && is_moving(rec.velocities[t + 1]);
    if (ok || attempt > 20) {
      // Drop the initial rest state so every transition starts in motion.
      rec.poses.erase(rec.poses.begin());
      rec.velocities.erase(rec.velocities.begin());
      rec.actions.erase(rec.actions.begin());
      return rec;
    }
  }
}

}  // namespace gridpush::testgen

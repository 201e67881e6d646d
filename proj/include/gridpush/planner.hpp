#pragma once

// Push planning: RRT* waypoints over stable, collision-free body poses, then
// a quasi-static push sequence that visits them, choosing each contact face
// by a greedy search along the body's outer boundary.

#include "gridpush/contour.hpp"
#include "gridpush/geometry.hpp"
#include "gridpush/lcp_dynamics.hpp"

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace gridpush {

struct Environment {
  Polygon table;
  std::vector<Polygon> obstacles;

  void validate() const {
    GRIDPUSH_REQUIRE(is_simple(table), InvalidArgument, "table polygon must be simple");
    for (const auto& o : obstacles) GRIDPUSH_REQUIRE(o.size() >= 3, InvalidArgument, "obstacle needs 3 vertices");
  }
};

struct GoalSpec {
  PlanarPose target;
  Real tolerance = 0.0;  // meters; zero selects one cell width
  std::optional<Polygon> region;
};

struct RrtConfig {
  int iterations = 2000;
  Real step = 0.0;  // zero selects two cell widths
  Real goal_bias = 0.1;
};

enum class ContactSearch : unsigned char { kGreedy, kExhaustive };

struct PlannerConfig {
  Real dt = 0.05;
  std::vector<Real> duration_factors{0.5, 1.0, 2.0};
  // Constant push force; zero selects the force that moves the body half a
  // cell width per push from rest.
  Real force = 0.0;
  Real push_fraction = 0.5;
  Real stability_margin = 0.1;  // cell widths
  int patience = 30;            // pushes without progress toward a waypoint
  int max_pushes = 600;
  int restarts = 3;
  int lookahead_after = 3;  // extra greedy climbs when the first one cannot make progress
  RrtConfig rrt;
  SolverConfig solver;
  std::uint64_t seed = 0;
};

struct PushDecision {
  std::size_t face = 0;  // index into the outer contour
  Real gap = 0.0;
  Real left_gap = 0.0;
  Real right_gap = 0.0;
  Real duration = 0.0;
};

struct Plan {
  std::vector<PushAction> actions;
  std::vector<BodyState> predicted_states;
  std::vector<PlanarPose> waypoints;
  std::vector<std::size_t> popped;  // waypoint indices reached, in order
  std::vector<PushDecision> decisions;
  Index simulator_calls = 0;
  bool reached = false;
  Real final_gap = 0.0;
};

//------------------------------------------------------------------------------
// Pose predicates
//------------------------------------------------------------------------------

// COM inside the table with a margin of `margin_cells` cell widths.
inline bool com_supported(const Vec2& com, const Environment& env, Real margin) {
  return signed_distance(com, env.table) >= margin;
}

inline bool stability_check(const GridBody& body, const Vector& pose, const Environment& env,
                            Real margin_cells = 0.1) {
  return com_supported(center_of_mass(body, pose), env, margin_cells * body.cell_width());
}

inline bool stability_check(const GridBody& body, const PlanarPose& pose, const Environment& env,
                            Real margin_cells = 0.1) {
  return stability_check(body, layout_pose(body, pose), env, margin_cells);
}

// `clearance` grows every cell square by that much on each side.
inline bool in_collision(const GridBody& body, const Vector& pose, const Environment& env, Real clearance = 0.0) {
  if (env.obstacles.empty()) return false;
  const Real half = 0.5 * body.cell_width() + clearance;
  for (Index i = 0; i < body.size(); ++i)
    for (const auto& o : env.obstacles)
      if (square_overlaps_polygon(cell_position(pose, i), half, pose[3 * i], o)) return true;
  return false;
}

// How far the body reaches past the table boundary (0 when fully on it).
inline Real overhang(const GridBody& body, const Vector& pose, const Environment& env) {
  Real out = 0.0;
  const Real half = 0.5 * body.cell_width();
  for (Index i = 0; i < body.size(); ++i)
    for (const auto& c : square_corners(cell_position(pose, i), half, pose[3 * i]))
      out = std::max(out, -signed_distance(c, env.table));
  return out;
}

inline bool pose_valid(const GridBody& body, const Vector& pose, const Environment& env, Real margin_cells,
                       Real clearance = 0.0) {
  return stability_check(body, pose, env, margin_cells) && !in_collision(body, pose, env, clearance);
}

// Root-mean-square per-cell position distance between two layouts.
inline Real layout_gap(const Vector& a, const Vector& b) {
  Real s = 0.0;
  const Index n = a.size() / 3;
  for (Index i = 0; i < n; ++i) s += (cell_position(a, i) - cell_position(b, i)).squaredNorm();
  return std::sqrt(s / static_cast<Real>(n));
}

inline Real goal_tolerance(const GridBody& body, const GoalSpec& goal) {
  return goal.tolerance > 0.0 ? goal.tolerance : body.cell_width();
}

//------------------------------------------------------------------------------
// Goal sampling
//------------------------------------------------------------------------------

struct GoalSampling {
  Real min_overhang = -1.0;  // meters; negative selects one cell width
  int budget = 5000;
  Real stability_margin = 0.1;
  // Headings are drawn from heading +- heading_spread.
  Real heading = 0.0;
  Real heading_spread = kPi;
};

// Rejection-samples a pose whose centroid lies in `region`, that is stable,
// collision-free and overhangs the table by at least the required amount.
inline PlanarPose sample_stable_goal(const GridBody& body, const Environment& env, const Polygon& region,
                                     std::uint64_t seed, const GoalSampling& opt = {}) {
  GRIDPUSH_REQUIRE(region.size() >= 3 && std::abs(signed_area(region)) > 0.0, InvalidArgument,
                   "goal region is empty");
  GRIDPUSH_REQUIRE(opt.heading_spread >= 0.0, InvalidArgument, "heading spread must be non-negative");
  const Real g_min = opt.min_overhang < 0.0 ? body.cell_width() : opt.min_overhang;
  const Box2 box = bounding_box(region);
  std::mt19937_64 rng(derive_seed(seed, 0x90a1));
  std::uniform_real_distribution<Real> ux(box.lo.x(), box.hi.x()), uy(box.lo.y(), box.hi.y()),
      ut(opt.heading - opt.heading_spread, opt.heading + opt.heading_spread);
  for (int k = 0; k < opt.budget; ++k) {
    const PlanarPose p{ux(rng), uy(rng), wrap_angle(ut(rng))};
    if (!point_in_polygon({p.x, p.y}, region)) continue;
    const Vector pose = layout_pose(body, p);
    if (!pose_valid(body, pose, env, opt.stability_margin)) continue;
    if (overhang(body, pose, env) < g_min) continue;
    return p;
  }
  throw PlanningFailure("no stable graspable goal", opt.budget);
}

//------------------------------------------------------------------------------
// RRT* over planar body poses
//------------------------------------------------------------------------------

namespace detail {

inline Real body_radius(const GridBody& body) {
  Real r = 0.5 * body.cell_width();
  for (const auto& o : body.local_offsets()) r = std::max(r, o.norm());
  return r;
}

inline Real pose_distance(const PlanarPose& a, const PlanarPose& b, Real radius) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                   radius * radius * std::pow(wrap_angle(b.theta - a.theta), 2));
}

inline PlanarPose interpolate(const PlanarPose& a, const PlanarPose& b, Real t) {
  return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), wrap_angle(a.theta + t * wrap_angle(b.theta - a.theta))};
}

}  // namespace detail

inline std::vector<PlanarPose> rrt_star_waypoints(const GridBody& body, const Environment& env,
                                                  const PlanarPose& start, const GoalSpec& goal,
                                                  std::uint64_t seed, const RrtConfig& cfg = {},
                                                  Real margin_cells = 0.1) {
  const Real w = body.cell_width();
  const Real step = cfg.step > 0.0 ? cfg.step : 2.0 * w;
  const Real radius = detail::body_radius(body);
  const auto dist = [&](const PlanarPose& a, const PlanarPose& b) { return detail::pose_distance(a, b, radius); };
  const auto valid = [&](const PlanarPose& p) { return pose_valid(body, layout_pose(body, p), env, margin_cells); };
  // Between two samples no body point moves more than |dp| + reach |dtheta|,
  // so cells grown by half that cover the swept motion.
  const Real reach = detail::body_radius(body) + w / std::sqrt(2.0);
  const auto edge_valid = [&](const PlanarPose& a, const PlanarPose& b) {
    const int k = std::max(1, static_cast<int>(std::ceil(dist(a, b) / (0.25 * w))));
    const Real sweep = std::hypot(b.x - a.x, b.y - a.y) / k + reach * std::abs(wrap_angle(b.theta - a.theta)) / k;
    const Real clearance = env.obstacles.empty() ? 0.0 : 0.5 * sweep;
    for (int j = clearance > 0.0 ? 0 : 1; j <= k; ++j)
      if (!pose_valid(body, layout_pose(body, detail::interpolate(a, b, static_cast<Real>(j) / k)), env, margin_cells,
                      clearance))
        return false;
    return true;
  };

  const PlanarPose target = goal.target;
  if (dist(start, target) <= 1e-12) return {target};
  GRIDPUSH_REQUIRE(valid(start), PlanningFailure, "start pose is unstable or in collision");
  GRIDPUSH_REQUIRE(valid(target), PlanningFailure, "goal pose is unstable or in collision");
  if (edge_valid(start, target) && dist(start, target) <= step) return {start, target};

  struct Node {
    PlanarPose pose;
    std::size_t parent;
    Real cost;
  };
  std::vector<Node> nodes{{start, 0, 0.0}};
  std::mt19937_64 rng(derive_seed(seed, 0x7a7));
  const Box2 box = bounding_box(env.table);
  std::uniform_real_distribution<Real> ux(box.lo.x(), box.hi.x()), uy(box.lo.y(), box.hi.y()), ut(-kPi, kPi),
      u01(0.0, 1.0);
  std::optional<std::size_t> best_goal_parent;
  Real best_goal_cost = std::numeric_limits<Real>::infinity();
  const Real gamma = 6.0 * step;

  for (int it = 0; it < cfg.iterations; ++it) {
    const PlanarPose q = u01(rng) < cfg.goal_bias ? target : PlanarPose{ux(rng), uy(rng), ut(rng)};
    std::size_t nearest = 0;
    Real dn = std::numeric_limits<Real>::infinity();
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const Real d = dist(nodes[k].pose, q);
      if (d < dn) {
        dn = d;
        nearest = k;
      }
    }
    if (dn <= 1e-12) continue;
    const PlanarPose fresh = dn > step ? detail::interpolate(nodes[nearest].pose, q, step / dn) : q;
    if (!valid(fresh) || !edge_valid(nodes[nearest].pose, fresh)) continue;

    const Real count = static_cast<Real>(nodes.size() + 1);
    const Real r = std::max(step, std::min(gamma * std::cbrt(std::log(count) / count), 3.0 * step));
    std::vector<std::size_t> near;
    for (std::size_t k = 0; k < nodes.size(); ++k)
      if (dist(nodes[k].pose, fresh) <= r) near.push_back(k);

    std::size_t parent = nearest;
    Real cost = nodes[nearest].cost + dist(nodes[nearest].pose, fresh);
    for (std::size_t k : near) {
      const Real c = nodes[k].cost + dist(nodes[k].pose, fresh);
      if (c < cost && edge_valid(nodes[k].pose, fresh)) {
        cost = c;
        parent = k;
      }
    }
    nodes.push_back({fresh, parent, cost});
    const std::size_t id = nodes.size() - 1;
    for (std::size_t k : near) {
      const Real c = cost + dist(fresh, nodes[k].pose);
      if (c + 1e-12 < nodes[k].cost && edge_valid(fresh, nodes[k].pose)) {
        // Subtree costs are refreshed lazily when the path is extracted.
        nodes[k].parent = id;
        nodes[k].cost = c;
      }
    }
  }

  // Costs of rewired subtrees may be stale; recompute from the root.
  std::vector<std::vector<std::size_t>> children(nodes.size());
  for (std::size_t k = 1; k < nodes.size(); ++k) children[nodes[k].parent].push_back(k);
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t k = stack.back();
    stack.pop_back();
    for (std::size_t c : children[k]) {
      nodes[c].cost = nodes[k].cost + dist(nodes[k].pose, nodes[c].pose);
      stack.push_back(c);
    }
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const Real d = dist(nodes[k].pose, target);
    if (d <= step && nodes[k].cost + d < best_goal_cost && edge_valid(nodes[k].pose, target)) {
      best_goal_cost = nodes[k].cost + d;
      best_goal_parent = k;
    }
  }
  if (!best_goal_parent) throw PlanningFailure("no waypoint path within the iteration budget",
                                               static_cast<Index>(nodes.size()));

  std::vector<PlanarPose> path{target};
  for (std::size_t k = *best_goal_parent;; k = nodes[k].parent) {
    path.push_back(nodes[k].pose);
    if (k == 0) break;
  }
  std::reverse(path.begin(), path.end());

  // Shortcut greedily, then resample so consecutive waypoints are at most one
  // step apart.
  std::vector<PlanarPose> shortcut{path.front()};
  for (std::size_t i = 0; i + 1 < path.size();) {
    std::size_t j = path.size() - 1;
    while (j > i + 1 && !edge_valid(path[i], path[j])) --j;
    shortcut.push_back(path[j]);
    i = j;
  }
  std::vector<PlanarPose> out{shortcut.front()};
  for (std::size_t i = 0; i + 1 < shortcut.size(); ++i) {
    const int k = std::max(1, static_cast<int>(std::ceil(dist(shortcut[i], shortcut[i + 1]) / step)));
    for (int j = 1; j <= k; ++j) out.push_back(detail::interpolate(shortcut[i], shortcut[i + 1], static_cast<Real>(j) / k));
  }
  return out;
}

//------------------------------------------------------------------------------
// Push sequence
//------------------------------------------------------------------------------

// Force that moves the body `fraction` cell widths in one push through its
// center of mass from rest.
inline Real nominal_push_force(const GridBody& body, Real dt, Real fraction) {
  const Real total = body.mass().sum();
  const Real mu_bar = body.mass().dot(body.friction()) / total;
  return total * (fraction * body.cell_width() / dt + mu_bar) / dt;
}

// Contact cell maximizing the alignment of (com - target) with (p_i - com),
// and its outer face whose inward normal points most directly at the COM.
inline std::size_t initial_contact(const GridBody& body, const Contour& contour, const Vector& pose,
                                   const Vec2& target_com) {
  const Vec2 com = center_of_mass(body, pose);
  const Real theta = planar_pose(body, pose).theta;
  const Vec2 away = com - target_com;
  std::optional<Index> best_cell;
  Real best = -std::numeric_limits<Real>::infinity();
  if (away.norm() > 1e-12) {
    for (const auto& f : contour.faces) {
      const Vec2 r = cell_position(pose, f.cell) - com;
      const Real c = r.norm() > 1e-12 ? away.dot(r) / (away.norm() * r.norm()) : -1.0;
      // Ties go to the cell farthest from the COM, then the lower index.
      const bool tie = std::abs(c - best) <= 1e-12 && best_cell;
      const Real reach = best_cell ? (cell_position(pose, *best_cell) - com).norm() : 0.0;
      if (c > best + 1e-12 || (tie && (r.norm() > reach + 1e-12 ||
                                       (std::abs(r.norm() - reach) <= 1e-12 && f.cell < *best_cell)))) {
        best = c;
        best_cell = f.cell;
      }
    }
  }
  if (!best_cell) return 0;
  std::size_t choice = 0;
  Real align = -std::numeric_limits<Real>::infinity();
  const Vec2 to_com = com - cell_position(pose, *best_cell);
  for (std::size_t k = 0; k < contour.size(); ++k) {
    if (contour.faces[k].cell != *best_cell) continue;
    const Vec2 inward = -rotate(face_normal(contour.faces[k].face), theta);
    const Real a = to_com.norm() > 1e-12 ? inward.dot(to_com.normalized()) : 0.0;
    if (a > align + 1e-12 || (std::abs(a - align) <= 1e-12 && contour.faces[k].face < contour.faces[choice].face)) {
      align = a;
      choice = k;
    }
  }
  return choice;
}

inline PushAction face_push(const GridBody& body, const Vector& pose, const BoundaryFace& f, Real force,
                            Real duration) {
  PushAction a;
  a.contact_cell = f.cell;
  a.force = -force * rotate(face_normal(f.face), planar_pose(body, pose).theta);
  a.duration = duration;
  return a;
}

inline Plan plan_push_sequence(const GridBody& body, const Environment& env, const BodyState& start,
                               const GoalSpec& goal, const PlannerConfig& cfg = {},
                               ContactSearch search = ContactSearch::kGreedy) {
  GRIDPUSH_REQUIRE(start.pose.size() == body.dofs(), InvalidArgument, "start state does not match the body");
  Plan plan;
  const Real eps = goal_tolerance(body, goal);
  const Vector goal_layout = layout_pose(body, goal.target);
  plan.final_gap = layout_gap(start.pose, goal_layout);
  if (plan.final_gap <= eps) {
    plan.reached = true;
    plan.waypoints = {goal.target};
    return plan;
  }

  plan.waypoints = rrt_star_waypoints(body, env, planar_pose(body, start.pose), goal, cfg.seed, cfg.rrt,
                                      cfg.stability_margin);
  std::vector<Vector> layouts;
  for (const auto& w : plan.waypoints) layouts.push_back(layout_pose(body, w));

  const Contour contour = outer_contour(body);
  const Real force = cfg.force > 0.0 ? cfg.force : nominal_push_force(body, cfg.dt, cfg.push_fraction);
  Vector pose = start.pose;
  std::size_t next = 0;

  // Pops every waypoint up to the last one within tolerance.
  auto advance = [&] {
    for (std::size_t k = layouts.size(); k-- > next;) {
      if (layout_gap(pose, layouts[k]) <= eps) {
        plan.popped.push_back(k);
        next = k + 1;
        return;
      }
    }
  };
  advance();

  // Pushes that fail to improve on the best gap to the aimed waypoint. After
  // `lookahead_after` of them the aim moves one waypoint further along the
  // path; `patience` bounds the total per unreached waypoint.
  int stall = 0, total_stall = 0;
  Real best_target_gap = std::numeric_limits<Real>::infinity();
  std::size_t stall_target = next, aim = next;
  while (next < layouts.size()) {
    if (static_cast<int>(plan.actions.size()) >= cfg.max_pushes)
      throw PlanningFailure("push budget exhausted", static_cast<Index>(plan.actions.size()));
    if (next != stall_target) {
      stall_target = aim = next;
      best_target_gap = std::numeric_limits<Real>::infinity();
      stall = total_stall = 0;
    }
    const Vector& target = layouts[aim];

    struct Outcome {
      Real gap;
      Vector pose;
    };
    std::map<std::pair<std::size_t, int>, Outcome> memo;
    auto evaluate = [&](std::size_t k, int duration_slot) -> const Outcome& {
      auto it = memo.find({k, duration_slot});
      if (it != memo.end()) return it->second;
      const Real duration = cfg.dt * cfg.duration_factors[duration_slot];
      const PushAction a = face_push(body, pose, contour.faces[k], force, duration);
      ++plan.simulator_calls;
      Outcome out{std::numeric_limits<Real>::infinity(), pose};
      const BodyState next_state = apply_push_from_rest(body, pose, a, cfg.solver);
      // A push too weak to break friction is never useful.
      const bool moved = layout_gap(next_state.pose, pose) > 1e-3 * body.cell_width();
      if (moved && pose_valid(body, next_state.pose, env, cfg.stability_margin)) {
        out.gap = layout_gap(next_state.pose, target);
        out.pose = next_state.pose;
      }
      return memo.emplace(std::make_pair(k, duration_slot), std::move(out)).first->second;
    };

    int base_slot = 0;
    for (std::size_t s = 0; s < cfg.duration_factors.size(); ++s)
      if (cfg.duration_factors[s] == 1.0) base_slot = static_cast<int>(s);

    std::size_t cur;
    if (search == ContactSearch::kGreedy) {
      auto climb = [&](std::size_t k) {
        for (;;) {
          const Real g = evaluate(k, base_slot).gap;
          const std::size_t l = contour.left(k), r = contour.right(k);
          const Real gl = evaluate(l, base_slot).gap, gr = evaluate(r, base_slot).gap;
          if (gl < g && gl <= gr) {
            k = l;
          } else if (gr < g) {
            k = r;
          } else {
            return k;
          }
        }
      };
      const std::size_t seed_face = initial_contact(body, contour, pose, center_of_mass(body, target));
      cur = climb(seed_face);
      // A local minimum that would not improve on the current gap triggers
      // climbs from faces spread evenly around the boundary.
      const Real now = layout_gap(pose, target);
      for (int r = 1; r <= cfg.restarts && evaluate(cur, base_slot).gap >= now; ++r) {
        const std::size_t start_face = (seed_face + r * contour.size() / (cfg.restarts + 1)) % contour.size();
        const std::size_t k = climb(start_face);
        if (evaluate(k, base_slot).gap < evaluate(cur, base_slot).gap) cur = k;
      }
    } else {
      cur = 0;
      for (std::size_t k = 0; k < contour.size(); ++k)
        if (evaluate(k, base_slot).gap < evaluate(cur, base_slot).gap) cur = k;
    }

    // Duration refinement on the chosen face.
    int slot = base_slot;
    for (int s = 0; s < static_cast<int>(cfg.duration_factors.size()); ++s)
      if (evaluate(cur, s).gap < evaluate(cur, slot).gap) slot = s;

    const Outcome& chosen = evaluate(cur, slot);
    if (!std::isfinite(chosen.gap))
      throw PlanningFailure("every candidate push leaves the body unstable or in collision",
                            static_cast<Index>(plan.actions.size()));
    PushDecision d;
    d.face = cur;
    d.gap = evaluate(cur, base_slot).gap;
    d.left_gap = evaluate(contour.left(cur), base_slot).gap;
    d.right_gap = evaluate(contour.right(cur), base_slot).gap;
    d.duration = cfg.dt * cfg.duration_factors[slot];
    plan.decisions.push_back(d);
    plan.actions.push_back(face_push(body, pose, contour.faces[cur], force, d.duration));
    pose = chosen.pose;
    plan.predicted_states.push_back({pose, Vector::Zero(pose.size()),
                                     plan.predicted_states.empty() ? d.duration
                                                                   : plan.predicted_states.back().time + d.duration});

    if (chosen.gap < best_target_gap - 1e-3 * body.cell_width()) {
      best_target_gap = chosen.gap;
      stall = 0;
    } else {
      if (++total_stall > cfg.patience)
        throw PlanningFailure("no progress toward waypoint " + std::to_string(next),
                              static_cast<Index>(plan.actions.size()));
      if (++stall >= cfg.lookahead_after && aim + 1 < layouts.size()) {
        ++aim;
        best_target_gap = std::numeric_limits<Real>::infinity();
        stall = 0;
      }
    }
    advance();
  }
  plan.final_gap = layout_gap(pose, goal_layout);
  plan.reached = plan.final_gap <= eps;
  return plan;
}

inline Plan exhaustive_contact_search(const GridBody& body, const Environment& env, const BodyState& start,
                                      const GoalSpec& goal, const PlannerConfig& cfg = {}) {
  return plan_push_sequence(body, env, start, goal, cfg, ContactSearch::kExhaustive);
}

}  // namespace gridpush

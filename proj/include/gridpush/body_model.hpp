#pragma once

// Grid decomposition of a planar object into rigidly joined square cells.
//
// Every per-cell quantity is stacked as (theta, p_x, p_y) per cell, in the
// row-major order of the sorted occupancy coordinates. Occupancy coordinate
// (r, c) places the cell center at (r * w, c * w) in the initial layout.

#include "gridpush/common.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <utility>
#include <vector>

namespace gridpush {

struct GridCoord {
  int row = 0;
  int col = 0;
  auto operator<=>(const GridCoord&) const = default;
};

// Unordered pair of edge-sharing cells, stored with first < second.
// `axis` is 0 when second sits at row + 1 (body-frame +x), 1 when it sits at
// col + 1 (body-frame +y).
struct AdjacencyPair {
  Index first = 0;
  Index second = 0;
  int axis = 0;
  bool operator==(const AdjacencyPair&) const = default;
};

struct ParameterBounds {
  Real m_max = 1.0;
  Real mu_max = 1.0;
};

struct BodyState {
  Vector pose;      // 3n, (theta, p_x, p_y) per cell
  Vector velocity;  // 3n, same layout
  Real time = 0.0;
};

struct PushAction {
  Index contact_cell = 0;  // zero-based cell index
  Vec2 force = Vec2::Zero();
  Real torque = 0.0;
  Real duration = 0.05;
};

// Planar pose of the whole body: centroid of the cell centers plus heading.
struct PlanarPose {
  Real x = 0.0;
  Real y = 0.0;
  Real theta = 0.0;
};

class GridBody {
 public:
  GridBody() = default;

  Index size() const { return static_cast<Index>(cells_.size()); }
  Index dofs() const { return 3 * size(); }
  Real cell_width() const { return cell_width_; }
  const std::vector<GridCoord>& cells() const { return cells_; }
  const std::vector<AdjacencyPair>& adjacency() const { return adjacency_; }
  const Vector& mass() const { return mass_; }
  const Vector& friction() const { return friction_; }
  const ParameterBounds& bounds() const { return bounds_; }

  // Cell-center offsets from the centroid in the body frame (heading 0).
  const std::vector<Vec2>& local_offsets() const { return local_offsets_; }

  std::optional<Index> index_of(GridCoord c) const {
    auto it = std::lower_bound(cells_.begin(), cells_.end(), c);
    if (it == cells_.end() || *it != c) return std::nullopt;
    return static_cast<Index>(it - cells_.begin());
  }

  // Replaces the parameters, validating them against the bounds.
  GridBody with_parameters(const Vector& mass, const Vector& friction) const {
    GridBody out = *this;
    out.set_parameters(mass, friction);
    return out;
  }

  GridBody with_bounds(ParameterBounds b) const {
    GridBody out = *this;
    out.bounds_ = b;
    out.validate_parameters(out.mass_, out.friction_);
    return out;
  }

  // New bounds and parameters together; the old parameters are not checked
  // against the new bounds.
  GridBody with_bounds_and_parameters(ParameterBounds b, const Vector& mass, const Vector& friction) const {
    GridBody out = *this;
    out.bounds_ = b;
    out.set_parameters(mass, friction);
    return out;
  }

  void set_parameters(const Vector& mass, const Vector& friction) {
    validate_parameters(mass, friction);
    mass_ = mass;
    friction_ = friction;
  }

  friend GridBody build_from_occupancy(std::vector<GridCoord>, Real, Real, Real, ParameterBounds);

 private:
  void validate_parameters(const Vector& mass, const Vector& friction) const {
    GRIDPUSH_REQUIRE(mass.size() == size() && friction.size() == size(), InvalidBody,
                     "parameter vectors must have one entry per cell");
    for (Index i = 0; i < size(); ++i) {
      if (!(mass[i] > 0.0 && mass[i] <= bounds_.m_max * (1.0 + 1e-12))) {
        std::ostringstream os;
        os << "mass of cell " << i << " = " << mass[i] << " outside (0, " << bounds_.m_max << "]";
        throw InvalidBody(os.str());
      }
      if (!(friction[i] >= 0.0 && friction[i] <= bounds_.mu_max * (1.0 + 1e-12))) {
        std::ostringstream os;
        os << "friction of cell " << i << " = " << friction[i] << " outside [0, " << bounds_.mu_max << "]";
        throw InvalidBody(os.str());
      }
    }
  }

  Real cell_width_ = 0.0;
  std::vector<GridCoord> cells_;
  std::vector<AdjacencyPair> adjacency_;
  std::vector<Vec2> local_offsets_;
  Vector mass_;
  Vector friction_;
  ParameterBounds bounds_;
};

// Groups occupancy cells into edge-connected components (indices into the
// sorted cell list).
inline std::vector<std::vector<Index>> connected_components(const std::vector<GridCoord>& sorted_cells) {
  const Index n = static_cast<Index>(sorted_cells.size());
  std::map<GridCoord, Index> lookup;
  for (Index i = 0; i < n; ++i) lookup[sorted_cells[i]] = i;
  std::vector<int> label(n, -1);
  std::vector<std::vector<Index>> comps;
  for (Index s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    comps.emplace_back();
    std::queue<Index> q;
    q.push(s);
    label[s] = static_cast<int>(comps.size() - 1);
    while (!q.empty()) {
      Index k = q.front();
      q.pop();
      comps.back().push_back(k);
      const GridCoord c = sorted_cells[k];
      const std::array<GridCoord, 4> nbrs{{{c.row + 1, c.col}, {c.row - 1, c.col}, {c.row, c.col + 1}, {c.row, c.col - 1}}};
      for (const auto& nb : nbrs) {
        auto it = lookup.find(nb);
        if (it != lookup.end() && label[it->second] < 0) {
          label[it->second] = label[s];
          q.push(it->second);
        }
      }
    }
    std::sort(comps.back().begin(), comps.back().end());
  }
  return comps;
}

inline GridBody build_from_occupancy(std::vector<GridCoord> occupancy, Real cell_width, Real mass_init,
                                     Real friction_init, ParameterBounds bounds = {}) {
  GRIDPUSH_REQUIRE(!occupancy.empty(), InvalidBody, "occupancy is empty");
  GRIDPUSH_REQUIRE(cell_width > 0.0, InvalidBody, "cell_width must be positive");
  GRIDPUSH_REQUIRE(bounds.m_max > 0.0 && bounds.mu_max > 0.0, InvalidBody, "parameter bounds must be positive");
  std::sort(occupancy.begin(), occupancy.end());
  GRIDPUSH_REQUIRE(std::adjacent_find(occupancy.begin(), occupancy.end()) == occupancy.end(), InvalidBody,
                   "occupancy contains duplicate cells");

  const auto comps = connected_components(occupancy);
  if (comps.size() > 1) {
    std::ostringstream os;
    os << "occupancy is not edge-connected: " << comps.size() << " components; detached cells:";
    for (std::size_t k = 1; k < comps.size(); ++k)
      for (Index i : comps[k]) os << " (" << occupancy[i].row << "," << occupancy[i].col << ")";
    throw InvalidBody(os.str());
  }

  GridBody body;
  body.cell_width_ = cell_width;
  body.cells_ = std::move(occupancy);
  body.bounds_ = bounds;
  const Index n = body.size();

  for (Index i = 0; i < n; ++i) {
    const GridCoord c = body.cells_[i];
    if (auto j = body.index_of({c.row + 1, c.col})) body.adjacency_.push_back({i, *j, 0});
    if (auto j = body.index_of({c.row, c.col + 1})) body.adjacency_.push_back({i, *j, 1});
  }
  std::sort(body.adjacency_.begin(), body.adjacency_.end(),
            [](const AdjacencyPair& a, const AdjacencyPair& b) {
              return std::tie(a.first, a.second) < std::tie(b.first, b.second);
            });

  Vec2 centroid = Vec2::Zero();
  for (const auto& c : body.cells_) centroid += Vec2(c.row * cell_width, c.col * cell_width);
  centroid /= static_cast<Real>(n);
  for (const auto& c : body.cells_) body.local_offsets_.push_back(Vec2(c.row * cell_width, c.col * cell_width) - centroid);

  body.set_parameters(Vector::Constant(n, mass_init), Vector::Constant(n, friction_init));
  return body;
}

//------------------------------------------------------------------------------
// Pose helpers
//------------------------------------------------------------------------------

inline Vec2 cell_position(const Vector& pose, Index i) { return {pose[3 * i + 1], pose[3 * i + 2]}; }

// Stacked cell poses for the body placed at a planar pose.
inline Vector layout_pose(const GridBody& body, const PlanarPose& p) {
  Vector pose(body.dofs());
  for (Index i = 0; i < body.size(); ++i) {
    const Vec2 q = Vec2(p.x, p.y) + rotate(body.local_offsets()[i], p.theta);
    pose.segment<3>(3 * i) << wrap_angle(p.theta), q.x(), q.y();
  }
  return pose;
}

// Cell centers at grid positions times the cell width, all headings zero.
inline BodyState initial_state(const GridBody& body) {
  BodyState s;
  s.pose = Vector::Zero(body.dofs());
  for (Index i = 0; i < body.size(); ++i) {
    s.pose[3 * i + 1] = body.cells()[i].row * body.cell_width();
    s.pose[3 * i + 2] = body.cells()[i].col * body.cell_width();
  }
  s.velocity = Vector::Zero(body.dofs());
  return s;
}

inline BodyState rest_state(const GridBody& body, const PlanarPose& p) {
  return {layout_pose(body, p), Vector::Zero(body.dofs()), 0.0};
}

// Recovers the planar pose (centroid, heading) from stacked cell poses.
inline PlanarPose planar_pose(const GridBody& body, const Vector& pose) {
  Vec2 centroid = Vec2::Zero();
  Real s = 0.0, c = 0.0;
  for (Index i = 0; i < body.size(); ++i) {
    centroid += cell_position(pose, i);
    s += std::sin(pose[3 * i]);
    c += std::cos(pose[3 * i]);
  }
  centroid /= static_cast<Real>(body.size());
  return {centroid.x(), centroid.y(), std::atan2(s, c)};
}

//------------------------------------------------------------------------------
// Dynamics operators
//------------------------------------------------------------------------------

// Diagonal of the mass matrix: [I_i, M_i, M_i] per cell with I_i = M_i w^2 / 6.
inline Vector mass_diagonal(const GridBody& body, const Vector& mass) {
  const Real w2 = body.cell_width() * body.cell_width();
  Vector d(3 * mass.size());
  for (Index i = 0; i < mass.size(); ++i) d.segment<3>(3 * i) << mass[i] * w2 / 6.0, mass[i], mass[i];
  return d;
}

inline Vector mass_diagonal(const GridBody& body) { return mass_diagonal(body, body.mass()); }

inline Eigen::DiagonalMatrix<Real, Eigen::Dynamic> mass_matrix(const GridBody& body) {
  return Eigen::DiagonalMatrix<Real, Eigen::Dynamic>(mass_diagonal(body));
}

// 2x3 velocity map of the point at body-frame offset `offset` from a cell
// center with heading theta: columns (theta_dot, p_x_dot, p_y_dot).
inline Eigen::Matrix<Real, 2, 3> point_velocity_block(Real theta, const Vec2& offset) {
  const Vec2 r = rotate(offset, theta);
  Eigen::Matrix<Real, 2, 3> b;
  b << -r.y(), 1.0, 0.0,
        r.x(), 0.0, 1.0;
  return b;
}

// Rows per adjacency pair in the joint Jacobian: two for coincidence of the
// shared edge midpoint, one for equal angular rates.
inline constexpr Index kJointRows = 3;

// Joint-constraint Jacobian (3m x 3n). Pair k = (i, j) contributes rows
// 3k..3k+2: the first cell takes the midpoint block for its half-width offset
// toward the neighbor, the second cell the negated block for the opposite
// offset, and the last row is theta_dot_i - theta_dot_j.
inline Matrix adjacency_jacobian(const GridBody& body, const Vector& pose,
                                 const std::vector<AdjacencyPair>* pairs = nullptr) {
  const auto& adj = pairs ? *pairs : body.adjacency();
  const Index m = static_cast<Index>(adj.size());
  const Real half = 0.5 * body.cell_width();
  Matrix J = Matrix::Zero(kJointRows * m, body.dofs());
  for (Index k = 0; k < m; ++k) {
    const auto& p = adj[k];
    const Vec2 dir = p.axis == 0 ? Vec2(1.0, 0.0) : Vec2(0.0, 1.0);
    J.block<2, 3>(kJointRows * k, 3 * p.first) = point_velocity_block(pose[3 * p.first], half * dir);
    J.block<2, 3>(kJointRows * k, 3 * p.second) = -point_velocity_block(pose[3 * p.second], -half * dir);
    J(kJointRows * k + 2, 3 * p.first) = 1.0;
    J(kJointRows * k + 2, 3 * p.second) = -1.0;
  }
  return J;
}

// Friction Jacobian (2n x 3n, block diagonal) in the printed convention: per
// cell [[-sign(theta_dot), 0, 0], [0, vx/|v|, vy/|v|]] with |v| floored at
// kVelocityEpsilon.
inline Matrix friction_jacobian(const GridBody& body, const Vector& velocity) {
  Matrix J = Matrix::Zero(2 * body.size(), body.dofs());
  for (Index i = 0; i < body.size(); ++i) {
    J(2 * i, 3 * i) = -sign_with_deadzone(velocity[3 * i]);
    const Vec2 v(velocity[3 * i + 1], velocity[3 * i + 2]);
    const Real norm = std::max(v.norm(), kVelocityEpsilon);
    J(2 * i + 1, 3 * i + 1) = v.x() / norm;
    J(2 * i + 1, 3 * i + 2) = v.y() / norm;
  }
  return J;
}

// Directions along which friction impulses act in the dynamics: every row
// opposes the reference motion. Identical to friction_jacobian on rotation
// rows, negated on the linear rows.
inline Matrix friction_directions(const GridBody& body, const Vector& velocity) {
  Matrix J = friction_jacobian(body, velocity);
  for (Index i = 0; i < body.size(); ++i) J.row(2 * i + 1) *= -1.0;
  return J;
}

// Friction bound per friction row: (mu_i I_i, mu_i M_i).
inline Vector friction_bounds(const GridBody& body, const Vector& mass, const Vector& friction) {
  const Vector md = mass_diagonal(body, mass);
  Vector c(2 * body.size());
  for (Index i = 0; i < body.size(); ++i) {
    c[2 * i] = friction[i] * md[3 * i];
    c[2 * i + 1] = friction[i] * md[3 * i + 1];
  }
  return c;
}

inline Vector friction_bounds(const GridBody& body) { return friction_bounds(body, body.mass(), body.friction()); }

inline Vec2 center_of_mass(const Vector& mass, const Vector& pose) {
  Vec2 acc = Vec2::Zero();
  for (Index i = 0; i < mass.size(); ++i) acc += mass[i] * cell_position(pose, i);
  return acc / mass.sum();
}

inline Vec2 center_of_mass(const GridBody& body, const Vector& pose) { return center_of_mass(body.mass(), pose); }

// Generalized external force (3n) for a push: torque and force on the contact cell.
inline Vector external_force(const GridBody& body, const PushAction& a) {
  GRIDPUSH_REQUIRE(a.contact_cell >= 0 && a.contact_cell < body.size(), InvalidArgument,
                   "push contact cell out of range");
  Vector F = Vector::Zero(body.dofs());
  F.segment<3>(3 * a.contact_cell) << a.torque, a.force.x(), a.force.y();
  return F;
}

// Velocity field of a rigid twist: angular rate omega and linear velocity
// `v_ref` of the point `ref`.
inline Vector rigid_velocity(const Vector& pose, Real omega, const Vec2& v_ref, const Vec2& ref) {
  const Index n = pose.size() / 3;
  Vector v(pose.size());
  for (Index i = 0; i < n; ++i) {
    const Vec2 r = cell_position(pose, i) - ref;
    v.segment<3>(3 * i) << omega, v_ref.x() - omega * r.y(), v_ref.y() + omega * r.x();
  }
  return v;
}

// Pairs forming a spanning tree of the adjacency graph (BFS from cell 0).
inline std::vector<AdjacencyPair> spanning_tree_pairs(const GridBody& body) {
  const Index n = body.size();
  std::vector<std::vector<Index>> incident(n);
  const auto& adj = body.adjacency();
  for (Index k = 0; k < static_cast<Index>(adj.size()); ++k) {
    incident[adj[k].first].push_back(k);
    incident[adj[k].second].push_back(k);
  }
  std::vector<bool> seen(n, false);
  std::vector<AdjacencyPair> tree;
  std::queue<Index> q;
  q.push(0);
  seen[0] = true;
  while (!q.empty()) {
    const Index i = q.front();
    q.pop();
    for (Index k : incident[i]) {
      const Index j = adj[k].first == i ? adj[k].second : adj[k].first;
      if (!seen[j]) {
        seen[j] = true;
        tree.push_back(adj[k]);
        q.push(j);
      }
    }
  }
  return tree;
}

}  // namespace gridpush

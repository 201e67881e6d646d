#pragma once

// Teacher-forced prediction loss over recorded trajectories and its
// derivatives with respect to per-cell mass and friction.
//
// For a transition t the model predicts x_{t+2} = x^g_{t+1} + V(x^g_t, v^g_t, F_t) dt
// and the loss sums the per-cell Euclidean position error. With the friction
// regime of every row fixed, the solved velocity is the solution of an
// equality-constrained system, so
//
//   dv'/dp = X (dM (v - v') + Jf_s' dc_s)
//
// where X is the inverse mass restricted to the joint and sticking rows and
// c_s the bounds of the sliding rows.

#include "gridpush/trajectory.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace gridpush {

// A transition counts as moving when the observed velocity exceeds this.
inline constexpr Real kMoveEpsilon = 1e-4;

inline bool is_moving(const Vector& velocity) {
  return velocity.size() > 0 && velocity.cwiseAbs().maxCoeff() > kMoveEpsilon;
}

struct LossOptions {
  bool moving_only = false;
  SolverConfig solver;
};

struct LossReport {
  Real value = 0.0;
  Vector per_step;  // one entry per evaluated transition
};

struct GradientPair {
  Vector d_mass;
  Vector d_friction;
};

// One evaluated transition together with everything the gradient needs.
struct StepEvaluation {
  std::size_t record = 0;
  std::size_t step = 0;
  Real dt = 0.0;
  Vector velocity;   // observed v^g_t
  Vector residual;   // predicted minus observed x_{t+2}, positions only (theta entries zero)
  Real distance = 0.0;
  LcpSolution solution;
};

// Per-cell position distance summed over cells, angles excluded.
inline Real position_distance(const Vector& a, const Vector& b) {
  Real d = 0.0;
  for (Index i = 0; i < a.size(); i += 3) d += std::hypot(a[i + 1] - b[i + 1], a[i + 2] - b[i + 2]);
  return d;
}

inline void check_dataset(const GridBody& body, const Dataset& data) {
  GRIDPUSH_REQUIRE(!data.empty(), InvalidArgument, "dataset is empty");
  for (std::size_t r = 0; r < data.size(); ++r) {
    data[r].validate(body.dofs());
    GRIDPUSH_REQUIRE(data[r].state_count() >= 3, InvalidArgument,
                     "trajectory " + (data[r].name.empty() ? std::to_string(r) : data[r].name) +
                         " has fewer than 3 states");
  }
}

// Evaluates a single transition of record `rec` starting at state t.
inline StepEvaluation evaluate_transition(const GridBody& body, const TrajectoryRecord& rec, std::size_t r,
                                          std::size_t t, const SolverConfig& solver = {}) {
  StepEvaluation ev;
  ev.record = r;
  ev.step = t;
  ev.dt = rec.actions[t + 1].duration;
  ev.velocity = rec.velocities[t];
  ev.solution = step_velocity(body, {rec.poses[t], rec.velocities[t], 0.0}, rec.actions[t], solver);
  const Vector predicted = rec.poses[t + 1] + ev.dt * ev.solution.next_velocity;
  ev.residual = predicted - rec.poses[t + 2];
  for (Index i = 0; i < ev.residual.size(); i += 3) ev.residual[i] = 0.0;
  ev.distance = position_distance(predicted, rec.poses[t + 2]);
  return ev;
}

// Forward pass over every transition (or every moving one).
inline std::vector<StepEvaluation> evaluate_steps(const GridBody& body, const Dataset& data,
                                                  const LossOptions& opt = {}) {
  check_dataset(body, data);
  std::vector<StepEvaluation> out;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto& rec = data[r];
    for (std::size_t t = 0; t + 2 < rec.state_count(); ++t) {
      if (opt.moving_only && !is_moving(rec.velocities[t])) continue;
      out.push_back(evaluate_transition(body, rec, r, t, opt.solver));
    }
  }
  return out;
}

inline LossReport loss_from_steps(const std::vector<StepEvaluation>& steps) {
  LossReport rep;
  rep.per_step.resize(static_cast<Index>(steps.size()));
  for (std::size_t k = 0; k < steps.size(); ++k) rep.per_step[static_cast<Index>(k)] = steps[k].distance;
  rep.value = rep.per_step.sum();
  return rep;
}

inline LossReport loss(const GridBody& body, const Dataset& data, const LossOptions& opt = {}) {
  return loss_from_steps(evaluate_steps(body, data, opt));
}

//------------------------------------------------------------------------------
// Analytical gradients
//------------------------------------------------------------------------------

enum class GradientMode : unsigned char {
  // Differentiates the solve with the friction regimes it found.
  kExact,
  // Treats every friction row as sliding at its bound and ignores sticking,
  // as in the stochastic learning rule.
  kSaturated,
};

// Distances at or below this fraction of the cell width count as zero error.
inline constexpr Real kErrorFloor = 1e-10;

// Gradient of one transition's loss term.
inline GradientPair transition_gradient(const GridBody& body, const StepEvaluation& ev,
                                        GradientMode mode = GradientMode::kExact) {
  const Index n = body.size();
  const Real w2 = body.cell_width() * body.cell_width();
  GradientPair g{Vector::Zero(n), Vector::Zero(n)};

  // d loss / d v' = dt * e_i / |e_i| on the position entries.
  Vector weight = Vector::Zero(3 * n);
  bool any = false;
  for (Index i = 0; i < n; ++i) {
    const Vec2 e(ev.residual[3 * i + 1], ev.residual[3 * i + 2]);
    const Real d = e.norm();
    if (d <= kErrorFloor * body.cell_width()) continue;
    weight.segment<2>(3 * i + 1) = ev.dt * e / d;
    any = true;
  }
  if (!any) return g;

  const LcpSolution& s = ev.solution;
  const Matrix& D = s.friction_directions;
  std::vector<bool> bound_active(static_cast<std::size_t>(2 * n), false);
  Vector y;
  if (mode == GradientMode::kSaturated) {
    y = s.x11 * weight;
    for (Index k = 0; k < 2 * n; ++k) bound_active[k] = true;
  } else {
    std::vector<Index> sticking;
    for (Index k = 0; k < 2 * n; ++k) {
      bound_active[k] = s.regime[k] == FrictionRegime::kSliding;
      if (s.regime[k] == FrictionRegime::kSticking) sticking.push_back(k);
    }
    if (sticking.empty()) {
      y = s.x11 * weight;
    } else {
      Matrix C(static_cast<Index>(sticking.size()), 3 * n);
      for (std::size_t r = 0; r < sticking.size(); ++r) C.row(static_cast<Index>(r)) = D.row(sticking[r]);
      y = restrict_constrained_inverse(s.x11, C) * weight;
    }
  }

  const Vector dv = ev.velocity - s.next_velocity;
  const Vector& M = body.mass();
  const Vector& mu = body.friction();
  for (Index i = 0; i < n; ++i) {
    // Each friction row touches only its own cell.
    const Real rot = bound_active[2 * i] ? D.row(2 * i).segment<3>(3 * i).dot(y.segment<3>(3 * i)) : 0.0;
    const Real lin = bound_active[2 * i + 1] ? D.row(2 * i + 1).segment<3>(3 * i).dot(y.segment<3>(3 * i)) : 0.0;
    g.d_friction[i] = rot * M[i] * w2 / 6.0 + lin * M[i];
    g.d_mass[i] = y[3 * i] * dv[3 * i] * w2 / 6.0 + y[3 * i + 1] * dv[3 * i + 1] + y[3 * i + 2] * dv[3 * i + 2] +
                  rot * mu[i] * w2 / 6.0 + lin * mu[i];
  }
  return g;
}

inline GradientPair gradient_from_steps(const GridBody& body, const std::vector<StepEvaluation>& steps,
                                        GradientMode mode = GradientMode::kExact) {
  GradientPair g{Vector::Zero(body.size()), Vector::Zero(body.size())};
  for (const auto& ev : steps) {
    const GradientPair t = transition_gradient(body, ev, mode);
    g.d_mass += t.d_mass;
    g.d_friction += t.d_friction;
  }
  return g;
}

// Gradient of the moving-transition loss. Throws InsufficientExcitation when
// no transition moves.
inline GradientPair gradient(const GridBody& body, const Dataset& data, const SolverConfig& solver = {}) {
  const auto steps = evaluate_steps(body, data, {true, solver});
  if (steps.empty()) throw InsufficientExcitation();
  return gradient_from_steps(body, steps);
}

inline Vector grad_mass(const GridBody& body, const Dataset& data, const SolverConfig& solver = {}) {
  return gradient(body, data, solver).d_mass;
}

inline Vector grad_friction(const GridBody& body, const Dataset& data, const SolverConfig& solver = {}) {
  return gradient(body, data, solver).d_friction;
}

//------------------------------------------------------------------------------
// Finite differences
//------------------------------------------------------------------------------

struct FiniteDiffResult {
  GradientPair gradient;
  // Coordinates whose perturbation changed a friction regime somewhere in
  // the dataset; the loss has a kink there.
  std::vector<bool> mass_regime_change;
  std::vector<bool> friction_regime_change;
  Index loss_evaluations = 0;
};

// Central differences of the moving-transition loss with step h times the
// parameter bound. Coordinates at a bound fall back to a one-sided difference.
inline FiniteDiffResult finite_diff_gradient(const GridBody& body, const Dataset& data, Real h = 1e-6,
                                             const SolverConfig& solver = {}) {
  GRIDPUSH_REQUIRE(h > 0.0, InvalidArgument, "finite-difference step must be positive");
  const Index n = body.size();
  const ParameterBounds b = body.bounds();
  const GridBody relaxed = body.with_bounds({b.m_max * (1.0 + 2.0 * h), b.mu_max * (1.0 + 2.0 * h)});
  const LossOptions opt{true, solver};

  auto regimes = [](const std::vector<StepEvaluation>& steps) {
    std::vector<std::vector<FrictionRegime>> r;
    for (const auto& s : steps) r.push_back(s.solution.regime);
    return r;
  };
  const auto base_regimes = regimes(evaluate_steps(relaxed, data, opt));

  FiniteDiffResult out;
  out.gradient = {Vector::Zero(n), Vector::Zero(n)};
  out.mass_regime_change.assign(n, false);
  out.friction_regime_change.assign(n, false);

  auto probe = [&](bool mass, Index i, Real delta, bool& changed) {
    Vector m = body.mass(), f = body.friction();
    (mass ? m : f)[i] += delta;
    const auto steps = evaluate_steps(relaxed.with_parameters(m, f), data, opt);
    ++out.loss_evaluations;
    if (regimes(steps) != base_regimes) changed = true;
    return loss_from_steps(steps).value;
  };

  for (int which = 0; which < 2; ++which) {
    const bool mass = which == 0;
    const Real step = h * (mass ? b.m_max : b.mu_max);
    Vector& grad = mass ? out.gradient.d_mass : out.gradient.d_friction;
    auto& flags = mass ? out.mass_regime_change : out.friction_regime_change;
    for (Index i = 0; i < n; ++i) {
      bool changed = false;
      const Real value = (mass ? body.mass() : body.friction())[i];
      if (value - step > 0.0) {
        grad[i] = (probe(mass, i, step, changed) - probe(mass, i, -step, changed)) / (2.0 * step);
      } else {
        const Real l0 = loss(relaxed, data, opt).value;
        ++out.loss_evaluations;
        grad[i] = (probe(mass, i, step, changed) - l0) / step;
      }
      flags[i] = changed;
    }
  }
  return out;
}

// Largest per-coordinate relative error between two gradients, skipping
// flagged coordinates. The denominator is floored at `floor` times the
// largest reference entry so that entries near zero compare absolutely.
inline Real max_relative_error(const Vector& analytic, const Vector& reference, const std::vector<bool>& skip = {},
                               Real floor = 1e-4) {
  const Real scale = reference.size() ? reference.cwiseAbs().maxCoeff() : 0.0;
  Real worst = 0.0;
  for (Index i = 0; i < analytic.size(); ++i) {
    if (!skip.empty() && skip[i]) continue;
    const Real denom = std::max({std::abs(analytic[i]), std::abs(reference[i]), floor * scale,
                                 std::numeric_limits<Real>::min()});
    worst = std::max(worst, std::abs(analytic[i] - reference[i]) / denom);
  }
  return worst;
}

}  // namespace gridpush

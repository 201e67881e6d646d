#pragma once

// One-step contact dynamics of a grid body sliding on a support surface,
// posed as the mixed LCP
//
//   [0; 0; rho; xi] + [[M, Je', Jf', 0], [Je, 0, 0, 0], [Jf, 0, 0, -I], [0, 0, I, 0]]
//                      * [-v'; lambda_e; lambda_f; gamma]
//                    = [-M v - dt F; 0; 0; mu diag(M)],
//   rho, xi, lambda_f, gamma >= 0,  rho . lambda_f = 0,  xi . gamma = 0,
//
// where Jf holds friction directions that oppose the reference motion.
// Eliminating v' and lambda_e leaves a box-constrained QP in lambda_f,
// solved by a primal-dual interior point with a projected Gauss-Seidel
// fallback.

#include "gridpush/body_model.hpp"
#include "gridpush/box_qp.hpp"
#include "gridpush/constrained_inverse.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <set>
#include <sstream>
#include <utility>
#include <vector>

namespace gridpush {

struct SolverConfig {
  int max_iterations = 200;
  Real tolerance = 1e-8;
  Real dt = 0.05;
};

enum class FrictionRegime : unsigned char {
  kInactive,  // lambda_f = 0
  kSliding,   // lambda_f = mu diag(M)
  kSticking,  // strictly between the bounds; row acts as an equality
};

struct LcpSolution {
  Vector next_velocity;
  Vector lambda_e;
  Vector lambda_f;
  Vector gamma;
  Vector rho;
  Vector xi;
  Real residual = 0.0;

  // Quantities the gradient computation reuses.
  Matrix friction_directions;  // 2n x 3n, rows oppose the reference motion
  Matrix x11;                  // joint-constrained inverse mass at this pose
  std::vector<FrictionRegime> regime;
  bool used_fallback = false;
};

// Residual of every block equation, sign condition and complementarity
// condition of the LCP at a candidate solution.
inline Real lcp_residual(const Vector& mass_diag, const Matrix& Je, const Matrix& Jf, const Vector& velocity,
                         const Vector& impulse, const Vector& bound, const LcpSolution& s) {
  const Vector r1 = -mass_diag.cwiseProduct(s.next_velocity) + Je.transpose() * s.lambda_e +
                    Jf.transpose() * s.lambda_f + mass_diag.cwiseProduct(velocity) + impulse;
  Real r = r1.size() ? r1.cwiseAbs().maxCoeff() : 0.0;
  if (Je.rows()) r = std::max(r, (Je * s.next_velocity).cwiseAbs().maxCoeff());
  if (Jf.rows()) {
    const Vector r3 = s.rho - Jf * s.next_velocity - s.gamma;
    const Vector r4 = s.xi + s.lambda_f - bound;
    r = std::max({r, r3.cwiseAbs().maxCoeff(), r4.cwiseAbs().maxCoeff()});
    r = std::max({r, -s.rho.minCoeff(), -s.xi.minCoeff(), -s.lambda_f.minCoeff(), -s.gamma.minCoeff()});
    r = std::max({r, s.rho.cwiseProduct(s.lambda_f).cwiseAbs().maxCoeff(),
                  s.xi.cwiseProduct(s.gamma).cwiseAbs().maxCoeff()});
  }
  return r;
}

namespace detail {

struct StepProblem {
  Vector mass_diag;
  Matrix Je;
  Matrix Jf;
  Vector velocity;
  Vector impulse;  // dt * F
  Vector bound;    // mu diag(M) on the friction rows
  Matrix X;        // X11
  Vector momentum;  // M v + dt F
  std::vector<Index> joint_rows;  // rows of Je on a spanning tree, full row rank
};

// Classifies friction rows from a primal solution alone: values within a
// small tolerance of a bound are taken as at the bound.
inline std::vector<FrictionRegime> classify_by_value(const StepProblem& p, const Vector& lambda) {
  const Real snap = 1e-9 * std::max(1.0, p.bound.size() ? p.bound.maxCoeff() : 0.0);
  std::vector<FrictionRegime> regime(lambda.size(), FrictionRegime::kInactive);
  for (Index k = 0; k < lambda.size(); ++k) {
    if (p.Jf.row(k).squaredNorm() == 0.0) continue;
    if (lambda[k] >= p.bound[k] - snap)
      regime[k] = FrictionRegime::kSliding;
    else if (lambda[k] > snap)
      regime[k] = FrictionRegime::kSticking;
  }
  return regime;
}

// Completes a solution from a friction regime guess: recovers v', lambda_e,
// the sticking magnitudes and the slacks. Rows whose magnitude or slip has
// the wrong sign switch regime and the solve repeats; the best candidate
// seen is returned, so a cycling pivot sequence still ends cleanly.
inline LcpSolution finalize(const StepProblem& p, Vector lambda, std::vector<FrictionRegime> regime) {
  const Index nf = lambda.size();
  const Real scale = std::max(1.0, p.bound.size() ? p.bound.maxCoeff() : 0.0);
  const Real tol = 1e-10 * scale;
  const Index nj = static_cast<Index>(p.joint_rows.size());
  const Vector minv = p.mass_diag.cwiseInverse();
  for (Index k = 0; k < nf; ++k) {
    if (regime[k] == FrictionRegime::kSliding) lambda[k] = p.bound[k];
    if (regime[k] == FrictionRegime::kInactive) lambda[k] = 0.0;
    if (regime[k] == FrictionRegime::kSticking) lambda[k] = std::clamp(lambda[k], 0.0, p.bound[k]);
  }

  LcpSolution best;
  best.residual = std::numeric_limits<Real>::infinity();
  const int max_passes = static_cast<int>(4 * nf + 4);
  std::set<std::vector<FrictionRegime>> seen;
  bool one_at_a_time = false;
  for (int pass = 0; pass < max_passes; ++pass) {
    std::vector<Index> sticking;
    Vector known = p.momentum;
    for (Index k = 0; k < nf; ++k) {
      if (regime[k] == FrictionRegime::kSticking)
        sticking.push_back(k);
      else if (lambda[k] != 0.0)
        known += p.Jf.row(k).transpose() * lambda[k];
    }
    const Index ns = static_cast<Index>(sticking.size());

    // Joint impulses on the spanning-tree rows and the sticking magnitudes
    // from one Jacobi-scaled Schur-complement solve; v' then follows from
    // momentum balance.
    Matrix B(p.Je.cols(), nj + ns);
    for (Index r = 0; r < nj; ++r) B.col(r) = p.Je.row(p.joint_rows[r]).transpose();
    for (Index r = 0; r < ns; ++r) B.col(nj + r) = p.Jf.row(sticking[r]).transpose();
    Vector sol = Vector::Zero(nj + ns);
    if (B.cols() > 0) {
      const Matrix MB = minv.asDiagonal() * B;
      const Matrix S = B.transpose() * MB;
      const Vector d = S.diagonal().cwiseMax(std::numeric_limits<Real>::min()).cwiseSqrt().cwiseInverse();
      const Matrix St = d.asDiagonal() * S * d.asDiagonal();
      const Vector rhs = -(d.asDiagonal() * (MB.transpose() * known));
      // Redundant rows leave the magnitudes underdetermined; stay closest to
      // the current guess.
      Vector y0 = Vector::Zero(nj + ns);
      for (Index r = 0; r < ns; ++r) y0[nj + r] = lambda[sticking[r]] / d[nj + r];
      sol = d.cwiseProduct(y0 + psd_pseudo_solve(St, rhs - St * y0, 1e-13));
      // Iterative refinement on the constraint rows as evaluated from v'.
      for (int refine = 0; refine < 2; ++refine) {
        const Vector v = minv.cwiseProduct(known + B * sol);
        sol -= d.cwiseProduct(psd_pseudo_solve(St, d.cwiseProduct(B.transpose() * v), 1e-13));
      }
    }

    LcpSolution s;
    s.lambda_e = Vector::Zero(p.Je.rows());
    for (Index r = 0; r < nj; ++r) s.lambda_e[p.joint_rows[r]] = sol[r];
    for (Index r = 0; r < ns; ++r) lambda[sticking[r]] = std::clamp(sol[nj + r], 0.0, p.bound[sticking[r]]);
    s.lambda_f = lambda;
    s.next_velocity = minv.cwiseProduct(p.momentum + p.Je.transpose() * s.lambda_e + p.Jf.transpose() * lambda);
    const Vector slip = p.Jf * s.next_velocity;
    s.gamma = Vector::Zero(nf);
    s.rho = Vector::Zero(nf);
    for (Index k = 0; k < nf; ++k) {
      // With a zero bound the free and saturated regimes coincide.
      if (regime[k] == FrictionRegime::kSliding || p.bound[k] <= 0.0) s.gamma[k] = std::max(0.0, -slip[k]);
      s.rho[k] = slip[k] + s.gamma[k];
    }
    s.xi = p.bound - lambda;
    s.regime = regime;
    s.residual = lcp_residual(p.mass_diag, p.Je, p.Jf, p.velocity, p.impulse, p.bound, s);
    if (s.residual < best.residual) best = s;

    // Pivots: sticking magnitudes outside their box leave for the bound they
    // crossed; otherwise a free row slipping backwards or a saturated row
    // slipping forwards starts to stick. Rows normally switch together; once
    // a regime repeats, only the worst row switches per pass.
    if (!seen.insert(regime).second) one_at_a_time = true;
    std::vector<std::pair<Real, Index>> value_moves;  // (violation, sticking slot)
    for (Index r = 0; r < ns; ++r) {
      const Index k = sticking[r];
      if (sol[nj + r] < -tol)
        value_moves.push_back({-sol[nj + r], r});
      else if (sol[nj + r] > p.bound[k] + tol)
        value_moves.push_back({sol[nj + r] - p.bound[k], r});
    }
    if (!value_moves.empty()) {
      if (one_at_a_time) value_moves = {*std::max_element(value_moves.begin(), value_moves.end())};
      for (const auto& [v, r] : value_moves) {
        const Index k = sticking[r];
        const bool low = sol[nj + r] < 0.0;
        regime[k] = low ? FrictionRegime::kInactive : FrictionRegime::kSliding;
        lambda[k] = low ? 0.0 : p.bound[k];
      }
      continue;
    }

    const Real slip_tol = 1e-10 * std::max(1.0, s.next_velocity.cwiseAbs().maxCoeff());
    std::vector<std::pair<Real, Index>> slip_moves;
    for (Index k = 0; k < nf; ++k) {
      if ((regime[k] == FrictionRegime::kInactive && slip[k] < -slip_tol && p.bound[k] > 0.0) ||
          (regime[k] == FrictionRegime::kSliding && slip[k] > slip_tol))
        slip_moves.push_back({std::abs(slip[k]), k});
    }
    if (slip_moves.empty()) break;
    if (one_at_a_time) slip_moves = {*std::max_element(slip_moves.begin(), slip_moves.end())};
    for (const auto& [v, k] : slip_moves) regime[k] = FrictionRegime::kSticking;
  }
  return best;
}

// Solution taken directly from an interior-point iterate: magnitudes as
// returned, slacks from the iterate's duals.
inline LcpSolution from_iterate(const StepProblem& p, const Vector& lambda, const Vector& lower_dual,
                                const Vector& upper_dual, std::vector<FrictionRegime> regime) {
  LcpSolution s;
  const Vector known = p.momentum + p.Jf.transpose() * lambda;
  s.next_velocity = p.X * known;
  const Index nj = static_cast<Index>(p.joint_rows.size());
  s.lambda_e = Vector::Zero(p.Je.rows());
  if (nj > 0) {
    Matrix B(p.Je.cols(), nj);
    for (Index r = 0; r < nj; ++r) B.col(r) = p.Je.row(p.joint_rows[r]).transpose();
    const Vector sol = B.colPivHouseholderQr().solve(p.mass_diag.cwiseProduct(s.next_velocity) - known);
    for (Index r = 0; r < nj; ++r) s.lambda_e[p.joint_rows[r]] = sol[r];
  }
  s.lambda_f = lambda;
  s.rho = lower_dual;
  s.gamma = upper_dual;
  s.xi = p.bound - lambda;
  s.regime = std::move(regime);
  s.residual = lcp_residual(p.mass_diag, p.Je, p.Jf, p.velocity, p.impulse, p.bound, s);
  return s;
}

}  // namespace detail

// Solves for the next velocity under a push held for action.duration seconds.
//
// Friction directions follow the current velocity. A body entirely at rest
// takes them from the frictionless trial velocity instead, so that static
// friction holds the body until the push exceeds the friction bound.
inline LcpSolution step_velocity(const GridBody& body, const BodyState& state, const PushAction& action,
                                 const SolverConfig& config = {}) {
  const Index n = body.size();
  GRIDPUSH_REQUIRE(state.pose.size() == 3 * n && state.velocity.size() == 3 * n, InvalidArgument,
                   "state does not match the body");
  GRIDPUSH_REQUIRE(action.duration > 0.0, InvalidArgument, "push duration must be positive");

  detail::StepProblem p;
  p.mass_diag = mass_diagonal(body);
  p.Je = adjacency_jacobian(body, state.pose);
  {
    const auto tree = spanning_tree_pairs(body);
    const auto& adj = body.adjacency();
    for (const auto& e : tree) {
      const Index k = std::find(adj.begin(), adj.end(), e) - adj.begin();
      for (Index r = 0; r < kJointRows; ++r) p.joint_rows.push_back(kJointRows * k + r);
    }
  }
  p.velocity = state.velocity;
  p.impulse = action.duration * external_force(body, action);
  p.momentum = p.mass_diag.cwiseProduct(state.velocity) + p.impulse;
  p.X = x11(body, state.pose, p.mass_diag).x;
  const Vector v_free = p.X * p.momentum;

  const bool at_rest = state.velocity.cwiseAbs().maxCoeff() < kVelocityEpsilon;
  p.Jf = friction_directions(body, at_rest ? v_free : state.velocity);
  p.bound = friction_bounds(body);

  // Only rows with a direction and a positive bound enter the QP.
  std::vector<Index> rows;
  for (Index k = 0; k < 2 * n; ++k)
    if (p.bound[k] > 0.0 && p.Jf.row(k).squaredNorm() > 0.0) rows.push_back(k);
  const Index nr = static_cast<Index>(rows.size());
  Matrix D(nr, 3 * n);
  Vector c(nr);
  for (Index r = 0; r < nr; ++r) {
    D.row(r) = p.Jf.row(rows[r]);
    c[r] = p.bound[rows[r]];
  }
  const Matrix A = D * p.X * D.transpose();
  const Vector w = D * v_free;

  auto expand = [&](const Vector& reduced) {
    Vector full = Vector::Zero(2 * n);
    for (Index r = 0; r < nr; ++r) full[rows[r]] = reduced[r];
    return full;
  };

  BoxQpOptions opt;
  opt.max_iterations = config.max_iterations;
  const BoxQpResult ip = solve_box_qp_interior_point(A, w, c, opt);
  // Near the solution a bound is active when its slack is small against its
  // multiplier; the ratio separates the regimes far better than the values.
  std::vector<FrictionRegime> regime(2 * n, FrictionRegime::kInactive);
  for (Index r = 0; r < nr; ++r) {
    const Real stiffness = std::max(A(r, r), 1e-12);
    const Real lower = ip.x[r] * stiffness, upper = (c[r] - ip.x[r]) * stiffness;
    if (upper < ip.upper_dual[r] && upper <= lower)
      regime[rows[r]] = FrictionRegime::kSliding;
    else if (lower < ip.lower_dual[r])
      regime[rows[r]] = FrictionRegime::kInactive;
    else
      regime[rows[r]] = FrictionRegime::kSticking;
  }
  // Fallbacks aim well below the tolerance so accepted steps keep margin.
  const Real target = 1e-3 * config.tolerance;
  LcpSolution sol = detail::finalize(p, expand(ip.x), regime);
  if (!(sol.residual <= target)) {
    LcpSolution alt = detail::finalize(p, expand(ip.x), detail::classify_by_value(p, expand(ip.x)));
    if (alt.residual < sol.residual) sol = std::move(alt);
  }
  if (!(sol.residual <= target)) {
    LcpSolution raw = detail::from_iterate(p, expand(ip.x), expand(ip.lower_dual), expand(ip.upper_dual), regime);
    if (raw.residual < sol.residual) sol = std::move(raw);
  }
  if (!(sol.residual <= target)) {
    const BoxQpResult pgs = solve_box_qp_pgs(A, w, c, opt, &ip.x);
    const Vector lam = expand(pgs.x);
    LcpSolution alt = detail::finalize(p, lam, detail::classify_by_value(p, lam));
    alt.used_fallback = true;
    if (alt.residual < sol.residual) sol = std::move(alt);
  }
  if (!(sol.residual <= config.tolerance)) {
    std::ostringstream os;
    os << "contact LCP did not converge: residual " << sol.residual << " > " << config.tolerance;
    throw SolverFailure(os.str(), sol.residual);
  }
  sol.friction_directions = std::move(p.Jf);
  sol.x11 = std::move(p.X);
  return sol;
}

// Advances the pose with the velocity held over the step and adopts the
// solved velocity for the next one: x' = x + v dt, v' = next_velocity.
inline BodyState integrate(const BodyState& state, const Vector& next_velocity, Real dt) {
  GRIDPUSH_REQUIRE(next_velocity.size() == state.pose.size() && state.velocity.size() == state.pose.size(),
                   InvalidArgument, "vector lengths do not match");
  BodyState out;
  out.pose = state.pose + dt * state.velocity;
  for (Index i = 0; i < out.pose.size(); i += 3) out.pose[i] = wrap_angle(out.pose[i]);
  out.velocity = next_velocity;
  out.time = state.time + dt;
  return out;
}

struct SimStep {
  BodyState state;  // state after the step
  LcpSolution solution;
};

inline std::vector<SimStep> simulate(const GridBody& body, const BodyState& initial,
                                     const std::vector<PushAction>& actions, const SolverConfig& config = {}) {
  GRIDPUSH_REQUIRE(!actions.empty(), InvalidArgument, "simulate needs at least one action");
  std::vector<SimStep> out;
  out.reserve(actions.size());
  BodyState state = initial;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    LcpSolution sol;
    try {
      sol = step_velocity(body, state, actions[t], config);
    } catch (const SolverFailure& e) {
      std::ostringstream os;
      os << e.what() << " at step " << t;
      throw SolverFailure(os.str(), e.residual, static_cast<Index>(t));
    }
    state = integrate(state, sol.next_velocity, actions[t].duration);
    out.push_back({state, std::move(sol)});
  }
  return out;
}

// A quasi-static push primitive: from rest, hold the push for its duration,
// move rigidly with the resulting twist, and come to rest again. The twist is
// integrated exactly so repeated pushes never stretch the layout.
inline BodyState apply_push_from_rest(const GridBody& body, const Vector& pose, const PushAction& action,
                                      const SolverConfig& config = {}, LcpSolution* solution = nullptr) {
  BodyState s{pose, Vector::Zero(pose.size()), 0.0};
  LcpSolution sol = step_velocity(body, s, action, config);
  const Index n = body.size();
  Real omega = 0.0;
  Vec2 v = Vec2::Zero();
  for (Index i = 0; i < n; ++i) {
    omega += sol.next_velocity[3 * i];
    v += sol.next_velocity.segment<2>(3 * i + 1);
  }
  omega /= static_cast<Real>(n);
  v /= static_cast<Real>(n);
  const Real T = action.duration;
  const Real a = omega * T;
  Vec2 shift = T * v;
  if (std::abs(a) > 1e-12) {
    const Real s1 = std::sin(a) / a, c1 = (1.0 - std::cos(a)) / a;
    shift = T * Vec2(s1 * v.x() - c1 * v.y(), c1 * v.x() + s1 * v.y());
  }
  PlanarPose p = planar_pose(body, pose);
  p.x += shift.x();
  p.y += shift.y();
  p.theta += a;
  BodyState out;
  out.pose = layout_pose(body, p);
  out.velocity = Vector::Zero(pose.size());
  if (solution) *solution = std::move(sol);
  return out;
}

}  // namespace gridpush

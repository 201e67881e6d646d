#pragma once

// Solvers for the box-constrained convex QP
//
//   min 0.5 x'Ax + w'x   s.t.  0 <= x <= c,
//
// whose KKT system is the friction block of the contact LCP: with
// rho = Ax + w + gamma, rho >= 0 _|_ x >= 0 and gamma >= 0 _|_ c - x >= 0.
// A is symmetric positive semidefinite and may be singular.

#include "gridpush/common.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <limits>

namespace gridpush {

struct BoxQpResult {
  Vector x;
  Vector lower_dual;  // rho
  Vector upper_dual;  // gamma
  int iterations = 0;
  bool converged = false;
  Real kkt_residual = std::numeric_limits<Real>::infinity();
};

struct BoxQpOptions {
  int max_iterations = 200;
  Real tolerance = 1e-12;
};

namespace detail {

inline Real box_qp_kkt(const Matrix& A, const Vector& w, const Vector& c, const Vector& x, Vector* rho, Vector* gamma) {
  const Vector g = A * x + w;
  // Split the gradient into the dual pair consistent with the active bounds.
  Real worst = 0.0;
  for (Index k = 0; k < x.size(); ++k) {
    const Real lo = x[k], up = c[k] - x[k];
    Real r = std::max(0.0, g[k]), gm = std::max(0.0, -g[k]);
    worst = std::max({worst, -lo, -up, r * lo, gm * up});
    if (rho) (*rho)[k] = r;
    if (gamma) (*gamma)[k] = gm;
  }
  return worst;
}

}  // namespace detail

// Mehrotra predictor-corrector interior point on the bound-constrained QP.
inline BoxQpResult solve_box_qp_interior_point(const Matrix& A, const Vector& w, const Vector& c,
                                               const BoxQpOptions& opt = {}) {
  const Index n = w.size();
  BoxQpResult res;
  res.x = Vector::Zero(n);
  res.lower_dual = Vector::Zero(n);
  res.upper_dual = Vector::Zero(n);
  if (n == 0) {
    res.converged = true;
    res.kkt_residual = 0.0;
    return res;
  }

  const Real scale = std::max({1.0, A.cwiseAbs().maxCoeff(), w.cwiseAbs().maxCoeff()});
  Vector x = 0.5 * c;
  Vector zl = Vector::Constant(n, scale), zu = Vector::Constant(n, scale);
  auto slack_up = [&](const Vector& xx) -> Vector { return c - xx; };

  Eigen::LDLT<Matrix> ldlt;
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    const Vector su = slack_up(x);
    const Vector rd = A * x + w - zl + zu;
    const Real mu = (x.dot(zl) + su.dot(zu)) / (2.0 * static_cast<Real>(n));
    if (rd.cwiseAbs().maxCoeff() <= opt.tolerance * scale && mu <= opt.tolerance * scale) {
      res.converged = true;
      break;
    }

    Matrix H = A;
    H.diagonal() += zl.cwiseQuotient(x) + zu.cwiseQuotient(su);
    ldlt.compute(H);

    auto direction = [&](const Vector& cl, const Vector& cu, Vector& dx, Vector& dzl, Vector& dzu) {
      // cl = target for x.*zl, cu = target for su.*zu (complementarity rhs).
      const Vector rhs = -rd + (cl - x.cwiseProduct(zl)).cwiseQuotient(x) - (cu - su.cwiseProduct(zu)).cwiseQuotient(su);
      dx = ldlt.solve(rhs);
      dzl = (cl - x.cwiseProduct(zl) - zl.cwiseProduct(dx)).cwiseQuotient(x);
      dzu = (cu - su.cwiseProduct(zu) + zu.cwiseProduct(dx)).cwiseQuotient(su);
    };
    auto max_step = [&](const Vector& dx, const Vector& dzl, const Vector& dzu) {
      Real a = 1.0;
      for (Index k = 0; k < n; ++k) {
        if (dx[k] < 0) a = std::min(a, -x[k] / dx[k]);
        if (dx[k] > 0) a = std::min(a, su[k] / dx[k]);
        if (dzl[k] < 0) a = std::min(a, -zl[k] / dzl[k]);
        if (dzu[k] < 0) a = std::min(a, -zu[k] / dzu[k]);
      }
      return a;
    };

    Vector dx, dzl, dzu;
    direction(Vector::Zero(n), Vector::Zero(n), dx, dzl, dzu);
    const Real a_aff = max_step(dx, dzl, dzu);
    const Vector x_aff = x + a_aff * dx;
    const Real mu_aff = (x_aff.dot(zl + a_aff * dzl) + (c - x_aff).dot(zu + a_aff * dzu)) / (2.0 * static_cast<Real>(n));
    const Real sigma = std::pow(mu_aff / mu, 3);

    const Vector cl = Vector::Constant(n, sigma * mu) - dx.cwiseProduct(dzl);
    const Vector cu = Vector::Constant(n, sigma * mu) + dx.cwiseProduct(dzu);
    direction(cl, cu, dx, dzl, dzu);
    const Real a = std::min(1.0, 0.995 * max_step(dx, dzl, dzu));
    x += a * dx;
    zl += a * dzl;
    zu += a * dzu;
  }
  res.x = x;
  res.lower_dual = zl;
  res.upper_dual = zu;
  res.kkt_residual = detail::box_qp_kkt(A, w, c, x, nullptr, nullptr);
  return res;
}

// Projected Gauss-Seidel sweeps; rows with a zero diagonal are left at 0.
inline BoxQpResult solve_box_qp_pgs(const Matrix& A, const Vector& w, const Vector& c, const BoxQpOptions& opt = {},
                                    const Vector* warm_start = nullptr) {
  const Index n = w.size();
  BoxQpResult res;
  res.x = warm_start ? Vector(warm_start->cwiseMax(0.0).cwiseMin(c)) : Vector(Vector::Zero(n));
  res.lower_dual = Vector::Zero(n);
  res.upper_dual = Vector::Zero(n);
  if (n == 0) {
    res.converged = true;
    res.kkt_residual = 0.0;
    return res;
  }
  const Real scale = std::max({1.0, A.cwiseAbs().maxCoeff(), w.cwiseAbs().maxCoeff()});
  const int sweeps = opt.max_iterations * 50;
  for (int it = 0; it < sweeps; ++it) {
    Real change = 0.0;
    for (Index k = 0; k < n; ++k) {
      const Real d = A(k, k);
      if (d <= 0.0) continue;
      const Real g = A.row(k).dot(res.x) + w[k];
      const Real next = std::clamp(res.x[k] - g / d, 0.0, c[k]);
      change = std::max(change, std::abs(next - res.x[k]));
      res.x[k] = next;
    }
    res.iterations = it + 1;
    if (change <= opt.tolerance * scale) break;
  }
  res.kkt_residual = detail::box_qp_kkt(A, w, c, res.x, &res.lower_dual, &res.upper_dual);
  res.converged = res.kkt_residual <= std::sqrt(opt.tolerance) * scale;
  return res;
}

}  // namespace gridpush

#pragma once

// Shared scalar/matrix aliases, error types and seeding helpers.

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace gridpush {

using Real = double;
using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr Real kPi = std::numbers::pi;

// Velocity-norm floor used when normalizing per-cell linear velocities.
inline constexpr Real kVelocityEpsilon = 1e-6;
// Angular rates at or below this magnitude count as zero for sign().
inline constexpr Real kAngularRateEpsilon = 1e-9;

//------------------------------------------------------------------------------
// Errors
//------------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

// The body description violates a GridBody invariant.
struct InvalidBody : Error {
  using Error::Error;
};

// The contact LCP could not be solved to tolerance.
struct SolverFailure : Error {
  SolverFailure(const std::string& what, Real residual, Index step = -1)
      : Error(what), residual(residual), step(step) {}
  Real residual;
  Index step;  // failing step within a simulate() call, -1 if not applicable
};

struct InsufficientExcitation : Error {
  InsufficientExcitation() : Error("insufficient excitation: dataset has no moving steps") {}
};

struct PlanningFailure : Error {
  PlanningFailure(const std::string& what, Index explored = 0) : Error(what), explored(explored) {}
  Index explored;
};

#define GRIDPUSH_REQUIRE(cond, ExceptionType, msg) \
  do {                                             \
    if (!(cond)) throw ExceptionType(msg);         \
  } while (0)

//------------------------------------------------------------------------------
// Small numeric helpers
//------------------------------------------------------------------------------

// Wraps an angle to (-pi, pi].
inline Real wrap_angle(Real a) {
  Real r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

inline Real sign_with_deadzone(Real v, Real eps = kAngularRateEpsilon) {
  if (v > eps) return 1.0;
  if (v < -eps) return -1.0;
  return 0.0;
}

inline Vec2 rotate(const Vec2& v, Real theta) {
  const Real c = std::cos(theta), s = std::sin(theta);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

//------------------------------------------------------------------------------
// Seeding: every phase of an experiment derives its own stream from one root.
//------------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  return splitmix64(root ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

}  // namespace gridpush

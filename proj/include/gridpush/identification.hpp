#pragma once

// Projected gradient descent on per-cell mass and friction from recorded
// pushes, plus held-out evaluation and random exploration pushes.
//
// Updates run in normalized coordinates: masses divided by m_max, friction
// by mu_max and the loss by the cell width, so one learning rate suits bodies
// of any scale.

#include "gridpush/contour.hpp"
#include "gridpush/diff_engine.hpp"

#include <chrono>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

namespace gridpush {

enum class InitMode : unsigned char { kUniformRandom, kGiven };

struct IdentConfig {
  Real learning_rate = 0.01;
  Real m_max = 1.0;
  Real mu_max = 1.0;
  int epochs = 50;
  Real timeout_seconds = std::numeric_limits<Real>::infinity();
  InitMode init = InitMode::kUniformRandom;
  Vector init_mass;      // used with InitMode::kGiven
  Vector init_friction;  // used with InitMode::kGiven
  std::uint64_t seed = 0;
  // One update per epoch from the summed gradient instead of one per step.
  bool batch = false;
  GradientMode gradient = GradientMode::kSaturated;
  // After an epoch that raises the training loss, return to the best
  // parameters and halve the rate; after one that lowers it, grow the rate.
  bool adaptive_rate = true;
  Real rate_growth = 1.2;
  Real rate_cut = 0.5;
  // Forward passes over single trajectories, training and bookkeeping
  // together. Zero means unlimited.
  Index simulation_budget = 0;
  SolverConfig solver;
};

struct IdentResult {
  GridBody body;                   // best parameters seen
  std::vector<Real> loss_history;  // training loss at init and after every epoch
  Real best_loss = std::numeric_limits<Real>::infinity();
  int best_epoch = 0;
  int epochs_run = 0;
  Index simulations = 0;
  bool timed_out = false;
  Index skipped_steps = 0;  // updates dropped because the contact solve failed
};

// Lower mass bound that keeps the mass matrix invertible.
inline Real mass_floor(Real m_max) { return 1e-4 * m_max; }

inline void project_parameters(Vector& mass, Vector& friction, Real m_max, Real mu_max) {
  mass = mass.cwiseMax(mass_floor(m_max)).cwiseMin(m_max);
  friction = friction.cwiseMax(0.0).cwiseMin(mu_max);
}

inline bool has_moving_transition(const Dataset& data) {
  for (const auto& rec : data)
    for (std::size_t t = 0; t + 2 < rec.state_count(); ++t)
      if (is_moving(rec.velocities[t])) return true;
  return false;
}

// Called after every epoch with the epoch number, the training loss and the
// current parameters.
using EpochCallback = std::function<void(int, Real, const GridBody&)>;

inline IdentResult identify(const GridBody& geometry, const Dataset& data, const IdentConfig& cfg,
                            const EpochCallback& on_epoch = {}) {
  GRIDPUSH_REQUIRE(cfg.learning_rate > 0.0, InvalidArgument, "learning rate must be positive");
  GRIDPUSH_REQUIRE(cfg.m_max > 0.0 && cfg.mu_max > 0.0, InvalidArgument, "parameter bounds must be positive");
  check_dataset(geometry, data);
  if (!has_moving_transition(data)) throw InsufficientExcitation();

  const Index n = geometry.size();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<Real>(std::chrono::steady_clock::now() - start).count(); };

  Vector mass, friction;
  if (cfg.init == InitMode::kGiven) {
    GRIDPUSH_REQUIRE(cfg.init_mass.size() == n && cfg.init_friction.size() == n, InvalidArgument,
                     "initial parameters must have one entry per cell");
    mass = cfg.init_mass;
    friction = cfg.init_friction;
  } else {
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x1d));
    std::uniform_real_distribution<Real> u(0.2, 0.8);
    mass = Vector::Constant(n, u(rng) * cfg.m_max);
    friction = Vector::Constant(n, u(rng) * cfg.mu_max);
  }
  project_parameters(mass, friction, cfg.m_max, cfg.mu_max);

  GridBody body = geometry.with_bounds_and_parameters({cfg.m_max, cfg.mu_max}, mass, friction);
  const Real w = body.cell_width();
  const Index per_pass = static_cast<Index>(data.size());
  const LossOptions all{false, cfg.solver};

  IdentResult res;
  auto budget_left = [&](Index cost) {
    return cfg.simulation_budget <= 0 || res.simulations + cost <= cfg.simulation_budget;
  };
  // A solve failure at the current parameters makes them unusable, which
  // the epoch logic treats like an infinite loss.
  auto evaluate_training = [&] {
    res.simulations += per_pass;
    try {
      return loss(body, data, all).value;
    } catch (const SolverFailure&) {
      return std::numeric_limits<Real>::infinity();
    }
  };
  auto step_gradient = [&](std::size_t r, std::size_t t) -> std::optional<GradientPair> {
    try {
      return transition_gradient(body, evaluate_transition(body, data[r], r, t, cfg.solver), cfg.gradient);
    } catch (const SolverFailure&) {
      ++res.skipped_steps;
      return std::nullopt;
    }
  };
  Real rate = cfg.learning_rate;
  auto apply = [&](const GradientPair& g, const std::string& where) {
    const Vector dm = -rate * cfg.m_max * (g.d_mass * (cfg.m_max / w));
    const Vector df = -rate * cfg.mu_max * (g.d_friction * (cfg.mu_max / w));
    if (!dm.allFinite() || !df.allFinite()) throw Error("non-finite parameter update at " + where);
    mass += dm;
    friction += df;
    project_parameters(mass, friction, cfg.m_max, cfg.mu_max);
    body.set_parameters(mass, friction);
  };

  if (!budget_left(per_pass)) throw InvalidArgument("simulation budget too small for one training pass");
  res.simulations += per_pass;
  res.best_loss = loss(body, data, all).value;
  res.loss_history.push_back(res.best_loss);
  res.body = body;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (!budget_left(2 * per_pass)) break;
    if (elapsed() > cfg.timeout_seconds) {
      res.timed_out = true;
      break;
    }
    if (cfg.batch) {
      GradientPair total{Vector::Zero(n), Vector::Zero(n)};
      for (std::size_t r = 0; r < data.size(); ++r) {
        for (std::size_t t = 0; t + 2 < data[r].state_count(); ++t) {
          if (!is_moving(data[r].velocities[t])) continue;
          const auto g = step_gradient(r, t);
          if (!g) continue;
          total.d_mass += g->d_mass;
          total.d_friction += g->d_friction;
        }
      }
      apply(total, "epoch " + std::to_string(epoch));
    } else {
      for (std::size_t r = 0; r < data.size(); ++r) {
        for (std::size_t t = 0; t + 2 < data[r].state_count(); ++t) {
          if (!is_moving(data[r].velocities[t])) continue;
          const auto g = step_gradient(r, t);
          if (!g) continue;
          std::ostringstream where;
          where << "trajectory " << r << " step " << t;
          apply(*g, where.str());
        }
      }
    }
    res.simulations += per_pass;
    const Real l = evaluate_training();
    res.loss_history.push_back(l);
    res.epochs_run = epoch;
    if (l < res.best_loss) {
      res.best_loss = l;
      res.best_epoch = epoch;
      res.body = body;
      if (cfg.adaptive_rate) rate = std::min(rate * cfg.rate_growth, 10.0 * cfg.learning_rate);
    } else if (cfg.adaptive_rate) {
      rate *= cfg.rate_cut;
      body = res.body;
      mass = body.mass();
      friction = body.friction();
    }
    if (on_epoch) on_epoch(epoch, l, body);
  }
  return res;
}

struct EvalReport {
  LossReport loss;
  Real mean_cell_error = 0.0;  // meters per cell per transition
  Index transitions = 0;
};

inline EvalReport evaluate(const GridBody& body, const Dataset& heldout, const SolverConfig& solver = {}) {
  GRIDPUSH_REQUIRE(!heldout.empty(), InvalidArgument, "held-out set is empty");
  EvalReport rep;
  rep.loss = loss(body, heldout, {false, solver});
  rep.transitions = rep.loss.per_step.size();
  if (rep.transitions > 0) rep.mean_cell_error = rep.loss.value / static_cast<Real>(rep.transitions * body.size());
  return rep;
}

//------------------------------------------------------------------------------
// Exploration
//------------------------------------------------------------------------------

// Push force scaled to the largest friction a body of n cells could have.
inline Real exploration_force(Index n, Real m_max, Real mu_max, Real dt, Real scale = 0.6) {
  return scale * static_cast<Real>(n) * m_max * mu_max / dt;
}

// k random pushes on outer cells along inward face normals, expressed in the
// body frame (heading 0). The cell is drawn uniformly, then one of its outer
// faces.
inline std::vector<PushAction> explore(const GridBody& body, Index k, std::uint64_t seed, Real magnitude,
                                       Real dt = 0.05) {
  GRIDPUSH_REQUIRE(k >= 1, InvalidArgument, "exploration needs at least one push");
  GRIDPUSH_REQUIRE(magnitude > 0.0 && dt > 0.0, InvalidArgument, "push magnitude and duration must be positive");
  const auto cells = outer_cells(body);
  const auto faces = outer_contour(body).faces;
  std::mt19937_64 rng(derive_seed(seed, 0xe1));
  std::vector<PushAction> out;
  for (Index j = 0; j < k; ++j) {
    const Index cell = cells[std::uniform_int_distribution<std::size_t>(0, cells.size() - 1)(rng)];
    std::vector<int> options;
    for (const auto& f : faces)
      if (f.cell == cell) options.push_back(f.face);
    const int face = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
    PushAction a;
    a.contact_cell = cell;
    a.force = -magnitude * face_normal(face);
    a.duration = dt;
    out.push_back(a);
  }
  return out;
}

}  // namespace gridpush

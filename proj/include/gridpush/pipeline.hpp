#pragma once

// End-to-end experiments against a hidden-parameter ground-truth simulator:
// data generation, identification, goal selection, planning and open-loop
// execution, plus the optimizer comparison harness.

#include "gridpush/identification.hpp"
#include "gridpush/planner.hpp"

#include <chrono>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace gridpush {

struct DataOptions {
  Real noise_sigma = 0.0;  // std dev of position noise, meters
  Real magnitude = 0.0;    // zero selects exploration_force from the body's bounds
  Real force_scale = 0.6;
  Real dt = 0.05;
  int push_steps = 2;  // steps with the force applied
  int steps = 10;      // steps per trajectory, coasting included
  int retries = 5;
};

// Trajectory with a constant push for the first `push_steps` steps, then
// coasting. The body-frame force is turned to the heading at the start.
inline TrajectoryRecord push_trajectory(const GridBody& body, const BodyState& start, PushAction push,
                                        int push_steps, int steps, const SolverConfig& solver = {}) {
  GRIDPUSH_REQUIRE(steps >= 2 && push_steps >= 1 && push_steps <= steps, InvalidArgument,
                   "push profile needs 1 <= push_steps <= steps and steps >= 2");
  push.force = rotate(push.force, planar_pose(body, start.pose).theta);
  std::vector<PushAction> actions(static_cast<std::size_t>(steps), push);
  for (int t = push_steps; t < steps; ++t) actions[static_cast<std::size_t>(t)].force = Vec2::Zero();
  return record_trajectory(body, start, actions, solver);
}

// Simulates k exploration pushes on the ground truth, each starting where
// the previous one ended. A push whose solve fails is redrawn.
inline Dataset generate_dataset(const GridBody& truth, Index k, std::uint64_t seed, const DataOptions& opt = {},
                                const SolverConfig& solver = {}, Index* simulations = nullptr) {
  GRIDPUSH_REQUIRE(k >= 2, InvalidArgument, "need at least two pushes for a train/test split");
  GRIDPUSH_REQUIRE(opt.noise_sigma >= 0.0, InvalidArgument, "noise sigma must be non-negative");
  const Real magnitude = opt.magnitude > 0.0 ? opt.magnitude
                                             : exploration_force(truth.size(), truth.bounds().m_max,
                                                                 truth.bounds().mu_max, opt.dt, opt.force_scale);
  SolverConfig cfg = solver;
  cfg.dt = opt.dt;
  const auto pushes = explore(truth, k, seed, magnitude, opt.dt);
  std::mt19937_64 noise_rng(derive_seed(seed, 0x401e));
  std::normal_distribution<Real> noise(0.0, 1.0);

  Dataset data;
  BodyState state = initial_state(truth);
  for (Index j = 0; j < k; ++j) {
    std::optional<TrajectoryRecord> rec;
    PushAction push = pushes[static_cast<std::size_t>(j)];
    for (int attempt = 0; !rec; ++attempt) {
      try {
        if (simulations) ++*simulations;
        rec = push_trajectory(truth, state, push, opt.push_steps, opt.steps, cfg);
      } catch (const SolverFailure&) {
        if (attempt >= opt.retries) throw;
        push = explore(truth, 1, derive_seed(seed, 0x7e70000 + static_cast<std::uint64_t>(j) * 64 + attempt),
                       magnitude, opt.dt)
                   .front();
      }
    }
    state = {rec->poses.back(), rec->velocities.back(), 0.0};
    rec->name = "push_" + std::to_string(j);
    if (opt.noise_sigma > 0.0)
      for (auto& p : rec->poses)
        for (Index i = 0; i < truth.size(); ++i) {
          p[3 * i + 1] += opt.noise_sigma * noise(noise_rng);
          p[3 * i + 2] += opt.noise_sigma * noise(noise_rng);
        }
    data.push_back(std::move(*rec));
  }
  return data;
}

// First half for training, the rest held out.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& data, Real train_fraction = 0.5) {
  GRIDPUSH_REQUIRE(data.size() >= 2, InvalidArgument, "need at least two trajectories to split");
  auto cut = static_cast<std::size_t>(std::round(train_fraction * static_cast<Real>(data.size())));
  cut = std::clamp<std::size_t>(cut, 1, data.size() - 1);
  return {Dataset(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(cut)),
          Dataset(data.begin() + static_cast<std::ptrdiff_t>(cut), data.end())};
}

inline Real bounding_box_diagonal(const GridBody& body) {
  int r0 = body.cells().front().row, r1 = r0, c0 = body.cells().front().col, c1 = c0;
  for (const auto& c : body.cells()) {
    r0 = std::min(r0, c.row);
    r1 = std::max(r1, c.row);
    c0 = std::min(c0, c.col);
    c1 = std::max(c1, c.col);
  }
  return body.cell_width() * std::hypot(r1 - r0 + 1, c1 - c0 + 1);
}

//------------------------------------------------------------------------------
// Pipeline
//------------------------------------------------------------------------------

struct ExperimentSpec {
  GridBody truth;  // geometry plus hidden ground-truth parameters
  Index exploration_pushes = 10;
  DataOptions data;
  IdentConfig ident;
  // Plan with uniform parameters at the middle of the bounds instead of
  // identifying them.
  bool skip_identification = false;
  Environment env;
  PlanarPose start;
  std::optional<PlanarPose> goal;  // fixed goal; otherwise sampled from goal_region
  Polygon goal_region;
  GoalSampling goal_sampling;
  Real tolerance = 0.0;  // zero selects one cell width
  PlannerConfig planner;
  std::uint64_t seed = 0;
  std::string output_dir;
};

struct PhaseTimings {
  Real data = 0.0;
  Real identification = 0.0;
  Real goal = 0.0;
  Real planning = 0.0;
  Real execution = 0.0;
};

struct RunReport {
  bool success = false;
  bool reached = false;
  bool stable = false;
  std::string failed_stage;  // empty when every stage completed
  std::string failure;
  Real heldout_error = std::numeric_limits<Real>::quiet_NaN();  // meters per cell
  Real bbox_diagonal = 0.0;
  std::vector<Real> loss_history;
  Vector mass;
  Vector friction;
  std::optional<PlanarPose> goal;
  Real final_gap = std::numeric_limits<Real>::quiet_NaN();
  Index pushes = 0;
  Index data_simulations = 0;
  Index identification_simulations = 0;
  Index planner_simulations = 0;
  Index execution_simulations = 0;
  Index total_simulations = 0;
  Plan plan;
  PhaseTimings timings;
};

// Body the planner sees when identification is skipped.
inline GridBody uniform_assumption(const GridBody& geometry, Real m_max, Real mu_max) {
  const Index n = geometry.size();
  return geometry.with_bounds_and_parameters({m_max, mu_max}, Vector::Constant(n, 0.5 * m_max),
                                             Vector::Constant(n, 0.5 * mu_max));
}

inline RunReport run_pipeline(const ExperimentSpec& spec) {
  RunReport rep;
  rep.bbox_diagonal = bounding_box_diagonal(spec.truth);
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t) { return std::chrono::duration<Real>(clock::now() - t).count(); };
  auto finish = [&] {
    rep.total_simulations = rep.data_simulations + rep.identification_simulations + rep.planner_simulations +
                            rep.execution_simulations;
    return rep;
  };
  std::string stage;
  try {
    stage = "data";
    auto t0 = clock::now();
    SolverConfig solver = spec.ident.solver;
    const Dataset data = generate_dataset(spec.truth, spec.exploration_pushes, derive_seed(spec.seed, 1), spec.data,
                                          solver, &rep.data_simulations);
    const auto [train, test] = split_dataset(data);
    rep.timings.data = seconds_since(t0);

    stage = "identification";
    t0 = clock::now();
    GridBody model;
    if (spec.skip_identification) {
      model = uniform_assumption(spec.truth, spec.ident.m_max, spec.ident.mu_max);
    } else {
      IdentConfig cfg = spec.ident;
      cfg.seed = derive_seed(spec.seed, 2);
      const IdentResult res = identify(spec.truth, train, cfg);
      model = res.body;
      rep.loss_history = res.loss_history;
      rep.identification_simulations = res.simulations;
    }
    rep.mass = model.mass();
    rep.friction = model.friction();
    // The learned parameters may be ones the solver cannot handle on unseen
    // pushes; that leaves the error undefined but the run goes on.
    try {
      rep.heldout_error = evaluate(model, test, solver).mean_cell_error;
    } catch (const SolverFailure&) {
      rep.heldout_error = std::numeric_limits<Real>::quiet_NaN();
    }
    rep.identification_simulations += static_cast<Index>(test.size());
    rep.timings.identification = seconds_since(t0);

    stage = "goal";
    t0 = clock::now();
    spec.env.validate();
    rep.goal = spec.goal ? *spec.goal
                         : sample_stable_goal(model, spec.env, spec.goal_region, derive_seed(spec.seed, 3),
                                              spec.goal_sampling);
    rep.timings.goal = seconds_since(t0);

    stage = "planning";
    t0 = clock::now();
    PlannerConfig pcfg = spec.planner;
    pcfg.seed = derive_seed(spec.seed, 4);
    const GoalSpec goal{*rep.goal, spec.tolerance, spec.goal ? std::nullopt : std::optional<Polygon>(spec.goal_region)};
    const BodyState start = rest_state(model, spec.start);
    try {
      rep.plan = plan_push_sequence(model, spec.env, start, goal, pcfg);
    } catch (...) {
      rep.planner_simulations = rep.plan.simulator_calls;
      throw;
    }
    rep.planner_simulations = rep.plan.simulator_calls;
    rep.timings.planning = seconds_since(t0);

    // Open loop on the ground truth: the same world-frame pushes at the same
    // cells and durations.
    stage = "execution";
    t0 = clock::now();
    Vector pose = layout_pose(spec.truth, spec.start);
    rep.stable = stability_check(spec.truth, pose, spec.env, pcfg.stability_margin);
    for (const auto& a : rep.plan.actions) {
      pose = apply_push_from_rest(spec.truth, pose, a, pcfg.solver).pose;
      ++rep.execution_simulations;
      rep.stable = rep.stable && stability_check(spec.truth, pose, spec.env, pcfg.stability_margin);
    }
    rep.pushes = static_cast<Index>(rep.plan.actions.size());
    rep.final_gap = layout_gap(pose, layout_pose(spec.truth, *rep.goal));
    rep.reached = rep.final_gap <= goal_tolerance(spec.truth, goal);
    rep.success = rep.reached && rep.stable;
    rep.timings.execution = seconds_since(t0);
  } catch (const std::exception& e) {
    rep.failed_stage = stage;
    rep.failure = e.what();
    rep.success = false;
  }
  return finish();
}

//------------------------------------------------------------------------------
// Optimizer comparison
//------------------------------------------------------------------------------

enum class Optimizer : unsigned char { kAnalytical, kFiniteDiff, kRandomSearch, kWeightedSampling };

inline std::string to_string(Optimizer m) {
  switch (m) {
    case Optimizer::kAnalytical: return "analytical";
    case Optimizer::kFiniteDiff: return "finite-diff";
    case Optimizer::kRandomSearch: return "random-search";
    default: return "weighted-sampling";
  }
}

inline Optimizer optimizer_from_string(const std::string& s) {
  if (s == "analytical") return Optimizer::kAnalytical;
  if (s == "finite-diff") return Optimizer::kFiniteDiff;
  if (s == "random-search") return Optimizer::kRandomSearch;
  if (s == "weighted-sampling") return Optimizer::kWeightedSampling;
  throw InvalidArgument("unknown optimizer '" + s + "'");
}

struct CurvePoint {
  Index simulations = 0;
  Real heldout_error = 0.0;  // of the best parameters seen so far
};

struct OptimizerCurve {
  Optimizer method = Optimizer::kAnalytical;
  std::vector<CurvePoint> points;
  Real final_error() const { return points.empty() ? std::numeric_limits<Real>::quiet_NaN() : points.back().heldout_error; }
};

struct CompareOptions {
  Index budget = 50;  // forward passes over single trajectories
  Real sample_sigma = 0.3;  // weighted sampling, fraction of the bounds
  Real sigma_decay = 0.85;
  Real fd_step = 1e-3;  // finite-diff probe, fraction of the bounds
};

namespace detail {

// Parameters as fractions of their bounds.
struct Normalized {
  const GridBody& geometry;
  Real m_max, mu_max;

  GridBody body(const Vector& u) const {
    const Index n = geometry.size();
    Vector mass = u.head(n) * m_max, friction = u.tail(n) * mu_max;
    project_parameters(mass, friction, m_max, mu_max);
    return geometry.with_bounds_and_parameters({m_max, mu_max}, mass, friction);
  }
  Vector clamp(const Vector& u) const {
    Vector v = u.cwiseMax(0.0).cwiseMin(1.0);
    v.head(geometry.size()) = v.head(geometry.size()).cwiseMax(mass_floor(m_max) / m_max);
    return v;
  }
};

}  // namespace detail

// Runs each optimizer from the same seeded start under the same budget and
// records the held-out error of its best parameters against simulations
// spent. Held-out evaluation is bookkeeping and is not charged.
inline std::vector<OptimizerCurve> compare_optimizers(const GridBody& geometry, const Dataset& train,
                                                      const Dataset& test, const std::vector<Optimizer>& methods,
                                                      const IdentConfig& base, const CompareOptions& opt = {}) {
  GRIDPUSH_REQUIRE(!methods.empty(), InvalidArgument, "need at least one optimizer");
  const Index n = geometry.size();
  const Index pass = static_cast<Index>(train.size());
  const detail::Normalized norm{geometry, base.m_max, base.mu_max};
  const LossOptions lopt{false, base.solver};
  auto heldout = [&](const GridBody& b) { return evaluate(b, test, base.solver).mean_cell_error; };

  std::mt19937_64 init_rng(derive_seed(base.seed, 0x1d));
  std::uniform_real_distribution<Real> init_u(0.2, 0.8);
  Vector u0(2 * n);
  u0.head(n).setConstant(init_u(init_rng));
  u0.tail(n).setConstant(init_u(init_rng));
  u0 = norm.clamp(u0);

  std::vector<OptimizerCurve> out;
  for (Optimizer m : methods) {
    OptimizerCurve curve{m, {}};
    if (m == Optimizer::kAnalytical) {
      IdentConfig cfg = base;
      cfg.init = InitMode::kGiven;
      cfg.init_mass = norm.body(u0).mass();
      cfg.init_friction = norm.body(u0).friction();
      cfg.simulation_budget = opt.budget;
      cfg.epochs = std::numeric_limits<int>::max();
      Real best_loss = loss(norm.body(u0), train, lopt).value;
      GridBody best = norm.body(u0);
      curve.points.push_back({pass, heldout(best)});
      identify(geometry, train, cfg, [&](int epoch, Real l, const GridBody& current) {
        if (l < best_loss) {
          best_loss = l;
          best = current;
        }
        curve.points.push_back({pass * (1 + 2 * static_cast<Index>(epoch)), heldout(best)});
      });
    } else if (m == Optimizer::kFiniteDiff) {
      // Coordinate descent with one-sided difference quotients.
      Vector u = u0;
      Real l = loss(norm.body(u), train, lopt).value;
      Index spent = pass;
      Real best_loss = l;
      GridBody best = norm.body(u);
      curve.points.push_back({spent, heldout(best)});
      const Real w = geometry.cell_width();
      for (Index j = 0; spent + 2 * pass <= opt.budget; j = (j + 1) % (2 * n)) {
        Vector probe = u;
        const Real h = probe[j] + opt.fd_step <= 1.0 ? opt.fd_step : -opt.fd_step;
        probe[j] += h;
        const Real lp = loss(norm.body(probe), train, lopt).value;
        const Real slope = (lp - l) / h;
        Vector next = u;
        next[j] -= base.learning_rate * slope / w * static_cast<Real>(2 * n);
        next = norm.clamp(next);
        const Real ln = loss(norm.body(next), train, lopt).value;
        spent += 2 * pass;
        if (lp < best_loss) {
          best_loss = lp;
          best = norm.body(probe);
        }
        if (ln < best_loss) {
          best_loss = ln;
          best = norm.body(next);
        }
        if (ln <= l) {
          u = next;
          l = ln;
        } else if (lp < l) {
          u = probe;
          l = lp;
        }
        curve.points.push_back({spent, heldout(best)});
      }
    } else {
      std::mt19937_64 rng(derive_seed(base.seed, m == Optimizer::kRandomSearch ? 0x45 : 0x46));
      std::uniform_real_distribution<Real> uni(0.0, 1.0);
      std::normal_distribution<Real> gauss(0.0, 1.0);
      Vector best_u = u0;
      Real best_loss = loss(norm.body(u0), train, lopt).value;
      Index spent = pass;
      curve.points.push_back({spent, heldout(norm.body(best_u))});
      Real sigma = opt.sample_sigma;
      while (spent + pass <= opt.budget) {
        Vector cand(2 * n);
        for (Index j = 0; j < 2 * n; ++j)
          cand[j] = m == Optimizer::kRandomSearch ? uni(rng) : best_u[j] + sigma * gauss(rng);
        cand = norm.clamp(cand);
        const Real l = loss(norm.body(cand), train, lopt).value;
        spent += pass;
        if (l < best_loss) {
          best_loss = l;
          best_u = cand;
        }
        sigma *= opt.sigma_decay;
        curve.points.push_back({spent, heldout(norm.body(best_u))});
      }
    }
    out.push_back(std::move(curve));
  }
  return out;
}

}  // namespace gridpush

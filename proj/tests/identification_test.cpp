#include "generators.hpp"

#include <gtest/gtest.h>

namespace gp = gridpush;
using gp::Index;
using gp::Real;
using gp::Vector;

namespace {

gp::IdentConfig given(const gp::GridBody& b) {
  gp::IdentConfig c;
  c.init = gp::InitMode::kGiven;
  c.init_mass = b.mass();
  c.init_friction = b.friction();
  return c;
}

}  // namespace

TEST(Identify, TruthIsAFixedPoint) {
  gp::testgen::Rng rng(1);
  auto truth = gp::testgen::randomize_parameters(rng, gp::build_from_occupancy(gp::testgen::rectangle_cells(2, 2),
                                                                              0.05, 0.5, 0.5));
  const auto data = gp::generate_dataset(truth, 4, 3);
  auto cfg = given(truth);
  cfg.epochs = 3;
  const auto res = gp::identify(truth, data, cfg);
  EXPECT_LT(res.best_loss, 1e-8);
  EXPECT_EQ(res.body.mass(), truth.mass());
  EXPECT_EQ(res.body.friction(), truth.friction());
}

TEST(Identify, SingleCellReproducesHeldOutPushes) {
  auto geometry = gp::build_from_occupancy({{0, 0}}, 0.05, 0.5, 0.5);
  auto truth = geometry.with_parameters(Vector::Constant(1, 0.35), Vector::Constant(1, 0.7));
  const auto data = gp::generate_dataset(truth, 10, 5);
  const auto [train, test] = gp::split_dataset(data);
  gp::IdentConfig cfg;
  cfg.seed = 2;
  cfg.epochs = 60;
  const auto res = gp::identify(geometry, train, cfg);
  // per-cell error against the mean push displacement of the held-out set
  Real travel = 0.0;
  Index steps = 0;
  for (const auto& rec : test)
    for (std::size_t t = 0; t + 2 < rec.poses.size(); ++t, ++steps)
      travel += (gp::cell_position(rec.poses[t + 2], 0) - gp::cell_position(rec.poses[t + 1], 0)).norm();
  const Real mean_travel = travel / static_cast<Real>(steps);
  EXPECT_LT(gp::evaluate(res.body, test).mean_cell_error, 0.01 * mean_travel);
}

TEST(Identify, RecoversMassOrdering) {
  // 4x4 body whose left half (low columns) is three times heavier.
  auto geometry = gp::build_from_occupancy(gp::testgen::rectangle_cells(4, 4), 0.05, 0.5, 0.5);
  Vector m(16), f = Vector::Constant(16, 0.5);
  for (Index i = 0; i < 16; ++i) m[i] = geometry.cells()[i].col < 2 ? 0.9 : 0.3;
  auto truth = geometry.with_parameters(m, f);
  const auto data = gp::generate_dataset(truth, 10, 8);
  gp::IdentConfig cfg;
  cfg.seed = 4;
  cfg.simulation_budget = 300;
  cfg.epochs = 1000;
  const auto res = gp::identify(geometry, data, cfg);
  Real left = 0.0, right = 0.0;
  for (Index i = 0; i < 16; ++i) (geometry.cells()[i].col < 2 ? left : right) += res.body.mass()[i];
  EXPECT_GT(left, right);
}

TEST(Identify, ProjectionKeepsParametersInBoundsProperty) {
  gp::testgen::Rng rng(6);
  auto geometry = gp::build_from_occupancy(gp::testgen::rectangle_cells(2, 3), 0.05, 0.5, 0.5);
  auto truth = gp::testgen::randomize_parameters(rng, geometry);
  const auto data = gp::generate_dataset(truth, 4, 2);
  gp::IdentConfig cfg;
  cfg.learning_rate = 5.0;  // deliberately wild steps
  cfg.adaptive_rate = false;
  cfg.epochs = 6;
  cfg.m_max = 2.0;
  cfg.mu_max = 0.8;
  gp::identify(geometry, data, cfg, [&](int, Real, const gp::GridBody& b) {
    EXPECT_GE(b.mass().minCoeff(), gp::mass_floor(cfg.m_max));
    EXPECT_LE(b.mass().maxCoeff(), cfg.m_max);
    EXPECT_GE(b.friction().minCoeff(), 0.0);
    EXPECT_LE(b.friction().maxCoeff(), cfg.mu_max);
  });
}

TEST(Identify, BatchDescentProperty) {
  auto geometry = gp::build_from_occupancy({{0, 0}}, 0.05, 0.5, 0.5);
  auto truth = geometry.with_parameters(Vector::Constant(1, 0.6), Vector::Constant(1, 0.3));
  const auto data = gp::generate_dataset(truth, 4, 9);
  gp::IdentConfig cfg;
  cfg.batch = true;
  cfg.adaptive_rate = false;
  cfg.init = gp::InitMode::kGiven;
  cfg.init_mass = Vector::Constant(1, 0.2);
  cfg.init_friction = Vector::Constant(1, 0.8);
  // rate scaled against the initial gradient so each step is small
  const auto g0 = gp::gradient(geometry.with_parameters(cfg.init_mass, cfg.init_friction), data);
  const Real scale = std::max(g0.d_mass.cwiseAbs().maxCoeff(), g0.d_friction.cwiseAbs().maxCoeff()) / 0.05;
  cfg.learning_rate = 1e-3 / scale;
  cfg.epochs = 5;
  const auto res = gp::identify(geometry, data, cfg);
  ASSERT_EQ(res.loss_history.size(), 6u);
  for (std::size_t e = 1; e < res.loss_history.size(); ++e) EXPECT_LE(res.loss_history[e], res.loss_history[e - 1]);
  EXPECT_LT(res.loss_history.back(), res.loss_history.front());
}

TEST(Identify, SeededDeterminism) {
  gp::testgen::Rng rng(7);
  auto geometry = gp::build_from_occupancy(gp::testgen::rectangle_cells(2, 3), 0.05, 0.5, 0.5);
  const auto data = gp::generate_dataset(gp::testgen::randomize_parameters(rng, geometry), 4, 1);
  gp::IdentConfig cfg;
  cfg.seed = 99;
  cfg.epochs = 4;
  const auto a = gp::identify(geometry, data, cfg);
  const auto b = gp::identify(geometry, data, cfg);
  EXPECT_EQ(a.body.mass(), b.body.mass());
  EXPECT_EQ(a.body.friction(), b.body.friction());
  EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(Identify, BudgetIsRespected) {
  gp::testgen::Rng rng(8);
  auto geometry = gp::build_from_occupancy(gp::testgen::rectangle_cells(2, 2), 0.05, 0.5, 0.5);
  const auto data = gp::generate_dataset(gp::testgen::randomize_parameters(rng, geometry), 4, 1);
  gp::IdentConfig cfg;
  cfg.simulation_budget = 23;
  cfg.epochs = 1000;
  const auto res = gp::identify(geometry, data, cfg);
  EXPECT_LE(res.simulations, 23);
  cfg.simulation_budget = 1;
  EXPECT_THROW(gp::identify(geometry, data, cfg), gp::InvalidArgument);
}

TEST(Identify, RejectsStaticData) {
  auto b = gp::build_from_occupancy({{0, 0}, {0, 1}}, 0.1, 0.5, 0.5);
  gp::TrajectoryRecord rec;
  rec.poses.assign(4, gp::initial_state(b).pose);
  rec.velocities.assign(4, Vector::Zero(6));
  rec.actions.assign(3, gp::PushAction{});
  EXPECT_THROW(gp::identify(b, {rec}, {}), gp::InsufficientExcitation);
  EXPECT_THROW(gp::identify(b, {}, {}), gp::InvalidArgument);
  gp::IdentConfig bad;
  bad.learning_rate = 0.0;
  EXPECT_THROW(gp::identify(b, {rec}, bad), gp::InvalidArgument);
}

TEST(Evaluate, MeanMatchesScriptedAverage) {
  gp::testgen::Rng rng(9);
  auto geometry = gp::build_from_occupancy(gp::testgen::rectangle_cells(2, 3), 0.05, 0.5, 0.5);
  auto truth = gp::testgen::randomize_parameters(rng, geometry);
  const auto data = gp::generate_dataset(truth, 3, 4);
  auto model = gp::testgen::randomize_parameters(rng, geometry);
  Real sum = 0.0;
  Index count = 0;
  for (const auto& rec : data)
    for (std::size_t t = 0; t + 2 < rec.poses.size(); ++t) {
      const Vector v = gp::step_velocity(model, {rec.poses[t], rec.velocities[t], 0.0}, rec.actions[t]).next_velocity;
      for (Index i = 0; i < model.size(); ++i, ++count)
        sum += (gp::cell_position(rec.poses[t + 1], i) + rec.actions[t + 1].duration * v.segment<2>(3 * i + 1) -
                gp::cell_position(rec.poses[t + 2], i))
                   .norm();
    }
  const auto rep = gp::evaluate(model, data);
  EXPECT_NEAR(rep.mean_cell_error, sum / static_cast<Real>(count), 1e-14);
  EXPECT_NEAR(gp::evaluate(truth, data).mean_cell_error, 0.0, 1e-10);
  EXPECT_THROW(gp::evaluate(model, {}), gp::InvalidArgument);
}

TEST(Explore, DeterministicInwardPushesOnOuterCells) {
  gp::testgen::Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    auto b = gp::build_from_occupancy(gp::testgen::random_polyomino(rng, gp::testgen::uniform_int(rng, 1, 20)), 0.05,
                                      0.5, 0.5);
    const auto seed = rng();
    const auto a = gp::explore(b, 5, seed, 2.0);
    const auto c = gp::explore(b, 5, seed, 2.0);
    ASSERT_EQ(a.size(), 5u);
    const auto outer = gp::outer_cells(b);
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_EQ(a[k].contact_cell, c[k].contact_cell);
      EXPECT_EQ(a[k].force, c[k].force);
      EXPECT_NE(std::find(outer.begin(), outer.end(), a[k].contact_cell), outer.end());
      EXPECT_NEAR(a[k].force.norm(), 2.0, 1e-12);
      // the face opposite the push direction must be exposed: the force
      // points against an outward normal of the contact cell
      const gp::GridCoord cell = b.cells()[a[k].contact_cell];
      const gp::Vec2 out = -a[k].force.normalized();
      const gp::GridCoord beyond{cell.row + static_cast<int>(std::lround(out.x())),
                                 cell.col + static_cast<int>(std::lround(out.y()))};
      EXPECT_FALSE(b.index_of(beyond).has_value());
      EXPECT_LT(a[k].force.dot(out), 0.0);
    }
  }
  EXPECT_THROW(gp::explore(gp::build_from_occupancy({{0, 0}}, 0.1, 0.5, 0.5), 0, 1, 1.0), gp::InvalidArgument);
}

#include "generators.hpp"

#include <gtest/gtest.h>

namespace gp = gridpush;
using gp::GridCoord;
using gp::Index;
using gp::Real;
using gp::Vector;

TEST(BuildFromOccupancy, SingleCellHasNoJoints) {
  auto b = gp::build_from_occupancy({{0, 0}}, 0.1, 0.5, 0.5);
  EXPECT_EQ(b.size(), 1);
  EXPECT_TRUE(b.adjacency().empty());
}

TEST(BuildFromOccupancy, SquareHasFourPairs) {
  auto b = gp::build_from_occupancy(gp::testgen::rectangle_cells(2, 2), 0.1, 0.5, 0.5);
  EXPECT_EQ(b.size(), 4);
  EXPECT_EQ(b.adjacency().size(), 4u);
}

TEST(BuildFromOccupancy, LShapeHasTwoPairs) {
  auto b = gp::build_from_occupancy({{0, 0}, {0, 1}, {1, 0}}, 0.1, 0.5, 0.5);
  ASSERT_EQ(b.adjacency().size(), 2u);
  for (const auto& p : b.adjacency()) EXPECT_LT(p.first, p.second);
}

TEST(BuildFromOccupancy, RejectsBadInput) {
  EXPECT_THROW(gp::build_from_occupancy({}, 0.1, 0.5, 0.5), gp::InvalidBody);
  EXPECT_THROW(gp::build_from_occupancy({{0, 0}}, 0.0, 0.5, 0.5), gp::InvalidBody);
  EXPECT_THROW(gp::build_from_occupancy({{0, 0}, {0, 0}}, 0.1, 0.5, 0.5), gp::InvalidBody);
  try {
    gp::build_from_occupancy({{0, 0}, {2, 2}}, 0.1, 0.5, 0.5);
    FAIL() << "disconnected occupancy accepted";
  } catch (const gp::InvalidBody& e) {
    EXPECT_NE(std::string(e.what()).find("(2,2)"), std::string::npos);
  }
}

TEST(BuildFromOccupancy, ParametersOutsideBoundsRejected) {
  auto b = gp::build_from_occupancy({{0, 0}, {0, 1}}, 0.1, 0.5, 0.5);
  EXPECT_THROW(b.with_parameters(Vector::Constant(2, 1.5), Vector::Constant(2, 0.5)), gp::InvalidBody);
  EXPECT_THROW(b.with_parameters(Vector::Constant(2, 0.0), Vector::Constant(2, 0.5)), gp::InvalidBody);
  EXPECT_THROW(b.with_parameters(Vector::Constant(2, 0.5), Vector::Constant(2, -0.1)), gp::InvalidBody);
  EXPECT_THROW(b.with_parameters(Vector::Constant(3, 0.5), Vector::Constant(3, 0.5)), gp::InvalidBody);
}

TEST(BuildFromOccupancy, PairCountMatchesBruteForce) {
  gp::testgen::Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto occ = gp::testgen::random_polyomino(rng, gp::testgen::uniform_int(rng, 1, 30));
    auto b = gp::build_from_occupancy(occ, 0.05, 0.5, 0.5);
    std::size_t expect = 0;
    for (const auto& a : occ)
      for (const auto& c : occ) expect += (std::abs(a.row - c.row) + std::abs(a.col - c.col) == 1);
    EXPECT_EQ(b.adjacency().size(), expect / 2);
  }
}

TEST(MassMatrix, SingleCell) {
  auto b = gp::build_from_occupancy({{0, 0}}, 0.1, 1.2, 0.5, {2.0, 1.0});
  const Vector d = gp::mass_diagonal(b);
  EXPECT_NEAR(d[0], 1.2 * 0.01 / 6.0, 1e-15);
  EXPECT_NEAR(d[0], 0.002, 1e-12);
  EXPECT_DOUBLE_EQ(d[1], 1.2);
  EXPECT_DOUBLE_EQ(d[2], 1.2);
}

TEST(MassMatrix, TwoCells) {
  auto b = gp::build_from_occupancy({{0, 0}, {0, 1}}, 1.0, 1.0, 0.5, {2.0, 1.0});
  b = b.with_parameters((Vector(2) << 1.0, 2.0).finished(), Vector::Constant(2, 0.5));
  Vector expect(6);
  expect << 1.0 / 6.0, 1.0, 1.0, 1.0 / 3.0, 2.0, 2.0;
  EXPECT_LT((gp::mass_diagonal(b) - expect).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((gp::mass_matrix(b).diagonal() - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AdjacencyJacobian, PointVelocityBlocks) {
  Eigen::Matrix<Real, 2, 3> expect;
  expect << 0, 1, 0, 0.025, 0, 1;
  EXPECT_LT((gp::point_velocity_block(0.0, {0.025, 0.0}) - expect).cwiseAbs().maxCoeff(), 1e-15);
  expect << -1, 1, 0, 0, 0, 1;
  EXPECT_LT((gp::point_velocity_block(gp::kPi / 2, {1.0, 0.0}) - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AdjacencyJacobian, ShapeAndRows) {
  auto b = gp::build_from_occupancy({{0, 0}, {1, 0}}, 0.05, 0.5, 0.5);
  const Vector pose = gp::initial_state(b).pose;
  const gp::Matrix J = gp::adjacency_jacobian(b, pose);
  ASSERT_EQ(J.rows(), 3);
  ASSERT_EQ(J.cols(), 6);
  gp::Matrix expect(3, 6);
  expect << 0, 1, 0, 0, -1, 0,
            0.025, 0, 1, 0.025, 0, -1,
            1, 0, 0, -1, 0, 0;
  EXPECT_LT((J - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AdjacencyJacobian, AnnihilatesRigidMotionProperty) {
  gp::testgen::Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto occ = gp::testgen::random_polyomino(rng, gp::testgen::uniform_int(rng, 2, 20));
    auto b = gp::build_from_occupancy(occ, gp::testgen::uniform(rng, 0.01, 0.2), 0.5, 0.5);
    const gp::PlanarPose p{gp::testgen::uniform(rng, -1, 1), gp::testgen::uniform(rng, -1, 1),
                           gp::testgen::uniform(rng, -gp::kPi, gp::kPi)};
    const Vector pose = gp::layout_pose(b, p);
    const Vector v = gp::rigid_velocity(pose, gp::testgen::uniform(rng, -3, 3),
                                        {gp::testgen::uniform(rng, -1, 1), gp::testgen::uniform(rng, -1, 1)},
                                        {gp::testgen::uniform(rng, -1, 1), gp::testgen::uniform(rng, -1, 1)});
    EXPECT_LT((gp::adjacency_jacobian(b, pose) * v).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(AdjacencyJacobian, DetectsRelativeMotion) {
  auto b = gp::build_from_occupancy({{0, 0}, {0, 1}}, 0.1, 0.5, 0.5);
  const Vector pose = gp::initial_state(b).pose;
  Vector v = Vector::Zero(6);
  v[4] = 1.0;  // second cell slides along x alone
  EXPECT_GT((gp::adjacency_jacobian(b, pose) * v).norm(), 0.5);
  v.setZero();
  v[3] = 1.0;  // second cell spins alone
  EXPECT_GT((gp::adjacency_jacobian(b, pose) * v).norm(), 0.5);
}

TEST(FrictionJacobian, Examples) {
  auto b = gp::build_from_occupancy({{0, 0}}, 0.1, 0.5, 0.5);
  gp::Matrix J = gp::friction_jacobian(b, Vector((Vector(3) << 0.0, 1.0, 0.0).finished()));
  gp::Matrix expect(2, 3);
  expect << 0, 0, 0, 0, 1, 0;
  EXPECT_LT((J - expect).cwiseAbs().maxCoeff(), 1e-15);

  J = gp::friction_jacobian(b, Vector((Vector(3) << -2.0, 3.0, 4.0).finished()));
  expect << 1, 0, 0, 0, 0.6, 0.8;
  EXPECT_LT((J - expect).cwiseAbs().maxCoeff(), 1e-15);

  J = gp::friction_jacobian(b, Vector::Zero(3));
  EXPECT_EQ(J.cwiseAbs().maxCoeff(), 0.0);
}

TEST(FrictionJacobian, UnitRowsWhenMovingProperty) {
  gp::testgen::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = gp::testgen::uniform_int(rng, 1, 12);
    auto b = gp::build_from_occupancy(gp::testgen::compact_cells(n), 0.05, 0.5, 0.5);
    Vector v(3 * n);
    for (Index k = 0; k < v.size(); ++k) v[k] = gp::testgen::uniform(rng, -1, 1);
    const gp::Matrix J = gp::friction_jacobian(b, v);
    for (Index i = 0; i < n; ++i) {
      EXPECT_NEAR(std::abs(J(2 * i, 3 * i)), 1.0, 1e-15);
      EXPECT_NEAR(J.row(2 * i + 1).norm(), 1.0, 1e-12);
      // linear row aligns with the cell's own velocity
      EXPECT_GT(J.row(2 * i + 1).dot(v), 0.0);
    }
  }
}

TEST(CenterOfMass, Examples) {
  auto sq = gp::build_from_occupancy(gp::testgen::rectangle_cells(2, 2), 1.0, 0.5, 0.5);
  const gp::Vec2 c = gp::center_of_mass(sq, gp::initial_state(sq).pose);
  EXPECT_NEAR(c.x(), 0.5, 1e-15);
  EXPECT_NEAR(c.y(), 0.5, 1e-15);

  auto bar = gp::build_from_occupancy({{0, 0}, {1, 0}}, 1.0, 0.5, 0.5, {3.0, 1.0});
  bar = bar.with_parameters((Vector(2) << 1.0, 3.0).finished(), Vector::Constant(2, 0.5));
  const gp::Vec2 d = gp::center_of_mass(bar, gp::initial_state(bar).pose);
  EXPECT_NEAR(d.x(), 0.75, 1e-15);
  EXPECT_NEAR(d.y(), 0.0, 1e-15);
}

TEST(Poses, LayoutRoundTripProperty) {
  gp::testgen::Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto b = gp::build_from_occupancy(gp::testgen::random_polyomino(rng, gp::testgen::uniform_int(rng, 1, 20)),
                                      0.03, 0.5, 0.5);
    const gp::PlanarPose p{gp::testgen::uniform(rng, -1, 1), gp::testgen::uniform(rng, -1, 1),
                           gp::testgen::uniform(rng, -3.1, 3.1)};
    const gp::PlanarPose q = gp::planar_pose(b, gp::layout_pose(b, p));
    EXPECT_NEAR(q.x, p.x, 1e-12);
    EXPECT_NEAR(q.y, p.y, 1e-12);
    EXPECT_NEAR(q.theta, p.theta, 1e-12);
  }
}

TEST(Poses, InitialStateUsesGridPositions) {
  auto b = gp::build_from_occupancy({{0, 0}, {0, 1}, {1, 1}}, 0.1, 0.5, 0.5);
  const auto s = gp::initial_state(b);
  EXPECT_NEAR(s.pose[3 * 2 + 1], 0.1, 1e-15);
  EXPECT_NEAR(s.pose[3 * 2 + 2], 0.1, 1e-15);
  EXPECT_EQ(s.velocity.norm(), 0.0);
}

TEST(ExternalForce, PlacesWrenchOnContactCell) {
  auto b = gp::build_from_occupancy({{0, 0}, {0, 1}}, 0.1, 0.5, 0.5);
  gp::PushAction a;
  a.contact_cell = 1;
  a.force = {2.0, -1.0};
  a.torque = 0.5;
  const Vector F = gp::external_force(b, a);
  EXPECT_EQ(F.head(3).norm(), 0.0);
  EXPECT_EQ(F[3], 0.5);
  EXPECT_EQ(F[4], 2.0);
  EXPECT_EQ(F[5], -1.0);
  a.contact_cell = 2;
  EXPECT_THROW(gp::external_force(b, a), gp::InvalidArgument);
}

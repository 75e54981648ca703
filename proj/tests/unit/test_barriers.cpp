#include <gtest/gtest.h>

#include <random>

#include "hwsafe/planner/barrier.hpp"
#include "support/scenes.hpp"

using namespace hwsafe;
using hwsafe::testing::add_vehicle;
using hwsafe::testing::ego_only;
using hwsafe::testing::empty_scenario;

TEST(Barriers, EmptyRoadHasNone)
{
  const auto cfg = empty_scenario();
  const auto w   = ego_only(0.0, 1, 20.0, cfg);
  EXPECT_TRUE(build_barriers(w, cfg, 1, BarrierConfig{}, 10).empty());
}

TEST(Barriers, LeaderValueByHand)
{
  const auto cfg = empty_scenario();
  auto w         = ego_only(0.0, 1, 10.0, cfg);
  add_vehicle(w, cfg, 30.0, cfg.road().lane_center(1), 10.0);
  const auto bs = build_barriers(w, cfg, 1, BarrierConfig{}, 10);
  ASSERT_EQ(bs.size(), 1u);
  EXPECT_EQ(bs[0].kind, BarrierKind::Longitudinal);
  EXPECT_EQ(bs[0].sign, -1.0);
  EXPECT_DOUBLE_EQ(bs[0].value(w.ego.vec(), 0), 19.0);
}

TEST(Barriers, ConstantVelocityPrediction)
{
  const auto cfg = empty_scenario();
  auto w         = ego_only(0.0, 1, 10.0, cfg);
  add_vehicle(w, cfg, 30.0, cfg.road().lane_center(1), 12.0);
  const auto bs = build_barriers(w, cfg, 1, BarrierConfig{}, 10);
  ASSERT_EQ(bs[0].obstacle_pos.size(), 11u);
  for (int k = 0; k <= 10; ++k) { EXPECT_NEAR(bs[0].obstacle_pos[k], 30.0 + 12.0 * 0.2 * k, 1e-12); }
}

TEST(Barriers, OnlyNearestLeaderInLane)
{
  const auto cfg = empty_scenario();
  auto w         = ego_only(0.0, 1, 10.0, cfg);
  add_vehicle(w, cfg, 60.0, 4.0, 10.0);
  const int near = add_vehicle(w, cfg, 40.0, 4.0, 10.0).id;
  add_vehicle(w, cfg, -30.0, 4.0, 10.0);
  const auto bs = build_barriers(w, cfg, 1, BarrierConfig{}, 10);
  ASSERT_EQ(bs.size(), 1u);
  EXPECT_EQ(bs[0].obstacle_id, near);
}

TEST(Barriers, TargetLaneLeaderDuringLaneChange)
{
  const auto cfg = empty_scenario();
  auto w         = ego_only(0.0, 1, 10.0, cfg);
  add_vehicle(w, cfg, 40.0, 4.0, 10.0);
  add_vehicle(w, cfg, 50.0, 0.0, 10.0);
  EXPECT_EQ(build_barriers(w, cfg, 1, BarrierConfig{}, 10).size(), 1u);
  const auto bs = build_barriers(w, cfg, 0, BarrierConfig{}, 10);
  ASSERT_EQ(bs.size(), 2u);
  EXPECT_EQ(bs[1].kind, BarrierKind::Longitudinal);
}

TEST(Barriers, AlongsideTargetVehicleIsLateralOnly)
{
  const auto cfg = empty_scenario();
  auto w         = ego_only(0.0, 1, 20.0, cfg);
  add_vehicle(w, cfg, 2.0, 0.0, 20.0);
  const auto bs = build_barriers(w, cfg, 0, BarrierConfig{}, 10);
  ASSERT_EQ(bs.size(), 1u);
  EXPECT_EQ(bs[0].kind, BarrierKind::Lateral);
}

TEST(Barriers, TargetLeaderInsideRoiAlsoLateral)
{
  const auto cfg = empty_scenario();
  auto w         = ego_only(0.0, 1, 20.0, cfg);
  add_vehicle(w, cfg, 10.0, 0.0, 20.0);
  const auto bs = build_barriers(w, cfg, 0, BarrierConfig{}, 10);
  ASSERT_EQ(bs.size(), 2u);
  EXPECT_EQ(bs[0].kind, BarrierKind::Longitudinal);
  EXPECT_EQ(bs[1].kind, BarrierKind::Lateral);
}

TEST(Barriers, RoiBoundary)
{
  const auto cfg = empty_scenario();
  const BarrierConfig bc;
  for (double gap : {bc.r_roi + 0.1, bc.r_roi - 0.1}) {
    auto w = ego_only(0.0, 1, 10.0, cfg);
    add_vehicle(w, cfg, -gap, 0.0, 10.0);
    const auto bs = build_barriers(w, cfg, 1, bc, 10);
    if (gap > bc.r_roi) {
      EXPECT_TRUE(bs.empty());
    } else {
      ASSERT_EQ(bs.size(), 1u);
      EXPECT_EQ(bs[0].kind, BarrierKind::Lateral);
      EXPECT_EQ(bs[0].sign, 1.0);
      EXPECT_DOUBLE_EQ(bs[0].value(w.ego.vec(), 0), 4.0 - bc.r_lat);
    }
  }
}

TEST(Barriers, NonAdjacentLaneIgnored)
{
  const auto cfg = empty_scenario();
  auto w         = ego_only(0.0, 0, 10.0, cfg);
  add_vehicle(w, cfg, 2.0, 8.0, 10.0);
  EXPECT_TRUE(build_barriers(w, cfg, 0, BarrierConfig{}, 10).empty());
}

TEST(Barriers, ConfigRejectsBadRate)
{
  BarrierConfig c;
  c.gamma_h = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.gamma_h = 1.2;
  EXPECT_THROW(c.validate(), ConfigError);
  c.gamma_h = 1.0;
  EXPECT_NO_THROW(c.validate());
}

namespace {

BarrierSpec lon_barrier(double obstacle_x, double obstacle_v, int N)
{
  BarrierSpec b;
  b.kind   = BarrierKind::Longitudinal;
  b.sign   = -1.0;
  b.radius = 6.0;
  b.alpha  = 0.5;
  for (int k = 0; k <= N; ++k) { b.obstacle_pos.push_back(obstacle_x + 0.2 * k * obstacle_v); }
  return b;
}

}  // namespace

TEST(DcbfRow, RejectsBadGamma)
{
  const auto b = lon_barrier(30.0, 0.0, 10);
  EXPECT_THROW(dcbf_row(b, QpLayout{10}, 0, 0.0, Eigen::Vector4d::Zero()), std::invalid_argument);
  EXPECT_THROW(dcbf_row(b, QpLayout{10}, 0, 1.5, Eigen::Vector4d::Zero()), std::invalid_argument);
}

TEST(DcbfRow, RateOneIsPlainBarrier)
{
  const auto b = lon_barrier(30.0, 5.0, 10);
  const QpLayout L{10};
  Eigen::VectorXd z = Eigen::VectorXd::Random(L.num_vars());
  for (int k = 0; k < 10; ++k) {
    const auto row = dcbf_row(b, L, k, 1.0, Eigen::Vector4d(0, 0, 10, 0));
    const double h_next = b.value(z.segment<4>(L.x(k + 1)), k + 1);
    EXPECT_NEAR(row.evaluate(z) - row.lower, h_next - z(L.eps(k, b.kind)), 1e-10);
  }
}

TEST(DcbfRow, StaticSceneMarginIsGammaH)
{
  const auto b = lon_barrier(30.0, 0.0, 10);
  const QpLayout L{10};
  const Eigen::Vector4d x0(0.0, 0.0, 0.0, 0.0);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(L.num_vars());
  z.segment<4>(L.x(1)) = x0;
  const double gamma = 0.8;
  const auto row     = dcbf_row(b, L, 0, gamma, x0);
  EXPECT_NEAR(row.evaluate(z) - row.lower, gamma * b.value(x0, 0), 1e-12);
  EXPECT_GE(row.evaluate(z) - row.lower, 0.0);
}

TEST(DcbfRow, MatchesBarrierOnLinearizedStep)
{
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const VehicleParams p;
  const QpLayout L{10};
  for (int trial = 0; trial < 200; ++trial) {
    BarrierSpec b = lon_barrier(20.0 + 10.0 * U(rng), 10.0 * U(rng), 10);
    if (trial % 2) {
      b.kind  = BarrierKind::Lateral;
      b.sign  = U(rng) > 0 ? 1.0 : -1.0;
      b.alpha = 0.0;
      b.radius = 2.5;
    }
    const double gamma = 0.05 + 0.95 * std::abs(U(rng));
    const int k        = trial % 10;
    const VehicleState xs{5.0 * U(rng), 4.0 * U(rng), 15.0 + 10.0 * U(rng), 0.2 * U(rng)};
    const ControlInput us{2.0 * U(rng), 0.2 * U(rng)};
    const auto lin             = linearize_dynamics(xs, us, p, 0.2);
    const Eigen::Vector4d xk   = xs.vec();
    const Eigen::Vector4d next = lin.apply(xk, us.vec());
    const double eps           = -std::abs(U(rng));

    Eigen::VectorXd z = Eigen::VectorXd::Zero(L.num_vars());
    z.segment<4>(L.x(k + 1)) = next;
    if (k > 0) { z.segment<4>(L.x(k)) = xk; }
    z(L.eps(k, b.kind)) = eps;
    const auto row = dcbf_row(b, L, k, gamma, xk);
    const double expected = b.value(next, k + 1) - (1.0 - gamma) * b.value(xk, k) - eps;
    EXPECT_NEAR(row.evaluate(z) - row.lower, expected, 1e-10);
  }
}

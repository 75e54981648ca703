#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "hwsafe/planner/mpc.hpp"
#include "support/scenes.hpp"

using namespace hwsafe;
using hwsafe::testing::add_vehicle;
using hwsafe::testing::ego_only;
using hwsafe::testing::empty_scenario;

namespace {

MpcProblem assemble_for(const WorldState & w, const ScenarioConfig & cfg, const PlannerConfig & pc, int lane, ControlInput prev = {})
{
  const auto road = cfg.road();
  ReferenceSpec ref{lane, road.lane_center(lane), road.v_max - pc.v_ref_margin, 0.0};
  const auto bs = build_barriers(w, cfg, lane, pc.barrier, pc.weights.N);
  return assemble_qp(w.ego, ref, pc.weights, bs, pc.barrier, cfg.ego, prev, road.v_max, cfg.dt);
}

}  // namespace

TEST(Mpc, LayoutArithmetic)
{
  const auto cfg = empty_scenario();
  auto w         = ego_only(0.0, 1, 20.0, cfg);
  add_vehicle(w, cfg, 30.0, 4.0, 15.0);
  add_vehicle(w, cfg, 5.0, 0.0, 15.0);
  const PlannerConfig pc;
  const auto mp = assemble_for(w, cfg, pc, 1);
  const int N   = pc.weights.N;
  EXPECT_EQ(mp.qp.num_vars(), 8 * N);
  // dynamics 4N + speed N + input 2N + rate 2N + slack sign 2N + barriers N each
  EXPECT_EQ(mp.qp.num_constraints(), 11 * N + 2 * N);
  EXPECT_EQ(mp.dcbf_row_begin, 11 * N);
}

TEST(Mpc, CostMatrixSymmetricPsd)
{
  const auto cfg = empty_scenario();
  const auto w   = ego_only(0.0, 1, 20.0, cfg);
  const auto mp  = assemble_for(w, cfg, PlannerConfig{}, 0, {1.0, 0.02});
  const Eigen::MatrixXd P = mp.qp.P;
  EXPECT_LT((P - P.transpose()).norm(), 1e-14);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(P).eigenvalues().minCoeff(), -1e-12);
}

TEST(Mpc, AtReferenceIsFixedPoint)
{
  auto cfg = empty_scenario();
  PlannerConfig pc;
  const auto w = ego_only(100.0, 1, cfg.v_max - pc.v_ref_margin, cfg);
  const auto mp  = assemble_for(w, cfg, pc, 1);
  const auto sol = solve_qp(mp.qp, pc.qp);
  ASSERT_EQ(sol.status, QpStatus::Optimal);
  EXPECT_NEAR(sol.objective, 0.0, 1e-8);
  for (int k = 0; k < pc.weights.N; ++k) {
    EXPECT_NEAR(sol.x(mp.layout.u(k)), 0.0, 1e-6);
    EXPECT_NEAR(sol.x(mp.layout.u(k) + 1), 0.0, 1e-6);
  }
  const auto ps = plan_step(w, Action::LK, cfg, pc);
  EXPECT_NEAR(ps.u0.a, 0.0, 1e-6);
  EXPECT_NEAR(ps.u0.delta, 0.0, 1e-6);
}

TEST(Mpc, SingleInputWeightMatchesAnalyticMinimizer)
{
  // Only the rate weight on acceleration is active and prev_u.a = 1: the rate term alone is
  // minimized by holding a = 1; adding Q on a gives u_k minimizing q_a u^2 + p_a (u - 1)^2 at
  // N = 1, i.e. u = p / (q + p).
  auto cfg = empty_scenario();
  PlannerConfig pc;
  pc.weights.N = 1;
  pc.weights.R.setZero();
  pc.weights.S = 0.0;
  pc.weights.P = {0.2, 0.0};
  pc.weights.Q = {0.05, 0.0};
  const auto w  = ego_only(0.0, 1, 20.0, cfg);
  const auto mp = assemble_for(w, cfg, pc, 1, {1.0, 0.0});
  const auto sol = solve_qp(mp.qp, pc.qp);
  ASSERT_EQ(sol.status, QpStatus::Optimal);
  EXPECT_NEAR(sol.x(mp.layout.u(0)), 0.2 / 0.25, 1e-6);
  EXPECT_NEAR(sol.objective, 0.05 * 0.8 * 0.8 + 0.2 * 0.2 * 0.2, 1e-8);
}

TEST(Mpc, OptimalSolutionSatisfiesConstraints)
{
  std::mt19937_64 rng(77);
  ScenarioConfig cfg;
  cfg.density = 2.0;
  PlannerConfig pc;
  for (int trial = 0; trial < 20; ++trial) {
    cfg.seed = trial;
    World world(cfg);
    const auto lane = cfg.road().nearest_lane(world.state().ego.y);
    const auto mp   = assemble_for(world.state(), cfg, pc, lane);
    const auto sol  = solve_qp(mp.qp, pc.qp);
    ASSERT_EQ(sol.status, QpStatus::Optimal);
    const Eigen::VectorXd Ax = mp.qp.A * sol.x;
    for (Eigen::Index i = 0; i < Ax.size(); ++i) {
      EXPECT_GE(Ax(i), mp.qp.l(i) - 1e-6);
      EXPECT_LE(Ax(i), mp.qp.u(i) + 1e-6);
    }
    EXPECT_LT(kkt_residual(mp.qp, sol.x, sol.y).max(), 1e-6);
  }
}

TEST(Mpc, StoppedLeaderBrakesAndKeepsDecay)
{
  auto cfg = empty_scenario();
  PlannerConfig pc;
  auto w = ego_only(0.0, 1, 10.0, cfg);
  add_vehicle(w, cfg, 20.0, 4.0, 0.0);
  const double gamma = pc.barrier.gamma_h;
  Rng rng(1);
  for (int step = 0; step < 50; ++step) {
    const auto sol = plan_step(w, Action::LK, cfg, pc);
    ASSERT_EQ(sol.status, QpStatus::Optimal);
    ASSERT_FALSE(sol.barriers.empty());
    if (step == 0) { EXPECT_LT(sol.u0.a, 0.0); }
    const double h0 = sol.barrier_values.front();
    const double e0 = sol.slack.front()(0);
    w.hdvs[0].state.v = 0.0;
    WorldState next   = step_world(w, sol.u0, cfg, rng);
    next.hdvs[0].state = w.hdvs[0].state;
    const BarrierSpec & b = sol.barriers.front();
    const double h1 = BarrierSpec::exact_value(b.kind, next.ego, next.hdvs[0].state.x, b.radius, b.alpha);
    EXPECT_GE(h1, (1.0 - gamma) * h0 + e0 - 0.5) << "step " << step;
    EXPECT_FALSE(detect_collision(next, cfg));
    w = next;
  }
  EXPECT_LT(w.ego.v, 0.5);
}

TEST(Mpc, LateralBarrierHoldsOnPrediction)
{
  auto cfg = empty_scenario();
  PlannerConfig pc;
  auto w = ego_only(0.0, 1, 20.0, cfg);
  add_vehicle(w, cfg, 2.0, 0.0, 20.0);
  const auto sol = plan_step(w, Action::LC, cfg, pc);
  ASSERT_EQ(sol.status, QpStatus::Optimal);
  ASSERT_EQ(sol.barriers.size(), 1u);
  const auto & b = sol.barriers[0];
  EXPECT_LT(sol.slack.front()(1), 1e-9);
  ASSERT_EQ(b.kind, BarrierKind::Lateral);
  // The rows give h_{k+1} >= (1 - gamma) h_k + eps_k, so the separation bound at step k carries
  // the slack of earlier steps with geometric decay.
  const double decay = 1.0 - pc.barrier.gamma_l;
  double relax       = 0.0;
  double h_prev      = std::abs(w.ego.y - b.obstacle_pos[0]) - pc.barrier.r_lat;
  for (int k = 1; k <= pc.weights.N; ++k) {
    const double eps = sol.slack[k - 1](1);
    const double h   = std::abs(sol.predicted[k].y - b.obstacle_pos[k]) - pc.barrier.r_lat;
    EXPECT_GE(h, decay * h_prev + eps - 1e-6) << "k " << k;
    relax = decay * relax + std::abs(eps);
    EXPECT_GE(h + pc.barrier.r_lat, pc.barrier.r_lat - relax - 1e-6) << "k " << k;
    h_prev = h;
  }
}

TEST(Mpc, SlackMonotoneInPenalty)
{
  // Cut-in scene that needs relaxation; raising R_eps never increases |eps|.
  auto cfg = empty_scenario();
  for (double gap : {8.0, 12.0, 16.0}) {
    for (double rel_v : {-8.0, -4.0}) {
      auto w = ego_only(0.0, 1, 25.0, cfg);
      add_vehicle(w, cfg, gap, 4.0, 25.0 + rel_v);
      double prev = std::numeric_limits<double>::infinity();
      for (double scale : {0.1, 1.0, 10.0, 100.0}) {
        PlannerConfig pc;
        pc.weights.R_eps *= scale;
        const auto sol = plan_step(w, Action::LK, cfg, pc);
        ASSERT_EQ(sol.status, QpStatus::Optimal);
        double mag = 0.0;
        for (const auto & e : sol.slack) { mag += e.norm(); }
        EXPECT_LE(mag, prev + 1e-6 * std::max(1.0, prev));
        prev = mag;
      }
    }
  }
}

TEST(Mpc, EdgeActionsCoerced)
{
  auto cfg = empty_scenario();
  const PlannerConfig pc;
  const auto left  = plan_step(ego_only(0.0, 0, 25.0, cfg), Action::LC, cfg, pc);
  const auto right = plan_step(ego_only(0.0, 2, 25.0, cfg), Action::RC, cfg, pc);
  EXPECT_TRUE(left.coerced);
  EXPECT_TRUE(right.coerced);
  EXPECT_EQ(left.reference.target_lane, 0);
  EXPECT_EQ(right.reference.target_lane, 2);
  EXPECT_FALSE(plan_step(ego_only(0.0, 1, 25.0, cfg), Action::LC, cfg, pc).coerced);
}

TEST(Mpc, InfeasibleFallsBackToBraking)
{
  auto cfg = empty_scenario();
  PlannerConfig pc;
  // previous input far outside the box makes the rate rows contradict the input box
  auto w         = ego_only(0.0, 1, 20.0, cfg);
  w.ego.y        = 4.6;
  const auto lane = cfg.road().nearest_lane(w.ego.y);
  ReferenceSpec ref{0, 0.0, 28.0, 0.0};
  auto mp = assemble_qp(w.ego, ref, pc.weights, {}, pc.barrier, cfg.ego, {0.0, 0.0}, cfg.v_max, cfg.dt);
  mp.qp.l(mp.dcbf_row_begin - 1) = 1.0;  // slack row lower bound above its upper bound 0
  EXPECT_EQ(solve_qp(mp.qp, pc.qp).status, QpStatus::Infeasible);

  const auto u = braking_fallback(w, cfg);
  EXPECT_EQ(u.a, cfg.ego.a_min);
  // steering pulls back toward the current lane center, never across
  EXPECT_LT(u.delta, 0.0);
  EXPECT_EQ(lane, 1);
}

TEST(Mpc, ClosedLoopTiming)
{
  ScenarioConfig cfg;
  cfg.seed = 3;
  World world(cfg);
  SafetyPlanner planner(cfg, PlannerConfig{});
  double total = 0.0;
  int n        = 0;
  for (int t = 0; t < 150; ++t) {
    if (t % cfg.decision_period == 0) { planner.decide(Action::LK, world.state()); }
    const auto t0  = std::chrono::steady_clock::now();
    const auto sol = planner.plan(world.state());
    total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++n;
    world.step(sol.u0);
    ASSERT_FALSE(detect_collision(world.state(), cfg)) << "t " << t;
  }
  EXPECT_LT(total / n, 0.05);
}

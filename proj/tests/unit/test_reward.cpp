#include <gtest/gtest.h>

#include <random>

#include "hwsafe/reward/reward.hpp"
#include "support/scenes.hpp"

using namespace hwsafe;
using hwsafe::testing::add_vehicle;
using hwsafe::testing::ego_only;
using hwsafe::testing::empty_scenario;

TEST(Reward, DefaultConstants)
{
  const RewardConfig c;
  EXPECT_EQ(c.v_thre, 20.0);
  EXPECT_EQ(c.v_max, 30.0);
  EXPECT_EQ(c.r_exp, 0.4);
  EXPECT_EQ(c.c_pos, 5.0);
  EXPECT_EQ(c.c_neg, 0.5);
  EXPECT_EQ(c.r_c, -2.0);
  EXPECT_EQ(c.c_tl_lon, 0.2);
  EXPECT_EQ(c.c_el_lon, 0.2);
  EXPECT_EQ(c.c_nv_lat, 0.2);
  EXPECT_EQ(c.c_min_dis, 0.2);
}

TEST(Reward, SpeedByHand)
{
  const RewardConfig c;
  EXPECT_EQ(speed_reward(20.0, c), 0.0);
  EXPECT_EQ(speed_reward(30.0, c), 1.0);
  EXPECT_EQ(speed_reward(25.0, c), 0.5);
  EXPECT_EQ(speed_reward(10.0, c), -1.0);
}

TEST(Reward, SpeedStrictlyIncreasing)
{
  const RewardConfig c;
  for (double v = 0.0; v < 35.0; v += 0.25) { EXPECT_LT(speed_reward(v, c), speed_reward(v + 0.25, c)); }
}

TEST(Reward, ExplorationByHand)
{
  const RewardConfig c;
  const RoadModel road{3, 4.0, 30.0};
  LaneChangeHistory h;
  EXPECT_EQ(exploration_reward(Action::LK, 1, road, h, 0, c), 0.0);
  EXPECT_EQ(exploration_reward(Action::LC, 1, road, h, 0, c), 0.4);
  // reversal two decisions later
  EXPECT_EQ(exploration_reward(Action::RC, 0, road, h, 2, c), -0.4);
}

TEST(Reward, ExplorationInvalidAtEdges)
{
  const RewardConfig c;
  const RoadModel road{3, 4.0, 30.0};
  LaneChangeHistory h;
  EXPECT_EQ(exploration_reward(Action::LC, 0, road, h, 0, c), 0.0);
  EXPECT_EQ(exploration_reward(Action::RC, 2, road, h, 1, c), 0.0);
  EXPECT_FALSE(h.last_action.has_value());
}

TEST(Reward, ExplorationReversalOutsideWindowIsPositive)
{
  const RewardConfig c;
  const RoadModel road{3, 4.0, 30.0};
  LaneChangeHistory h;
  EXPECT_EQ(exploration_reward(Action::LC, 2, road, h, 0, c), 0.4);
  EXPECT_EQ(exploration_reward(Action::RC, 1, road, h, 6, c), 0.4);
  EXPECT_EQ(exploration_reward(Action::RC, 2 - 1, road, h, 7, c), 0.4);
}

TEST(Reward, ExplorationNeverPositiveForLaneKeep)
{
  const RewardConfig c;
  const RoadModel road{5, 4.0, 30.0};
  LaneChangeHistory h;
  for (int lane = 0; lane < 5; ++lane) { EXPECT_EQ(exploration_reward(Action::LK, lane, road, h, lane, c), 0.0); }
}

TEST(Reward, OvertakeByHand)
{
  const RewardConfig c;
  EXPECT_EQ(overtake_reward(0, 20.0, c), 0.0);
  EXPECT_DOUBLE_EQ(overtake_reward(2, 20.0, c), 0.5);
  EXPECT_DOUBLE_EQ(overtake_reward(-1, 20.0, c), -0.025);
}

TEST(Reward, OvertakeSignFollowsDelta)
{
  const RewardConfig c;
  for (int d = -10; d <= 10; ++d) {
    const double r = overtake_reward(d, 17.0, c);
    EXPECT_EQ(r > 0.0, d > 0);
    EXPECT_EQ(r < 0.0, d < 0);
  }
}

TEST(Reward, TrackerCountsSharedVehiclesOnly)
{
  const auto cfg = empty_scenario();
  auto w         = ego_only(0.0, 1, 25.0, cfg);
  add_vehicle(w, cfg, 5.0, 4.0, 20.0);
  add_vehicle(w, cfg, 10.0, 0.0, 20.0);
  add_vehicle(w, cfg, -20.0, 0.0, 20.0);
  OvertakeTracker t(w);
  EXPECT_EQ(t.count(), 1);
  w.ego.x = 12.0;
  add_vehicle(w, cfg, -50.0, 8.0, 20.0);  // spawned behind: not an overtake
  EXPECT_EQ(t.update(w), 2);
  EXPECT_EQ(t.count(), 4);
  w.hdvs.erase(w.hdvs.begin());           // despawn: not a loss
  EXPECT_EQ(t.update(w), 0);
  w.ego.x = -100.0;
  EXPECT_EQ(t.update(w), -3);
}

TEST(Reward, CollisionTerm)
{
  const RewardConfig c;
  RewardBreakdown b;
  safety_reward({}, true, c, b);
  EXPECT_EQ(b.r_collision, -2.0);
  safety_reward({}, false, c, b);
  EXPECT_EQ(b.r_collision, 0.0);
}

TEST(Reward, NoVehiclesNoTtcPenalty)
{
  const auto cfg = empty_scenario();
  const auto w   = ego_only(0.0, 1, 25.0, cfg);
  RewardBreakdown b;
  safety_reward(resolve_referents(w, cfg, 1, false, RewardConfig{}), false, RewardConfig{}, b);
  EXPECT_EQ(b.r_ttc(), 0.0);
}

TEST(Reward, EgoLaneLeaderByHand)
{
  SafetyReferents r;
  r.t_el = 4.5;
  r.d_el = 45.0;
  RewardBreakdown b;
  safety_reward(r, false, RewardConfig{}, b);
  EXPECT_DOUBLE_EQ(b.r_lon_ttc, -0.2 / 4.5);
  EXPECT_DOUBLE_EQ(b.r_distance, -0.2 / 45.0);
  EXPECT_EQ(b.r_lat_ttc, 0.0);
  EXPECT_DOUBLE_EQ(b.r_ttc(), -0.2 / 4.5 - 0.2 / 45.0);
}

TEST(Reward, EgoLaneLeaderResolvedFromWorld)
{
  const auto cfg = empty_scenario();
  auto w         = ego_only(0.0, 1, 30.0, cfg);
  add_vehicle(w, cfg, 50.0, 4.0, 20.0);
  const auto r = resolve_referents(w, cfg, 1, false, RewardConfig{});
  ASSERT_TRUE(r.t_el && r.d_el);
  EXPECT_DOUBLE_EQ(*r.t_el, 4.5);
  EXPECT_DOUBLE_EQ(*r.d_el, 45.0);
  EXPECT_FALSE(r.t_tl);
  EXPECT_FALSE(r.t_nv);
  EXPECT_DOUBLE_EQ(*r.d_min, 50.0);
}

TEST(Reward, TargetLeaderOnlyDuringLaneChange)
{
  const auto cfg = empty_scenario();
  auto w         = ego_only(0.0, 1, 25.0, cfg);
  add_vehicle(w, cfg, 40.0, 0.0, 20.0);
  const RewardConfig rc;
  EXPECT_FALSE(resolve_referents(w, cfg, 0, false, rc).t_tl);
  EXPECT_TRUE(resolve_referents(w, cfg, 0, true, rc).t_tl);
  w.ego.y = 0.5;  // almost at the target center
  EXPECT_FALSE(resolve_referents(w, cfg, 0, true, rc).t_tl);
}

TEST(Reward, NeighborPicksMinimumLateralTtc)
{
  const auto cfg = empty_scenario();
  auto w         = ego_only(0.0, 1, 20.0, cfg);
  add_vehicle(w, cfg, 5.0, 0.0, 20.0, 0.0);
  add_vehicle(w, cfg, -5.0, 8.0, 20.0, -0.05);  // drifting toward ego
  add_vehicle(w, cfg, 30.0, 0.0, 20.0, 0.1);    // outside roi
  const auto r = resolve_referents(w, cfg, 1, false, RewardConfig{});
  ASSERT_TRUE(r.t_nv);
  const double vy = 20.0 * std::sin(0.05);
  EXPECT_NEAR(*r.t_nv, 2.0 / vy, 1e-12);
  EXPECT_DOUBLE_EQ(*r.d_nv, 2.0);
}

TEST(Reward, SafetyMonotoneInTtcAndDistance)
{
  const RewardConfig c;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(0.0, 50.0);
  for (int trial = 0; trial < 500; ++trial) {
    SafetyReferents a;
    a.t_el = U(rng), a.d_el = U(rng), a.t_tl = U(rng), a.d_tl = U(rng);
    a.t_nv = U(rng), a.d_nv = U(rng), a.d_min = U(rng);
    RewardBreakdown ba;
    safety_reward(a, false, c, ba);
    for (auto field : {&SafetyReferents::t_el, &SafetyReferents::d_el, &SafetyReferents::t_tl, &SafetyReferents::d_tl,
                       &SafetyReferents::t_nv, &SafetyReferents::d_nv, &SafetyReferents::d_min}) {
      SafetyReferents b = a;
      *(b.*field) += 1.0;
      RewardBreakdown bb;
      safety_reward(b, false, c, bb);
      EXPECT_GE(bb.r_safety(), ba.r_safety());
    }
  }
}

TEST(Reward, OffRoadGivesZero)
{
  RewardBreakdown b;
  b.r_speed     = 1.0;
  b.r_collision = -2.0;
  total_reward(b, false, RewardConfig{});
  EXPECT_EQ(b.total, 0.0);
  EXPECT_EQ(b.road_indicator, 0);
}

TEST(Reward, AllZeroGivesZero)
{
  RewardBreakdown b;
  total_reward(b, true, RewardConfig{});
  EXPECT_EQ(b.total, 0.0);
}

TEST(Reward, NormalizerByHand)
{
  // speed 2 + exploration 0.4 + overtake 5 + collision 2 + seven terms at 0.2 / 0.1
  EXPECT_DOUBLE_EQ(RewardConfig{}.normalizer(), 2.0 + 0.4 + 5.0 + 2.0 + 7.0 * 2.0);
}

TEST(Reward, TotalBoundedOverRandomScenes)
{
  ScenarioConfig cfg;
  cfg.density = 2.5;
  const RewardConfig rc;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<int> act(0, 2);
  for (int i = 0; i < 10000; ++i) {
    cfg.seed = i;
    Rng wr(i);
    WorldState w = initial_world(cfg, wr);
    w.ego.v      = 35.0 * U(rng);
    w.ego.y      = cfg.road().y_min() - 1.0 + (cfg.road().y_max() - cfg.road().y_min() + 2.0) * U(rng);
    w.ego.psi    = 0.4 * (U(rng) - 0.5);
    RewardEngine eng(rc, cfg);
    eng.reset(w);
    w.ego.x += 60.0 * (U(rng) - 0.5);
    const Action a = action_from_index(act(rng));
    const int lane = cfg.road().nearest_lane(w.ego.y);
    const auto b   = eng.step(w, {a, lane, lane + action_lane_offset(a), detect_collision(w, cfg)});
    ASSERT_GE(b.total, -1.0);
    ASSERT_LE(b.total, 1.0);
    if (!cfg.road().on_road(w.ego.y)) { ASSERT_EQ(b.total, 0.0); }
  }
}

TEST(Reward, ComponentIsolation)
{
  auto cfg    = empty_scenario();
  cfg.density = 1.0;  // only sets N_env here
  auto w         = ego_only(0.0, 1, 24.0, cfg);
  add_vehicle(w, cfg, 30.0, 4.0, 20.0);
  add_vehicle(w, cfg, -4.0, 0.0, 20.0, -0.02);
  const RewardInputs in{Action::LC, 1, 0, true};

  auto eval = [&](const RewardConfig & rc) {
    RewardEngine e(rc, cfg);
    auto w0 = w;
    w0.ego.x = -20.0;
    e.reset(w0);
    return e.step(w, in);
  };
  const RewardBreakdown base = eval(RewardConfig{});

  auto same_except = [&](const RewardBreakdown & b, std::initializer_list<double RewardBreakdown::*> changed) {
    for (auto f : {&RewardBreakdown::r_speed, &RewardBreakdown::r_exploration, &RewardBreakdown::r_overtake,
                   &RewardBreakdown::r_collision, &RewardBreakdown::r_lon_ttc, &RewardBreakdown::r_lat_ttc,
                   &RewardBreakdown::r_distance}) {
      bool expected_change = false;
      for (auto c : changed) { expected_change = expected_change || c == f; }
      if (expected_change) {
        EXPECT_NE(b.*f, base.*f);
      } else {
        EXPECT_EQ(b.*f, base.*f);
      }
    }
  };
  RewardConfig c;
  c.v_thre = 15.0;
  same_except(eval(c), {&RewardBreakdown::r_speed});
  c       = {};
  c.r_exp = 0.3;
  same_except(eval(c), {&RewardBreakdown::r_exploration});
  c       = {};
  c.c_pos = 4.0;
  same_except(eval(c), {&RewardBreakdown::r_overtake});
  c     = {};
  c.r_c = -3.0;
  same_except(eval(c), {&RewardBreakdown::r_collision});
  c           = {};
  c.c_el_lon  = 0.3;
  same_except(eval(c), {&RewardBreakdown::r_lon_ttc, &RewardBreakdown::r_distance});
  c           = {};
  c.c_nv_lat  = 0.3;
  same_except(eval(c), {&RewardBreakdown::r_lat_ttc, &RewardBreakdown::r_distance});
  c           = {};
  c.c_min_dis = 0.3;
  same_except(eval(c), {&RewardBreakdown::r_distance});
}

TEST(Reward, ConfigValidation)
{
  RewardConfig c;
  c.v_thre = 31.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c     = {};
  c.r_c = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c       = {};
  c.c_neg = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(RewardConfig{}.validate());
}

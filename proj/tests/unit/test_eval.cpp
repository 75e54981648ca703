#include <gtest/gtest.h>

#include "hwsafe/config.hpp"
#include "hwsafe/eval/batch.hpp"
#include "support/scenes.hpp"

using namespace hwsafe;

namespace {

AppConfig short_config(double duration = 6.0)
{
  AppConfig c;
  c.scenario.duration_s = duration;
  c.sync();
  return c;
}

EvalContext context(AppConfig c, PolicyKind kind = PolicyKind::LaneKeep)
{
  EvalContext ctx;
  ctx.config = std::move(c);
  ctx.kind   = kind;
  return ctx;
}

}  // namespace

TEST(Episode, EmptyRoadLaneKeepSucceeds)
{
  auto c             = short_config(10.0);
  c.scenario.density = 0.0;
  const auto r       = run_episode(context(c), 3);
  EXPECT_TRUE(r.error.empty());
  EXPECT_TRUE(r.metrics.success);
  EXPECT_EQ(r.metrics.lane_changes(), 0);
  EXPECT_EQ(r.metrics.decisions, 10);
  EXPECT_EQ(r.metrics.success_steps, 10);
  EXPECT_NEAR(r.metrics.driving_time, 10.0, 1e-9);
  EXPECT_GT(r.metrics.progress, 0.0);
  EXPECT_DOUBLE_EQ(r.metrics.ttc_score, kTtcCap);
}

TEST(Episode, StoppedLeaderWithoutSafetyLayerCollides)
{
  auto c               = short_config(10.0);
  c.scenario.density   = 0.0;
  c.eval.safety_layer  = false;
  const auto scene = [&](WorldState & w) {
    auto & h           = hwsafe::testing::add_vehicle(w, c.scenario, w.ego.x + 40.0, w.ego.y, 0.0);
    h.driver.v_desired = 0.1;
  };
  const auto r = run_episode(context(c), 3, {}, scene);
  EXPECT_FALSE(r.metrics.success);
  EXPECT_TRUE(r.metrics.collided);
  EXPECT_LT(r.metrics.success_steps, r.metrics.decisions);
  EXPECT_LT(r.metrics.driving_time, 10.0);
}

TEST(Episode, StoppedLeaderWithSafetyLayerIsAvoided)
{
  auto c             = short_config(10.0);
  c.scenario.density = 0.0;
  c.scenario.ego_initial_speed = 10.0;
  const auto scene = [&](WorldState & w) {
    auto & h           = hwsafe::testing::add_vehicle(w, c.scenario, w.ego.x + 40.0, w.ego.y, 0.0);
    h.driver.v_desired = 0.1;
  };
  const auto r = run_episode(context(c), 3, {}, scene);
  EXPECT_TRUE(r.metrics.success);
}

TEST(Metrics, PureFunctionOfTheLog)
{
  auto c          = short_config(8.0);
  c.scenario.density = 2.0;
  const auto ctx  = context(c, PolicyKind::Random);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto r   = run_episode(ctx, seed);
    const auto log = log_from_json(nlohmann::json::parse(to_json(r.log).dump()));
    EXPECT_EQ(log, r.log);
    EXPECT_EQ(compute_metrics(log, c.scenario.road(), c.eval.unsolvable_ticks), r.metrics);
    EXPECT_GE(r.metrics.avg_jerk, 0.0);
    EXPECT_GE(r.metrics.avg_acceleration, 0.0);
  }
}

TEST(Metrics, LiveOutcomeMatchesLog)
{
  auto c = short_config(8.0);
  HighwayEnv env(c.env_config());
  env.set_recording(true);
  env.reset(4);
  std::mt19937_64 rng(4);
  for (;;) {
    const auto s = env.step(action_from_index(std::uniform_int_distribution<int>(0, 2)(rng)));
    if (s.done()) { break; }
  }
  const auto m = compute_metrics(env.log(), c.scenario.road(), c.eval.unsolvable_ticks);
  EXPECT_EQ(m.collided, env.outcome().collided);
  EXPECT_EQ(m.unsolvable, env.outcome().unsolvable);
  EXPECT_EQ(m.decisions, env.outcome().decisions);
  EXPECT_EQ(static_cast<long>(env.log().ticks.size()), env.outcome().ticks);
  EXPECT_EQ(m.progress, env.world().ego.x - env.log().ticks.front().ego.x);
}

TEST(Metrics, HandBuiltLog)
{
  TrajectoryLog log;
  log.dt = 0.5;
  RoadModel road;
  auto tick = [&](double x, double y, double v, double a, double ttc) {
    TickRecord r;
    r.tick    = static_cast<long>(log.ticks.size());
    r.ego     = {x, y, v, 0.0};
    r.u       = {a, 0.0};
    r.min_ttc = ttc;
    log.ticks.push_back(r);
  };
  tick(0.0, 4.0, 10.0, 1.0, 4.0);
  tick(5.0, 3.0, 12.0, -1.0, 6.0);
  tick(11.0, 0.5, 14.0, 2.0, 100.0);  // now in lane 0
  log.final_ego = {18.0, 0.0, 15.0, 0.0};
  log.rewards   = {0.1};
  const auto m  = compute_metrics(log, road, 10);
  EXPECT_TRUE(m.success);
  EXPECT_DOUBLE_EQ(m.progress, 18.0);
  EXPECT_DOUBLE_EQ(m.avg_velocity, 12.0);
  EXPECT_DOUBLE_EQ(m.avg_acceleration, 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.avg_jerk, (2.0 / 0.5 + 3.0 / 0.5) / 2.0);
  EXPECT_DOUBLE_EQ(m.ttc_score, 110.0 / 3.0);
  EXPECT_EQ(m.lane_changes_left, 1);
  EXPECT_EQ(m.lane_changes_right, 0);
  EXPECT_DOUBLE_EQ(m.driving_time, 1.5);
}

TEST(Metrics, TrailingFallbacksMarkUnsolvable)
{
  TrajectoryLog log;
  for (int i = 0; i < 12; ++i) {
    TickRecord r;
    r.decision = i / 5;
    r.fallback = i >= 2;
    log.ticks.push_back(r);
  }
  log.rewards = {0, 0, 0};
  const auto m = compute_metrics(log, RoadModel{}, 10);
  EXPECT_TRUE(m.unsolvable);
  EXPECT_FALSE(m.success);
  EXPECT_EQ(m.success_steps, 2);
  EXPECT_FALSE(compute_metrics(log, RoadModel{}, 11).unsolvable);
}

TEST(Batch, SuccessRateArithmetic)
{
  EXPECT_DOUBLE_EQ(success_rate_percent(84, 100), 84.0);
  std::vector<EpisodeResult> eps(100);
  for (int i = 0; i < 100; ++i) { eps[i].metrics.success = i < 84; }
  const auto a = aggregate(eps);
  EXPECT_DOUBLE_EQ(a.success_rate, 84.0);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", a.success_rate);
  EXPECT_STREQ(buf, "84.00");
}

TEST(Batch, SingleTrackAggregatesEqualEpisode)
{
  const auto ctx = context(short_config(5.0));
  const auto b   = run_batch(ctx, 1, 1);
  const auto & m = b.episodes[0].metrics;
  EXPECT_EQ(b.aggregates.tracks, 1);
  EXPECT_DOUBLE_EQ(b.aggregates.success_rate, m.success ? 100.0 : 0.0);
  EXPECT_DOUBLE_EQ(b.aggregates.mean_progress, m.progress);
  EXPECT_DOUBLE_EQ(b.aggregates.max_progress, m.progress);
  EXPECT_DOUBLE_EQ(b.aggregates.mean_jerk, m.avg_jerk);
  EXPECT_DOUBLE_EQ(b.aggregates.mean_ttc_score, m.ttc_score);
}

TEST(Batch, ReportInvariantToParallelism)
{
  auto c = short_config(4.0);
  c.scenario.density = 1.5;
  const auto ctx = context(c, PolicyKind::Random);
  auto c1        = ctx;
  c1.config.eval.parallel = 1;
  auto c4        = ctx;
  c4.config.eval.parallel = 4;
  const auto b1 = run_batch(c1, 6, 1);
  const auto b4 = run_batch(c4, 6, 4);
  EXPECT_EQ(batch_report_json(b1, c1).dump(2), batch_report_json(b4, c4).dump(2));
  EXPECT_EQ(batch_report_csv(b1), batch_report_csv(b4));
}

TEST(Batch, ThrowingTrackIsIsolated)
{
  const auto ctx = context(short_config(2.0), PolicyKind::Trained);  // no network given
  const auto b   = run_batch(ctx, 3, 2);
  EXPECT_EQ(b.aggregates.failed_tracks, 3);
  EXPECT_DOUBLE_EQ(b.aggregates.success_rate, 0.0);
  EXPECT_NE(b.episodes[1].error.find("checkpoint"), std::string::npos);
}

TEST(Replay, SceneSequenceReproducesLoggedStates)
{
  auto c = short_config(3.0);
  const auto r    = run_episode(context(c), 8);
  const auto rows = parse_scene_sequence(scene_sequence_csv(r.log));
  std::size_t k   = 0;
  for (const auto & t : r.log.ticks) {
    ASSERT_EQ(rows[k].id, -1);
    EXPECT_EQ(rows[k++].state, t.ego);
    for (const auto & v : t.vehicles) {
      ASSERT_EQ(rows[k].id, v.id);
      EXPECT_EQ(rows[k++].state, v.state);
    }
  }
  ASSERT_EQ(k + 1, rows.size());
  EXPECT_EQ(rows.back().state, r.log.final_ego);
}

TEST(Config, RoundTripAndStrictKeys)
{
  AppConfig c;
  c.scenario.lanes   = 4;
  c.planner.weights.Q = {0.1, 0.2};
  c.train.hidden     = {64, 32};
  const auto j       = config_to_json(c);
  const auto back    = config_from_json(j);
  EXPECT_EQ(config_to_json(back), j);
  EXPECT_EQ(back.scenario.lanes, 4);

  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"scenario":{"lanez":3}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"scenario":{"lanes":"three"}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"planner":{"Q":[1]}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"train":{"gamma":1.5}})")), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, RewardSpeedLimitFollowsScenario)
{
  const auto c = config_from_json(nlohmann::json::parse(R"({"scenario":{"v_max":35, "ego_initial_speed": 25}})"));
  EXPECT_EQ(c.reward.v_max, 35.0);
  EXPECT_NO_THROW(HighwayEnv{c.env_config()});
}

TEST(Config, TrainingHashIgnoresEvalSection)
{
  AppConfig a, b;
  b.eval.tracks = 99;
  EXPECT_EQ(training_config_hash(a), training_config_hash(b));
  b.train.learning_rate = 1e-3;
  EXPECT_NE(training_config_hash(a), training_config_hash(b));
}

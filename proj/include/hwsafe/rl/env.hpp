#ifndef HWSAFE__RL__ENV_HPP_
#define HWSAFE__RL__ENV_HPP_

/**
 * @file
 * @brief Decision-level environments: a lane decision is held for a fixed number of ticks
 * while the safety planner drives the ego.
 */

#include <Eigen/Core>

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>

#include "hwsafe/planner/mpc.hpp"
#include "hwsafe/policy/features.hpp"
#include "hwsafe/reward/reward.hpp"
#include "hwsafe/sim/trajectory.hpp"

namespace hwsafe {

struct EnvStep
{
  Eigen::VectorXd obs;
  double reward{0.0};
  /// episode ended by failure (collision or unsolvable planning)
  bool terminal{false};
  /// episode ended by the time limit
  bool truncated{false};

  bool done() const { return terminal || truncated; }
};

/// What the trainer needs from an environment.
class Environment
{
public:
  virtual ~Environment() = default;
  virtual int observation_dim() const         = 0;
  virtual Eigen::VectorXd reset(std::uint64_t seed) = 0;
  virtual EnvStep step(Action a)              = 0;
};

struct HighwayEnvConfig
{
  ScenarioConfig scenario{};
  PlannerConfig planner{};
  RewardConfig reward{};
  FeatureConfig features{};
  /// consecutive planner failures that end an episode as unsolvable
  int unsolvable_ticks{10};
  /// false: hold speed and steer to the target lane without the planner
  bool safety_layer{true};

  void validate() const
  {
    scenario.validate();
    planner.validate();
    reward.validate();
    features.validate();
    if (reward.v_max != scenario.v_max) { throw ConfigError("reward v_max must equal scenario v_max"); }
    if (unsolvable_ticks < 1) { throw ConfigError("unsolvable_ticks must be >= 1"); }
  }
};

/// Per-tick hook: world before the tick, planner output (empty without the safety layer), world after.
using TickObserver = std::function<void(const WorldState &, const PlannerSolution *, const WorldState &)>;

/// Smallest capped TTC to the vehicles the reward treats as safety referents.
inline double min_referent_ttc(const WorldState & w, const ScenarioConfig & scenario, int target_lane, const RewardConfig & rc)
{
  const int lane = scenario.road().nearest_lane(w.ego.y);
  const auto r   = resolve_referents(w, scenario, target_lane, target_lane != lane, rc);
  double m       = kTtcCap;
  for (const auto & t : {r.t_el, r.t_tl, r.t_nv}) {
    if (t) { m = std::min(m, *t); }
  }
  return m;
}

class HighwayEnv : public Environment
{
public:
  struct Outcome
  {
    bool collided{false};
    bool unsolvable{false};
    int decisions{0};
    long ticks{0};
  };

  struct Timing
  {
    /// wall time spent in the planner (s)
    double planner_seconds{0.0};
    long planner_calls{0};
  };

  explicit HighwayEnv(HighwayEnvConfig cfg)
  : cfg_(std::move(cfg)), world_(cfg_.scenario), planner_(cfg_.scenario, cfg_.planner), reward_(cfg_.reward, cfg_.scenario)
  {
    cfg_.validate();
  }

  int observation_dim() const override { return cfg_.features.dim(); }

  Eigen::VectorXd reset(std::uint64_t seed) override { return reset(seed, {}); }

  /// Seeded reset whose initial world is then rewritten by @p edit (scripted scenes).
  Eigen::VectorXd reset(std::uint64_t seed, const std::function<void(WorldState &)> & edit)
  {
    world_.reset(seed);
    if (edit) { edit(world_.mutable_state()); }
    planner_ = SafetyPlanner(cfg_.scenario, cfg_.planner);
    reward_.reset(world_.state());
    outcome_       = {};
    timing_        = {};
    fail_streak_   = 0;
    last_breakdown_ = {};
    if (recording_) {
      log_ = TrajectoryLog{};
      log_.seed = seed;
      log_.dt   = cfg_.scenario.dt;
      log_.final_ego = world_.state().ego;
    }
    return observation();
  }

  EnvStep step(Action a) override
  {
    const ScenarioConfig & sc = cfg_.scenario;
    const RoadModel road      = sc.road();
    const int decision_lane   = road.nearest_lane(world_.state().ego.y);
    planner_.decide(a, world_.state());
    const int target = planner_.target_lane();

    bool collided = false;
    for (int i = 0; i < sc.decision_period && world_.state().tick < sc.total_ticks(); ++i) {
      const WorldState before = world_.state();
      TickRecord rec;
      std::optional<PlannerSolution> sol;
      ControlInput u;
      if (cfg_.safety_layer) {
        const auto t0 = std::chrono::steady_clock::now();
        sol           = planner_.plan(before);
        timing_.planner_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ++timing_.planner_calls;
        u            = sol->u0;
        rec.solved   = !sol->fallback;
        rec.fallback = sol->fallback;
        rec.qp_iterations = sol->iterations;
        fail_streak_ = sol->fallback ? fail_streak_ + 1 : 0;
      } else {
        u = {0.0, lateral_steering(before.ego, road.lane_center(target), sc.ego)};
      }
      world_.step(u);
      const bool hit = detect_collision(world_.state(), sc);
      collided       = collided || hit;
      if (observer_) { observer_(before, sol ? &*sol : nullptr, world_.state()); }
      if (recording_) {
        rec.tick        = before.tick;
        rec.t           = before.t;
        rec.decision    = outcome_.decisions;
        rec.action      = a;
        rec.target_lane = target;
        rec.ego         = before.ego;
        rec.u           = world_.state().ego_input;
        rec.min_ttc     = min_referent_ttc(before, sc, target, cfg_.reward);
        rec.collided    = hit;
        rec.vehicles    = snapshot_vehicles(before);
        log_.ticks.push_back(std::move(rec));
        log_.final_ego = world_.state().ego;
      }
      ++outcome_.ticks;
      if (hit || fail_streak_ >= cfg_.unsolvable_ticks) { break; }
    }

    last_breakdown_ = reward_.step(world_.state(), {a, decision_lane, target, collided});
    ++outcome_.decisions;
    outcome_.collided   = outcome_.collided || collided;
    outcome_.unsolvable = outcome_.unsolvable || fail_streak_ >= cfg_.unsolvable_ticks;
    if (recording_) { log_.rewards.push_back(last_breakdown_.total); }

    EnvStep s;
    s.obs       = observation();
    s.reward    = last_breakdown_.total;
    s.terminal  = outcome_.collided || outcome_.unsolvable;
    s.truncated = !s.terminal && world_.state().tick >= sc.total_ticks();
    return s;
  }

  Eigen::VectorXd observation() const { return featurize(world_.state(), cfg_.scenario.road(), cfg_.features); }

  /// Record a TrajectoryLog from the next reset on.
  void set_recording(bool on) { recording_ = on; }
  void set_observer(TickObserver f) { observer_ = std::move(f); }

  const WorldState & world() const { return world_.state(); }
  const HighwayEnvConfig & config() const { return cfg_; }
  const Outcome & outcome() const { return outcome_; }
  const Timing & timing() const { return timing_; }
  const TrajectoryLog & log() const { return log_; }
  const RewardBreakdown & last_reward() const { return last_breakdown_; }

private:
  HighwayEnvConfig cfg_;
  World world_;
  SafetyPlanner planner_;
  RewardEngine reward_;
  Outcome outcome_;
  Timing timing_;
  int fail_streak_{0};
  RewardBreakdown last_breakdown_;
  bool recording_{false};
  TrajectoryLog log_;
  TickObserver observer_;
};

}  // namespace hwsafe

#endif  // HWSAFE__RL__ENV_HPP_

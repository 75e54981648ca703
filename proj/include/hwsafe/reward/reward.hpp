#ifndef HWSAFE__REWARD__REWARD_HPP_
#define HWSAFE__REWARD__REWARD_HPP_

/**
 * @file
 * @brief Shaped driving reward: efficiency (speed, exploration, overtake) plus safety
 * (collision, TTC and distance penalties), normalized into [-1, 1] and gated by road membership.
 */

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "hwsafe/common.hpp"
#include "hwsafe/sim/world.hpp"

namespace hwsafe {

struct RewardConfig
{
  double v_thre{20.0};
  double v_max{30.0};
  double r_exp{0.4};
  double c_pos{5.0};
  double c_neg{0.5};
  double r_c{-2.0};
  double c_tl_lon{0.2};
  double c_el_lon{0.2};
  double c_nv_lat{0.2};
  double c_min_dis{0.2};
  /// opposite lane change within this many decisions counts as oscillation
  int oscillation_window{5};
  /// floor for TTC and distance denominators
  double min_denominator{0.1};
  /// lateral window for neighbor referents (m)
  double r_roi{15.0};
  /// the target-lane leader counts while |y - y_ref| exceeds this fraction of the lane width
  double tl_lateral_fraction{0.25};

  void validate() const
  {
    if (!(v_thre < v_max)) { throw ConfigError("reward v_thre must be below v_max"); }
    if (!(r_c < 0.0)) { throw ConfigError("reward r_c must be negative"); }
    if (!(r_exp > 0.0) || !(c_pos > 0.0) || !(c_neg > 0.0)) { throw ConfigError("reward r_exp, c_pos, c_neg must be positive"); }
    if (c_tl_lon < 0.0 || c_el_lon < 0.0 || c_nv_lat < 0.0 || c_min_dis < 0.0) {
      throw ConfigError("reward TTC constants must be non-negative");
    }
    if (oscillation_window < 0) { throw ConfigError("reward oscillation_window must be >= 0"); }
    if (!(min_denominator > 0.0) || !(r_roi > 0.0)) { throw ConfigError("reward min_denominator and r_roi must be positive"); }
  }

  /**
   * @brief Bound on |unscaled reward| used by the scaling step.
   *
   * Speed over v in [0, v_max], one exploration bonus, an overtake swing of the whole expected
   * traffic (|dN| <= N_env), the collision penalty, and every TTC/distance term at its floor.
   */
  double normalizer() const
  {
    const double span  = std::abs(v_max - v_thre);
    const double speed = std::max(std::abs(-v_thre / span), std::abs((v_max - v_thre) / span));
    const double ttc   = (2.0 * c_tl_lon + 2.0 * c_el_lon + 2.0 * c_nv_lat + c_min_dis) / min_denominator;
    return speed + r_exp + std::max(c_pos, c_neg) + std::abs(r_c) + ttc;
  }
};

struct RewardBreakdown
{
  double r_speed{0.0};
  double r_exploration{0.0};
  double r_overtake{0.0};
  double r_collision{0.0};
  double r_lon_ttc{0.0};
  double r_lat_ttc{0.0};
  double r_distance{0.0};
  int road_indicator{1};
  /// unscaled efficiency + safety
  double raw{0.0};
  double total{0.0};

  double r_efficiency() const { return r_speed + r_exploration + r_overtake; }
  double r_ttc() const { return r_lon_ttc + r_lat_ttc + r_distance; }
  double r_safety() const { return r_collision + r_ttc(); }
};

inline double speed_reward(double v, const RewardConfig & cfg)
{
  return (v - cfg.v_thre) / std::abs(cfg.v_max - cfg.v_thre);
}

/// Lane changes that stay on the road.
inline bool lane_change_valid(Action a, int lane, const RoadModel & road)
{
  if (a == Action::LC) { return lane > road.leftmost(); }
  if (a == Action::RC) { return lane < road.rightmost(); }
  return false;
}

/// Last valid lane change, in decision steps.
struct LaneChangeHistory
{
  std::optional<Action> last_action;
  long last_step{0};
};

/**
 * @brief Exploration term. Updates @p history with valid lane changes.
 *
 * +r_exp for a valid lane change, -r_exp when it reverses the previous lane change within the
 * oscillation window, 0 otherwise.
 */
inline double exploration_reward(
  Action a, int lane, const RoadModel & road, LaneChangeHistory & history, long step, const RewardConfig & cfg)
{
  if (!lane_change_valid(a, lane, road)) { return 0.0; }
  const bool reverses = history.last_action && *history.last_action != a
                        && step - history.last_step <= cfg.oscillation_window;
  history.last_action = a;
  history.last_step   = step;
  return reverses ? -cfg.r_exp : cfg.r_exp;
}

inline double overtake_reward(int delta_n, double n_env, const RewardConfig & cfg)
{
  if (delta_n == 0 || !(n_env > 0.0)) { return 0.0; }
  const double c = delta_n > 0 ? cfg.c_pos : cfg.c_neg;
  return c * static_cast<double>(delta_n) / n_env;
}

/**
 * @brief Which vehicles the ego is ahead of (strictly greater x, any lane).
 *
 * The change between two snapshots is counted only over vehicles present in both, so spawns and
 * despawns at the window edges do not register as overtakes.
 */
class OvertakeTracker
{
public:
  OvertakeTracker() = default;
  explicit OvertakeTracker(const WorldState & w) { observe(w); }

  /// Record a new snapshot and return N_a,t - N_a,t-1 over shared vehicles.
  int update(const WorldState & w)
  {
    std::map<int, bool> now;
    int delta = 0;
    for (const auto & h : w.hdvs) {
      const bool ahead = w.ego.x > h.state.x;
      now[h.id]        = ahead;
      if (auto it = ahead_.find(h.id); it != ahead_.end()) { delta += static_cast<int>(ahead) - static_cast<int>(it->second); }
    }
    ahead_ = std::move(now);
    return delta;
  }

  void observe(const WorldState & w) { update(w); }

  int count() const
  {
    int n = 0;
    for (const auto & [id, ahead] : ahead_) { n += ahead ? 1 : 0; }
    return n;
  }

  std::size_t tracked() const { return ahead_.size(); }

private:
  std::map<int, bool> ahead_;
};

/// TTC (s) and distance (m) of each referent; absent referents are empty.
struct SafetyReferents
{
  std::optional<double> t_el, d_el;
  std::optional<double> t_tl, d_tl;
  std::optional<double> t_nv, d_nv;
  std::optional<double> d_min;
};

/**
 * @brief Referents of the safety terms.
 *
 * el: nearest vehicle ahead occupying the ego lane. tl: nearest vehicle ahead occupying the
 * target lane, only while a commanded lane change is still far from the target center.
 * nv: adjacent-lane vehicle within r_roi with the smallest lateral TTC. d_min: smallest
 * center distance to any vehicle.
 */
inline SafetyReferents resolve_referents(
  const WorldState & w, const ScenarioConfig & scenario, int target_lane, bool lane_change, const RewardConfig & cfg)
{
  const RoadModel road = scenario.road();
  const auto & ego     = w.ego;
  const int ego_lane   = road.nearest_lane(ego.y);
  const double len     = scenario.ego.length;
  const double width   = scenario.ego.width;
  const double hdv_w   = scenario.hdv.vehicle.width;

  auto leader_in = [&](int lane) -> const Hdv * {
    const Hdv * best = nullptr;
    for (const auto & h : w.hdvs) {
      if (h.state.x <= ego.x || !occupies_lane(h.state.y, lane, road, hdv_w)) { continue; }
      if (!best || h.state.x < best->state.x) { best = &h; }
    }
    return best;
  };
  auto lon_gap = [&](const Hdv & h) { return std::max(0.0, std::abs(h.state.x - ego.x) - len); };

  SafetyReferents r;
  if (const Hdv * el = leader_in(ego_lane)) {
    r.t_el = compute_ttc(ego, el->state, TtcAxis::Longitudinal, len, width);
    r.d_el = lon_gap(*el);
  }
  if (lane_change && road.valid_lane(target_lane)
      && std::abs(ego.y - road.lane_center(target_lane)) > cfg.tl_lateral_fraction * road.lane_width) {
    if (const Hdv * tl = leader_in(target_lane)) {
      r.t_tl = compute_ttc(ego, tl->state, TtcAxis::Longitudinal, len, width);
      r.d_tl = lon_gap(*tl);
    }
  }
  for (const auto & h : w.hdvs) {
    if (std::abs(h.lane - ego_lane) != 1 || std::abs(h.state.x - ego.x) > cfg.r_roi) { continue; }
    const double t = compute_ttc(ego, h.state, TtcAxis::Lateral, len, width);
    const double d = std::max(0.0, std::abs(h.state.y - ego.y) - width);
    if (!r.t_nv || t < *r.t_nv || (t == *r.t_nv && d < *r.d_nv)) {
      r.t_nv = t;
      r.d_nv = d;
    }
  }
  for (const auto & h : w.hdvs) {
    const double d = std::hypot(h.state.x - ego.x, h.state.y - ego.y);
    if (!r.d_min || d < *r.d_min) { r.d_min = d; }
  }
  return r;
}

/// Collision, TTC and distance terms written into @p out.
inline void safety_reward(const SafetyReferents & ref, bool collided, const RewardConfig & cfg, RewardBreakdown & out)
{
  auto pen = [&](double c, const std::optional<double> & v) { return v ? -c / std::max(*v, cfg.min_denominator) : 0.0; };
  out.r_collision = collided ? cfg.r_c : 0.0;
  out.r_lon_ttc   = pen(cfg.c_tl_lon, ref.t_tl) + pen(cfg.c_el_lon, ref.t_el);
  out.r_lat_ttc   = pen(cfg.c_nv_lat, ref.t_nv);
  out.r_distance  = pen(cfg.c_tl_lon, ref.d_tl) + pen(cfg.c_el_lon, ref.d_el) + pen(cfg.c_nv_lat, ref.d_nv)
                   + pen(cfg.c_min_dis, ref.d_min);
}

/// Scale the summed components into [-1, 1] and apply the road gate.
inline void total_reward(RewardBreakdown & b, bool on_road, const RewardConfig & cfg)
{
  b.road_indicator = on_road ? 1 : 0;
  b.raw            = b.r_efficiency() + b.r_safety();
  b.total          = on_road ? std::clamp(b.raw / cfg.normalizer(), -1.0, 1.0) : 0.0;
}

/// What happened over one decision interval.
struct RewardInputs
{
  Action action{Action::LK};
  /// ego lane when the decision was taken
  int decision_lane{0};
  /// lane the planner is steering to
  int target_lane{0};
  /// any tick of the interval collided
  bool collided{false};
};

/// Per-episode reward state: overtake snapshot and lane-change history.
class RewardEngine
{
public:
  RewardEngine(RewardConfig cfg, ScenarioConfig scenario) : cfg_(std::move(cfg)), scenario_(std::move(scenario))
  {
    cfg_.validate();
  }

  void reset(const WorldState & w)
  {
    tracker_ = OvertakeTracker(w);
    history_ = {};
    step_    = 0;
  }

  /// Reward for the interval ending in @p w.
  RewardBreakdown step(const WorldState & w, const RewardInputs & in)
  {
    const RoadModel road = scenario_.road();
    RewardBreakdown b;
    b.r_speed       = speed_reward(w.ego.v, cfg_);
    b.r_exploration = exploration_reward(in.action, in.decision_lane, road, history_, step_, cfg_);
    b.r_overtake    = overtake_reward(tracker_.update(w), scenario_.target_vehicle_count(), cfg_);
    safety_reward(resolve_referents(w, scenario_, in.target_lane, in.target_lane != in.decision_lane, cfg_), in.collided, cfg_, b);
    total_reward(b, road.on_road(w.ego.y), cfg_);
    ++step_;
    return b;
  }

  const RewardConfig & config() const { return cfg_; }

private:
  RewardConfig cfg_;
  ScenarioConfig scenario_;
  OvertakeTracker tracker_;
  LaneChangeHistory history_;
  long step_{0};
};

}  // namespace hwsafe

#endif  // HWSAFE__REWARD__REWARD_HPP_

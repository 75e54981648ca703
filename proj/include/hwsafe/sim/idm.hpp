#ifndef HWSAFE__SIM__IDM_HPP_
#define HWSAFE__SIM__IDM_HPP_

/**
 * @file
 * @brief Rule-based surrounding traffic: IDM car following, MOBIL lane changes and a
 * proportional lateral controller.
 */

#include <algorithm>
#include <cmath>
#include <optional>

#include "hwsafe/sim/road.hpp"
#include "hwsafe/sim/vehicle.hpp"

namespace hwsafe {

/// Per-vehicle driver parameters, sampled at spawn.
struct DriverParams
{
  double v_desired{25.0};
  double time_headway{1.5};
  double min_gap{5.0};
  double a_max{3.0};
  double b_comfort{5.0};
  double politeness{0.2};
  double lane_change_threshold{0.2};
  double b_safe{4.0};

  /// Bumper gap the driver wants at speed v in steady state.
  double desired_gap(double v) const { return min_gap + std::max(0.0, v) * time_headway; }

  bool operator==(const DriverParams &) const = default;
};

/// Leader as seen by a follower: bumper gap and leader speed.
struct LeaderView
{
  double gap;
  double v;
};

/**
 * @brief Intelligent Driver Model acceleration.
 *
 * Without a leader only the free-road term applies. A non-positive gap returns @p a_floor.
 */
inline double idm_acceleration(
  const DriverParams & d, double v, std::optional<LeaderView> leader, double a_floor = -9.0)
{
  const double v0   = std::max(d.v_desired, 0.1);
  double acc        = d.a_max * (1.0 - std::pow(std::max(v, 0.0) / v0, 4.0));
  if (leader) {
    if (leader->gap <= 0.0) { return a_floor; }
    const double dv     = v - leader->v;
    const double s_star = d.min_gap + std::max(0.0, v * d.time_headway + v * dv / (2.0 * std::sqrt(d.a_max * d.b_comfort)));
    acc -= d.a_max * (s_star / leader->gap) * (s_star / leader->gap);
  }
  return std::max(acc, a_floor);
}

/// Neighborhood of one vehicle, resolved by lane occupancy.
struct Neighbors
{
  /// leader in the current lane (or current/target lane during a lane change)
  std::optional<LeaderView> leader;

  struct Side
  {
    bool lane_exists{false};
    /// a vehicle overlaps longitudinally in that lane
    bool blocked{false};
    std::optional<LeaderView> leader;
    /// follower in that lane: gap to self, its speed, its params
    std::optional<LeaderView> follower;
    std::optional<DriverParams> follower_driver;
    /// what the follower's leader currently is (before a change)
    std::optional<LeaderView> follower_current_leader;
  };

  Side left;
  Side right;

  /// follower in the own lane and what it would see if self left
  std::optional<LeaderView> own_follower;
  double self_length{5.0};
  std::optional<DriverParams> own_follower_driver;
};

struct LateralGains
{
  double kp_lateral{0.8};
  double kp_heading{2.5};
  double max_heading{0.4};
};

/// Steering command tracking the center of @p target_lane.
inline double lateral_steering(
  const VehicleState & s, double y_target, const VehicleParams & vp, const LateralGains & g = {})
{
  const double v           = std::max(s.v, 1.0);
  const double lat_speed   = -g.kp_lateral * (s.y - y_target);
  const double heading_cmd = std::clamp(std::asin(std::clamp(lat_speed / v, -1.0, 1.0)), -g.max_heading, g.max_heading);
  const double rate_cmd    = g.kp_heading * wrap_angle(heading_cmd - s.psi);
  return std::clamp(std::atan(vp.length / v * rate_cmd), -vp.delta_max, vp.delta_max);
}

/// Command produced for a surrounding vehicle.
struct HdvCommand
{
  ControlInput u;
  int target_lane;
};

/**
 * @brief MOBIL lane-change choice. Returns the lane to move to, or the current lane.
 */
inline int mobil_choice(const VehicleState & s, int lane, const DriverParams & d, const Neighbors & nb)
{
  const double a_self_old = idm_acceleration(d, s.v, nb.leader);

  // gain for the old follower if we leave
  double old_follower_gain = 0.0;
  if (nb.own_follower && nb.own_follower_driver) {
    const double vf = nb.own_follower->v;
    const double a_before = idm_acceleration(*nb.own_follower_driver, vf, LeaderView{nb.own_follower->gap, s.v});
    std::optional<LeaderView> after;
    if (nb.leader) { after = LeaderView{nb.own_follower->gap + nb.self_length + nb.leader->gap, nb.leader->v}; }
    old_follower_gain = idm_acceleration(*nb.own_follower_driver, vf, after) - a_before;
  }

  int best_lane    = lane;
  double best_gain = d.lane_change_threshold;
  for (const auto & [side, offset] : {std::pair{&nb.left, -1}, std::pair{&nb.right, 1}}) {
    if (!side->lane_exists || side->blocked) { continue; }
    const double a_self_new = idm_acceleration(d, s.v, side->leader);
    if (a_self_new < -d.b_safe) { continue; }
    double new_follower_gain = 0.0;
    if (side->follower) {
      const DriverParams fd = side->follower_driver.value_or(DriverParams{});
      const double vf       = side->follower->v;
      const double a_after  = idm_acceleration(fd, vf, LeaderView{side->follower->gap, s.v});
      if (a_after < -d.b_safe) { continue; }
      new_follower_gain = a_after - idm_acceleration(fd, vf, side->follower_current_leader);
    }
    const double gain = a_self_new - a_self_old + d.politeness * (new_follower_gain + old_follower_gain);
    if (gain > best_gain) {
      best_gain = gain;
      best_lane = lane + offset;
    }
  }
  return best_lane;
}

/**
 * @brief Control of one surrounding vehicle.
 *
 * IDM for the longitudinal command, MOBIL for the lane choice (only when
 * @p consider_lane_change is set and no change is in progress), proportional tracking of
 * the target lane center for steering. During a lane change @p nb.leader must already
 * cover leaders in both the current and the target lane.
 */
inline HdvCommand hdv_policy(
  const VehicleState & s, const DriverParams & d, int lane, int target_lane, const Neighbors & nb,
  const RoadModel & road, const VehicleParams & vp, bool consider_lane_change)
{
  HdvCommand cmd;
  cmd.target_lane = target_lane;
  if (consider_lane_change && target_lane == lane) { cmd.target_lane = mobil_choice(s, lane, d, nb); }

  double a = idm_acceleration(d, s.v, nb.leader, vp.a_min);
  if (cmd.target_lane != target_lane) {
    const auto & side = cmd.target_lane < lane ? nb.left : nb.right;
    a                 = std::min(a, idm_acceleration(d, s.v, side.leader, vp.a_min));
  }
  cmd.u.a     = std::clamp(a, vp.a_min, vp.a_max);
  cmd.u.delta = lateral_steering(s, road.lane_center(cmd.target_lane), vp);
  return cmd;
}

}  // namespace hwsafe

#endif  // HWSAFE__SIM__IDM_HPP_

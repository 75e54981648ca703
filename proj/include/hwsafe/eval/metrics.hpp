#ifndef HWSAFE__EVAL__METRICS_HPP_
#define HWSAFE__EVAL__METRICS_HPP_

/**
 * @file
 * @brief Episode metrics computed from a trajectory log alone.
 */

#include <cmath>

#include "hwsafe/sim/road.hpp"
#include "hwsafe/sim/trajectory.hpp"

namespace hwsafe {

struct EpisodeMetrics
{
  bool success{false};
  bool collided{false};
  bool unsolvable{false};
  /// decisions completed before the failing one (all decisions on success)
  int success_steps{0};
  int decisions{0};
  /// final ego x - initial ego x (m)
  double progress{0.0};
  double avg_velocity{0.0};
  /// mean |a_k - a_{k-1}| / dt (m/s^3)
  double avg_jerk{0.0};
  /// mean |a| (m/s^2)
  double avg_acceleration{0.0};
  int lane_changes_left{0};
  int lane_changes_right{0};
  /// mean over ticks of the smallest capped TTC (s)
  double ttc_score{0.0};
  double driving_time{0.0};

  int lane_changes() const { return lane_changes_left + lane_changes_right; }

  bool operator==(const EpisodeMetrics &) const = default;
};

/// Trailing run of planner fallbacks at the end of the log.
inline int trailing_fallbacks(const TrajectoryLog & log)
{
  int n = 0;
  for (auto it = log.ticks.rbegin(); it != log.ticks.rend() && it->fallback; ++it) { ++n; }
  return n;
}

inline EpisodeMetrics compute_metrics(const TrajectoryLog & log, const RoadModel & road, int unsolvable_ticks)
{
  EpisodeMetrics m;
  m.decisions = static_cast<int>(log.rewards.size());
  if (log.ticks.empty()) {
    m.success = true;
    return m;
  }
  m.collided   = log.ticks.back().collided;
  m.unsolvable = !m.collided && trailing_fallbacks(log) >= unsolvable_ticks;
  m.success    = !m.collided && !m.unsolvable;
  m.success_steps = m.success ? m.decisions : log.ticks.back().decision;

  const double n = static_cast<double>(log.ticks.size());
  m.progress     = log.final_ego.x - log.ticks.front().ego.x;
  m.driving_time = n * log.dt;

  int lane = road.nearest_lane(log.ticks.front().ego.y);
  auto lane_step = [&](const VehicleState & s) {
    const int l = road.nearest_lane(s.y);
    if (l < lane) { m.lane_changes_left += lane - l; }
    if (l > lane) { m.lane_changes_right += l - lane; }
    lane = l;
  };

  for (std::size_t k = 0; k < log.ticks.size(); ++k) {
    const auto & r = log.ticks[k];
    m.avg_velocity += r.ego.v / n;
    m.avg_acceleration += std::abs(r.u.a) / n;
    m.ttc_score += r.min_ttc / n;
    if (k > 0) {
      m.avg_jerk += std::abs(r.u.a - log.ticks[k - 1].u.a) / log.dt;
      lane_step(r.ego);
    }
  }
  lane_step(log.final_ego);
  if (log.ticks.size() > 1) { m.avg_jerk /= n - 1.0; }
  return m;
}

}  // namespace hwsafe

#endif  // HWSAFE__EVAL__METRICS_HPP_

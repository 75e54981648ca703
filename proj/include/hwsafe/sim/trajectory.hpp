#ifndef HWSAFE__SIM__TRAJECTORY_HPP_
#define HWSAFE__SIM__TRAJECTORY_HPP_

/**
 * @file
 * @brief Per-tick trajectory records shared by the environment, metrics and exports.
 */

#include <cstdint>
#include <vector>

#include "hwsafe/common.hpp"
#include "hwsafe/sim/world.hpp"

namespace hwsafe {

struct VehicleSnapshot
{
  int id{0};
  VehicleState state{};

  bool operator==(const VehicleSnapshot &) const = default;
};

struct TickRecord
{
  long tick{0};
  double t{0.0};
  /// decision index this tick belongs to
  int decision{0};
  Action action{Action::LK};
  int target_lane{0};
  /// state before the tick
  VehicleState ego{};
  /// control applied during the tick
  ControlInput u{};
  /// planner produced an optimal or usable solution
  bool solved{true};
  /// braking fallback was applied
  bool fallback{false};
  int qp_iterations{0};
  /// smallest capped TTC to a referent vehicle at the start of the tick (s)
  double min_ttc{kTtcCap};
  /// collision after the tick
  bool collided{false};
  std::vector<VehicleSnapshot> vehicles;

  bool operator==(const TickRecord &) const = default;
};

/// A whole episode; the final ego state follows the last tick.
struct TrajectoryLog
{
  std::uint64_t seed{0};
  double dt{0.2};
  std::vector<TickRecord> ticks;
  VehicleState final_ego{};
  /// reward of each decision
  std::vector<double> rewards;

  bool operator==(const TrajectoryLog &) const = default;
};

inline std::vector<VehicleSnapshot> snapshot_vehicles(const WorldState & w)
{
  std::vector<VehicleSnapshot> v;
  v.reserve(w.hdvs.size());
  for (const auto & h : w.hdvs) { v.push_back({h.id, h.state}); }
  return v;
}

}  // namespace hwsafe

#endif  // HWSAFE__SIM__TRAJECTORY_HPP_

#ifndef HWSAFE__SIM__SCENARIO_HPP_
#define HWSAFE__SIM__SCENARIO_HPP_

#include <cmath>
#include <cstdint>

#include "hwsafe/common.hpp"
#include "hwsafe/sim/idm.hpp"
#include "hwsafe/sim/road.hpp"
#include "hwsafe/sim/vehicle.hpp"

namespace hwsafe {

/// Sampling ranges for surrounding-vehicle drivers plus their shared vehicle limits.
struct HdvConfig
{
  double v_desired_min{18.0};
  double v_desired_max{26.0};
  double time_headway_min{1.2};
  double time_headway_max{1.8};
  double politeness_min{0.0};
  double politeness_max{0.5};
  double min_gap{5.0};
  double a_max{3.0};
  double b_comfort{5.0};
  double b_safe{4.0};
  double lane_change_threshold{0.2};
  /// lane-change decisions are taken every this many ticks
  int mobil_period{5};
  /// spawned vehicles keep at least this multiple of the IDM desired gap
  double spawn_gap_factor{1.5};
  VehicleParams vehicle{5.0, 2.0, -9.0, 3.0, 0.4, 100.0, 100.0};

  void validate() const
  {
    if (!(v_desired_min > 0.0 && v_desired_min <= v_desired_max)) { throw ConfigError("hdv desired-speed range invalid"); }
    if (!(time_headway_min > 0.0 && time_headway_min <= time_headway_max)) { throw ConfigError("hdv headway range invalid"); }
    if (!(politeness_min >= 0.0 && politeness_min <= politeness_max)) { throw ConfigError("hdv politeness range invalid"); }
    if (mobil_period < 1) { throw ConfigError("hdv mobil_period must be >= 1"); }
    if (!(spawn_gap_factor >= 1.0)) { throw ConfigError("hdv spawn_gap_factor must be >= 1"); }
    vehicle.validate();
  }
};

struct ScenarioConfig
{
  int lanes{3};
  double lane_width{4.0};
  double v_max{30.0};
  /// traffic density scale: 1.0 means base_vehicles_per_km_lane vehicles per km per lane
  double density{1.0};
  double base_vehicles_per_km_lane{6.0};
  double duration_s{30.0};
  double dt{0.2};
  std::uint64_t seed{0};
  /// ticks per policy decision
  int decision_period{5};
  /// live window of surrounding traffic relative to the ego vehicle
  double window_behind{100.0};
  double window_ahead{300.0};
  double ego_initial_speed{25.0};
  /// negative: drawn from the seed
  int ego_initial_lane{-1};
  VehicleParams ego{};
  HdvConfig hdv{};

  RoadModel road() const { return RoadModel{lanes, lane_width, v_max}; }

  long total_ticks() const { return std::lround(duration_s / dt); }

  /// Expected number of live surrounding vehicles in the window.
  double target_vehicle_count() const
  {
    return density * base_vehicles_per_km_lane * lanes * (window_behind + window_ahead) / 1000.0;
  }

  void validate() const
  {
    road().validate();
    if (!(dt > 0.0)) { throw ConfigError("dt must be positive"); }
    if (!(duration_s > 0.0)) { throw ConfigError("duration_s must be positive"); }
    const double ratio = duration_s / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
      throw ConfigError("duration_s must be a multiple of dt");
    }
    if (!(density >= 0.0)) { throw ConfigError("density must be non-negative"); }
    if (decision_period < 1) { throw ConfigError("decision_period must be >= 1"); }
    if (!(window_behind > 0.0 && window_ahead > 0.0)) { throw ConfigError("traffic window must be positive"); }
    if (ego_initial_lane >= lanes) { throw ConfigError("ego_initial_lane out of range"); }
    if (!(ego_initial_speed >= 0.0 && ego_initial_speed <= v_max)) { throw ConfigError("ego_initial_speed out of range"); }
    ego.validate();
    hdv.validate();
  }
};

}  // namespace hwsafe

#endif  // HWSAFE__SIM__SCENARIO_HPP_

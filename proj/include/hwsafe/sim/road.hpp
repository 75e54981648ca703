#ifndef HWSAFE__SIM__ROAD_HPP_
#define HWSAFE__SIM__ROAD_HPP_

#include <algorithm>
#include <cmath>

#include "hwsafe/common.hpp"

namespace hwsafe {

/**
 * @brief Straight multi-lane road.
 *
 * Lane 0 is the leftmost lane and lies at y = 0; lane indices grow to the right with y.
 */
struct RoadModel
{
  int lane_count{3};
  double lane_width{4.0};
  double v_max{30.0};

  double lane_center(int lane) const { return lane * lane_width; }

  int leftmost() const { return 0; }
  int rightmost() const { return lane_count - 1; }

  double y_min() const { return -0.5 * lane_width; }
  double y_max() const { return (lane_count - 0.5) * lane_width; }

  bool on_road(double y) const { return y >= y_min() && y <= y_max(); }

  /// Index of the lane whose center is nearest to y (clamped to the road).
  int nearest_lane(double y) const
  {
    const int l = static_cast<int>(std::lround(y / lane_width));
    return std::clamp(l, 0, lane_count - 1);
  }

  bool valid_lane(int lane) const { return lane >= 0 && lane < lane_count; }

  void validate() const
  {
    if (lane_count < 2) { throw ConfigError("road needs at least 2 lanes"); }
    if (!(lane_width > 0.0)) { throw ConfigError("lane_width must be positive"); }
    if (!(v_max > 0.0)) { throw ConfigError("v_max must be positive"); }
  }
};

}  // namespace hwsafe

#endif  // HWSAFE__SIM__ROAD_HPP_

#ifndef HWSAFE__POLICY__FEATURES_HPP_
#define HWSAFE__POLICY__FEATURES_HPP_

/**
 * @file
 * @brief Fixed-size numeric observation of a traffic scene.
 *
 * Layout: [x, y, v, psi, lane] of the ego, then (dx, dy, dvx, dvy) for the K nearest vehicles,
 * zero-padded. Every entry lies in [-1, 1].
 */

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>
#include <vector>

#include "hwsafe/sim/world.hpp"

namespace hwsafe {

struct FeatureConfig
{
  int nearest{6};
  /// longitudinal gap that maps to +-1 (m)
  double dx_scale{100.0};

  int dim() const { return kEgoFeatures + kVehicleFeatures * nearest; }

  static constexpr int kEgoFeatures     = 5;
  static constexpr int kVehicleFeatures = 4;

  void validate() const
  {
    if (nearest < 0) { throw ConfigError("features nearest must be >= 0"); }
    if (!(dx_scale > 0.0)) { throw ConfigError("features dx_scale must be positive"); }
  }
};

namespace detail {

inline double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace detail

/// Vehicles ordered by |dx|, then |dy|, then id.
inline std::vector<const Hdv *> nearest_vehicles(const WorldState & w, int k)
{
  std::vector<const Hdv *> order;
  order.reserve(w.hdvs.size());
  for (const auto & h : w.hdvs) { order.push_back(&h); }
  auto key = [&](const Hdv * h) {
    return std::tuple(std::abs(h->state.x - w.ego.x), std::abs(h->state.y - w.ego.y), h->id);
  };
  std::sort(order.begin(), order.end(), [&](const Hdv * a, const Hdv * b) { return key(a) < key(b); });
  if (static_cast<int>(order.size()) > k) { order.resize(static_cast<std::size_t>(k)); }
  return order;
}

/**
 * @brief Encode the scene relative to the ego.
 *
 * The ego x entry is always 0 so that the encoding is invariant to a shift of the whole scene.
 * y is scaled over the paved span, speeds by v_max, heading by pi, lane index over [0, lanes-1].
 */
inline Eigen::VectorXd featurize(const WorldState & w, const RoadModel & road, const FeatureConfig & cfg = {})
{
  using detail::clip_unit;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(cfg.dim());
  const auto & ego  = w.ego;
  const double span = road.y_max() - road.y_min();
  const double vmax = road.v_max;

  f(0) = 0.0;
  f(1) = clip_unit(2.0 * (ego.y - road.y_min()) / span - 1.0);
  f(2) = clip_unit(ego.v / vmax);
  f(3) = clip_unit(wrap_angle(ego.psi) / std::numbers::pi);
  f(4) = road.lane_count > 1 ? clip_unit(2.0 * road.nearest_lane(ego.y) / (road.lane_count - 1) - 1.0) : 0.0;

  int slot = FeatureConfig::kEgoFeatures;
  for (const Hdv * h : nearest_vehicles(w, cfg.nearest)) {
    f(slot + 0) = clip_unit((h->state.x - ego.x) / cfg.dx_scale);
    f(slot + 1) = clip_unit((h->state.y - ego.y) / span);
    f(slot + 2) = clip_unit((h->state.vx() - ego.vx()) / vmax);
    f(slot + 3) = clip_unit((h->state.vy() - ego.vy()) / vmax);
    slot += FeatureConfig::kVehicleFeatures;
  }
  return f;
}

}  // namespace hwsafe

#endif  // HWSAFE__POLICY__FEATURES_HPP_

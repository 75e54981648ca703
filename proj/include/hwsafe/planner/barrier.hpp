#ifndef HWSAFE__PLANNER__BARRIER_HPP_
#define HWSAFE__PLANNER__BARRIER_HPP_

/**
 * @file
 * @brief Linear decoupled discrete-time control barrier functions.
 *
 * Longitudinal:  h_lon(x) = |x - x_i| - alpha v - r_lon
 * Lateral:       h_lat(x) = |y - y_i| - r_lat
 *
 * The absolute value is resolved with the sign of the current relative displacement and
 * held fixed over the horizon, which makes every barrier affine in the ego state.
 */

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "hwsafe/planner/qp.hpp"
#include "hwsafe/sim/world.hpp"

namespace hwsafe {

struct BarrierConfig
{
  /// speed-headway coefficient (s)
  double alpha{0.5};
  double r_lon{6.0};
  double r_lat{2.5};
  /// longitudinal gap under which adjacent-lane vehicles get a lateral barrier
  double r_roi{15.0};
  double gamma_h{0.8};
  double gamma_l{0.8};

  void validate() const
  {
    if (!(gamma_h > 0.0 && gamma_h <= 1.0) || !(gamma_l > 0.0 && gamma_l <= 1.0)) {
      throw ConfigError("barrier rates must lie in (0, 1]");
    }
    if (!(alpha > 0.0 && r_lon > 0.0 && r_lat > 0.0 && r_roi > 0.0)) {
      throw ConfigError("barrier alpha, r_lon, r_lat, r_roi must be positive");
    }
  }
};

enum class BarrierKind { Longitudinal, Lateral };

constexpr std::string_view to_string(BarrierKind k) { return k == BarrierKind::Longitudinal ? "lon" : "lat"; }

struct BarrierSpec
{
  BarrierKind kind{BarrierKind::Longitudinal};
  int obstacle_id{-1};
  /// sign of (ego - obstacle) along the barrier axis at build time
  double sign{1.0};
  /// obstacle coordinate along the axis at horizon steps 0..N (constant velocity)
  std::vector<double> obstacle_pos;
  double radius{0.0};
  /// speed-headway coefficient, longitudinal only
  double alpha{0.0};

  /// Gradient of h with respect to [x, y, v, psi].
  Eigen::Vector4d gradient() const
  {
    if (kind == BarrierKind::Longitudinal) { return {sign, 0.0, -alpha, 0.0}; }
    return {0.0, sign, 0.0, 0.0};
  }

  /// Affine offset of h at horizon step k: h(x, k) = gradient' x + offset(k).
  double offset(int k) const { return -sign * obstacle_pos.at(k) - radius; }

  double value(const Eigen::Vector4d & x, int k) const { return gradient().dot(x) + offset(k); }

  /// Barrier evaluated with the true absolute value, for an obstacle at a given position.
  static double exact_value(BarrierKind kind, const VehicleState & ego, double obstacle_pos, double radius, double alpha)
  {
    if (kind == BarrierKind::Longitudinal) { return std::abs(ego.x - obstacle_pos) - alpha * ego.v - radius; }
    return std::abs(ego.y - obstacle_pos) - radius;
  }
};

/**
 * @brief Barriers for the current scene.
 *
 * Longitudinal barriers cover the leader in the ego lane and, during a lane change, the
 * leader in the target lane. Lateral barriers cover every vehicle in a lane adjacent to the
 * ego lane whose longitudinal gap is within the region of interest.
 */
inline std::vector<BarrierSpec> build_barriers(
  const WorldState & world, const ScenarioConfig & scenario, int target_lane, const BarrierConfig & cfg, int horizon)
{
  const RoadModel road = scenario.road();
  const double dt      = scenario.dt;
  const auto & ego     = world.ego;
  const int ego_lane   = road.nearest_lane(ego.y);

  auto predict = [&](double p0, double vel) {
    std::vector<double> pos(static_cast<std::size_t>(horizon) + 1);
    for (int k = 0; k <= horizon; ++k) { pos[k] = p0 + k * dt * vel; }
    return pos;
  };
  auto sgn = [](double d) { return d >= 0.0 ? 1.0 : -1.0; };

  std::vector<BarrierSpec> out;
  std::vector<int> lon_ids;

  // in the target lane, vehicles overlapping the ego body are left to the lateral barriers
  auto add_leader = [&](int lane, double min_ahead) {
    const Hdv * best = nullptr;
    for (const auto & h : world.hdvs) {
      if (h.state.x - ego.x <= min_ahead || !occupies_lane(h.state.y, lane, road, scenario.hdv.vehicle.width)) { continue; }
      if (!best || h.state.x < best->state.x) { best = &h; }
    }
    if (!best) { return; }
    for (int id : lon_ids) {
      if (id == best->id) { return; }
    }
    lon_ids.push_back(best->id);
    BarrierSpec b;
    b.kind         = BarrierKind::Longitudinal;
    b.obstacle_id  = best->id;
    b.sign         = sgn(ego.x - best->state.x);
    b.obstacle_pos = predict(best->state.x, best->state.vx());
    b.radius       = cfg.r_lon;
    b.alpha        = cfg.alpha;
    out.push_back(std::move(b));
  };

  add_leader(ego_lane, 0.0);
  if (target_lane != ego_lane && road.valid_lane(target_lane)) {
    add_leader(target_lane, 0.5 * (scenario.ego.length + scenario.hdv.vehicle.length));
  }

  for (const auto & h : world.hdvs) {
    if (std::abs(h.lane - ego_lane) != 1 || std::abs(ego.x - h.state.x) > cfg.r_roi) { continue; }
    BarrierSpec b;
    b.kind         = BarrierKind::Lateral;
    b.obstacle_id  = h.id;
    b.sign         = sgn(ego.y - h.state.y);
    b.obstacle_pos = predict(h.state.y, h.state.vy());
    b.radius       = cfg.r_lat;
    out.push_back(std::move(b));
  }
  return out;
}

/// Decision-variable layout of the horizon program.
struct QpLayout
{
  int N{10};

  static constexpr int kStates = 4;
  static constexpr int kInputs = 2;
  static constexpr int kSlacks = 2;

  /// first index of x_k, k = 1..N
  int x(int k) const { return kStates * (k - 1); }
  /// first index of u_k, k = 0..N-1
  int u(int k) const { return kStates * N + kInputs * k; }
  /// slack of step k, type 0 = longitudinal, 1 = lateral
  int eps(int k, BarrierKind kind) const
  {
    return (kStates + kInputs) * N + kSlacks * k + (kind == BarrierKind::Longitudinal ? 0 : 1);
  }

  int num_vars() const { return (kStates + kInputs + kSlacks) * N; }

  int num_dynamics_rows() const { return kStates * N; }
  int num_box_rows() const { return N /* speed */ + kInputs * N /* input */ + kInputs * N /* rate */ + kSlacks * N /* slack sign */; }
  int num_rows(int num_barriers) const { return num_dynamics_rows() + num_box_rows() + num_barriers * N; }
};

/// One linear inequality lower <= sum coeffs * z <= upper.
struct LinearRow
{
  std::vector<std::pair<int, double>> coeffs;
  double lower{-kQpInf};
  double upper{kQpInf};

  double evaluate(const Eigen::VectorXd & z) const
  {
    double s = 0.0;
    for (const auto & [i, c] : coeffs) { s += c * z(i); }
    return s;
  }
};

/**
 * @brief DCBF row for horizon step k (0-based): h(x_{k+1}) - (1 - gamma) h(x_k) - eps_k >= 0.
 *
 * For k = 0 the current state @p x0 is a constant and moves to the bound.
 */
inline LinearRow dcbf_row(const BarrierSpec & b, const QpLayout & layout, int k, double gamma, const Eigen::Vector4d & x0)
{
  if (!(gamma > 0.0 && gamma <= 1.0)) { throw std::invalid_argument("DCBF rate must lie in (0, 1]"); }
  const Eigen::Vector4d g = b.gradient();
  const double decay      = 1.0 - gamma;

  LinearRow row;
  double bound = -b.offset(k + 1) + decay * b.offset(k);
  for (int j = 0; j < 4; ++j) {
    if (g(j) != 0.0) { row.coeffs.emplace_back(layout.x(k + 1) + j, g(j)); }
  }
  if (k == 0) {
    bound += decay * g.dot(x0);
  } else if (decay != 0.0) {
    for (int j = 0; j < 4; ++j) {
      if (g(j) != 0.0) { row.coeffs.emplace_back(layout.x(k) + j, -decay * g(j)); }
    }
  }
  row.coeffs.emplace_back(layout.eps(k, b.kind), -1.0);
  row.lower = bound;
  return row;
}

}  // namespace hwsafe

#endif  // HWSAFE__PLANNER__BARRIER_HPP_

#ifndef HWSAFE__SIM__WORLD_HPP_
#define HWSAFE__SIM__WORLD_HPP_

/**
 * @file
 * @brief Deterministic highway world: ego, rule-based traffic, spawning, collisions, TTC.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "hwsafe/sim/geometry.hpp"
#include "hwsafe/sim/idm.hpp"
#include "hwsafe/sim/scenario.hpp"

namespace hwsafe {

/// Surrounding (human-driven) vehicle.
struct Hdv
{
  int id{0};
  VehicleState state{};
  int lane{0};
  int target_lane{0};
  DriverParams driver{};

  bool operator==(const Hdv &) const = default;
};

struct WorldState
{
  VehicleState ego{};
  /// input applied on the last tick (after clamping)
  ControlInput ego_input{};
  std::vector<Hdv> hdvs;
  double t{0.0};
  long tick{0};
  int next_id{0};

  bool operator==(const WorldState &) const = default;
};

using Rng = std::mt19937_64;

/// True when a body of @p width centered at @p y overlaps the strip of @p lane.
inline bool occupies_lane(double y, int lane, const RoadModel & road, double width)
{
  return std::abs(y - road.lane_center(lane)) < 0.5 * (road.lane_width + width);
}

namespace detail {

/// A vehicle as seen by the traffic logic. Ego has id -1.
struct TrafficAgent
{
  int id;
  VehicleState s;
  int lane;
  int target_lane;
  DriverParams driver;
  double length;
  double width;
};

inline std::vector<TrafficAgent> traffic_agents(const WorldState & w, const ScenarioConfig & cfg)
{
  const RoadModel road = cfg.road();
  std::vector<TrafficAgent> out;
  out.reserve(w.hdvs.size() + 1);
  const int ego_lane = road.nearest_lane(w.ego.y);
  DriverParams ego_driver;
  ego_driver.v_desired = cfg.v_max;
  out.push_back({-1, w.ego, ego_lane, ego_lane, ego_driver, cfg.ego.length, cfg.ego.width});
  for (const auto & h : w.hdvs) {
    out.push_back({h.id, h.state, h.lane, h.target_lane, h.driver, cfg.hdv.vehicle.length, cfg.hdv.vehicle.width});
  }
  return out;
}

inline double bumper_gap(const TrafficAgent & rear, const TrafficAgent & front)
{
  return front.s.x - rear.s.x - 0.5 * (front.length + rear.length);
}

/// Nearest agent ahead (dir > 0) or behind (dir < 0) of @p self occupying @p lane.
inline const TrafficAgent * nearest_in_lane(
  const std::vector<TrafficAgent> & agents, const TrafficAgent & self, int lane, int dir, const RoadModel & road)
{
  const TrafficAgent * best = nullptr;
  double best_dx            = std::numeric_limits<double>::infinity();
  for (const auto & o : agents) {
    if (o.id == self.id || !occupies_lane(o.s.y, lane, road, o.width)) { continue; }
    const double dx = (o.s.x - self.s.x) * dir;
    if (dx < 0.0 || (dx == 0.0 && dir > 0 && o.id < self.id) || (dx == 0.0 && dir < 0 && o.id > self.id)) {
      continue;
    }
    if (dx < best_dx || (dx == best_dx && best && o.id < best->id)) {
      best_dx = dx;
      best    = &o;
    }
  }
  return best;
}

inline Neighbors neighbors_of(const std::vector<TrafficAgent> & agents, const TrafficAgent & self, const RoadModel & road)
{
  Neighbors nb;
  nb.self_length = self.length;

  std::optional<LeaderView> leader;
  for (int l : {self.lane, self.target_lane}) {
    if (const auto * o = nearest_in_lane(agents, self, l, +1, road)) {
      const double g = bumper_gap(self, *o);
      if (!leader || g < leader->gap) { leader = LeaderView{g, o->s.vx()}; }
    }
  }
  nb.leader = leader;

  if (const auto * f = nearest_in_lane(agents, self, self.lane, -1, road)) {
    nb.own_follower        = LeaderView{bumper_gap(*f, self), f->s.vx()};
    nb.own_follower_driver = f->driver;
  }

  for (auto [side, lane] : {std::pair{&nb.left, self.lane - 1}, std::pair{&nb.right, self.lane + 1}}) {
    side->lane_exists = road.valid_lane(lane);
    if (!side->lane_exists) { continue; }
    for (const auto & o : agents) {
      if (o.id != self.id && occupies_lane(o.s.y, lane, road, o.width)
          && std::abs(o.s.x - self.s.x) < 0.5 * (o.length + self.length) + 2.0) {
        side->blocked = true;
      }
    }
    const auto * ld = nearest_in_lane(agents, self, lane, +1, road);
    const auto * fl = nearest_in_lane(agents, self, lane, -1, road);
    if (ld) { side->leader = LeaderView{bumper_gap(self, *ld), ld->s.vx()}; }
    if (fl) {
      side->follower        = LeaderView{bumper_gap(*fl, self), fl->s.vx()};
      side->follower_driver = fl->driver;
      if (ld) { side->follower_current_leader = LeaderView{bumper_gap(*fl, *ld), ld->s.vx()}; }
    }
  }
  return nb;
}

inline DriverParams sample_driver(const HdvConfig & h, Rng & rng)
{
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  DriverParams d;
  d.v_desired             = h.v_desired_min + (h.v_desired_max - h.v_desired_min) * u01(rng);
  d.time_headway          = h.time_headway_min + (h.time_headway_max - h.time_headway_min) * u01(rng);
  d.politeness            = h.politeness_min + (h.politeness_max - h.politeness_min) * u01(rng);
  d.min_gap               = h.min_gap;
  d.a_max                 = h.a_max;
  d.b_comfort             = h.b_comfort;
  d.b_safe                = h.b_safe;
  d.lane_change_threshold = h.lane_change_threshold;
  return d;
}

/// Whether a new vehicle at (lane, x) with speed v keeps the spawn gap to every vehicle in its lane.
inline bool spawn_gap_ok(
  const WorldState & w, const ScenarioConfig & cfg, int lane, double x, double v, const DriverParams & d)
{
  const RoadModel road = cfg.road();
  const double f       = cfg.hdv.spawn_gap_factor;
  const double len     = cfg.hdv.vehicle.length;
  auto check = [&](const VehicleState & o, double o_len, double o_width, const DriverParams & od) {
    if (!occupies_lane(o.y, lane, road, o_width)) { return true; }
    const double dx = o.x - x;
    const double gap = std::abs(dx) - 0.5 * (len + o_len);
    if (dx >= 0.0) { return gap >= f * d.desired_gap(v); }
    return gap >= f * od.desired_gap(o.v);
  };
  DriverParams ego_driver;
  ego_driver.time_headway = cfg.hdv.time_headway_max;
  if (!check(w.ego, cfg.ego.length, cfg.ego.width, ego_driver)) { return false; }
  for (const auto & h : w.hdvs) {
    if (!check(h.state, cfg.hdv.vehicle.length, cfg.hdv.vehicle.width, h.driver)) { return false; }
  }
  return true;
}

inline void add_hdv(WorldState & w, const ScenarioConfig & cfg, int lane, double x, const DriverParams & d)
{
  Hdv h;
  h.id          = w.next_id++;
  h.state       = VehicleState{x, cfg.road().lane_center(lane), d.v_desired, 0.0};
  h.lane        = lane;
  h.target_lane = lane;
  h.driver      = d;
  w.hdvs.push_back(h);
}

/// Keeps the live vehicle count near the configured target by spawning at the window edges.
inline void maintain_traffic(WorldState & w, const ScenarioConfig & cfg, Rng & rng)
{
  const double lo = w.ego.x - cfg.window_behind, hi = w.ego.x + cfg.window_ahead;
  std::erase_if(w.hdvs, [&](const Hdv & h) { return h.state.x < lo - 10.0 || h.state.x > hi + 10.0; });

  const double target = cfg.target_vehicle_count();
  if (static_cast<double>(w.hdvs.size()) + 0.5 >= target) { return; }

  std::uniform_int_distribution<int> lane_dist(0, cfg.lanes - 1);
  std::uniform_real_distribution<double> jitter(0.0, 20.0);
  const DriverParams d = sample_driver(cfg.hdv, rng);
  // slower vehicles enter ahead and are approached, faster ones enter behind
  const double x = d.v_desired < w.ego.v ? hi - jitter(rng) : lo + jitter(rng);
  for (int attempt = 0; attempt < 3; ++attempt) {
    const int lane = lane_dist(rng);
    if (spawn_gap_ok(w, cfg, lane, x, d.v_desired, d)) {
      add_hdv(w, cfg, lane, x, d);
      return;
    }
  }
}

}  // namespace detail

/**
 * @brief Initial world for a scenario: ego at x = 0 and Poisson-distributed traffic.
 */
inline WorldState initial_world(const ScenarioConfig & cfg, Rng & rng)
{
  const RoadModel road = cfg.road();
  WorldState w;
  int lane = cfg.ego_initial_lane;
  if (lane < 0) { lane = std::uniform_int_distribution<int>(0, cfg.lanes - 1)(rng); }
  w.ego = VehicleState{0.0, road.lane_center(lane), cfg.ego_initial_speed, 0.0};

  const double target = cfg.target_vehicle_count();
  if (target <= 0.0) { return w; }
  const int n = std::poisson_distribution<int>(target)(rng);
  std::uniform_int_distribution<int> lane_dist(0, cfg.lanes - 1);
  std::uniform_real_distribution<double> x_dist(-cfg.window_behind, cfg.window_ahead);
  for (int i = 0; i < n; ++i) {
    const DriverParams d = detail::sample_driver(cfg.hdv, rng);
    for (int attempt = 0; attempt < 20; ++attempt) {
      const int l    = lane_dist(rng);
      const double x = x_dist(rng);
      if (detail::spawn_gap_ok(w, cfg, l, x, d.v_desired, d)) {
        detail::add_hdv(w, cfg, l, x, d);
        break;
      }
    }
  }
  return w;
}

/**
 * @brief Advance the world one tick.
 *
 * All surrounding-vehicle commands are computed from the pre-step state, then every vehicle
 * is stepped, then out-of-window vehicles are removed and new ones spawned.
 */
inline WorldState step_world(const WorldState & world, ControlInput ego_u, const ScenarioConfig & cfg, Rng & rng)
{
  const RoadModel road = cfg.road();
  const auto agents    = detail::traffic_agents(world, cfg);

  WorldState next = world;
  clamp_input(ego_u, cfg.ego);
  next.ego       = step_kinematics(world.ego, ego_u, cfg.ego, cfg.dt);
  next.ego_input = ego_u;

  for (std::size_t i = 0; i < world.hdvs.size(); ++i) {
    const Hdv & h                 = world.hdvs[i];
    const detail::TrafficAgent & me = agents[i + 1];
    const Neighbors nb            = detail::neighbors_of(agents, me, road);
    const bool settled            = h.target_lane == h.lane && std::abs(h.state.y - road.lane_center(h.lane)) < 0.5;
    const bool decide             = settled && (world.tick + h.id) % cfg.hdv.mobil_period == 0;
    const HdvCommand cmd = hdv_policy(h.state, h.driver, h.lane, h.target_lane, nb, road, cfg.hdv.vehicle, decide);
    Hdv & out        = next.hdvs[i];
    out.state        = step_kinematics(h.state, cmd.u, cfg.hdv.vehicle, cfg.dt);
    out.target_lane  = cmd.target_lane;
    out.lane         = road.nearest_lane(out.state.y);
  }

  next.tick = world.tick + 1;
  next.t    = static_cast<double>(next.tick) * cfg.dt;
  detail::maintain_traffic(next, cfg, rng);
  return next;
}

/// Owns a world state and its random stream.
class World
{
public:
  explicit World(ScenarioConfig cfg) : cfg_(std::move(cfg)) { reset(cfg_.seed); }

  void reset(std::uint64_t seed)
  {
    rng_.seed(seed);
    state_ = initial_world(cfg_, rng_);
  }

  void step(const ControlInput & ego_u) { state_ = step_world(state_, ego_u, cfg_, rng_); }

  const WorldState & state() const { return state_; }
  WorldState & mutable_state() { return state_; }
  const ScenarioConfig & config() const { return cfg_; }
  RoadModel road() const { return cfg_.road(); }

private:
  ScenarioConfig cfg_;
  Rng rng_;
  WorldState state_;
};

/// Ego collides with a surrounding vehicle or has left the drivable area.
inline bool detect_collision(const WorldState & w, const ScenarioConfig & cfg)
{
  if (!cfg.road().on_road(w.ego.y)) { return true; }
  const auto ego = OrientedRect::of(w.ego, cfg.ego.length, cfg.ego.width);
  const double reach = cfg.ego.length + cfg.hdv.vehicle.length;
  for (const auto & h : w.hdvs) {
    if (std::abs(h.state.x - w.ego.x) > reach || std::abs(h.state.y - w.ego.y) > reach) { continue; }
    if (rects_overlap(ego, OrientedRect::of(h.state, cfg.hdv.vehicle.length, cfg.hdv.vehicle.width))) { return true; }
  }
  return false;
}

enum class TtcAxis { Longitudinal, Lateral };

inline constexpr double kTtcCap = 100.0;

/**
 * @brief Time to collision between two vehicles along one axis.
 *
 * The gap is measured edge to edge using @p length (longitudinal) or @p width (lateral) for
 * both bodies. Opening gaps return kTtcCap; the result lies in [0, kTtcCap].
 */
inline double compute_ttc(
  const VehicleState & ego, const VehicleState & other, TtcAxis axis, double length = 5.0, double width = 2.0)
{
  double d, closing, size;
  if (axis == TtcAxis::Longitudinal) {
    d    = other.x - ego.x;
    size = length;
    closing = d >= 0.0 ? ego.vx() - other.vx() : other.vx() - ego.vx();
  } else {
    d    = other.y - ego.y;
    size = width;
    closing = d >= 0.0 ? ego.vy() - other.vy() : other.vy() - ego.vy();
  }
  if (!(closing > 0.0)) { return kTtcCap; }
  const double gap = std::max(0.0, std::abs(d) - size);
  return std::min(gap / closing, kTtcCap);
}

}  // namespace hwsafe

#endif  // HWSAFE__SIM__WORLD_HPP_

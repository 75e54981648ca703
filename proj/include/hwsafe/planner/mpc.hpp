#ifndef HWSAFE__PLANNER__MPC_HPP_
#define HWSAFE__PLANNER__MPC_HPP_

/**
 * @file
 * @brief Linearized MPC with DCBF rows, solved as one convex QP per step.
 *
 * Decision vector z = [x_1..x_N, u_0..u_{N-1}, eps_0..eps_{N-1}] (see QpLayout). The
 * longitudinal axis is planned relative to the current ego position, which keeps the numbers
 * small far down the road; the kinematics are invariant to that shift.
 */

#include <Eigen/Sparse>

#include <algorithm>
#include <cassert>
#include <vector>

#include "hwsafe/common.hpp"
#include "hwsafe/planner/barrier.hpp"
#include "hwsafe/planner/qp.hpp"
#include "hwsafe/sim/idm.hpp"
#include "hwsafe/sim/world.hpp"

namespace hwsafe {

struct PlannerWeights
{
  Eigen::Vector2d Q{0.05, 0.05};
  Eigen::Vector2d P{0.2, 0.2};
  Eigen::Vector4d R{0.0, 8.0, 0.1, 0.0};
  double S{5.0};
  /// (longitudinal, lateral)
  Eigen::Vector2d R_eps{10.0, 500.0};
  int N{10};

  void validate() const
  {
    if ((Q.array() < 0.0).any() || (P.array() < 0.0).any() || (R.array() < 0.0).any() || (R_eps.array() < 0.0).any()
        || !(S >= 0.0)) {
      throw ConfigError("planner weights must be non-negative");
    }
    if (N < 1) { throw ConfigError("planner horizon must be >= 1"); }
  }
};

struct ReferenceSpec
{
  int target_lane{0};
  double y_ref{0.0};
  double v_ref{28.0};
  double psi_ref{0.0};
};

struct PlannerConfig
{
  PlannerWeights weights{};
  BarrierConfig barrier{};
  QpSettings qp{};
  /// cruise reference below the road speed limit
  double v_ref_margin{2.0};

  void validate() const
  {
    weights.validate();
    barrier.validate();
    if (!(v_ref_margin >= 0.0)) { throw ConfigError("planner v_ref_margin must be non-negative"); }
    if (!(qp.tol > 0.0) || qp.max_iter < 1) { throw ConfigError("planner qp tol/max_iter invalid"); }
  }
};

/// Assembled program plus the bookkeeping needed to read the solution back.
struct MpcProblem
{
  QpProblem qp;
  QpLayout layout;
  /// ego x subtracted from every longitudinal coordinate
  double x_shift{0.0};
  /// first DCBF row
  int dcbf_row_begin{0};
};

namespace detail {

inline void add_block(std::vector<Eigen::Triplet<double>> & t, int r, int c, double v)
{
  if (v != 0.0) { t.emplace_back(r, c, v); }
}

/// Barrier copy expressed in the shifted longitudinal frame.
inline BarrierSpec shifted(const BarrierSpec & b, double x_shift)
{
  BarrierSpec s = b;
  if (s.kind == BarrierKind::Longitudinal) {
    for (double & p : s.obstacle_pos) { p -= x_shift; }
  }
  return s;
}

}  // namespace detail

/// Previous input as seen by the rate limits; a stopped vehicle cannot keep decelerating.
inline ControlInput effective_prev_input(const VehicleState & ego, ControlInput prev, const VehicleParams & params, double dt)
{
  clamp_input(prev, params);
  prev.a = std::max(prev.a, std::min(0.0, -ego.v / dt));
  return prev;
}

/**
 * @brief Build the horizon QP.
 *
 * Dynamics are linearized once at (ego, prev_u) and frozen over the horizon.
 */
inline MpcProblem assemble_qp(
  const VehicleState & ego, const ReferenceSpec & ref, const PlannerWeights & w, const std::vector<BarrierSpec> & barriers,
  const BarrierConfig & bcfg, const VehicleParams & params, const ControlInput & prev_u, double v_max, double dt)
{
  const int N = w.N;
  MpcProblem out;
  out.layout  = QpLayout{N};
  out.x_shift = ego.x;
  const QpLayout & L = out.layout;
  const int n        = L.num_vars();
  const int m        = L.num_rows(static_cast<int>(barriers.size()));

  VehicleState x0s = ego;
  x0s.x            = 0.0;
  const Eigen::Vector4d x0 = x0s.vec();
  const auto lin           = linearize_dynamics(x0s, prev_u, params, dt);

  // cost
  std::vector<Eigen::Triplet<double>> pt;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
  double constant   = 0.0;
  const Eigen::Vector4d xr(0.0, ref.y_ref, ref.v_ref, ref.psi_ref);
  const Eigen::Vector2d up = prev_u.vec();

  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < 2; ++j) {
      const int i = L.u(k) + j;
      detail::add_block(pt, i, i, 2.0 * w.Q(j));
      // rate term couples u_k with u_{k-1} (or the previous applied input)
      detail::add_block(pt, i, i, 2.0 * w.P(j));
      if (k == 0) {
        q(i) -= 2.0 * w.P(j) * up(j);
        constant += w.P(j) * up(j) * up(j);
      } else {
        const int ip = L.u(k - 1) + j;
        detail::add_block(pt, ip, ip, 2.0 * w.P(j));
        detail::add_block(pt, i, ip, -2.0 * w.P(j));
        detail::add_block(pt, ip, i, -2.0 * w.P(j));
      }
    }
    for (int j = 0; j < 2; ++j) {
      const int i = L.eps(k, j == 0 ? BarrierKind::Longitudinal : BarrierKind::Lateral);
      detail::add_block(pt, i, i, 2.0 * w.R_eps(j));
    }
  }
  for (int j = 0; j < 4; ++j) {
    // x_0 is fixed, so its stage term only shifts the objective
    constant += w.R(j) * (x0(j) - xr(j)) * (x0(j) - xr(j));
    for (int k = 1; k < N; ++k) {
      const int i = L.x(k) + j;
      detail::add_block(pt, i, i, 2.0 * w.R(j));
      q(i) -= 2.0 * w.R(j) * xr(j);
      constant += w.R(j) * xr(j) * xr(j);
    }
  }
  {
    const int i = L.x(N) + 3;
    detail::add_block(pt, i, i, 2.0 * w.S);
    q(i) -= 2.0 * w.S * ref.psi_ref;
    constant += w.S * ref.psi_ref * ref.psi_ref;
  }

  // constraints
  std::vector<Eigen::Triplet<double>> at;
  Eigen::VectorXd lo(m), hi(m);
  int r = 0;

  const Eigen::Vector4d c0 = lin.A * x0 + lin.C;
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < 4; ++i, ++r) {
      at.emplace_back(r, L.x(k + 1) + i, 1.0);
      if (k > 0) {
        for (int j = 0; j < 4; ++j) { detail::add_block(at, r, L.x(k) + j, -lin.A(i, j)); }
      }
      for (int j = 0; j < 2; ++j) { detail::add_block(at, r, L.u(k) + j, -lin.B(i, j)); }
      lo(r) = hi(r) = (k == 0 ? c0(i) : lin.C(i));
    }
  }
  for (int k = 1; k <= N; ++k, ++r) {
    at.emplace_back(r, L.x(k) + 2, 1.0);
    lo(r) = 0.0;
    hi(r) = v_max;
  }
  const Eigen::Vector2d umin(params.a_min, -params.delta_max), umax(params.a_max, params.delta_max);
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < 2; ++j, ++r) {
      at.emplace_back(r, L.u(k) + j, 1.0);
      lo(r) = umin(j);
      hi(r) = umax(j);
    }
  }
  const Eigen::Vector2d rate(params.da_max, params.ddelta_max);
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < 2; ++j, ++r) {
      at.emplace_back(r, L.u(k) + j, 1.0);
      if (k == 0) {
        lo(r) = up(j) - rate(j);
        hi(r) = up(j) + rate(j);
      } else {
        at.emplace_back(r, L.u(k - 1) + j, -1.0);
        lo(r) = -rate(j);
        hi(r) = rate(j);
      }
    }
  }
  for (int k = 0; k < N; ++k) {
    for (auto kind : {BarrierKind::Longitudinal, BarrierKind::Lateral}) {
      at.emplace_back(r, L.eps(k, kind), 1.0);
      lo(r) = -kQpInf;
      hi(r) = 0.0;
      ++r;
    }
  }
  out.dcbf_row_begin = r;
  for (const auto & b0 : barriers) {
    const BarrierSpec b = detail::shifted(b0, out.x_shift);
    const double gamma  = b.kind == BarrierKind::Longitudinal ? bcfg.gamma_h : bcfg.gamma_l;
    for (int k = 0; k < N; ++k, ++r) {
      const LinearRow row = dcbf_row(b, L, k, gamma, x0);
      for (const auto & [c, v] : row.coeffs) { at.emplace_back(r, c, v); }
      lo(r) = row.lower;
      hi(r) = row.upper;
    }
  }
  assert(r == m);

  out.qp.P.resize(n, n);
  out.qp.P.setFromTriplets(pt.begin(), pt.end());
  out.qp.A.resize(m, n);
  out.qp.A.setFromTriplets(at.begin(), at.end());
  out.qp.q        = q;
  out.qp.l        = lo;
  out.qp.u        = hi;
  out.qp.constant = constant;
  return out;
}

struct PlannerSolution
{
  ControlInput u0{};
  /// x_0..x_N in world coordinates
  std::vector<VehicleState> predicted;
  /// inputs u_0..u_{N-1}
  std::vector<ControlInput> inputs;
  /// (lon, lat) slack per step
  std::vector<Eigen::Vector2d> slack;
  QpStatus status{QpStatus::MaxIter};
  double solve_time{0.0};
  int iterations{0};
  double objective{0.0};
  /// braking fallback applied because no usable solution was found
  bool fallback{false};
  /// requested lane change pointed off the road and was replaced by lane keeping
  bool coerced{false};
  ReferenceSpec reference{};
  std::vector<BarrierSpec> barriers;
  /// h of every barrier at the current state
  std::vector<double> barrier_values;
};

/// Maximal braking while holding the current lane.
inline ControlInput braking_fallback(const WorldState & world, const ScenarioConfig & scenario)
{
  const RoadModel road = scenario.road();
  const double y_c     = road.lane_center(road.nearest_lane(world.ego.y));
  return {scenario.ego.a_min, lateral_steering(world.ego, y_c, scenario.ego)};
}

/**
 * @brief One receding-horizon step toward a fixed target lane.
 *
 * The previous applied input is taken from the world record.
 */
inline PlannerSolution plan_to_lane(const WorldState & world, int target_lane, const ScenarioConfig & scenario, const PlannerConfig & cfg)
{
  const RoadModel road = scenario.road();
  const auto & params  = scenario.ego;
  const int N          = cfg.weights.N;

  PlannerSolution sol;
  sol.reference.target_lane = target_lane;
  sol.reference.y_ref       = road.lane_center(target_lane);
  sol.reference.v_ref       = road.v_max - cfg.v_ref_margin;
  sol.reference.psi_ref     = 0.0;

  sol.barriers = build_barriers(world, scenario, target_lane, cfg.barrier, N);
  for (const auto & b : sol.barriers) { sol.barrier_values.push_back(b.value(world.ego.vec(), 0)); }

  const ControlInput prev = effective_prev_input(world.ego, world.ego_input, params, scenario.dt);
  const MpcProblem mp =
    assemble_qp(world.ego, sol.reference, cfg.weights, sol.barriers, cfg.barrier, params, prev, road.v_max, scenario.dt);
  const QpSolution qs = solve_qp(mp.qp, cfg.qp);

  sol.status     = qs.status;
  sol.solve_time = qs.solve_time;
  sol.iterations = qs.iterations;
  sol.objective  = qs.objective;

  const bool usable = qs.status == QpStatus::Optimal || qs.status == QpStatus::MaxIter;
  if (!usable || !qs.x.allFinite()) {
    sol.fallback = true;
    sol.u0       = braking_fallback(world, scenario);
    return sol;
  }

  const QpLayout & L = mp.layout;
  sol.predicted.push_back(world.ego);
  for (int k = 1; k <= N; ++k) {
    VehicleState s = VehicleState::from_vec(qs.x.segment<4>(L.x(k)));
    s.x += mp.x_shift;
    sol.predicted.push_back(s);
  }
  for (int k = 0; k < N; ++k) {
    sol.inputs.push_back(ControlInput::from_vec(qs.x.segment<2>(L.u(k))));
    sol.slack.emplace_back(qs.x(L.eps(k, BarrierKind::Longitudinal)), qs.x(L.eps(k, BarrierKind::Lateral)));
  }
  ControlInput u0 = sol.inputs.front();
  // an unconverged iterate may sit slightly outside the boxes
  u0.a     = std::clamp(u0.a, prev.a - params.da_max, prev.a + params.da_max);
  u0.delta = std::clamp(u0.delta, prev.delta - params.ddelta_max, prev.delta + params.ddelta_max);
  clamp_input(u0, params);
  sol.u0 = u0;
  return sol;
}

/// Target lane implied by an action from @p lane; off-road targets fall back to @p lane.
inline int resolve_target_lane(Action action, int lane, const RoadModel & road, bool * coerced = nullptr)
{
  const int target = lane + action_lane_offset(action);
  const bool bad   = !road.valid_lane(target);
  if (coerced) { *coerced = bad; }
  return bad ? lane : target;
}

/// One receding-horizon step for a lane decision taken from the current ego lane.
inline PlannerSolution plan_step(const WorldState & world, Action action, const ScenarioConfig & scenario, const PlannerConfig & cfg)
{
  const RoadModel road = scenario.road();
  bool coerced         = false;
  const int target     = resolve_target_lane(action, road.nearest_lane(world.ego.y), road, &coerced);
  PlannerSolution sol  = plan_to_lane(world, target, scenario, cfg);
  sol.coerced          = coerced;
  return sol;
}

/**
 * @brief Planner that holds a lane decision between policy updates.
 *
 * The target lane is fixed when a decision arrives so that crossing a lane boundary mid-change
 * does not shift the target again.
 */
class SafetyPlanner
{
public:
  SafetyPlanner(ScenarioConfig scenario, PlannerConfig cfg) : scenario_(std::move(scenario)), cfg_(std::move(cfg))
  {
    cfg_.validate();
  }

  /// Register a new decision. Returns whether it had to be coerced to lane keeping.
  bool decide(Action action, const WorldState & world)
  {
    const RoadModel road = scenario_.road();
    target_lane_         = resolve_target_lane(action, road.nearest_lane(world.ego.y), road, &coerced_);
    return coerced_;
  }

  PlannerSolution plan(const WorldState & world) const
  {
    const int target = target_lane_ < 0 ? scenario_.road().nearest_lane(world.ego.y) : target_lane_;
    PlannerSolution sol = plan_to_lane(world, target, scenario_, cfg_);
    sol.coerced         = coerced_;
    return sol;
  }

  int target_lane() const { return target_lane_; }
  const PlannerConfig & config() const { return cfg_; }

private:
  ScenarioConfig scenario_;
  PlannerConfig cfg_;
  int target_lane_{-1};
  bool coerced_{false};
};

}  // namespace hwsafe

#endif  // HWSAFE__PLANNER__MPC_HPP_

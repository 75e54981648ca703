#ifndef HWSAFE__EVAL__TRAJECTORY_LOG_HPP_
#define HWSAFE__EVAL__TRAJECTORY_LOG_HPP_

/**
 * @file
 * @brief Trajectory log serialization and the scene-sequence export used for plotting.
 *
 * Doubles are written with round-trip precision so a reloaded log equals the original exactly.
 */

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hwsafe/sim/trajectory.hpp"

namespace hwsafe {

inline constexpr int kLogSchemaVersion = 1;

namespace log_detail {

inline nlohmann::json state_json(const VehicleState & s) { return {s.x, s.y, s.v, s.psi}; }

inline VehicleState state_from(const nlohmann::json & j)
{
  if (!j.is_array() || j.size() != 4) { throw std::runtime_error("log state must be [x, y, v, psi]"); }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

}  // namespace log_detail

inline nlohmann::json to_json(const TrajectoryLog & log)
{
  using log_detail::state_json;
  nlohmann::json ticks = nlohmann::json::array();
  for (const auto & r : log.ticks) {
    nlohmann::json veh = nlohmann::json::array();
    for (const auto & v : r.vehicles) { veh.push_back({{"id", v.id}, {"s", state_json(v.state)}}); }
    ticks.push_back({{"tick", r.tick},
                     {"t", r.t},
                     {"decision", r.decision},
                     {"action", std::string(action_name(r.action))},
                     {"target_lane", r.target_lane},
                     {"ego", state_json(r.ego)},
                     {"u", {r.u.a, r.u.delta}},
                     {"solved", r.solved},
                     {"fallback", r.fallback},
                     {"qp_iterations", r.qp_iterations},
                     {"min_ttc", r.min_ttc},
                     {"collided", r.collided},
                     {"vehicles", std::move(veh)}});
  }
  return {{"schema_version", kLogSchemaVersion}, {"seed", log.seed},       {"dt", log.dt},
          {"final_ego", state_json(log.final_ego)}, {"rewards", log.rewards}, {"ticks", std::move(ticks)}};
}

inline TrajectoryLog log_from_json(const nlohmann::json & j)
{
  if (j.value("schema_version", 0) != kLogSchemaVersion) { throw std::runtime_error("unsupported trajectory log version"); }
  TrajectoryLog log;
  log.seed      = j.at("seed").get<std::uint64_t>();
  log.dt        = j.at("dt").get<double>();
  log.final_ego = log_detail::state_from(j.at("final_ego"));
  log.rewards   = j.at("rewards").get<std::vector<double>>();
  for (const auto & t : j.at("ticks")) {
    TickRecord r;
    r.tick        = t.at("tick").get<long>();
    r.t           = t.at("t").get<double>();
    r.decision    = t.at("decision").get<int>();
    const auto a  = parse_action(t.at("action").get<std::string>());
    if (!a) { throw std::runtime_error("unknown action in trajectory log"); }
    r.action        = *a;
    r.target_lane   = t.at("target_lane").get<int>();
    r.ego           = log_detail::state_from(t.at("ego"));
    r.u             = {t.at("u")[0].get<double>(), t.at("u")[1].get<double>()};
    r.solved        = t.at("solved").get<bool>();
    r.fallback      = t.at("fallback").get<bool>();
    r.qp_iterations = t.at("qp_iterations").get<int>();
    r.min_ttc       = t.at("min_ttc").get<double>();
    r.collided      = t.at("collided").get<bool>();
    for (const auto & v : t.at("vehicles")) { r.vehicles.push_back({v.at("id").get<int>(), log_detail::state_from(v.at("s"))}); }
    log.ticks.push_back(std::move(r));
  }
  return log;
}

inline void write_log(const std::string & path, const TrajectoryLog & log)
{
  std::ofstream out(path);
  if (!out) { throw std::runtime_error("cannot write " + path); }
  out << to_json(log).dump() << '\n';
}

inline TrajectoryLog read_log(const std::string & path)
{
  std::ifstream in(path);
  if (!in) { throw std::runtime_error("cannot open trajectory log " + path); }
  nlohmann::json j;
  in >> j;
  return log_from_json(j);
}

/// One row per vehicle per tick: frame, t, id (-1 = ego), x, y, v, psi. The final ego state closes the sequence.
inline std::string scene_sequence_csv(const TrajectoryLog & log)
{
  std::string out = "frame,t,id,x,y,v,psi\n";
  char buf[256];
  auto row = [&](long frame, double t, int id, const VehicleState & s) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%d,%.17g,%.17g,%.17g,%.17g\n", frame, t, id, s.x, s.y, s.v, s.psi);
    out += buf;
  };
  for (const auto & r : log.ticks) {
    row(r.tick, r.t, -1, r.ego);
    for (const auto & v : r.vehicles) { row(r.tick, r.t, v.id, v.state); }
  }
  if (!log.ticks.empty()) {
    const auto & last = log.ticks.back();
    row(last.tick + 1, last.t + log.dt, -1, log.final_ego);
  }
  return out;
}

struct SceneRow
{
  long frame;
  double t;
  int id;
  VehicleState state;
};

inline std::vector<SceneRow> parse_scene_sequence(const std::string & csv)
{
  std::vector<SceneRow> rows;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) { continue; }
    SceneRow r{};
    if (std::sscanf(line.c_str(), "%ld,%lf,%d,%lf,%lf,%lf,%lf", &r.frame, &r.t, &r.id, &r.state.x, &r.state.y, &r.state.v, &r.state.psi) != 7) {
      throw std::runtime_error("malformed scene row: " + line);
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace hwsafe

#endif  // HWSAFE__EVAL__TRAJECTORY_LOG_HPP_

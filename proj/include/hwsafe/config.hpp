#ifndef HWSAFE__CONFIG_HPP_
#define HWSAFE__CONFIG_HPP_

/**
 * @file
 * @brief JSON configuration: one document with scenario, planner, reward, features, train and
 * eval sections. Unknown keys are rejected.
 */

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "hwsafe/rl/checkpoint.hpp"
#include "hwsafe/rl/env.hpp"
#include "hwsafe/rl/ppo.hpp"

namespace hwsafe {

struct EvalConfig
{
  int tracks{20};
  std::uint64_t seed{1};
  int parallel{1};
  /// trained | random | lane_keep | external
  std::string policy{"lane_keep"};
  /// network checkpoint for the trained policy and as the external fallback
  std::string checkpoint;
  int unsolvable_ticks{10};
  bool safety_layer{true};
  int external_port{0};
  int external_timeout_ms{500};

  void validate() const
  {
    if (tracks < 1) { throw ConfigError("eval tracks must be >= 1"); }
    if (parallel < 1) { throw ConfigError("eval parallel must be >= 1"); }
    if (policy != "trained" && policy != "random" && policy != "lane_keep" && policy != "external") {
      throw ConfigError("eval policy must be one of trained, random, lane_keep, external");
    }
    if (unsolvable_ticks < 1) { throw ConfigError("eval unsolvable_ticks must be >= 1"); }
    if (external_port < 0 || external_port > 65535) { throw ConfigError("eval external_port out of range"); }
    if (external_timeout_ms < 1) { throw ConfigError("eval external_timeout_ms must be >= 1"); }
  }
};

struct AppConfig
{
  ScenarioConfig scenario{};
  PlannerConfig planner{};
  RewardConfig reward{};
  FeatureConfig features{};
  TrainConfig train{};
  EvalConfig eval{};

  /// Copy fields shared between sections.
  void sync()
  {
    reward.v_max = scenario.v_max;
  }

  void validate() const
  {
    scenario.validate();
    planner.validate();
    reward.validate();
    features.validate();
    train.validate();
    eval.validate();
  }

  HighwayEnvConfig env_config() const
  {
    HighwayEnvConfig e;
    e.scenario         = scenario;
    e.planner          = planner;
    e.reward           = reward;
    e.features         = features;
    e.unsolvable_ticks = eval.unsolvable_ticks;
    e.safety_layer     = eval.safety_layer;
    return e;
  }
};

namespace config_detail {

/// Reads keys of one JSON object and remembers which were used.
class Reader
{
public:
  Reader(const nlohmann::json & j, std::string path) : j_(j), path_(std::move(path))
  {
    if (!j_.is_object()) { throw ConfigError(path_ + " must be an object"); }
  }

  template <typename T>
  void operator()(const char * key, T & out)
  {
    seen_.insert(key);
    if (!j_.contains(key)) { return; }
    try {
      read(j_.at(key), out, path_ + "." + key);
    } catch (const nlohmann::json::exception &) {
      throw ConfigError(path_ + "." + key + " has the wrong type");
    }
  }

  template <typename F>
  void section(const char * key, F && visit_fn)
  {
    seen_.insert(key);
    if (!j_.contains(key)) { return; }
    Reader sub(j_.at(key), path_ + "." + key);
    visit_fn(sub);
    sub.finish();
  }

  void finish() const
  {
    for (const auto & [k, v] : j_.items()) {
      if (!seen_.count(k)) { throw ConfigError("unknown config key " + path_ + "." + k); }
    }
  }

private:
  template <typename T>
  static void read(const nlohmann::json & v, T & out, const std::string &)
  {
    out = v.get<T>();
  }
  template <int N>
  static void read(const nlohmann::json & v, Eigen::Matrix<double, N, 1> & out, const std::string & path)
  {
    const auto a = v.get<std::vector<double>>();
    if (static_cast<int>(a.size()) != N) { throw ConfigError(path + " must have " + std::to_string(N) + " entries"); }
    for (int i = 0; i < N; ++i) { out(i) = a[static_cast<std::size_t>(i)]; }
  }

  const nlohmann::json & j_;
  std::string path_;
  std::set<std::string> seen_;
};

/// Writes every visited key.
class Writer
{
public:
  template <typename T>
  void operator()(const char * key, const T & v)
  {
    if constexpr (std::is_base_of_v<Eigen::MatrixBase<T>, T>) {
      j[key] = std::vector<double>(v.data(), v.data() + v.size());
    } else {
      j[key] = v;
    }
  }

  template <typename F>
  void section(const char * key, F && visit_fn)
  {
    Writer sub;
    visit_fn(sub);
    j[key] = std::move(sub.j);
  }

  nlohmann::json j = nlohmann::json::object();
};

template <typename V>
void visit(VehicleParams & p, V & v)
{
  v("length", p.length);
  v("width", p.width);
  v("a_min", p.a_min);
  v("a_max", p.a_max);
  v("delta_max", p.delta_max);
  v("da_max", p.da_max);
  v("ddelta_max", p.ddelta_max);
}

template <typename V>
void visit(HdvConfig & h, V & v)
{
  v("v_desired_min", h.v_desired_min);
  v("v_desired_max", h.v_desired_max);
  v("time_headway_min", h.time_headway_min);
  v("time_headway_max", h.time_headway_max);
  v("politeness_min", h.politeness_min);
  v("politeness_max", h.politeness_max);
  v("min_gap", h.min_gap);
  v("a_max", h.a_max);
  v("b_comfort", h.b_comfort);
  v("b_safe", h.b_safe);
  v("lane_change_threshold", h.lane_change_threshold);
  v("mobil_period", h.mobil_period);
  v("spawn_gap_factor", h.spawn_gap_factor);
  v.section("vehicle", [&](auto & s) { visit(h.vehicle, s); });
}

template <typename V>
void visit(ScenarioConfig & c, V & v)
{
  v("lanes", c.lanes);
  v("lane_width", c.lane_width);
  v("v_max", c.v_max);
  v("density", c.density);
  v("base_vehicles_per_km_lane", c.base_vehicles_per_km_lane);
  v("duration_s", c.duration_s);
  v("dt", c.dt);
  v("seed", c.seed);
  v("decision_period", c.decision_period);
  v("window_behind", c.window_behind);
  v("window_ahead", c.window_ahead);
  v("ego_initial_speed", c.ego_initial_speed);
  v("ego_initial_lane", c.ego_initial_lane);
  v.section("ego", [&](auto & s) { visit(c.ego, s); });
  v.section("hdv", [&](auto & s) { visit(c.hdv, s); });
}

template <typename V>
void visit(PlannerConfig & c, V & v)
{
  v("horizon", c.weights.N);
  v("Q", c.weights.Q);
  v("P", c.weights.P);
  v("R", c.weights.R);
  v("S", c.weights.S);
  v("R_eps", c.weights.R_eps);
  v("v_ref_margin", c.v_ref_margin);
  v.section("barrier", [&](auto & s) {
    s("alpha", c.barrier.alpha);
    s("r_lon", c.barrier.r_lon);
    s("r_lat", c.barrier.r_lat);
    s("r_roi", c.barrier.r_roi);
    s("gamma_h", c.barrier.gamma_h);
    s("gamma_l", c.barrier.gamma_l);
  });
  v.section("qp", [&](auto & s) {
    s("tol", c.qp.tol);
    s("max_iter", c.qp.max_iter);
    s("rho", c.qp.rho);
    s("sigma", c.qp.sigma);
    s("alpha", c.qp.alpha);
    s("polish", c.qp.polish);
  });
}

template <typename V>
void visit(RewardConfig & c, V & v)
{
  v("v_thre", c.v_thre);
  v("r_exp", c.r_exp);
  v("c_pos", c.c_pos);
  v("c_neg", c.c_neg);
  v("r_c", c.r_c);
  v("c_tl_lon", c.c_tl_lon);
  v("c_el_lon", c.c_el_lon);
  v("c_nv_lat", c.c_nv_lat);
  v("c_min_dis", c.c_min_dis);
  v("oscillation_window", c.oscillation_window);
  v("min_denominator", c.min_denominator);
  v("r_roi", c.r_roi);
  v("tl_lateral_fraction", c.tl_lateral_fraction);
}

template <typename V>
void visit(FeatureConfig & c, V & v)
{
  v("nearest", c.nearest);
  v("dx_scale", c.dx_scale);
}

template <typename V>
void visit(TrainConfig & c, V & v)
{
  v("gamma", c.gamma);
  v("lambda", c.lambda);
  v("clip", c.clip);
  v("c1", c.c1);
  v("c2", c.c2);
  v("batch_size", c.batch_size);
  v("learning_rate", c.learning_rate);
  v("total_timesteps", c.total_timesteps);
  v("epochs", c.epochs);
  v("rollout_length", c.rollout_length);
  v("max_grad_norm", c.max_grad_norm);
  v("normalize_advantages", c.normalize_advantages);
  v("hidden", c.hidden);
  v("seed", c.seed);
}

template <typename V>
void visit(EvalConfig & c, V & v)
{
  v("tracks", c.tracks);
  v("seed", c.seed);
  v("parallel", c.parallel);
  v("policy", c.policy);
  v("checkpoint", c.checkpoint);
  v("unsolvable_ticks", c.unsolvable_ticks);
  v("safety_layer", c.safety_layer);
  v("external_port", c.external_port);
  v("external_timeout_ms", c.external_timeout_ms);
}

template <typename V>
void visit(AppConfig & c, V & v)
{
  v.section("scenario", [&](auto & s) { visit(c.scenario, s); });
  v.section("planner", [&](auto & s) { visit(c.planner, s); });
  v.section("reward", [&](auto & s) { visit(c.reward, s); });
  v.section("features", [&](auto & s) { visit(c.features, s); });
  v.section("train", [&](auto & s) { visit(c.train, s); });
  v.section("eval", [&](auto & s) { visit(c.eval, s); });
}

}  // namespace config_detail

/// Defaults overridden by @p j; throws ConfigError on unknown keys, wrong types or invalid values.
inline AppConfig config_from_json(const nlohmann::json & j)
{
  AppConfig c;
  config_detail::Reader r(j, "config");
  config_detail::visit(c, r);
  r.finish();
  c.sync();
  c.validate();
  return c;
}

inline nlohmann::json config_to_json(AppConfig c)
{
  config_detail::Writer w;
  config_detail::visit(c, w);
  return std::move(w.j);
}

inline AppConfig load_config(const std::string & path)
{
  std::ifstream in(path);
  if (!in) { throw ConfigError("cannot open config file " + path); }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception & e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

/// Hash of the sections that define a training run.
inline std::string training_config_hash(const AppConfig & c)
{
  const auto j = config_to_json(c);
  nlohmann::json k{{"scenario", j["scenario"]}, {"planner", j["planner"]}, {"reward", j["reward"]},
                   {"features", j["features"]}, {"train", j["train"]}};
  return hex64(fnv1a64(k.dump()));
}

}  // namespace hwsafe

#endif  // HWSAFE__CONFIG_HPP_

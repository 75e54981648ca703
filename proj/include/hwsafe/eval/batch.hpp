#ifndef HWSAFE__EVAL__BATCH_HPP_
#define HWSAFE__EVAL__BATCH_HPP_

/**
 * @file
 * @brief Episode runner, parallel batch evaluation and report writers.
 *
 * Reports contain only quantities that are a function of the seeds and configuration; wall-clock
 * timing goes to a separate file.
 */

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hwsafe/config.hpp"
#include "hwsafe/eval/metrics.hpp"
#include "hwsafe/eval/trajectory_log.hpp"
#include "hwsafe/policy/prompt.hpp"
#include "hwsafe/policy/wire.hpp"

namespace hwsafe {

enum class PolicyKind { Trained, Random, LaneKeep, External };

inline std::optional<PolicyKind> parse_policy_kind(std::string_view s)
{
  if (s == "trained") { return PolicyKind::Trained; }
  if (s == "random") { return PolicyKind::Random; }
  if (s == "lane_keep") { return PolicyKind::LaneKeep; }
  if (s == "external") { return PolicyKind::External; }
  return std::nullopt;
}

inline std::string_view to_string(PolicyKind k)
{
  switch (k) {
    case PolicyKind::Trained: return "trained";
    case PolicyKind::Random: return "random";
    case PolicyKind::LaneKeep: return "lane_keep";
    case PolicyKind::External: return "external";
  }
  return "lane_keep";
}

/// Seed of evaluation track @p i; disjoint in practice from training_episode_seed.
inline std::uint64_t eval_track_seed(std::uint64_t base, int i)
{
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(i) + 1);
  z               = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z               = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Lane decision source for one episode.
class DecisionPolicy
{
public:
  virtual ~DecisionPolicy() = default;
  virtual Action decide(const Eigen::VectorXd & obs, const WorldState & w) = 0;
  /// fallback events raised so far (external backend only)
  std::vector<std::string> events;
};

class LaneKeepPolicy : public DecisionPolicy
{
public:
  Action decide(const Eigen::VectorXd &, const WorldState &) override { return Action::LK; }
};

class RandomPolicy : public DecisionPolicy
{
public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  Action decide(const Eigen::VectorXd &, const WorldState &) override
  {
    return action_from_index(std::uniform_int_distribution<int>(0, kNumActions - 1)(rng_));
  }

private:
  std::mt19937_64 rng_;
};

/// Greedy action of a network.
class NetworkPolicy : public DecisionPolicy
{
public:
  explicit NetworkPolicy(const ActorCriticNet & net) : net_(net) {}
  Action decide(const Eigen::VectorXd & obs, const WorldState &) override
  {
    return action_from_index(greedy_action(net_.forward(obs).probs));
  }

private:
  const ActorCriticNet & net_;
};

class ExternalDecisionPolicy : public DecisionPolicy
{
public:
  ExternalDecisionPolicy(const ExternalPolicy & backend, RoadModel road, PromptConfig prompt)
  : backend_(backend), road_(road), prompt_(std::move(prompt))
  {
  }
  Action decide(const Eigen::VectorXd & obs, const WorldState & w) override
  {
    const auto r = backend_.query(render_prompt(w, road_, prompt_), obs);
    if (r.fallback) { events.push_back("tick " + std::to_string(w.tick) + ": " + r.event); }
    return action_from_index(greedy_action(r.output.probs));
  }

private:
  const ExternalPolicy & backend_;
  RoadModel road_;
  PromptConfig prompt_;
};

/// Shared, read-only inputs of an evaluation.
struct EvalContext
{
  AppConfig config;
  PolicyKind kind{PolicyKind::LaneKeep};
  /// required for Trained and External
  std::optional<ActorCriticNet> net;
  std::optional<ExternalPolicy> backend;

  std::unique_ptr<DecisionPolicy> make_policy(std::uint64_t seed) const
  {
    switch (kind) {
      case PolicyKind::LaneKeep: return std::make_unique<LaneKeepPolicy>();
      case PolicyKind::Random: return std::make_unique<RandomPolicy>(seed);
      case PolicyKind::Trained:
        if (!net) { throw ConfigError("trained policy needs a checkpoint"); }
        return std::make_unique<NetworkPolicy>(*net);
      case PolicyKind::External:
        if (!backend) { throw ConfigError("external policy needs a backend"); }
        return std::make_unique<ExternalDecisionPolicy>(*backend, config.scenario.road(), PromptConfig{});
    }
    return std::make_unique<LaneKeepPolicy>();
  }
};

struct EpisodeTiming
{
  double policy_seconds{0.0};
  double planner_seconds{0.0};
  long planner_calls{0};
  int decisions{0};

  /// wall time per control command (s)
  double control_efficiency() const
  {
    return planner_calls > 0 ? (policy_seconds + planner_seconds) / static_cast<double>(planner_calls) : 0.0;
  }
};

struct EpisodeResult
{
  std::uint64_t seed{0};
  EpisodeMetrics metrics;
  TrajectoryLog log;
  EpisodeTiming timing;
  std::vector<std::string> events;
  /// non-empty when the track threw
  std::string error;
};

/// Run one episode until the time limit, a collision or an unsolvable planning streak.
inline EpisodeResult run_episode(
  const EvalContext & ctx, std::uint64_t seed, const TickObserver & observer = {},
  const std::function<void(WorldState &)> & scene = {})
{
  EpisodeResult res;
  res.seed = seed;
  HighwayEnv env(ctx.config.env_config());
  env.set_recording(true);
  if (observer) { env.set_observer(observer); }
  auto policy = ctx.make_policy(seed);

  Eigen::VectorXd obs = env.reset(seed, scene);
  for (;;) {
    const auto t0  = std::chrono::steady_clock::now();
    const Action a = policy->decide(obs, env.world());
    res.timing.policy_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++res.timing.decisions;
    const EnvStep s = env.step(a);
    obs             = s.obs;
    if (s.done()) { break; }
  }
  res.log                   = env.log();
  res.metrics               = compute_metrics(res.log, ctx.config.scenario.road(), ctx.config.eval.unsolvable_ticks);
  res.timing.planner_seconds = env.timing().planner_seconds;
  res.timing.planner_calls   = env.timing().planner_calls;
  res.events                 = std::move(policy->events);
  return res;
}

struct BatchAggregates
{
  int tracks{0};
  int successes{0};
  int collisions{0};
  int unsolvable{0};
  int failed_tracks{0};
  double success_rate{0.0};
  double mean_success_steps{0.0};
  double mean_progress{0.0};
  double max_progress{0.0};
  double mean_velocity{0.0};
  double mean_jerk{0.0};
  double max_jerk{0.0};
  double mean_acceleration{0.0};
  double mean_lane_changes{0.0};
  double mean_ttc_score{0.0};
  double mean_driving_time{0.0};
};

struct BatchResult
{
  std::vector<EpisodeResult> episodes;
  BatchAggregates aggregates;
};

/// Successes over tracks, in percent.
inline double success_rate_percent(int successes, int total) { return total > 0 ? 100.0 * successes / total : 0.0; }

/// Means over completed tracks; tracks that threw count as failures in the success rate only.
inline BatchAggregates aggregate(const std::vector<EpisodeResult> & eps)
{
  BatchAggregates a;
  a.tracks  = static_cast<int>(eps.size());
  int valid = 0;
  for (const auto & e : eps) {
    if (!e.error.empty()) {
      ++a.failed_tracks;
      continue;
    }
    const auto & m = e.metrics;
    ++valid;
    a.successes += m.success ? 1 : 0;
    a.collisions += m.collided ? 1 : 0;
    a.unsolvable += m.unsolvable ? 1 : 0;
    a.mean_success_steps += m.success_steps;
    a.mean_progress += m.progress;
    a.max_progress = valid == 1 ? m.progress : std::max(a.max_progress, m.progress);
    a.mean_velocity += m.avg_velocity;
    a.mean_jerk += m.avg_jerk;
    a.max_jerk = std::max(a.max_jerk, m.avg_jerk);
    a.mean_acceleration += m.avg_acceleration;
    a.mean_lane_changes += m.lane_changes();
    a.mean_ttc_score += m.ttc_score;
    a.mean_driving_time += m.driving_time;
  }
  a.success_rate = success_rate_percent(a.successes, a.tracks);
  if (valid > 0) {
    const double k = 1.0 / valid;
    a.mean_success_steps *= k;
    a.mean_progress *= k;
    a.mean_velocity *= k;
    a.mean_jerk *= k;
    a.mean_acceleration *= k;
    a.mean_lane_changes *= k;
    a.mean_ttc_score *= k;
    a.mean_driving_time *= k;
  }
  return a;
}

/**
 * @brief Evaluate @p n_tracks seeded tracks on @p parallelism workers.
 *
 * Each track owns its environment; results are stored by track index, so the outcome does not
 * depend on scheduling.
 */
inline BatchResult run_batch(const EvalContext & ctx, int n_tracks, int parallelism, bool keep_logs = false)
{
  if (n_tracks < 1) { throw ConfigError("n_tracks must be >= 1"); }
  BatchResult out;
  out.episodes.resize(static_cast<std::size_t>(n_tracks));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n_tracks; i = next++) {
      const std::uint64_t seed = eval_track_seed(ctx.config.eval.seed, i);
      EpisodeResult r;
      try {
        r = run_episode(ctx, seed);
      } catch (const std::exception & e) {
        r       = EpisodeResult{};
        r.seed  = seed;
        r.error = e.what();
      }
      if (!keep_logs) { r.log = {}; }
      out.episodes[static_cast<std::size_t>(i)] = std::move(r);
    }
  };
  const int n_workers = std::max(1, std::min(parallelism, n_tracks));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) { pool.emplace_back(worker); }
    for (auto & t : pool) { t.join(); }
  }
  out.aggregates = aggregate(out.episodes);
  return out;
}

inline nlohmann::json to_json(const EpisodeMetrics & m)
{
  return {{"success", m.success},
          {"collided", m.collided},
          {"unsolvable", m.unsolvable},
          {"success_steps", m.success_steps},
          {"decisions", m.decisions},
          {"progress", m.progress},
          {"avg_velocity", m.avg_velocity},
          {"avg_jerk", m.avg_jerk},
          {"avg_acceleration", m.avg_acceleration},
          {"lane_changes", m.lane_changes()},
          {"lane_changes_left", m.lane_changes_left},
          {"lane_changes_right", m.lane_changes_right},
          {"ttc_score", m.ttc_score},
          {"driving_time", m.driving_time}};
}

inline nlohmann::json to_json(const BatchAggregates & a)
{
  return {{"tracks", a.tracks},
          {"successes", a.successes},
          {"success_rate", a.success_rate},
          {"collisions", a.collisions},
          {"unsolvable", a.unsolvable},
          {"failed_tracks", a.failed_tracks},
          {"mean_success_steps", a.mean_success_steps},
          {"mean_progress", a.mean_progress},
          {"max_progress", a.max_progress},
          {"mean_velocity", a.mean_velocity},
          {"mean_jerk", a.mean_jerk},
          {"max_jerk", a.max_jerk},
          {"mean_acceleration", a.mean_acceleration},
          {"mean_lane_changes", a.mean_lane_changes},
          {"mean_ttc_score", a.mean_ttc_score},
          {"mean_driving_time", a.mean_driving_time}};
}

/// Deterministic report: aggregates, per-episode metrics, seeds and the configuration echo.
inline nlohmann::json batch_report_json(const BatchResult & b, const EvalContext & ctx)
{
  nlohmann::json eps = nlohmann::json::array();
  for (std::size_t i = 0; i < b.episodes.size(); ++i) {
    const auto & e = b.episodes[i];
    nlohmann::json row{{"track", i}, {"seed", e.seed}};
    if (e.error.empty()) {
      row["metrics"] = to_json(e.metrics);
    } else {
      row["error"] = e.error;
    }
    eps.push_back(std::move(row));
  }
  // the worker count does not affect results and is left out so reports compare equal
  nlohmann::json cfg = config_to_json(ctx.config);
  cfg["eval"].erase("parallel");
  return {{"report", "hwsafe-batch"},
          {"version", 1},
          {"policy", std::string(to_string(ctx.kind))},
          {"aggregates", to_json(b.aggregates)},
          {"episodes", std::move(eps)},
          {"config", std::move(cfg)}};
}

/// One row per track for external plotting.
inline std::string batch_report_csv(const BatchResult & b)
{
  std::string out =
    "track,seed,success,collided,unsolvable,success_steps,progress,avg_velocity,avg_jerk,avg_acceleration,"
    "lane_changes_left,lane_changes_right,ttc_score,driving_time,error\n";
  char buf[512];
  for (std::size_t i = 0; i < b.episodes.size(); ++i) {
    const auto & e = b.episodes[i];
    const auto & m = e.metrics;
    std::snprintf(
      buf, sizeof(buf), "%zu,%llu,%d,%d,%d,%d,%.6f,%.6f,%.6f,%.6f,%d,%d,%.6f,%.3f,%s\n", i,
      static_cast<unsigned long long>(e.seed), m.success ? 1 : 0, m.collided ? 1 : 0, m.unsolvable ? 1 : 0, m.success_steps,
      m.progress, m.avg_velocity, m.avg_jerk, m.avg_acceleration, m.lane_changes_left, m.lane_changes_right, m.ttc_score,
      m.driving_time, e.error.empty() ? "" : "error");
    out += buf;
  }
  return out;
}

/// Wall-clock figures; not part of the deterministic report.
inline nlohmann::json batch_timing_json(const BatchResult & b)
{
  nlohmann::json eps = nlohmann::json::array();
  double sum         = 0.0;
  long calls         = 0;
  double total       = 0.0;
  for (const auto & e : b.episodes) {
    eps.push_back({{"seed", e.seed},
                   {"control_efficiency", e.timing.control_efficiency()},
                   {"policy_seconds", e.timing.policy_seconds},
                   {"planner_seconds", e.timing.planner_seconds},
                   {"planner_calls", e.timing.planner_calls},
                   {"events", e.events}});
    sum += e.timing.policy_seconds + e.timing.planner_seconds;
    calls += e.timing.planner_calls;
    total += e.timing.planner_seconds;
  }
  return {{"mean_control_efficiency", calls ? sum / calls : 0.0},
          {"mean_planner_seconds", calls ? total / calls : 0.0},
          {"episodes", std::move(eps)}};
}

}  // namespace hwsafe

#endif  // HWSAFE__EVAL__BATCH_HPP_

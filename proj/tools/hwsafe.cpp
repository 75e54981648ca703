// Command-line entry point: simulate, train, evaluate, replay.
//
// Exit codes: 0 success, 1 usage error, 2 configuration error, 3 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "hwsafe/config.hpp"
#include "hwsafe/eval/batch.hpp"
#include "hwsafe/rl/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace hwsafe;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2, kRuntime = 3 };

struct Options
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> tracks;
  std::optional<double> density;
  std::optional<int> lanes;
  std::optional<std::string> policy;
  std::string out{"out"};
  std::optional<int> parallel;
  std::optional<std::string> checkpoint;
  std::optional<long> timesteps;
  std::optional<int> external_port;
  std::string log;
};

AppConfig resolve_config(const Options & o)
{
  nlohmann::json j = nlohmann::json::object();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) { throw ConfigError("cannot open config file " + o.config); }
    try {
      in >> j;
    } catch (const nlohmann::json::exception & e) {
      throw ConfigError("config file " + o.config + " is not valid JSON: " + e.what());
    }
  }
  // flags are applied to the document so the usual validation covers them
  if (o.seed) {
    j["eval"]["seed"]  = *o.seed;
    j["train"]["seed"] = *o.seed;
  }
  if (o.tracks) { j["eval"]["tracks"] = *o.tracks; }
  if (o.density) { j["scenario"]["density"] = *o.density; }
  if (o.lanes) { j["scenario"]["lanes"] = *o.lanes; }
  if (o.policy) { j["eval"]["policy"] = *o.policy; }
  if (o.parallel) { j["eval"]["parallel"] = *o.parallel; }
  if (o.checkpoint) { j["eval"]["checkpoint"] = *o.checkpoint; }
  if (o.timesteps) { j["train"]["total_timesteps"] = *o.timesteps; }
  if (o.external_port) { j["eval"]["external_port"] = *o.external_port; }
  return config_from_json(j);
}

void write_text(const fs::path & p, const std::string & s)
{
  std::ofstream out(p, std::ios::binary);
  if (!out) { throw std::runtime_error("cannot write " + p.string()); }
  out << s;
}

fs::path prepare_out(const std::string & dir)
{
  fs::create_directories(dir);
  return fs::path(dir);
}

EvalContext make_context(const AppConfig & cfg)
{
  EvalContext ctx;
  ctx.config = cfg;
  ctx.kind   = *parse_policy_kind(cfg.eval.policy);
  if (!cfg.eval.checkpoint.empty()) {
    auto ck = load_checkpoint(cfg.eval.checkpoint);
    if (ck.net.input_dim() != cfg.features.dim()) { throw ConfigError("checkpoint input size does not match the feature configuration"); }
    if (ck.config_hash != training_config_hash(cfg)) {
      std::cerr << "warning: checkpoint was trained with a different configuration\n";
    }
    ctx.net = std::move(ck.net);
  }
  if (ctx.kind == PolicyKind::Trained && !ctx.net) { throw ConfigError("policy 'trained' requires --checkpoint"); }
  if (ctx.kind == PolicyKind::External) {
    ActorCriticNet local = ctx.net ? *ctx.net : ActorCriticNet(cfg.features.dim(), {});
    WireConfig wc{static_cast<std::uint16_t>(cfg.eval.external_port), std::chrono::milliseconds(cfg.eval.external_timeout_ms)};
    ctx.backend.emplace(wc, std::move(local));
  }
  return ctx;
}

int cmd_simulate(const Options & o)
{
  const AppConfig cfg = resolve_config(o);
  const EvalContext ctx = make_context(cfg);
  const auto dir = prepare_out(o.out);
  const auto r   = run_episode(ctx, cfg.eval.seed);
  write_log((dir / "trajectory.json").string(), r.log);
  write_text(dir / "metrics.json", to_json(r.metrics).dump(2) + "\n");
  std::printf(
    "seed %llu: %s, %d decisions, progress %.2f m, avg speed %.2f m/s\n", static_cast<unsigned long long>(cfg.eval.seed),
    r.metrics.success ? "success" : (r.metrics.collided ? "collision" : "unsolvable"), r.metrics.decisions, r.metrics.progress,
    r.metrics.avg_velocity);
  return kOk;
}

int cmd_train(const Options & o)
{
  const AppConfig cfg = resolve_config(o);
  const auto dir      = prepare_out(o.out);
  HighwayEnv env(cfg.env_config());
  std::mt19937_64 rng(cfg.train.seed);
  ActorCriticNet net(cfg.features.dim(), cfg.train.hidden);
  net.initialize(rng);

  std::ofstream log(dir / "train_log.jsonl");
  if (!log) { throw std::runtime_error("cannot write train_log.jsonl"); }
  train(cfg.train, env, net, [&](const UpdateLog & u) {
    log << to_json(u).dump() << '\n';
    log.flush();
    std::printf(
      "update %d  steps %ld  reward %.4f  loss %.4f  clip %.3f  kl %.5f  episodes %d (%d ok)\n", u.update, u.steps,
      u.mean_reward, u.loss, u.clip_frac, u.kl, u.episodes, u.successes);
    std::fflush(stdout);
  });
  save_checkpoint((dir / "checkpoint.json").string(), net, training_config_hash(cfg));
  write_text(dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  return kOk;
}

int cmd_evaluate(const Options & o)
{
  const AppConfig cfg   = resolve_config(o);
  const EvalContext ctx = make_context(cfg);
  const auto dir        = prepare_out(o.out);
  const auto b          = run_batch(ctx, cfg.eval.tracks, cfg.eval.parallel);
  write_text(dir / "report.json", batch_report_json(b, ctx).dump(2) + "\n");
  write_text(dir / "report.csv", batch_report_csv(b));
  write_text(dir / "timing.json", batch_timing_json(b).dump(2) + "\n");
  const auto & a = b.aggregates;
  std::printf(
    "%s over %d tracks: success %.2f%%, progress %.2f m, speed %.2f m/s, TTC score %.2f s\n", cfg.eval.policy.c_str(),
    a.tracks, a.success_rate, a.mean_progress, a.mean_velocity, a.mean_ttc_score);
  return a.failed_tracks > 0 ? kRuntime : kOk;
}

int cmd_replay(const Options & o)
{
  const auto log = [&] {
    try {
      return read_log(o.log);
    } catch (const std::exception & e) {
      throw ConfigError(e.what());
    }
  }();
  const auto dir = prepare_out(o.out);
  write_text(dir / "scenes.csv", scene_sequence_csv(log));
  std::printf("%zu ticks written to %s\n", log.ticks.size(), (dir / "scenes.csv").string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Safety-filtered lane-decision learning on a simulated highway"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App * s) {
    s->add_option("--config", o.config, "JSON configuration file");
    s->add_option("--seed", o.seed, "Base random seed");
    s->add_option("--density", o.density, "Traffic density multiplier");
    s->add_option("--lanes", o.lanes, "Number of lanes");
    s->add_option("--out", o.out, "Output directory");
  };
  auto policy_opts = [&](CLI::App * s) {
    s->add_option("--policy", o.policy, "trained | random | lane_keep | external");
    s->add_option("--checkpoint", o.checkpoint, "Network checkpoint");
    s->add_option("--external-port", o.external_port, "Loopback port of an external policy backend");
  };

  auto * sim = app.add_subcommand("simulate", "Run one episode and export its trajectory");
  common(sim);
  policy_opts(sim);
  auto * tr = app.add_subcommand("train", "Train the lane-decision policy");
  common(tr);
  tr->add_option("--timesteps", o.timesteps, "Total decision steps");
  auto * ev = app.add_subcommand("evaluate", "Evaluate a policy over seeded tracks");
  common(ev);
  policy_opts(ev);
  ev->add_option("--tracks", o.tracks, "Number of tracks");
  ev->add_option("--parallel", o.parallel, "Worker threads");
  auto * rp = app.add_subcommand("replay", "Export a trajectory log as a scene sequence");
  rp->add_option("--log", o.log, "Trajectory log written by simulate")->required();
  rp->add_option("--out", o.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*sim) { return cmd_simulate(o); }
    if (*tr) { return cmd_train(o); }
    if (*ev) { return cmd_evaluate(o); }
    if (*rp) { return cmd_replay(o); }
  } catch (const ConfigError & e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

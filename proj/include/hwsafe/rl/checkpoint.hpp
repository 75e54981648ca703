#ifndef HWSAFE__RL__CHECKPOINT_HPP_
#define HWSAFE__RL__CHECKPOINT_HPP_

/**
 * @file
 * @brief Versioned network checkpoints and line-delimited training logs.
 */

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "hwsafe/policy/actor_critic.hpp"
#include "hwsafe/rl/ppo.hpp"

namespace hwsafe {

inline constexpr std::string_view kCheckpointFormat = "hwsafe-actor-critic";
inline constexpr int kCheckpointVersion             = 1;

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view s)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v)
{
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) { s[static_cast<std::size_t>(i)] = kDigits[v & 0xF]; }
  return s;
}

inline nlohmann::json checkpoint_json(const ActorCriticNet & net, const std::string & config_hash)
{
  nlohmann::json j;
  j["format"]      = kCheckpointFormat;
  j["version"]     = kCheckpointVersion;
  j["layer_sizes"] = net.layer_sizes();
  j["config_hash"] = config_hash;
  j["params"]      = std::vector<double>(net.params().data(), net.params().data() + net.num_params());
  return j;
}

inline void save_checkpoint(const std::string & path, const ActorCriticNet & net, const std::string & config_hash)
{
  std::ofstream out(path);
  if (!out) { throw std::runtime_error("cannot write checkpoint " + path); }
  out << checkpoint_json(net, config_hash).dump() << '\n';
}

struct LoadedCheckpoint
{
  ActorCriticNet net;
  std::string config_hash;
};

inline LoadedCheckpoint checkpoint_from_json(const nlohmann::json & j)
{
  if (j.value("format", "") != kCheckpointFormat) { throw ConfigError("not a network checkpoint"); }
  if (j.value("version", 0) != kCheckpointVersion) { throw ConfigError("unsupported checkpoint version"); }
  const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
  if (sizes.size() < 3 || sizes[sizes.size() - 2] != kNumActions || sizes.back() != 1) {
    throw ConfigError("checkpoint layer_sizes are malformed");
  }
  const std::vector<int> hidden(sizes.begin() + 1, sizes.end() - 2);
  LoadedCheckpoint c{ActorCriticNet(sizes.front(), hidden), j.value("config_hash", "")};
  const auto p = j.at("params").get<std::vector<double>>();
  if (static_cast<int>(p.size()) != c.net.num_params()) { throw ConfigError("checkpoint parameter count mismatch"); }
  c.net.set_params(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
  return c;
}

inline LoadedCheckpoint load_checkpoint(const std::string & path)
{
  std::ifstream in(path);
  if (!in) { throw ConfigError("cannot open checkpoint " + path); }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception & e) {
    throw ConfigError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

inline nlohmann::json to_json(const UpdateLog & l)
{
  return {{"update", l.update},         {"steps", l.steps},     {"mean_reward", l.mean_reward},
          {"loss", l.loss},             {"policy_loss", l.policy_loss}, {"value_loss", l.value_loss},
          {"entropy", l.entropy},       {"clip_frac", l.clip_frac},     {"kl", l.kl},
          {"episodes", l.episodes},     {"successes", l.successes},     {"skipped", l.skipped}};
}

}  // namespace hwsafe

#endif  // HWSAFE__RL__CHECKPOINT_HPP_

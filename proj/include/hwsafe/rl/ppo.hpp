#ifndef HWSAFE__RL__PPO_HPP_
#define HWSAFE__RL__PPO_HPP_

/**
 * @file
 * @brief Clipped-surrogate policy optimization: advantage estimation, loss with exact gradient,
 * Adam, rollout collection and the training loop.
 */

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "hwsafe/policy/actor_critic.hpp"
#include "hwsafe/rl/env.hpp"

namespace hwsafe {

struct Transition
{
  Eigen::VectorXd obs;
  int action{1};
  /// log pi_old(action | obs) at collection time
  double log_prob_old{0.0};
  double value_old{0.0};
  double reward{0.0};
  /// episode boundary after this transition
  bool done{false};
  double advantage{0.0};
  double return_target{0.0};
};

struct TrainConfig
{
  double gamma{0.8};
  double lambda{0.95};
  double clip{0.2};
  double c1{0.5};
  double c2{0.0};
  int batch_size{32};
  double learning_rate{5e-4};
  long total_timesteps{40000};
  int epochs{4};
  int rollout_length{512};
  double max_grad_norm{0.5};
  bool normalize_advantages{true};
  double adam_beta1{0.9};
  double adam_beta2{0.999};
  double adam_eps{1e-8};
  std::vector<int> hidden{128, 128};
  std::uint64_t seed{0};

  void validate() const
  {
    if (!(gamma > 0.0 && gamma < 1.0)) { throw ConfigError("train gamma must lie in (0, 1)"); }
    if (!(lambda >= 0.0 && lambda <= 1.0)) { throw ConfigError("train lambda must lie in [0, 1]"); }
    if (!(clip > 0.0)) { throw ConfigError("train clip must be positive"); }
    if (c1 < 0.0 || c2 < 0.0) { throw ConfigError("train c1 and c2 must be non-negative"); }
    if (batch_size < 1 || epochs < 1 || rollout_length < 1) { throw ConfigError("train batch_size, epochs, rollout_length must be >= 1"); }
    if (!(learning_rate > 0.0)) { throw ConfigError("train learning_rate must be positive"); }
    if (total_timesteps < 0) { throw ConfigError("train total_timesteps must be >= 0"); }
  }
};

/**
 * @brief Backward GAE recursion over a rollout.
 *
 * @param values V(s_0..s_{T-1}) followed by the bootstrap V(s_T) (ignored when the last step is done)
 * @return advantages; return targets are advantages + values
 */
inline std::vector<double> compute_gae(
  const std::vector<double> & rewards, const std::vector<double> & values, const std::vector<bool> & dones, double gamma,
  double lambda)
{
  const std::size_t T = rewards.size();
  if (values.size() != T + 1 || dones.size() != T) { throw std::invalid_argument("compute_gae: size mismatch"); }
  std::vector<double> adv(T, 0.0);
  double next = 0.0;
  for (std::size_t i = T; i-- > 0;) {
    const double live  = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * values[i + 1] * live - values[i];
    next               = delta + gamma * lambda * live * next;
    adv[i]             = next;
  }
  return adv;
}

/// Fill advantage and return_target of @p batch; @p bootstrap is V of the state after the last transition.
inline void assign_gae(std::vector<Transition> & batch, double bootstrap, double gamma, double lambda)
{
  std::vector<double> r, v;
  std::vector<bool> d;
  for (const auto & t : batch) {
    r.push_back(t.reward);
    v.push_back(t.value_old);
    d.push_back(t.done);
  }
  v.push_back(bootstrap);
  const auto adv = compute_gae(r, v, d, gamma, lambda);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch[i].advantage     = adv[i];
    batch[i].return_target = adv[i] + batch[i].value_old;
  }
}

struct LossInfo
{
  double loss{0.0};
  double policy_loss{0.0};
  double value_loss{0.0};
  double entropy{0.0};
  /// fraction of samples whose ratio left [1 - clip, 1 + clip]
  double clip_fraction{0.0};
  /// mean of (r - 1) - log r, a non-negative KL estimate
  double approx_kl{0.0};
  bool finite{true};
};

/// Advantages of the selected transitions, optionally standardized (std floored at 1e-8).
inline std::vector<double> minibatch_advantages(
  const std::vector<Transition> & data, const std::vector<int> & idx, bool normalize)
{
  std::vector<double> a;
  a.reserve(idx.size());
  for (int i : idx) { a.push_back(data[i].advantage); }
  if (!normalize || a.empty()) { return a; }
  const double n    = static_cast<double>(a.size());
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double var        = 0.0;
  for (double x : a) { var += (x - mean) * (x - mean); }
  const double sd = std::max(std::sqrt(var / n), 1e-8);
  for (double & x : a) { x = (x - mean) / sd; }
  return a;
}

/**
 * @brief Minimization form of the clipped objective with value and entropy terms.
 *
 *   L = -mean(min(r A, clip(r, 1-e, 1+e) A)) + c1 mean((V - V_targ)^2) - c2 mean(H)
 *
 * Normalized advantages are treated as constants. When @p grad is given it receives dL/dtheta.
 */
inline LossInfo ppo_loss(
  const ActorCriticNet & net, const std::vector<Transition> & data, const std::vector<int> & idx, const TrainConfig & cfg,
  Eigen::VectorXd * grad = nullptr)
{
  LossInfo info;
  if (idx.empty()) { return info; }
  const auto adv = minibatch_advantages(data, idx, cfg.normalize_advantages);
  const double w = 1.0 / static_cast<double>(idx.size());
  if (grad) { grad->setZero(net.num_params()); }

  ActorCriticNet::Cache cache;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const Transition & t = data[idx[j]];
    const auto & out     = net.forward(t.obs, cache);
    const Eigen::Vector3d logp = log_softmax(out.logits);
    const double ratio         = std::exp(logp(t.action) - t.log_prob_old);
    const double A             = adv[j];
    const double clipped       = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    const double unclipped_obj = ratio * A;
    const double clipped_obj   = clipped * A;
    const bool use_unclipped   = unclipped_obj <= clipped_obj;
    const double entropy       = -(out.probs.array() * logp.array()).sum();
    const double verr          = out.value - t.return_target;

    info.policy_loss -= w * std::min(unclipped_obj, clipped_obj);
    info.value_loss += w * verr * verr;
    info.entropy += w * entropy;
    info.clip_fraction += w * (std::abs(ratio - 1.0) > cfg.clip ? 1.0 : 0.0);
    info.approx_kl += w * ((ratio - 1.0) - std::log(ratio));

    if (grad) {
      Eigen::Vector3d onehot = Eigen::Vector3d::Zero();
      onehot(t.action)       = 1.0;
      // d log pi(a) / d logits = onehot - p;  dH / d logits_k = -p_k (log p_k + H)
      const Eigen::Vector3d dlogp = onehot - out.probs;
      const Eigen::Vector3d dH    = -(out.probs.array() * (logp.array() + entropy)).matrix();
      Eigen::Vector3d g_logits    = -cfg.c2 * dH;
      if (use_unclipped) { g_logits -= ratio * A * dlogp; }
      const double g_value = 2.0 * cfg.c1 * verr;
      net.accumulate_gradient(cache, w * g_logits, w * g_value, *grad);
    }
  }
  info.loss   = info.policy_loss + cfg.c1 * info.value_loss - cfg.c2 * info.entropy;
  info.finite = std::isfinite(info.loss) && (!grad || grad->allFinite());
  return info;
}

/// Adam on a flat parameter vector.
class Adam
{
public:
  Adam(int n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
  : m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps)
  {
  }

  void step(Eigen::VectorXd & params, const Eigen::VectorXd & grad)
  {
    ++t_;
    m_ = b1_ * m_ + (1.0 - b1_) * grad;
    v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  long steps() const { return t_; }

private:
  Eigen::VectorXd m_, v_;
  double lr_, b1_, b2_, eps_;
  long t_{0};
};

/// Scale @p g to at most @p max_norm; returns the norm before clipping.
inline double clip_grad_norm(Eigen::VectorXd & g, double max_norm)
{
  const double n = g.norm();
  if (max_norm > 0.0 && n > max_norm) { g *= max_norm / n; }
  return n;
}

/// Episode seeds used during training; evaluation seeds are drawn from a disjoint range.
inline std::uint64_t training_episode_seed(std::uint64_t base, long episode)
{
  return base * 1000003ULL + static_cast<std::uint64_t>(episode);
}

/// On-policy sampler that keeps an episode running across rollouts.
class RolloutCollector
{
public:
  RolloutCollector(Environment & env, std::uint64_t seed) : env_(env), seed_(seed) {}

  /// Collect @p length transitions by sampling from @p net with @p rng.
  template <typename Rng>
  std::vector<Transition> collect(const ActorCriticNet & net, int length, Rng & rng)
  {
    std::vector<Transition> out;
    if (length <= 0) { return out; }
    if (!started_) { start_episode(); }
    out.reserve(static_cast<std::size_t>(length));
    for (int i = 0; i < length; ++i) {
      const auto pol = net.forward(obs_);
      const int a    = sample_action(pol.probs, rng);
      const auto s   = env_.step(action_from_index(a));
      Transition t;
      t.obs          = obs_;
      t.action       = a;
      t.log_prob_old = log_softmax(pol.logits)(a);
      t.value_old    = pol.value;
      t.reward       = s.reward;
      t.done         = s.done();
      out.push_back(std::move(t));
      episode_return_ += s.reward;
      if (s.done()) {
        finished_.push_back({episode_return_, !s.terminal});
        start_episode();
      } else {
        obs_ = s.obs;
      }
    }
    bootstrap_ = net.forward(obs_).value;
    return out;
  }

  /// V of the state following the last collected transition.
  double bootstrap_value() const { return bootstrap_; }

  struct Episode
  {
    double total_reward;
    bool success;
  };

  /// Episodes finished since the last call.
  std::vector<Episode> take_finished() { return std::exchange(finished_, {}); }

  long episodes_started() const { return episode_; }

private:
  void start_episode()
  {
    obs_            = env_.reset(training_episode_seed(seed_, episode_++));
    episode_return_ = 0.0;
    started_        = true;
  }

  Environment & env_;
  std::uint64_t seed_;
  long episode_{0};
  bool started_{false};
  Eigen::VectorXd obs_;
  double episode_return_{0.0};
  double bootstrap_{0.0};
  std::vector<Episode> finished_;
};

struct UpdateLog
{
  int update{0};
  long steps{0};
  double mean_reward{0.0};
  double loss{0.0};
  double policy_loss{0.0};
  double value_loss{0.0};
  double entropy{0.0};
  double clip_frac{0.0};
  double kl{0.0};
  int episodes{0};
  int successes{0};
  /// minibatches skipped for a non-finite loss
  int skipped{0};
};

/**
 * @brief Alternate rollouts and minibatch epochs until total_timesteps transitions are used.
 *
 * Single-threaded and seeded, so a run is reproducible bit for bit.
 */
inline std::vector<UpdateLog> train(
  const TrainConfig & cfg, Environment & env, ActorCriticNet & net, const std::function<void(const UpdateLog &)> & on_update = {})
{
  cfg.validate();
  if (net.input_dim() != env.observation_dim()) { throw std::invalid_argument("network input does not match the environment"); }
  std::mt19937_64 rng(cfg.seed);
  RolloutCollector collector(env, cfg.seed);
  Adam opt(net.num_params(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  std::vector<UpdateLog> logs;

  long steps = 0;
  Eigen::VectorXd grad(net.num_params());
  while (steps < cfg.total_timesteps) {
    const int len = static_cast<int>(std::min<long>(cfg.rollout_length, cfg.total_timesteps - steps));
    auto batch    = collector.collect(net, len, rng);
    assign_gae(batch, collector.bootstrap_value(), cfg.gamma, cfg.lambda);
    steps += len;

    UpdateLog log;
    log.update = static_cast<int>(logs.size());
    log.steps  = steps;
    for (const auto & t : batch) { log.mean_reward += t.reward / static_cast<double>(batch.size()); }

    std::vector<int> order(batch.size());
    std::iota(order.begin(), order.end(), 0);
    int n_mb = 0;
    for (int e = 0; e < cfg.epochs; ++e) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
        const std::vector<int> idx(order.begin() + b, order.begin() + std::min(order.size(), b + cfg.batch_size));
        const LossInfo li = ppo_loss(net, batch, idx, cfg, &grad);
        if (!li.finite) {
          ++log.skipped;
          continue;
        }
        clip_grad_norm(grad, cfg.max_grad_norm);
        opt.step(net.params(), grad);
        log.loss += li.loss;
        log.policy_loss += li.policy_loss;
        log.value_loss += li.value_loss;
        log.entropy += li.entropy;
        log.clip_frac += li.clip_fraction;
        log.kl += li.approx_kl;
        ++n_mb;
      }
    }
    if (n_mb > 0) {
      const double k = 1.0 / n_mb;
      log.loss *= k;
      log.policy_loss *= k;
      log.value_loss *= k;
      log.entropy *= k;
      log.clip_frac *= k;
      log.kl *= k;
    }
    for (const auto & ep : collector.take_finished()) {
      ++log.episodes;
      log.successes += ep.success ? 1 : 0;
    }
    if (on_update) { on_update(log); }
    logs.push_back(log);
  }
  return logs;
}

}  // namespace hwsafe

#endif  // HWSAFE__RL__PPO_HPP_

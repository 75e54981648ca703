#ifndef HWSAFE__POLICY__ACTOR_CRITIC_HPP_
#define HWSAFE__POLICY__ACTOR_CRITIC_HPP_

/**
 * @file
 * @brief Dense actor-critic network over a flat parameter vector.
 *
 * A tanh trunk feeds two linear heads: three action logits and a scalar value. Both heads read
 * the same trunk output.
 */

#include <Eigen/Core>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hwsafe/common.hpp"

namespace hwsafe {

struct PolicyOutput
{
  Eigen::Vector3d logits{Eigen::Vector3d::Zero()};
  Eigen::Vector3d probs{Eigen::Vector3d::Constant(1.0 / 3.0)};
  double value{0.0};
};

/// Softmax with max subtraction.
inline Eigen::Vector3d softmax(const Eigen::Vector3d & z)
{
  const Eigen::Vector3d e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

inline Eigen::Vector3d log_softmax(const Eigen::Vector3d & z)
{
  const double m   = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return z.array() - lse;
}

inline PolicyOutput make_output(const Eigen::Vector3d & logits, double value)
{
  return {logits, softmax(logits), value};
}

/// Inverse-CDF draw from a categorical distribution.
template <typename Rng>
int sample_action(const Eigen::Vector3d & probs, Rng & rng)
{
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc     = 0.0;
  for (int i = 0; i < kNumActions - 1; ++i) {
    acc += probs(i);
    if (u < acc) { return i; }
  }
  return kNumActions - 1;
}

inline int greedy_action(const Eigen::Vector3d & probs)
{
  int best = 0;
  for (int i = 1; i < kNumActions; ++i) {
    if (probs(i) > probs(best)) { best = i; }
  }
  return best;
}

/// Location of one weight matrix and its bias inside the flat parameter vector.
struct DenseSlice
{
  std::string name;
  int in{0};
  int out{0};
  /// column-major out x in weights, followed by out biases
  int offset{0};

  int weight_count() const { return in * out; }
  int bias_offset() const { return offset + weight_count(); }
  int size() const { return weight_count() + out; }
};

class ActorCriticNet
{
public:
  /// Activations kept by forward() for backward().
  struct Cache
  {
    std::vector<Eigen::VectorXd> act;  // act[0] = input, act[i] = tanh output of trunk layer i
    PolicyOutput out;
  };

  ActorCriticNet() : ActorCriticNet(1, {}) {}

  /// @param hidden trunk widths, e.g. {128, 128}; empty means heads read the input directly
  ActorCriticNet(int input_dim, std::vector<int> hidden) : input_dim_(input_dim), hidden_(std::move(hidden))
  {
    if (input_dim_ <= 0) { throw std::invalid_argument("network input dimension must be positive"); }
    int prev = input_dim_;
    int off  = 0;
    for (std::size_t i = 0; i < hidden_.size(); ++i) {
      if (hidden_[i] <= 0) { throw std::invalid_argument("hidden widths must be positive"); }
      layers_.push_back({"trunk" + std::to_string(i), prev, hidden_[i], off});
      off += layers_.back().size();
      prev = hidden_[i];
    }
    policy_ = {"policy", prev, kNumActions, off};
    off += policy_.size();
    value_ = {"value", prev, 1, off};
    off += value_.size();
    params_ = Eigen::VectorXd::Zero(off);
  }

  int input_dim() const { return input_dim_; }
  const std::vector<int> & hidden() const { return hidden_; }
  int num_params() const { return static_cast<int>(params_.size()); }

  /// Layer sizes including input and the two heads: {in, h1, ..., 3, 1}.
  std::vector<int> layer_sizes() const
  {
    std::vector<int> s{input_dim_};
    s.insert(s.end(), hidden_.begin(), hidden_.end());
    s.push_back(kNumActions);
    s.push_back(1);
    return s;
  }

  std::vector<DenseSlice> slices() const
  {
    auto s = layers_;
    s.push_back(policy_);
    s.push_back(value_);
    return s;
  }

  const Eigen::VectorXd & params() const { return params_; }
  Eigen::VectorXd & params() { return params_; }

  void set_params(const Eigen::VectorXd & p)
  {
    if (p.size() != params_.size()) { throw std::invalid_argument("parameter vector size mismatch"); }
    params_ = p;
  }

  /**
   * @brief Scaled Gaussian initialization, biases zero.
   *
   * Trunk weights ~ N(0, 1/fan_in); the policy head is scaled down so the initial policy is close
   * to uniform.
   */
  template <typename Rng>
  void initialize(Rng & rng, double policy_gain = 0.01, double value_gain = 1.0)
  {
    params_.setZero();
    std::normal_distribution<double> nd(0.0, 1.0);
    auto fill = [&](const DenseSlice & s, double gain) {
      const double sd = gain / std::sqrt(static_cast<double>(s.in));
      for (int i = 0; i < s.weight_count(); ++i) { params_(s.offset + i) = sd * nd(rng); }
    };
    for (const auto & l : layers_) { fill(l, 1.0); }
    fill(policy_, policy_gain);
    fill(value_, value_gain);
  }

  PolicyOutput forward(const Eigen::VectorXd & obs) const
  {
    Cache c;
    return forward(obs, c);
  }

  const PolicyOutput & forward(const Eigen::VectorXd & obs, Cache & cache) const
  {
    if (obs.size() != input_dim_) { throw std::invalid_argument("observation dimension mismatch"); }
    cache.act.resize(layers_.size() + 1);
    cache.act[0] = obs;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      cache.act[i + 1] = (weights(layers_[i]) * cache.act[i] + bias(layers_[i])).array().tanh();
    }
    const Eigen::VectorXd & h = cache.act.back();
    const Eigen::Vector3d logits = weights(policy_) * h + bias(policy_);
    const double value           = (weights(value_) * h + bias(value_))(0);
    cache.out                    = make_output(logits, value);
    return cache.out;
  }

  /// Gradient of sum(g_logits . logits) + g_value * value with respect to every parameter.
  Eigen::VectorXd backward(const Cache & cache, const Eigen::Vector3d & g_logits, double g_value) const
  {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
    accumulate_gradient(cache, g_logits, g_value, grad);
    return grad;
  }

  /// backward() added into @p grad.
  void accumulate_gradient(const Cache & cache, const Eigen::Vector3d & g_logits, double g_value, Eigen::VectorXd & grad) const
  {
    const Eigen::VectorXd & h = cache.act.back();
    auto add_dense = [&](const DenseSlice & s, const Eigen::VectorXd & in, const Eigen::VectorXd & g_out) {
      Eigen::Map<Eigen::MatrixXd>(grad.data() + s.offset, s.out, s.in) += g_out * in.transpose();
      grad.segment(s.bias_offset(), s.out) += g_out;
    };
    const Eigen::VectorXd gv = Eigen::VectorXd::Constant(1, g_value);
    add_dense(policy_, h, g_logits);
    add_dense(value_, h, gv);

    Eigen::VectorXd g_h = weights(policy_).transpose() * g_logits + weights(value_).transpose() * gv;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const Eigen::VectorXd & a = cache.act[i + 1];
      const Eigen::VectorXd g_pre = g_h.array() * (1.0 - a.array().square());
      add_dense(layers_[i], cache.act[i], g_pre);
      if (i > 0) { g_h = weights(layers_[i]).transpose() * g_pre; }
    }
  }

private:
  Eigen::Map<const Eigen::MatrixXd> weights(const DenseSlice & s) const
  {
    return {params_.data() + s.offset, s.out, s.in};
  }
  Eigen::Map<const Eigen::VectorXd> bias(const DenseSlice & s) const { return {params_.data() + s.bias_offset(), s.out}; }

  int input_dim_{1};
  std::vector<int> hidden_;
  std::vector<DenseSlice> layers_;
  DenseSlice policy_;
  DenseSlice value_;
  Eigen::VectorXd params_;
};

}  // namespace hwsafe

#endif  // HWSAFE__POLICY__ACTOR_CRITIC_HPP_

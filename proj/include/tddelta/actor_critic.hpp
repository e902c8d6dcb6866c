#pragma once

#include "tddelta/delta.hpp"
#include "tddelta/linear.hpp"

namespace tddelta {

/// pi(a|s) = softmax_a(<omega_a, phi(s)>), weights are actions x features.
class LinearSoftmaxPolicy {
 public:
  LinearSoftmaxPolicy(MatrixXd weights, MatrixXd features);
  static LinearSoftmaxPolicy zeros(int num_actions, MatrixXd features);

  int num_actions() const { return static_cast<int>(weights_.rows()); }
  int num_states() const { return static_cast<int>(features_.rows()); }
  int dim() const { return static_cast<int>(features_.cols()); }

  const MatrixXd& weights() const { return weights_; }
  MatrixXd& weights() { return weights_; }
  const MatrixXd& features() const { return features_; }

  VectorXd probs(int state) const;
  double log_prob(int state, int action) const;
  /// d log pi(a|s) / d omega = (e_a - pi(.|s)) phi(s)^T.
  MatrixXd grad_log_prob(int state, int action) const;
  double entropy(int state) const;
  MatrixXd grad_entropy(int state) const;
  int sample(int state, Rng& rng) const;
  Policy<double> tabulate() const;

 private:
  MatrixXd weights_;
  MatrixXd features_;
};

/// One rollout window of T transitions plus the behaviour log-probabilities.
struct RolloutBuffer {
  std::vector<Transition<double>> transitions;
  std::vector<double> old_log_probs;

  std::size_t size() const { return transitions.size(); }
  std::span<const Transition<double>> window(std::size_t from) const {
    return std::span<const Transition<double>>(transitions).subspan(from);
  }
};

/// Standard GAE over the window: A_t = sum_k (lambda gamma)^k delta_{t+k}, reset at done.
std::vector<double> gae_advantages(const RolloutBuffer& buffer, const ValueFunction<double>& values, double gamma,
                                   double lambda);

/// GAE(Delta): TD errors from the recomposed stack with discount gamma_Z and decay lambda_Z gamma_Z.
std::vector<double> gae_delta_advantages(const RolloutBuffer& buffer, const DeltaStack<double>& stack,
                                         const GammaSchedule<double>& schedule);

/// Truncated G^{z, lambda_z} for every step of the window (rows) and timescale (columns).
MatrixXd delta_lambda_targets(const RolloutBuffer& buffer, const DeltaStack<double>& stack,
                              const GammaSchedule<double>& schedule);

/// min(rho A, clip(rho, 1 - eps, 1 + eps) A).
double ppo_clip_objective(double ratio, double advantage, double clip_eps);

/// Mean squared error between W_z(s_t) and its truncated lambda-return, per timescale.
VectorXd critic_value_loss(const DeltaStack<double>& stack, const RolloutBuffer& buffer,
                           const GammaSchedule<double>& schedule);

/// Mean over the buffer of the (optionally clipped) surrogate at the policy's current weights.
double surrogate_objective(const LinearSoftmaxPolicy& policy, const RolloutBuffer& buffer,
                           std::span<const double> advantages, double clip_eps, bool clipped);

/// Analytic gradient of surrogate_objective with respect to the policy weights.
MatrixXd surrogate_gradient(const LinearSoftmaxPolicy& policy, const RolloutBuffer& buffer,
                            std::span<const double> advantages, double clip_eps, bool clipped);

double mean_entropy(const LinearSoftmaxPolicy& policy, const RolloutBuffer& buffer);
MatrixXd mean_entropy_gradient(const LinearSoftmaxPolicy& policy, const RolloutBuffer& buffer);

struct PpoConfig {
  int rollout_len = 128;   // T
  int num_streams = 1;
  int num_updates = 200;
  int epochs = 4;
  double clip_eps = 0.1;
  double policy_lr = 0.5;
  double entropy_coef = 0.01;
  double vf_coef = 1.0;
  bool normalize_advantages = false;
  // gammas / lambdas for the critic; alphas are the per-timescale critic step sizes.
  GammaSchedule<double> schedule;

  void validate() const;
};

struct UpdateRecord {
  int update_index = 0;
  double episode_return_mean = 0.0;  // over episodes finished during this update's rollout; NaN if none
  int episodes_finished = 0;
  double policy_loss = 0.0;          // -(clipped surrogate + entropy bonus) before the update
  std::vector<double> value_loss;    // per timescale, before the update
};

struct TrainingCurve {
  std::vector<UpdateRecord> updates;
  std::vector<double> episode_returns;  // undiscounted, in completion order
};

/**
 * PPO with a linear delta critic (softmax-linear actor, both on the
 * environment's one-hot features). Each update collects rollout_len steps
 * per stream, freezes advantages and critic targets from the pre-update
 * weights, then takes `epochs` full-batch gradient steps on both.
 */
TrainingCurve train_ppo_td_delta(const TabularMdp<double>& env, const PpoConfig& config, std::uint64_t rng_seed);

/// Mean return over the first and last `fraction` of episodes.
std::pair<double, double> early_late_returns(const TrainingCurve& curve, double fraction = 0.1);

}  // namespace tddelta

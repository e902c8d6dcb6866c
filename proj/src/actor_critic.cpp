#include "tddelta/actor_critic.hpp"

#include <numeric>

namespace tddelta {

LinearSoftmaxPolicy::LinearSoftmaxPolicy(MatrixXd weights, MatrixXd features)
    : weights_(std::move(weights)), features_(std::move(features)) {
  if (weights_.cols() != features_.cols())
    throw std::invalid_argument("LinearSoftmaxPolicy: weight and feature dimensions differ");
  if (weights_.rows() < 1) throw std::invalid_argument("LinearSoftmaxPolicy: at least one action required");
}

LinearSoftmaxPolicy LinearSoftmaxPolicy::zeros(int num_actions, MatrixXd features) {
  MatrixXd w = MatrixXd::Zero(num_actions, features.cols());
  return LinearSoftmaxPolicy(std::move(w), std::move(features));
}

VectorXd LinearSoftmaxPolicy::probs(int state) const {
  const VectorXd logits = weights_ * features_.row(state).transpose();
  const VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

double LinearSoftmaxPolicy::log_prob(int state, int action) const {
  const VectorXd logits = weights_ * features_.row(state).transpose();
  const double m = logits.maxCoeff();
  return logits(action) - m - std::log((logits.array() - m).exp().sum());
}

MatrixXd LinearSoftmaxPolicy::grad_log_prob(int state, int action) const {
  VectorXd coef = -probs(state);
  coef(action) += 1.0;
  return coef * features_.row(state);
}

double LinearSoftmaxPolicy::entropy(int state) const {
  const VectorXd p = probs(state);
  return -(p.array() * p.array().log()).sum();
}

MatrixXd LinearSoftmaxPolicy::grad_entropy(int state) const {
  const VectorXd p = probs(state);
  const double h = -(p.array() * p.array().log()).sum();
  const VectorXd coef = -(p.array() * (p.array().log() + h)).matrix();
  return coef * features_.row(state);
}

int LinearSoftmaxPolicy::sample(int state, Rng& rng) const { return rng.categorical(probs(state)); }

Policy<double> LinearSoftmaxPolicy::tabulate() const {
  RowMatrix<double> table(num_states(), num_actions());
  for (int s = 0; s < num_states(); ++s) {
    VectorXd p = probs(s);
    p /= p.sum();
    table.row(s) = p.transpose();
  }
  return Policy<double>(std::move(table));
}

std::vector<double> gae_advantages(const RolloutBuffer& buffer, const ValueFunction<double>& values, double gamma,
                                   double lambda) {
  const double decay = trace_decay(gamma, lambda);
  std::vector<double> adv(buffer.size());
  double acc = 0.0;
  for (std::size_t i = buffer.size(); i-- > 0;) {
    const auto& tr = buffer.transitions[i];
    const double delta = td_error(tr, values, gamma);
    acc = tr.done ? delta : delta + decay * acc;
    adv[i] = acc;
  }
  return adv;
}

std::vector<double> gae_delta_advantages(const RolloutBuffer& buffer, const DeltaStack<double>& stack,
                                         const GammaSchedule<double>& schedule) {
  if (schedule.size() != stack.num_timescales())
    throw std::invalid_argument("gae_delta_advantages: schedule does not match stack");
  const double decay = schedule.decay(schedule.top());
  if (!(decay < 1.0)) throw std::invalid_argument("gae_delta_advantages: lambda_Z * gamma_Z must be below 1");
  const ValueFunction<double> recomposed = stack.recompose();
  const double gamma = schedule.gamma_top();
  std::vector<double> adv(buffer.size());
  double acc = 0.0;
  for (std::size_t i = buffer.size(); i-- > 0;) {
    const auto& tr = buffer.transitions[i];
    const double delta = td_error(tr, recomposed, gamma);
    acc = tr.done ? delta : delta + decay * acc;
    adv[i] = acc;
  }
  return adv;
}

MatrixXd delta_lambda_targets(const RolloutBuffer& buffer, const DeltaStack<double>& stack,
                              const GammaSchedule<double>& schedule) {
  const int nz = stack.num_timescales();
  if (schedule.size() != nz) throw std::invalid_argument("delta_lambda_targets: schedule does not match stack");
  VectorXd decay(nz);
  for (int z = 0; z < nz; ++z) decay(z) = schedule.decay(z);
  MatrixXd targets(static_cast<Eigen::Index>(buffer.size()), nz);
  VectorXd acc = VectorXd::Zero(nz);
  for (std::size_t i = buffer.size(); i-- > 0;) {
    const auto& tr = buffer.transitions[i];
    const VectorXd errors = delta_td_errors(tr, stack).per_z;
    acc = tr.done ? errors : VectorXd(errors + decay.cwiseProduct(acc));
    targets.row(static_cast<Eigen::Index>(i)) = stack.tables().row(tr.state) + acc.transpose();
  }
  return targets;
}

double ppo_clip_objective(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

VectorXd critic_value_loss(const DeltaStack<double>& stack, const RolloutBuffer& buffer,
                           const GammaSchedule<double>& schedule) {
  if (buffer.size() == 0) throw std::invalid_argument("critic_value_loss: empty buffer");
  const MatrixXd targets = delta_lambda_targets(buffer, stack, schedule);
  VectorXd loss = VectorXd::Zero(stack.num_timescales());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto diff = targets.row(row) - stack.tables().row(buffer.transitions[i].state);
    loss += diff.cwiseAbs2().transpose();
  }
  return loss / static_cast<double>(buffer.size());
}

namespace {

void check_advantages(const RolloutBuffer& buffer, std::span<const double> advantages) {
  if (advantages.size() != buffer.size() || buffer.old_log_probs.size() != buffer.size())
    throw std::invalid_argument("surrogate: buffer, log-prob and advantage lengths differ");
  if (buffer.size() == 0) throw std::invalid_argument("surrogate: empty buffer");
}

}  // namespace

double surrogate_objective(const LinearSoftmaxPolicy& policy, const RolloutBuffer& buffer,
                           std::span<const double> advantages, double clip_eps, bool clipped) {
  check_advantages(buffer, advantages);
  double total = 0.0;
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const auto& tr = buffer.transitions[i];
    const double ratio = std::exp(policy.log_prob(tr.state, tr.action) - buffer.old_log_probs[i]);
    total += clipped ? ppo_clip_objective(ratio, advantages[i], clip_eps) : ratio * advantages[i];
  }
  return total / static_cast<double>(buffer.size());
}

MatrixXd surrogate_gradient(const LinearSoftmaxPolicy& policy, const RolloutBuffer& buffer,
                            std::span<const double> advantages, double clip_eps, bool clipped) {
  check_advantages(buffer, advantages);
  MatrixXd grad = MatrixXd::Zero(policy.num_actions(), policy.dim());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const auto& tr = buffer.transitions[i];
    const double ratio = std::exp(policy.log_prob(tr.state, tr.action) - buffer.old_log_probs[i]);
    const double a = advantages[i];
    // The clipped branch is flat in omega whenever it is the one selected by the min.
    if (clipped && ratio * a > std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * a) continue;
    grad += (a * ratio) * policy.grad_log_prob(tr.state, tr.action);
  }
  return grad / static_cast<double>(buffer.size());
}

double mean_entropy(const LinearSoftmaxPolicy& policy, const RolloutBuffer& buffer) {
  double total = 0.0;
  for (const auto& tr : buffer.transitions) total += policy.entropy(tr.state);
  return total / static_cast<double>(buffer.size());
}

MatrixXd mean_entropy_gradient(const LinearSoftmaxPolicy& policy, const RolloutBuffer& buffer) {
  MatrixXd grad = MatrixXd::Zero(policy.num_actions(), policy.dim());
  for (const auto& tr : buffer.transitions) grad += policy.grad_entropy(tr.state);
  return grad / static_cast<double>(buffer.size());
}

void PpoConfig::validate() const {
  schedule.validate();
  if (rollout_len < 1 || num_streams < 1 || num_updates < 0 || epochs < 0)
    throw std::invalid_argument("PpoConfig: rollout sizes and counts must be positive");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw std::invalid_argument("PpoConfig: clip_eps must lie in (0, 1)");
  if (policy_lr < 0.0 || entropy_coef < 0.0 || vf_coef < 0.0)
    throw std::invalid_argument("PpoConfig: rates and coefficients must be nonnegative");
}

namespace {

struct Stream {
  int state = 0;
  int episode_step = 0;
  double episode_return = 0.0;
};

void normalize(std::vector<double>& adv) {
  if (adv.size() < 2) return;
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(adv.size()));
  for (double& a : adv) a = (a - mean) / (sd + 1e-8);
}

}  // namespace

TrainingCurve train_ppo_td_delta(const TabularMdp<double>& env, const PpoConfig& config, std::uint64_t rng_seed) {
  config.validate();
  const GammaSchedule<double>& schedule = config.schedule;
  const MatrixXd features = one_hot_features<double>(env.num_states());
  LinearSoftmaxPolicy policy = LinearSoftmaxPolicy::zeros(env.num_actions(), features);
  LinearDeltaWeights<double> critic = LinearDeltaWeights<double>::zeros(features, schedule.size());
  Rng rng(rng_seed);
  std::vector<Stream> streams(static_cast<std::size_t>(config.num_streams));
  for (auto& s : streams) s.state = env.start_state();

  TrainingCurve curve;
  std::vector<RolloutBuffer> buffers(streams.size());
  for (int update = 0; update < config.num_updates; ++update) {
    UpdateRecord record;
    record.update_index = update;
    double finished_total = 0.0;

    for (std::size_t k = 0; k < streams.size(); ++k) {
      Stream& stream = streams[k];
      RolloutBuffer& buf = buffers[k];
      buf.transitions.clear();
      buf.old_log_probs.clear();
      for (int t = 0; t < config.rollout_len; ++t) {
        Transition<double> tr;
        tr.state = stream.state;
        tr.action = policy.sample(stream.state, rng);
        tr.next_state = rng.categorical(env.transition(tr.action).row(stream.state));
        tr.reward = env.reward(tr.action)(stream.state, tr.next_state);
        buf.old_log_probs.push_back(policy.log_prob(tr.state, tr.action));
        stream.episode_return += tr.reward;
        ++stream.episode_step;
        if (env.episode_length() > 0 && stream.episode_step >= env.episode_length()) {
          tr.done = true;
          curve.episode_returns.push_back(stream.episode_return);
          finished_total += stream.episode_return;
          ++record.episodes_finished;
          stream = Stream{env.start_state(), 0, 0.0};
        } else {
          stream.state = tr.next_state;
        }
        buf.transitions.push_back(tr);
      }
    }

    // Advantages and critic targets are frozen from the pre-update critic.
    const DeltaStack<double> stack = critic.to_stack(schedule.gammas);
    std::vector<std::vector<double>> advantages(buffers.size());
    std::vector<MatrixXd> targets(buffers.size());
    VectorXd value_loss = VectorXd::Zero(schedule.size());
    for (std::size_t k = 0; k < buffers.size(); ++k) {
      advantages[k] = gae_delta_advantages(buffers[k], stack, schedule);
      if (config.normalize_advantages) normalize(advantages[k]);
      targets[k] = delta_lambda_targets(buffers[k], stack, schedule);
      value_loss += critic_value_loss(stack, buffers[k], schedule);
    }
    value_loss /= static_cast<double>(buffers.size());

    double objective = 0.0;
    for (std::size_t k = 0; k < buffers.size(); ++k) {
      objective += surrogate_objective(policy, buffers[k], advantages[k], config.clip_eps, true) +
                   config.entropy_coef * mean_entropy(policy, buffers[k]);
    }
    record.policy_loss = -objective / static_cast<double>(buffers.size());
    record.value_loss.assign(value_loss.data(), value_loss.data() + value_loss.size());
    record.episode_return_mean = record.episodes_finished > 0 ? finished_total / record.episodes_finished
                                                              : std::numeric_limits<double>::quiet_NaN();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      MatrixXd policy_grad = MatrixXd::Zero(policy.num_actions(), policy.dim());
      MatrixXd critic_grad = MatrixXd::Zero(critic.dim(), schedule.size());
      const DeltaStack<double> current = critic.to_stack(schedule.gammas);
      for (std::size_t k = 0; k < buffers.size(); ++k) {
        policy_grad += surrogate_gradient(policy, buffers[k], advantages[k], config.clip_eps, true);
        policy_grad += config.entropy_coef * mean_entropy_gradient(policy, buffers[k]);
        const double scale = 2.0 * config.vf_coef / static_cast<double>(buffers[k].size());
        for (std::size_t i = 0; i < buffers[k].size(); ++i) {
          const int s = buffers[k].transitions[i].state;
          const auto row = static_cast<Eigen::Index>(i);
          // d/dtheta^z of vf_coef * mean (W_z(s) - G^z)^2.
          const Eigen::RowVectorXd err = current.tables().row(s) - targets[k].row(row);
          critic_grad.noalias() += scale * critic.features.row(s).transpose() * err;
        }
      }
      const double inv = 1.0 / static_cast<double>(buffers.size());
      policy.weights() += config.policy_lr * inv * policy_grad;
      for (int z = 0; z < schedule.size(); ++z)
        critic.weights.col(z) -= schedule.alphas[static_cast<std::size_t>(z)] * inv * critic_grad.col(z);
    }
    curve.updates.push_back(std::move(record));
  }
  return curve;
}

std::pair<double, double> early_late_returns(const TrainingCurve& curve, double fraction) {
  const std::size_t n = curve.episode_returns.size();
  if (n == 0) throw std::invalid_argument("early_late_returns: no finished episodes");
  const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))));
  const auto begin = curve.episode_returns.begin();
  const double early = std::accumulate(begin, begin + static_cast<std::ptrdiff_t>(m), 0.0) / static_cast<double>(m);
  const double late =
      std::accumulate(curve.episode_returns.end() - static_cast<std::ptrdiff_t>(m), curve.episode_returns.end(), 0.0) /
      static_cast<double>(m);
  return {early, late};
}

}  // namespace tddelta

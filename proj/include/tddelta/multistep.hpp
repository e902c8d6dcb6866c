#pragma once

#include "tddelta/delta.hpp"

#include <optional>

namespace tddelta {

namespace detail {

/// Index of the first done transition in [begin, begin + len), if any.
template <typename Scalar>
std::optional<std::size_t> first_done(std::span<const Transition<Scalar>> traj, std::size_t begin, int len) {
  for (std::size_t i = begin; i < begin + static_cast<std::size_t>(len); ++i) {
    if (traj[i].done) return i;
  }
  return std::nullopt;
}

}  // namespace detail

/**
 * Single-estimator k-step TD with discount gamma. At step t >= k the state
 * s_tau, tau = t - k + 1, moves towards sum_{i<k} gamma^i r_{tau+i} + gamma^k V(s_{tau+k}).
 */
template <typename Scalar>
class KStepTd {
 public:
  KStepTd(int num_states, Scalar gamma, int k, Scalar alpha)
      : values_(ValueFunction<Scalar>::Zero(num_states)), gamma_(gamma), k_(k), alpha_(alpha) {
    if (k < 1) throw std::invalid_argument("KStepTd: k must be positive");
    if (!(gamma >= Scalar(0) && gamma < Scalar(1))) throw std::invalid_argument("KStepTd: gamma must lie in [0, 1)");
  }

  /// Processes the transition stored at index t of `traj`.
  void observe(std::span<const Transition<Scalar>> traj, std::size_t t) {
    if (t < static_cast<std::size_t>(k_)) return;
    const std::size_t tau = t - static_cast<std::size_t>(k_) + 1;
    values_(traj[tau].state) += alpha_ * (target(traj, tau) - values_(traj[tau].state));
  }

  Scalar target(std::span<const Transition<Scalar>> traj, std::size_t tau) const {
    const auto done = detail::first_done(traj, tau, k_);
    const std::size_t end = done ? *done + 1 : tau + static_cast<std::size_t>(k_);
    Scalar g(0);
    Scalar discount(1);
    for (std::size_t i = tau; i < end; ++i) {
      g += discount * traj[i].reward;
      discount *= gamma_;
    }
    if (!done) g += ipow(gamma_, k_) * values_(traj[tau + static_cast<std::size_t>(k_) - 1].next_state);
    return g;
  }

  const ValueFunction<Scalar>& values() const { return values_; }
  int k() const { return k_; }

 private:
  ValueFunction<Scalar> values_;
  Scalar gamma_;
  int k_;
  Scalar alpha_;
};

/**
 * Multi-step TD(Delta) over a delta stack (tabular, zero initialised).
 *
 * Once t >= k_Z, tau = t - k_Z + 1 and each W_z(s_tau) moves towards
 *   G^z = sum_{i<k_z} (gamma_z^i - gamma_{z-1}^i) r_{tau+i}
 *       + (gamma_z^{k_z} - gamma_{z-1}^{k_z}) V_{z-1}(s_{tau+k_z}) + gamma_z^{k_z} W_z(s_{tau+k_z}),
 * with the gamma_{-1} terms absent for z = 0. All targets are taken from the
 * pre-update tables. Recomposed values V_z(s) are kept alongside the tables
 * and refreshed for the one updated state, so a step costs O(sum_z k_z)
 * rather than O(Z^2).
 */
template <typename Scalar>
class MultiStepTdDelta {
 public:
  MultiStepTdDelta(int num_states, GammaSchedule<Scalar> schedule)
      : schedule_(std::move(schedule)),
        stack_(DeltaStack<Scalar>::zeros(num_states, schedule_.gammas)),
        prefix_(Matrix<Scalar>::Zero(num_states, static_cast<Eigen::Index>(schedule_.gammas.size()))) {
    schedule_.validate();
    if (!schedule_.ks_monotone()) throw std::invalid_argument("MultiStepTdDelta: horizons must be nondecreasing");
    const int nz = schedule_.size();
    reward_coef_.resize(static_cast<std::size_t>(nz));
    lower_coef_.resize(static_cast<std::size_t>(nz));
    own_coef_.resize(static_cast<std::size_t>(nz));
    for (int z = 0; z < nz; ++z) {
      const auto zi = static_cast<std::size_t>(z);
      const int k = schedule_.ks[zi];
      const Scalar g = schedule_.gammas[zi];
      const Scalar g_prev = z > 0 ? schedule_.gammas[zi - 1] : Scalar(0);
      auto& coef = reward_coef_[zi];
      coef.resize(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i) coef[static_cast<std::size_t>(i)] = z == 0 ? ipow(g, i) : ipow(g, i) - ipow(g_prev, i);
      lower_coef_[zi] = z == 0 ? Scalar(0) : ipow(g, k) - ipow(g_prev, k);
      own_coef_[zi] = ipow(g, k);
    }
    targets_.resize(nz);
  }

  void observe(std::span<const Transition<Scalar>> traj, std::size_t t) {
    const auto k_top = static_cast<std::size_t>(schedule_.k_top());
    if (t < k_top) return;
    const std::size_t tau = t - k_top + 1;
    compute_targets(traj, tau);
    const int s = traj[tau].state;
    Scalar running(0);
    for (int z = 0; z < schedule_.size(); ++z) {
      stack_(s, z) += schedule_.alphas[static_cast<std::size_t>(z)] * (targets_(z) - stack_(s, z));
      running += stack_(s, z);
      prefix_(s, z) = running;
    }
  }

  /// Targets G^z_tau from the current tables (used by observe and exposed for tests).
  const Vector<Scalar>& compute_targets(std::span<const Transition<Scalar>> traj, std::size_t tau) {
    for (int z = 0; z < schedule_.size(); ++z) {
      const auto zi = static_cast<std::size_t>(z);
      const int k = schedule_.ks[zi];
      const auto done = detail::first_done(traj, tau, k);
      const std::size_t end = done ? *done + 1 : tau + static_cast<std::size_t>(k);
      Scalar g(0);
      for (std::size_t i = tau; i < end; ++i) g += reward_coef_[zi][i - tau] * traj[i].reward;
      if (!done) {
        const int boot = traj[tau + static_cast<std::size_t>(k) - 1].next_state;
        const Scalar lower = z > 0 ? prefix_(boot, z - 1) : Scalar(0);
        g += lower_coef_[zi] * lower + own_coef_[zi] * stack_(boot, z);
      }
      targets_(z) = g;
    }
    return targets_;
  }

  const DeltaStack<Scalar>& stack() const { return stack_; }
  const GammaSchedule<Scalar>& schedule() const { return schedule_; }

 private:
  GammaSchedule<Scalar> schedule_;
  DeltaStack<Scalar> stack_;
  Matrix<Scalar> prefix_;  // prefix_(s, z) = V_z(s)
  std::vector<std::vector<Scalar>> reward_coef_;
  std::vector<Scalar> lower_coef_;
  std::vector<Scalar> own_coef_;
  Vector<Scalar> targets_;
};

template <typename Scalar>
Scalar mean_abs_error(const ValueFunction<Scalar>& estimate, const ValueFunction<Scalar>& oracle) {
  return (estimate - oracle).cwiseAbs().mean();
}

template <typename Scalar>
struct LearningRun {
  std::vector<Scalar> error_trace;       // mean |V_hat - V| over states after each step
  std::vector<Matrix<Scalar>> tables;    // per-step tables, filled only on request
  Matrix<Scalar> final_tables;

  Scalar mean_error() const {
    if (error_trace.empty()) return Scalar(0);
    Scalar total(0);
    for (Scalar e : error_trace) total += e;
    return total / static_cast<Scalar>(error_trace.size());
  }
};

template <typename Scalar>
LearningRun<Scalar> run_k_step_td(std::span<const Transition<Scalar>> traj, int num_states, Scalar gamma, int k,
                                  Scalar alpha, const ValueFunction<Scalar>& oracle, bool record_tables = false) {
  KStepTd<Scalar> learner(num_states, gamma, k, alpha);
  LearningRun<Scalar> run;
  run.error_trace.reserve(traj.size());
  for (std::size_t t = 0; t < traj.size(); ++t) {
    learner.observe(traj, t);
    run.error_trace.push_back(mean_abs_error(learner.values(), oracle));
    if (record_tables) run.tables.push_back(learner.values());
  }
  run.final_tables = learner.values();
  return run;
}

template <typename Scalar>
LearningRun<Scalar> run_multi_step_td_delta(std::span<const Transition<Scalar>> traj, int num_states,
                                            const GammaSchedule<Scalar>& schedule,
                                            const ValueFunction<Scalar>& oracle, bool record_tables = false) {
  if (traj.size() <= static_cast<std::size_t>(schedule.k_top()))
    throw std::invalid_argument("run_multi_step_td_delta: trajectory must be longer than k_Z");
  MultiStepTdDelta<Scalar> learner(num_states, schedule);
  LearningRun<Scalar> run;
  run.error_trace.reserve(traj.size());
  for (std::size_t t = 0; t < traj.size(); ++t) {
    learner.observe(traj, t);
    run.error_trace.push_back(mean_abs_error(learner.stack().recompose(), oracle));
    if (record_tables) run.tables.push_back(learner.stack().tables());
  }
  run.final_tables = learner.stack().tables();
  return run;
}

/// Samples a trajectory and runs multi-step TD(Delta) on it against the gamma_Z oracle.
template <typename Scalar>
LearningRun<Scalar> multi_step_td_delta(const TabularMdp<Scalar>& mdp, const Policy<Scalar>& policy,
                                        const GammaSchedule<Scalar>& schedule, int num_steps, int start_state,
                                        std::uint64_t rng_seed, bool record_tables = false) {
  if (num_steps <= schedule.k_top()) throw std::invalid_argument("multi_step_td_delta: num_steps must exceed k_Z");
  const ValueFunction<Scalar> oracle = value_iteration(mdp, policy, schedule.gamma_top());
  const Trajectory<Scalar> traj = sample_trajectory(mdp, policy, start_state, num_steps, rng_seed);
  return run_multi_step_td_delta<Scalar>(traj, mdp.num_states(), schedule, oracle, record_tables);
}

}  // namespace tddelta

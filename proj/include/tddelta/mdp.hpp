#pragma once

#include "tddelta/core.hpp"

#include <algorithm>
#include <utility>

namespace tddelta {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-state value vector V(s).
template <typename Scalar>
using ValueFunction = Vector<Scalar>;

namespace detail {

template <typename Scalar>
Scalar probability_tolerance() {
  return std::max(Scalar(1e-12), Scalar(64) * std::numeric_limits<Scalar>::epsilon());
}

template <typename Derived>
bool is_probability_row(const Eigen::MatrixBase<Derived>& row) {
  using Scalar = typename Derived::Scalar;
  if ((row.array() < Scalar(0)).any()) return false;
  return std::abs(row.sum() - Scalar(1)) <= probability_tolerance<Scalar>();
}

}  // namespace detail

/**
 * Finite MDP with a dense transition kernel and transition-dependent rewards.
 *
 * transition(a)(s, s') = P(s' | s, a); reward(a)(s, s') = r(s, a, s').
 * start_state and episode_length only matter to the samplers: a positive
 * episode_length makes sample_trajectory flag every episode_length-th step as
 * done and restart from the start state.
 */
template <typename Scalar>
class TabularMdp {
 public:
  TabularMdp(std::vector<RowMatrix<Scalar>> transitions, std::vector<RowMatrix<Scalar>> rewards,
             int start_state = 0, int episode_length = 0)
      : transitions_(std::move(transitions)),
        rewards_(std::move(rewards)),
        start_state_(start_state),
        episode_length_(episode_length) {
    if (transitions_.empty()) throw std::invalid_argument("TabularMdp: at least one action required");
    if (transitions_.size() != rewards_.size())
      throw std::invalid_argument("TabularMdp: transition and reward action counts differ");
    const Eigen::Index n = transitions_.front().rows();
    if (n <= 0) throw std::invalid_argument("TabularMdp: at least one state required");
    for (std::size_t a = 0; a < transitions_.size(); ++a) {
      const auto& p = transitions_[a];
      const auto& r = rewards_[a];
      if (p.rows() != n || p.cols() != n || r.rows() != n || r.cols() != n)
        throw std::invalid_argument("TabularMdp: kernel blocks must be num_states x num_states");
      for (Eigen::Index s = 0; s < n; ++s) {
        if (!detail::is_probability_row(p.row(s)))
          throw std::invalid_argument("TabularMdp: transition row is not a probability vector");
      }
      if (!r.allFinite()) throw std::invalid_argument("TabularMdp: rewards must be finite");
    }
    if (start_state_ < 0 || start_state_ >= n) throw std::invalid_argument("TabularMdp: start state out of range");
    if (episode_length_ < 0) throw std::invalid_argument("TabularMdp: negative episode length");
  }

  int num_states() const { return static_cast<int>(transitions_.front().rows()); }
  int num_actions() const { return static_cast<int>(transitions_.size()); }
  const RowMatrix<Scalar>& transition(int action) const { return transitions_.at(action); }
  const RowMatrix<Scalar>& reward(int action) const { return rewards_.at(action); }
  int start_state() const { return start_state_; }
  int episode_length() const { return episode_length_; }

  bool rewards_within(Scalar lo, Scalar hi) const {
    return std::all_of(rewards_.begin(), rewards_.end(), [&](const RowMatrix<Scalar>& r) {
      return (r.array() >= lo).all() && (r.array() <= hi).all();
    });
  }

 private:
  std::vector<RowMatrix<Scalar>> transitions_;
  std::vector<RowMatrix<Scalar>> rewards_;
  int start_state_;
  int episode_length_;
};

/// Stochastic policy, one probability row per state.
template <typename Scalar>
class Policy {
 public:
  explicit Policy(RowMatrix<Scalar> action_probs) : probs_(std::move(action_probs)) {
    for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
      if (!detail::is_probability_row(probs_.row(s)))
        throw std::invalid_argument("Policy: action row is not a probability vector");
    }
  }

  static Policy uniform(int num_states, int num_actions) {
    return Policy(RowMatrix<Scalar>::Constant(num_states, num_actions, Scalar(1) / Scalar(num_actions)));
  }

  static Policy uniform(const TabularMdp<Scalar>& mdp) { return uniform(mdp.num_states(), mdp.num_actions()); }

  int num_states() const { return static_cast<int>(probs_.rows()); }
  int num_actions() const { return static_cast<int>(probs_.cols()); }
  const RowMatrix<Scalar>& action_probs() const { return probs_; }
  Scalar prob(int state, int action) const { return probs_(state, action); }

 private:
  RowMatrix<Scalar> probs_;
};

template <typename Scalar>
void check_compatible(const TabularMdp<Scalar>& mdp, const Policy<Scalar>& policy) {
  if (policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions())
    throw std::invalid_argument("policy shape does not match MDP");
}

/// P^pi(s, s') = sum_a pi(a|s) P(s'|s,a).
template <typename Scalar>
Matrix<Scalar> policy_transition_matrix(const TabularMdp<Scalar>& mdp, const Policy<Scalar>& policy) {
  check_compatible(mdp, policy);
  Matrix<Scalar> p = Matrix<Scalar>::Zero(mdp.num_states(), mdp.num_states());
  for (int a = 0; a < mdp.num_actions(); ++a)
    p += policy.action_probs().col(a).asDiagonal() * mdp.transition(a);
  return p;
}

/// r^pi(s) = sum_a pi(a|s) sum_s' P(s'|s,a) r(s,a,s').
template <typename Scalar>
Vector<Scalar> expected_reward(const TabularMdp<Scalar>& mdp, const Policy<Scalar>& policy) {
  check_compatible(mdp, policy);
  Vector<Scalar> r = Vector<Scalar>::Zero(mdp.num_states());
  for (int a = 0; a < mdp.num_actions(); ++a) {
    const Vector<Scalar> per_state = mdp.transition(a).cwiseProduct(mdp.reward(a)).rowwise().sum();
    r += policy.action_probs().col(a).cwiseProduct(per_state);
  }
  return r;
}

/// One synchronous sweep T^pi v = r^pi + gamma P^pi v.
template <typename Scalar>
ValueFunction<Scalar> apply_bellman(const TabularMdp<Scalar>& mdp, const Policy<Scalar>& policy, Scalar gamma,
                                    const ValueFunction<Scalar>& v) {
  if (v.size() != mdp.num_states()) throw std::invalid_argument("apply_bellman: value size mismatch");
  if (!(gamma >= Scalar(0) && gamma < Scalar(1))) throw std::invalid_argument("apply_bellman: gamma must lie in [0, 1)");
  return expected_reward(mdp, policy) + gamma * (policy_transition_matrix(mdp, policy) * v);
}

/// Iterative policy evaluation from V = 0 until the Bellman residual is at most tol.
template <typename Scalar>
ValueFunction<Scalar> value_iteration(const TabularMdp<Scalar>& mdp, const Policy<Scalar>& policy, Scalar gamma,
                                      Scalar tol = Scalar(1e-12)) {
  if (!(gamma >= Scalar(0) && gamma < Scalar(1))) throw std::invalid_argument("value_iteration: gamma must lie in [0, 1)");
  if (!(tol > Scalar(0))) throw std::invalid_argument("value_iteration: tol must be positive");
  const Vector<Scalar> r = expected_reward(mdp, policy);
  const Matrix<Scalar> p = policy_transition_matrix(mdp, policy);
  ValueFunction<Scalar> v = ValueFunction<Scalar>::Zero(mdp.num_states());
  // The residual contracts by gamma per sweep; the cap only guards against a
  // tolerance below the rounding floor of the data.
  const long max_sweeps = 10'000'000;
  for (long sweep = 0; sweep < max_sweeps; ++sweep) {
    ValueFunction<Scalar> next = r + gamma * (p * v);
    const Scalar residual = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    if (residual <= tol) {
      // v is one sweep past the checked iterate; its own residual is gamma times smaller.
      return v;
    }
  }
  throw std::runtime_error("value_iteration: tolerance not reachable at this precision");
}

template <typename Scalar>
struct Transition {
  int state = 0;
  int action = 0;
  Scalar reward = Scalar(0);
  int next_state = 0;
  bool done = false;
};

template <typename Scalar>
using Trajectory = std::vector<Transition<Scalar>>;

/// True when next_state of step t equals state of step t+1 wherever step t is not done.
template <typename Scalar>
bool is_chained(std::span<const Transition<Scalar>> transitions) {
  for (std::size_t t = 0; t + 1 < transitions.size(); ++t) {
    if (!transitions[t].done && transitions[t].next_state != transitions[t + 1].state) return false;
  }
  return true;
}

/// Single transition from `state` under the policy; never flagged done.
template <typename Scalar>
Transition<Scalar> sample_step(const TabularMdp<Scalar>& mdp, const Policy<Scalar>& policy, int state, Rng& rng) {
  Transition<Scalar> tr;
  tr.state = state;
  tr.action = mdp.num_actions() == 1 ? 0 : rng.categorical(policy.action_probs().row(state));
  tr.next_state = rng.categorical(mdp.transition(tr.action).row(state));
  tr.reward = mdp.reward(tr.action)(state, tr.next_state);
  return tr;
}

template <typename Scalar>
Trajectory<Scalar> sample_trajectory(const TabularMdp<Scalar>& mdp, const Policy<Scalar>& policy, int start_state,
                                     int num_steps, std::uint64_t rng_seed) {
  check_compatible(mdp, policy);
  if (start_state < 0 || start_state >= mdp.num_states())
    throw std::invalid_argument("sample_trajectory: start state out of range");
  if (num_steps < 0) throw std::invalid_argument("sample_trajectory: negative step count");
  Rng rng(rng_seed);
  Trajectory<Scalar> out;
  out.reserve(static_cast<std::size_t>(num_steps));
  int state = start_state;
  int episode_step = 0;
  for (int t = 0; t < num_steps; ++t) {
    Transition<Scalar> tr = sample_step(mdp, policy, state, rng);
    ++episode_step;
    if (mdp.episode_length() > 0 && episode_step >= mdp.episode_length()) {
      tr.done = true;
      episode_step = 0;
      state = start_state;
    } else {
      state = tr.next_state;
    }
    out.push_back(tr);
  }
  return out;
}

/// Nonzero-reward frequency scaled to a per-`window`-steps rate.
template <typename Scalar>
double reward_density(std::span<const Transition<Scalar>> trajectory, int window) {
  if (trajectory.empty()) throw std::invalid_argument("reward_density: empty trajectory");
  if (window <= 0) throw std::invalid_argument("reward_density: window must be positive");
  const auto hits = std::count_if(trajectory.begin(), trajectory.end(),
                                  [](const Transition<Scalar>& tr) { return tr.reward != Scalar(0); });
  return static_cast<double>(hits) / static_cast<double>(trajectory.size()) * window;
}

/**
 * Ring of num_states states with a single action. State i advances to
 * (i+1) mod N with advance_prob and stays otherwise. The advance 1 -> 2 pays
 * +1, the advance 2 -> 3 pays -1; every other transition pays 0.
 */
template <typename Scalar>
TabularMdp<Scalar> make_ring_mdp(int num_states, Scalar advance_prob) {
  if (num_states < 3) throw std::invalid_argument("make_ring_mdp: need at least 3 states");
  if (!(advance_prob > Scalar(0) && advance_prob <= Scalar(1)))
    throw std::invalid_argument("make_ring_mdp: advance_prob must lie in (0, 1]");
  RowMatrix<Scalar> p = RowMatrix<Scalar>::Zero(num_states, num_states);
  RowMatrix<Scalar> r = RowMatrix<Scalar>::Zero(num_states, num_states);
  for (int s = 0; s < num_states; ++s) {
    p(s, (s + 1) % num_states) += advance_prob;
    p(s, s) += Scalar(1) - advance_prob;
  }
  r(1, 2) = Scalar(1);
  r(2, 3) = Scalar(-1);
  return TabularMdp<Scalar>({p}, {r});
}

template <typename Scalar>
struct RewardCell {
  int x = 0;
  int y = 0;
  Scalar reward = Scalar(0);
};

enum GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

inline int grid_index(int width, int x, int y) { return y * width + x; }

/**
 * Deterministic 4-action gridworld; cell (x, y) is state y * width + x.
 *
 * Moves that would leave the grid keep the agent in place. Every step pays
 * step_reward plus the reward of the cell it lands on (a reward cell keeps
 * paying while the agent stays on it). Episodes start in cell (0, 0) and are
 * truncated after episode_len steps by the sampler.
 */
template <typename Scalar>
TabularMdp<Scalar> make_gridworld(int width, int height, const std::vector<RewardCell<Scalar>>& reward_cells,
                                  Scalar step_reward, int episode_len) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("make_gridworld: empty grid");
  if (episode_len <= 0) throw std::invalid_argument("make_gridworld: episode length must be positive");
  const int n = width * height;
  Vector<Scalar> cell_reward = Vector<Scalar>::Zero(n);
  for (const auto& cell : reward_cells) {
    if (cell.x < 0 || cell.x >= width || cell.y < 0 || cell.y >= height)
      throw std::invalid_argument("make_gridworld: reward cell out of bounds");
    cell_reward(grid_index(width, cell.x, cell.y)) += cell.reward;
  }
  std::vector<RowMatrix<Scalar>> transitions(4, RowMatrix<Scalar>::Zero(n, n));
  std::vector<RowMatrix<Scalar>> rewards(4, RowMatrix<Scalar>::Zero(n, n));
  constexpr int dx[4] = {0, 0, -1, 1};
  constexpr int dy[4] = {-1, 1, 0, 0};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int s = grid_index(width, x, y);
      for (int a = 0; a < 4; ++a) {
        int nx = x + dx[a];
        int ny = y + dy[a];
        if (nx < 0 || nx >= width || ny < 0 || ny >= height) {
          nx = x;
          ny = y;
        }
        const int next = grid_index(width, nx, ny);
        transitions[a](s, next) = Scalar(1);
        rewards[a](s, next) = step_reward + cell_reward(next);
      }
    }
  }
  return TabularMdp<Scalar>(std::move(transitions), std::move(rewards), 0, episode_len);
}

}  // namespace tddelta

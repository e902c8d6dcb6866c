#pragma once

#include "tddelta/mdp.hpp"
#include "tddelta/schedule.hpp"

namespace tddelta {

/**
 * Per-timescale delta estimates: column z of the table holds W_z(s), the
 * difference between the value functions at gamma_z and gamma_{z-1}
 * (W_0 is the gamma_0 value itself). Summing columns 0..z recovers V_{gamma_z}.
 */
template <typename Scalar>
class DeltaStack {
 public:
  DeltaStack(std::vector<Scalar> gammas, Matrix<Scalar> tables) : gammas_(std::move(gammas)), tables_(std::move(tables)) {
    if (gammas_.empty()) throw std::invalid_argument("DeltaStack: at least one timescale required");
    if (tables_.cols() != static_cast<Eigen::Index>(gammas_.size()))
      throw std::invalid_argument("DeltaStack: table count must equal schedule length");
  }

  static DeltaStack zeros(int num_states, std::vector<Scalar> gammas) {
    const auto z = static_cast<Eigen::Index>(gammas.size());
    return DeltaStack(std::move(gammas), Matrix<Scalar>::Zero(num_states, z));
  }

  int num_states() const { return static_cast<int>(tables_.rows()); }
  int num_timescales() const { return static_cast<int>(tables_.cols()); }
  int top() const { return num_timescales() - 1; }
  const std::vector<Scalar>& gammas() const { return gammas_; }
  Scalar gamma(int z) const { return gammas_[static_cast<std::size_t>(z)]; }

  const Matrix<Scalar>& tables() const { return tables_; }
  Matrix<Scalar>& tables() { return tables_; }

  Scalar operator()(int state, int z) const { return tables_(state, z); }
  Scalar& operator()(int state, int z) { return tables_(state, z); }

  /// V_{gamma_z}(state) = sum_{i <= z} W_i(state).
  Scalar value(int state, int z) const { return tables_.row(state).head(z + 1).sum(); }
  Scalar value(int state) const { return value(state, top()); }

  ValueFunction<Scalar> recompose(int z) const {
    if (z < 0 || z > top()) throw std::out_of_range("DeltaStack::recompose: timescale index out of range");
    return tables_.leftCols(z + 1).rowwise().sum();
  }
  ValueFunction<Scalar> recompose() const { return recompose(top()); }

 private:
  std::vector<Scalar> gammas_;
  Matrix<Scalar> tables_;
};

/// W_0 = V_0, W_z = V_z - V_{z-1}.
template <typename Scalar>
DeltaStack<Scalar> delta_from_values(const std::vector<ValueFunction<Scalar>>& values_per_gamma,
                                     std::vector<Scalar> gammas) {
  if (values_per_gamma.size() != gammas.size() || values_per_gamma.empty())
    throw std::invalid_argument("delta_from_values: need one value function per schedule entry");
  const Eigen::Index n = values_per_gamma.front().size();
  Matrix<Scalar> tables(n, static_cast<Eigen::Index>(gammas.size()));
  for (std::size_t z = 0; z < values_per_gamma.size(); ++z) {
    if (values_per_gamma[z].size() != n) throw std::invalid_argument("delta_from_values: value sizes differ");
    tables.col(static_cast<Eigen::Index>(z)) =
        z == 0 ? values_per_gamma[z] : Vector<Scalar>(values_per_gamma[z] - values_per_gamma[z - 1]);
  }
  return DeltaStack<Scalar>(std::move(gammas), std::move(tables));
}

/// One-step targets for every W_z; bootstrap terms vanish on done transitions.
template <typename Scalar>
Vector<Scalar> single_step_delta_targets(const Transition<Scalar>& tr, const DeltaStack<Scalar>& stack) {
  const int nz = stack.num_timescales();
  Vector<Scalar> targets(nz);
  const Scalar keep = tr.done ? Scalar(0) : Scalar(1);
  targets(0) = tr.reward + keep * stack.gamma(0) * stack(tr.next_state, 0);
  Scalar lower = stack(tr.next_state, 0);  // running V_{z-1}(s')
  for (int z = 1; z < nz; ++z) {
    targets(z) = keep * ((stack.gamma(z) - stack.gamma(z - 1)) * lower + stack.gamma(z) * stack(tr.next_state, z));
    lower += stack(tr.next_state, z);
  }
  return targets;
}

/// Per-timescale TD errors delta^z for one transition.
template <typename Scalar>
struct DeltaTdErrors {
  Vector<Scalar> per_z;
  Scalar sum() const { return per_z.sum(); }
};

template <typename Scalar>
DeltaTdErrors<Scalar> delta_td_errors(const Transition<Scalar>& tr, const DeltaStack<Scalar>& stack) {
  Vector<Scalar> targets = single_step_delta_targets(tr, stack);
  targets -= stack.tables().row(tr.state).transpose();
  return {std::move(targets)};
}

/// Standard one-step TD error r + gamma V(s') - V(s).
template <typename Scalar>
Scalar td_error(const Transition<Scalar>& tr, const ValueFunction<Scalar>& values, Scalar gamma) {
  const Scalar bootstrap = tr.done ? Scalar(0) : gamma * values(tr.next_state);
  return tr.reward + bootstrap - values(tr.state);
}

namespace detail {

/// sum_k decay^k errors(k) over the window, stopping after the first done step.
template <typename Scalar, typename ErrorFn>
Scalar discounted_error_sum(std::span<const Transition<Scalar>> window, Scalar decay, ErrorFn&& error_at) {
  Scalar total(0);
  Scalar weight(1);
  for (std::size_t k = 0; k < window.size(); ++k) {
    total += weight * error_at(window[k]);
    if (window[k].done) break;
    weight *= decay;
  }
  return total;
}

}  // namespace detail

/**
 * Truncated forward-view lambda-return over `window` (window[0] is the
 * transition out of s_t): V(s_t) + sum_{k<T} (lambda gamma)^k delta_{t+k}.
 * The sum ends at the first done transition.
 */
template <typename Scalar>
Scalar lambda_return(std::span<const Transition<Scalar>> window, const ValueFunction<Scalar>& values, Scalar gamma,
                     Scalar lambda) {
  if (window.empty()) throw std::invalid_argument("lambda_return: empty window");
  const Scalar decay = trace_decay(gamma, lambda);
  if (!(decay < Scalar(1))) throw std::invalid_argument("lambda_return: lambda * gamma must be below 1");
  return values(window.front().state) +
         detail::discounted_error_sum<Scalar>(window, decay,
                                              [&](const Transition<Scalar>& tr) { return td_error(tr, values, gamma); });
}

/// Truncated lambda-returns G^{z, lambda_z} for every timescale at once.
template <typename Scalar>
Vector<Scalar> delta_lambda_returns(std::span<const Transition<Scalar>> window, const DeltaStack<Scalar>& stack,
                                    const std::vector<Scalar>& lambdas) {
  if (window.empty()) throw std::invalid_argument("delta_lambda_returns: empty window");
  const int nz = stack.num_timescales();
  if (static_cast<int>(lambdas.size()) != nz) throw std::invalid_argument("delta_lambda_returns: lambda count mismatch");
  Vector<Scalar> decay(nz);
  for (int z = 0; z < nz; ++z) {
    decay(z) = trace_decay(stack.gamma(z), lambdas[static_cast<std::size_t>(z)]);
    if (!(decay(z) < Scalar(1))) throw std::invalid_argument("delta_lambda_returns: lambda_z * gamma_z must be below 1");
  }
  Vector<Scalar> total = stack.tables().row(window.front().state).transpose();
  Vector<Scalar> weight = Vector<Scalar>::Ones(nz);
  for (std::size_t k = 0; k < window.size(); ++k) {
    total += weight.cwiseProduct(delta_td_errors(window[k], stack).per_z);
    if (window[k].done) break;
    weight = weight.cwiseProduct(decay);
  }
  return total;
}

template <typename Scalar>
Scalar delta_lambda_return(std::span<const Transition<Scalar>> window, const DeltaStack<Scalar>& stack,
                           const std::vector<Scalar>& lambdas, int z) {
  if (z < 0 || z > stack.top()) throw std::out_of_range("delta_lambda_return: timescale index out of range");
  return delta_lambda_returns(window, stack, lambdas)(z);
}

}  // namespace tddelta

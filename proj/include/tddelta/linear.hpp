#pragma once

#include "tddelta/delta.hpp"

namespace tddelta {

/// Feature map over a finite state space; row s is phi(s).
template <typename Scalar>
using FeatureMatrix = Matrix<Scalar>;

template <typename Scalar>
FeatureMatrix<Scalar> one_hot_features(int num_states) {
  return FeatureMatrix<Scalar>::Identity(num_states, num_states);
}

/// Linear delta estimators W_z(s) = <theta^z, phi(s)>; column z of `weights` is theta^z.
template <typename Scalar>
struct LinearDeltaWeights {
  Matrix<Scalar> weights;
  FeatureMatrix<Scalar> features;

  LinearDeltaWeights(Matrix<Scalar> w, FeatureMatrix<Scalar> phi) : weights(std::move(w)), features(std::move(phi)) {
    if (weights.rows() != features.cols())
      throw std::invalid_argument("LinearDeltaWeights: weight and feature dimensions differ");
  }

  static LinearDeltaWeights zeros(FeatureMatrix<Scalar> phi, int num_timescales) {
    Matrix<Scalar> w = Matrix<Scalar>::Zero(phi.cols(), num_timescales);
    return LinearDeltaWeights(std::move(w), std::move(phi));
  }

  int dim() const { return static_cast<int>(features.cols()); }
  int num_timescales() const { return static_cast<int>(weights.cols()); }

  /// Tabulates every W_z over the state space.
  DeltaStack<Scalar> to_stack(std::vector<Scalar> gammas) const {
    return DeltaStack<Scalar>(std::move(gammas), features * weights);
  }
};

/// theta <- theta + alpha (G^{gamma,lambda}_t - V(s_t)) phi(s_t), G from the truncated window.
template <typename Scalar>
Vector<Scalar> linear_td_lambda_step(const Vector<Scalar>& theta, const FeatureMatrix<Scalar>& features,
                                     std::span<const Transition<Scalar>> window, Scalar alpha, Scalar gamma,
                                     Scalar lambda) {
  if (theta.size() != features.cols()) throw std::invalid_argument("linear_td_lambda_step: dimension mismatch");
  const ValueFunction<Scalar> values = features * theta;
  const int s = window.front().state;
  const Scalar target = lambda_return(window, values, gamma, lambda);
  return theta + alpha * (target - values(s)) * features.row(s).transpose();
}

/// Simultaneous update of every theta^z from the pre-update weights.
template <typename Scalar>
LinearDeltaWeights<Scalar> linear_td_lambda_delta_step(const LinearDeltaWeights<Scalar>& current,
                                                       std::span<const Transition<Scalar>> window,
                                                       const GammaSchedule<Scalar>& schedule) {
  if (current.num_timescales() != schedule.size())
    throw std::invalid_argument("linear_td_lambda_delta_step: timescale count mismatch");
  const DeltaStack<Scalar> stack = current.to_stack(schedule.gammas);
  const int s = window.front().state;
  const Vector<Scalar> targets = delta_lambda_returns(window, stack, schedule.lambdas);
  LinearDeltaWeights<Scalar> next = current;
  const auto phi = current.features.row(s).transpose();
  for (int z = 0; z < schedule.size(); ++z) {
    const Scalar step = schedule.alphas[static_cast<std::size_t>(z)] * (targets(z) - stack(s, z));
    next.weights.col(z) += step * phi;
  }
  return next;
}

}  // namespace tddelta

#pragma once

#include "tddelta/mdp.hpp"
#include "tddelta/schedule.hpp"

namespace tddelta {

/// gamma |1 - lambda| / (1 - lambda gamma), the max-norm modulus of T_lambda.
template <typename Scalar>
Scalar contraction_coefficient(Scalar gamma, Scalar lambda) {
  if (!(lambda * gamma < Scalar(1))) throw std::invalid_argument("contraction_coefficient: lambda * gamma must be below 1");
  return gamma * std::abs(Scalar(1) - lambda) / (Scalar(1) - lambda * gamma);
}

/// T_lambda v = v + (I - lambda gamma P)^{-1} (T v - v), by dense LU solve.
template <typename Scalar>
ValueFunction<Scalar> apply_T_lambda(const TabularMdp<Scalar>& mdp, const Policy<Scalar>& policy, Scalar gamma,
                                     Scalar lambda, const ValueFunction<Scalar>& v) {
  if (!(lambda * gamma < Scalar(1))) throw std::invalid_argument("apply_T_lambda: lambda * gamma must be below 1");
  if (lambda < Scalar(0)) throw std::invalid_argument("apply_T_lambda: lambda must be nonnegative");
  const Matrix<Scalar> p = policy_transition_matrix(mdp, policy);
  const Matrix<Scalar> system = Matrix<Scalar>::Identity(p.rows(), p.cols()) - lambda * gamma * p;
  const ValueFunction<Scalar> residual = apply_bellman(mdp, policy, gamma, v) - v;
  return v + system.partialPivLu().solve(residual);
}

}  // namespace tddelta

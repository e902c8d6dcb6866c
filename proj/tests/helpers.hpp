#pragma once

#include "tddelta/mdp.hpp"

#include <doctest.h>

namespace testing {

using tddelta::MatrixXd;
using tddelta::VectorXd;

/// Ring kernel written out independently of make_ring_mdp.
inline MatrixXd ring_kernel(int n, double p) {
  MatrixXd P = MatrixXd::Zero(n, n);
  for (int s = 0; s < n; ++s) {
    P(s, s) = 1.0 - p;
    P(s, (s + 1) % n) = p;
  }
  return P;
}

inline VectorXd ring_expected_reward(int n, double p) {
  VectorXd r = VectorXd::Zero(n);
  r(1) = p;
  r(2) = -p;
  return r;
}

/// V = (I - gamma P)^{-1} r by full-pivot LU.
inline VectorXd dense_value(const MatrixXd& P, const VectorXd& r, double gamma) {
  const MatrixXd A = MatrixXd::Identity(P.rows(), P.cols()) - gamma * P;
  return A.fullPivLu().solve(r);
}

inline double max_abs(const VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

inline tddelta::RowMatrix<double> random_stochastic(int rows, int cols, tddelta::Rng& rng) {
  tddelta::RowMatrix<double> m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform() + 1e-3;
    m.row(i) /= m.row(i).sum();
  }
  return m;
}

inline tddelta::TabularMdp<double> random_mdp(int states, int actions, tddelta::Rng& rng, double reward_scale = 1.0) {
  std::vector<tddelta::RowMatrix<double>> p, r;
  for (int a = 0; a < actions; ++a) {
    p.push_back(random_stochastic(states, states, rng));
    tddelta::RowMatrix<double> rew(states, states);
    for (Eigen::Index i = 0; i < rew.size(); ++i) rew.data()[i] = reward_scale * rng.uniform(-1.0, 1.0);
    r.push_back(rew);
  }
  return tddelta::TabularMdp<double>(p, r);
}

}  // namespace testing

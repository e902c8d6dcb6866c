#include "helpers.hpp"

#include "tddelta/mdp.hpp"

using namespace tddelta;
using testing::dense_value;
using testing::ring_expected_reward;
using testing::ring_kernel;

TEST_SUITE("mdp") {

TEST_CASE("ring row for s1 advances with 0.95 and pays +1") {
  const auto mdp = make_ring_mdp<double>(5, 0.95);
  CHECK(mdp.num_states() == 5);
  CHECK(mdp.num_actions() == 1);
  CHECK(mdp.transition(0)(1, 2) == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(mdp.transition(0)(1, 1) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(mdp.reward(0)(1, 2) == 1.0);
  CHECK(mdp.reward(0)(1, 1) == 0.0);
  CHECK(mdp.reward(0)(2, 3) == -1.0);
  CHECK(mdp.reward(0)(2, 2) == 0.0);
  CHECK(mdp.reward(0).cwiseAbs().sum() == 2.0);
}

TEST_CASE("deterministic ring has one unit entry per row") {
  const auto mdp = make_ring_mdp<double>(5, 1.0);
  for (int s = 0; s < 5; ++s) {
    CHECK(mdp.transition(0)(s, (s + 1) % 5) == 1.0);
    CHECK((mdp.transition(0).row(s).array() == 1.0).count() == 1);
  }
}

TEST_CASE("ring constructor rejects bad arguments") {
  CHECK_THROWS_AS(make_ring_mdp<double>(2, 0.95), std::invalid_argument);
  CHECK_THROWS_AS(make_ring_mdp<double>(5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_ring_mdp<double>(5, 1.5), std::invalid_argument);
}

TEST_CASE("TabularMdp validates kernels") {
  RowMatrix<double> p(2, 2);
  p << 0.5, 0.6, 0.0, 1.0;
  RowMatrix<double> r = RowMatrix<double>::Zero(2, 2);
  CHECK_THROWS_AS(TabularMdp<double>({p}, {r}), std::invalid_argument);
  p << 0.5, 0.5, 0.0, 1.0;
  CHECK_NOTHROW(TabularMdp<double>({p}, {r}));
  r(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(TabularMdp<double>({p}, {r}), std::invalid_argument);
  CHECK_THROWS_AS(Policy<double>(RowMatrix<double>::Constant(2, 2, 0.4)), std::invalid_argument);
}

TEST_CASE("apply_bellman examples") {
  const auto mdp = make_ring_mdp<double>(5, 0.95);
  const auto pi = Policy<double>::uniform(mdp);
  const VectorXd r = ring_expected_reward(5, 0.95);
  CHECK((apply_bellman(mdp, pi, 0.9, VectorXd(VectorXd::Zero(5))) - r).cwiseAbs().maxCoeff() < 1e-15);
  VectorXd arbitrary(5);
  arbitrary << 3, -1, 4, 1, -5;
  CHECK((apply_bellman(mdp, pi, 0.0, arbitrary) - r).cwiseAbs().maxCoeff() < 1e-15);
  const VectorXd ones = VectorXd::Ones(5);
  const VectorXd expected = r + 0.5 * ones;
  CHECK((apply_bellman(mdp, pi, 0.5, ones) - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(apply_bellman(mdp, pi, 0.5, VectorXd(VectorXd::Zero(4))), std::invalid_argument);
  CHECK_THROWS_AS(apply_bellman(mdp, pi, 1.0, ones), std::invalid_argument);
}

TEST_CASE("apply_bellman is affine in v") {
  Rng rng(3);
  auto mdp = testing::random_mdp(6, 3, rng);
  // Zero the rewards to isolate the linear part.
  std::vector<RowMatrix<double>> p, zero;
  for (int a = 0; a < mdp.num_actions(); ++a) {
    p.push_back(mdp.transition(a));
    zero.push_back(RowMatrix<double>::Zero(6, 6));
  }
  const TabularMdp<double> lin(p, zero);
  const Policy<double> pi(testing::random_stochastic(6, 3, rng));
  VectorXd v1(6), v2(6);
  for (int i = 0; i < 6; ++i) {
    v1(i) = rng.normal();
    v2(i) = rng.normal();
  }
  const double a = 0.7, b = -1.3, g = 0.8;
  const VectorXd lhs = apply_bellman(lin, pi, g, VectorXd(a * v1 + b * v2));
  const VectorXd rhs = a * apply_bellman(lin, pi, g, v1) + b * apply_bellman(lin, pi, g, v2);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("value_iteration matches a dense linear solve on the ring") {
  const auto mdp = make_ring_mdp<double>(5, 0.95);
  const auto pi = Policy<double>::uniform(mdp);
  const double gamma = 0.9375;
  const VectorXd v = value_iteration(mdp, pi, gamma);
  const VectorXd oracle = dense_value(ring_kernel(5, 0.95), ring_expected_reward(5, 0.95), gamma);
  CHECK((v - oracle).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((apply_bellman(mdp, pi, gamma, v) - v).cwiseAbs().maxCoeff() <= 1e-12);
  // The advance rewards cancel around the ring, so the values sum to zero.
  CHECK(std::abs(v.sum()) < 1e-10);
  CHECK(v(1) > 0.0);
  CHECK(v(2) < 0.0);
}

TEST_CASE("value_iteration at gamma 0 is the expected reward") {
  const auto mdp = make_ring_mdp<double>(5, 0.95);
  const auto pi = Policy<double>::uniform(mdp);
  const VectorXd v = value_iteration(mdp, pi, 0.0);
  CHECK(v(1) == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(v(2) == doctest::Approx(-0.95).epsilon(1e-15));
  CHECK(value_iteration(mdp, pi, 1e-6)(1) == doctest::Approx(0.95).epsilon(1e-5));
  CHECK_THROWS_AS(value_iteration(mdp, pi, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(value_iteration(mdp, pi, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("value_iteration residual on random MDPs") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto mdp = testing::random_mdp(7, 2, rng);
    const Policy<double> pi(testing::random_stochastic(7, 2, rng));
    const double tol = 1e-11;
    const VectorXd v = value_iteration(mdp, pi, 0.95, tol);
    CHECK((apply_bellman(mdp, pi, 0.95, v) - v).cwiseAbs().maxCoeff() <= tol);
  }
}

TEST_CASE("sample_trajectory on the deterministic ring cycles") {
  const auto mdp = make_ring_mdp<double>(5, 1.0);
  const auto traj = sample_trajectory(mdp, Policy<double>::uniform(mdp), 0, 12, 7);
  for (int t = 0; t < 12; ++t) {
    CHECK(traj[t].state == t % 5);
    CHECK(traj[t].next_state == (t + 1) % 5);
    CHECK_FALSE(traj[t].done);
  }
}

TEST_CASE("sample_trajectory is seeded and chained") {
  const auto mdp = make_ring_mdp<double>(5, 0.95);
  const auto pi = Policy<double>::uniform(mdp);
  const auto a = sample_trajectory(mdp, pi, 0, 10000, 0);
  const auto b = sample_trajectory(mdp, pi, 0, 10000, 0);
  const auto c = sample_trajectory(mdp, pi, 0, 10000, 1);
  REQUIRE(a.size() == 10000);
  bool same = true, differ = false;
  int advances = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    same = same && a[t].state == b[t].state && a[t].next_state == b[t].next_state && a[t].reward == b[t].reward;
    differ = differ || a[t].next_state != c[t].next_state;
    advances += a[t].next_state != a[t].state;
  }
  CHECK(same);
  CHECK(differ);
  CHECK(is_chained<double>(a));
  CHECK(std::abs(advances / 10000.0 - 0.95) < 0.01);
  CHECK_THROWS_AS(sample_trajectory(mdp, pi, 9, 10, 0), std::invalid_argument);
}

TEST_CASE("reward_density") {
  Trajectory<double> zeros(10), ones(10);
  for (auto& tr : ones) tr.reward = 1.0;
  CHECK(reward_density<double>(zeros, 100) == 0.0);
  CHECK(reward_density<double>(ones, 100) == 100.0);
  CHECK_THROWS_AS(reward_density<double>(Trajectory<double>{}, 100), std::invalid_argument);

  const auto mdp = make_ring_mdp<double>(5, 0.95);
  const auto traj = sample_trajectory(mdp, Policy<double>::uniform(mdp), 0, 10000, 0);
  const double density = reward_density<double>(traj, 100);
  // Stationary distribution is uniform: two rewarded edges of five, taken with 0.95.
  CHECK(std::abs(density - 38.0) < 2.0);
  CHECK(density == doctest::Approx(37.92));
}

TEST_CASE("gridworld layout") {
  const auto one = make_gridworld<double>(1, 1, {}, -0.1, 10);
  CHECK(one.num_states() == 1);
  CHECK(one.num_actions() == 4);
  for (int a = 0; a < 4; ++a) {
    CHECK(one.transition(a)(0, 0) == 1.0);
    CHECK(one.reward(a)(0, 0) == -0.1);
  }
  const auto grid = make_gridworld<double>(5, 5, {{4, 4, 1.0}}, 0.0, 50);
  CHECK(grid.transition(0).rows() == 25);
  const int corner = grid_index(5, 4, 4);
  const int left = grid_index(5, 3, 4);
  CHECK(grid.transition(kRight)(left, corner) == 1.0);
  CHECK(grid.reward(kRight)(left, corner) == 1.0);
  CHECK(grid.transition(kRight)(corner, corner) == 1.0);  // wall
  CHECK(grid.transition(kUp)(0, 0) == 1.0);
  CHECK(grid.transition(kDown)(0, grid_index(5, 0, 1)) == 1.0);
  CHECK(grid.reward(kDown)(0, grid_index(5, 0, 1)) == 0.0);
  CHECK_THROWS_AS(make_gridworld<double>(0, 5, {}, 0.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(make_gridworld<double>(5, 5, {{5, 0, 1.0}}, 0.0, 10), std::invalid_argument);
}

TEST_CASE("gridworld sampling truncates episodes") {
  const auto grid = make_gridworld<double>(5, 5, {{4, 4, 1.0}}, 0.0, 7);
  const auto traj = sample_trajectory(grid, Policy<double>::uniform(grid), 0, 21, 5);
  for (int t = 0; t < 21; ++t) CHECK(traj[t].done == ((t + 1) % 7 == 0));
  CHECK(traj[7].state == 0);
  CHECK(traj[14].state == 0);
  CHECK(is_chained<double>(traj));
}

TEST_CASE("gridworld reward density under the uniform policy") {
  const auto grid = make_gridworld<double>(5, 5, {{4, 4, 1.0}, {2, 2, 0.5}}, 0.0, 50);
  const auto traj = sample_trajectory(grid, Policy<double>::uniform(grid), 0, 10000, 0);
  const double density = reward_density<double>(traj, 100);
  CHECK(density > 0.0);
  CHECK(density < 20.0);
  CHECK(density == doctest::Approx(5.78));
}

}  // TEST_SUITE

#include "helpers.hpp"

#include "tddelta/actor_critic.hpp"

using namespace tddelta;

namespace {

RolloutBuffer random_buffer(int states, int actions, int length, Rng& rng, const LinearSoftmaxPolicy& behaviour,
                            double done_prob = 0.0) {
  RolloutBuffer buf;
  int s = static_cast<int>(rng.uniform() * states);
  for (int t = 0; t < length; ++t) {
    Transition<double> tr;
    tr.state = s;
    tr.action = behaviour.sample(s, rng);
    tr.next_state = static_cast<int>(rng.uniform() * states);
    tr.reward = rng.normal();
    tr.done = rng.uniform() < done_prob;
    buf.transitions.push_back(tr);
    buf.old_log_probs.push_back(behaviour.log_prob(tr.state, tr.action));
    s = tr.done ? static_cast<int>(rng.uniform() * states) : tr.next_state;
  }
  return buf;
}

LinearSoftmaxPolicy random_policy(int states, int actions, int d, Rng& rng) {
  MatrixXd w(actions, d), phi(states, d);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < phi.size(); ++i) phi.data()[i] = rng.normal();
  return LinearSoftmaxPolicy(w, phi);
}

DeltaStack<double> random_stack(int states, const std::vector<double>& gammas, Rng& rng) {
  MatrixXd t(states, static_cast<Eigen::Index>(gammas.size()));
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return DeltaStack<double>(gammas, t);
}

double max_rel_error(const MatrixXd& analytic, const MatrixXd& numeric) {
  return (analytic - numeric).cwiseAbs().maxCoeff() / std::max(1e-8, numeric.cwiseAbs().maxCoeff());
}

template <typename Fn>
MatrixXd finite_difference(LinearSoftmaxPolicy policy, Fn&& f, double h = 1e-6) {
  MatrixXd grad(policy.num_actions(), policy.dim());
  for (int a = 0; a < policy.num_actions(); ++a) {
    for (int j = 0; j < policy.dim(); ++j) {
      const double w0 = policy.weights()(a, j);
      policy.weights()(a, j) = w0 + h;
      const double up = f(policy);
      policy.weights()(a, j) = w0 - h;
      const double down = f(policy);
      policy.weights()(a, j) = w0;
      grad(a, j) = (up - down) / (2 * h);
    }
  }
  return grad;
}

}  // namespace

TEST_SUITE("actor_critic") {

TEST_CASE("softmax policy rows are positive and normalized") {
  Rng rng(1);
  auto policy = random_policy(6, 4, 3, rng);
  policy.weights() *= 30.0;
  for (int s = 0; s < 6; ++s) {
    const VectorXd p = policy.probs(s);
    CHECK((p.array() > 0.0).all());
    CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
    for (int a = 0; a < 4; ++a) CHECK(std::exp(policy.log_prob(s, a)) == doctest::Approx(p(a)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(LinearSoftmaxPolicy(MatrixXd::Zero(2, 3), MatrixXd::Zero(4, 2)), std::invalid_argument);
}

TEST_CASE("log-prob and entropy gradients match finite differences") {
  Rng rng(2);
  const auto policy = random_policy(5, 3, 4, rng);
  for (int s = 0; s < 5; ++s) {
    for (int a = 0; a < 3; ++a) {
      const MatrixXd fd = finite_difference(policy, [&](const LinearSoftmaxPolicy& p) { return p.log_prob(s, a); });
      CHECK(max_rel_error(policy.grad_log_prob(s, a), fd) < 1e-6);
    }
    const MatrixXd fd = finite_difference(policy, [&](const LinearSoftmaxPolicy& p) { return p.entropy(s); });
    CHECK(max_rel_error(policy.grad_entropy(s), fd) < 1e-6);
  }
}

TEST_CASE("PPO clip objective examples") {
  CHECK(ppo_clip_objective(1.0, 2.5, 0.1) == 2.5);
  CHECK(ppo_clip_objective(2.0, 3.0, 0.1) == doctest::Approx(1.1 * 3.0).epsilon(1e-15));
  CHECK(ppo_clip_objective(0.5, -3.0, 0.1) == doctest::Approx(0.9 * -3.0).epsilon(1e-15));
  CHECK(ppo_clip_objective(1.5, -3.0, 0.1) == doctest::Approx(1.5 * -3.0).epsilon(1e-15));
  CHECK(ppo_clip_objective(0.5, 3.0, 0.1) == doctest::Approx(0.5 * 3.0).epsilon(1e-15));
}

TEST_CASE("unclipped surrogate gradient at the behaviour weights matches finite differences") {
  Rng rng(3);
  for (int instance = 0; instance < 20; ++instance) {
    const auto policy = random_policy(5, 3, 4, rng);
    const RolloutBuffer buf = random_buffer(5, 3, 32, rng, policy);
    std::vector<double> adv(buf.size());
    for (auto& a : adv) a = rng.normal();
    const MatrixXd analytic = surrogate_gradient(policy, buf, adv, 0.2, false);
    // At omega_old the ratios are 1, so this is the vanilla estimator mean A grad log pi.
    MatrixXd vanilla = MatrixXd::Zero(3, 4);
    for (std::size_t t = 0; t < buf.size(); ++t)
      vanilla += adv[t] * policy.grad_log_prob(buf.transitions[t].state, buf.transitions[t].action);
    vanilla /= static_cast<double>(buf.size());
    CHECK((analytic - vanilla).cwiseAbs().maxCoeff() < 1e-12);
    const MatrixXd fd = finite_difference(
        policy, [&](const LinearSoftmaxPolicy& p) { return surrogate_objective(p, buf, adv, 0.2, false); });
    CHECK(max_rel_error(analytic, fd) < 1e-5);
  }
}

TEST_CASE("clipped surrogate gradient away from the clip kinks") {
  Rng rng(4);
  for (int instance = 0; instance < 10; ++instance) {
    const auto behaviour = random_policy(5, 3, 4, rng);
    RolloutBuffer buf = random_buffer(5, 3, 32, rng, behaviour);
    auto current = behaviour;
    current.weights() += 0.3 * MatrixXd::Random(3, 4);
    std::vector<double> adv(buf.size());
    for (auto& a : adv) a = rng.normal();
    const MatrixXd analytic = surrogate_gradient(current, buf, adv, 0.1, true);
    const MatrixXd fd = finite_difference(
        current, [&](const LinearSoftmaxPolicy& p) { return surrogate_objective(p, buf, adv, 0.1, true); }, 1e-7);
    CHECK(max_rel_error(analytic, fd) < 1e-4);
  }
}

TEST_CASE("GAE(Delta) collapses and telescopes") {
  Rng rng(5);
  const auto schedule = make_doubling_schedule(0.9375, 0.1, 0.0);
  const auto stack = random_stack(5, schedule.gammas, rng);
  const auto policy = random_policy(5, 2, 5, rng);
  const RolloutBuffer buf = random_buffer(5, 2, 40, rng, policy, 0.1);
  const auto adv = gae_delta_advantages(buf, stack, schedule);
  const VectorXd v = stack.recompose();
  for (std::size_t t = 0; t < buf.size(); ++t) {
    const double delta = td_error(buf.transitions[t], v, 0.9375);
    CHECK(adv[t] == doctest::Approx(delta).epsilon(1e-13));
    CHECK(std::abs(delta - delta_td_errors(buf.transitions[t], stack).sum()) <= 1e-12);
  }
}

TEST_CASE("GAE(Delta) with Z = 0 is standard GAE bit for bit") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const double gamma = rng.uniform(0.5, 0.99);
    const double lambda = rng.uniform(0.0, 1.0);
    const GammaSchedule<double> single{{gamma}, {1}, {lambda}, {0.1}};
    const auto stack = random_stack(6, {gamma}, rng);
    const auto policy = random_policy(6, 2, 3, rng);
    const RolloutBuffer buf = random_buffer(6, 2, 64, rng, policy, 0.05);
    const auto a = gae_delta_advantages(buf, stack, single);
    const auto b = gae_advantages(buf, stack.tables().col(0), gamma, lambda);
    CHECK(a == b);
  }
}

TEST_CASE("GAE against the forward sum") {
  Rng rng(7);
  const auto policy = random_policy(4, 2, 3, rng);
  const RolloutBuffer buf = random_buffer(4, 2, 30, rng, policy, 0.1);
  VectorXd v(4);
  v << 0.3, -0.2, 1.1, 0.0;
  const auto adv = gae_advantages(buf, v, 0.9, 0.8);
  for (std::size_t t = 0; t < buf.size(); ++t)
    CHECK(adv[t] == doctest::Approx(lambda_return<double>(buf.window(t), v, 0.9, 0.8) - v(buf.transitions[t].state))
                        .epsilon(1e-12));
}

TEST_CASE("converged critic on a deterministic environment gives zero advantages") {
  const auto ring = make_ring_mdp<double>(5, 1.0);
  const auto schedule = make_doubling_schedule(0.9375, 0.1, 0.9, true);
  std::vector<ValueFunction<double>> values;
  for (double g : schedule.gammas) values.push_back(value_iteration(ring, Policy<double>::uniform(ring), g));
  const auto stack = delta_from_values(values, schedule.gammas);
  RolloutBuffer buf;
  for (const auto& tr : sample_trajectory(ring, Policy<double>::uniform(ring), 0, 40, 1)) {
    buf.transitions.push_back(tr);
    buf.old_log_probs.push_back(0.0);
  }
  for (double a : gae_delta_advantages(buf, stack, schedule)) CHECK(std::abs(a) < 1e-10);
  CHECK(critic_value_loss(stack, buf, schedule).cwiseAbs().maxCoeff() < 1e-20);
}

TEST_CASE("delta lambda targets agree with the forward returns") {
  Rng rng(8);
  const auto schedule = make_doubling_schedule(0.9375, 0.1, 0.95, true);
  const auto stack = random_stack(5, schedule.gammas, rng);
  const auto policy = random_policy(5, 2, 3, rng);
  const RolloutBuffer buf = random_buffer(5, 2, 48, rng, policy, 0.05);
  const MatrixXd targets = delta_lambda_targets(buf, stack, schedule);
  for (std::size_t t = 0; t < buf.size(); ++t) {
    const VectorXd forward = delta_lambda_returns(buf.window(t), stack, schedule.lambdas);
    CHECK((targets.row(static_cast<Eigen::Index>(t)).transpose() - forward).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("critic value loss") {
  Rng rng(9);
  const auto schedule = make_doubling_schedule(0.875, 0.1, 0.9, true);
  const auto stack = random_stack(4, schedule.gammas, rng);
  const auto policy = random_policy(4, 2, 3, rng);
  const RolloutBuffer one = random_buffer(4, 2, 1, rng, policy);
  const VectorXd target = single_step_delta_targets(one.transitions[0], stack);
  const VectorXd loss = critic_value_loss(stack, one, schedule);
  for (int z = 0; z < schedule.size(); ++z) {
    const double diff = target(z) - stack(one.transitions[0].state, z);
    CHECK(loss(z) == doctest::Approx(diff * diff).epsilon(1e-13));
  }

  // Multi-step window against a straight-line evaluation.
  const RolloutBuffer buf = random_buffer(4, 2, 12, rng, policy, 0.1);
  const VectorXd l = critic_value_loss(stack, buf, schedule);
  for (int z = 0; z < schedule.size(); ++z) {
    const double decay = schedule.decay(z);
    double total = 0.0;
    for (std::size_t t = 0; t < buf.size(); ++t) {
      double g = stack(buf.transitions[t].state, z);
      double w = 1.0;
      for (std::size_t k = t; k < buf.size(); ++k) {
        g += w * delta_td_errors(buf.transitions[k], stack).per_z(z);
        if (buf.transitions[k].done) break;
        w *= decay;
      }
      const double diff = g - stack(buf.transitions[t].state, z);
      total += diff * diff;
    }
    CHECK(l(z) == doctest::Approx(total / 12.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(critic_value_loss(stack, RolloutBuffer{}, schedule), std::invalid_argument);
}

TEST_CASE("training is deterministic and keeps rows normalized") {
  const auto grid = make_gridworld<double>(3, 3, {{2, 2, 1.0}}, 0.0, 10);
  PpoConfig cfg;
  cfg.rollout_len = 32;
  cfg.num_updates = 15;
  cfg.num_streams = 2;
  cfg.schedule = make_doubling_schedule(0.875, 0.5, 0.9, true);
  const auto a = train_ppo_td_delta(grid, cfg, 3);
  const auto b = train_ppo_td_delta(grid, cfg, 3);
  REQUIRE(a.episode_returns.size() == b.episode_returns.size());
  CHECK(a.episode_returns == b.episode_returns);
  REQUIRE(a.updates.size() == 15);
  for (std::size_t i = 0; i < a.updates.size(); ++i) {
    CHECK(a.updates[i].policy_loss == b.updates[i].policy_loss);
    CHECK(a.updates[i].value_loss == b.updates[i].value_loss);
  }
  CHECK(a.episode_returns.size() == 15 * 2 * 32 / 10);
}

TEST_CASE("zero learning rates reproduce the uniform policy's returns") {
  const auto grid = make_gridworld<double>(3, 3, {{2, 2, 1.0}, {1, 0, 0.5}}, -0.1, 8);
  PpoConfig cfg;
  cfg.rollout_len = 64;
  cfg.num_updates = 100;
  cfg.policy_lr = 0.0;
  cfg.schedule = make_doubling_schedule(0.875, 0.0, 0.9, true);
  const auto curve = train_ppo_td_delta(grid, cfg, 11);
  // Exact expected 8-step return of the uniform policy from the start state.
  const auto pi = Policy<double>::uniform(grid);
  const MatrixXd P = policy_transition_matrix(grid, pi);
  const VectorXd r = expected_reward(grid, pi);
  VectorXd dist = VectorXd::Zero(9);
  dist(0) = 1.0;
  double expected = 0.0;
  for (int t = 0; t < 8; ++t) {
    expected += dist.dot(r);
    dist = P.transpose() * dist;
  }
  std::vector<double> returns = curve.episode_returns;
  double mean = 0.0, var = 0.0;
  for (double x : returns) mean += x;
  mean /= static_cast<double>(returns.size());
  for (double x : returns) var += (x - mean) * (x - mean);
  const double se = std::sqrt(var / (returns.size() - 1) / returns.size());
  CHECK(std::abs(mean - expected) < 4.0 * se);
}

TEST_CASE("Z = 0 training curve fixture") {
  const auto grid = make_gridworld<double>(5, 5, {{4, 4, 1.0}, {2, 2, 0.3}}, 0.0, 50);
  PpoConfig cfg;
  cfg.num_updates = 20;
  cfg.schedule = GammaSchedule<double>{{0.9375}, {16}, {0.95}, {0.5}};
  const auto curve = train_ppo_td_delta(grid, cfg, 0);
  REQUIRE(curve.episode_returns.size() == 20 * 128 / 50);
  // Regression pins recorded from this implementation.
  CHECK(curve.episode_returns.front() == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(curve.episode_returns.back() == doctest::Approx(13.0).epsilon(1e-12));
  CHECK(curve.updates.back().value_loss[0] == doctest::Approx(2.064513951969607).epsilon(1e-12));
}

TEST_CASE("config validation") {
  PpoConfig cfg;
  cfg.schedule = make_doubling_schedule(0.9, 0.1, 0.9, true);
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.clip_eps = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.rollout_len = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.policy_lr = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("early and late returns") {
  TrainingCurve curve;
  for (int i = 0; i < 20; ++i) curve.episode_returns.push_back(i);
  const auto [early, late] = early_late_returns(curve);
  CHECK(early == doctest::Approx(0.5));
  CHECK(late == doctest::Approx(18.5));
  CHECK_THROWS_AS(early_late_returns(TrainingCurve{}), std::invalid_argument);
}

}  // TEST_SUITE

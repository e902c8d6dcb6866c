#pragma once

#include "tddelta/delta.hpp"
#include "tddelta/parallel.hpp"

namespace tddelta {

namespace detail {

/// k-step rollout from `state`; rewards[i] = r_i, states[i] = s_{i+1}.
template <typename Scalar>
void rollout(const TabularMdp<Scalar>& mdp, const Policy<Scalar>& policy, int state, int k, Rng& rng,
             std::vector<Scalar>& rewards, std::vector<int>& states) {
  rewards.resize(static_cast<std::size_t>(k));
  states.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const Transition<Scalar> tr = sample_step(mdp, policy, state, rng);
    rewards[static_cast<std::size_t>(i)] = tr.reward;
    states[static_cast<std::size_t>(i)] = tr.next_state;
    state = tr.next_state;
  }
}

}  // namespace detail

/**
 * One phase of phased k-step TD: from every state, average n fresh k-step
 * rollouts of sum_{i<k} gamma^i r_i + gamma^k v_prev(s_k).
 *
 * Rollouts are drawn state by state, rollout by rollout, from one stream
 * seeded with rng_seed; phased_td_delta_step consumes the stream identically
 * when its top horizon equals k.
 */
template <typename Scalar>
ValueFunction<Scalar> phased_td_step(const TabularMdp<Scalar>& mdp, const Policy<Scalar>& policy,
                                     const ValueFunction<Scalar>& v_prev, Scalar gamma, int k, int n,
                                     std::uint64_t rng_seed) {
  if (n < 1 || k < 1) throw std::invalid_argument("phased_td_step: n and k must be positive");
  if (v_prev.size() != mdp.num_states()) throw std::invalid_argument("phased_td_step: value size mismatch");
  Rng rng(rng_seed);
  std::vector<Scalar> rewards;
  std::vector<int> states;
  const Scalar tail = ipow(gamma, k);
  ValueFunction<Scalar> next(mdp.num_states());
  for (int s = 0; s < mdp.num_states(); ++s) {
    Scalar total(0);
    for (int j = 0; j < n; ++j) {
      detail::rollout(mdp, policy, s, k, rng, rewards, states);
      Scalar g(0);
      Scalar discount(1);
      for (int i = 0; i < k; ++i) {
        g += discount * rewards[static_cast<std::size_t>(i)];
        discount *= gamma;
      }
      total += g + tail * v_prev(states.back());
    }
    next(s) = total / static_cast<Scalar>(n);
  }
  return next;
}

/// One phase of phased multi-step TD(Delta); all timescales share the same n rollouts per state.
template <typename Scalar>
DeltaStack<Scalar> phased_td_delta_step(const TabularMdp<Scalar>& mdp, const Policy<Scalar>& policy,
                                        const DeltaStack<Scalar>& stack_prev, const GammaSchedule<Scalar>& schedule,
                                        int n, std::uint64_t rng_seed) {
  if (n < 1) throw std::invalid_argument("phased_td_delta_step: n must be positive");
  if (!schedule.ks_monotone()) throw std::invalid_argument("phased_td_delta_step: horizons must be nondecreasing");
  if (stack_prev.num_timescales() != schedule.size())
    throw std::invalid_argument("phased_td_delta_step: timescale count mismatch");
  const int nz = schedule.size();
  // prefix(s, z) = V_{z}(s) from the previous phase.
  Matrix<Scalar> prefix(stack_prev.num_states(), nz);
  for (int s = 0; s < stack_prev.num_states(); ++s) {
    Scalar running(0);
    for (int z = 0; z < nz; ++z) {
      running += stack_prev(s, z);
      prefix(s, z) = running;
    }
  }
  std::vector<std::vector<Scalar>> reward_coef(static_cast<std::size_t>(nz));
  std::vector<Scalar> lower_coef(static_cast<std::size_t>(nz)), own_coef(static_cast<std::size_t>(nz));
  for (int z = 0; z < nz; ++z) {
    const auto zi = static_cast<std::size_t>(z);
    const int k = schedule.ks[zi];
    const Scalar g = schedule.gammas[zi];
    const Scalar g_prev = z > 0 ? schedule.gammas[zi - 1] : Scalar(0);
    reward_coef[zi].resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) reward_coef[zi][static_cast<std::size_t>(i)] = z == 0 ? ipow(g, i) : ipow(g, i) - ipow(g_prev, i);
    lower_coef[zi] = z == 0 ? Scalar(0) : ipow(g, k) - ipow(g_prev, k);
    own_coef[zi] = ipow(g, k);
  }

  Rng rng(rng_seed);
  std::vector<Scalar> rewards;
  std::vector<int> states;
  Matrix<Scalar> next = Matrix<Scalar>::Zero(stack_prev.num_states(), nz);
  for (int s = 0; s < mdp.num_states(); ++s) {
    for (int j = 0; j < n; ++j) {
      detail::rollout(mdp, policy, s, schedule.k_top(), rng, rewards, states);
      for (int z = 0; z < nz; ++z) {
        const auto zi = static_cast<std::size_t>(z);
        const int k = schedule.ks[zi];
        Scalar g(0);
        for (int i = 0; i < k; ++i) g += reward_coef[zi][static_cast<std::size_t>(i)] * rewards[static_cast<std::size_t>(i)];
        const int boot = states[static_cast<std::size_t>(k) - 1];
        const Scalar lower = z > 0 ? prefix(boot, z - 1) : Scalar(0);
        next(s, z) += g + lower_coef[zi] * lower + own_coef[zi] * stack_prev(boot, z);
      }
    }
  }
  next /= static_cast<Scalar>(n);
  return DeltaStack<Scalar>(stack_prev.gammas(), std::move(next));
}

/// sqrt(2 ln(2k / delta) / n): the Hoeffding radius covering k reward terms with probability 1 - delta.
inline double epsilon_bound(int n, int k, double delta) {
  if (n < 1 || k < 1) throw std::invalid_argument("epsilon_bound: n and k must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("epsilon_bound: delta must lie in (0, 1)");
  return std::sqrt(2.0 * std::log(2.0 * k / delta) / n);
}

/// Phased k-step TD error bound: epsilon (1 - gamma^k) / (1 - gamma) + gamma^k prev.
template <typename Scalar>
Scalar td_error_bound(Scalar epsilon, Scalar gamma, int k, Scalar delta_prev) {
  if (!(gamma >= Scalar(0) && gamma < Scalar(1))) throw std::invalid_argument("td_error_bound: gamma must lie in [0, 1)");
  const Scalar tail = ipow(gamma, k);
  return epsilon * (Scalar(1) - tail) / (Scalar(1) - gamma) + tail * delta_prev;
}

/**
 * Phased TD(Delta) bound on sum_z Delta^z_t:
 *   eps (1 - g^k)/(1 - g)                                   (variance)
 * + eps sum_{z<Z} (g_z^{k_{z+1}} - g_z^{k_z}) / (1 - g_z)    (variance reduction, <= 0)
 * + sum_{z<Z} (g_z^{k_z} - g_z^{k_{z+1}}) sum_{u<=z} prev_u  (bias introduction, >= 0)
 * + g^k sum_z prev_z                                         (bias)
 * with g = gamma_Z and k = k_Z.
 */
template <typename Scalar>
Scalar td_delta_error_bound(Scalar epsilon, const std::vector<Scalar>& gammas, const std::vector<int>& ks,
                            const std::vector<Scalar>& delta_prev) {
  if (gammas.empty() || ks.size() != gammas.size() || delta_prev.size() != gammas.size())
    throw std::invalid_argument("td_delta_error_bound: schedule and error vectors must share one length");
  for (std::size_t z = 1; z < gammas.size(); ++z) {
    if (gammas[z] < gammas[z - 1] || ks[z] < ks[z - 1])
      throw std::invalid_argument("td_delta_error_bound: discounts and horizons must be nondecreasing");
  }
  const std::size_t top = gammas.size() - 1;
  const Scalar g = gammas[top];
  const int k = ks[top];
  Scalar bound = td_error_bound(epsilon, g, k, Scalar(0));
  Scalar prefix(0);
  Scalar total_prev(0);
  for (std::size_t z = 0; z < top; ++z) {
    const Scalar lo = ipow(gammas[z], ks[z]);
    const Scalar hi = ipow(gammas[z], ks[z + 1]);
    prefix += delta_prev[z];
    bound += epsilon * (hi - lo) / (Scalar(1) - gammas[z]);
    bound += (lo - hi) * prefix;
  }
  for (Scalar d : delta_prev) total_prev += d;
  return bound + ipow(g, k) * total_prev;
}

struct PhasedBoundConfig {
  int n = 100;
  int num_phases = 20;
  int num_repeats = 1000;
  double delta = 0.1;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool keep_records = false;
};

struct PhaseRecord {
  int repeat = 0;
  int phase = 0;  // 1-based; phase 0 is the initial estimate
  double realized_error = 0.0;
  double analytic_bound = 0.0;
  bool violated = false;
};

struct PhasedBoundResult {
  std::vector<double> violation_fraction_per_phase;  // index phase - 1
  std::vector<double> mean_error_per_phase;
  double violation_fraction = 0.0;
  std::vector<PhaseRecord> records;  // repeat-major, filled when keep_records
};

namespace detail {

inline PhasedBoundResult summarize_phases(std::vector<std::vector<PhaseRecord>> per_repeat, int num_phases,
                                          bool keep_records) {
  PhasedBoundResult result;
  result.violation_fraction_per_phase.assign(static_cast<std::size_t>(num_phases), 0.0);
  result.mean_error_per_phase.assign(static_cast<std::size_t>(num_phases), 0.0);
  std::size_t violations = 0;
  std::size_t total = 0;
  for (const auto& chain : per_repeat) {
    for (const auto& rec : chain) {
      const auto p = static_cast<std::size_t>(rec.phase - 1);
      result.violation_fraction_per_phase[p] += rec.violated ? 1.0 : 0.0;
      result.mean_error_per_phase[p] += rec.realized_error;
      violations += rec.violated ? 1 : 0;
      ++total;
    }
  }
  const double repeats = static_cast<double>(per_repeat.size());
  for (std::size_t p = 0; p < result.violation_fraction_per_phase.size(); ++p) {
    result.violation_fraction_per_phase[p] /= repeats;
    result.mean_error_per_phase[p] /= repeats;
  }
  result.violation_fraction = total == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(total);
  if (keep_records) {
    for (auto& chain : per_repeat) result.records.insert(result.records.end(), chain.begin(), chain.end());
  }
  return result;
}

inline void check_bound_preconditions(const TabularMdp<double>& mdp, const PhasedBoundConfig& cfg) {
  if (!mdp.rewards_within(-1.0, 1.0)) throw std::invalid_argument("bound verification needs rewards in [-1, 1]");
  if (cfg.num_phases < 1 || cfg.num_repeats < 1) throw std::invalid_argument("bound verification needs phases and repeats");
}

}  // namespace detail

/**
 * Runs num_repeats independent phased k-step TD chains from V = 0. Each phase
 * compares max_s |V_t - V| against td_error_bound seeded with the realized
 * error of the previous phase.
 */
inline PhasedBoundResult verify_td_bound_frequency(const TabularMdp<double>& mdp, const Policy<double>& policy,
                                                   double gamma, int k, const PhasedBoundConfig& cfg) {
  detail::check_bound_preconditions(mdp, cfg);
  const ValueFunction<double> truth = value_iteration(mdp, policy, gamma);
  const double eps = epsilon_bound(cfg.n, k, cfg.delta);
  std::vector<std::vector<PhaseRecord>> per_repeat(static_cast<std::size_t>(cfg.num_repeats));
  parallel_for(per_repeat.size(), cfg.jobs, [&](std::size_t rep) {
    const std::uint64_t chain_seed = derive_seed(cfg.seed, rep);
    ValueFunction<double> v = ValueFunction<double>::Zero(mdp.num_states());
    double prev = (v - truth).cwiseAbs().maxCoeff();
    auto& chain = per_repeat[rep];
    chain.reserve(static_cast<std::size_t>(cfg.num_phases));
    for (int phase = 1; phase <= cfg.num_phases; ++phase) {
      v = phased_td_step(mdp, policy, v, gamma, k, cfg.n, derive_seed(chain_seed, static_cast<std::uint64_t>(phase)));
      const double err = (v - truth).cwiseAbs().maxCoeff();
      const double bound = td_error_bound(eps, gamma, k, prev);
      chain.push_back({static_cast<int>(rep), phase, err, bound, err > bound});
      prev = err;
    }
  });
  return detail::summarize_phases(std::move(per_repeat), cfg.num_phases, cfg.keep_records);
}

/// Per-timescale errors max_s |W_z - W_z^true|.
inline std::vector<double> delta_errors(const DeltaStack<double>& estimate, const DeltaStack<double>& truth) {
  std::vector<double> out(static_cast<std::size_t>(estimate.num_timescales()));
  for (int z = 0; z < estimate.num_timescales(); ++z)
    out[static_cast<std::size_t>(z)] = (estimate.tables().col(z) - truth.tables().col(z)).cwiseAbs().maxCoeff();
  return out;
}

/// Phased TD(Delta) counterpart; realized error is sum_z Delta^z_t and epsilon uses k = k_Z.
inline PhasedBoundResult verify_td_delta_bound_frequency(const TabularMdp<double>& mdp, const Policy<double>& policy,
                                                         const GammaSchedule<double>& schedule,
                                                         const PhasedBoundConfig& cfg) {
  detail::check_bound_preconditions(mdp, cfg);
  std::vector<ValueFunction<double>> values;
  for (double g : schedule.gammas) values.push_back(value_iteration(mdp, policy, g));
  const DeltaStack<double> truth = delta_from_values(values, schedule.gammas);
  const double eps = epsilon_bound(cfg.n, schedule.k_top(), cfg.delta);
  std::vector<std::vector<PhaseRecord>> per_repeat(static_cast<std::size_t>(cfg.num_repeats));
  parallel_for(per_repeat.size(), cfg.jobs, [&](std::size_t rep) {
    const std::uint64_t chain_seed = derive_seed(cfg.seed, rep);
    DeltaStack<double> stack = DeltaStack<double>::zeros(mdp.num_states(), schedule.gammas);
    std::vector<double> prev = delta_errors(stack, truth);
    auto& chain = per_repeat[rep];
    chain.reserve(static_cast<std::size_t>(cfg.num_phases));
    for (int phase = 1; phase <= cfg.num_phases; ++phase) {
      stack = phased_td_delta_step(mdp, policy, stack, schedule, cfg.n,
                                   derive_seed(chain_seed, static_cast<std::uint64_t>(phase)));
      const std::vector<double> errs = delta_errors(stack, truth);
      double err = 0.0;
      for (double e : errs) err += e;
      const double bound = td_delta_error_bound(eps, schedule.gammas, schedule.ks, prev);
      chain.push_back({static_cast<int>(rep), phase, err, bound, err > bound});
      prev = errs;
    }
  });
  return detail::summarize_phases(std::move(per_repeat), cfg.num_phases, cfg.keep_records);
}

}  // namespace tddelta

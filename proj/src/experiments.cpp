#include "tddelta/experiments.hpp"

#include "tddelta/format.hpp"
#include "tddelta/multistep.hpp"
#include "tddelta/operators.hpp"
#include "tddelta/parallel.hpp"

#include <algorithm>
#include <cstring>
#include <map>

namespace tddelta {

std::uint64_t trajectory_hash(std::span<const Transition<double>> traj) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& tr : traj) {
    const std::int32_t ints[3] = {tr.state, tr.action, tr.next_state};
    std::uint64_t bits = 0;
    std::memcpy(&bits, &tr.reward, sizeof(bits));
    const unsigned char done = tr.done ? 1 : 0;
    h = fnv1a(ints, sizeof(ints), h);
    h = fnv1a(&bits, sizeof(bits), h);
    h = fnv1a(&done, 1, h);
  }
  return h;
}

// ---------------------------------------------------------------- ring grid

RingGridResult run_ring_grid(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  const TabularMdp<double> mdp = make_ring_mdp<double>(cfg.ring_states, cfg.advance_prob);
  const Policy<double> policy = Policy<double>::uniform(mdp);
  const std::vector<double> targets = effective_targets(cfg);

  std::vector<ValueFunction<double>> oracles;
  std::vector<std::vector<GammaSchedule<double>>> schedules;  // [gamma][alpha]
  for (double g : targets) {
    oracles.push_back(value_iteration(mdp, policy, g));
    auto& row = schedules.emplace_back();
    for (double a : cfg.alphas) row.push_back(build_schedule(cfg, g, a));
    if (cfg.num_steps <= row.front().k_top())
      throw std::invalid_argument("ring-grid: num_steps must exceed k_Z for every target");
  }

  const std::size_t n_gamma = targets.size();
  const std::size_t n_alpha = cfg.alphas.size();
  const auto n_seed = static_cast<std::size_t>(cfg.num_seeds);
  // slot(g, a, seed, algo)
  std::vector<RingRunRecord> slots(n_gamma * n_alpha * n_seed * 2);
  auto slot = [&](std::size_t g, std::size_t a, std::size_t s, std::size_t algo) -> RingRunRecord& {
    return slots[((g * n_alpha + a) * n_seed + s) * 2 + algo];
  };

  parallel_for(n_seed, jobs, [&](std::size_t s) {
    const Trajectory<double> traj =
        sample_trajectory(mdp, policy, mdp.start_state(), cfg.num_steps, derive_seed(cfg.base_seed, s));
    const std::uint64_t hash = trajectory_hash(traj);
    for (std::size_t g = 0; g < n_gamma; ++g) {
      for (std::size_t a = 0; a < n_alpha; ++a) {
        const GammaSchedule<double>& schedule = schedules[g][a];
        const double alpha = cfg.alphas[a];
        const auto base = run_k_step_td<double>(traj, mdp.num_states(), schedule.gamma_top(), schedule.k_top(),
                                                alpha, oracles[g]);
        const auto delta = run_multi_step_td_delta<double>(traj, mdp.num_states(), schedule, oracles[g]);
        slot(g, a, s, 0) = {"td", targets[g], alpha, static_cast<int>(s), base.mean_error(), hash};
        slot(g, a, s, 1) = {"td_delta", targets[g], alpha, static_cast<int>(s), delta.mean_error(), hash};
      }
    }
  });

  return {cfg.hash(), std::move(slots)};
}

std::string ring_grid_csv(const RingGridResult& result) {
  CsvTable csv({"algo", "gamma_z", "alpha", "seed", "mean_abs_error", "trajectory_hash", "config_hash"});
  const std::string config_hash = format_hex(result.config_hash);
  for (const auto& r : result.records)
    csv.row({r.algo, format_double(r.gamma), format_double(r.alpha), std::to_string(r.seed),
             format_double(r.mean_abs_error), format_hex(r.trajectory_hash), config_hash});
  return csv.text();
}

std::vector<RingComparison> compare_best_alpha(const RingGridResult& result) {
  std::vector<MetricRecord> metrics;
  metrics.reserve(result.records.size());
  for (const auto& r : result.records) metrics.push_back({r.algo, r.gamma, r.alpha, r.seed, r.mean_abs_error});
  const std::vector<AggregateRow> rows = aggregate(metrics);

  std::map<double, RingComparison> by_gamma;
  for (const auto& row : rows) {
    auto& cmp = by_gamma[row.gamma];
    cmp.gamma = row.gamma;
    AggregateRow& best = row.algo == "td" ? cmp.td : cmp.td_delta;
    if (best.algo.empty() || row.summary.mean < best.summary.mean) best = row;
  }
  std::vector<RingComparison> out;
  for (auto& [gamma, cmp] : by_gamma) {
    std::vector<double> a, b;
    for (const auto& r : result.records) {
      if (r.gamma != gamma) continue;
      if (r.algo == "td_delta" && r.alpha == cmp.td_delta.alpha) a.push_back(r.mean_abs_error);
      if (r.algo == "td" && r.alpha == cmp.td.alpha) b.push_back(r.mean_abs_error);
    }
    try {
      cmp.welch = welch_t_test(a, b);
      cmp.welch_defined = true;
    } catch (const std::invalid_argument&) {
      cmp.welch_defined = false;
    }
    out.push_back(cmp);
  }
  return out;
}

std::string ring_comparison_csv(const std::vector<RingComparison>& rows) {
  CsvTable csv({"gamma_z", "td_alpha", "td_mean", "td_std_error", "td_delta_alpha", "td_delta_mean", "td_delta_std_error",
                "n", "welch_t", "welch_df", "p_value", "significant"});
  for (const auto& r : rows) {
    csv.row({format_double(r.gamma), format_double(r.td.alpha), format_double(r.td.summary.mean),
             format_double(r.td.summary.std_error), format_double(r.td_delta.alpha),
             format_double(r.td_delta.summary.mean), format_double(r.td_delta.summary.std_error),
             std::to_string(r.td.summary.n), r.welch_defined ? format_double(r.welch.t) : "",
             r.welch_defined ? format_double(r.welch.df) : "", r.welch_defined ? format_double(r.welch.p_value) : "",
             r.welch_defined ? (r.welch.significant ? "1" : "0") : ""});
  }
  return csv.text();
}

// ----------------------------------------------------------- phased bounds

std::vector<PhasedBoundsRun> run_phased_bounds(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  const TabularMdp<double> mdp = make_ring_mdp<double>(cfg.ring_states, cfg.advance_prob);
  const Policy<double> policy = Policy<double>::uniform(mdp);
  PhasedBoundConfig pcfg;
  pcfg.n = cfg.phased_n;
  pcfg.num_phases = cfg.num_phases;
  pcfg.num_repeats = cfg.num_repeats;
  pcfg.delta = cfg.bound_delta;
  pcfg.seed = cfg.base_seed;
  pcfg.jobs = jobs;
  pcfg.keep_records = true;
  std::vector<PhasedBoundsRun> runs;
  for (double g : effective_targets(cfg)) {
    const GammaSchedule<double> schedule = build_schedule(cfg, g, cfg.alphas.front());
    runs.push_back({"td", g, verify_td_bound_frequency(mdp, policy, schedule.gamma_top(), schedule.k_top(), pcfg)});
    runs.push_back({"td_delta", g, verify_td_delta_bound_frequency(mdp, policy, schedule, pcfg)});
  }
  return runs;
}

std::string phased_bounds_csv(const std::vector<PhasedBoundsRun>& runs) {
  CsvTable csv({"algo", "gamma_z", "repeat", "phase", "realized_error", "analytic_bound", "violated"});
  for (const auto& run : runs) {
    const std::string g = format_double(run.gamma);
    for (const auto& rec : run.result.records)
      csv.row({run.algo, g, std::to_string(rec.repeat), std::to_string(rec.phase), format_double(rec.realized_error),
               format_double(rec.analytic_bound), rec.violated ? "1" : "0"});
    // Summary row: mean realized error over all phases and the violation fraction.
    double mean_error = 0.0;
    for (double e : run.result.mean_error_per_phase) mean_error += e;
    mean_error /= static_cast<double>(run.result.mean_error_per_phase.size());
    csv.row({run.algo, g, "all", "all", format_double(mean_error), "", format_double(run.result.violation_fraction)});
  }
  return csv.text();
}

// ------------------------------------------------------------- equivalence

double EquivalenceTrace::max() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

namespace {

EquivalenceTrace linear_lambda_trace(const ExperimentConfig& cfg) {
  const TabularMdp<double> mdp = make_ring_mdp<double>(cfg.ring_states, cfg.advance_prob);
  const Policy<double> policy = Policy<double>::uniform(mdp);
  const GammaSchedule<double> schedule =
      make_doubling_schedule(cfg.equivalence_gamma, cfg.equivalence_alpha, cfg.equivalence_lambda, false);
  const auto window = static_cast<std::size_t>(cfg.equivalence_window);
  const Trajectory<double> traj = sample_trajectory(mdp, policy, mdp.start_state(),
                                                    cfg.num_steps + cfg.equivalence_window - 1,
                                                    derive_seed(cfg.base_seed, 0));
  const FeatureMatrix<double> phi = one_hot_features<double>(mdp.num_states());
  LinearDeltaWeights<double> weights = LinearDeltaWeights<double>::zeros(phi, schedule.size());
  VectorXd theta = VectorXd::Zero(phi.cols());
  EquivalenceTrace trace{"linear_lambda", {}};
  trace.values.reserve(static_cast<std::size_t>(cfg.num_steps));
  const std::span<const Transition<double>> all(traj);
  for (int t = 0; t < cfg.num_steps; ++t) {
    const auto w = all.subspan(static_cast<std::size_t>(t), window);
    weights = linear_td_lambda_delta_step(weights, w, schedule);
    theta = linear_td_lambda_step<double>(theta, phi, w, cfg.equivalence_alpha, cfg.equivalence_gamma,
                                          cfg.equivalence_lambda);
    trace.values.push_back((weights.weights.rowwise().sum() - theta).cwiseAbs().maxCoeff());
  }
  return trace;
}

EquivalenceTrace equal_k_trace(const ExperimentConfig& cfg) {
  const TabularMdp<double> mdp = make_ring_mdp<double>(cfg.ring_states, cfg.advance_prob);
  const Policy<double> policy = Policy<double>::uniform(mdp);
  GammaSchedule<double> schedule = make_doubling_schedule(cfg.equivalence_gamma, cfg.equivalence_alpha);
  schedule.ks.assign(schedule.gammas.size(), cfg.equivalence_k);
  const Trajectory<double> traj =
      sample_trajectory(mdp, policy, mdp.start_state(), cfg.num_steps, derive_seed(cfg.base_seed, 1));
  KStepTd<double> base(mdp.num_states(), cfg.equivalence_gamma, cfg.equivalence_k, cfg.equivalence_alpha);
  MultiStepTdDelta<double> delta(mdp.num_states(), schedule);
  EquivalenceTrace trace{"equal_k_multistep", {}};
  trace.values.reserve(traj.size());
  for (std::size_t t = 0; t < traj.size(); ++t) {
    base.observe(traj, t);
    delta.observe(traj, t);
    trace.values.push_back((delta.stack().recompose() - base.values()).cwiseAbs().maxCoeff());
  }
  return trace;
}

EquivalenceTrace telescoping_trace(const ExperimentConfig& cfg) {
  const std::vector<double> gammas = doubling_gamma_schedule(cfg.equivalence_gamma);
  const int n = cfg.ring_states;
  Rng rng(derive_seed(cfg.base_seed, 2));
  EquivalenceTrace trace{"telescoping", {}};
  trace.values.reserve(static_cast<std::size_t>(cfg.telescoping_draws));
  for (int d = 0; d < cfg.telescoping_draws; ++d) {
    MatrixXd tables(n, static_cast<Eigen::Index>(gammas.size()));
    for (Eigen::Index i = 0; i < tables.size(); ++i) tables.data()[i] = 5.0 * rng.normal();
    const DeltaStack<double> stack(gammas, tables);
    Transition<double> tr;
    tr.state = static_cast<int>(rng.uniform() * n);
    tr.next_state = static_cast<int>(rng.uniform() * n);
    tr.reward = rng.normal();
    tr.done = rng.uniform() < 0.1;
    const double standard = td_error(tr, stack.recompose(), gammas.back());
    trace.values.push_back(std::abs(delta_td_errors(tr, stack).sum() - standard));
  }
  return trace;
}

}  // namespace

std::vector<EquivalenceTrace> run_equivalence(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  std::vector<EquivalenceTrace> traces(3);
  parallel_for(traces.size(), jobs, [&](std::size_t i) {
    if (i == 0) traces[i] = linear_lambda_trace(cfg);
    if (i == 1) traces[i] = equal_k_trace(cfg);
    if (i == 2) traces[i] = telescoping_trace(cfg);
  });
  return traces;
}

std::string equivalence_csv(const std::vector<EquivalenceTrace>& traces) {
  CsvTable csv({"check", "index", "max_abs_diff"});
  for (const auto& trace : traces) {
    for (std::size_t i = 0; i < trace.values.size(); ++i)
      csv.row({trace.check, std::to_string(i), format_double(trace.values[i])});
  }
  return csv.text();
}

// ------------------------------------------------------------- contraction

std::vector<double> contraction_lambdas(double gamma) {
  const double upper = (1.0 + gamma) / (2.0 * gamma);
  std::vector<double> lambdas{0.0, 0.5, 1.0};
  for (double f : {0.25, 0.5, 0.75}) lambdas.push_back(1.0 + f * (upper - 1.0));
  return lambdas;
}

namespace {

struct RandomInstance {
  TabularMdp<double> mdp;
  Policy<double> policy;
};

RowMatrix<double> random_stochastic(int rows, int cols, Rng& rng) {
  RowMatrix<double> m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform() + 1e-3;
    m.row(i) /= m.row(i).sum();
  }
  return m;
}

RandomInstance random_instance(int num_states, int num_actions, Rng& rng) {
  std::vector<RowMatrix<double>> p, r;
  for (int a = 0; a < num_actions; ++a) {
    p.push_back(random_stochastic(num_states, num_states, rng));
    RowMatrix<double> rew(num_states, num_states);
    for (Eigen::Index i = 0; i < rew.size(); ++i) rew.data()[i] = rng.normal();
    r.push_back(std::move(rew));
  }
  return {TabularMdp<double>(std::move(p), std::move(r)), Policy<double>(random_stochastic(num_states, num_actions, rng))};
}

}  // namespace

std::vector<ContractionRecord> run_contraction(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  struct Cell {
    double gamma;
    double lambda;
  };
  std::vector<Cell> cells;
  for (double g : cfg.contraction_gammas)
    for (double l : contraction_lambdas(g)) cells.push_back({g, l});
  const auto draws = static_cast<std::size_t>(cfg.contraction_draws);
  std::vector<ContractionRecord> records(cells.size() * draws);
  parallel_for(cells.size(), jobs, [&](std::size_t c) {
    const double g = cells[c].gamma;
    const double l = cells[c].lambda;
    const double coef = contraction_coefficient(g, l);
    for (std::size_t d = 0; d < draws; ++d) {
      Rng rng(derive_seed(derive_seed(cfg.base_seed, c), d));
      const RandomInstance inst = random_instance(cfg.contraction_states, 2, rng);
      VectorXd v1(cfg.contraction_states), v2(cfg.contraction_states);
      for (int s = 0; s < cfg.contraction_states; ++s) {
        v1(s) = 10.0 * rng.normal();
        v2(s) = 10.0 * rng.normal();
      }
      const VectorXd t1 = apply_T_lambda(inst.mdp, inst.policy, g, l, v1);
      const VectorXd t2 = apply_T_lambda(inst.mdp, inst.policy, g, l, v2);
      const double ratio = (t1 - t2).cwiseAbs().maxCoeff() / (v1 - v2).cwiseAbs().maxCoeff();
      records[c * draws + d] = {g, l, static_cast<int>(d), ratio, coef, ratio <= coef + 1e-10};
    }
  });
  return records;
}

std::string contraction_csv(const std::vector<ContractionRecord>& records) {
  CsvTable csv({"gamma", "lambda", "draw", "ratio", "coefficient", "within"});
  for (const auto& r : records)
    csv.row({format_double(r.gamma), format_double(r.lambda), std::to_string(r.draw), format_double(r.ratio),
             format_double(r.coefficient), r.within ? "1" : "0"});
  return csv.text();
}

// ------------------------------------------------------- gridworld actor-critic

PpoConfig make_ppo_config(const ExperimentConfig& cfg, const std::string& variant) {
  PpoConfig p;
  p.rollout_len = cfg.rollout_len;
  p.num_streams = cfg.num_streams;
  p.num_updates = cfg.num_updates;
  p.epochs = cfg.epochs;
  p.clip_eps = cfg.clip_eps;
  p.policy_lr = cfg.policy_lr;
  p.entropy_coef = cfg.entropy_coef;
  p.vf_coef = cfg.vf_coef;
  p.normalize_advantages = cfg.normalize_advantages;
  if (variant == "ppo") {
    p.schedule.gammas = {cfg.ac_gamma};
    p.schedule.ks = k_schedule(p.schedule.gammas);
    p.schedule.lambdas = {cfg.ac_lambda};
    p.schedule.alphas = {cfg.critic_alpha};
  } else if (variant == "ppo_td_delta" || variant == "ppo_td_delta_capped") {
    p.schedule = make_doubling_schedule(cfg.ac_gamma, cfg.critic_alpha, cfg.ac_lambda, variant == "ppo_td_delta_capped");
  } else {
    throw std::invalid_argument("unknown actor-critic variant '" + variant + "'");
  }
  p.validate();
  return p;
}

std::vector<AcRun> run_gridworld_ac(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  const TabularMdp<double> env = build_gridworld(cfg);
  std::vector<PpoConfig> configs;
  for (const auto& v : cfg.ac_variants) configs.push_back(make_ppo_config(cfg, v));
  const auto seeds = static_cast<std::size_t>(cfg.ac_seeds);
  std::vector<AcRun> runs(configs.size() * seeds);
  parallel_for(runs.size(), jobs, [&](std::size_t i) {
    const std::size_t v = i / seeds;
    const std::size_t s = i % seeds;
    AcRun& run = runs[i];
    run.variant = cfg.ac_variants[v];
    run.seed = static_cast<int>(s);
    run.curve = train_ppo_td_delta(env, configs[v], derive_seed(cfg.base_seed, s));
    std::tie(run.early_return, run.late_return) = early_late_returns(run.curve);
  });
  return runs;
}

std::string gridworld_ac_csv(const std::vector<AcRun>& runs) {
  std::size_t max_z = 0;
  for (const auto& run : runs)
    for (const auto& u : run.curve.updates) max_z = std::max(max_z, u.value_loss.size());
  std::vector<std::string> header{"variant", "seed", "update_index", "episode_return_mean", "episodes_finished",
                                  "policy_loss"};
  for (std::size_t z = 0; z < max_z; ++z) header.push_back("value_loss_" + std::to_string(z));
  CsvTable csv(header);
  for (const auto& run : runs) {
    for (const auto& u : run.curve.updates) {
      std::vector<std::string> row{run.variant, std::to_string(run.seed), std::to_string(u.update_index),
                                   format_double(u.episode_return_mean), std::to_string(u.episodes_finished),
                                   format_double(u.policy_loss)};
      for (std::size_t z = 0; z < max_z; ++z) row.push_back(z < u.value_loss.size() ? format_double(u.value_loss[z]) : "");
      csv.row(row);
    }
  }
  return csv.text();
}

std::string run_experiment_csv(const ExperimentConfig& cfg, int jobs) {
  if (cfg.kind == "ring-grid") return ring_grid_csv(run_ring_grid(cfg, jobs));
  if (cfg.kind == "phased-bounds") return phased_bounds_csv(run_phased_bounds(cfg, jobs));
  if (cfg.kind == "equivalence") return equivalence_csv(run_equivalence(cfg, jobs));
  if (cfg.kind == "contraction") return contraction_csv(run_contraction(cfg, jobs));
  if (cfg.kind == "gridworld-ac") return gridworld_ac_csv(run_gridworld_ac(cfg, jobs));
  throw std::invalid_argument("unknown experiment kind '" + cfg.kind + "'");
}

}  // namespace tddelta

#pragma once

#include "tddelta/actor_critic.hpp"
#include "tddelta/config.hpp"
#include "tddelta/phased.hpp"
#include "tddelta/stats.hpp"

#include <string>
#include <vector>

namespace tddelta {

/// FNV-1a over every field of every transition.
std::uint64_t trajectory_hash(std::span<const Transition<double>> traj);

struct RingRunRecord {
  std::string algo;  // "td" or "td_delta"
  double gamma = 0.0;
  double alpha = 0.0;
  int seed = 0;
  double mean_abs_error = 0.0;
  std::uint64_t trajectory_hash = 0;
};

struct RingGridResult {
  std::uint64_t config_hash = 0;
  std::vector<RingRunRecord> records;  // gamma, alpha, seed, then td before td_delta
};

/**
 * For every (gamma_Z, alpha, seed): k_Z-step TD at gamma_Z and multi-step
 * TD(Delta) on the configured ladder, both on the trajectory sampled for that
 * seed. The metric is the mean over all steps of the mean absolute error
 * against the value-iteration oracle at gamma_Z.
 */
RingGridResult run_ring_grid(const ExperimentConfig& cfg, int jobs);
std::string ring_grid_csv(const RingGridResult& result);

struct RingComparison {
  double gamma = 0.0;
  AggregateRow td;        // best alpha for the baseline
  AggregateRow td_delta;  // best alpha for TD(Delta)
  WelchResult welch;      // td_delta against td at their best alphas
  bool welch_defined = false;
};

/// Best-alpha (lowest mean) comparison per gamma_Z.
std::vector<RingComparison> compare_best_alpha(const RingGridResult& result);
std::string ring_comparison_csv(const std::vector<RingComparison>& rows);

struct PhasedBoundsRun {
  std::string algo;  // "td" or "td_delta"
  double gamma = 0.0;
  PhasedBoundResult result;
};

/// Bound verification on the ring for each gamma target; TD(Delta) uses the configured ladder and k = k_Z for epsilon.
std::vector<PhasedBoundsRun> run_phased_bounds(const ExperimentConfig& cfg, int jobs);
std::string phased_bounds_csv(const std::vector<PhasedBoundsRun>& runs);

struct EquivalenceTrace {
  std::string check;  // linear_lambda, equal_k_multistep, telescoping
  std::vector<double> values;
  double max() const;
};

/**
 * linear_lambda: max-norm of sum_z theta^z - theta^gamma after each linear
 * TD(lambda) step on the ring (one-hot features, parity lambdas, shared alpha).
 * equal_k_multistep: max-norm between recomposed TD(Delta) and k-step TD
 * tables after each step with k_z = k.
 * telescoping: |sum_z delta^z - delta^gamma| on random stacks and transitions.
 */
std::vector<EquivalenceTrace> run_equivalence(const ExperimentConfig& cfg, int jobs);
std::string equivalence_csv(const std::vector<EquivalenceTrace>& traces);

struct ContractionRecord {
  double gamma = 0.0;
  double lambda = 0.0;
  int draw = 0;
  double ratio = 0.0;
  double coefficient = 0.0;
  bool within = false;
};

/// Lambdas per gamma: 0, 0.5, 1 and three points inside (1, (1 + gamma) / (2 gamma)).
std::vector<double> contraction_lambdas(double gamma);
std::vector<ContractionRecord> run_contraction(const ExperimentConfig& cfg, int jobs);
std::string contraction_csv(const std::vector<ContractionRecord>& records);

struct AcRun {
  std::string variant;
  int seed = 0;
  TrainingCurve curve;
  double early_return = 0.0;
  double late_return = 0.0;
};

PpoConfig make_ppo_config(const ExperimentConfig& cfg, const std::string& variant);
std::vector<AcRun> run_gridworld_ac(const ExperimentConfig& cfg, int jobs);
std::string gridworld_ac_csv(const std::vector<AcRun>& runs);

/// Runs the experiment named by cfg.kind and returns its CSV.
std::string run_experiment_csv(const ExperimentConfig& cfg, int jobs);

}  // namespace tddelta

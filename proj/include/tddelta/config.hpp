#pragma once

#include "tddelta/mdp.hpp"
#include "tddelta/schedule.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tddelta {

/// Flat `key = value` text; `#` starts a comment, lists are comma-separated.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values_file(const std::string& path);

/// Every experiment knob with its default. See README for the key set.
struct ExperimentConfig {
  std::string kind;  // ring-grid | phased-bounds | equivalence | contraction | gridworld-ac

  // Discount ladder.
  std::vector<double> gamma_targets{0.75, 0.875, 0.9375};
  std::string schedule_mode = "doubling";  // doubling | explicit
  std::vector<double> gammas;              // explicit ladder, last entry is the target
  std::string k_mode = "tailored";         // tailored | uniform
  int uniform_k = 0;                       // 0 means k_Z of the tailored rule
  std::vector<double> alphas{0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125};
  std::string alpha_mode = "shared";       // shared | per_z
  std::vector<double> alpha_scales;        // per_z: alpha_z = alpha * scale_z
  std::string lambda_mode = "parity";      // parity | capped | explicit
  double lambda_top = 0.0;
  std::vector<double> lambdas;             // explicit lambda_z

  // Ring MDP and learning runs.
  int ring_states = 5;
  double advance_prob = 0.95;
  int num_steps = 5000;
  int num_seeds = 200;
  std::uint64_t base_seed = 0;

  // Phased bounds.
  int phased_n = 100;
  int num_phases = 20;
  int num_repeats = 1000;
  double bound_delta = 0.1;

  // Equivalence checks.
  double equivalence_gamma = 0.9375;
  double equivalence_lambda = 0.7;
  double equivalence_alpha = 0.1;
  int equivalence_k = 16;
  int equivalence_window = 16;
  int telescoping_draws = 10000;

  // Contraction grid.
  std::vector<double> contraction_gammas{0.5, 0.9, 0.99};
  int contraction_states = 10;
  int contraction_draws = 100;

  // Gridworld actor-critic.
  int grid_width = 5;
  int grid_height = 5;
  std::vector<RewardCell<double>> reward_cells;
  double step_reward = 0.0;
  int episode_len = 50;
  std::vector<std::string> ac_variants{"ppo", "ppo_td_delta_capped"};
  int ac_seeds = 10;
  double ac_gamma = 0.9375;
  double ac_lambda = 0.95;
  double critic_alpha = 0.5;
  int rollout_len = 128;
  int num_streams = 1;
  int num_updates = 200;
  int epochs = 4;
  double clip_eps = 0.1;
  double policy_lr = 0.5;
  double entropy_coef = 0.01;
  double vf_coef = 1.0;
  bool normalize_advantages = false;

  std::string out;

  void validate() const;
  /// Canonical `key = value` dump; equal configs give equal text.
  std::string canonical() const;
  std::uint64_t hash() const;
};

ExperimentConfig default_config(const std::string& kind);

/// Applies the keys over the defaults for `kind`; unknown keys and malformed values throw.
ExperimentConfig config_from_key_values(const std::string& kind, const KeyValues& kv);

/**
 * Ladder for one target: doubling or explicit gammas, tailored or uniform
 * horizons, learning rate alpha (shared or scaled per z) and lambdas per
 * lambda_mode.
 */
GammaSchedule<double> build_schedule(const ExperimentConfig& cfg, double gamma_target, double alpha);

/// Targets the experiment iterates over: the configured list, or the explicit ladder's last entry.
std::vector<double> effective_targets(const ExperimentConfig& cfg);

/// The gridworld described by the config; defaults to a dense 5x5 layout when no cells are given.
TabularMdp<double> build_gridworld(const ExperimentConfig& cfg);

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace tddelta

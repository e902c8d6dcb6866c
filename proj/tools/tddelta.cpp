#include "tddelta/experiments.hpp"
#include "tddelta/format.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output path " + path);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-timescale TD(Delta) experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string summary_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"ring-grid", "k-step TD vs multi-step TD(Delta) on the ring MDP over gamma, alpha and seed grids"},
      {"phased-bounds", "empirical violation frequency of the phased TD and TD(Delta) error bounds"},
      {"equivalence", "linear TD(lambda) equivalence, equal-k multi-step equivalence and TD-error telescoping"},
      {"contraction", "empirical Lipschitz ratio of the T_lambda operator on random MDPs"},
      {"gridworld-ac", "PPO and PPO-TD(lambda, Delta) learning curves on a gridworld"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--out", out_path, "CSV output path (default: config 'out' or stdout)");
    sub->add_option("--seed", seed, "base seed, overrides the config");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    if (name == "ring-grid")
      sub->add_option("--summary", summary_path, "best-alpha comparison CSV with Welch's t-test");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const std::string kind = app.get_subcommands().front()->get_name();
    const tddelta::KeyValues kv = config_path.empty() ? tddelta::KeyValues{} : tddelta::read_key_values_file(config_path);
    tddelta::ExperimentConfig cfg = tddelta::config_from_key_values(kind, kv);
    if (seed) cfg.base_seed = *seed;
    if (!out_path.empty()) cfg.out = out_path;

    if (kind == "ring-grid") {
      const tddelta::RingGridResult result = tddelta::run_ring_grid(cfg, jobs);
      write_text(cfg.out, tddelta::ring_grid_csv(result));
      if (!summary_path.empty()) write_text(summary_path, tddelta::ring_comparison_csv(tddelta::compare_best_alpha(result)));
    } else {
      write_text(cfg.out, tddelta::run_experiment_csv(cfg, jobs));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

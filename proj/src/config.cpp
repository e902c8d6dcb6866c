#include "tddelta/config.hpp"

#include "tddelta/format.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace tddelta {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("config: '" + key + "' expects a number, got '" + s + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& s) {
  Int v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("config: '" + key + "' expects an integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("config: '" + key + "' expects true or false, got '" + s + "'");
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v[i]);
  }
  return out;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += v[i];
  }
  return out;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field int_field(T ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*member = parse_int<T>(k, v); },
          [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(double ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*member = parse_double(k, v); },
          [member](const ExperimentConfig& c) { return format_double(c.*member); }};
}

Field doubles_field(std::vector<double> ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& k, const std::string& v) {
            std::vector<double> out;
            for (const auto& item : split_list(v)) out.push_back(parse_double(k, item));
            c.*member = std::move(out);
          },
          [member](const ExperimentConfig& c) { return join_doubles(c.*member); }};
}

Field string_field(std::string ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string&, const std::string& v) { c.*member = v; },
          [member](const ExperimentConfig& c) { return c.*member; }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    f["gamma_targets"] = doubles_field(&ExperimentConfig::gamma_targets);
    f["schedule_mode"] = string_field(&ExperimentConfig::schedule_mode);
    f["gammas"] = doubles_field(&ExperimentConfig::gammas);
    f["k_mode"] = string_field(&ExperimentConfig::k_mode);
    f["uniform_k"] = int_field(&ExperimentConfig::uniform_k);
    f["alphas"] = doubles_field(&ExperimentConfig::alphas);
    f["alpha_mode"] = string_field(&ExperimentConfig::alpha_mode);
    f["alpha_scales"] = doubles_field(&ExperimentConfig::alpha_scales);
    f["lambda_mode"] = string_field(&ExperimentConfig::lambda_mode);
    f["lambda_top"] = double_field(&ExperimentConfig::lambda_top);
    f["lambdas"] = doubles_field(&ExperimentConfig::lambdas);
    f["ring_states"] = int_field(&ExperimentConfig::ring_states);
    f["advance_prob"] = double_field(&ExperimentConfig::advance_prob);
    f["num_steps"] = int_field(&ExperimentConfig::num_steps);
    f["num_seeds"] = int_field(&ExperimentConfig::num_seeds);
    f["base_seed"] = int_field(&ExperimentConfig::base_seed);
    f["phased_n"] = int_field(&ExperimentConfig::phased_n);
    f["num_phases"] = int_field(&ExperimentConfig::num_phases);
    f["num_repeats"] = int_field(&ExperimentConfig::num_repeats);
    f["bound_delta"] = double_field(&ExperimentConfig::bound_delta);
    f["equivalence_gamma"] = double_field(&ExperimentConfig::equivalence_gamma);
    f["equivalence_lambda"] = double_field(&ExperimentConfig::equivalence_lambda);
    f["equivalence_alpha"] = double_field(&ExperimentConfig::equivalence_alpha);
    f["equivalence_k"] = int_field(&ExperimentConfig::equivalence_k);
    f["equivalence_window"] = int_field(&ExperimentConfig::equivalence_window);
    f["telescoping_draws"] = int_field(&ExperimentConfig::telescoping_draws);
    f["contraction_gammas"] = doubles_field(&ExperimentConfig::contraction_gammas);
    f["contraction_states"] = int_field(&ExperimentConfig::contraction_states);
    f["contraction_draws"] = int_field(&ExperimentConfig::contraction_draws);
    f["grid_width"] = int_field(&ExperimentConfig::grid_width);
    f["grid_height"] = int_field(&ExperimentConfig::grid_height);
    f["reward_cells"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                           c.reward_cells.clear();
                           for (const auto& item : split_list(v)) {
                             const auto a = item.find(':');
                             const auto b = a == std::string::npos ? a : item.find(':', a + 1);
                             if (b == std::string::npos)
                               throw std::invalid_argument("config: '" + k + "' entries are x:y:reward, got '" + item + "'");
                             c.reward_cells.push_back({parse_int<int>(k, trim(item.substr(0, a))),
                                                       parse_int<int>(k, trim(item.substr(a + 1, b - a - 1))),
                                                       parse_double(k, trim(item.substr(b + 1)))});
                           }
                         },
                         [](const ExperimentConfig& c) {
                           std::string out;
                           for (std::size_t i = 0; i < c.reward_cells.size(); ++i) {
                             const auto& cell = c.reward_cells[i];
                             if (i) out += ", ";
                             out += std::to_string(cell.x) + ":" + std::to_string(cell.y) + ":" + format_double(cell.reward);
                           }
                           return out;
                         }};
    f["step_reward"] = double_field(&ExperimentConfig::step_reward);
    f["episode_len"] = int_field(&ExperimentConfig::episode_len);
    f["ac_variants"] = {[](ExperimentConfig& c, const std::string&, const std::string& v) { c.ac_variants = split_list(v); },
                        [](const ExperimentConfig& c) { return join_strings(c.ac_variants); }};
    f["ac_seeds"] = int_field(&ExperimentConfig::ac_seeds);
    f["ac_gamma"] = double_field(&ExperimentConfig::ac_gamma);
    f["ac_lambda"] = double_field(&ExperimentConfig::ac_lambda);
    f["critic_alpha"] = double_field(&ExperimentConfig::critic_alpha);
    f["rollout_len"] = int_field(&ExperimentConfig::rollout_len);
    f["num_streams"] = int_field(&ExperimentConfig::num_streams);
    f["num_updates"] = int_field(&ExperimentConfig::num_updates);
    f["epochs"] = int_field(&ExperimentConfig::epochs);
    f["clip_eps"] = double_field(&ExperimentConfig::clip_eps);
    f["policy_lr"] = double_field(&ExperimentConfig::policy_lr);
    f["entropy_coef"] = double_field(&ExperimentConfig::entropy_coef);
    f["vf_coef"] = double_field(&ExperimentConfig::vf_coef);
    f["normalize_advantages"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                   c.normalize_advantages = parse_bool(k, v);
                                 },
                                 [](const ExperimentConfig& c) { return std::string(c.normalize_advantages ? "true" : "false"); }};
    f["out"] = string_field(&ExperimentConfig::out);
    return f;
  }();
  return table;
}

const std::vector<std::string>& kinds() {
  static const std::vector<std::string> k{"ring-grid", "phased-bounds", "equivalence", "contraction", "gridworld-ac"};
  return k;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("config: " + message);
}

bool is_probability(double g) { return g >= 0.0 && g < 1.0; }

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    if (kv.count(key)) throw std::invalid_argument("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_key_values(buffer.str());
}

ExperimentConfig default_config(const std::string& kind) {
  if (std::find(kinds().begin(), kinds().end(), kind) == kinds().end())
    throw std::invalid_argument("unknown experiment kind '" + kind + "'");
  ExperimentConfig cfg;
  cfg.kind = kind;
  if (kind == "phased-bounds") cfg.gamma_targets = {0.9375};
  if (kind == "gridworld-ac")
    cfg.reward_cells = {{4, 4, 1.0}, {2, 2, 0.3}, {4, 0, 0.2}, {0, 4, 0.2}, {1, 3, -0.5}, {3, 1, -0.5}};
  return cfg;
}

ExperimentConfig config_from_key_values(const std::string& kind, const KeyValues& kv) {
  ExperimentConfig cfg = default_config(kind);
  for (const auto& [key, value] : kv) {
    if (key == "kind") {
      require(value == kind, "kind '" + value + "' does not match subcommand '" + kind + "'");
      continue;
    }
    const auto it = fields().find(key);
    if (it == fields().end()) throw std::invalid_argument("config: unknown key '" + key + "'");
    it->second.set(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  require(std::find(kinds().begin(), kinds().end(), kind) != kinds().end(), "unknown kind '" + kind + "'");
  require(schedule_mode == "doubling" || schedule_mode == "explicit", "schedule_mode must be doubling or explicit");
  require(k_mode == "tailored" || k_mode == "uniform", "k_mode must be tailored or uniform");
  require(alpha_mode == "shared" || alpha_mode == "per_z", "alpha_mode must be shared or per_z");
  require(lambda_mode == "parity" || lambda_mode == "capped" || lambda_mode == "explicit",
          "lambda_mode must be parity, capped or explicit");
  if (schedule_mode == "doubling") {
    require(!gamma_targets.empty(), "gamma_targets must not be empty");
    for (double g : gamma_targets) require(is_probability(g), "gamma_targets must lie in [0, 1)");
  } else {
    require(!gammas.empty(), "explicit schedule needs gammas");
    for (std::size_t z = 0; z < gammas.size(); ++z) {
      require(is_probability(gammas[z]), "gammas must lie in [0, 1)");
      require(z == 0 || gammas[z] > gammas[z - 1], "gammas must be strictly ascending");
    }
  }
  require(uniform_k >= 0, "uniform_k must be nonnegative");
  require(!alphas.empty(), "alphas must not be empty");
  for (double a : alphas) require(a >= 0.0, "alphas must be nonnegative");
  for (double a : alpha_scales) require(a >= 0.0, "alpha_scales must be nonnegative");
  require(lambda_top >= 0.0, "lambda_top must be nonnegative");
  require(ring_states >= 3, "ring_states must be at least 3");
  require(advance_prob > 0.0 && advance_prob <= 1.0, "advance_prob must lie in (0, 1]");
  require(num_steps >= 1 && num_seeds >= 1, "num_steps and num_seeds must be positive");
  require(phased_n >= 1 && num_phases >= 1 && num_repeats >= 1, "phased_n, num_phases and num_repeats must be positive");
  require(bound_delta > 0.0 && bound_delta < 1.0, "bound_delta must lie in (0, 1)");
  require(is_probability(equivalence_gamma), "equivalence_gamma must lie in [0, 1)");
  require(equivalence_lambda >= 0.0 && equivalence_lambda * equivalence_gamma < 1.0,
          "equivalence_lambda must be nonnegative with lambda * gamma < 1");
  require(equivalence_alpha >= 0.0, "equivalence_alpha must be nonnegative");
  require(equivalence_k >= 1 && equivalence_window >= 1 && telescoping_draws >= 1,
          "equivalence_k, equivalence_window and telescoping_draws must be positive");
  require(!contraction_gammas.empty(), "contraction_gammas must not be empty");
  for (double g : contraction_gammas) require(g > 0.0 && g < 1.0, "contraction_gammas must lie in (0, 1)");
  require(contraction_states >= 1 && contraction_draws >= 1, "contraction_states and contraction_draws must be positive");
  require(grid_width >= 1 && grid_height >= 1 && episode_len >= 1, "grid sizes and episode_len must be positive");
  for (const auto& cell : reward_cells)
    require(cell.x >= 0 && cell.x < grid_width && cell.y >= 0 && cell.y < grid_height, "reward cell out of bounds");
  require(!ac_variants.empty(), "ac_variants must not be empty");
  for (const auto& v : ac_variants)
    require(v == "ppo" || v == "ppo_td_delta" || v == "ppo_td_delta_capped",
            "ac_variants entries must be ppo, ppo_td_delta or ppo_td_delta_capped");
  require(ac_seeds >= 1, "ac_seeds must be positive");
  require(ac_gamma > 0.0 && ac_gamma < 1.0, "ac_gamma must lie in (0, 1)");
  require(ac_lambda >= 0.0 && ac_lambda * ac_gamma < 1.0, "ac_lambda must be nonnegative with lambda * gamma < 1");
  require(critic_alpha >= 0.0, "critic_alpha must be nonnegative");
  require(rollout_len >= 1 && num_streams >= 1 && num_updates >= 1 && epochs >= 0,
          "rollout_len, num_streams and num_updates must be positive, epochs nonnegative");
  require(clip_eps > 0.0 && clip_eps < 1.0, "clip_eps must lie in (0, 1)");
  require(policy_lr >= 0.0 && entropy_coef >= 0.0 && vf_coef >= 0.0, "policy_lr, entropy_coef and vf_coef must be nonnegative");
}

std::string ExperimentConfig::canonical() const {
  std::string out = "kind = " + kind + "\n";
  for (const auto& [key, field] : fields()) {
    if (key == "out") continue;  // the output location does not change results
    out += key + " = " + field.get(*this) + "\n";
  }
  return out;
}

std::uint64_t ExperimentConfig::hash() const {
  const std::string text = canonical();
  return fnv1a(text.data(), text.size());
}

std::vector<double> effective_targets(const ExperimentConfig& cfg) {
  if (cfg.schedule_mode == "explicit") return {cfg.gammas.back()};
  return cfg.gamma_targets;
}

GammaSchedule<double> build_schedule(const ExperimentConfig& cfg, double gamma_target, double alpha) {
  GammaSchedule<double> s;
  s.gammas = cfg.schedule_mode == "explicit" ? cfg.gammas : doubling_gamma_schedule(gamma_target);
  const std::size_t n = s.gammas.size();
  s.ks = k_schedule(s.gammas);
  if (cfg.k_mode == "uniform") s.ks.assign(n, cfg.uniform_k > 0 ? cfg.uniform_k : s.ks.back());
  if (cfg.alpha_mode == "per_z") {
    require(cfg.alpha_scales.size() == n, "alpha_scales must have one entry per timescale");
    for (double scale : cfg.alpha_scales) s.alphas.push_back(alpha * scale);
  } else {
    s.alphas.assign(n, alpha);
  }
  if (cfg.lambda_mode == "explicit") {
    require(cfg.lambdas.size() == n, "lambdas must have one entry per timescale");
    s.lambdas = cfg.lambdas;
  } else {
    s.lambdas = parity_lambda_schedule(s.gammas, s.gammas.back(), cfg.lambda_top, cfg.lambda_mode == "capped");
  }
  s.validate();
  return s;
}

TabularMdp<double> build_gridworld(const ExperimentConfig& cfg) {
  return make_gridworld<double>(cfg.grid_width, cfg.grid_height, cfg.reward_cells, cfg.step_reward, cfg.episode_len);
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tddelta

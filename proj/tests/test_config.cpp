#include <doctest.h>

#include "tddelta/config.hpp"

using namespace tddelta;

TEST_SUITE("config") {

TEST_CASE("key value parsing") {
  const auto kv = parse_key_values("# comment\n gamma_targets = 0.5, 0.75 \n\nnum_seeds=3 # trailing\n");
  CHECK(kv.size() == 2);
  CHECK(kv.at("gamma_targets") == "0.5, 0.75");
  CHECK(kv.at("num_seeds") == "3");
  CHECK_THROWS_AS(parse_key_values("just a line"), std::invalid_argument);
  CHECK_THROWS_AS(parse_key_values("a = 1\na = 2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_key_values(" = 2"), std::invalid_argument);
}

TEST_CASE("config from keys") {
  const auto cfg = config_from_key_values(
      "ring-grid", parse_key_values("gamma_targets = 0.5, 0.75\nalphas = 0.1\nnum_seeds = 4\nbase_seed = 9"));
  CHECK(cfg.gamma_targets == std::vector<double>{0.5, 0.75});
  CHECK(cfg.alphas == std::vector<double>{0.1});
  CHECK(cfg.num_seeds == 4);
  CHECK(cfg.base_seed == 9);
  CHECK_THROWS_AS(config_from_key_values("ring-grid", parse_key_values("bogus = 1")), std::invalid_argument);
  CHECK_THROWS_AS(config_from_key_values("ring-grid", parse_key_values("num_seeds = many")), std::invalid_argument);
  CHECK_THROWS_AS(config_from_key_values("ring-grid", parse_key_values("num_seeds = 0")), std::invalid_argument);
  CHECK_THROWS_AS(config_from_key_values("ring-grid", parse_key_values("kind = contraction")), std::invalid_argument);
  CHECK_THROWS_AS(config_from_key_values("nope", {}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_key_values("ring-grid", parse_key_values("gamma_targets = 1.0")), std::invalid_argument);
}

TEST_CASE("reward cells and booleans") {
  const auto cfg = config_from_key_values(
      "gridworld-ac", parse_key_values("reward_cells = 1:2:0.5, 0:0:-1\nnormalize_advantages = true"));
  REQUIRE(cfg.reward_cells.size() == 2);
  CHECK(cfg.reward_cells[0].x == 1);
  CHECK(cfg.reward_cells[0].y == 2);
  CHECK(cfg.reward_cells[0].reward == 0.5);
  CHECK(cfg.reward_cells[1].reward == -1.0);
  CHECK(cfg.normalize_advantages);
  CHECK_THROWS_AS(config_from_key_values("gridworld-ac", parse_key_values("reward_cells = 9:9:1")), std::invalid_argument);
  CHECK_THROWS_AS(config_from_key_values("gridworld-ac", parse_key_values("reward_cells = 1:2")), std::invalid_argument);
}

TEST_CASE("canonical text and hash") {
  const auto a = config_from_key_values("ring-grid", parse_key_values("num_seeds = 4"));
  const auto b = config_from_key_values("ring-grid", parse_key_values("num_seeds = 4\nout = x.csv"));
  const auto c = config_from_key_values("ring-grid", parse_key_values("num_seeds = 5"));
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  const auto round = config_from_key_values("ring-grid", [&] {
    auto kv = parse_key_values(a.canonical());
    kv.erase("kind");
    return kv;
  }());
  CHECK(round.canonical() == a.canonical());
}

TEST_CASE("schedule modes") {
  auto cfg = default_config("ring-grid");
  auto s = build_schedule(cfg, 0.9375, 0.1);
  CHECK(s.gammas == std::vector<double>{0, 0.5, 0.75, 0.875, 0.9375});
  CHECK(s.ks == std::vector<int>{1, 2, 4, 8, 16});
  CHECK(s.alphas == std::vector<double>(5, 0.1));

  cfg.k_mode = "uniform";
  CHECK(build_schedule(cfg, 0.9375, 0.1).ks == std::vector<int>(5, 16));
  cfg.uniform_k = 4;
  CHECK(build_schedule(cfg, 0.9375, 0.1).ks == std::vector<int>(5, 4));

  cfg = default_config("ring-grid");
  cfg.alpha_mode = "per_z";
  cfg.alpha_scales = {4, 2, 1, 1, 1};
  CHECK(build_schedule(cfg, 0.9375, 0.1).alphas == std::vector<double>{0.4, 0.2, 0.1, 0.1, 0.1});
  cfg.alpha_scales = {1};
  CHECK_THROWS_AS(build_schedule(cfg, 0.9375, 0.1), std::invalid_argument);

  cfg = default_config("ring-grid");
  cfg.schedule_mode = "explicit";
  cfg.gammas = {0.0, 0.9};
  CHECK(effective_targets(cfg) == std::vector<double>{0.9});
  CHECK(build_schedule(cfg, 0.9, 0.1).ks == std::vector<int>{1, 10});

  cfg = default_config("ring-grid");
  cfg.lambda_mode = "capped";
  cfg.lambda_top = 0.95;
  const auto capped = build_schedule(cfg, 0.9375, 0.1);
  for (double l : capped.lambdas) CHECK(l <= 1.0);
  cfg.lambda_mode = "explicit";
  cfg.lambdas = {0, 0.1, 0.2, 0.3, 0.4};
  CHECK(build_schedule(cfg, 0.9375, 0.1).lambdas == cfg.lambdas);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("", 0) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a", 1) == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar", 6) == 0x85944171f73967e8ULL);
}

}  // TEST_SUITE

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "costroute/costroute.h"

namespace {

const std::string kPoolPath = std::string(CR_SOURCE_DIR) + "/configs/pool9.json";

std::filesystem::path scratch(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("costroute-capi-" + std::to_string(::getpid()) + "-" + name);
}

struct PoolHandle {
  cr_pool* p = nullptr;
  ~PoolHandle() { cr_pool_free(p); }
};

}  // namespace

TEST_CASE("version and log level") {
  CHECK(std::string(cr_version()).size() > 0);
  CHECK(cr_set_log_level(4) == CR_OK);
  CHECK(cr_set_log_level(7) == CR_ERR_INVALID_ARGUMENT);
}

TEST_CASE("pool loading, names, costs and tiers") {
  PoolHandle h;
  REQUIRE(cr_pool_load_file(kPoolPath.c_str(), &h.p) == CR_OK);
  size_t n = 0;
  REQUIRE(cr_pool_size(h.p, &n) == CR_OK);
  CHECK(n == 9);
  const char* name = nullptr;
  REQUIRE(cr_pool_model_name(h.p, 8, &name) == CR_OK);
  CHECK(std::string(name) == "gpt-4o");
  CHECK(cr_pool_model_name(h.p, 9, &name) == CR_ERR_INVALID_ARGUMENT);
  CHECK(std::string(cr_last_error_kind()) == "InvalidModel");

  int64_t mc = -1;
  REQUIRE(cr_pool_usage_cost(h.p, 8, 1000, 1000, &mc) == CR_OK);
  CHECK(mc == 1250);
  REQUIRE(cr_pool_usage_cost(h.p, 2, 5000, 5000, &mc) == CR_OK);
  CHECK(mc == 0);
  CHECK(cr_pool_usage_cost(h.p, 8, -1, 0, &mc) == CR_ERR_INVALID_ARGUMENT);

  std::vector<int> tiers(9, -1);
  REQUIRE(cr_pool_partition(h.p, tiers.data(), tiers.size()) == CR_OK);
  CHECK(tiers == std::vector<int>{0, 0, 0, 1, 1, 1, 2, 2, 2});
  CHECK(cr_pool_partition(h.p, tiers.data(), 3) == CR_ERR_INVALID_ARGUMENT);
}

TEST_CASE("pool load errors report their kind") {
  cr_pool* p = nullptr;
  CHECK(cr_pool_load("{not json", &p) == CR_ERR_PARSE);
  CHECK(p == nullptr);
  CHECK(std::string(cr_last_error()).size() > 0);
  CHECK(cr_pool_load(R"([{"name": "a", "deployment": "local", "price_in_cents_per_1k": 0, "price_out_cents_per_1k": 0},
                          {"name": "a", "deployment": "local", "price_in_cents_per_1k": 0, "price_out_cents_per_1k": 0}])",
                     &p) == CR_ERR_CONFIG);
  CHECK(std::string(cr_last_error_kind()) == "DuplicateName");
  CHECK(cr_pool_load_file("/nonexistent/pool.json", &p) == CR_ERR_IO);
  CHECK(cr_pool_load(nullptr, &p) == CR_ERR_NULL_PTR);
  CHECK(std::string(cr_last_error_kind()) == "NullPointer");
  CHECK(cr_pool_size(nullptr, nullptr) == CR_ERR_NULL_PTR);
  cr_pool_free(nullptr);
}

TEST_CASE("numeric helpers") {
  const double rewards[] = {1, 0, 1, 0};
  double adv[4];
  REQUIRE(cr_group_advantages(rewards, 4, adv) == CR_OK);
  CHECK(adv[0] == doctest::Approx(1.0));
  CHECK(adv[1] == doctest::Approx(-1.0));
  CHECK(cr_group_advantages(rewards, 1, adv) == CR_ERR_NUMERIC);

  double obj = 0;
  REQUIRE(cr_clipped_step_objective(1.5, 1.0, 0.2, &obj) == CR_OK);
  CHECK(obj == doctest::Approx(1.2));
  REQUIRE(cr_clipped_step_objective(1.5, -1.0, 0.2, &obj) == CR_OK);
  CHECK(obj == doctest::Approx(-1.5));
  CHECK(cr_clipped_step_objective(0.0, 1.0, 0.2, &obj) == CR_ERR_NUMERIC);

  const double p[] = {0.5, 0.5};
  const double r[] = {0.25, 0.75};
  double kl = 0;
  REQUIRE(cr_kl_penalty(p, r, 2, &kl) == CR_OK);
  const double expected = 0.5 * std::log(0.5 / 0.25) + 0.5 * std::log(0.5 / 0.75);
  CHECK(kl == doctest::Approx(expected));

  const double v[] = {0.9, 0.1, 0.5, 0.7};
  double q = 0;
  REQUIRE(cr_nearest_rank_quantile(v, 4, 0.5, &q) == CR_OK);
  CHECK(q == 0.5);
  CHECK(cr_nearest_rank_quantile(v, 0, 0.5, &q) == CR_ERR_NUMERIC);
  CHECK(cr_nearest_rank_quantile(v, 4, 1.5, &q) == CR_ERR_CONFIG);

  int b = -1;
  REQUIRE(cr_bucket_difficulty(0.8, 0.75, 0.45, &b) == CR_OK);
  CHECK(b == 0);
  REQUIRE(cr_bucket_difficulty(0.45, 0.75, 0.45, &b) == CR_OK);
  CHECK(b == 2);
  CHECK(cr_bucket_difficulty(0.5, 0.3, 0.6, &b) == CR_ERR_CONFIG);

  const int pred[] = {2, 4};
  const int lab[] = {3, 4};
  double mae = 0;
  REQUIRE(cr_mean_absolute_error(pred, lab, 2, &mae) == CR_OK);
  CHECK(mae == 0.5);
  CHECK(cr_mean_absolute_error(pred, lab, 0, &mae) == CR_ERR_DOMAIN);
  CHECK(cr_mean_absolute_error(nullptr, lab, 2, &mae) == CR_ERR_NULL_PTR);
}

TEST_CASE("policy checkpoints") {
  const auto path = scratch("policy.txt");
  {
    std::ofstream f(path);
    f << R"({"action_space": "allocator", "actions": 2, "feature_dim": 7})" << "\n";
    f << "0 0 0 0 0 0 0\n";
    f << "1 0 0 0 0 0 0\n";
  }
  cr_policy* pol = nullptr;
  REQUIRE(cr_policy_load(path.c_str(), &pol) == CR_OK);
  size_t actions = 0;
  REQUIRE(cr_policy_actions(pol, &actions) == CR_OK);
  CHECK(actions == 2);
  const double x[CR_FEATURE_DIM] = {2.0, 0, 0, 0, 0, 0, 1};
  double probs[2];
  REQUIRE(cr_policy_probs(pol, x, probs, 2) == CR_OK);
  CHECK(probs[1] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  CHECK(probs[0] + probs[1] == doctest::Approx(1.0));
  CHECK(cr_policy_probs(pol, x, probs, 3) == CR_ERR_NUMERIC);
  cr_policy_free(pol);

  {
    std::ofstream f(path);
    f << R"({"action_space": "allocator", "actions": 2, "feature_dim": 7})" << "\n0 0 0\n";
  }
  pol = nullptr;
  CHECK(cr_policy_load(path.c_str(), &pol) == CR_ERR_PARSE);
  CHECK(pol == nullptr);
  std::filesystem::remove(path);
}

TEST_CASE("run_command writes outputs and returns a summary") {
  const auto out = scratch("tasks.jsonl");
  const std::string opts = nlohmann::json{{"out", out.string()}, {"n", 5}, {"seed", 3}}.dump();
  char* summary = nullptr;
  REQUIRE(cr_run_command("sim-gen", opts.c_str(), &summary) == CR_OK);
  REQUIRE(summary != nullptr);
  const auto s = nlohmann::json::parse(summary);
  cr_string_free(summary);
  CHECK(s["status"] == "ok");
  CHECK(s["n_tasks"] == 5);
  std::ifstream f(out);
  int lines = 0;
  for (std::string line; std::getline(f, line);) ++lines;
  CHECK(lines == 5);
  std::filesystem::remove(out);

  summary = nullptr;
  CHECK(cr_run_command("sim-gen", R"({"n": 5})", &summary) == CR_ERR_USAGE);
  CHECK(cr_run_command("sim-gen", R"({"bogus": 1})", &summary) == CR_ERR_USAGE);
  CHECK(cr_run_command("nope", "{}", &summary) == CR_ERR_USAGE);
  CHECK(cr_run_command("sim-gen", "{bad", &summary) == CR_ERR_USAGE);
  CHECK(cr_run_command(nullptr, "{}", &summary) == CR_ERR_NULL_PTR);
  cr_string_free(summary);
}

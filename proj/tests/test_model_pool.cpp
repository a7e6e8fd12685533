#include <doctest.h>

#include "costroute/error.hpp"
#include "costroute/model_pool.hpp"
#include "support.hpp"

using namespace costroute;

namespace {

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Usage;
}

std::string pool_json(int n) {
  std::string s = R"({"models": [)";
  for (int i = 0; i < n; ++i) {
    if (i) s += ",";
    s += R"({"name": "m)" + std::to_string(i) + R"(", "deployment": "local"})";
  }
  return s + "]}";
}

}  // namespace

TEST_CASE("nine-model pool loads in capability order") {
  const auto& pool = crtest::pool9();
  REQUIRE(pool.size() == 9);
  CHECK(pool.eval_model_id() == 3);
  CHECK(pool.at(0).name == "Qwen2.5-0.5B-Instruct");
  CHECK(pool.at(8).name == "gpt-4o");
  CHECK(pool.local_models().size() == 4);
  CHECK(pool.cloud_models().size() == 5);
  CHECK(pool.at(8).price_in_mc == 250);
  CHECK(pool.at(8).price_out_mc == 1000);
  CHECK(pool.at(4).price_in_cents() == doctest::Approx(0.01));
  CHECK(pool.at(7).api_key_env == "DEEPSEEK_API_KEY");
  for (int i = 0; i < 9; ++i) {
    CHECK(pool.at(i).id == i);
    CHECK(pool.at(i).capability_rank == i);
  }
}

TEST_CASE("partition of nine models is three by three") {
  const auto g = partition_groups(crtest::pool9());
  CHECK(g.slm_group.size() == 3);
  CHECK(g.mlm_group.size() == 3);
  CHECK(g.llm_group.size() == 3);
  CHECK(g.min_id(Tier::Small) == 0);
  CHECK(g.max_id(Tier::Medium) == 5);
  CHECK(g.min_id(Tier::Large) == 6);
  CHECK(g.tier_of(5) == Tier::Medium);
  CHECK(medium_model(g.llm_group).id == 7);
}

TEST_CASE("partition sizes follow the remainder rule") {
  struct Case {
    int n;
    std::size_t s, m, l;
  };
  for (const auto& c : {Case{3, 1, 1, 1}, Case{4, 2, 1, 1}, Case{5, 2, 2, 1}, Case{10, 4, 3, 3}}) {
    const auto pool = load_pool(pool_json(c.n));
    const auto g = partition_groups(pool);
    CHECK(g.slm_group.size() == c.s);
    CHECK(g.mlm_group.size() == c.m);
    CHECK(g.llm_group.size() == c.l);
  }
  CHECK(error_of([] { partition_groups(load_pool(pool_json(2))); }) == Errc::PoolTooSmall);
}

TEST_CASE("medium model is the lower median") {
  const auto pool = load_pool(pool_json(4));
  CHECK(medium_model(std::span(pool.models()).subspan(0, 2)).id == 0);
  CHECK(medium_model(std::span(pool.models()).subspan(0, 3)).id == 1);
  CHECK(medium_model(pool.models()).id == 1);
  CHECK(error_of([] { medium_model(std::span<const ModelSpec>{}); }) == Errc::EmptyGroup);
}

TEST_CASE("usage cost is exact in milli-cents") {
  const auto& pool = crtest::pool9();
  CHECK(usage_cost({1000, 1000}, pool.at(8)).millicents == 1250);
  CHECK(usage_cost({300, 120}, pool.at(8)).millicents == 195);
  CHECK(usage_cost({123, 45}, pool.at(4)).millicents == 3);
  CHECK(usage_cost({100000, 0}, pool.at(0)).millicents == 0);
  CHECK(usage_cost({1, 0}, pool.at(4)).millicents == 0);
  CHECK(usage_cost({50, 0}, pool.at(4)).millicents == 1);
  CHECK(usage_cost({49, 0}, pool.at(4)).millicents == 0);
}

TEST_CASE("usage cost matches a hand computation over many calls") {
  const auto& pool = crtest::pool9();
  for (int id = 0; id < 9; ++id) {
    const auto& m = pool.at(id);
    for (std::int64_t in = 0; in < 600; in += 37) {
      for (std::int64_t out = 0; out < 300; out += 29) {
        const std::int64_t num = m.price_in_mc * in + m.price_out_mc * out;
        const std::int64_t expect = num / 1000 + (num % 1000 >= 500 ? 1 : 0);
        CHECK(usage_cost({in, out}, m).millicents == expect);
      }
    }
  }
}

TEST_CASE("pool validation errors") {
  CHECK(error_of([] {
          load_pool(R"({"models": [{"name": "a", "deployment": "local"}, {"name": "a", "deployment": "local"}]})");
        }) == Errc::DuplicateName);
  CHECK(error_of([] {
          load_pool(R"({"models": [{"name": "a", "deployment": "cloud", "price_in_cents_per_1k": -1}]})");
        }) == Errc::NegativePrice);
  CHECK(error_of([] {
          load_pool(R"({"models": [{"name": "a", "deployment": "local", "price_out_cents_per_1k": 0.5}]})");
        }) == Errc::LocalWithNonzeroPrice);
  CHECK(error_of([] {
          load_pool(R"({"models": [{"name": "a", "deployment": "cloud", "price_in_cents_per_1k": 0.0001}]})");
        }) == Errc::InvalidPrice);
  CHECK(error_of([] { load_pool(R"({"models": [{"name": "a", "deployment": "moon"}]})"); }) == Errc::Parse);
  CHECK(error_of([] { load_pool("not json"); }) == Errc::Parse);
  CHECK(error_of([] { load_pool(R"({"models": []})"); }) == Errc::Parse);
  CHECK(error_of([] {
          load_pool(R"({"eval_model_id": 5, "models": [{"name": "a", "deployment": "local"}]})");
        }) == Errc::InvalidModel);
  CHECK(error_of([] { crtest::pool9().at(9); }) == Errc::InvalidModel);
  CHECK(error_of([] { load_pool_file("/nonexistent/pool.json"); }) == Errc::Io);
}

TEST_CASE("bare list form and default eval model") {
  const auto pool = load_pool(R"([{"name": "a", "deployment": "local"}, {"name": "b", "deployment": "local"}])");
  CHECK(pool.size() == 2);
  CHECK(pool.eval_model_id() == 1);
}

TEST_CASE("cost arithmetic") {
  Cost a{5};
  a += Cost{7};
  CHECK(a.millicents == 12);
  CHECK((a + Cost{3}).millicents == 15);
  CHECK(Cost{1500}.cents() == doctest::Approx(1.5));
  CHECK(Cost{1} < Cost{2});
}

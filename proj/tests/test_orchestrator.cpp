#include <doctest.h>

#include "costroute/error.hpp"
#include "costroute/orchestrator.hpp"
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

class FlakyExecutor final : public SubtaskExecutor {
 public:
  explicit FlakyExecutor(const SubtaskExecutor& inner) : inner_(&inner) {}
  StepResult execute(const StepRequest& r) const override {
    if (r.subtask->index == 1) fail(Errc::ExecutorFailure, "down");
    return inner_->execute(r);
  }
  ReviewResult review(const StepRequest&, std::string_view, int) const override {
    fail(Errc::StrongModelFailure, "strong model down");
  }

 private:
  const SubtaskExecutor* inner_;
};

RoutingTrace labeled_trace(const std::string& id, std::vector<int> assignments) {
  RoutingTrace t;
  t.task_id = id;
  t.scheme.assignments = std::move(assignments);
  return t;
}

}  // namespace

TEST_CASE("MAE fixtures") {
  CHECK(mean_absolute_error(std::vector<int>{2, 4}, std::vector<int>{3, 4}) == 0.5);
  CHECK(mean_absolute_error(std::vector<int>{0, 8}, std::vector<int>{8, 0}) == 8.0);
  CHECK(mean_absolute_error(std::vector<int>{5}, std::vector<int>{5}) == 0.0);
  CHECK(error_of([] { mean_absolute_error(std::vector<int>{1}, std::vector<int>{1, 2}); }) == Errc::LabelMismatch);
  CHECK(error_of([] { mean_absolute_error(std::vector<int>{}, std::vector<int>{}); }) == Errc::LabelMismatch);
}

TEST_CASE("metrics aggregate traces") {
  std::vector<RoutingTrace> traces = {labeled_trace("a", {2, 4}), labeled_trace("b", {0, 8}), labeled_trace("c", {1})};
  traces[0].acc = true;
  traces[0].cost = Cost{1500};
  traces[0].prm_cost = Cost{500};
  traces[0].latency_ms = 30;
  traces[1].cost = Cost{1};
  traces[1].baseline_acc = true;
  traces[2].baseline_acc = false;
  traces[2].decomposition.score = 4.0;
  LabelMap labels = {{"a", {3, 4}}, {"b", {8, 0}}};
  const auto m = compute_metrics(traces, &labels);
  CHECK(m.n_tasks == 3);
  CHECK(m.acc == doctest::Approx(1.0 / 3.0));
  CHECK(m.c_api_cents == doctest::Approx(1.501 / 3.0));
  CHECK(m.prm_cost_cents == doctest::Approx(0.5 / 3.0));
  CHECK(m.mean_latency_ms == doctest::Approx(10.0));
  CHECK(m.n_labeled_subtasks == 4);
  CHECK(*m.mae == doctest::Approx((1.0 + 0 + 8 + 8) / 4.0));
  CHECK(*m.c_d == doctest::Approx(0.5));
  CHECK(*m.mean_score == doctest::Approx(4.0));
  const auto j = to_json(m);
  CHECK(j["n_tasks"] == 3);

  const auto bare = compute_metrics(traces);
  CHECK_FALSE(bare.mae.has_value());
  CHECK(to_json(bare)["mae"].is_null());

  LabelMap wrong = {{"c", {1, 2}}};
  CHECK(error_of([&] { compute_metrics(traces, &wrong); }) == Errc::LabelMismatch);
  CHECK(error_of([] { compute_metrics(std::vector<RoutingTrace>{}); }) == Errc::EmptyTraces);
}

TEST_CASE("decode action") {
  const std::vector<double> p = {0.1, 0.5, 0.15, 0.25};
  CHECK(decode_action(p, 0.0) == 1);
  CHECK(decode_action(p, 0.5) == 1);
  CHECK(decode_action(p, 0.7) == 2);
  CHECK(decode_action(p, 0.8) == 3);
  CHECK(decode_action(p, 0.05) == 0);
  CHECK(error_of([] { decode_action(std::vector<double>{}, 0.5); }) == Errc::InvalidArgument);
}

TEST_CASE("chain execution ledger equals the sum of per-call costs") {
  const auto tasks = gen_tasks(8, 60, 1, 3, DifficultyDist::uniform());
  crtest::SimSetup sim(tasks);
  for (bool prm : {false, true}) {
    const auto ctx = sim.ctx(prm);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const auto d = sim.generator->candidate(sim.records[i], i % 4);
      std::vector<int> scheme;
      for (std::size_t j = 0; j < d.k(); ++j) scheme.push_back(static_cast<int>((i + j) % 9));
      const auto trace = execute_chain(sim.records[i], d, scheme, ctx);
      std::int64_t sum = 0;
      std::int64_t prm_sum = 0;
      for (const auto& s : trace.steps) {
        CHECK(s.cost.millicents == usage_cost(s.usage, sim.world->pool().at(s.model_id)).millicents);
        CHECK(s.prm_cost.millicents == usage_cost(s.prm_usage, sim.world->pool().at(8)).millicents);
        sum += s.cost.millicents + s.prm_cost.millicents;
        prm_sum += s.prm_cost.millicents;
      }
      CHECK(trace.cost.millicents == sum);
      CHECK(trace.prm_cost.millicents == prm_sum);
      CHECK(trace.scheme.cost == trace.cost);
      const auto row = to_json(trace);
      CHECK(row["cost_millicents"] == sum);
    }
  }
}

TEST_CASE("chain execution errors and failure handling") {
  crtest::SimSetup sim({crtest::sim_task("a", {0.1, 0.1, 0.1})});
  const auto& task = sim.records[0];
  const auto d = sim.generator->candidate(task, 0);
  const auto ctx = sim.ctx();
  CHECK(error_of([&] { execute_chain(task, d, std::vector<int>{1, 1}, ctx); }) == Errc::InvalidArgument);
  CHECK(error_of([&] { execute_chain(task, d, std::vector<int>{1, 1, 9}, ctx); }) == Errc::InvalidModel);
  ExecutionContext incomplete = ctx;
  incomplete.checker = nullptr;
  CHECK(error_of([&] { execute_chain(task, d, std::vector<int>{1, 1, 1}, incomplete); }) == Errc::InvalidArgument);

  FlakyExecutor flaky(*sim.executor);
  ExecutionContext fctx = ctx;
  fctx.executor = &flaky;
  const auto trace = execute_chain(task, d, std::vector<int>{1, 1, 1}, fctx);
  CHECK_FALSE(trace.acc);
  CHECK(trace.first_failed_step == 1);
  CHECK(trace.steps[1].failed);
  CHECK(trace.steps[1].final_result == std::string(kStepFailedMarker));
  CHECK(trace.steps[2].raw_result == "a/2:wrong");
}

TEST_CASE("PRM corrects weak-model steps and skips strong ones") {
  crtest::SimSetup sim({crtest::sim_task("a", {0.3, 0.9})});
  const auto& task = sim.records[0];
  const auto d = sim.generator->candidate(task, 0);
  const std::vector<int> scheme = {0, 7};
  const auto off = execute_chain(task, d, scheme, sim.ctx(false));
  CHECK_FALSE(off.acc);
  CHECK(off.first_failed_step == 0);
  const auto on = execute_chain(task, d, scheme, sim.ctx(true));
  CHECK(on.steps[0].prm_applied);
  CHECK(on.steps[0].prm_corrected);
  CHECK_FALSE(on.steps[1].prm_applied);
  CHECK_FALSE(on.acc);
  CHECK(on.first_failed_step == 1);
  CHECK(on.prm_cost.millicents > 0);

  const auto fixed = execute_chain(task, d, std::vector<int>{0, 8}, sim.ctx(true));
  CHECK(fixed.acc);

  FlakyExecutor flaky(*sim.executor);
  ExecutionContext fctx = sim.ctx(true);
  fctx.executor = &flaky;
  auto single = sim.generator->candidate(task, 0);
  single.subtasks.pop_back();
  const auto warned = execute_chain(task, single, std::vector<int>{0}, fctx);
  CHECK(warned.steps[0].prm_warning);
  CHECK(warned.steps[0].prm_cost.millicents == 0);

  PrmConfig bad{true, 2, 6};
  CHECK(error_of([&] { bad.validate(sim.world->pool()); }) == Errc::InvalidConfig);
  PrmConfig out{true, 9, 6};
  CHECK(error_of([&] { out.validate(sim.world->pool()); }) == Errc::InvalidModel);
}

TEST_CASE("allocators") {
  const auto tasks = gen_tasks(12, 20, 1, 3, DifficultyDist::uniform());
  crtest::SimSetup sim(tasks);
  const auto ctx = sim.ctx();
  const auto d = sim.generator->candidate(sim.records[0], 0);
  CHECK(FixedAllocator(8).allocate(sim.records[0], d) == std::vector<int>(d.k(), 8));

  SearchAllocator search(*sim.probs, sim.grouped, ctx, DifficultyConfig{});
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto di = sim.generator->candidate(sim.records[i], 0);
    const auto best = brute_force_optimal(tasks[i], sim.world->pool(), sim.world->behavior());
    CHECK(search.allocate(sim.records[i], di) == best.assignments);
  }

  auto policy = PolicyParams::zeros({ActionKind::Allocator, 9});
  policy.at(6, 6) = 5.0;
  PolicyAllocator pa(policy, *sim.probs, DifficultyConfig{});
  CHECK(pa.allocate(sim.records[0], d) == std::vector<int>(d.k(), 6));
  PolicyAllocator conservative(policy, *sim.probs, DifficultyConfig{}, 0.999);
  for (int m : conservative.allocate(sim.records[0], d)) CHECK(m >= 6);
  const auto wrong = PolicyParams::zeros({ActionKind::Decomposer, 9});
  CHECK(error_of([&] { PolicyAllocator(wrong, *sim.probs, DifficultyConfig{}); }) == Errc::ShapeMismatch);
  CHECK(error_of([&] { PolicyAllocator(policy, *sim.probs, DifficultyConfig{}, 1.0); }) == Errc::InvalidConfig);

  const auto feats = allocation_features(sim.records[0], d, *sim.probs, DifficultyConfig{});
  REQUIRE(feats.size() == d.k());
  CHECK(feats[0][6] == 1.0);
  CHECK(feats[0][0] == doctest::Approx(1.0 - tasks[0].difficulties[0]).epsilon(0.06));
}

TEST_CASE("decomposers") {
  crtest::SimSetup sim({crtest::sim_task("a", {0.1, 0.2, 0.3}), crtest::sim_task("b", {0.4})});
  const auto& ta = sim.records[0];
  CHECK(SlotDecomposer(*sim.generator, 2).decompose(ta).k() == 6);

  auto dp = PolicyParams::zeros({ActionKind::Decomposer, 4});
  dp.at(1, 6) = 3.0;
  CHECK(PolicyDecomposer(*sim.generator, dp).decompose(ta).k() == 2);
  CHECK(error_of([&] { PolicyDecomposer(*sim.generator, PolicyParams::zeros({ActionKind::Allocator, 4})); }) ==
        Errc::ShapeMismatch);

  const auto coarse = sim.generator->candidate(ta, 1);
  DatasetDecomposer ds({{"a", coarse.texts()}}, sim.generator.get(), 4);
  const auto got = ds.decompose(ta);
  CHECK(got.texts() == coarse.texts());
  CHECK(got.subtasks[0].sim.has_value());
  CHECK(ds.decompose(sim.records[1]).texts() == sim.generator->candidate(sim.records[1], 0).texts());

  DatasetDecomposer plain({{"a", {"x", "y"}}}, nullptr, 4);
  CHECK(plain.decompose(ta).texts() == std::vector<std::string>{"x", "y"});
  CHECK(error_of([&] { plain.decompose(sim.records[1]); }) == Errc::GeneratorFailure);
}

TEST_CASE("route_all skips failing tasks and measures baselines") {
  const auto tasks = gen_tasks(21, 30, 1, 3, DifficultyDist::uniform());
  crtest::SimSetup sim(tasks);
  std::vector<TaskRecord> records = sim.records;
  records.push_back(TaskRecord{"ghost", "no such task", "x", ""});
  SlotDecomposer dec(*sim.generator, 0);
  FixedAllocator top(8);
  LexicalJudge judge;
  RouteOptions opts;
  opts.workers = 4;
  opts.baseline_model_id = 8;
  opts.score_weights = ScoreWeights{};
  opts.judge = &judge;
  const auto res = route_all(records, dec, top, sim.ctx(), opts);
  CHECK(res.traces.size() == 30);
  CHECK(res.failed_task_ids == std::vector<std::string>{"ghost"});
  for (const auto& t : res.traces) {
    CHECK(t.acc);
    CHECK(t.baseline_acc == true);
    CHECK(t.decomposition.score.has_value());
  }
  opts.workers = 1;
  const auto again = route_all(records, dec, top, sim.ctx(), opts);
  for (std::size_t i = 0; i < res.traces.size(); ++i) {
    CHECK(to_json(again.traces[i]).dump() == to_json(res.traces[i]).dump());
  }
  opts.baseline_model_id = 12;
  CHECK(error_of([&] { route_all(records, dec, top, sim.ctx(), opts); }) == Errc::InvalidModel);
}

TEST_CASE("training environment wraps routing") {
  const auto tasks = gen_tasks(31, 10, 1, 3, DifficultyDist::uniform());
  crtest::SimSetup sim(tasks);
  RoutingTrainingEnv env(sim.records, *sim.generator, 4, *sim.probs, DifficultyConfig{}, sim.ctx(), 2);
  CHECK(env.num_contexts() == 10);
  CHECK(env.num_candidates() == 4);
  CHECK(env.num_models() == 9);
  CHECK(env.context_id(3) == "sim-000003");
  CHECK(env.alloc_features(0, 2).size() == 2 * tasks[0].k());
  CHECK(env.candidate(0, 0).k() == tasks[0].k());
  const std::vector<int> top(tasks[0].k(), 8);
  CHECK(env.run(0, 0, top, 1).correct);
  const std::vector<int> short_scheme;
  CHECK(error_of([&] { env.run(0, 0, short_scheme, 1); }) == Errc::EnvFailure);
  CHECK(error_of([&] {
          RoutingTrainingEnv(sim.records, *sim.generator, 0, *sim.probs, DifficultyConfig{}, sim.ctx());
        }) == Errc::InvalidConfig);
}

#include "costroute/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>

#include "costroute/allocation_search.hpp"
#include "costroute/decomposition.hpp"
#include "costroute/error.hpp"
#include "costroute/execution.hpp"
#include "costroute/grpo.hpp"
#include "costroute/log.hpp"
#include "costroute/model_pool.hpp"
#include "costroute/orchestrator.hpp"
#include "costroute/parallel.hpp"
#include "costroute/sim_env.hpp"

namespace costroute {

namespace fs = std::filesystem;

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"sim-gen", "decomp-dataset", "alloc-dataset", "search",
                                                 "train",   "route",          "eval"};
  return names;
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "pool",         "seed",          "workers",        "n",           "k_min",         "k_max",
      "dist",         "sim_tasks",     "tasks",          "m",           "w_c",           "w_p",
      "w_d",          "alpha",         "tau1",           "tau2",        "limit",         "prm",
      "strong_model", "threshold_model", "mode",         "gamma",       "endpoint",      "record",
      "replay",       "out",           "search_out",     "trace_out",   "decomp_dataset", "alloc_dataset",
      "decomp_policy", "alloc_policy", "history",        "rounds",      "group_size",    "clip_eps",
      "kl_beta",      "lr",            "iterations",     "inner_steps", "tasks_per_iteration",
      "sft_epochs",   "sft_lr",        "confidence",     "baseline_model", "allocator",  "task_id",
      "max_concurrent", "max_retries"};
  return keys;
}

class Options {
 public:
  explicit Options(const nlohmann::json& j) : j_(j) {
    if (!j_.is_object()) fail(Errc::Usage, "options must be a JSON object");
    for (const auto& [key, value] : j_.items()) {
      if (!known_keys().contains(key)) fail(Errc::Usage, "unknown option '" + key + "'");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(Errc::Usage, "option '" + key + "' has the wrong type");
    }
  }

  std::optional<std::string> path(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return get<std::string>(key, "");
  }

  std::string required_path(const std::string& key) const {
    auto p = path(key);
    if (!p || p->empty()) fail(Errc::Usage, "missing required option --" + dashed(key));
    return *p;
  }

  std::string existing_path(const std::string& key) const {
    auto p = required_path(key);
    if (!fs::exists(p)) fail(Errc::Usage, "--" + dashed(key) + " file not found: " + p);
    return p;
  }

  std::optional<std::string> optional_existing(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return existing_path(key);
  }

  static std::string dashed(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
  }

 private:
  const nlohmann::json& j_;
};

std::uint64_t seed_of(const Options& o) { return o.get<std::uint64_t>("seed", 0); }
std::size_t workers_of(const Options& o) { return std::max<std::size_t>(1, o.get<std::size_t>("workers", 1)); }

ScoreWeights weights_of(const Options& o) {
  ScoreWeights w;
  w.w_c = o.get("w_c", w.w_c);
  w.w_p = o.get("w_p", w.w_p);
  w.w_d = o.get("w_d", w.w_d);
  w.validate();
  return w;
}

DifficultyConfig difficulty_of(const Options& o) {
  DifficultyConfig d;
  d.alpha = o.get("alpha", d.alpha);
  d.tau1 = o.get("tau1", d.tau1);
  d.tau2 = o.get("tau2", d.tau2);
  d.validate();
  return d;
}

int limit_of(const Options& o) {
  const int limit = o.get("limit", kMaxSearchLimit);
  if (limit <= 0) fail(Errc::LimitZero, "search limit must be positive");
  if (limit > kMaxSearchLimit) fail(Errc::LimitTooLarge, "search limit is capped at 20");
  return limit;
}

struct Backend {
  std::unique_ptr<ModelPool> pool;
  GroupedPool grouped;
  std::unique_ptr<SimWorld> world;
  std::vector<TaskRecord> tasks;
  std::unique_ptr<ChatClient> base_client;
  std::unique_ptr<RecordingClient> recorder;
  std::optional<std::string> record_path;
  std::unique_ptr<SubtaskExecutor> executor;
  std::unique_ptr<DecompositionGenerator> generator;
  std::unique_ptr<TokenProbSource> probs;
  std::unique_ptr<CoherenceJudge> judge;
  ExactMatchChecker checker;
  LastStepIntegrator integrator;
  PrmConfig prm;
  std::uint64_t seed = 0;

  ExecutionContext context() const {
    return ExecutionContext{pool.get(), executor.get(), &checker, &integrator, prm, seed};
  }

  void finish() const {
    if (recorder && record_path) recorder->save(*record_path);
  }
};

std::unique_ptr<Backend> make_backend(const Options& o, const TransportFactory& factory) {
  auto b = std::make_unique<Backend>();
  b->seed = seed_of(o);
  b->pool = std::make_unique<ModelPool>(load_pool_file(o.existing_path("pool")));
  b->grouped = partition_groups(*b->pool);

  b->prm.enabled = o.get("prm", false);
  b->prm.strong_model_id = o.get("strong_model", b->pool->max_id());
  b->prm.threshold_model_id = o.get("threshold_model", b->grouped.min_id(Tier::Large));
  if (b->prm.enabled) b->prm.validate(*b->pool);

  if (o.has("sim_tasks")) {
    const auto mode_name = o.get<std::string>("mode", "deterministic");
    SimMode mode;
    if (mode_name == "deterministic") {
      mode = SimMode::Deterministic;
    } else if (mode_name == "sigmoid") {
      mode = SimMode::Sigmoid;
    } else {
      fail(Errc::Usage, "--mode must be deterministic or sigmoid");
    }
    auto behavior = SimModelBehavior::for_pool(*b->pool, mode, o.get("gamma", 8.0));
    b->world = std::make_unique<SimWorld>(load_sim_tasks(o.existing_path("sim_tasks")), *b->pool, behavior, b->seed);
    b->tasks = b->world->task_records();
    b->executor = std::make_unique<SimExecutor>(*b->world);
    b->generator = std::make_unique<SimDecompositionGenerator>(*b->world);
    b->probs = std::make_unique<SimTokenProbSource>(*b->world);
    b->judge = std::make_unique<LexicalJudge>();
    return b;
  }

  if (!o.has("tasks")) fail(Errc::Usage, "one of --sim-tasks or --tasks is required");
  for (const auto& row : read_jsonl(o.existing_path("tasks"))) {
    try {
      TaskRecord t;
      t.task_id = row.at("task_id").get<std::string>();
      t.text = row.at("text").get<std::string>();
      t.ground_truth = row.at("ground_truth").get<std::string>();
      t.benchmark_tag = row.value("benchmark_tag", std::string());
      if (t.text.empty()) fail(Errc::Parse, "task " + t.task_id + " has empty text");
      b->tasks.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::Parse, std::string("task row: ") + e.what());
    }
  }

  if (o.has("replay")) {
    b->base_client = std::make_unique<ReplayClient>(Cassette::load(o.existing_path("replay")));
  } else {
    LiveClient::Options lo;
    lo.endpoint_override = o.get<std::string>("endpoint", "");
    lo.max_concurrent_per_endpoint = o.get<std::size_t>("max_concurrent", 4);
    lo.retry.max_retries = o.get("max_retries", lo.retry.max_retries);
    auto transport = factory ? factory() : std::make_shared<HttpTransport>();
    b->base_client = std::make_unique<LiveClient>(std::move(transport), lo);
  }
  const ChatClient* client = b->base_client.get();
  if (o.has("record")) {
    b->record_path = o.required_path("record");
    b->recorder = std::make_unique<RecordingClient>(*b->base_client);
    client = b->recorder.get();
  }
  const auto& probe = b->pool->at(b->pool->eval_model_id());
  b->executor = std::make_unique<LlmExecutor>(*client, *b->pool);
  b->generator = std::make_unique<LlmDecompositionGenerator>(*client, probe);
  b->probs = std::make_unique<LlmTokenProbSource>(*client, probe);
  b->judge = std::make_unique<LlmCoherenceJudge>(*client, probe);
  return b;
}

std::size_t m_of(const Options& o) {
  const auto m = o.get<std::size_t>("m", 4);
  if (m < 1) fail(Errc::Usage, "--m must be at least 1");
  return m;
}

struct DecomposerChoice {
  std::unique_ptr<PolicyParams> policy;
  std::unique_ptr<Decomposer> decomposer;
  std::string kind;
};

std::map<std::string, std::vector<std::string>> load_decomp_texts(const std::string& path) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& row : read_jsonl(path)) {
    auto e = decomp_entry_from_json(row);
    out[e.task_id] = e.chosen.texts();
  }
  return out;
}

DecomposerChoice make_decomposer(const Options& o, const Backend& b) {
  DecomposerChoice c;
  if (auto p = o.optional_existing("decomp_policy")) {
    c.policy = std::make_unique<PolicyParams>(load_checkpoint(*p));
    c.decomposer = std::make_unique<PolicyDecomposer>(*b.generator, *c.policy);
    c.kind = "policy";
  } else if (auto d = o.optional_existing("decomp_dataset")) {
    const DecompositionGenerator* gen = b.world ? b.generator.get() : nullptr;
    c.decomposer = std::make_unique<DatasetDecomposer>(load_decomp_texts(*d), gen, m_of(o));
    c.kind = "dataset";
  } else {
    c.decomposer = std::make_unique<SlotDecomposer>(*b.generator, 0);
    c.kind = "first-candidate";
  }
  return c;
}

struct AllocatorChoice {
  std::unique_ptr<PolicyParams> policy;
  std::unique_ptr<Allocator> allocator;
  std::string kind;
};

AllocatorChoice make_allocator(const Options& o, const Backend& b, const ExecutionContext& ctx) {
  AllocatorChoice c;
  std::string kind = o.get<std::string>("allocator", o.has("alloc_policy") ? "policy" : "search");
  c.kind = kind;
  if (kind == "policy") {
    c.policy = std::make_unique<PolicyParams>(load_checkpoint(o.existing_path("alloc_policy")));
    if (c.policy->actions() != b.pool->size()) fail(Errc::ShapeMismatch, "allocator policy does not match the pool");
    c.allocator = std::make_unique<PolicyAllocator>(*c.policy, *b.probs, difficulty_of(o), o.get("confidence", 0.0));
  } else if (kind == "search") {
    c.allocator = std::make_unique<SearchAllocator>(*b.probs, b.grouped, ctx, difficulty_of(o), limit_of(o));
  } else if (kind == "top") {
    c.allocator = std::make_unique<FixedAllocator>(b.pool->max_id());
  } else if (kind.starts_with("fixed:")) {
    int id = -1;
    try {
      id = std::stoi(kind.substr(6));
    } catch (const std::exception&) {
      fail(Errc::Usage, "bad --allocator value '" + kind + "'");
    }
    if (!b.pool->valid_id(id)) fail(Errc::InvalidModel, "fixed allocator model out of range");
    c.allocator = std::make_unique<FixedAllocator>(id);
  } else {
    fail(Errc::Usage, "--allocator must be policy, search, top or fixed:ID");
  }
  return c;
}

std::vector<TaskRecord> select_tasks(const Options& o, const std::vector<TaskRecord>& tasks) {
  if (!o.has("task_id")) return tasks;
  const auto id = o.get<std::string>("task_id", "");
  std::vector<TaskRecord> out;
  for (const auto& t : tasks) {
    if (t.task_id == id) out.push_back(t);
  }
  if (out.empty()) fail(Errc::InvalidArgument, "no task with id " + id);
  return out;
}

ordered_json summary(const std::string& command) {
  ordered_json s;
  s["command"] = command;
  s["status"] = "ok";
  return s;
}

ordered_json cmd_sim_gen(const Options& o) {
  const auto out = o.required_path("out");
  const auto n = o.get<std::size_t>("n", 100);
  const int k_min = o.get("k_min", 1);
  const int k_max = o.get("k_max", 3);
  const auto dist = DifficultyDist::parse(o.get<std::string>("dist", "uniform"));
  const auto tasks = gen_tasks(seed_of(o), n, k_min, k_max, dist);
  std::vector<ordered_json> rows;
  for (const auto& t : tasks) rows.push_back(to_json(t));
  write_file_atomic(out, to_jsonl(rows));
  auto s = summary("sim-gen");
  s["n_tasks"] = tasks.size();
  s["dist"] = dist.to_string();
  s["out"] = out;
  return s;
}

ordered_json cmd_decomp_dataset(const Options& o, const TransportFactory& factory) {
  const auto out = o.required_path("out");
  auto b = make_backend(o, factory);
  DecompBuildOptions opts;
  opts.samples_per_task = m_of(o);
  opts.weights = weights_of(o);
  opts.baseline_model_id = o.get("baseline_model", b->pool->eval_model_id());
  if (!b->pool->valid_id(opts.baseline_model_id)) fail(Errc::InvalidModel, "baseline model out of range");
  opts.seed = b->seed;
  opts.workers = workers_of(o);
  const auto tasks = select_tasks(o, b->tasks);
  auto res = build_decomp_dataset(tasks, *b->generator, *b->judge, *b->executor, b->checker, opts);
  std::vector<ordered_json> rows;
  std::size_t correct = 0;
  for (const auto& e : res.entries) {
    rows.push_back(to_json(e));
    correct += e.chosen.correctness.value_or(false) ? 1 : 0;
  }
  write_file_atomic(out, to_jsonl(rows));
  b->finish();
  auto s = summary("decomp-dataset");
  s["n_entries"] = res.entries.size();
  s["n_correct"] = correct;
  s["skipped"] = res.skipped_task_ids;
  s["out"] = out;
  return s;
}

ordered_json cmd_alloc_dataset(const Options& o, const TransportFactory& factory, bool search_only) {
  const auto out = o.required_path("out");
  auto b = make_backend(o, factory);
  auto decomposer = make_decomposer(o, *b);
  AllocBuildOptions opts;
  opts.difficulty = difficulty_of(o);
  opts.limit = limit_of(o);
  opts.seed = b->seed;
  opts.workers = workers_of(o);
  opts.keep_traces = search_only || o.has("search_out");
  const auto tasks = select_tasks(o, b->tasks);
  auto res = build_alloc_dataset(tasks, *decomposer.decomposer, *b->probs, b->grouped, b->context(), opts);

  std::vector<ordered_json> trace_rows;
  std::size_t evaluations = 0;
  std::size_t exhausted = 0;
  for (const auto& t : res.traces) {
    if (t.schemes.empty()) continue;
    trace_rows.push_back(to_json(t));
    evaluations += t.schemes.size();
    exhausted += t.exhausted ? 1 : 0;
  }
  if (search_only) {
    write_file_atomic(out, to_jsonl(trace_rows));
  } else {
    std::vector<ordered_json> rows;
    for (const auto& e : res.entries) rows.push_back(to_json(e));
    write_file_atomic(out, to_jsonl(rows));
    if (auto p = o.path("search_out")) write_file_atomic(*p, to_jsonl(trace_rows));
  }
  b->finish();
  auto s = summary(search_only ? "search" : "alloc-dataset");
  s["n_tasks"] = tasks.size();
  s["n_found"] = res.entries.size();
  s["n_exhausted"] = exhausted;
  s["mean_evaluations"] = trace_rows.empty() ? 0.0 : static_cast<double>(evaluations) / trace_rows.size();
  s["decomposer"] = decomposer.kind;
  s["out"] = out;
  return s;
}

GrpoConfig grpo_of(const Options& o) {
  GrpoConfig g;
  g.group_size = o.get("group_size", g.group_size);
  g.clip_eps = o.get("clip_eps", g.clip_eps);
  g.kl_beta = o.get("kl_beta", g.kl_beta);
  g.learning_rate = o.get("lr", g.learning_rate);
  g.iterations = o.get("iterations", g.iterations);
  g.inner_steps = o.get("inner_steps", g.inner_steps);
  g.tasks_per_iteration = o.get("tasks_per_iteration", g.tasks_per_iteration);
  g.seed = seed_of(o);
  g.workers = workers_of(o);
  g.validate();
  return g;
}

ordered_json eval_json(const PolicyEvaluation& e) {
  ordered_json j;
  j["mean_reward"] = e.mean_reward;
  j["mean_cost_cents"] = e.mean_cost_cents;
  return j;
}

ordered_json cmd_train(const Options& o, const TransportFactory& factory) {
  const auto decomp_out = o.required_path("decomp_policy");
  const auto alloc_out = o.required_path("alloc_policy");
  const auto decomp_data = o.optional_existing("decomp_dataset");
  const auto alloc_data = o.optional_existing("alloc_dataset");
  auto b = make_backend(o, factory);
  const auto cfg = grpo_of(o);
  const auto rounds = o.get<std::size_t>("rounds", 6);
  const auto difficulty = difficulty_of(o);
  const std::size_t m = m_of(o);
  SupervisedConfig sft;
  sft.epochs = o.get("sft_epochs", sft.epochs);
  sft.learning_rate = o.get("sft_lr", sft.learning_rate);

  RoutingTrainingEnv env(b->tasks, *b->generator, m, *b->probs, difficulty, b->context(), workers_of(o));
  auto decomp = PolicyParams::zeros({ActionKind::Decomposer, m});
  auto alloc = PolicyParams::zeros({ActionKind::Allocator, b->pool->size()});
  auto s = summary("train");

  if (decomp_data) {
    std::map<std::string, std::size_t> index;
    for (std::size_t c = 0; c < env.num_contexts(); ++c) index[env.context_id(c)] = c;
    std::vector<LabeledExample> examples;
    for (const auto& row : read_jsonl(*decomp_data)) {
      const auto e = decomp_entry_from_json(row);
      auto it = index.find(e.task_id);
      if (it == index.end()) continue;
      for (std::size_t slot = 0; slot < m; ++slot) {
        if (env.candidate(it->second, slot).texts() == e.chosen.texts()) {
          examples.push_back({env.decomp_features(it->second), slot});
          break;
        }
      }
    }
    if (!examples.empty()) s["decomp_warm_start_nll"] = fit_supervised(decomp, examples, sft);
    s["decomp_warm_start_examples"] = examples.size();
  }
  if (alloc_data) {
    std::vector<LabeledExample> examples;
    for (const auto& row : read_jsonl(*alloc_data)) {
      const auto e = alloc_entry_from_json(row);
      for (std::size_t i = 0; i < e.subtasks.size(); ++i) {
        if (e.labels[i] < 0 || static_cast<std::size_t>(e.labels[i]) >= alloc.actions()) {
          fail(Errc::ShapeMismatch, "label outside the pool in " + e.task_id);
        }
        examples.push_back({subtask_features(e.estimates[i].quantile_value, *e.estimates[i].bucket, i,
                                             e.subtasks.size(), e.subtasks[i].size()),
                            static_cast<std::size_t>(e.labels[i])});
      }
    }
    if (!examples.empty()) s["alloc_warm_start_nll"] = fit_supervised(alloc, examples, sft);
    s["alloc_warm_start_examples"] = examples.size();
  }

  s["initial"] = eval_json(evaluate_policies(env, decomp, alloc, Decoding::Greedy, b->seed, cfg.workers));
  CotrainResult result{decomp, alloc, {}, false, {}};
  if (rounds > 0) result = cotrain(decomp, alloc, env, cfg, rounds);

  save_checkpoint(result.decomp, decomp_out);
  save_checkpoint(result.alloc, alloc_out);
  if (auto p = o.path("history")) {
    std::vector<ordered_json> rows;
    for (const auto& h : result.history) rows.push_back(to_json(h));
    write_file_atomic(*p, to_jsonl(rows));
  }
  b->finish();
  if (result.aborted) fail(Errc::EnvFailure, "training stopped early: " + result.abort_reason);

  s["final"] = eval_json(evaluate_policies(env, result.decomp, result.alloc, Decoding::Greedy, b->seed, cfg.workers));
  s["rounds"] = result.history.size();
  s["decomp_policy"] = decomp_out;
  s["alloc_policy"] = alloc_out;
  return s;
}

LabelMap load_labels(const std::string& path, std::span<const RoutingTrace> traces) {
  std::map<std::string, const Decomposition*> routed;
  for (const auto& t : traces) routed[t.task_id] = &t.decomposition;
  LabelMap labels;
  for (const auto& row : read_jsonl(path)) {
    auto e = alloc_entry_from_json(row);
    auto it = routed.find(e.task_id);
    if (it == routed.end() || it->second->subtasks.size() != e.subtasks.size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < e.subtasks.size() && same; ++i) same = it->second->subtasks[i].text == e.subtasks[i];
    if (same) labels[e.task_id] = e.labels;
  }
  return labels;
}

ordered_json cmd_route(const Options& o, const TransportFactory& factory, bool evaluate) {
  const auto out = o.required_path("out");
  auto b = make_backend(o, factory);
  const auto ctx = b->context();
  auto decomposer = make_decomposer(o, *b);
  auto allocator = make_allocator(o, *b, ctx);
  const auto tasks = select_tasks(o, b->tasks);

  RouteOptions ropts;
  ropts.workers = workers_of(o);
  if (evaluate) {
    ropts.baseline_model_id = o.get("baseline_model", b->pool->eval_model_id());
    ropts.score_weights = weights_of(o);
    ropts.judge = b->judge.get();
  }
  auto routed = route_all(tasks, *decomposer.decomposer, *allocator.allocator, ctx, ropts);

  std::vector<ordered_json> rows;
  for (const auto& t : routed.traces) rows.push_back(to_json(t));
  const auto trace_path = evaluate ? o.path("trace_out") : std::optional<std::string>(out);
  if (trace_path) write_file_atomic(*trace_path, to_jsonl(rows));

  auto s = summary(evaluate ? "eval" : "route");
  s["decomposer"] = decomposer.kind;
  s["allocator"] = allocator.kind;
  s["failed"] = routed.failed_task_ids;

  if (!evaluate) {
    const auto m = compute_metrics(routed.traces);
    b->finish();
    s["n_tasks"] = m.n_tasks;
    s["acc"] = m.acc;
    s["c_api_cents"] = m.c_api_cents;
    s["out"] = out;
    return s;
  }

  std::optional<LabelMap> labels;
  if (auto p = o.optional_existing("alloc_dataset")) labels = load_labels(*p, routed.traces);
  const auto metrics = compute_metrics(routed.traces, labels ? &*labels : nullptr);

  ExecutionContext base_ctx = ctx;
  base_ctx.prm.enabled = false;
  FixedAllocator top(b->pool->max_id());
  RouteOptions bopts;
  bopts.workers = ropts.workers;
  auto baseline = route_all(tasks, *decomposer.decomposer, top, base_ctx, bopts);
  const auto base_metrics = compute_metrics(baseline.traces);
  b->finish();

  ordered_json report = to_json(metrics);
  report["baseline"] = to_json(base_metrics);
  report["baseline"]["model_id"] = b->pool->max_id();
  report["cost_ratio"] = base_metrics.c_api_cents > 0.0 ? metrics.c_api_cents / base_metrics.c_api_cents : 0.0;
  report["acc_gap"] = base_metrics.acc - metrics.acc;
  report["n_failed"] = routed.failed_task_ids.size();
  write_file_atomic(out, report.dump(2) + "\n");

  s["acc"] = metrics.acc;
  s["c_api_cents"] = metrics.c_api_cents;
  s["baseline_acc"] = base_metrics.acc;
  s["baseline_c_api_cents"] = base_metrics.c_api_cents;
  s["cost_ratio"] = report["cost_ratio"];
  s["out"] = out;
  return s;
}

}  // namespace

ordered_json run_command(const std::string& command, const nlohmann::json& options,
                         const TransportFactory& transport_factory) {
  const Options o(options);
  if (command == "sim-gen") return cmd_sim_gen(o);
  if (command == "decomp-dataset") return cmd_decomp_dataset(o, transport_factory);
  if (command == "alloc-dataset") return cmd_alloc_dataset(o, transport_factory, false);
  if (command == "search") return cmd_alloc_dataset(o, transport_factory, true);
  if (command == "train") return cmd_train(o, transport_factory);
  if (command == "route") return cmd_route(o, transport_factory, false);
  if (command == "eval") return cmd_route(o, transport_factory, true);
  fail(Errc::Usage, "unknown command '" + command + "'");
}

}  // namespace costroute

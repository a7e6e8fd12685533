#include "costroute/sim_env.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "costroute/error.hpp"
#include "costroute/rng.hpp"

namespace costroute {

DifficultyDist DifficultyDist::parse(std::string_view spec) {
  auto number = [&](std::string_view s) {
    try {
      std::size_t used = 0;
      const std::string str(s);
      const double v = std::stod(str, &used);
      if (used != str.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      fail(Errc::Parse, "bad number in difficulty distribution '" + std::string(spec) + "'");
    }
  };
  DifficultyDist d;
  if (spec == "uniform") return d;
  if (spec.starts_with("uniform:")) {
    auto rest = spec.substr(8);
    const auto comma = rest.find(',');
    if (comma == std::string_view::npos) fail(Errc::Parse, "expected uniform:LO,HI");
    d = uniform(number(rest.substr(0, comma)), number(rest.substr(comma + 1)));
  } else if (spec.starts_with("point:")) {
    d = point(number(spec.substr(6)));
  } else {
    fail(Errc::Parse, "unknown difficulty distribution '" + std::string(spec) + "'");
  }
  if (!(d.lo >= 0.0 && d.hi <= 1.0 && d.lo <= d.hi)) fail(Errc::InvalidArgument, "difficulties must lie in [0, 1]");
  return d;
}

std::string DifficultyDist::to_string() const {
  char buf[64];
  if (kind == Kind::Point) {
    std::snprintf(buf, sizeof buf, "point:%g", lo);
  } else {
    std::snprintf(buf, sizeof buf, "uniform:%g,%g", lo, hi);
  }
  return buf;
}

namespace {

std::string sim_task_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sim-%06zu", i);
  return buf;
}

}  // namespace

std::vector<SimTask> gen_tasks(std::uint64_t seed, std::size_t n, int k_min, int k_max, const DifficultyDist& dist) {
  if (n < 1) fail(Errc::InvalidArgument, "need at least one task");
  if (k_min < 1 || k_max < k_min) fail(Errc::InvalidArgument, "need 1 <= k_min <= k_max");
  std::vector<SimTask> tasks;
  tasks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    SimTask t;
    t.task_id = sim_task_id(i);
    const int k = rng.uniform_int(k_min, k_max);
    for (int j = 0; j < k; ++j) {
      const double d = dist.kind == DifficultyDist::Kind::Point ? dist.lo : rng.uniform(dist.lo, dist.hi);
      t.difficulties.push_back(d);
      const auto in = rng.uniform_int(80, 400);
      const auto out = rng.uniform_int(40, 240);
      t.tokens.push_back(TokenUsage{in, out});
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

ordered_json to_json(const SimTask& task) {
  ordered_json row;
  row["task_id"] = task.task_id;
  row["difficulties"] = task.difficulties;
  ordered_json tokens = ordered_json::array();
  for (const auto& t : task.tokens) tokens.push_back({t.prompt_tokens, t.completion_tokens});
  row["tokens"] = std::move(tokens);
  return row;
}

SimTask sim_task_from_json(const nlohmann::json& row) {
  SimTask t;
  try {
    t.task_id = row.at("task_id").get<std::string>();
    t.difficulties = row.at("difficulties").get<std::vector<double>>();
    for (const auto& pair : row.at("tokens")) {
      if (!pair.is_array() || pair.size() != 2) fail(Errc::Parse, "tokens entries must be [in, out] pairs");
      t.tokens.push_back(TokenUsage{pair[0].get<std::int64_t>(), pair[1].get<std::int64_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Parse, std::string("simulated task row: ") + e.what());
  }
  if (t.difficulties.empty() || t.tokens.size() != t.difficulties.size()) {
    fail(Errc::Parse, "simulated task " + t.task_id + " needs one token pair per difficulty");
  }
  for (double d : t.difficulties) {
    if (!(d >= 0.0 && d <= 1.0)) fail(Errc::Parse, "difficulty outside [0, 1] in " + t.task_id);
  }
  for (const auto& u : t.tokens) {
    if (u.prompt_tokens < 0 || u.completion_tokens < 0) fail(Errc::Parse, "negative token count in " + t.task_id);
  }
  return t;
}

std::vector<SimTask> load_sim_tasks(const std::filesystem::path& path) {
  std::vector<SimTask> tasks;
  for (const auto& row : read_jsonl(path)) tasks.push_back(sim_task_from_json(row));
  return tasks;
}

TaskRecord sim_task_record(const SimTask& task) {
  TaskRecord r;
  r.task_id = task.task_id;
  r.text = "Simulated task " + task.task_id + ": carry a value through " + std::to_string(task.k()) +
           " dependent stages and report the final answer.";
  r.ground_truth = "answer:" + task.task_id;
  r.benchmark_tag = "sim";
  return r;
}

SimModelBehavior SimModelBehavior::for_pool(const ModelPool& pool, SimMode mode, double gamma) {
  SimModelBehavior b;
  b.mode = mode;
  b.gamma = gamma;
  const auto n = pool.size();
  for (std::size_t i = 0; i < n; ++i) {
    b.capability.push_back(n == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return b;
}

double SimModelBehavior::capability_of(int model_id) const {
  if (model_id < 0 || static_cast<std::size_t>(model_id) >= capability.size()) {
    fail(Errc::InvalidModel, "no capability for model " + std::to_string(model_id));
  }
  return capability[static_cast<std::size_t>(model_id)];
}

void SimModelBehavior::validate() const {
  if (mode == SimMode::Sigmoid && !(gamma > 0.0)) fail(Errc::InvalidConfig, "sigmoid gamma must be positive");
  if (capability.empty()) fail(Errc::InvalidConfig, "empty capability map");
  for (std::size_t i = 0; i < capability.size(); ++i) {
    if (!(capability[i] >= 0.0 && capability[i] <= 1.0)) fail(Errc::InvalidConfig, "capability outside [0, 1]");
    if (i > 0 && capability[i] < capability[i - 1]) fail(Errc::InvalidConfig, "capabilities must be nondecreasing");
  }
}

SimStepOutcome simulate_step(double difficulty, const TokenUsage& profile, int model_id,
                             const SimModelBehavior& behavior, std::uint64_t seed) {
  const double cap = behavior.capability_of(model_id);
  SimStepOutcome out;
  out.usage = profile;
  if (behavior.mode == SimMode::Deterministic) {
    out.correct = cap >= difficulty;
  } else {
    const double p = 1.0 / (1.0 + std::exp(-behavior.gamma * (cap - difficulty)));
    Rng rng(seed);
    out.correct = rng.uniform() < p;
  }
  return out;
}

std::vector<double> sim_token_probs(double difficulty, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> probs;
  probs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    probs.push_back(std::clamp(1.0 - difficulty + rng.uniform(-0.05, 0.05), 0.0, 1.0));
  }
  return probs;
}

AllocationScheme brute_force_optimal(const SimTask& task, const ModelPool& pool, const SimModelBehavior& behavior) {
  if (task.k() > 3 || pool.size() > 9) fail(Errc::InstanceTooLarge, "enumeration is limited to k <= 3 and 9 models");
  if (behavior.mode != SimMode::Deterministic) fail(Errc::InvalidArgument, "enumeration needs the deterministic mode");
  const std::size_t k = task.k();
  const int n = static_cast<int>(pool.size());

  AllocationScheme best;
  best.task_id = task.task_id;
  best.acc = false;
  std::vector<int> scheme(k, 0);
  for (;;) {
    bool ok = true;
    Cost cost;
    for (std::size_t i = 0; i < k; ++i) {
      ok = ok && behavior.capability_of(scheme[i]) >= task.difficulties[i];
      cost += usage_cost(task.tokens[i], pool.at(scheme[i]));
    }
    if (ok && (!*best.acc || cost < *best.cost)) {
      best.assignments = scheme;
      best.acc = true;
      best.cost = cost;
    }
    // odometer increment, last position fastest => lexicographic order
    std::size_t pos = k;
    while (pos > 0) {
      --pos;
      if (++scheme[pos] < n) break;
      scheme[pos] = 0;
      if (pos == 0) return best;
    }
    if (k == 0) return best;
  }
}

SimWorld::SimWorld(std::vector<SimTask> tasks, const ModelPool& pool, SimModelBehavior behavior, std::uint64_t seed)
    : tasks_(std::move(tasks)), pool_(&pool), behavior_(std::move(behavior)), seed_(seed) {
  behavior_.validate();
  if (behavior_.capability.size() != pool.size()) fail(Errc::InvalidConfig, "capability map does not match the pool");
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (!index_.emplace(tasks_[i].task_id, i).second) {
      fail(Errc::InvalidArgument, "duplicate simulated task id " + tasks_[i].task_id);
    }
  }
}

const SimTask& SimWorld::task(const std::string& task_id) const {
  auto it = index_.find(task_id);
  if (it == index_.end()) fail(Errc::InvalidArgument, "unknown simulated task " + task_id);
  return tasks_[it->second];
}

std::vector<TaskRecord> SimWorld::task_records() const {
  std::vector<TaskRecord> out;
  out.reserve(tasks_.size());
  for (const auto& t : tasks_) out.push_back(sim_task_record(t));
  return out;
}

std::string sim_expected_output(const TaskRecord& task, std::size_t index, std::size_t chain_length) {
  if (index + 1 == chain_length) return task.ground_truth;
  return task.task_id + "/" + std::to_string(index) + ":ok";
}

namespace {

const SimAnnotation& annotation(const StepRequest& req) {
  if (!req.task || !req.subtask || !req.subtask->sim) {
    fail(Errc::ExecutorFailure, "simulated backend needs annotated subtasks");
  }
  return *req.subtask->sim;
}

double sim_latency(const TokenUsage& usage, int model_id) {
  return 40.0 + static_cast<double>(usage.completion_tokens) * (2.0 + model_id);
}

}  // namespace

StepResult SimExecutor::execute(const StepRequest& req) const {
  const auto& ann = annotation(req);
  const std::size_t idx = req.subtask->index;
  const bool upstream_ok = idx == 0 ? req.upstream.empty()
                                    : req.upstream == sim_expected_output(*req.task, idx - 1, req.chain_length);
  const auto outcome = simulate_step(ann.difficulty, ann.tokens, req.model_id, world_->behavior(), req.seed);
  StepResult res;
  res.usage = outcome.usage;
  res.latency_ms = sim_latency(res.usage, req.model_id);
  res.output = upstream_ok && outcome.correct ? sim_expected_output(*req.task, idx, req.chain_length)
                                              : req.task->task_id + "/" + std::to_string(idx) + ":wrong";
  return res;
}

ReviewResult SimExecutor::review(const StepRequest& req, std::string_view candidate, int strong_model_id) const {
  const auto& ann = annotation(req);
  const auto expected = sim_expected_output(*req.task, req.subtask->index, req.chain_length);
  const auto strong = simulate_step(ann.difficulty, ann.tokens, strong_model_id, world_->behavior(), req.seed);
  ReviewResult res;
  res.corrected = strong.correct && candidate != expected;
  res.output = res.corrected ? expected : std::string(candidate);
  res.usage.prompt_tokens = ann.tokens.prompt_tokens + ann.tokens.completion_tokens;
  res.usage.completion_tokens = 16 + (res.corrected ? ann.tokens.completion_tokens : 0);
  res.latency_ms = sim_latency(res.usage, strong_model_id);
  return res;
}

std::optional<bool> SimExecutor::step_correct(const StepRequest& req, std::string_view output) const {
  return output == sim_expected_output(*req.task, req.subtask->index, req.chain_length);
}

namespace {

constexpr std::array<const char*, 4> kDistractors = {
    "recall an unrelated trivia fact about migratory birds",
    "list three colours found in a rainbow",
    "name a famous mountain range in europe",
    "describe typical weather in a tropical rainforest",
};

TokenUsage scale(const TokenUsage& u, double f) {
  return TokenUsage{static_cast<std::int64_t>(std::llround(static_cast<double>(u.prompt_tokens) * f)),
                    static_cast<std::int64_t>(std::llround(static_cast<double>(u.completion_tokens) * f))};
}

}  // namespace

Decomposition SimDecompositionGenerator::candidate(const TaskRecord& task, std::size_t slot) const {
  const SimTask& st = world_->task(task.task_id);
  const std::size_t k = st.k();
  const std::size_t style = slot % 4;
  const std::size_t variant = slot / 4;
  const std::string& id = st.task_id;
  std::vector<std::pair<std::string, SimAnnotation>> steps;

  auto faithful_text = [&](std::size_t j) {
    if (j == 0) return "stage 1 of " + id + ": derive value v1 from the task input";
    return "stage " + std::to_string(j + 1) + " of " + id + ": transform value v" + std::to_string(j) +
           " into value v" + std::to_string(j + 1);
  };

  switch (style) {
    case 0:
      for (std::size_t j = 0; j < k; ++j) steps.emplace_back(faithful_text(j), SimAnnotation{st.difficulties[j], st.tokens[j]});
      break;
    case 1: {
      std::size_t a = 0;
      const std::size_t offset = variant % 2;
      while (a < k) {
        const std::size_t b = (a == 0 && offset == 1) ? a : std::min(a + 1, k - 1);
        if (a == b) {
          steps.emplace_back(faithful_text(a), SimAnnotation{st.difficulties[a], st.tokens[a]});
        } else {
          double d = 0.0;
          TokenUsage sum;
          for (std::size_t j = a; j <= b; ++j) {
            d = std::max(d, st.difficulties[j]);
            sum += st.tokens[j];
          }
          steps.emplace_back("stages " + std::to_string(a + 1) + "-" + std::to_string(b + 1) + " of " + id +
                                 ": carry value v" + std::to_string(a) + " through to value v" + std::to_string(b + 1) +
                                 " in one pass",
                             SimAnnotation{std::min(1.0, d + 0.15), scale(sum, 1.2)});
        }
        a = b + 1;
      }
      break;
    }
    case 2:
      for (std::size_t j = 0; j < k; ++j) {
        const auto half = scale(st.tokens[j], 0.6);
        steps.emplace_back("stage " + std::to_string(j + 1) + "a of " + id + ": set up value v" + std::to_string(j) +
                               " for the transformation",
                           SimAnnotation{st.difficulties[j], half});
        steps.emplace_back("stage " + std::to_string(j + 1) + "b of " + id + ": finish computing value v" +
                               std::to_string(j + 1),
                           SimAnnotation{st.difficulties[j], half});
      }
      break;
    default: {
      for (std::size_t j = 0; j < k; ++j) steps.emplace_back(faithful_text(j), SimAnnotation{st.difficulties[j], st.tokens[j]});
      const std::size_t pos = k == 1 ? 0 : 1 + variant % (k - 1);
      Rng rng(derive_seed(world_->seed(), hash_string(id), 0x4e4f495345ULL, variant));
      const double d = rng.uniform();
      const char* text = kDistractors[(hash_string(id) + variant) % kDistractors.size()];
      steps.insert(steps.begin() + static_cast<std::ptrdiff_t>(pos),
                   {std::string(text), SimAnnotation{d, TokenUsage{120, 60}}});
      break;
    }
  }

  Decomposition d;
  d.task_id = id;
  d.generation_order = slot;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    d.subtasks.push_back(Subtask{i, std::move(steps[i].first), std::nullopt, steps[i].second});
  }
  return d;
}

std::vector<Decomposition> SimDecompositionGenerator::generate(const TaskRecord& task, std::size_t m) const {
  if (m < 1) fail(Errc::InvalidArgument, "need at least one candidate");
  std::vector<Decomposition> out;
  out.reserve(m);
  for (std::size_t slot = 0; slot < m; ++slot) out.push_back(candidate(task, slot));
  return out;
}

std::vector<double> SimTokenProbSource::token_probs(const TaskRecord& task, const Subtask& subtask) const {
  if (!subtask.sim) fail(Errc::InvalidArgument, "simulated probe needs annotated subtasks");
  const auto count = static_cast<std::size_t>(std::clamp<std::int64_t>(subtask.sim->tokens.prompt_tokens / 4, 16, 64));
  const auto seed = derive_seed(world_->seed(), hash_string(task.task_id), hash_string(subtask.text));
  return sim_token_probs(subtask.sim->difficulty, count, seed);
}

}  // namespace costroute

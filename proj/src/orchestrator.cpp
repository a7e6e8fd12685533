#include "costroute/orchestrator.hpp"

#include <algorithm>
#include <cstdlib>

#include "costroute/error.hpp"
#include "costroute/log.hpp"
#include "costroute/parallel.hpp"

namespace costroute {

std::vector<int> FixedAllocator::allocate(const TaskRecord&, const Decomposition& d) const {
  return std::vector<int>(d.k(), model_id_);
}

std::vector<int> SearchAllocator::allocate(const TaskRecord& task, const Decomposition& d) const {
  const auto estimates = estimate_all(task, d, *probs_, difficulty_);
  std::vector<Bucket> buckets;
  for (const auto& e : estimates) buckets.push_back(*e.bucket);
  return grouped_search(task.task_id, buckets, *grouped_, chain_evaluator(task, d, ctx_), limit_).result.assignments;
}

std::vector<FeatureVector> allocation_features(const TaskRecord& task, const Decomposition& d,
                                               const TokenProbSource& probs, const DifficultyConfig& cfg) {
  const auto estimates = estimate_all(task, d, probs, cfg);
  std::vector<FeatureVector> out;
  out.reserve(d.k());
  for (std::size_t i = 0; i < d.k(); ++i) {
    out.push_back(subtask_features(estimates[i].quantile_value, *estimates[i].bucket, i, d.k(),
                                   d.subtasks[i].text.size()));
  }
  return out;
}

std::size_t decode_action(std::span<const double> probs, double confidence) {
  if (probs.empty()) fail(Errc::InvalidArgument, "empty action distribution");
  if (confidence <= 0.0) return argmax(probs);
  double acc = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    acc += probs[a];
    if (acc >= confidence) return a;
  }
  return probs.size() - 1;
}

PolicyAllocator::PolicyAllocator(const PolicyParams& policy, const TokenProbSource& probs, DifficultyConfig difficulty,
                                 double confidence)
    : policy_(&policy), probs_(&probs), difficulty_(difficulty), confidence_(confidence) {
  policy.validate();
  if (policy.action_space.kind != ActionKind::Allocator) fail(Errc::ShapeMismatch, "expected an allocator policy");
  if (!(confidence >= 0.0 && confidence < 1.0)) fail(Errc::InvalidConfig, "decoding confidence must lie in [0, 1)");
}

std::vector<int> PolicyAllocator::allocate(const TaskRecord& task, const Decomposition& d) const {
  std::vector<int> out;
  for (const auto& x : allocation_features(task, d, *probs_, difficulty_)) {
    out.push_back(static_cast<int>(decode_action(policy_->probs(x), confidence_)));
  }
  return out;
}

Decomposition SlotDecomposer::decompose(const TaskRecord& task) const {
  auto candidates = generator_->generate(task, slot_ + 1);
  if (candidates.size() <= slot_) fail(Errc::GeneratorFailure, "generator returned too few candidates");
  return std::move(candidates[slot_]);
}

PolicyDecomposer::PolicyDecomposer(const DecompositionGenerator& generator, const PolicyParams& policy)
    : generator_(&generator), policy_(&policy) {
  policy.validate();
  if (policy.action_space.kind != ActionKind::Decomposer) fail(Errc::ShapeMismatch, "expected a decomposer policy");
}

Decomposition PolicyDecomposer::decompose(const TaskRecord& task) const {
  const std::size_t slot = argmax(policy_->probs(task_features(task.text.size())));
  auto candidates = generator_->generate(task, policy_->actions());
  if (candidates.size() <= slot) fail(Errc::GeneratorFailure, "generator returned too few candidates");
  return std::move(candidates[slot]);
}

Decomposition DatasetDecomposer::decompose(const TaskRecord& task) const {
  auto it = texts_.find(task.task_id);
  if (!generator_) {
    if (it == texts_.end()) fail(Errc::GeneratorFailure, "no stored decomposition for " + task.task_id);
    return make_decomposition(task.task_id, it->second);
  }
  auto candidates = generator_->generate(task, std::max<std::size_t>(m_, 1));
  if (candidates.empty()) fail(Errc::GeneratorFailure, "generator returned no candidates");
  if (it != texts_.end()) {
    for (auto& c : candidates) {
      if (c.texts() == it->second) return std::move(c);
    }
  }
  return std::move(candidates.front());
}

RoutingTrace route_task(const TaskRecord& task, const Decomposer& decomposer, const Allocator& allocator,
                        const ExecutionContext& ctx) {
  const Decomposition d = decomposer.decompose(task);
  if (d.k() == 0) fail(Errc::GeneratorFailure, "empty decomposition for " + task.task_id);
  const auto scheme = allocator.allocate(task, d);
  for (int id : scheme) {
    if (!ctx.pool->valid_id(id)) fail(Errc::InvalidModel, "allocator chose unknown model " + std::to_string(id));
  }
  return execute_chain(task, d, scheme, ctx);
}

RouteResult route_all(std::span<const TaskRecord> tasks, const Decomposer& decomposer, const Allocator& allocator,
                      const ExecutionContext& ctx, const RouteOptions& options) {
  if (options.baseline_model_id && !ctx.pool->valid_id(*options.baseline_model_id)) {
    fail(Errc::InvalidModel, "baseline model out of range");
  }
  if (options.score_weights) options.score_weights->validate();
  struct Slot {
    std::optional<RoutingTrace> trace;
  };
  std::vector<Slot> slots(tasks.size());
  parallel_for(tasks.size(), options.workers, [&](std::size_t t) {
    const auto& task = tasks[t];
    try {
      auto trace = route_task(task, decomposer, allocator, ctx);
      if (options.baseline_model_id) {
        const auto check = check_correctness(task, trace.decomposition, *ctx.executor, *ctx.checker,
                                             *options.baseline_model_id, ctx.seed);
        trace.baseline_acc = check.correct;
        if (options.score_weights && options.judge) {
          evaluate_coherence(trace.decomposition, task, *options.judge);
          score_decomposition(trace.decomposition, *options.score_weights);
        }
      }
      slots[t].trace = std::move(trace);
    } catch (const Error& e) {
      log_warning("routing " + task.task_id + " failed: " + e.what());
    }
  });
  RouteResult result;
  for (std::size_t t = 0; t < slots.size(); ++t) {
    if (slots[t].trace) {
      result.traces.push_back(std::move(*slots[t].trace));
    } else {
      result.failed_task_ids.push_back(tasks[t].task_id);
    }
  }
  return result;
}

double mean_absolute_error(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) fail(Errc::LabelMismatch, "prediction and label counts differ");
  if (predicted.empty()) fail(Errc::LabelMismatch, "no labeled subtasks");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += std::abs(predicted[i] - labels[i]);
  return sum / static_cast<double>(predicted.size());
}

MetricsReport compute_metrics(std::span<const RoutingTrace> traces, const LabelMap* labels) {
  if (traces.empty()) fail(Errc::EmptyTraces, "no traces to evaluate");
  MetricsReport r;
  r.n_tasks = traces.size();
  std::int64_t cost_mc = 0;
  std::int64_t prm_mc = 0;
  std::size_t correct = 0;
  std::size_t baseline_n = 0;
  std::size_t baseline_correct = 0;
  std::size_t scored = 0;
  double score_sum = 0.0;
  double latency = 0.0;
  double abs_err = 0.0;

  for (const auto& t : traces) {
    correct += t.acc ? 1 : 0;
    cost_mc += t.cost.millicents;
    prm_mc += t.prm_cost.millicents;
    latency += t.latency_ms;
    if (t.baseline_acc) {
      ++baseline_n;
      baseline_correct += *t.baseline_acc ? 1 : 0;
    }
    if (t.decomposition.score) {
      ++scored;
      score_sum += *t.decomposition.score;
    }
    if (labels) {
      auto it = labels->find(t.task_id);
      if (it == labels->end()) continue;
      const auto& pred = t.scheme.assignments;
      if (pred.size() != it->second.size()) {
        fail(Errc::LabelMismatch, "task " + t.task_id + " has " + std::to_string(pred.size()) + " subtasks but " +
                                      std::to_string(it->second.size()) + " labels");
      }
      for (std::size_t i = 0; i < pred.size(); ++i) abs_err += std::abs(pred[i] - it->second[i]);
      r.n_labeled_subtasks += pred.size();
    }
  }
  const double n = static_cast<double>(traces.size());
  r.acc = static_cast<double>(correct) / n;
  r.c_api_cents = static_cast<double>(cost_mc) / 1000.0 / n;
  r.prm_cost_cents = static_cast<double>(prm_mc) / 1000.0 / n;
  r.mean_latency_ms = latency / n;
  if (r.n_labeled_subtasks) r.mae = abs_err / static_cast<double>(r.n_labeled_subtasks);
  if (baseline_n) r.c_d = static_cast<double>(baseline_correct) / static_cast<double>(baseline_n);
  if (scored) r.mean_score = score_sum / static_cast<double>(scored);
  return r;
}

ordered_json to_json(const MetricsReport& report) {
  ordered_json j;
  j["acc"] = report.acc;
  j["c_api_cents"] = report.c_api_cents;
  j["prm_cost_cents"] = report.prm_cost_cents;
  j["mae"] = report.mae ? ordered_json(*report.mae) : ordered_json();
  j["c_d"] = report.c_d ? ordered_json(*report.c_d) : ordered_json();
  j["mean_score"] = report.mean_score ? ordered_json(*report.mean_score) : ordered_json();
  j["mean_latency_ms"] = report.mean_latency_ms;
  j["n_tasks"] = report.n_tasks;
  j["n_labeled_subtasks"] = report.n_labeled_subtasks;
  return j;
}

RoutingTrainingEnv::RoutingTrainingEnv(std::vector<TaskRecord> tasks, const DecompositionGenerator& generator,
                                       std::size_t m, const TokenProbSource& probs, const DifficultyConfig& difficulty,
                                       const ExecutionContext& ctx, std::size_t workers)
    : tasks_(std::move(tasks)), m_(m), ctx_(ctx) {
  if (m_ < 1) fail(Errc::InvalidConfig, "need at least one candidate per task");
  if (!ctx_.pool) fail(Errc::InvalidArgument, "execution context has no pool");
  candidates_.resize(tasks_.size());
  features_.resize(tasks_.size());
  parallel_for(tasks_.size(), workers, [&](std::size_t c) {
    candidates_[c] = generator.generate(tasks_[c], m_);
    if (candidates_[c].size() != m_) fail(Errc::GeneratorFailure, "generator returned the wrong candidate count");
    for (const auto& d : candidates_[c]) features_[c].push_back(allocation_features(tasks_[c], d, probs, difficulty));
  });
}

FeatureVector RoutingTrainingEnv::decomp_features(std::size_t context) const {
  return task_features(tasks_.at(context).text.size());
}

const std::vector<FeatureVector>& RoutingTrainingEnv::alloc_features(std::size_t context, std::size_t candidate) const {
  return features_.at(context).at(candidate);
}

const Decomposition& RoutingTrainingEnv::candidate(std::size_t context, std::size_t slot) const {
  return candidates_.at(context).at(slot);
}

EnvOutcome RoutingTrainingEnv::run(std::size_t context, std::size_t candidate, std::span<const int> models,
                                   std::uint64_t seed) const {
  ExecutionContext ctx = ctx_;
  ctx.seed = seed;
  try {
    const auto trace = execute_chain(tasks_.at(context), candidates_.at(context).at(candidate), models, ctx);
    return EnvOutcome{trace.acc, trace.cost};
  } catch (const Error& e) {
    fail(Errc::EnvFailure, std::string("rollout on ") + tasks_.at(context).task_id + ": " + e.what());
  }
}

}  // namespace costroute

#include "costroute/execution.hpp"

#include "costroute/error.hpp"
#include "costroute/log.hpp"
#include "costroute/rng.hpp"

namespace costroute {

void PrmConfig::validate(const ModelPool& pool) const {
  if (!pool.valid_id(strong_model_id) || !pool.valid_id(threshold_model_id)) {
    fail(Errc::InvalidModel, "PRM strong/threshold model out of range");
  }
  if (pool.at(strong_model_id).capability_rank < pool.at(threshold_model_id).capability_rank) {
    fail(Errc::InvalidConfig, "PRM strong model must be at least as capable as the threshold model");
  }
}

PrmOutcome prm_verify(const StepRequest& request, const std::string& raw_result, const PrmConfig& prm,
                      const SubtaskExecutor& executor, const ModelPool& pool) {
  PrmOutcome out;
  out.final_result = raw_result;
  if (!prm.enabled) return out;
  if (pool.at(request.model_id).capability_rank >= pool.at(prm.threshold_model_id).capability_rank) return out;

  out.applied = true;
  StepRequest review_req = request;
  review_req.seed = derive_seed(request.seed, 0x50524dULL);
  try {
    auto review = executor.review(review_req, raw_result, prm.strong_model_id);
    out.usage = review.usage;
    out.cost = usage_cost(review.usage, pool.at(prm.strong_model_id));
    out.latency_ms = review.latency_ms;
    if (review.corrected) {
      out.corrected = true;
      out.final_result = std::move(review.output);
    }
  } catch (const Error& e) {
    out.warning = true;
    log_warning("review of " + request.task->task_id + " step " + std::to_string(request.subtask->index) +
                " passed through: " + e.what());
  }
  return out;
}

std::uint64_t step_seed(std::uint64_t seed, const std::string& task_id, std::size_t index) {
  return derive_seed(seed, hash_string(task_id), index);
}

RoutingTrace execute_chain(const TaskRecord& task, const Decomposition& decomposition, std::span<const int> assignments,
                           const ExecutionContext& ctx) {
  if (!ctx.pool || !ctx.executor || !ctx.checker || !ctx.integrator) {
    fail(Errc::InvalidArgument, "execution context is incomplete");
  }
  if (assignments.size() != decomposition.k()) {
    fail(Errc::InvalidArgument, "scheme has " + std::to_string(assignments.size()) + " assignments for " +
                                    std::to_string(decomposition.k()) + " subtasks");
  }
  if (ctx.prm.enabled) ctx.prm.validate(*ctx.pool);

  RoutingTrace trace;
  trace.task_id = task.task_id;
  trace.decomposition = decomposition;
  trace.scheme.task_id = task.task_id;
  trace.scheme.assignments.assign(assignments.begin(), assignments.end());

  std::vector<std::string> finals;
  std::string upstream;
  bool any_failed = false;
  for (std::size_t i = 0; i < decomposition.k(); ++i) {
    const int model_id = assignments[i];
    const auto& model = ctx.pool->at(model_id);
    StepRequest req{&task, &decomposition.subtasks[i], decomposition.k(), model_id, upstream,
                    step_seed(ctx.seed, task.task_id, i)};
    StepRecord rec;
    rec.model_id = model_id;
    try {
      auto res = ctx.executor->execute(req);
      rec.raw_result = std::move(res.output);
      rec.usage = res.usage;
      rec.cost = usage_cost(res.usage, model);
      rec.latency_ms = res.latency_ms;
    } catch (const Error& e) {
      log_warning("step " + std::to_string(i) + " of " + task.task_id + " failed: " + e.what());
      rec.failed = true;
      rec.raw_result = std::string(kStepFailedMarker);
    }

    if (rec.failed) {
      rec.final_result = rec.raw_result;
      any_failed = true;
      if (!trace.first_failed_step) trace.first_failed_step = i;
    } else {
      auto prm = prm_verify(req, rec.raw_result, ctx.prm, *ctx.executor, *ctx.pool);
      rec.prm_applied = prm.applied;
      rec.prm_corrected = prm.corrected;
      rec.prm_warning = prm.warning;
      rec.prm_usage = prm.usage;
      rec.prm_cost = prm.cost;
      rec.latency_ms += prm.latency_ms;
      rec.final_result = std::move(prm.final_result);
      if (!trace.first_failed_step) {
        auto verdict = ctx.executor->step_correct(req, rec.final_result);
        if (verdict && !*verdict) trace.first_failed_step = i;
      }
    }

    trace.cost += rec.cost + rec.prm_cost;
    trace.prm_cost += rec.prm_cost;
    trace.latency_ms += rec.latency_ms;
    upstream = rec.final_result;
    finals.push_back(rec.final_result);
    trace.steps.push_back(std::move(rec));
  }

  trace.final_answer = ctx.integrator->integrate(task, finals);
  trace.acc = !any_failed && ctx.checker->accepts(task, trace.final_answer);
  trace.scheme.acc = trace.acc;
  trace.scheme.cost = trace.cost;
  return trace;
}

ordered_json to_json(const RoutingTrace& trace) {
  ordered_json row;
  row["task_id"] = trace.task_id;
  row["subtasks"] = trace.decomposition.texts();
  row["assignments"] = trace.scheme.assignments;
  ordered_json steps = ordered_json::array();
  for (const auto& s : trace.steps) {
    ordered_json step;
    step["model_id"] = s.model_id;
    step["raw_result"] = s.raw_result;
    step["failed"] = s.failed;
    step["prm_applied"] = s.prm_applied;
    step["prm_corrected"] = s.prm_corrected;
    step["prm_warning"] = s.prm_warning;
    step["final_result"] = s.final_result;
    step["prompt_tokens"] = s.usage.prompt_tokens;
    step["completion_tokens"] = s.usage.completion_tokens;
    step["cost_millicents"] = s.cost.millicents;
    step["prm_prompt_tokens"] = s.prm_usage.prompt_tokens;
    step["prm_completion_tokens"] = s.prm_usage.completion_tokens;
    step["prm_cost_millicents"] = s.prm_cost.millicents;
    step["latency_ms"] = s.latency_ms;
    steps.push_back(std::move(step));
  }
  row["steps"] = std::move(steps);
  row["final_answer"] = trace.final_answer;
  row["acc"] = trace.acc ? 1 : 0;
  row["cost_cents"] = trace.cost.cents();
  row["cost_millicents"] = trace.cost.millicents;
  row["prm_cost_millicents"] = trace.prm_cost.millicents;
  row["latency_ms"] = trace.latency_ms;
  if (trace.baseline_acc) row["baseline_acc"] = *trace.baseline_acc ? 1 : 0;
  if (trace.decomposition.score) row["decomposition_score"] = *trace.decomposition.score;
  return row;
}

}  // namespace costroute

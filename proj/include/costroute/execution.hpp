#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "costroute/interfaces.hpp"
#include "costroute/io.hpp"
#include "costroute/model_pool.hpp"
#include "costroute/task.hpp"

namespace costroute {

/// Procedural review: steps run on a model below the threshold capability are
/// checked (and possibly rewritten) by the strong model.
struct PrmConfig {
  bool enabled = false;
  int strong_model_id = 0;
  int threshold_model_id = 0;

  void validate(const ModelPool& pool) const;
};

struct PrmOutcome {
  bool applied = false;
  bool corrected = false;
  /// Strong model failed; the raw result passed through unverified.
  bool warning = false;
  std::string final_result;
  TokenUsage usage;
  Cost cost;
  double latency_ms = 0.0;
};

PrmOutcome prm_verify(const StepRequest& request, const std::string& raw_result, const PrmConfig& prm,
                      const SubtaskExecutor& executor, const ModelPool& pool);

struct StepRecord {
  int model_id = 0;
  std::string raw_result;
  bool failed = false;
  bool prm_applied = false;
  bool prm_corrected = false;
  bool prm_warning = false;
  std::string final_result;
  TokenUsage usage;
  Cost cost;
  TokenUsage prm_usage;
  Cost prm_cost;
  double latency_ms = 0.0;
};

struct RoutingTrace {
  std::string task_id;
  Decomposition decomposition;
  AllocationScheme scheme;
  std::vector<StepRecord> steps;
  std::string final_answer;
  bool acc = false;
  /// Step costs plus review costs.
  Cost cost;
  Cost prm_cost;
  double latency_ms = 0.0;
  /// First step known to be wrong (executor failure or simulator verdict).
  std::optional<std::size_t> first_failed_step;
  /// Correctness with every step on the baseline model, when measured.
  std::optional<bool> baseline_acc;
};

struct ExecutionContext {
  const ModelPool* pool = nullptr;
  const SubtaskExecutor* executor = nullptr;
  const AnswerChecker* checker = nullptr;
  const AnswerIntegrator* integrator = nullptr;
  PrmConfig prm;
  std::uint64_t seed = 0;
};

/// Seed used for step `index` of `task_id`; independent of the model so that
/// paired runs see identical draws.
std::uint64_t step_seed(std::uint64_t seed, const std::string& task_id, std::size_t index);

/// Runs the chain strictly in order, feeding each final result forward. Failed
/// steps pass kStepFailedMarker downstream and force acc = 0.
RoutingTrace execute_chain(const TaskRecord& task, const Decomposition& decomposition, std::span<const int> assignments,
                           const ExecutionContext& ctx);

ordered_json to_json(const RoutingTrace& trace);

}  // namespace costroute

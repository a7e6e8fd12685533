#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "costroute/task.hpp"

namespace costroute {

/// Placeholder result passed downstream when a step could not be executed.
inline constexpr std::string_view kStepFailedMarker = "<step-failed>";

struct StepRequest {
  const TaskRecord* task = nullptr;
  const Subtask* subtask = nullptr;
  std::size_t chain_length = 0;
  int model_id = 0;
  /// Final result of the previous step; empty for the first step.
  std::string upstream;
  std::uint64_t seed = 0;
};

struct StepResult {
  std::string output;
  TokenUsage usage;
  double latency_ms = 0.0;
};

struct ReviewResult {
  bool corrected = false;
  std::string output;
  TokenUsage usage;
  double latency_ms = 0.0;
};

/// Runs one subtask on one model. Implementations throw costroute::Error on
/// backend failure and must be safe to call from several threads.
class SubtaskExecutor {
 public:
  virtual ~SubtaskExecutor() = default;
  virtual StepResult execute(const StepRequest& request) const = 0;
  /// Has `strong_model_id` judge `candidate`; returns a corrected result when
  /// the candidate is deemed wrong.
  virtual ReviewResult review(const StepRequest& request, std::string_view candidate, int strong_model_id) const = 0;
  /// Per-step verdict when the backend can tell (simulators); nullopt otherwise.
  virtual std::optional<bool> step_correct(const StepRequest&, std::string_view) const { return std::nullopt; }
};

class AnswerChecker {
 public:
  virtual ~AnswerChecker() = default;
  virtual bool accepts(const TaskRecord& task, std::string_view answer) const = 0;
};

/// Whitespace-trimmed exact match against the task's ground truth.
class ExactMatchChecker final : public AnswerChecker {
 public:
  bool accepts(const TaskRecord& task, std::string_view answer) const override;
};

class AnswerIntegrator {
 public:
  virtual ~AnswerIntegrator() = default;
  virtual std::string integrate(const TaskRecord& task, std::span<const std::string> step_results) const = 0;
};

class LastStepIntegrator final : public AnswerIntegrator {
 public:
  std::string integrate(const TaskRecord& task, std::span<const std::string> step_results) const override;
};

class CoherenceJudge {
 public:
  virtual ~CoherenceJudge() = default;
  /// True when the adjacent pair lacks a logical connection.
  virtual bool unrelated(std::string_view task_text, std::string_view first, std::string_view second) const = 0;
};

class TokenProbSource {
 public:
  virtual ~TokenProbSource() = default;
  virtual std::vector<double> token_probs(const TaskRecord& task, const Subtask& subtask) const = 0;
};

class Decomposer {
 public:
  virtual ~Decomposer() = default;
  virtual Decomposition decompose(const TaskRecord& task) const = 0;
};

class DecompositionGenerator {
 public:
  virtual ~DecompositionGenerator() = default;
  /// Returns `m` candidates with generation_order 0..m-1.
  virtual std::vector<Decomposition> generate(const TaskRecord& task, std::size_t m) const = 0;
};

}  // namespace costroute

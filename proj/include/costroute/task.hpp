#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "costroute/model_pool.hpp"

namespace costroute {

struct TaskRecord {
  std::string task_id;
  std::string text;
  std::string ground_truth;
  std::string benchmark_tag;
};

/// Hidden ground truth carried by simulated subtasks; real backends ignore it.
struct SimAnnotation {
  double difficulty = 0.0;
  TokenUsage tokens;
};

struct Subtask {
  std::size_t index = 0;
  std::string text;
  std::optional<std::int64_t> token_count_eval;
  std::optional<SimAnnotation> sim;
};

/// Ordered subtask chain plus its quality signals (unset until evaluated).
struct Decomposition {
  std::string task_id;
  std::vector<Subtask> subtasks;
  std::optional<int> coe_pairs;
  std::optional<bool> correctness;
  std::optional<double> score;
  /// Position within the sample set it was generated in.
  std::size_t generation_order = 0;

  std::size_t k() const noexcept { return subtasks.size(); }
  std::vector<std::string> texts() const;
};

/// Subtask-to-model assignment and its evaluated outcome.
struct AllocationScheme {
  std::string task_id;
  std::vector<int> assignments;
  std::optional<bool> acc;
  std::optional<Cost> cost;
  std::size_t iteration = 0;
};

/// Builds a decomposition with contiguous subtask indices.
Decomposition make_decomposition(std::string task_id, const std::vector<std::string>& texts);

}  // namespace costroute

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "costroute/execution.hpp"
#include "costroute/interfaces.hpp"
#include "costroute/io.hpp"
#include "costroute/model_pool.hpp"
#include "costroute/task.hpp"

namespace costroute {

enum class Bucket { Easy, Medium, Hard };

/// "G_E", "G_M", "G_H".
const char* bucket_name(Bucket b) noexcept;
Bucket bucket_from_name(std::string_view name);

/// Easy subtasks start in the small-model group, medium in the middle group,
/// hard in the large group.
Tier tier_for(Bucket b) noexcept;

struct DifficultyConfig {
  double alpha = 0.5;
  double tau1 = 0.75;
  double tau2 = 0.45;

  void validate() const;
};

struct DifficultyEstimate {
  std::size_t subtask_index = 0;
  double alpha = 0.5;
  double quantile_value = 0.0;
  std::optional<Bucket> bucket;
};

/// Nearest-rank quantile: the ceil(alpha * n)-th smallest value.
double nearest_rank_quantile(std::span<const double> values, double alpha);

DifficultyEstimate estimate_difficulty(const TaskRecord& task, const Subtask& subtask, const TokenProbSource& source,
                                       double alpha);

/// Higher token probability means easier; boundary values go to the harder bucket.
Bucket bucket_difficulty(double value, double tau1, double tau2);

/// Estimates and buckets every subtask of `d`.
std::vector<DifficultyEstimate> estimate_all(const TaskRecord& task, const Decomposition& d,
                                             const TokenProbSource& source, const DifficultyConfig& cfg);

AllocationScheme initial_scheme(std::span<const Bucket> buckets, const GroupedPool& grouped);

inline constexpr int kMaxSearchLimit = 20;

struct SchemeOutcome {
  bool acc = false;
  Cost cost;
  /// First failing step when the backend can localize failure.
  std::optional<std::size_t> first_failed_step;
};

using SchemeEvaluator = std::function<SchemeOutcome(const std::vector<int>& assignments)>;

struct SearchTrace {
  std::vector<AllocationScheme> schemes;
  AllocationScheme result;
  bool exhausted = false;
};

/// Grouped search from the initial scheme. Within-group steps move assignments
/// one model down after a success and one model up after a failure; at a group
/// floor or ceiling subtasks change tier. A failed descent reverts the first
/// failing subtask to its last working model and freezes it. Evaluations are
/// capped at `limit` (<= 20); the result is the cheapest correct scheme seen,
/// else the last one evaluated.
SearchTrace grouped_search(const std::string& task_id, std::span<const Bucket> buckets, const GroupedPool& grouped,
                           const SchemeEvaluator& evaluate, int limit = kMaxSearchLimit);

/// Evaluator that executes the full chain for each candidate scheme.
SchemeEvaluator chain_evaluator(const TaskRecord& task, const Decomposition& d, const ExecutionContext& ctx);

struct AllocDatasetEntry {
  std::string task_id;
  std::vector<std::string> subtasks;
  std::vector<DifficultyEstimate> estimates;
  std::vector<int> labels;
};

struct AllocBuildOptions {
  DifficultyConfig difficulty;
  int limit = kMaxSearchLimit;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool keep_traces = false;
};

struct AllocBuildResult {
  std::vector<AllocDatasetEntry> entries;
  std::vector<std::string> skipped_task_ids;
  /// Search trace per input task (including skipped ones) when keep_traces is set.
  std::vector<SearchTrace> traces;
};

/// Searches every task and keeps only those that reached Acc = 1.
AllocBuildResult build_alloc_dataset(std::span<const TaskRecord> tasks, const Decomposer& decomposer,
                                     const TokenProbSource& probs, const GroupedPool& grouped,
                                     const ExecutionContext& ctx, const AllocBuildOptions& options);

ordered_json to_json(const AllocDatasetEntry& entry);
AllocDatasetEntry alloc_entry_from_json(const nlohmann::json& row);
ordered_json to_json(const SearchTrace& trace);

}  // namespace costroute

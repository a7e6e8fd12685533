#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "costroute/interfaces.hpp"
#include "costroute/io.hpp"
#include "costroute/task.hpp"

namespace costroute {

/// Weights of the decomposition quality score; all strictly positive.
struct ScoreWeights {
  double w_c = 1.0;   // per subtask
  double w_p = 0.01;  // per evaluation-model token
  double w_d = 5.0;   // per incoherent adjacent pair

  void validate() const;
};

/// w_c * k + w_p * sum(tokens) + w_d * coe_pairs. Lower is better.
double compute_score(const Decomposition& d, const ScoreWeights& w);

/// compute_score, also stored on `d`.
double score_decomposition(Decomposition& d, const ScoreWeights& w);

/// Counts adjacent pairs the judge flags as unrelated and stores the count on `d`.
int evaluate_coherence(Decomposition& d, const TaskRecord& task, const CoherenceJudge& judge);

/// Lowercased alphanumeric tokens with stop words removed.
std::vector<std::string> content_tokens(std::string_view text);

/// Flags a pair unrelated iff the two steps share no content token. Ignores
/// the task text.
class LexicalJudge final : public CoherenceJudge {
 public:
  bool unrelated(std::string_view task_text, std::string_view first, std::string_view second) const override;
};

struct CorrectnessCheck {
  bool correct = false;
  /// Set when the executor failed somewhere in the chain.
  bool executor_failed = false;
};

/// Solves the task along `d` with every step on `baseline_model_id`, stores the
/// per-step token totals and C(d) on `d`. Executor failures yield C(d) = 0.
CorrectnessCheck check_correctness(const TaskRecord& task, Decomposition& d, const SubtaskExecutor& executor,
                                   const AnswerChecker& checker, int baseline_model_id, std::uint64_t seed = 0);

/// Rejection-sampling choice: lowest score among correct samples, else lowest
/// score overall. Ties: fewer subtasks, then earlier generation order.
std::size_t select_best_index(std::span<const Decomposition> samples);
const Decomposition& select_best(std::span<const Decomposition> samples);

struct DecompDatasetEntry {
  std::string task_id;
  std::string task_text;
  Decomposition chosen;
  std::size_t rejected_count = 0;
  ScoreWeights weights;
};

struct DecompBuildOptions {
  std::size_t samples_per_task = 4;
  ScoreWeights weights;
  int baseline_model_id = 0;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool keep_candidates = false;
};

struct DecompBuildResult {
  std::vector<DecompDatasetEntry> entries;
  std::vector<std::string> skipped_task_ids;
  /// Scored candidates per entry, only when keep_candidates is set.
  std::vector<std::vector<Decomposition>> candidates;
};

DecompBuildResult build_decomp_dataset(std::span<const TaskRecord> tasks, const DecompositionGenerator& generator,
                                       const CoherenceJudge& judge, const SubtaskExecutor& executor,
                                       const AnswerChecker& checker, const DecompBuildOptions& options);

ordered_json to_json(const DecompDatasetEntry& entry);
DecompDatasetEntry decomp_entry_from_json(const nlohmann::json& row);

}  // namespace costroute

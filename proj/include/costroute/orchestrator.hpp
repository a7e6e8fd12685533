#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "costroute/allocation_search.hpp"
#include "costroute/decomposition.hpp"
#include "costroute/execution.hpp"
#include "costroute/grpo.hpp"
#include "costroute/interfaces.hpp"
#include "costroute/io.hpp"

namespace costroute {

class Allocator {
 public:
  virtual ~Allocator() = default;
  virtual std::vector<int> allocate(const TaskRecord& task, const Decomposition& d) const = 0;
};

/// Every subtask on one model.
class FixedAllocator final : public Allocator {
 public:
  explicit FixedAllocator(int model_id) : model_id_(model_id) {}
  std::vector<int> allocate(const TaskRecord& task, const Decomposition& d) const override;

 private:
  int model_id_;
};

/// Runs the grouped search online and routes with its result.
class SearchAllocator final : public Allocator {
 public:
  SearchAllocator(const TokenProbSource& probs, const GroupedPool& grouped, const ExecutionContext& ctx,
                  DifficultyConfig difficulty, int limit = kMaxSearchLimit)
      : probs_(&probs), grouped_(&grouped), ctx_(ctx), difficulty_(difficulty), limit_(limit) {}
  std::vector<int> allocate(const TaskRecord& task, const Decomposition& d) const override;

 private:
  const TokenProbSource* probs_;
  const GroupedPool* grouped_;
  ExecutionContext ctx_;
  DifficultyConfig difficulty_;
  int limit_;
};

/// Per-subtask policy features of a decomposition.
std::vector<FeatureVector> allocation_features(const TaskRecord& task, const Decomposition& d,
                                               const TokenProbSource& probs, const DifficultyConfig& cfg);

/// Smallest action whose cumulative probability reaches `confidence`; the
/// argmax when confidence is 0.
std::size_t decode_action(std::span<const double> probs, double confidence);

class PolicyAllocator final : public Allocator {
 public:
  PolicyAllocator(const PolicyParams& policy, const TokenProbSource& probs, DifficultyConfig difficulty,
                  double confidence = 0.0);
  std::vector<int> allocate(const TaskRecord& task, const Decomposition& d) const override;

 private:
  const PolicyParams* policy_;
  const TokenProbSource* probs_;
  DifficultyConfig difficulty_;
  double confidence_;
};

/// Always returns candidate `slot` of the generator.
class SlotDecomposer final : public Decomposer {
 public:
  SlotDecomposer(const DecompositionGenerator& generator, std::size_t slot) : generator_(&generator), slot_(slot) {}
  Decomposition decompose(const TaskRecord& task) const override;

 private:
  const DecompositionGenerator* generator_;
  std::size_t slot_;
};

/// Picks the most probable of `m` generated candidates under the decomposer head.
class PolicyDecomposer final : public Decomposer {
 public:
  PolicyDecomposer(const DecompositionGenerator& generator, const PolicyParams& policy);
  Decomposition decompose(const TaskRecord& task) const override;

 private:
  const DecompositionGenerator* generator_;
  const PolicyParams* policy_;
};

/// Replays stored decompositions by task id. With a generator, the stored texts
/// are matched against its first `m` candidates so simulator annotations carry
/// over; unmatched or unknown tasks fall back to candidate 0.
class DatasetDecomposer final : public Decomposer {
 public:
  DatasetDecomposer(std::map<std::string, std::vector<std::string>> texts, const DecompositionGenerator* generator,
                    std::size_t m)
      : texts_(std::move(texts)), generator_(generator), m_(m) {}
  Decomposition decompose(const TaskRecord& task) const override;

 private:
  std::map<std::string, std::vector<std::string>> texts_;
  const DecompositionGenerator* generator_;
  std::size_t m_;
};

/// Decomposes, allocates, and executes one task.
RoutingTrace route_task(const TaskRecord& task, const Decomposer& decomposer, const Allocator& allocator,
                        const ExecutionContext& ctx);

struct RouteOptions {
  std::size_t workers = 1;
  /// Also run every decomposition with all steps on this model (PRM off).
  std::optional<int> baseline_model_id;
  /// Score decompositions with these weights and judge when set.
  std::optional<ScoreWeights> score_weights;
  const CoherenceJudge* judge = nullptr;
};

struct RouteResult {
  std::vector<RoutingTrace> traces;
  std::vector<std::string> failed_task_ids;
};

/// Routes every task; tasks whose decomposition or allocation fails are skipped
/// and listed.
RouteResult route_all(std::span<const TaskRecord> tasks, const Decomposer& decomposer, const Allocator& allocator,
                      const ExecutionContext& ctx, const RouteOptions& options);

struct MetricsReport {
  double acc = 0.0;
  double c_api_cents = 0.0;
  double prm_cost_cents = 0.0;
  std::optional<double> mae;
  std::optional<double> c_d;
  std::optional<double> mean_score;
  double mean_latency_ms = 0.0;
  std::size_t n_tasks = 0;
  std::size_t n_labeled_subtasks = 0;
};

using LabelMap = std::map<std::string, std::vector<int>>;

MetricsReport compute_metrics(std::span<const RoutingTrace> traces, const LabelMap* labels = nullptr);

/// Mean absolute index error between paired prediction and label vectors.
double mean_absolute_error(std::span<const int> predicted, std::span<const int> labels);

ordered_json to_json(const MetricsReport& report);

/// Training environment over generator candidates executed through `ctx`.
class RoutingTrainingEnv final : public TrainingEnv {
 public:
  RoutingTrainingEnv(std::vector<TaskRecord> tasks, const DecompositionGenerator& generator, std::size_t m,
                     const TokenProbSource& probs, const DifficultyConfig& difficulty, const ExecutionContext& ctx,
                     std::size_t workers = 1);

  std::size_t num_contexts() const override { return tasks_.size(); }
  std::string context_id(std::size_t context) const override { return tasks_.at(context).task_id; }
  std::size_t num_candidates() const override { return m_; }
  std::size_t num_models() const override { return ctx_.pool->size(); }
  FeatureVector decomp_features(std::size_t context) const override;
  const std::vector<FeatureVector>& alloc_features(std::size_t context, std::size_t candidate) const override;
  EnvOutcome run(std::size_t context, std::size_t candidate, std::span<const int> models,
                 std::uint64_t seed) const override;

  const Decomposition& candidate(std::size_t context, std::size_t slot) const;

 private:
  std::vector<TaskRecord> tasks_;
  std::size_t m_;
  ExecutionContext ctx_;
  std::vector<std::vector<Decomposition>> candidates_;
  std::vector<std::vector<std::vector<FeatureVector>>> features_;
};

}  // namespace costroute

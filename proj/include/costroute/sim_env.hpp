#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "costroute/interfaces.hpp"
#include "costroute/io.hpp"
#include "costroute/model_pool.hpp"
#include "costroute/task.hpp"

namespace costroute {

struct SimTask {
  std::string task_id;
  std::vector<double> difficulties;
  std::vector<TokenUsage> tokens;

  std::size_t k() const noexcept { return difficulties.size(); }
};

struct DifficultyDist {
  enum class Kind { Uniform, Point };
  Kind kind = Kind::Uniform;
  double lo = 0.0;
  double hi = 1.0;

  static DifficultyDist uniform(double lo = 0.0, double hi = 1.0) { return {Kind::Uniform, lo, hi}; }
  static DifficultyDist point(double v) { return {Kind::Point, v, v}; }
  /// "uniform", "uniform:LO,HI" or "point:V".
  static DifficultyDist parse(std::string_view spec);
  std::string to_string() const;
};

std::vector<SimTask> gen_tasks(std::uint64_t seed, std::size_t n, int k_min, int k_max, const DifficultyDist& dist);

ordered_json to_json(const SimTask& task);
SimTask sim_task_from_json(const nlohmann::json& row);
std::vector<SimTask> load_sim_tasks(const std::filesystem::path& path);

/// Task record for a simulated task; ground truth is the final step's correct output.
TaskRecord sim_task_record(const SimTask& task);

enum class SimMode { Deterministic, Sigmoid };

struct SimModelBehavior {
  SimMode mode = SimMode::Deterministic;
  double gamma = 8.0;
  /// Capability in [0, 1] per model id, nondecreasing in rank.
  std::vector<double> capability;

  /// Default capability map rank / (n - 1).
  static SimModelBehavior for_pool(const ModelPool& pool, SimMode mode = SimMode::Deterministic, double gamma = 8.0);
  double capability_of(int model_id) const;
  void validate() const;
};

struct SimStepOutcome {
  bool correct = false;
  TokenUsage usage;
};

/// Deterministic: correct iff capability >= difficulty. Sigmoid: correct with
/// probability 1 / (1 + exp(-gamma * (capability - difficulty))), drawn from `seed`.
SimStepOutcome simulate_step(double difficulty, const TokenUsage& profile, int model_id,
                             const SimModelBehavior& behavior, std::uint64_t seed);

/// `count` per-token probabilities centred on 1 - difficulty.
std::vector<double> sim_token_probs(double difficulty, std::size_t count, std::uint64_t seed);

/// Exhaustive minimum-cost correct scheme (Deterministic mode, k <= 3, pool <= 9).
/// Ties go to the lexicographically smallest assignment. Returns acc = false
/// when no scheme succeeds.
AllocationScheme brute_force_optimal(const SimTask& task, const ModelPool& pool, const SimModelBehavior& behavior);

/// Registry of simulated tasks shared by the simulated backends.
class SimWorld {
 public:
  SimWorld(std::vector<SimTask> tasks, const ModelPool& pool, SimModelBehavior behavior, std::uint64_t seed);

  const SimTask& task(const std::string& task_id) const;
  const std::vector<SimTask>& tasks() const noexcept { return tasks_; }
  std::vector<TaskRecord> task_records() const;
  const ModelPool& pool() const noexcept { return *pool_; }
  const SimModelBehavior& behavior() const noexcept { return behavior_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::vector<SimTask> tasks_;
  std::map<std::string, std::size_t> index_;
  const ModelPool* pool_;
  SimModelBehavior behavior_;
  std::uint64_t seed_;
};

/// Expected output of a correct step (the last step yields the ground truth).
std::string sim_expected_output(const TaskRecord& task, std::size_t index, std::size_t chain_length);

class SimExecutor final : public SubtaskExecutor {
 public:
  explicit SimExecutor(const SimWorld& world) : world_(&world) {}

  StepResult execute(const StepRequest& request) const override;
  ReviewResult review(const StepRequest& request, std::string_view candidate, int strong_model_id) const override;
  std::optional<bool> step_correct(const StepRequest& request, std::string_view output) const override;

 private:
  const SimWorld* world_;
};

/// Candidate decompositions in fixed style slots: 0 one subtask per latent
/// stage, 1 adjacent stages merged (harder), 2 stages split in halves, 3 an
/// unrelated step inserted. Slots beyond 4 repeat the styles with another variant.
class SimDecompositionGenerator final : public DecompositionGenerator {
 public:
  explicit SimDecompositionGenerator(const SimWorld& world) : world_(&world) {}

  std::vector<Decomposition> generate(const TaskRecord& task, std::size_t m) const override;
  Decomposition candidate(const TaskRecord& task, std::size_t slot) const;

 private:
  const SimWorld* world_;
};

class SimTokenProbSource final : public TokenProbSource {
 public:
  explicit SimTokenProbSource(const SimWorld& world) : world_(&world) {}

  std::vector<double> token_probs(const TaskRecord& task, const Subtask& subtask) const override;

 private:
  const SimWorld* world_;
};

}  // namespace costroute

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "costroute/allocation_search.hpp"
#include "costroute/io.hpp"
#include "costroute/rng.hpp"

namespace costroute {

inline constexpr std::size_t kFeatureDim = 7;

/// quantile, bucket one-hot (E, M, H), chain position, text length, bias.
using FeatureVector = std::array<double, kFeatureDim>;

FeatureVector subtask_features(double quantile, Bucket bucket, std::size_t position, std::size_t chain_length,
                               std::size_t text_length);
/// Task-level context for the decomposer head.
FeatureVector task_features(std::size_t text_length);

enum class ActionKind { Allocator, Decomposer };

const char* action_kind_name(ActionKind kind) noexcept;

struct ActionSpace {
  ActionKind kind = ActionKind::Allocator;
  std::size_t size = 1;

  friend bool operator==(const ActionSpace&, const ActionSpace&) = default;
};

/// Softmax-linear categorical policy; weights are row-major actions x kFeatureDim.
struct PolicyParams {
  ActionSpace action_space;
  std::vector<double> weights;

  static PolicyParams zeros(ActionSpace space);

  std::size_t actions() const noexcept { return action_space.size; }
  double& at(std::size_t action, std::size_t feature) { return weights[action * kFeatureDim + feature]; }
  double at(std::size_t action, std::size_t feature) const { return weights[action * kFeatureDim + feature]; }
  std::vector<double> logits(const FeatureVector& x) const;
  std::vector<double> probs(const FeatureVector& x) const;
  void validate() const;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

std::vector<double> softmax(std::span<const double> logits);

/// Draws an index from `probs` with one uniform variate.
std::size_t sample_index(std::span<const double> probs, Rng& rng);
std::size_t argmax(std::span<const double> values);

std::string format_checkpoint(const PolicyParams& params);
PolicyParams parse_checkpoint(std::string_view text);
void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);

struct PolicyStep {
  FeatureVector features{};
  std::size_t action = 0;
  double logprob_old = 0.0;
};

struct Rollout {
  std::vector<PolicyStep> steps;
  double reward = 0.0;
  Cost cost;
};

struct TrajectoryGroup {
  std::string context_id;
  std::vector<Rollout> rollouts;
  /// One advantage per rollout, shared by all of its steps.
  std::vector<double> advantages;
};

struct GrpoConfig {
  std::size_t group_size = 8;
  double clip_eps = 0.2;
  double kl_beta = 0.01;
  double learning_rate = 0.05;
  std::size_t iterations = 4;
  std::size_t inner_steps = 4;
  std::size_t tasks_per_iteration = 64;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
};

/// Group-normalized rewards (population std); all zero when the std is zero.
std::vector<double> group_advantages(std::span<const double> rewards);

double clipped_step_objective(double ratio, double adv, double eps);

/// KL(p || ref) with 0 log 0 = 0.
double kl_penalty(std::span<const double> policy_probs, std::span<const double> ref_probs);

struct ObjectiveResult {
  double objective = 0.0;
  std::vector<double> gradient;
  /// Step-averaged KL(pi || ref) over the batch.
  double mean_kl = 0.0;
};

/// Clipped surrogate minus beta * KL, averaged per rollout over its steps, then
/// over rollouts and groups, with the analytic gradient in the weights.
ObjectiveResult grpo_objective_and_gradient(std::span<const TrajectoryGroup> batch, const PolicyParams& params,
                                            const PolicyParams& ref, const GrpoConfig& cfg);

/// One ascent step of size cfg.learning_rate.
PolicyParams update_policy(const PolicyParams& params, std::span<const TrajectoryGroup> batch,
                           const PolicyParams& ref, const GrpoConfig& cfg, ObjectiveResult* info = nullptr);

struct LabeledExample {
  FeatureVector features{};
  std::size_t label = 0;
};

struct SupervisedConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 1500;
};

/// Full-batch Adam ascent on the mean log-likelihood of the labels.
/// Returns the final mean negative log-likelihood.
double fit_supervised(PolicyParams& params, std::span<const LabeledExample> examples, const SupervisedConfig& cfg);

struct EnvOutcome {
  bool correct = false;
  Cost cost;
};

/// Environment for co-training: each context offers decomposition candidates
/// with per-subtask features and executes a chosen candidate and allocation.
class TrainingEnv {
 public:
  virtual ~TrainingEnv() = default;
  virtual std::size_t num_contexts() const = 0;
  virtual std::string context_id(std::size_t context) const = 0;
  virtual std::size_t num_candidates() const = 0;
  virtual std::size_t num_models() const = 0;
  virtual FeatureVector decomp_features(std::size_t context) const = 0;
  virtual const std::vector<FeatureVector>& alloc_features(std::size_t context, std::size_t candidate) const = 0;
  /// Must be thread-safe; throws costroute::Error on failure.
  virtual EnvOutcome run(std::size_t context, std::size_t candidate, std::span<const int> models,
                         std::uint64_t seed) const = 0;
};

enum class Decoding { Sample, Greedy };

struct PolicyEvaluation {
  double mean_reward = 0.0;
  double mean_cost_cents = 0.0;
};

/// Mean reward and cost of the policy pair over every context.
PolicyEvaluation evaluate_policies(const TrainingEnv& env, const PolicyParams& decomp, const PolicyParams& alloc,
                                   Decoding decoding, std::uint64_t seed, std::size_t workers = 1);

struct HistoryEntry {
  std::size_t round = 0;
  ActionKind module = ActionKind::Decomposer;
  double mean_reward = 0.0;
  double mean_cost_cents = 0.0;
  double objective = 0.0;
  double kl = 0.0;
};

ordered_json to_json(const HistoryEntry& entry);

struct CotrainResult {
  PolicyParams decomp;
  PolicyParams alloc;
  std::vector<HistoryEntry> history;
  /// Set when an environment failure stopped training early.
  bool aborted = false;
  std::string abort_reason;
};

/// Alternating training: odd rounds update the decomposer with the allocator
/// frozen, even rounds the reverse. The reference policy is the trained
/// module's parameters at the start of each round.
CotrainResult cotrain(const PolicyParams& decomp, const PolicyParams& alloc, const TrainingEnv& env,
                      const GrpoConfig& cfg, std::size_t outer_rounds);

}  // namespace costroute

#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace costroute {

enum class Deployment { Local, Cloud };

const char* deployment_name(Deployment d) noexcept;

/// Monetary amount carried as integer milli-cents (1/1000 of a US cent).
struct Cost {
  std::int64_t millicents = 0;

  double cents() const noexcept { return static_cast<double>(millicents) / 1000.0; }

  Cost& operator+=(Cost other) noexcept {
    millicents += other.millicents;
    return *this;
  }
  friend Cost operator+(Cost a, Cost b) noexcept { return Cost{a.millicents + b.millicents}; }
  friend auto operator<=>(const Cost&, const Cost&) = default;
};

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  std::int64_t total() const noexcept { return prompt_tokens + completion_tokens; }
  TokenUsage& operator+=(const TokenUsage& other) noexcept {
    prompt_tokens += other.prompt_tokens;
    completion_tokens += other.completion_tokens;
    return *this;
  }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct ModelSpec {
  int id = 0;
  std::string name;
  int capability_rank = 0;
  Deployment deployment = Deployment::Local;
  // Prices in milli-cents per 1000 tokens.
  std::int64_t price_in_mc = 0;
  std::int64_t price_out_mc = 0;
  std::string endpoint;
  std::string api_key_env;

  double price_in_cents() const noexcept { return static_cast<double>(price_in_mc) / 1000.0; }
  double price_out_cents() const noexcept { return static_cast<double>(price_out_mc) / 1000.0; }
};

/// Capability-ordered, immutable model registry.
class ModelPool {
 public:
  /// Validates every ModelSpec/ModelPool invariant; ids and ranks must already
  /// equal list positions.
  ModelPool(std::vector<ModelSpec> models, int eval_model_id);

  std::size_t size() const noexcept { return models_.size(); }
  const std::vector<ModelSpec>& models() const noexcept { return models_; }
  const ModelSpec& at(int id) const;
  bool valid_id(int id) const noexcept { return id >= 0 && static_cast<std::size_t>(id) < models_.size(); }
  int max_id() const noexcept { return static_cast<int>(models_.size()) - 1; }
  int eval_model_id() const noexcept { return eval_model_id_; }

  std::vector<ModelSpec> local_models() const;
  std::vector<ModelSpec> cloud_models() const;

 private:
  std::vector<ModelSpec> models_;
  int eval_model_id_ = 0;
};

/// Parses the pool config document (JSON). Model ids follow listed order.
ModelPool load_pool(std::string_view document);
ModelPool load_pool_file(const std::filesystem::path& path);

enum class Tier { Small = 0, Medium = 1, Large = 2 };

struct GroupedPool {
  std::vector<ModelSpec> slm_group;
  std::vector<ModelSpec> mlm_group;
  std::vector<ModelSpec> llm_group;

  const std::vector<ModelSpec>& group(Tier tier) const noexcept;
  Tier tier_of(int model_id) const;
  int min_id(Tier tier) const { return group(tier).front().id; }
  int max_id(Tier tier) const { return group(tier).back().id; }
};

/// Contiguous three-way split; remainder models go to the lower groups.
GroupedPool partition_groups(const ModelPool& pool);

/// Lower median of a capability-ordered group.
const ModelSpec& medium_model(std::span<const ModelSpec> group);

/// Exact cost of one call; the sub-milli-cent remainder is rounded half-up.
Cost usage_cost(const TokenUsage& usage, const ModelSpec& model);

}  // namespace costroute

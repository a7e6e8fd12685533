#include "costroute/model_pool.hpp"

#include <cmath>
#include <set>

#include "costroute/error.hpp"
#include "costroute/io.hpp"

namespace costroute {

const char* deployment_name(Deployment d) noexcept {
  return d == Deployment::Local ? "local" : "cloud";
}

ModelPool::ModelPool(std::vector<ModelSpec> models, int eval_model_id)
    : models_(std::move(models)), eval_model_id_(eval_model_id) {
  if (models_.empty()) fail(Errc::InvalidArgument, "model pool is empty");
  std::set<std::string> names;
  for (std::size_t i = 0; i < models_.size(); ++i) {
    const auto& m = models_[i];
    if (m.id != static_cast<int>(i) || m.capability_rank != static_cast<int>(i)) {
      fail(Errc::InvalidModel, "model '" + m.name + "' id/rank must equal its position " + std::to_string(i));
    }
    if (!names.insert(m.name).second) fail(Errc::DuplicateName, "duplicate model name '" + m.name + "'");
    if (m.price_in_mc < 0 || m.price_out_mc < 0) fail(Errc::NegativePrice, "model '" + m.name + "'");
    if (m.deployment == Deployment::Local && (m.price_in_mc != 0 || m.price_out_mc != 0)) {
      fail(Errc::LocalWithNonzeroPrice, "model '" + m.name + "' is local but priced");
    }
  }
  if (!valid_id(eval_model_id_)) {
    fail(Errc::InvalidModel, "eval_model_id " + std::to_string(eval_model_id_) + " out of range");
  }
}

const ModelSpec& ModelPool::at(int id) const {
  if (!valid_id(id)) fail(Errc::InvalidModel, "model id " + std::to_string(id) + " out of range");
  return models_[static_cast<std::size_t>(id)];
}

std::vector<ModelSpec> ModelPool::local_models() const {
  std::vector<ModelSpec> out;
  for (const auto& m : models_)
    if (m.deployment == Deployment::Local) out.push_back(m);
  return out;
}

std::vector<ModelSpec> ModelPool::cloud_models() const {
  std::vector<ModelSpec> out;
  for (const auto& m : models_)
    if (m.deployment == Deployment::Cloud) out.push_back(m);
  return out;
}

namespace {

std::int64_t parse_price(const nlohmann::json& entry, const char* key, const std::string& name) {
  if (!entry.contains(key)) return 0;
  const auto& v = entry.at(key);
  if (!v.is_number()) fail(Errc::Parse, std::string(key) + " of '" + name + "' is not a number");
  const double cents = v.get<double>();
  if (!std::isfinite(cents)) fail(Errc::InvalidPrice, std::string(key) + " of '" + name + "'");
  if (cents < 0) fail(Errc::NegativePrice, std::string(key) + " of '" + name + "'");
  const double scaled = cents * 1000.0;
  const double rounded = std::round(scaled);
  if (std::fabs(scaled - rounded) > 1e-6) {
    fail(Errc::InvalidPrice, std::string(key) + " of '" + name + "' has finer than milli-cent precision");
  }
  return static_cast<std::int64_t>(rounded);
}

}  // namespace

ModelPool load_pool(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Parse, std::string("pool config: ") + e.what());
  }
  const nlohmann::json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("models")) fail(Errc::Parse, "pool config has no 'models' array");
    list = &doc.at("models");
  }
  if (!list->is_array() || list->empty()) fail(Errc::Parse, "pool config must list at least one model");

  std::vector<ModelSpec> models;
  for (const auto& entry : *list) {
    if (!entry.is_object() || !entry.contains("name") || !entry.at("name").is_string()) {
      fail(Errc::Parse, "every model needs a string 'name'");
    }
    ModelSpec m;
    m.id = static_cast<int>(models.size());
    m.capability_rank = m.id;
    m.name = entry.at("name").get<std::string>();
    const std::string dep = entry.value("deployment", std::string{});
    if (dep == "local") {
      m.deployment = Deployment::Local;
    } else if (dep == "cloud") {
      m.deployment = Deployment::Cloud;
    } else {
      fail(Errc::Parse, "deployment of '" + m.name + "' must be \"local\" or \"cloud\"");
    }
    m.price_in_mc = parse_price(entry, "price_in_cents_per_1k", m.name);
    m.price_out_mc = parse_price(entry, "price_out_cents_per_1k", m.name);
    m.endpoint = entry.value("endpoint", std::string{});
    m.api_key_env = entry.value("api_key_env", std::string{});
    models.push_back(std::move(m));
  }

  int eval_id = -1;
  if (doc.is_object() && doc.contains("eval_model_id")) {
    const auto& v = doc.at("eval_model_id");
    if (!v.is_number_integer()) fail(Errc::Parse, "eval_model_id must be an integer");
    eval_id = v.get<int>();
  } else {
    // Most capable free model; falls back to the smallest model.
    eval_id = 0;
    for (const auto& m : models)
      if (m.deployment == Deployment::Local) eval_id = m.id;
  }
  return ModelPool(std::move(models), eval_id);
}

ModelPool load_pool_file(const std::filesystem::path& path) { return load_pool(read_text_file(path)); }

const std::vector<ModelSpec>& GroupedPool::group(Tier tier) const noexcept {
  switch (tier) {
    case Tier::Small: return slm_group;
    case Tier::Medium: return mlm_group;
    case Tier::Large: break;
  }
  return llm_group;
}

Tier GroupedPool::tier_of(int model_id) const {
  for (auto tier : {Tier::Small, Tier::Medium, Tier::Large}) {
    const auto& g = group(tier);
    if (!g.empty() && model_id >= g.front().id && model_id <= g.back().id) return tier;
  }
  fail(Errc::InvalidModel, "model id " + std::to_string(model_id) + " is in no group");
}

GroupedPool partition_groups(const ModelPool& pool) {
  const std::size_t n = pool.size();
  if (n < 3) fail(Errc::PoolTooSmall, "need at least 3 models, have " + std::to_string(n));
  const std::size_t base = n / 3;
  const std::size_t extra = n % 3;
  const std::size_t sizes[3] = {base + (extra > 0 ? 1 : 0), base + (extra > 1 ? 1 : 0), base};
  GroupedPool g;
  auto it = pool.models().begin();
  g.slm_group.assign(it, it + static_cast<std::ptrdiff_t>(sizes[0]));
  it += static_cast<std::ptrdiff_t>(sizes[0]);
  g.mlm_group.assign(it, it + static_cast<std::ptrdiff_t>(sizes[1]));
  it += static_cast<std::ptrdiff_t>(sizes[1]);
  g.llm_group.assign(it, pool.models().end());
  return g;
}

const ModelSpec& medium_model(std::span<const ModelSpec> group) {
  if (group.empty()) fail(Errc::EmptyGroup, "medium_model of an empty group");
  return group[(group.size() - 1) / 2];
}

Cost usage_cost(const TokenUsage& usage, const ModelSpec& model) {
  // price (m¢ per 1k tokens) * tokens / 1000 = m¢
  const std::int64_t scaled = model.price_in_mc * usage.prompt_tokens + model.price_out_mc * usage.completion_tokens;
  return Cost{(scaled + 500) / 1000};
}

}  // namespace costroute

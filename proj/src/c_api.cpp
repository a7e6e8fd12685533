#include "costroute/costroute.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "costroute/allocation_search.hpp"
#include "costroute/error.hpp"
#include "costroute/grpo.hpp"
#include "costroute/log.hpp"
#include "costroute/model_pool.hpp"
#include "costroute/orchestrator.hpp"
#include "costroute/pipeline.hpp"

struct cr_pool {
  costroute::ModelPool pool;
};

struct cr_policy {
  costroute::PolicyParams params;
};

namespace {

thread_local std::string tl_error;
thread_local std::string tl_error_kind;

void set_error(const char* kind, const std::string& msg) {
  tl_error_kind = kind;
  tl_error = msg;
}

void clear_error() {
  tl_error.clear();
  tl_error_kind.clear();
}

cr_status status_for(costroute::Errc code) {
  using costroute::Errc;
  switch (code) {
    case Errc::Usage: return CR_ERR_USAGE;
    case Errc::InvalidArgument:
    case Errc::InvalidModel: return CR_ERR_INVALID_ARGUMENT;
    case Errc::Parse:
    case Errc::CorruptCassette: return CR_ERR_PARSE;
    case Errc::Io: return CR_ERR_IO;
    case Errc::DuplicateName:
    case Errc::NegativePrice:
    case Errc::LocalWithNonzeroPrice:
    case Errc::InvalidPrice:
    case Errc::PoolTooSmall:
    case Errc::EmptyGroup:
    case Errc::InvalidWeights:
    case Errc::InvalidAlpha:
    case Errc::InvalidThresholds:
    case Errc::LimitZero:
    case Errc::LimitTooLarge:
    case Errc::InvalidConfig: return CR_ERR_CONFIG;
    case Errc::GroupTooSmall:
    case Errc::NonpositiveRatio:
    case Errc::SupportMismatch:
    case Errc::EmptyBatch:
    case Errc::NonfiniteGradient:
    case Errc::ShapeMismatch:
    case Errc::EmptyProbSequence:
    case Errc::InvalidProbability: return CR_ERR_NUMERIC;
    case Errc::AuthError:
    case Errc::RateLimited:
    case Errc::MalformedResponse:
    case Errc::TimeoutExhausted:
    case Errc::TransportError:
    case Errc::CassetteMiss: return CR_ERR_BACKEND;
    default: return CR_ERR_DOMAIN;
  }
}

template <typename Fn>
cr_status guarded(Fn&& fn) {
  clear_error();
  try {
    fn();
    return CR_OK;
  } catch (const costroute::Error& e) {
    set_error(costroute::errc_name(e.code()), e.what());
    return status_for(e.code());
  } catch (const std::bad_alloc&) {
    set_error("OutOfMemory", "out of memory");
    return CR_ERR_INTERNAL;
  } catch (const std::exception& e) {
    set_error("Internal", e.what());
    return CR_ERR_INTERNAL;
  } catch (...) {
    set_error("Internal", "unknown exception");
    return CR_ERR_INTERNAL;
  }
}

cr_status null_arg(const char* name) {
  set_error("NullPointer", std::string("null pointer: ") + name);
  return CR_ERR_NULL_PTR;
}

#define CR_REQUIRE(p) \
  do {                \
    if (!(p)) return null_arg(#p); \
  } while (0)

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* cr_version(void) { return "0.1.0"; }

const char* cr_last_error(void) { return tl_error.c_str(); }

const char* cr_last_error_kind(void) { return tl_error_kind.c_str(); }

cr_status cr_set_log_level(int level) {
  if (level < 0 || level > 4) {
    set_error("InvalidArgument", "log level must be 0..4");
    return CR_ERR_INVALID_ARGUMENT;
  }
  costroute::set_log_level(static_cast<costroute::LogLevel>(level));
  return CR_OK;
}

cr_status cr_pool_load(const char* json, cr_pool** out) {
  CR_REQUIRE(json);
  CR_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new cr_pool{costroute::load_pool(json)}; });
}

cr_status cr_pool_load_file(const char* path, cr_pool** out) {
  CR_REQUIRE(path);
  CR_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new cr_pool{costroute::load_pool_file(path)}; });
}

void cr_pool_free(cr_pool* pool) { delete pool; }

cr_status cr_pool_size(const cr_pool* pool, size_t* out) {
  CR_REQUIRE(pool);
  CR_REQUIRE(out);
  *out = pool->pool.size();
  return CR_OK;
}

cr_status cr_pool_model_name(const cr_pool* pool, int model_id, const char** out) {
  CR_REQUIRE(pool);
  CR_REQUIRE(out);
  return guarded([&] { *out = pool->pool.at(model_id).name.c_str(); });
}

cr_status cr_pool_usage_cost(const cr_pool* pool, int model_id, int64_t prompt_tokens, int64_t completion_tokens,
                             int64_t* out_millicents) {
  CR_REQUIRE(pool);
  CR_REQUIRE(out_millicents);
  return guarded([&] {
    if (prompt_tokens < 0 || completion_tokens < 0) {
      costroute::fail(costroute::Errc::InvalidArgument, "token counts must be non-negative");
    }
    *out_millicents =
        costroute::usage_cost(costroute::TokenUsage{prompt_tokens, completion_tokens}, pool->pool.at(model_id))
            .millicents;
  });
}

cr_status cr_pool_partition(const cr_pool* pool, int* out_tiers, size_t n) {
  CR_REQUIRE(pool);
  CR_REQUIRE(out_tiers);
  return guarded([&] {
    if (n != pool->pool.size()) costroute::fail(costroute::Errc::InvalidArgument, "output size must equal pool size");
    const auto grouped = costroute::partition_groups(pool->pool);
    for (size_t i = 0; i < n; ++i) out_tiers[i] = static_cast<int>(grouped.tier_of(static_cast<int>(i)));
  });
}

cr_status cr_group_advantages(const double* rewards, size_t n, double* out) {
  CR_REQUIRE(rewards);
  CR_REQUIRE(out);
  return guarded([&] {
    const auto adv = costroute::group_advantages({rewards, n});
    std::copy(adv.begin(), adv.end(), out);
  });
}

cr_status cr_clipped_step_objective(double ratio, double adv, double eps, double* out) {
  CR_REQUIRE(out);
  return guarded([&] { *out = costroute::clipped_step_objective(ratio, adv, eps); });
}

cr_status cr_kl_penalty(const double* policy_probs, const double* ref_probs, size_t n, double* out) {
  CR_REQUIRE(policy_probs);
  CR_REQUIRE(ref_probs);
  CR_REQUIRE(out);
  return guarded([&] { *out = costroute::kl_penalty({policy_probs, n}, {ref_probs, n}); });
}

cr_status cr_nearest_rank_quantile(const double* values, size_t n, double alpha, double* out) {
  CR_REQUIRE(values);
  CR_REQUIRE(out);
  return guarded([&] { *out = costroute::nearest_rank_quantile({values, n}, alpha); });
}

cr_status cr_bucket_difficulty(double value, double tau1, double tau2, int* out_bucket) {
  CR_REQUIRE(out_bucket);
  return guarded([&] { *out_bucket = static_cast<int>(costroute::bucket_difficulty(value, tau1, tau2)); });
}

cr_status cr_mean_absolute_error(const int* predicted, const int* labels, size_t n, double* out) {
  CR_REQUIRE(predicted);
  CR_REQUIRE(labels);
  CR_REQUIRE(out);
  return guarded([&] { *out = costroute::mean_absolute_error({predicted, n}, {labels, n}); });
}

cr_status cr_policy_load(const char* path, cr_policy** out) {
  CR_REQUIRE(path);
  CR_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new cr_policy{costroute::load_checkpoint(path)}; });
}

void cr_policy_free(cr_policy* policy) { delete policy; }

cr_status cr_policy_actions(const cr_policy* policy, size_t* out) {
  CR_REQUIRE(policy);
  CR_REQUIRE(out);
  *out = policy->params.actions();
  return CR_OK;
}

cr_status cr_policy_probs(const cr_policy* policy, const double* features, double* out_probs, size_t n) {
  CR_REQUIRE(policy);
  CR_REQUIRE(features);
  CR_REQUIRE(out_probs);
  return guarded([&] {
    if (n != policy->params.actions()) costroute::fail(costroute::Errc::ShapeMismatch, "output size must equal actions");
    costroute::FeatureVector x{};
    std::copy(features, features + costroute::kFeatureDim, x.begin());
    const auto p = policy->params.probs(x);
    std::copy(p.begin(), p.end(), out_probs);
  });
}

cr_status cr_run_command(const char* command, const char* options_json, char** out_summary) {
  CR_REQUIRE(command);
  CR_REQUIRE(out_summary);
  *out_summary = nullptr;
  return guarded([&] {
    nlohmann::json options = nlohmann::json::object();
    if (options_json && *options_json) {
      try {
        options = nlohmann::json::parse(options_json);
      } catch (const nlohmann::json::exception& e) {
        costroute::fail(costroute::Errc::Usage, std::string("options are not valid JSON: ") + e.what());
      }
    }
    const auto summary = costroute::run_command(command, options);
    *out_summary = dup_string(summary.dump());
  });
}

void cr_string_free(char* s) { std::free(s); }

}  // extern "C"

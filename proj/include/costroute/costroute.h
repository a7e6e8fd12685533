#ifndef COSTROUTE_COSTROUTE_H
#define COSTROUTE_COSTROUTE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CR_API __declspec(dllexport)
#else
#define CR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cr_status {
  CR_OK = 0,
  CR_ERR_NULL_PTR = 1,
  CR_ERR_USAGE = 2,
  CR_ERR_INVALID_ARGUMENT = 3,
  CR_ERR_PARSE = 4,
  CR_ERR_IO = 5,
  CR_ERR_CONFIG = 6,
  CR_ERR_NUMERIC = 7,
  CR_ERR_BACKEND = 8,
  CR_ERR_DOMAIN = 9,
  CR_ERR_INTERNAL = 10
} cr_status;

typedef struct cr_pool cr_pool;
typedef struct cr_policy cr_policy;

enum { CR_FEATURE_DIM = 7 };

CR_API const char* cr_version(void);

/* Message and error-kind name of the last failure on this thread. */
CR_API const char* cr_last_error(void);
CR_API const char* cr_last_error_kind(void);

/* 0 debug, 1 info, 2 warning, 3 error, 4 off. */
CR_API cr_status cr_set_log_level(int level);

CR_API cr_status cr_pool_load(const char* json, cr_pool** out);
CR_API cr_status cr_pool_load_file(const char* path, cr_pool** out);
CR_API void cr_pool_free(cr_pool* pool);
CR_API cr_status cr_pool_size(const cr_pool* pool, size_t* out);
CR_API cr_status cr_pool_model_name(const cr_pool* pool, int model_id, const char** out);
CR_API cr_status cr_pool_usage_cost(const cr_pool* pool, int model_id, int64_t prompt_tokens,
                                    int64_t completion_tokens, int64_t* out_millicents);
/* Writes the tier (0 small, 1 medium, 2 large) of every model; n must equal the pool size. */
CR_API cr_status cr_pool_partition(const cr_pool* pool, int* out_tiers, size_t n);

CR_API cr_status cr_group_advantages(const double* rewards, size_t n, double* out);
CR_API cr_status cr_clipped_step_objective(double ratio, double adv, double eps, double* out);
CR_API cr_status cr_kl_penalty(const double* policy_probs, const double* ref_probs, size_t n, double* out);
CR_API cr_status cr_nearest_rank_quantile(const double* values, size_t n, double alpha, double* out);
/* 0 easy, 1 medium, 2 hard. */
CR_API cr_status cr_bucket_difficulty(double value, double tau1, double tau2, int* out_bucket);
CR_API cr_status cr_mean_absolute_error(const int* predicted, const int* labels, size_t n, double* out);

CR_API cr_status cr_policy_load(const char* path, cr_policy** out);
CR_API void cr_policy_free(cr_policy* policy);
CR_API cr_status cr_policy_actions(const cr_policy* policy, size_t* out);
/* features has CR_FEATURE_DIM entries; out_probs has n == actions entries. */
CR_API cr_status cr_policy_probs(const cr_policy* policy, const double* features, double* out_probs, size_t n);

/* Runs a subcommand with JSON options; *out_summary receives a JSON line to
   release with cr_string_free, also on failure when a summary exists. */
CR_API cr_status cr_run_command(const char* command, const char* options_json, char** out_summary);
CR_API void cr_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif

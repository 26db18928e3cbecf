#ifndef GRAPHSTEER_H
#define GRAPHSTEER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GsController {
  GS_CONTROLLER_GRADIENT = 0,
  GS_CONTROLLER_ONE_POINT = 1,
  GS_CONTROLLER_TWO_POINT = 2,
  GS_CONTROLLER_BEST_OF_N = 3,
  GS_CONTROLLER_MULTI_POINT = 4,
} GsController;

typedef enum GsStatus {
  GS_STATUS_OK = 0,
  GS_STATUS_CONFIG = 1,
  GS_STATUS_USAGE = 2,
  GS_STATUS_NUMERICAL = 3,
  GS_STATUS_IO = 4,
  GS_STATUS_NULL_POINTER = 5,
  GS_STATUS_PANIC = 6,
} GsStatus;

typedef enum GsCountStat {
  GS_COUNT_STAT_EDGE_COUNT = 0,
  GS_COUNT_STAT_TRIANGLE_COUNT = 1,
  GS_COUNT_STAT_MAX_DEGREE = 2,
} GsCountStat;

typedef enum GsLoss {
  GS_LOSS_L2 = 0,
  GS_LOSS_ONE_SIDED_HINGE = 1,
  GS_LOSS_QUANTIZED_L2 = 2,
  GS_LOSS_QUANTIZED_HINGE = 3,
} GsLoss;

/**
 * Prior handle.
 */
typedef struct GsPrior GsPrior;

/**
 * Reward handle.
 */
typedef struct GsReward GsReward;

/**
 * Finished samples, one graph per successful chain.
 */
typedef struct GsSampleSet GsSampleSet;

/**
 * Noise schedule with `steps` levels and betas ramping linearly from
 * `beta_min` to `beta_max`.
 */
typedef struct GsSchedule {
  size_t steps;
  double beta_min;
  double beta_max;
} GsSchedule;

typedef struct GsSamplerOptions {
  enum GsController controller;
  double k;
  /**
   * Smoothing radius scale; the radius at step t is `mu0 * sigma_t`.
   */
  double mu0;
  size_t n_candidates;
  bool add_ancestral_noise;
  bool final_denoise;
  size_t n_chains;
  uint64_t seed;
} GsSamplerOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *gs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gs_version(void);

struct GsSchedule gs_schedule_default(void);

struct GsSamplerOptions gs_sampler_options_default(void);

/**
 * Gaussian prior `N(0, std^2 I)` over graphs with `n_nodes` nodes and
 * `n_features` features per node.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum GsStatus gs_prior_gaussian(size_t n_nodes,
                                size_t n_features,
                                double std,
                                struct GsSchedule sched,
                                struct GsPrior **out);

/**
 * Empirical mixture prior over the graphs of a JSON-lines dataset file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writing.
 */
enum GsStatus gs_prior_from_dataset(const char *path,
                                    struct GsSchedule sched,
                                    struct GsPrior **out);

/**
 * Node count of the prior's graphs.
 *
 * # Safety
 * `prior` must be a live handle or null.
 */
size_t gs_prior_n_nodes(const struct GsPrior *prior);

/**
 * # Safety
 * `prior` must come from this library and not be used afterwards.
 */
void gs_prior_free(struct GsPrior *prior);

/**
 * Reward penalizing a count statistic above `bound`.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum GsStatus gs_reward_count(enum GsCountStat stat,
                              double bound,
                              enum GsLoss loss,
                              struct GsReward **out);

/**
 * Reward that is highest on star graphs.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum GsStatus gs_reward_star(struct GsReward **out);

/**
 * # Safety
 * `reward` must come from this library and not be used afterwards.
 */
void gs_reward_free(struct GsReward *reward);

/**
 * Runs `options.n_chains` chains. A null `reward` samples without guidance.
 * Fails if any chain fails.
 *
 * # Safety
 * `prior` must be a live handle, `reward` a live handle or null, and `out`
 * valid for writing one pointer.
 */
enum GsStatus gs_sample(const struct GsPrior *prior,
                        const struct GsReward *reward,
                        struct GsSamplerOptions options,
                        struct GsSampleSet **out);

/**
 * # Safety
 * `set` must be a live handle or null.
 */
size_t gs_sample_set_len(const struct GsSampleSet *set);

/**
 * Writes the 0/1 adjacency of graph `index`, thresholded at 1/2, row-major
 * into `buffer`, which must hold `n_nodes * n_nodes` bytes.
 *
 * # Safety
 * `set` must be a live handle and `buffer` valid for `len` bytes.
 */
enum GsStatus gs_sample_set_adjacency(const struct GsSampleSet *set,
                                      size_t index,
                                      uint8_t *buffer,
                                      size_t len);

/**
 * Writes the samples as a JSON-lines dataset file.
 *
 * # Safety
 * `set` must be a live handle and `path` a NUL-terminated string.
 */
enum GsStatus gs_sample_set_write(const struct GsSampleSet *set, const char *path);

/**
 * # Safety
 * `set` must come from this library and not be used afterwards.
 */
void gs_sample_set_free(struct GsSampleSet *set);

/**
 * Same as `graphsteer sample --config <config> --out <out_dir>`.
 *
 * # Safety
 * Both arguments must be NUL-terminated strings.
 */
enum GsStatus gs_run_config(const char *config, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPHSTEER_H */

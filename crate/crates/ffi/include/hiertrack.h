#ifndef HIERTRACK_H
#define HIERTRACK_H

/* Generated by cbindgen from the hiertrack-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HtStatus {
  HT_STATUS_OK = 0,
  HT_STATUS_NULL_POINTER = 1,
  HT_STATUS_INVALID_UTF8 = 2,
  HT_STATUS_INVALID_CONFIG = 3,
  HT_STATUS_SPEED_INFEASIBLE = 4,
  HT_STATUS_NUMERICAL = 5,
  HT_STATUS_PLANNER = 6,
  HT_STATUS_IO = 7,
  HT_STATUS_PANIC = 8,
} HtStatus;

typedef enum HtPlanner {
  HT_PLANNER_MCTS = 0,
  HT_PLANNER_GREEDY = 1,
  HT_PLANNER_RANDOM = 2,
} HtPlanner;

// Completed episode.
typedef struct HtEpisode HtEpisode;

// Scenario description.
typedef struct HtScenario HtScenario;

// Summary of a single-target coverage estimate.
typedef struct HtCoverage {
  double p_max;
  // Mean find time given a find, from the start of the spiral, seconds.
  double expected_find_time;
  double t_cutoff;
  double intercept_time;
} HtCoverage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next library call on the same thread.
const char *ht_last_error_message(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void ht_string_free(char *s);

// Draws a random benchmark scenario with `n_targets` targets.
//
// # Safety
// `out` must be valid for writes.
enum HtStatus ht_scenario_sample(uintptr_t n_targets, uint64_t seed, struct HtScenario **out);

// Parses and validates a scenario from JSON.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid for writes.
enum HtStatus ht_scenario_from_json(const char *json, struct HtScenario **out);

// Serializes a scenario; free the result with [`ht_string_free`].
//
// # Safety
// `scenario` must be a live handle; `out` must be valid for writes.
enum HtStatus ht_scenario_to_json(const struct HtScenario *scenario, char **out);

// Selects the planner and its iteration count.
//
// # Safety
// `scenario` must be a live handle.
enum HtStatus ht_scenario_set_planner(struct HtScenario *scenario,
                                      enum HtPlanner planner,
                                      uintptr_t iterations);

// Sets the mission budget in seconds.
//
// # Safety
// `scenario` must be a live handle.
enum HtStatus ht_scenario_set_budget(struct HtScenario *scenario, double budget);

// # Safety
// `scenario` must be null or a live handle, which is invalid afterwards.
void ht_scenario_free(struct HtScenario *scenario);

// Simulates one episode of `scenario`.
//
// # Safety
// `scenario` must be a live handle; `out` must be valid for writes.
enum HtStatus ht_episode_run(const struct HtScenario *scenario,
                             uint64_t seed,
                             struct HtEpisode **out);

// Total uncertainty at the end of the episode.
//
// # Safety
// `episode` must be a live handle; `out` must be valid for writes.
enum HtStatus ht_episode_final_u(const struct HtEpisode *episode, double *out);

// # Safety
// `episode` must be a live handle; `out` must be valid for writes.
enum HtStatus ht_episode_steps(const struct HtEpisode *episode, uintptr_t *out);

// # Safety
// `episode` must be a live handle; `out` must be valid for writes.
enum HtStatus ht_episode_detection_count(const struct HtEpisode *episode, uintptr_t *out);

// Full episode record as JSON; free the result with [`ht_string_free`].
//
// # Safety
// `episode` must be a live handle; `out` must be valid for writes.
enum HtStatus ht_episode_to_json(const struct HtEpisode *episode, char **out);

// # Safety
// `episode` must be null or a live handle, which is invalid afterwards.
void ht_episode_free(struct HtEpisode *episode);

// Chi-square CDF with two degrees of freedom.
//
// # Safety
// `out` must be valid for writes.
enum HtStatus ht_chi2_cdf_df2(double x, double *out);

// Coverage estimate for one target. `mean` points at 4 values
// `[x, y, vx, vy]`, `cov` at 16 row-major values.
//
// # Safety
// `mean` and `cov` must point at 4 and 16 readable doubles; `out` must be
// valid for writes.
enum HtStatus ht_estimate_coverage(const double *mean,
                                   const double *cov,
                                   double agent_x,
                                   double agent_y,
                                   double agent_speed,
                                   double sensor_width,
                                   double tau,
                                   double q,
                                   uintptr_t max_steps,
                                   struct HtCoverage *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HIERTRACK_H */

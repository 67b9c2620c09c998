/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef BELIEFMDP_H
#define BELIEFMDP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every call.
 */
typedef enum BmStatus {
  BM_STATUS_OK = 0,
  BM_STATUS_NULL_POINTER = 1,
  BM_STATUS_INVALID_UTF8 = 2,
  /*
   Malformed JSON or a field of the wrong type.
   */
  BM_STATUS_MALFORMED_INPUT = 3,
  /*
   The model fails validation.
   */
  BM_STATUS_VALIDATION = 4,
  BM_STATUS_INVALID_ARGUMENT = 5,
  BM_STATUS_DIMENSION_MISMATCH = 6,
  /*
   An index past the end of a handle's contents.
   */
  BM_STATUS_OUT_OF_RANGE = 7,
  BM_STATUS_PANIC = 8,
  BM_STATUS_OTHER = 9,
} BmStatus;

/*
 A finitely supported law on beliefs.
 */
typedef struct BmBeliefDist BmBeliefDist;

/*
 A validated POMDP.
 */
typedef struct BmModel BmModel;

/*
 A solved value function.
 */
typedef struct BmValueFn BmValueFn;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. The pointer stays
 valid until the next call into this library from the same thread.
 */
const char *bm_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *bm_version(void);

/*
 Parses and validates a model document (or a `{"builder", "params"}` reference).
 */
enum BmStatus bm_model_from_json(const char *json, struct BmModel **out);

/*
 Builds a named model; `params_json` may be null for the defaults.
 */
enum BmStatus bm_model_build(const char *name, const char *params_json, struct BmModel **out);

void bm_model_free(struct BmModel *model);

/*
 Writes the numbers of states, observations and actions; any output may be null.
 */
enum BmStatus bm_model_dims(const struct BmModel *model,
                            size_t *n_states,
                            size_t *n_observations,
                            size_t *n_actions);

/*
 Posterior `H(z, a, y)` written to `out` (`out_len >= n_states`).
 */
enum BmStatus bm_bayes_update(const struct BmModel *model,
                              const double *z,
                              size_t z_len,
                              size_t action,
                              size_t observation,
                              double *out,
                              size_t out_len);

/*
 Observation law `R'(.|z, a)` over observation indices (`out_len >= n_observations`).
 */
enum BmStatus bm_observation_marginal(const struct BmModel *model,
                                      const double *z,
                                      size_t z_len,
                                      size_t action,
                                      double *out,
                                      size_t out_len);

/*
 Law of the next belief after action `a` from `z`.
 */
enum BmStatus bm_belief_transition(const struct BmModel *model,
                                   const double *z,
                                   size_t z_len,
                                   size_t action,
                                   struct BmBeliefDist **out);

enum BmStatus bm_belief_dist_len(const struct BmBeliefDist *dist, size_t *len);

/*
 Support point `index` (written to `belief_out`) and its weight.
 */
enum BmStatus bm_belief_dist_get(const struct BmBeliefDist *dist,
                                 size_t index,
                                 double *belief_out,
                                 size_t belief_len,
                                 double *weight);

void bm_belief_dist_free(struct BmBeliefDist *dist);

/*
 Exact `horizon`-step values by alpha vectors. `exact_pruning != 0`
 additionally removes vectors that are nowhere strictly best.
 */
enum BmStatus bm_solve_alpha(const struct BmModel *model,
                             size_t horizon,
                             int32_t exact_pruning,
                             struct BmValueFn **out);

/*
 Grid value iteration; `iterations` and `converged` may be null.
 */
enum BmStatus bm_solve_grid(const struct BmModel *model,
                            uint32_t resolution,
                            size_t max_iters,
                            double epsilon,
                            struct BmValueFn **out,
                            size_t *iterations,
                            int32_t *converged);

/*
 `V(z)`; may be `+inf`.
 */
enum BmStatus bm_value_fn_eval(const struct BmModel *model,
                               const struct BmValueFn *value_fn,
                               const double *z,
                               size_t z_len,
                               double *value);

/*
 Lowest-index action attaining the one-step lookahead minimum at `z`.
 */
enum BmStatus bm_value_fn_greedy(const struct BmModel *model,
                                 const struct BmValueFn *value_fn,
                                 const double *z,
                                 size_t z_len,
                                 size_t *action);

void bm_value_fn_free(struct BmValueFn *value_fn);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BELIEFMDP_H */

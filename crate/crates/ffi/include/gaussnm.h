#ifndef GAUSSNM_H
#define GAUSSNM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GnmFamily {
  GNM_FAMILY_COHERENT = 0,
  GNM_FAMILY_SQUEEZED = 1,
  GNM_FAMILY_COHERENT_THERMAL = 2,
  GNM_FAMILY_GENERAL_PURE = 3,
} GnmFamily;

typedef enum GnmMethod {
  GNM_METHOD_NUMERIC = 0,
  GNM_METHOD_CLOSED = 1,
  GNM_METHOD_FIRST_ORDER = 2,
} GnmMethod;

typedef enum GnmStatus {
  GNM_STATUS_OK = 0,
  GNM_STATUS_NULL_POINTER = 1,
  GNM_STATUS_DOMAIN = 2,
  GNM_STATUS_NON_PHYSICAL = 3,
  GNM_STATUS_RANGE = 4,
  GNM_STATUS_CONFIG = 5,
  GNM_STATUS_UNSUPPORTED_SHAPE = 6,
  GNM_STATUS_CONVERGENCE = 7,
  GNM_STATUS_NUMERICAL = 8,
  GNM_STATUS_IO = 9,
  GNM_STATUS_INVALID_ARGUMENT = 10,
  GNM_STATUS_PANIC = 11,
} GnmStatus;

/*
 A channel: damping with a rate shape, or QBM with a coefficient table.
 */
typedef struct GnmChannel GnmChannel;

/*
 Outcome of a measure computation.
 */
typedef struct GnmResult GnmResult;

/*
 A Gaussian state.
 */
typedef struct GnmState GnmState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or an empty string. The
 pointer stays valid until the next failing call on the same thread.
 */
const char *gnm_last_error(void);

/*
 Creates `D(β) S(r e^{iφ}) ν_th(N) S† D†`.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum GnmStatus gnm_state_new(double thermal,
                             double squeeze,
                             double squeeze_angle,
                             double beta_mag,
                             double beta_arg,
                             struct GnmState **out);

/*
 Writes `[⟨q⟩, ⟨p⟩, σ_qq, σ_qp, σ_pp]` into `out[0..5]`.

 # Safety
 `state` must be a live handle and `out` must point to five writable doubles.
 */
enum GnmStatus gnm_state_moments(const struct GnmState *state, double *out);

/*
 # Safety
 `state` must be null or a handle from this library not yet freed.
 */
void gnm_state_free(struct GnmState *state);

/*
 Uhlmann fidelity `Tr √(√ρ₁ ρ₂ √ρ₁)`.

 # Safety
 `a` and `b` must be live handles, `out` a valid pointer.
 */
enum GnmStatus gnm_fidelity(const struct GnmState *a, const struct GnmState *b, double *out);

/*
 # Safety
 `a` and `b` must be live handles, `out` a valid pointer.
 */
enum GnmStatus gnm_bures_distance(const struct GnmState *a, const struct GnmState *b, double *out);

/*
 Damping channel with the rate `½ e^{−t/10} sin t`, frozen after `5π/2`.

 # Safety
 `out` must be a valid pointer.
 */
enum GnmStatus gnm_channel_damping_example(double alpha, struct GnmChannel **out);

/*
 Damping channel with constant rate `γ₀`.

 # Safety
 `out` must be a valid pointer.
 */
enum GnmStatus gnm_channel_damping_constant(double alpha, double gamma0, struct GnmChannel **out);

/*
 QBM channel for an Ohmic bath; `temperature` is absolute `k_B T`. The
 coefficient table covers the settling horizon with `steps` cells.

 # Safety
 `out` must be a valid pointer.
 */
enum GnmStatus gnm_channel_qbm(double alpha,
                               double omega0,
                               double omega_c,
                               double temperature,
                               size_t steps,
                               struct GnmChannel **out);

/*
 # Safety
 `channel` must be null or a handle from this library not yet freed.
 */
void gnm_channel_free(struct GnmChannel *channel);

/*
 Evolves `state` to time `t` under the exact channel map.

 # Safety
 `state` and `channel` must be live handles, `out` a valid pointer.
 */
enum GnmStatus gnm_evolve(const struct GnmState *state,
                          const struct GnmChannel *channel,
                          double t,
                          struct GnmState **out);

/*
 Non-Markovianity of `channel` over `family`. For squeezed pairs `phi` fixes
 the relative angle; pass NaN to optimize it too.

 # Safety
 `channel` must be a live handle, `out` a valid pointer.
 */
enum GnmStatus gnm_measure(const struct GnmChannel *channel,
                           enum GnmFamily family,
                           enum GnmMethod method,
                           double phi,
                           struct GnmResult **out);

/*
 # Safety
 `result` must be a live handle.
 */
double gnm_result_value(const struct GnmResult *result);

/*
 `K` of the maximizing coherent pair, or NaN when not applicable.

 # Safety
 `result` must be a live handle.
 */
double gnm_result_k(const struct GnmResult *result);

/*
 # Safety
 `result` must be a live handle.
 */
size_t gnm_result_interval_count(const struct GnmResult *result);

/*
 Endpoints and contribution of decrease interval `index`.

 # Safety
 `result` must be a live handle and the outputs valid pointers.
 */
enum GnmStatus gnm_result_interval(const struct GnmResult *result,
                                   size_t index,
                                   double *t_plus,
                                   double *t_minus,
                                   double *contribution);

/*
 # Safety
 `result` must be null or a handle from this library not yet freed.
 */
void gnm_result_free(struct GnmResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAUSSNM_H */

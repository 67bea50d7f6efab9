#ifndef DYNMA_H
#define DYNMA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  DYNMA_STATUS_OK = 0,
  DYNMA_STATUS_NULL_POINTER = 1,
  DYNMA_STATUS_INVALID_ARGUMENT = 2,
  DYNMA_STATUS_INVALID_INSTANCE = 3,
  /**
   * The instance has no channel yet.
   */
  DYNMA_STATUS_NO_CHANNEL = 4,
  DYNMA_STATUS_ENUMERATION_CAP = 5,
  DYNMA_STATUS_LIMIT = 6,
  DYNMA_STATUS_INTERNAL = 7,
} DynmaStatus;

typedef enum {
  DYNMA_ACCESS_IDLE = 0,
  DYNMA_ACCESS_OMA = 1,
  DYNMA_ACCESS_NOMA = 2,
} DynmaAccess;

typedef enum {
  DYNMA_MODE_HYBRID = 0,
  DYNMA_MODE_PURE_OMA = 1,
  DYNMA_MODE_PURE_NOMA = 2,
} DynmaMode;

typedef struct DynmaInstance DynmaInstance;

typedef struct DynmaReport DynmaReport;

/**
 * Network description. Users are spread round-robin over the providers,
 * and every provider gets the same minimum rate until changed.
 */
typedef struct {
  size_t users;
  size_t subcarriers;
  size_t service_providers;
  double min_rate;
  double p_max;
  double p_d;
  double noise_var;
  double cost_a;
  double cost_v;
  double log_base;
} DynmaNetworkParams;

typedef struct {
  double pathloss_exp;
  double area_side;
  /**
   * Share of users placed in the outer ring; negative for uniform
   * placement.
   */
  double edge_fraction;
  uint64_t seed;
} DynmaChannelParams;

typedef struct {
  /**
   * Utility of the returned point, 0 when infeasible.
   */
  double utility;
  double total_rate;
  bool feasible;
  bool converged;
  size_t noma_subcarriers;
  size_t outer_iterations;
} DynmaReportSummary;

/**
 * Access on one subcarrier. `first` is the OMA user or the stronger user
 * of a pair; unused indices are -1.
 */
typedef struct {
  DynmaAccess access;
  int64_t first;
  int64_t second;
} DynmaSubcarrier;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dynma_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated and
 * NUL-terminated) and returns the length the full message needs,
 * including the NUL. `buf` may be null when `len` is 0.
 *
 * # Safety
 * `buf` must be valid for `len` bytes of writes.
 */
size_t dynma_last_error(char *buf, size_t len);

/**
 * The reference simulation values: 20 users, 10 subcarriers, 2 providers
 * at 48 rate units, 100 W, unit noise, P_d = 0.01, A = V = 2, base-2 rates.
 */
DynmaNetworkParams dynma_network_params_default(void);

DynmaChannelParams dynma_channel_params_default(void);

/**
 * Creates an instance without a channel.
 *
 * # Safety
 * `params` must point to a valid struct and `out` to writable storage.
 */
DynmaStatus dynma_instance_new(const DynmaNetworkParams *params, DynmaInstance **out);

/**
 * # Safety
 * `inst` must come from [`dynma_instance_new`] and not be used afterwards.
 */
void dynma_instance_free(DynmaInstance *inst);

/**
 * Replaces the per-provider minimum rates; `len` must equal the number of
 * providers.
 *
 * # Safety
 * `inst` must be a live instance and `rates` valid for `len` reads.
 */
DynmaStatus dynma_instance_set_min_rates(DynmaInstance *inst, const double *rates, size_t len);

/**
 * Replaces the provider of every user; `len` must equal the user count.
 *
 * # Safety
 * `inst` must be a live instance and `providers` valid for `len` reads.
 */
DynmaStatus dynma_instance_set_providers(DynmaInstance *inst, const size_t *providers, size_t len);

/**
 * Draws user positions and fading from the channel model.
 *
 * # Safety
 * `inst` must be a live instance and `params` a valid struct.
 */
DynmaStatus dynma_instance_draw_channel(DynmaInstance *inst, const DynmaChannelParams *params);

/**
 * Sets the channel gains directly, row-major with one row per user.
 *
 * # Safety
 * `inst` must be a live instance and `gains` valid for `len` reads.
 */
DynmaStatus dynma_instance_set_gains(DynmaInstance *inst, const double *gains, size_t len);

/**
 * Copies the channel gains out, row-major with one row per user.
 *
 * # Safety
 * `inst` must be a live instance and `out` valid for `len` writes.
 */
DynmaStatus dynma_instance_gains(const DynmaInstance *inst, double *out, size_t len);

/**
 * Runs the alternating solver with default settings; `mode` is a
 * [`DynmaMode`] value.
 *
 * # Safety
 * `inst` must be a live instance and `out` writable.
 */
DynmaStatus dynma_solve(const DynmaInstance *inst, uint32_t mode, DynmaReport **out);

/**
 * Exhaustive search over all access assignments, refusing more than
 * `enumeration_cap` of them.
 *
 * # Safety
 * `inst` must be a live instance and `out` writable.
 */
DynmaStatus dynma_oracle(const DynmaInstance *inst, uint64_t enumeration_cap, DynmaReport **out);

/**
 * # Safety
 * `report` must come from a solve call and not be used afterwards.
 */
void dynma_report_free(DynmaReport *report);

/**
 * # Safety
 * `report` must be live and `out` writable.
 */
DynmaStatus dynma_report_summary(const DynmaReport *report, DynmaReportSummary *out);

/**
 * Copies the power matrix, row-major with one row per user.
 *
 * # Safety
 * `report` must be live and `out` valid for `len` writes.
 */
DynmaStatus dynma_report_powers(const DynmaReport *report, double *out, size_t len);

/**
 * Copies the rate delivered to each provider.
 *
 * # Safety
 * `report` must be live and `out` valid for `len` writes.
 */
DynmaStatus dynma_report_sp_rates(const DynmaReport *report, double *out, size_t len);

/**
 * Copies the access decision of each subcarrier.
 *
 * # Safety
 * `report` must be live and `out` valid for `len` writes.
 */
DynmaStatus dynma_report_subcarriers(const DynmaReport *report, DynmaSubcarrier *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYNMA_H */

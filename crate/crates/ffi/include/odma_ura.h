#ifndef ODMA_URA_H
#define ODMA_URA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum OdmaStatus {
  ODMA_STATUS_OK = 0,
  ODMA_STATUS_NULL_POINTER = 1,
  ODMA_STATUS_INVALID_CONFIG = 2,
  ODMA_STATUS_INVALID_ARGUMENT = 3,
  ODMA_STATUS_IO = 4,
  ODMA_STATUS_PARSE = 5,
  ODMA_STATUS_NUMERICAL = 6,
  ODMA_STATUS_PANIC = 7,
} OdmaStatus;

/**
 * Opaque system configuration.
 */
typedef struct OdmaConfig OdmaConfig;

/**
 * Opaque simulator: a configuration with its codebooks and polar code.
 */
typedef struct OdmaSimulator OdmaSimulator;

/**
 * Aggregate metrics of one simulated point. `mean_mse` is NaN when
 * `has_mse` is false.
 */
typedef struct OdmaResultRow {
  size_t ka;
  size_t m;
  double pp;
  double pd;
  double ebn0_db;
  size_t trials;
  double pmd;
  double pfa;
  double pe;
  double mean_iterations;
  bool has_mse;
  double mean_mse;
  double collision_rate;
  double wall_clock_per_trial_s;
  /**
   * Trials dropped after an internal error.
   */
  size_t skipped;
} OdmaResultRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none failed.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *odma_last_error_message(void);

/**
 * Desk-scale preset (n = 800, 4096 codewords, length-256 code).
 */
struct OdmaConfig *odma_config_scaled(size_t ka, size_t m);

/**
 * Small preset (n = 200, 256 codewords, length-128 code).
 */
struct OdmaConfig *odma_config_small(size_t ka, size_t m);

/**
 * Parses a JSON configuration into `*out`.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a writable pointer.
 */
enum OdmaStatus odma_config_from_json(const char *json, struct OdmaConfig **out);

/**
 * JSON text of a configuration; release it with [`odma_string_free`].
 * Returns null if `cfg` is null.
 *
 * # Safety
 * `cfg` must be null or a live handle.
 */
char *odma_config_to_json(const struct OdmaConfig *cfg);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void odma_string_free(char *s);

/**
 * # Safety
 * `cfg` must be null or a live handle; it is invalid afterwards.
 */
void odma_config_free(struct OdmaConfig *cfg);

/**
 * Checks every parameter constraint; the error message lists all
 * violations.
 *
 * # Safety
 * `cfg` must be null or a live handle.
 */
enum OdmaStatus odma_config_validate(const struct OdmaConfig *cfg);

/**
 * Sets the number of active users and receive antennas.
 *
 * # Safety
 * `cfg` must be null or a live handle.
 */
enum OdmaStatus odma_config_set_users(struct OdmaConfig *cfg, size_t ka, size_t m);

/**
 * Sets the pilot and data symbol powers.
 *
 * # Safety
 * `cfg` must be null or a live handle.
 */
enum OdmaStatus odma_config_set_powers(struct OdmaConfig *cfg, double pp, double pd);

/**
 * Sets both powers from a total Eb/N0 in dB and the pilot energy share.
 *
 * # Safety
 * `cfg` must be null or a live handle.
 */
enum OdmaStatus odma_config_set_energy(struct OdmaConfig *cfg,
                                       double ebn0_db,
                                       double pilot_fraction);

/**
 * Sets the seed of the codebooks and of every trial stream.
 *
 * # Safety
 * `cfg` must be null or a live handle.
 */
enum OdmaStatus odma_config_set_seed(struct OdmaConfig *cfg, uint64_t seed);

/**
 * Energy per information bit over N0, in dB.
 *
 * # Safety
 * `cfg` must be null or a live handle and `out` writable.
 */
enum OdmaStatus odma_config_energy_per_bit_db(const struct OdmaConfig *cfg, double *out);

/**
 * Builds codebooks and the polar code for a copy of `cfg`.
 *
 * # Safety
 * `cfg` must be null or a live handle and `out` writable.
 */
enum OdmaStatus odma_simulator_new(const struct OdmaConfig *cfg, struct OdmaSimulator **out);

/**
 * # Safety
 * `sim` must be null or a live handle; it is invalid afterwards.
 */
void odma_simulator_free(struct OdmaSimulator *sim);

/**
 * Simulates trials `0..trials` on `threads` workers (0 uses every core).
 *
 * # Safety
 * `sim` must be null or a live handle and `out` writable.
 */
enum OdmaStatus odma_simulator_run(const struct OdmaSimulator *sim,
                                   size_t trials,
                                   size_t threads,
                                   struct OdmaResultRow *out);

/**
 * Writes the simulator's pilot codebook and pattern matrices to `path`.
 *
 * # Safety
 * `sim` must be null or a live handle; `path` a nul-terminated string.
 */
enum OdmaStatus odma_simulator_dump_codebooks(const struct OdmaSimulator *sim, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ODMA_URA_H */

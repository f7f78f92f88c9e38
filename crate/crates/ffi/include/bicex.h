#ifndef BICEX_H
#define BICEX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  BICEX_STATUS_OK = 0,
  BICEX_STATUS_NULL_POINTER = 1,
  BICEX_STATUS_INVALID_UTF8 = 2,
  BICEX_STATUS_INVALID_PARAMETER = 3,
  BICEX_STATUS_CONFIG = 4,
  BICEX_STATUS_NOT_PERSUADABLE = 5,
  BICEX_STATUS_UNKNOWN_ALGORITHM = 6,
  BICEX_STATUS_OUT_OF_RANGE = 7,
  BICEX_STATUS_FAILED = 8,
  BICEX_STATUS_PANIC = 9,
} BicexStatus;

/**
 * A loaded prior together with its policy class.
 */
typedef struct BicexScenario BicexScenario;

/**
 * The rows of one simulated run.
 */
typedef struct BicexTranscript BicexTranscript;

typedef struct {
  uint64_t k_p;
  double tau_p;
  double rho_p;
  uint64_t phase_length;
} BicexConstants;

typedef struct {
  uint64_t round;
  /**
   * Context index, or -1 without contexts.
   */
  int64_t context;
  /**
   * 1-based recommended arm.
   */
  uint32_t arm;
  double reward;
} BicexRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next call on the same thread.
 */
const char *bicex_last_error(void);

/**
 * Parses a prior written in TOML. Contextual priors get the class of all
 * deterministic policies.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a writable pointer.
 */
BicexStatus bicex_scenario_from_toml(const char *toml, BicexScenario **out);

/**
 * # Safety
 * `sc` must come from [`bicex_scenario_from_toml`] or be null.
 */
void bicex_scenario_free(BicexScenario *sc);

/**
 * Number of arms, or 0 for a null handle.
 *
 * # Safety
 * `sc` must be a live scenario handle or null.
 */
size_t bicex_scenario_num_arms(const BicexScenario *sc);

/**
 * Estimates `k_P`, `τ_P`, `ρ_P` after `k` samples and the smallest safe
 * phase length, by Monte Carlo with `replicates` draws.
 *
 * # Safety
 * `sc` must be a live scenario handle and `out` writable.
 */
BicexStatus bicex_persuasion_constants(const BicexScenario *sc,
                                       uint64_t k,
                                       uint64_t replicates,
                                       uint64_t seed,
                                       BicexConstants *out);

/**
 * Runs one replicate of the algorithm described by `spec_json`, e.g.
 * `{"kind":"reduction","k":1,"L":7,"wrapped":"ucb1"}`.
 *
 * # Safety
 * `sc` must be a live scenario handle, `spec_json` NUL-terminated and
 * `out` writable.
 */
BicexStatus bicex_run(const BicexScenario *sc,
                      const char *spec_json,
                      uint64_t horizon,
                      uint64_t seed,
                      uint64_t replicate,
                      BicexTranscript **out);

/**
 * # Safety
 * `t` must come from [`bicex_run`] or be null.
 */
void bicex_transcript_free(BicexTranscript *t);

/**
 * Number of rounds, or 0 for a null handle.
 *
 * # Safety
 * `t` must be a live transcript handle or null.
 */
size_t bicex_transcript_len(const BicexTranscript *t);

/**
 * Copies row `index` (0-based) into `out`.
 *
 * # Safety
 * `t` must be a live transcript handle and `out` writable.
 */
BicexStatus bicex_transcript_row(const BicexTranscript *t, size_t index, BicexRow *out);

/**
 * Realized regret of the run against its own instance.
 *
 * # Safety
 * `t` must be a live transcript handle and `out` writable.
 */
BicexStatus bicex_transcript_regret(const BicexTranscript *t, double *out);

/**
 * Serializes the transcript as JSON lines into a new string that the
 * caller releases with [`bicex_string_free`].
 *
 * # Safety
 * `t` must be a live transcript handle and `out` writable.
 */
BicexStatus bicex_transcript_jsonl(const BicexTranscript *t, char **out);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void bicex_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BICEX_H */

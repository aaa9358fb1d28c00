#ifndef SRLDPC_H
#define SRLDPC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SrldpcStatus {
  SRLDPC_STATUS_OK = 0,
  SRLDPC_STATUS_NULL_POINTER = 1,
  SRLDPC_STATUS_INVALID_ARGUMENT = 2,
  SRLDPC_STATUS_CONFIG = 3,
  SRLDPC_STATUS_DIMENSION = 4,
  SRLDPC_STATUS_PARSE = 5,
  SRLDPC_STATUS_DIVERGENCE = 6,
  SRLDPC_STATUS_IO = 7,
  SRLDPC_STATUS_BUFFER_TOO_SMALL = 8,
  SRLDPC_STATUS_PANIC = 9,
} SrldpcStatus;

/**
 * Code, dictionary and decoder settings built from one JSON config.
 */
typedef struct SrldpcContext SrldpcContext;

typedef struct SrldpcDims {
  size_t sections;
  size_t section_size;
  size_t info_sections;
  size_t channel_uses;
  size_t info_bits;
  /**
   * Bytes of a packed information payload.
   */
  size_t info_bytes;
  size_t antennas;
  double rate;
} SrldpcDims;

typedef struct SrldpcDecodeReport {
  size_t iterations;
  /**
   * Iteration of early stopping, 0 when the decoder ran to the limit.
   */
  size_t converged_at;
  bool valid_codeword;
  bool used_final_bp;
  bool init_fell_back;
  double final_tau2;
} SrldpcDecodeReport;

typedef struct SrldpcPointSummary {
  size_t trials;
  size_t errors;
  size_t undetected;
  double bler;
  double ci95_low;
  double ci95_high;
  double mean_initial_cmse;
  double mean_final_cmse;
  double mean_iters;
} SrldpcPointSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *srldpc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *srldpc_version(void);

/**
 * Build a context from a JSON experiment config; NULL selects the defaults.
 *
 * # Safety
 * `config_json` must be NULL or a NUL-terminated string; `out` must be a
 * valid pointer. Free the result with [`srldpc_context_free`].
 */
enum SrldpcStatus srldpc_context_new(const char *config_json, struct SrldpcContext **out);

/**
 * # Safety
 * `ctx` must be NULL or a handle from [`srldpc_context_new`] not yet freed.
 */
void srldpc_context_free(struct SrldpcContext *ctx);

/**
 * # Safety
 * `ctx` and `out` must be valid pointers.
 */
enum SrldpcStatus srldpc_context_dims(const struct SrldpcContext *ctx, struct SrldpcDims *out);

/**
 * Noise variance for an Eb/N0 in dB under the context's code.
 *
 * # Safety
 * `ctx` and `out` must be valid pointers.
 */
enum SrldpcStatus srldpc_sigma2_for_ebn0(const struct SrldpcContext *ctx,
                                         double ebn0_db,
                                         double *out);

/**
 * Encode packed information bits (MSB first) into `channel_uses` complex
 * samples written as interleaved (re, im) pairs.
 *
 * # Safety
 * `bits` must hold `bits_len` bytes and `samples` room for `samples_len` doubles.
 */
enum SrldpcStatus srldpc_encode(const struct SrldpcContext *ctx,
                                const uint8_t *bits,
                                size_t bits_len,
                                double *samples,
                                size_t samples_len);

/**
 * Decode a received `channel_uses x antennas` matrix given row-major as
 * interleaved (re, im) pairs. Writes packed information bits and, when
 * `report` is not NULL, decoder diagnostics.
 *
 * # Safety
 * Buffers must hold the stated lengths; `report` may be NULL.
 */
enum SrldpcStatus srldpc_decode(const struct SrldpcContext *ctx,
                                const double *received,
                                size_t received_len,
                                size_t antennas,
                                double sigma2,
                                uint64_t seed,
                                uint8_t *bits,
                                size_t bits_len,
                                struct SrldpcDecodeReport *report);

/**
 * Monte-Carlo BLER at one Eb/N0 with the context's decoder settings and
 * trial seeding.
 *
 * # Safety
 * `ctx` and `out` must be valid pointers.
 */
enum SrldpcStatus srldpc_simulate_point(const struct SrldpcContext *ctx,
                                        double ebn0_db,
                                        size_t antennas,
                                        size_t trials,
                                        struct SrldpcPointSummary *out);

/**
 * `P(log2(1 + snr ||h||²) < rate)` for a Rayleigh channel with `antennas`
 * receive antennas.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SrldpcStatus srldpc_outage_probability(double rate,
                                            double snr,
                                            size_t antennas,
                                            bool normalize_by_m,
                                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SRLDPC_H */

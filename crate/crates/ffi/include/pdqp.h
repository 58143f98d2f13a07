#ifndef PDQP_H
#define PDQP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum PdqpStatus {
  PDQP_STATUS_OK = 0,
  PDQP_STATUS_NULL_POINTER = 1,
  PDQP_STATUS_INVALID_UTF8 = 2,
  PDQP_STATUS_PARSE = 3,
  PDQP_STATUS_INVALID_ARGUMENT = 4,
  PDQP_STATUS_INVALID_CIRCUIT = 5,
  PDQP_STATUS_BUDGET_EXCEEDED = 6,
  PDQP_STATUS_BUFFER_TOO_SMALL = 7,
  PDQP_STATUS_IO = 8,
  PDQP_STATUS_PANIC = 9,
} PdqpStatus;

/**
 * A parsed circuit.
 */
typedef struct PdqpCircuit PdqpCircuit;

/**
 * An exact distribution over histories `(v_0, …, v_T)`, in lexicographic
 * order of the histories.
 */
typedef struct PdqpDistribution PdqpDistribution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pdqp_version(void);

/**
 * Message of the most recent failure on this thread, or null if none.
 * Valid until the next failing call on the same thread.
 */
const char *pdqp_last_error(void);

/**
 * Parses circuit text. Table files are resolved against the working
 * directory.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a writable pointer.
 */
enum PdqpStatus pdqp_circuit_parse(const char *text, struct PdqpCircuit **out);

/**
 * Parses a circuit file; table files resolve against its directory.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum PdqpStatus pdqp_circuit_parse_file(const char *path, struct PdqpCircuit **out);

/**
 * # Safety
 * `circuit` must be null or a handle from `pdqp_circuit_parse*` not yet
 * freed.
 */
void pdqp_circuit_free(struct PdqpCircuit *circuit);

/**
 * Register size, or 0 for a null handle.
 *
 * # Safety
 * `circuit` must be null or a live handle.
 */
uintptr_t pdqp_circuit_num_qubits(const struct PdqpCircuit *circuit);

/**
 * Number of steps T; a history has T + 1 samples.
 *
 * # Safety
 * `circuit` must be null or a live handle.
 */
uintptr_t pdqp_circuit_num_steps(const struct PdqpCircuit *circuit);

/**
 * Samples one history `v_0, …, v_T` into `out[0..=T]`.
 *
 * # Safety
 * `circuit` must be a live handle and `out` must have room for `len` values.
 */
enum PdqpStatus pdqp_sample_history(const struct PdqpCircuit *circuit,
                                    uint64_t seed,
                                    uint64_t *out,
                                    uintptr_t len);

/**
 * Like [`pdqp_sample_history`] but drawn with exact dyadic arithmetic.
 * Only H, X, CNOT and Toffoli gates are supported.
 *
 * # Safety
 * As for [`pdqp_sample_history`].
 */
enum PdqpStatus pdqp_exact_sample_history(const struct PdqpCircuit *circuit,
                                          uint64_t seed,
                                          uint64_t *out,
                                          uintptr_t len);

/**
 * Enumerates the full history distribution. `budget` caps the number of
 * branches explored; 0 selects the default.
 *
 * # Safety
 * `circuit` must be a live handle and `out` a writable pointer.
 */
enum PdqpStatus pdqp_history_distribution(const struct PdqpCircuit *circuit,
                                          uint64_t budget,
                                          struct PdqpDistribution **out);

/**
 * # Safety
 * `dist` must be null or a live distribution handle.
 */
void pdqp_distribution_free(struct PdqpDistribution *dist);

/**
 * Number of histories with non-zero probability.
 *
 * # Safety
 * `dist` must be null or a live handle.
 */
uintptr_t pdqp_distribution_len(const struct PdqpDistribution *dist);

/**
 * Samples per history, T + 1.
 *
 * # Safety
 * `dist` must be null or a live handle.
 */
uintptr_t pdqp_distribution_history_len(const struct PdqpDistribution *dist);

/**
 * Copies entry `index` into `history[0..=T]` and `*probability`.
 *
 * # Safety
 * `dist` must be a live handle, `history` must have room for `len` values
 * and `probability` must be writable.
 */
enum PdqpStatus pdqp_distribution_entry(const struct PdqpDistribution *dist,
                                        uintptr_t index,
                                        uint64_t *history,
                                        uintptr_t len,
                                        double *probability);

/**
 * One run of the non-collapsing search over `2^n` items with `marked`
 * the marked item, or negative for none. `iterations` or `samples` of 0
 * select the default K and R. `*found` receives the item found or -1.
 *
 * # Safety
 * `found` must be writable.
 */
enum PdqpStatus pdqp_search(uintptr_t n,
                            int64_t marked,
                            uintptr_t iterations,
                            uintptr_t samples,
                            uint64_t seed,
                            int64_t *found);

/**
 * Decides whether two samplers, given as truth tables of length
 * `2^input_bits` with values below `2^output_bits`, are far apart.
 * `*far` is set to true for "far" and false for "close".
 *
 * # Safety
 * `p0` and `p1` must each point to `2^input_bits` readable values and `far`
 * must be writable.
 */
enum PdqpStatus pdqp_sd_decide(uintptr_t input_bits,
                               uintptr_t output_bits,
                               const uint64_t *p0,
                               const uint64_t *p1,
                               uint64_t seed,
                               bool *far);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PDQP_H */

#ifndef TREEWEAVE_H
#define TREEWEAVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result of every fallible call.
typedef enum TwStatus {
  TW_STATUS_OK = 0,
  TW_STATUS_NULL_ARGUMENT = 1,
  // Invalid argument value (non power-of-two size, bad fraction, ...).
  TW_STATUS_DOMAIN = 2,
  // Input too large for an exhaustive routine.
  TW_STATUS_CAPACITY = 3,
  // Eigensolver ran out of iterations.
  TW_STATUS_SOLVER = 4,
  // A churn scenario could not continue.
  TW_STATUS_SCENARIO = 5,
  // Index past the end, or an output buffer that is too small.
  TW_STATUS_OUT_OF_RANGE = 6,
  TW_STATUS_IO = 7,
  // Internal bug; the handle involved should be considered poisoned.
  TW_STATUS_PANIC = 8,
} TwStatus;

typedef enum TwAdversary {
  TW_ADVERSARY_HIGHEST_H = 0,
  TW_ADVERSARY_RANDOM = 1,
  TW_ADVERSARY_LOWEST_H = 2,
} TwAdversary;

typedef enum TwRootLinks {
  TW_ROOT_LINKS_PRIMARY_ONLY = 0,
  TW_ROOT_LINKS_SHARED = 1,
} TwRootLinks;

typedef enum TwPhase {
  TW_PHASE_JOIN = 0,
  TW_PHASE_LEAVE = 1,
  TW_PHASE_BALANCE_MIX = 2,
  TW_PHASE_MIX = 3,
} TwPhase;

// Opaque contracted graph.
typedef struct TwGraph TwGraph;

// Opaque batch of round records.
typedef struct TwTrace TwTrace;

typedef struct TwScenarioConfig {
  uint32_t initial_leaves;
  uint32_t total_rounds;
  double churn_fraction;
  uint32_t cycle_length;
  uint32_t mix_rounds_per_balance_round;
  uint64_t seed;
  uint32_t runs;
  enum TwAdversary adversary;
  enum TwRootLinks root_links;
  double tolerance;
  // Worker threads; 0 means one.
  uint32_t jobs;
} TwScenarioConfig;

typedef struct TwExpansion {
  uint64_t numerator;
  uint64_t denominator;
  uint32_t boundary_size;
  // Number of vertices in the minimizing set.
  uint32_t witness_len;
} TwExpansion;

typedef struct TwRoundRecord {
  uint32_t run;
  uint32_t round;
  enum TwPhase phase;
  uint32_t population;
  double lambda2;
  uint32_t swaps;
  bool disconnected;
} TwRoundRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len` bytes) and returns the full message
// length plus one. Returns 0 when there is no pending error. `buf` may be
// NULL to query the length.
//
// # Safety
// `buf` must be NULL or valid for `len` writable bytes.
size_t tw_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *tw_version(void);

// Fills `out` with the default scenario (512 leaves, 100 rounds, no
// churn, cycle 7, seed 1, one run).
//
// # Safety
// `out` must be NULL or point to writable memory for one config.
enum TwStatus tw_scenario_config_default(struct TwScenarioConfig *out);

// Contracts a complete tree of `leaves` leaves under a uniform random
// pairing drawn from `seed`. Vertex labels are the leaves' node ids.
//
// # Safety
// `out` must be NULL or valid for one pointer write.
enum TwStatus tw_graph_random(uint32_t leaves,
                              uint64_t seed,
                              enum TwRootLinks links,
                              struct TwGraph **out);

// Contracts a complete tree under the canonical (in-order) pairing.
//
// # Safety
// `out` must be NULL or valid for one pointer write.
enum TwStatus tw_graph_canonical(uint32_t leaves, enum TwRootLinks links, struct TwGraph **out);

// # Safety
// `graph` must be NULL or a handle from `tw_graph_*` not yet freed.
void tw_graph_free(struct TwGraph *graph);

// # Safety
// `graph` must be a live handle; `vertices` and `edges` must each be NULL
// or writable.
enum TwStatus tw_graph_size(const struct TwGraph *graph, size_t *vertices, size_t *edges);

// Writes edges as label pairs `(u, v)`, `u < v`, into `pairs` (2 entries
// per edge). Fails with `OutOfRange` if `cap` (in edges) is too small;
// `written` always receives the number of edges.
//
// # Safety
// `graph` must be a live handle, `pairs` valid for `2 * cap` writes,
// `written` writable.
enum TwStatus tw_graph_edges(const struct TwGraph *graph,
                             uint32_t *pairs,
                             size_t cap,
                             size_t *written);

// Second-smallest Laplacian eigenvalue. A disconnected graph yields 0
// with `disconnected` set.
//
// # Safety
// `graph` must be a live handle; `out` writable; `disconnected` NULL or
// writable.
enum TwStatus tw_graph_lambda2(const struct TwGraph *graph,
                               double tolerance,
                               double *out,
                               bool *disconnected);

// Exact node expansion by enumeration (graphs of at most `max_vertices`
// vertices, hard limit 30). The minimizing set's labels go to `witness`
// when it is non-NULL and `witness_cap` is large enough; `witness_len`
// in `out` is always set.
//
// # Safety
// `graph` must be a live handle, `out` writable, `witness` NULL or valid
// for `witness_cap` writes.
enum TwStatus tw_graph_exact_expansion(const struct TwGraph *graph,
                                       uint32_t max_vertices,
                                       struct TwExpansion *out,
                                       uint32_t *witness,
                                       size_t witness_cap);

// Runs a scenario batch (`config->runs` runs, run `k` seeded from the
// master seed) and returns its records ordered by run, then round.
//
// # Safety
// `config` must be readable, `out` writable.
enum TwStatus tw_trace_run(const struct TwScenarioConfig *config, struct TwTrace **out);

// # Safety
// `trace` must be NULL or a handle from `tw_trace_run` not yet freed.
void tw_trace_free(struct TwTrace *trace);

// # Safety
// `trace` must be a live handle, `len` writable.
enum TwStatus tw_trace_len(const struct TwTrace *trace, size_t *len);

// # Safety
// `trace` must be a live handle, `out` writable.
enum TwStatus tw_trace_get(const struct TwTrace *trace, size_t index, struct TwRoundRecord *out);

// Writes the trace as CSV (same format as the command-line tool).
//
// # Safety
// `trace` must be a live handle, `path` a NUL-terminated UTF-8 string.
enum TwStatus tw_trace_write_csv(const struct TwTrace *trace, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TREEWEAVE_H */

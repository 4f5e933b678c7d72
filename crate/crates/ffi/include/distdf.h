/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DISTDF_H
#define DISTDF_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a fallible call. Values 1 to 13 mirror the engine's error
// codes.
typedef enum DistdfStatus {
  DISTDF_STATUS_OK = 0,
  DISTDF_STATUS_INVALID_ARGUMENT = 1,
  DISTDF_STATUS_CORRUPT_PAYLOAD = 2,
  DISTDF_STATUS_TOO_MANY_WORKERS = 3,
  DISTDF_STATUS_CONNECTION = 4,
  DISTDF_STATUS_BOOTSTRAP_TIMEOUT = 5,
  DISTDF_STATUS_PROTOCOL_VIOLATION = 6,
  DISTDF_STATUS_CHANNEL_BROKEN = 7,
  DISTDF_STATUS_CONNECT_FAILURE = 8,
  DISTDF_STATUS_VERIFICATION_FAILED = 9,
  DISTDF_STATUS_STORE = 10,
  DISTDF_STATUS_IO = 11,
  DISTDF_STATUS_TIMEOUT = 12,
  DISTDF_STATUS_WORKER_FAILED = 13,
  DISTDF_STATUS_PANIC = 100,
} DistdfStatus;

// Column type codes.
typedef enum DistdfDtype {
  DISTDF_DTYPE_INT64 = 1,
  DISTDF_DTYPE_FLOAT64 = 2,
  DISTDF_DTYPE_BOOL = 3,
  DISTDF_DTYPE_UTF8 = 4,
} DistdfDtype;

// Group-by aggregate codes, passed as `uint32_t`.
typedef enum DistdfAggOp {
  DISTDF_AGG_OP_SUM = 0,
  DISTDF_AGG_OP_COUNT = 1,
  DISTDF_AGG_OP_MEAN = 2,
  DISTDF_AGG_OP_STD = 3,
  DISTDF_AGG_OP_MIN = 4,
  DISTDF_AGG_OP_MAX = 5,
} DistdfAggOp;

// Whole-column aggregate codes, passed as `uint32_t`.
typedef enum DistdfColumnAggOp {
  DISTDF_COLUMN_AGG_OP_SUM = 0,
  DISTDF_COLUMN_AGG_OP_MIN = 1,
  DISTDF_COLUMN_AGG_OP_MAX = 2,
  DISTDF_COLUMN_AGG_OP_COUNT = 3,
} DistdfColumnAggOp;

// One worker's handle on a distributed job.
typedef struct DistdfContext DistdfContext;

// A rendezvous store served from this process.
typedef struct DistdfStore DistdfStore;

// An immutable table.
typedef struct DistdfTable DistdfTable;

// Accumulates named columns for [`distdf_builder_finish`].
typedef struct DistdfTableBuilder DistdfTableBuilder;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *distdf_last_error(void);

// Library version as a static NUL-terminated string.
const char *distdf_version(void);

struct DistdfTableBuilder *distdf_builder_new(void);

void distdf_builder_free(struct DistdfTableBuilder *b);

// Appends an Int64 column. `validity` holds one byte per row (non-zero
// means valid) and may be null when every row is valid.
enum DistdfStatus distdf_builder_add_int64(struct DistdfTableBuilder *b,
                                           const char *name,
                                           const int64_t *values,
                                           const uint8_t *validity,
                                           size_t len);

enum DistdfStatus distdf_builder_add_float64(struct DistdfTableBuilder *b,
                                             const char *name,
                                             const double *values,
                                             const uint8_t *validity,
                                             size_t len);

// Appends a Bool column with one byte per value.
enum DistdfStatus distdf_builder_add_bool(struct DistdfTableBuilder *b,
                                          const char *name,
                                          const uint8_t *values,
                                          const uint8_t *validity,
                                          size_t len);

// Appends a Utf8 column given `len + 1` offsets into `data`.
enum DistdfStatus distdf_builder_add_utf8(struct DistdfTableBuilder *b,
                                          const char *name,
                                          const int64_t *offsets,
                                          const uint8_t *data,
                                          size_t data_len,
                                          const uint8_t *validity,
                                          size_t len);

// Consumes the builder, which must not be used afterwards even on failure.
enum DistdfStatus distdf_builder_finish(struct DistdfTableBuilder *b, struct DistdfTable **out);

void distdf_table_free(struct DistdfTable *t);

// Row count, or 0 for a null table.
size_t distdf_table_num_rows(const struct DistdfTable *t);

size_t distdf_table_num_columns(const struct DistdfTable *t);

// Name of column `col`, owned by the table, or null when out of range.
const char *distdf_table_column_name(const struct DistdfTable *t, size_t col);

enum DistdfStatus distdf_table_column_dtype(const struct DistdfTable *t,
                                            size_t col,
                                            enum DistdfDtype *out);

// Borrowed pointer to the values of an Int64 column, valid while the
// table lives. Null slots hold unspecified values.
enum DistdfStatus distdf_table_int64_values(const struct DistdfTable *t,
                                            size_t col,
                                            const int64_t **out);

enum DistdfStatus distdf_table_float64_values(const struct DistdfTable *t,
                                              size_t col,
                                              const double **out);

// Writes 1 to `out` when the cell is non-null, else 0.
enum DistdfStatus distdf_table_is_valid(const struct DistdfTable *t,
                                        size_t col,
                                        size_t row,
                                        uint8_t *out);

enum DistdfStatus distdf_table_bool_value(const struct DistdfTable *t,
                                          size_t col,
                                          size_t row,
                                          uint8_t *out);

// Borrowed bytes of a Utf8 cell, not NUL-terminated.
enum DistdfStatus distdf_table_utf8_value(const struct DistdfTable *t,
                                          size_t col,
                                          size_t row,
                                          const uint8_t **out_data,
                                          size_t *out_len);

// Non-zero when both tables have the same schema and cells.
uint8_t distdf_table_equal(const struct DistdfTable *a, const struct DistdfTable *b);

// Serializes a table into a buffer released with [`distdf_bytes_free`].
enum DistdfStatus distdf_table_pack(const struct DistdfTable *t,
                                    uint8_t **out_data,
                                    size_t *out_len);

void distdf_bytes_free(uint8_t *data, size_t len);

enum DistdfStatus distdf_table_unpack(const uint8_t *data, size_t len, struct DistdfTable **out);

// Synthetic `key`/`value` table for worker `rank` of a job with
// `total_rows` rows, identical to the benchmark's generator.
enum DistdfStatus distdf_gen_table(uint64_t rows,
                                   uint64_t total_rows,
                                   double unique_fraction,
                                   uint64_t seed,
                                   size_t rank,
                                   struct DistdfTable **out);

enum DistdfStatus distdf_local_join(const struct DistdfTable *l,
                                    const struct DistdfTable *r,
                                    const size_t *l_keys,
                                    const size_t *r_keys,
                                    size_t num_keys,
                                    struct DistdfTable **out);

enum DistdfStatus distdf_local_sort(const struct DistdfTable *t,
                                    const size_t *keys,
                                    size_t num_keys,
                                    struct DistdfTable **out);

// Groups on `keys` and applies `agg_ops[i]` (a [`DistdfAggOp`] code) to
// column `agg_cols[i]`.
enum DistdfStatus distdf_local_groupby(const struct DistdfTable *t,
                                       const size_t *keys,
                                       size_t num_keys,
                                       const size_t *agg_cols,
                                       const uint32_t *agg_ops,
                                       size_t num_aggs,
                                       struct DistdfTable **out);

// Splits a table into `parts` tables by key hash. `out` must have room
// for `parts` pointers.
enum DistdfStatus distdf_hash_partition(const struct DistdfTable *t,
                                        const size_t *keys,
                                        size_t num_keys,
                                        size_t parts,
                                        struct DistdfTable **out);

// Serves a rendezvous store on `address` (`host:port`; null binds an
// ephemeral localhost port) until freed.
enum DistdfStatus distdf_store_serve(const char *address, struct DistdfStore **out);

// Bound `host:port` of the store, owned by the store.
const char *distdf_store_address(const struct DistdfStore *s);

void distdf_store_free(struct DistdfStore *s);

// Joins job `job` of `world_size` workers through the store at
// `store_address` and connects to every peer over TCP. Blocks until all
// workers arrive or `timeout_ms` elapses (0 selects the default).
enum DistdfStatus distdf_context_init_kvstore(const char *store_address,
                                              const char *job,
                                              size_t world_size,
                                              uint64_t timeout_ms,
                                              struct DistdfContext **out);

// Rank of this worker, or `SIZE_MAX` for a null context.
size_t distdf_context_rank(const struct DistdfContext *c);

size_t distdf_context_world_size(const struct DistdfContext *c);

// Synchronizes with every worker, closes the channels and releases the
// context. The context is consumed even on failure.
enum DistdfStatus distdf_context_finalize(struct DistdfContext *c);

// Releases a context without the closing barrier.
void distdf_context_free(struct DistdfContext *c);

enum DistdfStatus distdf_dist_join(struct DistdfContext *c,
                                   const struct DistdfTable *l,
                                   const struct DistdfTable *r,
                                   const size_t *l_keys,
                                   const size_t *r_keys,
                                   size_t num_keys,
                                   struct DistdfTable **out);

enum DistdfStatus distdf_dist_groupby(struct DistdfContext *c,
                                      const struct DistdfTable *t,
                                      const size_t *keys,
                                      size_t num_keys,
                                      const size_t *agg_cols,
                                      const uint32_t *agg_ops,
                                      size_t num_aggs,
                                      struct DistdfTable **out);

enum DistdfStatus distdf_dist_sort(struct DistdfContext *c,
                                   const struct DistdfTable *t,
                                   const size_t *keys,
                                   size_t num_keys,
                                   struct DistdfTable **out);

enum DistdfStatus distdf_dist_unique(struct DistdfContext *c,
                                     const struct DistdfTable *t,
                                     const size_t *keys,
                                     size_t num_keys,
                                     struct DistdfTable **out);

// Reduces column `col` across all workers into a one-row, one-column
// table named after the aggregate. `op` is a [`DistdfColumnAggOp`] code.
enum DistdfStatus distdf_dist_column_agg(struct DistdfContext *c,
                                         const struct DistdfTable *t,
                                         size_t col,
                                         uint32_t op,
                                         struct DistdfTable **out);

// Broadcasts the root's table to every worker. Non-root workers pass null
// for `t`.
enum DistdfStatus distdf_bcast_table(struct DistdfContext *c,
                                     const struct DistdfTable *t,
                                     size_t root,
                                     struct DistdfTable **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISTDF_H */

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

#include <stdio.h>
#include <string.h>

#include "distdf.h"

#define CHECK(call)                                                              \
  do {                                                                           \
    DistdfStatus st_ = (call);                                                   \
    if (st_ != DISTDF_STATUS_OK) {                                               \
      fprintf(stderr, "%s:%d: %s -> %d: %s\n", __FILE__, __LINE__, #call, st_, \
              distdf_last_error());                                              \
      return 1;                                                                  \
    }                                                                            \
  } while (0)

int main(void) {
  int64_t keys[] = {3, 1, 2, 1, 3, 3};
  double vals[] = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  DistdfTableBuilder *b = distdf_builder_new();
  CHECK(distdf_builder_add_int64(b, "key", keys, NULL, 6));
  CHECK(distdf_builder_add_float64(b, "value", vals, NULL, 6));
  DistdfTable *t = NULL;
  CHECK(distdf_builder_finish(b, &t));

  size_t key_col = 0;
  DistdfTable *sorted = NULL;
  CHECK(distdf_local_sort(t, &key_col, 1, &sorted));
  const int64_t *sk = NULL;
  CHECK(distdf_table_int64_values(sorted, 0, &sk));
  for (size_t i = 1; i < distdf_table_num_rows(sorted); i++) {
    if (sk[i - 1] > sk[i]) {
      fprintf(stderr, "not sorted at %zu\n", i);
      return 1;
    }
  }

  DistdfStore *store = NULL;
  CHECK(distdf_store_serve(NULL, &store));
  DistdfContext *ctx = NULL;
  CHECK(distdf_context_init_kvstore(distdf_store_address(store), "c-smoke", 1, 10000, &ctx));
  size_t agg_col = 1;
  uint32_t agg_op = DISTDF_AGG_OP_SUM;
  DistdfTable *grouped = NULL;
  CHECK(distdf_dist_groupby(ctx, t, &key_col, 1, &agg_col, &agg_op, 1, &grouped));
  if (distdf_table_num_rows(grouped) != 3 || distdf_table_num_columns(grouped) != 2) {
    fprintf(stderr, "unexpected group-by shape\n");
    return 1;
  }
  DistdfTable *sorted_groups = NULL;
  CHECK(distdf_local_sort(grouped, &key_col, 1, &sorted_groups));
  const double *sums = NULL;
  CHECK(distdf_table_float64_values(sorted_groups, 1, &sums));
  if (sums[0] != 6.0 || sums[1] != 3.0 || sums[2] != 12.0) {
    fprintf(stderr, "wrong sums %f %f %f\n", sums[0], sums[1], sums[2]);
    return 1;
  }
  CHECK(distdf_context_finalize(ctx));

  uint8_t *bytes = NULL;
  size_t len = 0;
  DistdfTable *copy = NULL;
  CHECK(distdf_table_pack(t, &bytes, &len));
  CHECK(distdf_table_unpack(bytes, len, &copy));
  distdf_bytes_free(bytes, len);
  if (!distdf_table_equal(t, copy)) {
    fprintf(stderr, "round trip changed the table\n");
    return 1;
  }

  if (distdf_table_unpack((const uint8_t *)"xx", 2, &copy) != DISTDF_STATUS_CORRUPT_PAYLOAD ||
      distdf_last_error() == NULL) {
    fprintf(stderr, "corrupt input accepted\n");
    return 1;
  }

  printf("ok %s %s\n", distdf_version(), distdf_table_column_name(grouped, 1));
  distdf_table_free(copy);
  distdf_table_free(sorted_groups);
  distdf_table_free(grouped);
  distdf_table_free(sorted);
  distdf_table_free(t);
  distdf_store_free(store);
  return 0;
}

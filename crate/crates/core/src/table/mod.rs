// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! In-memory columnar tables and the single-worker kernels that the
//! distributed operators are built from.

mod bitmap;
mod column;
mod frame;
mod groupby;
mod hash;
mod join;
mod ordering;
mod partition;
mod reduce;
mod rowset;

pub use bitmap::Bitmap;
pub use column::{Cell, Column, ColumnData, DataType, Scalar, ScalarValue};
pub use frame::{cells_equal, cmp_cells, cmp_rows, concat, rows_equal, Field, Schema, Table};
pub use groupby::{
    combine_partials, finalize_partials, local_groupby, merge_partials, plan_slots, AggOp, Aggregation, DEFAULT_DDOF,
    PARTIAL_WIDTH,
};
pub use hash::{fnv1a, hash_cells, RowHasher};
pub use join::{join_schema, local_join, RIGHT_SUFFIX};
pub use ordering::{local_sort, local_unique, row_set_op, SetOpKind};
pub use partition::{hash_partition, hash_partition_with, partition_ids, split_by_ids};
pub use reduce::{column_reduce, ColumnAggOp};

pub(crate) use column::validate_offsets;

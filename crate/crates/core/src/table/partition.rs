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

//! Hash partitioning.

use super::frame::Table;
use super::hash::RowHasher;
use crate::error::{Error, Result};

/// Partition index of every row: `hash(row) mod p`.
pub fn partition_ids(t: &Table, key_cols: &[usize], p: usize, hasher: RowHasher) -> Result<Vec<usize>> {
    if p == 0 {
        return Err(Error::invalid("partition count must be at least 1"));
    }
    let hashes = hasher.hash_rows(t, key_cols)?;
    Ok(hashes.into_iter().map(|h| (h % p as u64) as usize).collect())
}

/// Splits `t` into `p` tables by row hash over `key_cols`. Rows keep their
/// relative order within each partition.
pub fn hash_partition(t: &Table, key_cols: &[usize], p: usize) -> Result<Vec<Table>> {
    hash_partition_with(t, key_cols, p, RowHasher::Fnv1a)
}

pub fn hash_partition_with(t: &Table, key_cols: &[usize], p: usize, hasher: RowHasher) -> Result<Vec<Table>> {
    let ids = partition_ids(t, key_cols, p, hasher)?;
    Ok(split_by_ids(t, &ids, p))
}

/// Splits `t` by a precomputed partition id per row.
pub fn split_by_ids(t: &Table, ids: &[usize], p: usize) -> Vec<Table> {
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); p];
    for (r, &id) in ids.iter().enumerate() {
        buckets[id].push(r);
    }
    buckets.iter().map(|rows| t.take(rows)).collect()
}

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

//! Hash index over the rows of a table, keyed by a column subset.

use std::collections::HashMap;

use super::frame::{rows_equal, Table};
use super::hash::RowHasher;
use crate::error::Result;

pub(crate) struct RowIndex<'a> {
    table: &'a Table,
    cols: Vec<usize>,
    buckets: HashMap<u64, Vec<usize>>,
}

impl<'a> RowIndex<'a> {
    /// Indexes every row of `table`.
    pub fn build(table: &'a Table, cols: &[usize]) -> Result<Self> {
        let mut idx = Self::empty(table, cols);
        if !cols.is_empty() {
            let hashes = RowHasher::Fnv1a.hash_rows(table, cols)?;
            for (r, h) in hashes.into_iter().enumerate() {
                idx.buckets.entry(h).or_default().push(r);
            }
        } else if table.num_rows() > 0 {
            idx.buckets.insert(0, (0..table.num_rows()).collect());
        }
        Ok(idx)
    }

    pub fn empty(table: &'a Table, cols: &[usize]) -> Self {
        Self {
            table,
            cols: cols.to_vec(),
            buckets: HashMap::new(),
        }
    }

    pub fn set_buckets(&mut self, buckets: HashMap<u64, Vec<usize>>) {
        self.buckets = buckets;
    }

    /// Rows of the indexed table equal to row `row` of `probe` on `probe_cols`.
    pub fn matches<'s>(
        &'s self,
        hash: u64,
        probe: &'s Table,
        row: usize,
        probe_cols: &'s [usize],
    ) -> impl Iterator<Item = usize> + 's {
        self.buckets
            .get(&hash)
            .into_iter()
            .flatten()
            .copied()
            .filter(move |&r| rows_equal(self.table, r, &self.cols, probe, row, probe_cols))
    }

    pub fn contains(&self, hash: u64, probe: &Table, row: usize, probe_cols: &[usize]) -> bool {
        self.matches(hash, probe, row, probe_cols).next().is_some()
    }

    /// Adds `row` of the indexed table if no equal row is present yet.
    /// Returns whether it was inserted.
    pub fn insert_distinct(&mut self, hash: u64, row: usize) -> bool {
        let bucket = self.buckets.entry(hash).or_default();
        let (t, cols) = (self.table, &self.cols);
        if bucket.iter().any(|&r| rows_equal(t, r, cols, t, row, cols)) {
            return false;
        }
        bucket.push(row);
        true
    }
}

/// Indices of the first occurrence of each distinct key tuple, in row order.
pub(crate) fn first_occurrences(t: &Table, cols: &[usize]) -> Result<Vec<usize>> {
    if cols.is_empty() {
        return Ok(if t.num_rows() > 0 { vec![0] } else { vec![] });
    }
    let hashes = RowHasher::Fnv1a.hash_rows(t, cols)?;
    let mut idx = RowIndex::empty(t, cols);
    Ok(hashes
        .into_iter()
        .enumerate()
        .filter_map(|(r, h)| idx.insert_distinct(h, r).then_some(r))
        .collect())
}

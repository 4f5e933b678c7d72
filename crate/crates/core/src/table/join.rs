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

//! Local inner equi-join.

use std::collections::HashSet;

use super::frame::{Field, Schema, Table};
use super::hash::RowHasher;
use super::rowset::RowIndex;
use crate::error::{Error, Result};

/// Suffix appended to right-side payload columns whose names collide.
pub const RIGHT_SUFFIX: &str = "_r";

/// Output schema of [`local_join`]: every left column, then the right
/// columns that are not join keys.
pub fn join_schema(l: &Schema, r: &Schema, r_keys: &[usize]) -> Result<(Schema, Vec<usize>)> {
    let r_payload: Vec<usize> = (0..r.len()).filter(|c| !r_keys.contains(c)).collect();
    let mut names: HashSet<String> = l.fields().iter().map(|f| f.name.clone()).collect();
    let mut fields = l.fields().to_vec();
    for &c in &r_payload {
        let f = r.field(c);
        let mut name = f.name.clone();
        while names.contains(&name) {
            name.push_str(RIGHT_SUFFIX);
        }
        names.insert(name.clone());
        fields.push(Field::new(name, f.dtype));
    }
    Ok((Schema::new(fields)?, r_payload))
}

fn check_keys(l: &Table, r: &Table, l_keys: &[usize], r_keys: &[usize]) -> Result<()> {
    l.check_columns(l_keys)?;
    r.check_columns(r_keys)?;
    if l_keys.len() != r_keys.len() {
        return Err(Error::invalid(format!(
            "{} left keys vs {} right keys",
            l_keys.len(),
            r_keys.len()
        )));
    }
    for (&a, &b) in l_keys.iter().zip(r_keys) {
        let (da, db) = (l.column(a).dtype(), r.column(b).dtype());
        if da != db {
            return Err(Error::invalid(format!(
                "join key dtype mismatch: left column {a} is {da}, right column {b} is {db}"
            )));
        }
    }
    Ok(())
}

/// Inner equi-join. Rows are emitted in left order, and for each left row
/// in right order. Rows with a null in any key column match nothing.
pub fn local_join(l: &Table, r: &Table, l_keys: &[usize], r_keys: &[usize]) -> Result<Table> {
    check_keys(l, r, l_keys, r_keys)?;
    let (schema, r_payload) = join_schema(l.schema(), r.schema(), r_keys)?;

    let has_null = |t: &Table, row: usize, keys: &[usize]| keys.iter().any(|&c| !t.column(c).is_valid(row));

    let r_hashes = RowHasher::Fnv1a.hash_rows(r, r_keys)?;
    let mut index = RowIndex::empty(r, r_keys);
    let mut buckets: std::collections::HashMap<u64, Vec<usize>> = Default::default();
    for (row, h) in r_hashes.into_iter().enumerate() {
        if !has_null(r, row, r_keys) {
            buckets.entry(h).or_default().push(row);
        }
    }
    index.set_buckets(buckets);

    let l_hashes = RowHasher::Fnv1a.hash_rows(l, l_keys)?;
    let mut l_rows = Vec::new();
    let mut r_rows = Vec::new();
    for (row, h) in l_hashes.into_iter().enumerate() {
        if has_null(l, row, l_keys) {
            continue;
        }
        for m in index.matches(h, l, row, l_keys) {
            l_rows.push(row);
            r_rows.push(m);
        }
    }

    let mut columns: Vec<_> = l.columns().iter().map(|c| c.take(&l_rows)).collect();
    columns.extend(r_payload.iter().map(|&c| r.column(c).take(&r_rows)));
    Table::with_num_rows(schema, columns, l_rows.len())
}

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

//! Sort, unique and row set operations.

use serde::{Deserialize, Serialize};

use super::frame::{cmp_rows, concat, Table};
use super::hash::RowHasher;
use super::rowset::{first_occurrences, RowIndex};
use crate::error::{Error, Result};

/// Stable sort on the key tuple, nulls last.
pub fn local_sort(t: &Table, key_cols: &[usize]) -> Result<Table> {
    t.check_columns(key_cols)?;
    Ok(t.take(&sort_indices(t, key_cols)))
}

pub(crate) fn sort_indices(t: &Table, key_cols: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..t.num_rows()).collect();
    idx.sort_by(|&a, &b| cmp_rows(t, a, key_cols, t, b, key_cols));
    idx
}

/// Keeps the first row of each distinct key tuple, preserving row order.
pub fn local_unique(t: &Table, key_cols: &[usize]) -> Result<Table> {
    t.check_columns(key_cols)?;
    Ok(t.take(&first_occurrences(t, key_cols)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetOpKind {
    Union,
    Difference,
}

impl std::str::FromStr for SetOpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "union" => Ok(SetOpKind::Union),
            "difference" => Ok(SetOpKind::Difference),
            other => Err(Error::invalid(format!("unknown set operation {other:?}"))),
        }
    }
}

/// Set semantics over whole rows: union is the distinct rows of `l ++ r`;
/// difference is the distinct rows of `l` that do not occur in `r`.
pub fn row_set_op(l: &Table, r: &Table, kind: SetOpKind) -> Result<Table> {
    if l.schema() != r.schema() {
        return Err(Error::invalid("set operation on tables with different schemas"));
    }
    let all: Vec<usize> = (0..l.num_columns()).collect();
    match kind {
        SetOpKind::Union => {
            let both = concat(l.schema(), &[l.clone(), r.clone()])?;
            Ok(both.take(&first_occurrences(&both, &all)?))
        }
        SetOpKind::Difference => {
            let distinct = first_occurrences(l, &all)?;
            if all.is_empty() {
                // zero-column rows are all equal
                return Ok(l.take(if r.num_rows() > 0 { &[] } else { &distinct }));
            }
            let index = RowIndex::build(r, &all)?;
            let hashes = RowHasher::Fnv1a.hash_rows(l, &all)?;
            let keep: Vec<usize> = distinct
                .into_iter()
                .filter(|&row| !index.contains(hashes[row], l, row, &all))
                .collect();
            Ok(l.take(&keep))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Column;

    fn ints(v: Vec<Option<i64>>) -> Table {
        Table::from_columns(vec![("a", Column::int64(v))]).unwrap()
    }

    #[test]
    fn sorts_with_nulls_last() {
        let t = ints(vec![Some(3), None, Some(1), Some(2)]);
        let s = local_sort(&t, &[0]).unwrap();
        assert_eq!(s, ints(vec![Some(1), Some(2), Some(3), None]));
    }

    #[test]
    fn sort_is_stable() {
        let t = Table::from_columns(vec![
            ("k", Column::from_i64(vec![1, 0, 1, 0])),
            ("v", Column::from_i64(vec![10, 20, 30, 40])),
        ])
        .unwrap();
        let s = local_sort(&t, &[0]).unwrap();
        assert_eq!(s.column(1).i64_values().unwrap(), &[20, 40, 10, 30]);
    }

    #[test]
    fn unique_keeps_first() {
        let t = Table::from_columns(vec![
            ("k", Column::from_i64(vec![1, 2, 1])),
            ("v", Column::from_i64(vec![10, 20, 30])),
        ])
        .unwrap();
        let u = local_unique(&t, &[0]).unwrap();
        assert_eq!(u.column(1).i64_values().unwrap(), &[10, 20]);
    }

    #[test]
    fn union_is_idempotent() {
        let t = ints(vec![Some(1), Some(1), None, Some(2)]);
        let u = row_set_op(&t, &t, SetOpKind::Union).unwrap();
        assert_eq!(u, ints(vec![Some(1), None, Some(2)]));
    }

    #[test]
    fn difference() {
        let t = ints(vec![Some(1), Some(1), None, Some(2)]);
        let d = row_set_op(&t, &Table::empty(t.schema().clone()), SetOpKind::Difference).unwrap();
        assert_eq!(d, ints(vec![Some(1), None, Some(2)]));
        let d = row_set_op(&t, &ints(vec![None]), SetOpKind::Difference).unwrap();
        assert_eq!(d, ints(vec![Some(1), Some(2)]));
        assert_eq!(row_set_op(&t, &t, SetOpKind::Difference).unwrap().num_rows(), 0);
    }

    #[test]
    fn schema_mismatch() {
        let a = ints(vec![Some(1)]);
        let b = Table::from_columns(vec![("b", Column::from_i64(vec![1]))]).unwrap();
        assert!(matches!(
            row_set_op(&a, &b, SetOpKind::Union),
            Err(Error::InvalidArgument(_))
        ));
    }
}

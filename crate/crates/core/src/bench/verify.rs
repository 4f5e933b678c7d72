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

//! Result checks against single-process oracles.

use std::cmp::Ordering;

use crate::error::Result;
use crate::table::{cmp_rows, local_sort, Column, ColumnData, Scalar, Table};

/// Relative tolerance for floating-point aggregates.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

fn all_columns(t: &Table) -> Vec<usize> {
    (0..t.num_columns()).collect()
}

/// Same rows with the same multiplicities, in any order. Floats compare
/// by bit pattern.
pub fn same_multiset(a: &Table, b: &Table) -> Result<bool> {
    if a.schema() != b.schema() || a.num_rows() != b.num_rows() {
        return Ok(false);
    }
    let cols = all_columns(a);
    Ok(local_sort(a, &cols)? == local_sort(b, &cols)?)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn columns_close(a: &Column, b: &Column, tol: f64) -> bool {
    if a.dtype() != b.dtype() || a.len() != b.len() || a.validity() != b.validity() {
        return false;
    }
    match (a.data(), b.data()) {
        (ColumnData::Float64(x), ColumnData::Float64(y)) => x
            .iter()
            .zip(y)
            .enumerate()
            .all(|(i, (p, q))| !a.is_valid(i) || close(*p, *q, tol)),
        _ => a == b,
    }
}

/// Grouped results match after sorting both on their leading
/// `key_count` columns: exact for everything but Float64 columns, which
/// must agree within `tol` relative.
pub fn grouped_close(got: &Table, want: &Table, key_count: usize, tol: f64) -> Result<bool> {
    if got.schema() != want.schema() || got.num_rows() != want.num_rows() {
        return Ok(false);
    }
    let keys: Vec<usize> = (0..key_count).collect();
    let (g, w) = (local_sort(got, &keys)?, local_sort(want, &keys)?);
    Ok(g.columns()
        .iter()
        .zip(w.columns())
        .all(|(a, b)| columns_close(a, b, tol)))
}

/// Each piece is sorted on `keys` and every piece's last key is at most
/// the next non-empty piece's first key.
pub fn globally_sorted(pieces: &[Table], keys: &[usize]) -> bool {
    let mut prev: Option<(&Table, usize)> = None;
    for p in pieces {
        let n = p.num_rows();
        if (1..n).any(|i| cmp_rows(p, i - 1, keys, p, i, keys) == Ordering::Greater) {
            return false;
        }
        if n > 0 {
            if let Some((q, j)) = prev {
                if cmp_rows(q, j, keys, p, 0, keys) == Ordering::Greater {
                    return false;
                }
            }
            prev = Some((p, n - 1));
        }
    }
    true
}

pub fn scalars_close(a: &Scalar, b: &Scalar, tol: f64) -> bool {
    match (a.as_i64(), b.as_i64()) {
        (Some(x), Some(y)) => x == y,
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => a.dtype() == b.dtype() && close(x, y, tol),
            _ => a == b,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiset_ignores_order() {
        let a = Table::from_columns(vec![("k", Column::from_i64(vec![1, 2, 2]))]).unwrap();
        let b = Table::from_columns(vec![("k", Column::from_i64(vec![2, 1, 2]))]).unwrap();
        let c = Table::from_columns(vec![("k", Column::from_i64(vec![1, 1, 2]))]).unwrap();
        assert!(same_multiset(&a, &b).unwrap());
        assert!(!same_multiset(&a, &c).unwrap());
    }

    #[test]
    fn grouped_tolerance() {
        let a = Table::from_columns(vec![
            ("k", Column::from_i64(vec![1, 2])),
            ("m", Column::from_f64(vec![1.0, 3.0])),
        ])
        .unwrap();
        let b = Table::from_columns(vec![
            ("k", Column::from_i64(vec![2, 1])),
            ("m", Column::from_f64(vec![3.0 * (1.0 + 1e-12), 1.0])),
        ])
        .unwrap();
        assert!(grouped_close(&a, &b, 1, FLOAT_TOLERANCE).unwrap());
        assert!(!grouped_close(&a, &b, 1, 1e-15).unwrap());
    }

    #[test]
    fn sortedness_across_pieces() {
        let t = |v: Vec<i64>| Table::from_columns(vec![("k", Column::from_i64(v))]).unwrap();
        assert!(globally_sorted(&[t(vec![1, 2]), t(vec![]), t(vec![2, 5])], &[0]));
        assert!(!globally_sorted(&[t(vec![1, 3]), t(vec![2])], &[0]));
        assert!(!globally_sorted(&[t(vec![3, 1])], &[0]));
    }
}

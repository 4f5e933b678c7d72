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

//! Row hashing for partitioning.
//!
//! The default hash is 64-bit FNV-1a chained over the key cells of a row.
//! Each cell feeds a `0x00` marker byte followed by its little-endian value
//! bytes; a null cell feeds only the marker. Utf8 cells feed their byte
//! length as a u64 before the bytes so that adjacent string keys cannot
//! alias. The result depends only on key values, so every worker routes a
//! given key to the same partition.

use super::column::{Cell, DataType};
use super::frame::Table;
use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RowHasher {
    #[default]
    Fnv1a,
    /// `h(k) = k` for a single Int64 key (nulls hash to 0). Test mode only.
    Identity,
}

#[inline]
fn fnv_bytes(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

#[inline]
fn fnv_cell(h: u64, cell: Cell<'_>) -> u64 {
    let h = fnv_bytes(h, &[0x00]);
    match cell {
        Cell::Null => h,
        Cell::Int64(v) => fnv_bytes(h, &v.to_le_bytes()),
        Cell::Float64(v) => fnv_bytes(h, &v.to_bits().to_le_bytes()),
        Cell::Bool(v) => fnv_bytes(h, &[v as u8]),
        Cell::Utf8(s) => fnv_bytes(fnv_bytes(h, &(s.len() as u64).to_le_bytes()), s),
    }
}

/// Plain 64-bit FNV-1a of a byte string.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    fnv_bytes(FNV_OFFSET, bytes)
}

/// FNV-1a of a sequence of cells.
pub fn hash_cells<'a, I: IntoIterator<Item = Cell<'a>>>(cells: I) -> u64 {
    cells.into_iter().fold(FNV_OFFSET, fnv_cell)
}

impl RowHasher {
    /// Hash of every row of `t` over `cols`.
    pub fn hash_rows(self, t: &Table, cols: &[usize]) -> Result<Vec<u64>> {
        t.check_columns(cols)?;
        match self {
            RowHasher::Fnv1a => {
                let mut out = vec![FNV_OFFSET; t.num_rows()];
                for &c in cols {
                    let col = t.column(c);
                    for (r, h) in out.iter_mut().enumerate() {
                        *h = fnv_cell(*h, col.cell(r));
                    }
                }
                Ok(out)
            }
            RowHasher::Identity => {
                if cols.len() != 1 || t.column(cols[0]).dtype() != DataType::Int64 {
                    return Err(Error::invalid("identity hash needs exactly one Int64 key column"));
                }
                let col = t.column(cols[0]);
                Ok((0..t.num_rows())
                    .map(|r| match col.cell(r) {
                        Cell::Int64(v) => v as u64,
                        _ => 0,
                    })
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Column;

    #[test]
    fn fnv_reference_vectors() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv_bytes(FNV_OFFSET, b""), 0xcbf29ce484222325);
        assert_eq!(fnv_bytes(FNV_OFFSET, b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv_bytes(FNV_OFFSET, b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn null_is_distinct_from_zero_and_empty() {
        let nul = hash_cells([Cell::Null]);
        assert_ne!(nul, hash_cells([Cell::Int64(0)]));
        assert_ne!(nul, hash_cells([Cell::Utf8(b"")]));
        assert_eq!(nul, hash_cells([Cell::Null]));
    }

    #[test]
    fn string_boundaries_do_not_alias() {
        let a = hash_cells([Cell::Utf8(b"ab"), Cell::Utf8(b"c")]);
        let b = hash_cells([Cell::Utf8(b"a"), Cell::Utf8(b"bc")]);
        assert_ne!(a, b);
    }

    #[test]
    fn columnwise_matches_cellwise() {
        let t = Table::from_columns(vec![
            ("k", Column::int64([Some(3), None, Some(-1)])),
            ("s", Column::utf8([Some("x"), Some(""), None])),
        ])
        .unwrap();
        let hs = RowHasher::Fnv1a.hash_rows(&t, &[0, 1]).unwrap();
        for (r, h) in hs.iter().enumerate() {
            assert_eq!(*h, hash_cells(t.row(r)));
        }
    }

    #[test]
    fn identity_requires_single_int_key() {
        let t = Table::from_columns(vec![("f", Column::from_f64(vec![1.0]))]).unwrap();
        assert!(RowHasher::Identity.hash_rows(&t, &[0]).is_err());
    }
}

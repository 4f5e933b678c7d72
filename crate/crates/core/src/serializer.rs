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

//! Flattening tables into wire buffers.
//!
//! A column becomes three buffers, in this order:
//!
//! 1. validity: one bit per row, LSB first, final byte zero-padded;
//! 2. offsets: `len + 1` little-endian i64 offsets for Utf8, empty for
//!    fixed-width types (and for a zero-row Utf8 column);
//! 3. data: little-endian values, or packed bits for Bool.
//!
//! A table becomes the concatenation of its column triples in schema
//! order plus an array holding the byte length of each buffer. The schema
//! travels separately (see [`encode_schema`]) because collectives only
//! need it when the receiver does not already know it.

use crate::error::{Error, Result};
use crate::table::{validate_offsets, Bitmap, Column, ColumnData, DataType, Field, Schema, Table};

/// Buffers per serialized column.
pub const BUFFERS_PER_COLUMN: usize = 3;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SerializedColumn {
    pub validity: Vec<u8>,
    pub offsets: Vec<u8>,
    pub data: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SerializedTable {
    pub schema: Schema,
    pub num_rows: usize,
    pub buffers: Vec<Vec<u8>>,
    pub sizes: Vec<i64>,
}

impl SerializedTable {
    pub fn total_bytes(&self) -> usize {
        self.buffers.iter().map(Vec::len).sum()
    }
}

pub fn serialize_column(c: &Column) -> SerializedColumn {
    let validity = c.validity().as_bytes().to_vec();
    match c.data() {
        ColumnData::Int64(v) => SerializedColumn {
            validity,
            offsets: Vec::new(),
            data: v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        },
        ColumnData::Float64(v) => SerializedColumn {
            validity,
            offsets: Vec::new(),
            data: v.iter().flat_map(|x| x.to_bits().to_le_bytes()).collect(),
        },
        ColumnData::Bool(b) => SerializedColumn {
            validity,
            offsets: Vec::new(),
            data: b.as_bytes().to_vec(),
        },
        ColumnData::Utf8 { offsets, data } => SerializedColumn {
            validity,
            offsets: if c.is_empty() {
                Vec::new()
            } else {
                offsets.iter().flat_map(|o| o.to_le_bytes()).collect()
            },
            data: data.clone(),
        },
    }
}

fn le_words(buf: &[u8], what: &str) -> Result<Vec<u64>> {
    if !buf.len().is_multiple_of(8) {
        return Err(Error::corrupt(format!(
            "{what} buffer length {} is not a multiple of 8",
            buf.len()
        )));
    }
    Ok(buf
        .chunks_exact(8)
        .map(|w| u64::from_le_bytes(w.try_into().unwrap()))
        .collect())
}

pub fn deserialize_column(dtype: DataType, len: usize, s: SerializedColumn) -> Result<Column> {
    let SerializedColumn {
        validity,
        offsets,
        data,
    } = s;
    let validity = Bitmap::from_bytes(validity, len)?;
    let fixed_offsets = |o: &[u8]| -> Result<()> {
        if o.is_empty() {
            Ok(())
        } else {
            Err(Error::corrupt(format!("{dtype} column carries an offsets buffer")))
        }
    };
    let data = match dtype {
        DataType::Int64 | DataType::Float64 => {
            fixed_offsets(&offsets)?;
            if data.len() != len * 8 {
                return Err(Error::corrupt(format!(
                    "{dtype} data holds {} bytes, expected {}",
                    data.len(),
                    len * 8
                )));
            }
            let words = le_words(&data, "data")?;
            if dtype == DataType::Int64 {
                ColumnData::Int64(words.into_iter().map(|w| w as i64).collect())
            } else {
                ColumnData::Float64(words.into_iter().map(f64::from_bits).collect())
            }
        }
        DataType::Bool => {
            fixed_offsets(&offsets)?;
            ColumnData::Bool(Bitmap::from_bytes(data, len)?)
        }
        DataType::Utf8 => {
            let offsets: Vec<i64> = if len == 0 && offsets.is_empty() {
                vec![0]
            } else {
                le_words(&offsets, "offsets")?.into_iter().map(|w| w as i64).collect()
            };
            if offsets.len() != len + 1 {
                return Err(Error::corrupt(format!(
                    "utf8 column of {len} rows has {} offsets",
                    offsets.len()
                )));
            }
            validate_offsets(&offsets, data.len())?;
            ColumnData::Utf8 { offsets, data }
        }
    };
    Column::new(validity, data)
}

/// Flattens a table into `3 × num_columns` buffers and their sizes.
pub fn serialize_table(t: &Table) -> SerializedTable {
    let mut buffers = Vec::with_capacity(t.num_columns() * BUFFERS_PER_COLUMN);
    for c in t.columns() {
        let s = serialize_column(c);
        buffers.push(s.validity);
        buffers.push(s.offsets);
        buffers.push(s.data);
    }
    let sizes = buffers.iter().map(|b| b.len() as i64).collect();
    SerializedTable {
        schema: t.schema().clone(),
        num_rows: t.num_rows(),
        buffers,
        sizes,
    }
}

/// Inverse of [`serialize_table`].
pub fn deserialize_table(s: SerializedTable) -> Result<Table> {
    let n_cols = s.schema.len();
    if s.buffers.len() != n_cols * BUFFERS_PER_COLUMN {
        return Err(Error::corrupt(format!(
            "{} buffers for {n_cols} columns (expected {})",
            s.buffers.len(),
            n_cols * BUFFERS_PER_COLUMN
        )));
    }
    if s.sizes.len() != s.buffers.len() {
        return Err(Error::corrupt(format!(
            "{} sizes for {} buffers",
            s.sizes.len(),
            s.buffers.len()
        )));
    }
    if let Some(i) = s.sizes.iter().zip(&s.buffers).position(|(&n, b)| n != b.len() as i64) {
        return Err(Error::corrupt(format!(
            "buffer {i} holds {} bytes but its size says {}",
            s.buffers[i].len(),
            s.sizes[i]
        )));
    }
    let num_rows = s.num_rows;
    let mut bufs = s.buffers.into_iter();
    let mut columns = Vec::with_capacity(n_cols);
    for f in s.schema.fields() {
        let (validity, offsets, data) = (bufs.next().unwrap(), bufs.next().unwrap(), bufs.next().unwrap());
        columns.push(deserialize_column(
            f.dtype,
            num_rows,
            SerializedColumn {
                validity,
                offsets,
                data,
            },
        )?);
    }
    Table::with_num_rows(s.schema, columns, num_rows).map_err(|e| Error::corrupt(e.to_string()))
}

/// Schema wire encoding: `u32` column count, then per column a `u32` name
/// length, the UTF-8 name bytes, and one dtype tag byte. Integers are
/// little-endian.
pub fn encode_schema(s: &Schema) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    for f in s.fields() {
        out.extend_from_slice(&(f.name.len() as u32).to_le_bytes());
        out.extend_from_slice(f.name.as_bytes());
        out.push(f.dtype.tag());
    }
    out
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::corrupt(format!(
                "truncated: wanted {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn i64(&mut self) -> Result<i64> {
        Ok(self.u64()? as i64)
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn decode_schema(wire: &[u8]) -> Result<Schema> {
    let mut r = Reader::new(wire);
    let s = read_schema(&mut r)?;
    if r.remaining() != 0 {
        return Err(Error::corrupt(format!("{} trailing bytes after schema", r.remaining())));
    }
    Ok(s)
}

fn read_schema(r: &mut Reader<'_>) -> Result<Schema> {
    let n = r.u32()? as usize;
    let mut fields = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::corrupt("column name is not UTF-8"))?
            .to_owned();
        let tag = r.u8()?;
        let dtype = DataType::from_tag(tag).ok_or_else(|| Error::corrupt(format!("unknown dtype tag {tag:#04x}")))?;
        fields.push(Field::new(name, dtype));
    }
    Schema::new(fields).map_err(|e| Error::corrupt(e.to_string()))
}

/// Self-describing single-buffer form of a serialized table: schema wire,
/// `u64` row count, `u64` buffer count, one `i64` size per buffer, then the
/// buffers back to back. Used by the C API and for fixtures.
pub fn pack_table(t: &Table) -> Vec<u8> {
    let s = serialize_table(t);
    let mut out = encode_schema(&s.schema);
    out.extend_from_slice(&(s.num_rows as u64).to_le_bytes());
    out.extend_from_slice(&(s.buffers.len() as u64).to_le_bytes());
    for n in &s.sizes {
        out.extend_from_slice(&n.to_le_bytes());
    }
    for b in &s.buffers {
        out.extend_from_slice(b);
    }
    out
}

pub fn unpack_table(bytes: &[u8]) -> Result<Table> {
    let mut r = Reader::new(bytes);
    let schema = read_schema(&mut r)?;
    let num_rows = r.u64()? as usize;
    let n_buf = r.u64()? as usize;
    if n_buf != schema.len() * BUFFERS_PER_COLUMN {
        return Err(Error::corrupt(format!("{n_buf} buffers for {} columns", schema.len())));
    }
    let sizes = (0..n_buf).map(|_| r.i64()).collect::<Result<Vec<_>>>()?;
    let mut buffers = Vec::with_capacity(n_buf);
    for &n in &sizes {
        if n < 0 {
            return Err(Error::corrupt(format!("negative buffer size {n}")));
        }
        buffers.push(r.take(n as usize)?.to_vec());
    }
    if r.remaining() != 0 {
        return Err(Error::corrupt(format!("{} trailing bytes after table", r.remaining())));
    }
    deserialize_table(SerializedTable {
        schema,
        num_rows,
        buffers,
        sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int64_single_value() {
        let s = serialize_column(&Column::from_i64(vec![5]));
        assert_eq!(s.validity, vec![0x01]);
        assert!(s.offsets.is_empty());
        assert_eq!(s.data, vec![5, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn empty_column_is_three_empty_buffers() {
        for d in [DataType::Int64, DataType::Float64, DataType::Bool, DataType::Utf8] {
            assert_eq!(serialize_column(&Column::empty(d)), SerializedColumn::default());
            assert_eq!(
                deserialize_column(d, 0, SerializedColumn::default()).unwrap(),
                Column::empty(d)
            );
        }
    }

    #[test]
    fn bools_are_bit_packed() {
        let s = serialize_column(&Column::bool([Some(true), Some(false), Some(true)]));
        assert_eq!(s.validity, vec![0x07]);
        assert_eq!(s.data, vec![0x05]);
    }

    #[test]
    fn utf8_layout() {
        let s = serialize_column(&Column::utf8([Some("ab"), None]));
        assert_eq!(s.validity, vec![0x01]);
        let offs: Vec<u8> = [0i64, 2, 2].iter().flat_map(|o| o.to_le_bytes()).collect();
        assert_eq!(s.offsets, offs);
        assert_eq!(s.data, b"ab");
    }

    fn two_col() -> Table {
        Table::from_columns(vec![
            ("k", Column::int64([Some(1), None])),
            ("s", Column::utf8([Some("x"), Some("")])),
        ])
        .unwrap()
    }

    #[test]
    fn table_buffer_count_and_sizes() {
        let t = two_col();
        let s = serialize_table(&t);
        assert_eq!(s.buffers.len(), 6);
        assert_eq!(s.sizes, vec![1, 0, 16, 1, 24, 1]);
        assert_eq!(deserialize_table(s).unwrap(), t);
        let empty = Table::from_columns::<&str>(vec![]).unwrap();
        assert!(serialize_table(&empty).buffers.is_empty());
    }

    #[test]
    fn decreasing_offsets_rejected() {
        let mut s = serialize_table(&two_col());
        let bad: Vec<u8> = [0i64, 1, 0].iter().flat_map(|o| o.to_le_bytes()).collect();
        s.buffers[4] = bad;
        assert!(matches!(deserialize_table(s), Err(Error::CorruptPayload(_))));
    }

    #[test]
    fn terminal_offset_mismatch_rejected() {
        let mut s = serialize_table(&two_col());
        s.buffers[5].push(b'z');
        s.sizes[5] += 1;
        assert!(matches!(deserialize_table(s), Err(Error::CorruptPayload(_))));
    }

    #[test]
    fn wrong_buffer_count_rejected() {
        let mut s = serialize_table(&two_col());
        s.buffers.pop();
        s.sizes.pop();
        assert!(matches!(deserialize_table(s), Err(Error::CorruptPayload(_))));
    }

    #[test]
    fn size_disagreement_rejected() {
        let mut s = serialize_table(&two_col());
        s.sizes[2] = 8;
        assert!(matches!(deserialize_table(s), Err(Error::CorruptPayload(_))));
    }

    #[test]
    fn zero_row_table_preserved() {
        let t = Table::empty(two_col().schema().clone());
        assert_eq!(deserialize_table(serialize_table(&t)).unwrap(), t);
    }

    #[test]
    fn schema_wire_bytes() {
        let s = Schema::new(vec![Field::new("k", DataType::Int64)]).unwrap();
        let w = encode_schema(&s);
        assert_eq!(w, vec![1, 0, 0, 0, 1, 0, 0, 0, b'k', 1]);
        assert_eq!(decode_schema(&w).unwrap(), s);
        assert_eq!(
            decode_schema(&encode_schema(&Schema::empty())).unwrap(),
            Schema::empty()
        );
    }

    #[test]
    fn schema_wire_errors() {
        let mut w = encode_schema(&Schema::new(vec![Field::new("k", DataType::Int64)]).unwrap());
        *w.last_mut().unwrap() = 0xFF;
        assert!(matches!(decode_schema(&w), Err(Error::CorruptPayload(_))));
        let w = encode_schema(&Schema::new(vec![Field::new("key", DataType::Utf8)]).unwrap());
        for cut in 0..w.len() {
            assert!(matches!(decode_schema(&w[..cut]), Err(Error::CorruptPayload(_))));
        }
    }

    #[test]
    fn packed_round_trip() {
        let t = two_col();
        assert_eq!(unpack_table(&pack_table(&t)).unwrap(), t);
        let p = pack_table(&t);
        assert!(unpack_table(&p[..p.len() - 1]).is_err());
    }
}

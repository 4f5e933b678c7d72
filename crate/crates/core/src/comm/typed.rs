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

//! Collectives over tables, columns and scalars.
//!
//! | op        | Table | Column | Scalar |
//! |-----------|-------|--------|--------|
//! | AllGather | yes   | yes    | yes    |
//! | Gather    | yes   | yes    | yes    |
//! | Bcast     | yes   |        |        |
//! | AllReduce |       | yes    | yes    |
//! | AllToAll  | yes   |        |        |
//!
//! Tables travel as a small meta buffer (schema fingerprint, row count,
//! buffer sizes) followed by the `3 × num_columns` serialized buffers.
//! A member whose schema fingerprint differs is reported by rank.

use std::fmt;

use super::collectives::{GatherMode, ReduceOp};
use super::communicator::Communicator;
use crate::error::{Error, Result};
use crate::serializer::{
    decode_schema, deserialize_table, encode_schema, serialize_table, Reader, SerializedTable, BUFFERS_PER_COLUMN,
};
use crate::table::{concat, fnv1a, Cell, Column, DataType, Scalar, Schema, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CommOp {
    AllGather,
    Gather,
    Bcast,
    AllReduce,
    AllToAll,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DataKind {
    Table,
    Column,
    Scalar,
}

impl fmt::Display for CommOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub fn is_available(op: CommOp, kind: DataKind) -> bool {
    use CommOp::*;
    use DataKind::*;
    matches!(
        (op, kind),
        (AllGather, _) | (Gather, _) | (Bcast, Table) | (AllReduce, Column) | (AllReduce, Scalar) | (AllToAll, Table)
    )
}

pub fn check_available(op: CommOp, kind: DataKind) -> Result<()> {
    if is_available(op, kind) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{op} is not offered for {kind} values")))
    }
}

fn fingerprint(s: &Schema) -> u64 {
    fnv1a(&encode_schema(s))
}

fn encode_meta(fp: u64, st: &SerializedTable) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * st.sizes.len());
    out.extend_from_slice(&fp.to_le_bytes());
    out.extend_from_slice(&(st.num_rows as u64).to_le_bytes());
    for n in &st.sizes {
        out.extend_from_slice(&n.to_le_bytes());
    }
    out
}

struct Meta {
    num_rows: usize,
    sizes: Vec<i64>,
}

fn decode_meta(peer: usize, b: &[u8], fp: u64, n_buf: usize) -> Result<Meta> {
    let bad = |m: &str| Error::protocol(Some(peer), m.to_string());
    let mut r = Reader::new(b);
    let theirs = r.u64().map_err(|_| bad("truncated table meta"))?;
    if theirs != fp {
        return Err(bad("table schema differs from the local schema"));
    }
    let num_rows = r.u64().map_err(|_| bad("truncated table meta"))? as usize;
    if r.remaining() != 8 * n_buf {
        return Err(bad("table meta has the wrong number of buffer sizes"));
    }
    let sizes = (0..n_buf)
        .map(|_| r.i64().map_err(|_| bad("truncated table meta")))
        .collect::<Result<Vec<_>>>()?;
    if sizes.iter().any(|&n| n < 0) {
        return Err(bad("negative buffer size"));
    }
    Ok(Meta { num_rows, sizes })
}

fn rebuild(peer: usize, schema: &Schema, meta: Meta, buffers: Vec<Vec<u8>>) -> Result<Table> {
    deserialize_table(SerializedTable {
        schema: schema.clone(),
        num_rows: meta.num_rows,
        buffers,
        sizes: meta.sizes,
    })
    .map_err(|e| Error::protocol(Some(peer), e.to_string()))
}

fn split_contiguous(peer: usize, bytes: &[u8], sizes: &[i64]) -> Result<Vec<Vec<u8>>> {
    let total: i64 = sizes.iter().sum();
    if total as usize != bytes.len() {
        return Err(Error::protocol(
            Some(peer),
            format!("received {} payload bytes, sizes announce {total}", bytes.len()),
        ));
    }
    let mut out = Vec::with_capacity(sizes.len());
    let mut at = 0;
    for &n in sizes {
        out.push(bytes[at..at + n as usize].to_vec());
        at += n as usize;
    }
    Ok(out)
}

fn column_table(c: &Column) -> Table {
    Table::from_columns(vec![("value", c.clone())]).expect("single column table")
}

fn table_column(t: Table) -> Column {
    let (_, mut cols, _) = t.into_parts();
    cols.pop().expect("single column table")
}

fn reducible(dtype: DataType, op: ReduceOp) -> bool {
    match dtype {
        DataType::Int64 | DataType::Float64 => matches!(op, ReduceOp::Sum | ReduceOp::Min | ReduceOp::Max),
        DataType::Bool => !matches!(op, ReduceOp::Sum),
        DataType::Utf8 => false,
    }
}

fn combine_cells(a: Cell<'_>, b: Cell<'_>, op: ReduceOp) -> Cell<'static> {
    match (a, b) {
        (Cell::Int64(x), Cell::Int64(y)) => Cell::Int64(match op {
            ReduceOp::Sum => x.wrapping_add(y),
            ReduceOp::Min => x.min(y),
            _ => x.max(y),
        }),
        (Cell::Float64(x), Cell::Float64(y)) => Cell::Float64(match op {
            ReduceOp::Sum => x + y,
            ReduceOp::Min => x.min(y),
            _ => x.max(y),
        }),
        (Cell::Bool(x), Cell::Bool(y)) => Cell::Bool(match op {
            ReduceOp::Land | ReduceOp::Min => x && y,
            _ => x || y,
        }),
        _ => unreachable!("dtype checked before reducing"),
    }
}

fn owned(c: Cell<'_>) -> Cell<'static> {
    match c {
        Cell::Null => Cell::Null,
        Cell::Int64(v) => Cell::Int64(v),
        Cell::Float64(v) => Cell::Float64(v),
        Cell::Bool(v) => Cell::Bool(v),
        Cell::Utf8(_) => unreachable!("utf8 is never reduced"),
    }
}

fn cells_to_column(dtype: DataType, cells: &[Cell<'_>]) -> Column {
    match dtype {
        DataType::Int64 => Column::int64(cells.iter().map(|c| match c {
            Cell::Int64(v) => Some(*v),
            _ => None,
        })),
        DataType::Float64 => Column::float64(cells.iter().map(|c| match c {
            Cell::Float64(v) => Some(*v),
            _ => None,
        })),
        DataType::Bool => Column::bool(cells.iter().map(|c| match c {
            Cell::Bool(v) => Some(*v),
            _ => None,
        })),
        DataType::Utf8 => unreachable!("utf8 is never reduced"),
    }
}

impl Communicator {
    /// Sends `parts[q]` to rank q and concatenates what arrives, in rank
    /// order. All parts must share one schema.
    pub fn alltoall_table(&mut self, parts: &[Table]) -> Result<Table> {
        let w = self.world_size();
        if parts.len() != w {
            return Err(Error::invalid(format!(
                "alltoall_table needs {w} parts, got {}",
                parts.len()
            )));
        }
        let schema = parts[0].schema().clone();
        if let Some(q) = parts.iter().position(|p| p.schema() != &schema) {
            return Err(Error::invalid(format!("part {q} has a different schema from part 0")));
        }
        let fp = fingerprint(&schema);
        let n_buf = schema.len() * BUFFERS_PER_COLUMN;
        let out = parts
            .iter()
            .map(|p| {
                let st = serialize_table(p);
                let mut bufs = Vec::with_capacity(1 + n_buf);
                bufs.push(encode_meta(fp, &st));
                bufs.extend(st.buffers);
                bufs
            })
            .collect();
        let got = self.all_to_all_buffers(out)?;
        let mut tables = Vec::with_capacity(w);
        for (q, mut bufs) in got.into_iter().enumerate() {
            if bufs.is_empty() {
                return Err(Error::protocol(Some(q), "no table meta received"));
            }
            let meta = decode_meta(q, &bufs[0], fp, n_buf)?;
            if bufs.len() != 1 + n_buf {
                return Err(Error::protocol(
                    Some(q),
                    format!("{} buffers for {n_buf} expected", bufs.len() - 1),
                ));
            }
            let buffers = bufs.split_off(1);
            tables.push(rebuild(q, &schema, meta, buffers)?);
        }
        concat(&schema, &tables)
    }

    /// Every member's table, in rank order.
    pub fn allgather_table(&mut self, t: &Table) -> Result<Vec<Table>> {
        let st = serialize_table(t);
        let fp = fingerprint(&st.schema);
        let metas = self.allgather_v(&encode_meta(fp, &st))?;
        let payloads = self.allgather_v(&st.buffers.concat())?;
        self.assemble(&st.schema, fp, metas, payloads)
    }

    fn assemble(&self, schema: &Schema, fp: u64, metas: Vec<Vec<u8>>, payloads: Vec<Vec<u8>>) -> Result<Vec<Table>> {
        let n_buf = schema.len() * BUFFERS_PER_COLUMN;
        metas
            .iter()
            .zip(payloads)
            .enumerate()
            .map(|(q, (m, p))| {
                let meta = decode_meta(q, m, fp, n_buf)?;
                let buffers = split_contiguous(q, &p, &meta.sizes)?;
                rebuild(q, schema, meta, buffers)
            })
            .collect()
    }

    /// Every member's table at `root` (rank order), `None` elsewhere.
    pub fn gather_table(&mut self, t: &Table, root: usize, mode: GatherMode) -> Result<Option<Vec<Table>>> {
        let st = serialize_table(t);
        let fp = fingerprint(&st.schema);
        let metas = self.gather_v(&encode_meta(fp, &st), root, mode)?;
        let payloads = self.gather_v(&st.buffers.concat(), root, mode)?;
        match (metas, payloads) {
            (Some(m), Some(p)) => self.assemble(&st.schema, fp, m, p).map(Some),
            _ => Ok(None),
        }
    }

    /// The root passes its table; receivers pass `None` and learn the
    /// schema from the broadcast. Schema, then row count and sizes, then
    /// the buffers.
    pub fn bcast_table(&mut self, t: Option<&Table>, root: usize) -> Result<Table> {
        let me = self.rank();
        if me == root && t.is_none() {
            return Err(Error::invalid("bcast root must supply a table"));
        }
        let st = if me == root { t.map(serialize_table) } else { None };
        let wire = self.bcast_bytes(st.as_ref().map(|s| encode_schema(&s.schema)), root)?;
        let schema = decode_schema(&wire).map_err(|e| Error::protocol(Some(root), e.to_string()))?;
        let fp = fingerprint(&schema);
        let meta = self.bcast_bytes(st.as_ref().map(|s| encode_meta(fp, s)), root)?;
        let payload = self.bcast_bytes(st.as_ref().map(|s| s.buffers.concat()), root)?;
        if let Some(t) = t.filter(|_| me == root) {
            return Ok(t.clone());
        }
        let meta = decode_meta(root, &meta, fp, schema.len() * BUFFERS_PER_COLUMN)?;
        let buffers = split_contiguous(root, &payload, &meta.sizes)?;
        rebuild(root, &schema, meta, buffers)
    }

    pub fn allgather_column(&mut self, c: &Column) -> Result<Vec<Column>> {
        Ok(self
            .allgather_table(&column_table(c))?
            .into_iter()
            .map(table_column)
            .collect())
    }

    pub fn gather_column(&mut self, c: &Column, root: usize, mode: GatherMode) -> Result<Option<Vec<Column>>> {
        Ok(self
            .gather_table(&column_table(c), root, mode)?
            .map(|ts| ts.into_iter().map(table_column).collect()))
    }

    pub fn allgather_scalar(&mut self, s: &Scalar) -> Result<Vec<Scalar>> {
        Ok(self
            .allgather_column(&s.to_column())?
            .iter()
            .map(|c| Scalar::from_column(c, 0))
            .collect())
    }

    pub fn gather_scalar(&mut self, s: &Scalar, root: usize, mode: GatherMode) -> Result<Option<Vec<Scalar>>> {
        Ok(self
            .gather_column(&s.to_column(), root, mode)?
            .map(|cs| cs.iter().map(|c| Scalar::from_column(c, 0)).collect()))
    }

    /// Elementwise reduction across members. Nulls are skipped; a
    /// position that is null everywhere stays null. Int64 sums wrap.
    pub fn allreduce_column(&mut self, c: &Column, op: ReduceOp) -> Result<Column> {
        let dtype = c.dtype();
        if !reducible(dtype, op) {
            return Err(Error::invalid(format!("cannot reduce a {dtype} column with {op:?}")));
        }
        let all = self.allgather_column(c)?;
        if let Some(q) = all.iter().position(|x| x.len() != c.len()) {
            return Err(Error::protocol(
                Some(q),
                format!(
                    "column length {} differs from {} at rank {}",
                    all[q].len(),
                    c.len(),
                    self.rank()
                ),
            ));
        }
        let mut acc: Vec<Cell<'static>> = vec![Cell::Null; c.len()];
        for x in &all {
            for (i, a) in acc.iter_mut().enumerate() {
                let v = x.cell(i);
                *a = match (*a, v) {
                    (_, Cell::Null) => *a,
                    (Cell::Null, v) => owned(v),
                    (a, v) => combine_cells(a, v, op),
                };
            }
        }
        Ok(cells_to_column(dtype, &acc))
    }

    pub fn allreduce_scalar(&mut self, s: &Scalar, op: ReduceOp) -> Result<Scalar> {
        let c = self.allreduce_column(&s.to_column(), op)?;
        Ok(Scalar::from_column(&c, 0))
    }
}

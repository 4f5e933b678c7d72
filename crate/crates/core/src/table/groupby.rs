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

//! Hash group-by with mergeable partial aggregates.
//!
//! Every aggregate is computed through per-group partials
//! `(sum, sumsq, count, min, max)`. Partials merge componentwise, so a
//! group-by can be split into a local combine, a shuffle of partials, a
//! merge, and a finalize, and still agree with the single-pass result.

use serde::{Deserialize, Serialize};

use super::column::{Cell, Column, DataType};
use super::frame::{Field, Schema, Table};
use super::hash::RowHasher;
use super::rowset::RowIndex;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggOp {
    Sum,
    Count,
    Mean,
    Std,
    Min,
    Max,
}

impl AggOp {
    pub fn name(self) -> &'static str {
        match self {
            AggOp::Sum => "sum",
            AggOp::Count => "count",
            AggOp::Mean => "mean",
            AggOp::Std => "std",
            AggOp::Min => "min",
            AggOp::Max => "max",
        }
    }

    fn output_dtype(self, input: DataType) -> DataType {
        match self {
            AggOp::Sum | AggOp::Min | AggOp::Max => input,
            AggOp::Count => DataType::Int64,
            AggOp::Mean | AggOp::Std => DataType::Float64,
        }
    }
}

impl std::str::FromStr for AggOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sum" => AggOp::Sum,
            "count" => AggOp::Count,
            "mean" => AggOp::Mean,
            "std" => AggOp::Std,
            "min" => AggOp::Min,
            "max" => AggOp::Max,
            other => return Err(Error::invalid(format!("unknown aggregation {other:?}"))),
        })
    }
}

/// One requested aggregate: `op` applied to input column `column`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregation {
    pub column: usize,
    pub op: AggOp,
}

impl Aggregation {
    pub fn new(column: usize, op: AggOp) -> Self {
        Self { column, op }
    }
}

/// Number of partial columns emitted per aggregated input column.
pub const PARTIAL_WIDTH: usize = 5;
const PARTIAL_SUFFIXES: [&str; PARTIAL_WIDTH] = ["_sum", "_sumsq", "_count", "_min", "_max"];

pub const DEFAULT_DDOF: u32 = 1;

#[derive(Clone, Copy, Debug)]
enum Num {
    I(i64),
    F(f64),
}

#[derive(Clone, Copy, Debug)]
struct Partial {
    sum: Num,
    sumsq: f64,
    count: i64,
    min: Option<Num>,
    max: Option<Num>,
}

impl Partial {
    fn zero(dtype: DataType) -> Self {
        Self {
            sum: match dtype {
                DataType::Float64 => Num::F(0.0),
                _ => Num::I(0),
            },
            sumsq: 0.0,
            count: 0,
            min: None,
            max: None,
        }
    }

    fn push(&mut self, v: Num) {
        let x = match v {
            Num::I(i) => i as f64,
            Num::F(f) => f,
        };
        self.sum = add(self.sum, v);
        self.sumsq += x * x;
        self.count += 1;
        self.min = Some(self.min.map_or(v, |m| pick(m, v, true)));
        self.max = Some(self.max.map_or(v, |m| pick(m, v, false)));
    }

    fn merge(&mut self, o: &Partial) {
        self.sum = add(self.sum, o.sum);
        self.sumsq += o.sumsq;
        self.count += o.count;
        self.min = opt_pick(self.min, o.min, true);
        self.max = opt_pick(self.max, o.max, false);
    }
}

// int64 sums wrap on overflow
fn add(a: Num, b: Num) -> Num {
    match (a, b) {
        (Num::I(x), Num::I(y)) => Num::I(x.wrapping_add(y)),
        (Num::F(x), Num::F(y)) => Num::F(x + y),
        _ => unreachable!("mixed partial types"),
    }
}

fn pick(a: Num, b: Num, min: bool) -> Num {
    let b_wins = match (a, b) {
        (Num::I(x), Num::I(y)) => (y < x) == min && y != x,
        (Num::F(x), Num::F(y)) => {
            let o = y.total_cmp(&x);
            if min {
                o.is_lt()
            } else {
                o.is_gt()
            }
        }
        _ => unreachable!("mixed partial types"),
    };
    if b_wins {
        b
    } else {
        a
    }
}

fn opt_pick(a: Option<Num>, b: Option<Num>, min: bool) -> Option<Num> {
    match (a, b) {
        (Some(x), Some(y)) => Some(pick(x, y, min)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn num_at(c: &Column, row: usize) -> Option<Num> {
    match c.cell(row) {
        Cell::Int64(v) => Some(Num::I(v)),
        Cell::Float64(v) => Some(Num::F(v)),
        _ => None,
    }
}

fn num_column(dtype: DataType, vals: impl Iterator<Item = Option<Num>>) -> Column {
    match dtype {
        DataType::Float64 => Column::float64(vals.map(|o| {
            o.map(|n| match n {
                Num::F(f) => f,
                Num::I(i) => i as f64,
            })
        })),
        _ => Column::int64(vals.map(|o| {
            o.map(|n| match n {
                Num::I(i) => i,
                Num::F(f) => f as i64,
            })
        })),
    }
}

/// Assigns a dense group id to each row (in first-occurrence order) and
/// returns `(first row of each group, group id per row)`.
pub(crate) fn group_rows(t: &Table, key_cols: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let hashes = RowHasher::Fnv1a.hash_rows(t, key_cols)?;
    let mut index = RowIndex::empty(t, key_cols);
    let mut firsts = Vec::new();
    let mut group_of = vec![0usize; t.num_rows()];
    let mut id_of_first = std::collections::HashMap::new();
    for (r, h) in hashes.into_iter().enumerate() {
        if index.insert_distinct(h, r) {
            id_of_first.insert(r, firsts.len());
            group_of[r] = firsts.len();
            firsts.push(r);
        } else {
            let first = index
                .matches(h, t, r, key_cols)
                .next()
                .expect("distinct insert refused without an equal row");
            group_of[r] = id_of_first[&first];
        }
    }
    Ok((firsts, group_of))
}

fn check_numeric(t: &Table, cols: &[usize]) -> Result<()> {
    for &c in cols {
        if c >= t.num_columns() {
            return Err(Error::invalid(format!("aggregate column {c} out of range")));
        }
        let d = t.column(c).dtype();
        if !d.is_numeric() {
            return Err(Error::invalid(format!(
                "cannot aggregate {d} column {:?}",
                t.schema().field(c).name
            )));
        }
    }
    Ok(())
}

fn partial_fields(base: &str, dtype: DataType) -> [Field; PARTIAL_WIDTH] {
    let f = |i: usize, d| Field::new(format!("{base}{}", PARTIAL_SUFFIXES[i]), d);
    [
        f(0, dtype),
        f(1, DataType::Float64),
        f(2, DataType::Int64),
        f(3, dtype),
        f(4, dtype),
    ]
}

fn partial_columns(dtype: DataType, parts: &[Partial]) -> [Column; PARTIAL_WIDTH] {
    [
        num_column(dtype, parts.iter().map(|p| Some(p.sum))),
        Column::from_f64(parts.iter().map(|p| p.sumsq).collect()),
        Column::from_i64(parts.iter().map(|p| p.count).collect()),
        num_column(dtype, parts.iter().map(|p| p.min)),
        num_column(dtype, parts.iter().map(|p| p.max)),
    ]
}

/// Per-group partial aggregates of `agg_cols`.
///
/// Output layout: the key columns, then for each aggregated column `x`
/// the five columns `x_sum, x_sumsq, x_count, x_min, x_max`. Nulls are
/// skipped; `x_min`/`x_max` are null for groups without a valid value.
pub fn combine_partials(t: &Table, key_cols: &[usize], agg_cols: &[usize]) -> Result<Table> {
    t.check_columns(key_cols)?;
    check_numeric(t, agg_cols)?;
    let (firsts, group_of) = group_rows(t, key_cols)?;

    let mut fields = t.schema().project(key_cols).fields().to_vec();
    let mut columns: Vec<Column> = key_cols.iter().map(|&c| t.column(c).take(&firsts)).collect();
    for &a in agg_cols {
        let col = t.column(a);
        let mut parts = vec![Partial::zero(col.dtype()); firsts.len()];
        for (r, &g) in group_of.iter().enumerate() {
            if let Some(v) = num_at(col, r) {
                parts[g].push(v);
            }
        }
        fields.extend(partial_fields(&t.schema().field(a).name, col.dtype()));
        columns.extend(partial_columns(col.dtype(), &parts));
    }
    Table::with_num_rows(Schema::new(fields)?, columns, firsts.len())
}

fn read_partial(t: &Table, base: usize, row: usize) -> Partial {
    let count = t.column(base + 2).i64_values().map_or(0, |v| v[row]);
    Partial {
        sum: num_at(t.column(base), row).unwrap_or(Num::I(0)),
        sumsq: t.column(base + 1).f64_at(row).unwrap_or(0.0),
        count,
        min: num_at(t.column(base + 3), row),
        max: num_at(t.column(base + 4), row),
    }
}

fn check_partials(t: &Table, key_count: usize) -> Result<usize> {
    let n = t.num_columns();
    if n < key_count || !(n - key_count).is_multiple_of(PARTIAL_WIDTH) {
        return Err(Error::invalid(format!(
            "{n} columns is not {key_count} keys plus whole partial groups"
        )));
    }
    let slots = (n - key_count) / PARTIAL_WIDTH;
    for j in 0..slots {
        let b = key_count + j * PARTIAL_WIDTH;
        let d = t.column(b).dtype();
        let ok = d.is_numeric()
            && t.column(b + 1).dtype() == DataType::Float64
            && t.column(b + 2).dtype() == DataType::Int64
            && t.column(b + 3).dtype() == d
            && t.column(b + 4).dtype() == d;
        if !ok {
            return Err(Error::invalid(format!("partial slot {j} has the wrong column types")));
        }
    }
    Ok(slots)
}

/// Regroups partial rows by their key columns and merges duplicates.
pub fn merge_partials(partials: &Table, key_count: usize) -> Result<Table> {
    let slots = check_partials(partials, key_count)?;
    let keys: Vec<usize> = (0..key_count).collect();
    let (firsts, group_of) = if key_count == 0 {
        let n = partials.num_rows();
        (if n > 0 { vec![0] } else { vec![] }, vec![0; n])
    } else {
        group_rows(partials, &keys)?
    };
    let mut columns: Vec<Column> = keys.iter().map(|&c| partials.column(c).take(&firsts)).collect();
    for j in 0..slots {
        let base = key_count + j * PARTIAL_WIDTH;
        let dtype = partials.column(base).dtype();
        let mut merged = vec![Partial::zero(dtype); firsts.len()];
        for (r, &g) in group_of.iter().enumerate() {
            merged[g].merge(&read_partial(partials, base, r));
        }
        columns.extend(partial_columns(dtype, &merged));
    }
    Table::with_num_rows(partials.schema().clone(), columns, firsts.len())
}

/// Turns partials into final aggregates.
///
/// `aggs` pairs a partial slot (0-based, in the order the columns were
/// combined) with the aggregate to produce. `mean = sum / n` and
/// `std = sqrt((sumsq - sum^2 / n) / (n - ddof))`; `mean` is null when
/// `n = 0` and `std` is null when `n <= ddof`. Output columns are the keys
/// followed by one `<column>_<op>` column per entry of `aggs`.
pub fn finalize_partials(partials: &Table, key_count: usize, aggs: &[(usize, AggOp)], ddof: u32) -> Result<Table> {
    let slots = check_partials(partials, key_count)?;
    let n_rows = partials.num_rows();
    let mut fields = partials.schema().fields()[..key_count].to_vec();
    let mut columns: Vec<Column> = partials.columns()[..key_count].to_vec();
    for &(slot, op) in aggs {
        if slot >= slots {
            return Err(Error::invalid(format!(
                "partial slot {slot} out of range ({slots} slots)"
            )));
        }
        let base = key_count + slot * PARTIAL_WIDTH;
        let sum_name = &partials.schema().field(base).name;
        let name = sum_name.strip_suffix(PARTIAL_SUFFIXES[0]).unwrap_or(sum_name);
        let dtype = partials.column(base).dtype();
        let parts: Vec<Partial> = (0..n_rows).map(|r| read_partial(partials, base, r)).collect();
        let col = match op {
            AggOp::Sum => num_column(dtype, parts.iter().map(|p| Some(p.sum))),
            AggOp::Count => Column::from_i64(parts.iter().map(|p| p.count).collect()),
            AggOp::Min => num_column(dtype, parts.iter().map(|p| p.min)),
            AggOp::Max => num_column(dtype, parts.iter().map(|p| p.max)),
            AggOp::Mean => Column::float64(parts.iter().map(mean)),
            AggOp::Std => Column::float64(parts.iter().map(|p| std_dev(p, ddof))),
        };
        fields.push(Field::new(format!("{name}_{}", op.name()), op.output_dtype(dtype)));
        columns.push(col);
    }
    Table::with_num_rows(Schema::new(fields)?, columns, n_rows)
}

fn sum_f64(p: &Partial) -> f64 {
    match p.sum {
        Num::I(i) => i as f64,
        Num::F(f) => f,
    }
}

fn mean(p: &Partial) -> Option<f64> {
    (p.count > 0).then(|| sum_f64(p) / p.count as f64)
}

fn std_dev(p: &Partial, ddof: u32) -> Option<f64> {
    if p.count <= ddof as i64 {
        return None;
    }
    let n = p.count as f64;
    let s = sum_f64(p);
    // rounding can push a zero variance slightly negative
    let var = ((p.sumsq - s * s / n) / (n - ddof as f64)).max(0.0);
    Some(var.sqrt())
}

/// Distinct aggregated columns of `aggs`, in first-use order, and the
/// `(slot, op)` list addressing them.
pub fn plan_slots(aggs: &[Aggregation]) -> (Vec<usize>, Vec<(usize, AggOp)>) {
    let mut cols: Vec<usize> = Vec::new();
    let slots = aggs
        .iter()
        .map(|a| {
            let slot = cols.iter().position(|&c| c == a.column).unwrap_or_else(|| {
                cols.push(a.column);
                cols.len() - 1
            });
            (slot, a.op)
        })
        .collect();
    (cols, slots)
}

/// Group-by with one output row per distinct key tuple, in order of first
/// appearance.
pub fn local_groupby(t: &Table, key_cols: &[usize], aggs: &[Aggregation], ddof: u32) -> Result<Table> {
    let (agg_cols, slots) = plan_slots(aggs);
    let partials = combine_partials(t, key_cols, &agg_cols)?;
    finalize_partials(&partials, key_cols.len(), &slots, ddof)
}

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

//! Whole-column reductions.

use serde::{Deserialize, Serialize};

use super::column::{Cell, Column, DataType, Scalar};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnAggOp {
    Sum,
    Min,
    Max,
    Count,
}

impl std::str::FromStr for ColumnAggOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sum" => ColumnAggOp::Sum,
            "min" => ColumnAggOp::Min,
            "max" => ColumnAggOp::Max,
            "count" => ColumnAggOp::Count,
            other => return Err(Error::invalid(format!("unknown column aggregate {other:?}"))),
        })
    }
}

/// Reduces a column to a scalar, skipping nulls.
///
/// Empty or all-null input yields a zero sum of the column's type, a
/// count of 0, and an invalid scalar for min/max. Int64 sums wrap.
pub fn column_reduce(c: &Column, op: ColumnAggOp) -> Result<Scalar> {
    if op == ColumnAggOp::Count {
        return Ok(Scalar::int64(c.len() as i64 - c.null_count() as i64));
    }
    let valid = (0..c.len()).map(|i| c.cell(i)).filter(|x| *x != Cell::Null);
    match c.dtype() {
        DataType::Int64 => {
            let vals = valid.map(|x| match x {
                Cell::Int64(v) => v,
                _ => unreachable!(),
            });
            Ok(match op {
                ColumnAggOp::Sum => Scalar::int64(vals.fold(0i64, i64::wrapping_add)),
                ColumnAggOp::Min => vals.min().map_or(Scalar::null(DataType::Int64), Scalar::int64),
                ColumnAggOp::Max => vals.max().map_or(Scalar::null(DataType::Int64), Scalar::int64),
                ColumnAggOp::Count => unreachable!(),
            })
        }
        DataType::Float64 => {
            let vals = valid.map(|x| match x {
                Cell::Float64(v) => v,
                _ => unreachable!(),
            });
            Ok(match op {
                ColumnAggOp::Sum => Scalar::float64(vals.sum()),
                ColumnAggOp::Min => vals
                    .min_by(f64::total_cmp)
                    .map_or(Scalar::null(DataType::Float64), Scalar::float64),
                ColumnAggOp::Max => vals
                    .max_by(f64::total_cmp)
                    .map_or(Scalar::null(DataType::Float64), Scalar::float64),
                ColumnAggOp::Count => unreachable!(),
            })
        }
        d => Err(Error::invalid(format!("cannot reduce a {d} column with {op:?}"))),
    }
}

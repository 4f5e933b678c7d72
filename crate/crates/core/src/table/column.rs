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

//! Column and scalar types.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::bitmap::Bitmap;
use crate::error::{Error, Result};

/// Physical type of a column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DataType {
    Int64,
    Float64,
    Bool,
    Utf8,
}

impl DataType {
    /// Tag byte used in the schema wire encoding.
    pub fn tag(self) -> u8 {
        match self {
            DataType::Int64 => 1,
            DataType::Float64 => 2,
            DataType::Bool => 3,
            DataType::Utf8 => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(DataType::Int64),
            2 => Some(DataType::Float64),
            3 => Some(DataType::Bool),
            4 => Some(DataType::Utf8),
            _ => None,
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, DataType::Int64 | DataType::Float64)
    }

    pub fn is_fixed_width(self) -> bool {
        !matches!(self, DataType::Utf8)
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DataType::Int64 => "int64",
            DataType::Float64 => "float64",
            DataType::Bool => "bool",
            DataType::Utf8 => "utf8",
        };
        f.write_str(s)
    }
}

/// Value storage of a column. Slots under a cleared validity bit hold an
/// unspecified value (zero for columns built through the constructors).
#[derive(Clone, Debug)]
pub enum ColumnData {
    Int64(Vec<i64>),
    Float64(Vec<f64>),
    Bool(Bitmap),
    Utf8 { offsets: Vec<i64>, data: Vec<u8> },
}

impl PartialEq for ColumnData {
    fn eq(&self, other: &Self) -> bool {
        use ColumnData::*;
        match (self, other) {
            (Int64(a), Int64(b)) => a == b,
            // bitwise, so NaN payloads and signed zeros round-trip as equal
            (Float64(a), Float64(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()),
            (Bool(a), Bool(b)) => a == b,
            (Utf8 { offsets: oa, data: da }, Utf8 { offsets: ob, data: db }) => oa == ob && da == db,
            _ => false,
        }
    }
}

impl ColumnData {
    pub fn dtype(&self) -> DataType {
        match self {
            ColumnData::Int64(_) => DataType::Int64,
            ColumnData::Float64(_) => DataType::Float64,
            ColumnData::Bool(_) => DataType::Bool,
            ColumnData::Utf8 { .. } => DataType::Utf8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Int64(v) => v.len(),
            ColumnData::Float64(v) => v.len(),
            ColumnData::Bool(b) => b.len(),
            ColumnData::Utf8 { offsets, .. } => offsets.len().saturating_sub(1),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn empty(dtype: DataType) -> Self {
        match dtype {
            DataType::Int64 => ColumnData::Int64(Vec::new()),
            DataType::Float64 => ColumnData::Float64(Vec::new()),
            DataType::Bool => ColumnData::Bool(Bitmap::new()),
            DataType::Utf8 => ColumnData::Utf8 {
                offsets: vec![0],
                data: Vec::new(),
            },
        }
    }
}

/// Borrowed view of one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell<'a> {
    Null,
    Int64(i64),
    Float64(f64),
    Bool(bool),
    Utf8(&'a [u8]),
}

/// A typed column with a validity bitmap.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    validity: Bitmap,
    data: ColumnData,
}

impl Column {
    /// Assembles a column from parts, checking the structural invariants.
    pub fn new(validity: Bitmap, data: ColumnData) -> Result<Self> {
        if validity.len() != data.len() {
            return Err(Error::corrupt(format!(
                "validity covers {} rows but data has {}",
                validity.len(),
                data.len()
            )));
        }
        if let ColumnData::Utf8 { offsets, data } = &data {
            validate_offsets(offsets, data.len())?;
        }
        Ok(Self { validity, data })
    }

    pub fn empty(dtype: DataType) -> Self {
        Self {
            validity: Bitmap::new(),
            data: ColumnData::empty(dtype),
        }
    }

    pub fn from_i64(values: Vec<i64>) -> Self {
        Self {
            validity: Bitmap::all_set(values.len()),
            data: ColumnData::Int64(values),
        }
    }

    pub fn from_f64(values: Vec<f64>) -> Self {
        Self {
            validity: Bitmap::all_set(values.len()),
            data: ColumnData::Float64(values),
        }
    }

    pub fn int64<I: IntoIterator<Item = Option<i64>>>(values: I) -> Self {
        let (validity, v): (Bitmap, Vec<i64>) = values.into_iter().map(|o| (o.is_some(), o.unwrap_or(0))).unzip();
        Self {
            validity,
            data: ColumnData::Int64(v),
        }
    }

    pub fn float64<I: IntoIterator<Item = Option<f64>>>(values: I) -> Self {
        let (validity, v): (Bitmap, Vec<f64>) = values.into_iter().map(|o| (o.is_some(), o.unwrap_or(0.0))).unzip();
        Self {
            validity,
            data: ColumnData::Float64(v),
        }
    }

    pub fn bool<I: IntoIterator<Item = Option<bool>>>(values: I) -> Self {
        let (validity, v): (Bitmap, Bitmap) = values.into_iter().map(|o| (o.is_some(), o.unwrap_or(false))).unzip();
        Self {
            validity,
            data: ColumnData::Bool(v),
        }
    }

    pub fn utf8<S: AsRef<[u8]>, I: IntoIterator<Item = Option<S>>>(values: I) -> Self {
        let mut validity = Bitmap::new();
        let mut offsets = vec![0i64];
        let mut data = Vec::new();
        for v in values {
            validity.push(v.is_some());
            if let Some(s) = v {
                data.extend_from_slice(s.as_ref());
            }
            offsets.push(data.len() as i64);
        }
        Self {
            validity,
            data: ColumnData::Utf8 { offsets, data },
        }
    }

    pub fn dtype(&self) -> DataType {
        self.data.dtype()
    }

    pub fn len(&self) -> usize {
        self.validity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validity(&self) -> &Bitmap {
        &self.validity
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    pub fn into_parts(self) -> (Bitmap, ColumnData) {
        (self.validity, self.data)
    }

    #[inline]
    pub fn is_valid(&self, i: usize) -> bool {
        self.validity.get(i)
    }

    pub fn null_count(&self) -> usize {
        self.len() - self.validity.count_set()
    }

    #[inline]
    pub fn cell(&self, i: usize) -> Cell<'_> {
        if !self.validity.get(i) {
            return Cell::Null;
        }
        match &self.data {
            ColumnData::Int64(v) => Cell::Int64(v[i]),
            ColumnData::Float64(v) => Cell::Float64(v[i]),
            ColumnData::Bool(b) => Cell::Bool(b.get(i)),
            ColumnData::Utf8 { offsets, data } => Cell::Utf8(&data[offsets[i] as usize..offsets[i + 1] as usize]),
        }
    }

    /// Numeric view of a cell; `None` for nulls and non-numeric columns.
    #[inline]
    pub fn f64_at(&self, i: usize) -> Option<f64> {
        match self.cell(i) {
            Cell::Int64(v) => Some(v as f64),
            Cell::Float64(v) => Some(v),
            _ => None,
        }
    }

    pub fn i64_values(&self) -> Option<&[i64]> {
        match &self.data {
            ColumnData::Int64(v) => Some(v),
            _ => None,
        }
    }

    pub fn f64_values(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Float64(v) => Some(v),
            _ => None,
        }
    }

    /// Gathers rows by index, in index order.
    pub fn take(&self, indices: &[usize]) -> Column {
        let validity: Bitmap = indices.iter().map(|&i| self.validity.get(i)).collect();
        let data = match &self.data {
            ColumnData::Int64(v) => ColumnData::Int64(indices.iter().map(|&i| v[i]).collect()),
            ColumnData::Float64(v) => ColumnData::Float64(indices.iter().map(|&i| v[i]).collect()),
            ColumnData::Bool(b) => ColumnData::Bool(indices.iter().map(|&i| b.get(i)).collect()),
            ColumnData::Utf8 { offsets, data } => {
                let mut out_off = Vec::with_capacity(indices.len() + 1);
                let mut out = Vec::new();
                out_off.push(0i64);
                for &i in indices {
                    out.extend_from_slice(&data[offsets[i] as usize..offsets[i + 1] as usize]);
                    out_off.push(out.len() as i64);
                }
                ColumnData::Utf8 {
                    offsets: out_off,
                    data: out,
                }
            }
        };
        Column { validity, data }
    }

    /// Concatenates columns of one dtype.
    pub fn concat(dtype: DataType, parts: &[&Column]) -> Result<Column> {
        let mut out = Column::empty(dtype);
        for p in parts {
            if p.dtype() != dtype {
                return Err(Error::invalid(format!(
                    "cannot concatenate {} column onto {dtype}",
                    p.dtype()
                )));
            }
            out.validity.extend_from(&p.validity);
            match (&mut out.data, &p.data) {
                (ColumnData::Int64(a), ColumnData::Int64(b)) => a.extend_from_slice(b),
                (ColumnData::Float64(a), ColumnData::Float64(b)) => a.extend_from_slice(b),
                (ColumnData::Bool(a), ColumnData::Bool(b)) => a.extend_from(b),
                (ColumnData::Utf8 { offsets, data }, ColumnData::Utf8 { offsets: bo, data: bd }) => {
                    let base = data.len() as i64;
                    offsets.extend(bo.iter().skip(1).map(|o| o + base));
                    data.extend_from_slice(bd);
                }
                _ => unreachable!("dtype checked above"),
            }
        }
        Ok(out)
    }
}

pub(crate) fn validate_offsets(offsets: &[i64], data_len: usize) -> Result<()> {
    match offsets.first() {
        None => return Err(Error::corrupt("utf8 offsets must have length + 1 entries")),
        Some(&first) if first != 0 => return Err(Error::corrupt(format!("utf8 offsets start at {first}, not 0"))),
        _ => {}
    }
    if offsets.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::corrupt("utf8 offsets are not monotone"));
    }
    let last = *offsets.last().unwrap();
    if last != data_len as i64 {
        return Err(Error::corrupt(format!(
            "utf8 offsets end at {last} but data has {data_len} bytes"
        )));
    }
    Ok(())
}

/// Owned single value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScalarValue {
    Int64(i64),
    Float64(f64),
    Bool(bool),
    Utf8(String),
}

impl ScalarValue {
    pub fn dtype(&self) -> DataType {
        match self {
            ScalarValue::Int64(_) => DataType::Int64,
            ScalarValue::Float64(_) => DataType::Float64,
            ScalarValue::Bool(_) => DataType::Bool,
            ScalarValue::Utf8(_) => DataType::Utf8,
        }
    }
}

/// A typed value that may be invalid (null). Consumers ignore the value of
/// an invalid scalar, so none is stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    dtype: DataType,
    value: Option<ScalarValue>,
}

impl Scalar {
    pub fn new(value: ScalarValue) -> Self {
        Self {
            dtype: value.dtype(),
            value: Some(value),
        }
    }

    pub fn null(dtype: DataType) -> Self {
        Self { dtype, value: None }
    }

    pub fn int64(v: i64) -> Self {
        Self::new(ScalarValue::Int64(v))
    }

    pub fn float64(v: f64) -> Self {
        Self::new(ScalarValue::Float64(v))
    }

    pub fn dtype(&self) -> DataType {
        self.dtype
    }

    pub fn is_valid(&self) -> bool {
        self.value.is_some()
    }

    pub fn value(&self) -> Option<&ScalarValue> {
        self.value.as_ref()
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self.value {
            Some(ScalarValue::Int64(v)) => Some(v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self.value {
            Some(ScalarValue::Float64(v)) => Some(v),
            Some(ScalarValue::Int64(v)) => Some(v as f64),
            _ => None,
        }
    }

    /// One-row column holding this scalar.
    pub fn to_column(&self) -> Column {
        match (self.dtype, &self.value) {
            (DataType::Int64, v) => Column::int64([v.as_ref().map(|v| match v {
                ScalarValue::Int64(x) => *x,
                _ => 0,
            })]),
            (DataType::Float64, v) => Column::float64([v.as_ref().map(|v| match v {
                ScalarValue::Float64(x) => *x,
                _ => 0.0,
            })]),
            (DataType::Bool, v) => Column::bool([v.as_ref().map(|v| matches!(v, ScalarValue::Bool(true)))]),
            (DataType::Utf8, v) => Column::utf8([v.as_ref().map(|v| match v {
                ScalarValue::Utf8(s) => s.as_bytes().to_vec(),
                _ => Vec::new(),
            })]),
        }
    }

    /// Reads row `i` of a column as a scalar.
    pub fn from_column(c: &Column, i: usize) -> Scalar {
        let value = match c.cell(i) {
            Cell::Null => None,
            Cell::Int64(v) => Some(ScalarValue::Int64(v)),
            Cell::Float64(v) => Some(ScalarValue::Float64(v)),
            Cell::Bool(v) => Some(ScalarValue::Bool(v)),
            Cell::Utf8(b) => Some(ScalarValue::Utf8(String::from_utf8_lossy(b).into_owned())),
        };
        Scalar {
            dtype: c.dtype(),
            value,
        }
    }
}

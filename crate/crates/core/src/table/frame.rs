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

//! Schema and table.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::column::{Cell, Column, DataType};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub dtype: DataType,
}

impl Field {
    pub fn new(name: impl Into<String>, dtype: DataType) -> Self {
        Self {
            name: name.into(),
            dtype,
        }
    }
}

/// Ordered, uniquely named column descriptors.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schema {
    fields: Vec<Field>,
}

impl Schema {
    pub fn new(fields: Vec<Field>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &fields {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::invalid(format!("duplicate column name {:?}", f.name)));
            }
        }
        Ok(Self { fields })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn field(&self, i: usize) -> &Field {
        &self.fields[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn project(&self, cols: &[usize]) -> Schema {
        Schema {
            fields: cols.iter().map(|&c| self.fields[c].clone()).collect(),
        }
    }
}

/// Columns of equal length described by a schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    schema: Schema,
    columns: Vec<Column>,
    num_rows: usize,
}

impl Table {
    pub fn new(schema: Schema, columns: Vec<Column>) -> Result<Self> {
        let num_rows = columns.first().map_or(0, Column::len);
        Self::with_num_rows(schema, columns, num_rows)
    }

    /// Like [`Table::new`] but also fixes the row count, which is the only
    /// source of it for a table without columns.
    pub fn with_num_rows(schema: Schema, columns: Vec<Column>, num_rows: usize) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::invalid(format!(
                "schema has {} fields but {} columns given",
                schema.len(),
                columns.len()
            )));
        }
        for (i, (f, c)) in schema.fields().iter().zip(&columns).enumerate() {
            if f.dtype != c.dtype() {
                return Err(Error::invalid(format!(
                    "column {i} ({}) is {} but schema says {}",
                    f.name,
                    c.dtype(),
                    f.dtype
                )));
            }
            if c.len() != num_rows {
                return Err(Error::invalid(format!(
                    "column {i} ({}) has {} rows, expected {num_rows}",
                    f.name,
                    c.len()
                )));
            }
        }
        Ok(Self {
            schema,
            columns,
            num_rows,
        })
    }

    /// Builds a table from `(name, column)` pairs.
    pub fn from_columns<S: Into<String>>(cols: Vec<(S, Column)>) -> Result<Self> {
        let (fields, columns): (Vec<_>, Vec<_>) = cols.into_iter().map(|(n, c)| (Field::new(n, c.dtype()), c)).unzip();
        Self::new(Schema::new(fields)?, columns)
    }

    pub fn empty(schema: Schema) -> Self {
        let columns = schema.fields().iter().map(|f| Column::empty(f.dtype)).collect();
        Self {
            schema,
            columns,
            num_rows: 0,
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &Column {
        &self.columns[i]
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn into_parts(self) -> (Schema, Vec<Column>, usize) {
        (self.schema, self.columns, self.num_rows)
    }

    pub fn check_columns(&self, cols: &[usize]) -> Result<()> {
        if cols.is_empty() {
            return Err(Error::invalid("key column list is empty"));
        }
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.num_columns()) {
            return Err(Error::invalid(format!(
                "column index {bad} out of range for table with {} columns",
                self.num_columns()
            )));
        }
        Ok(())
    }

    pub fn take(&self, indices: &[usize]) -> Table {
        Table {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.take(indices)).collect(),
            num_rows: indices.len(),
        }
    }

    pub fn project(&self, cols: &[usize]) -> Table {
        Table {
            schema: self.schema.project(cols),
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
            num_rows: self.num_rows,
        }
    }

    pub fn slice(&self, start: usize, len: usize) -> Table {
        let idx: Vec<usize> = (start..start + len).collect();
        self.take(&idx)
    }

    /// Cells of one row, in column order.
    pub fn row(&self, i: usize) -> Vec<Cell<'_>> {
        self.columns.iter().map(|c| c.cell(i)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<Cell<'_>>> + '_ {
        (0..self.num_rows).map(|i| self.row(i))
    }
}

/// Concatenates tables that share one schema. `schema` is used when the
/// list is empty.
pub fn concat(schema: &Schema, tables: &[Table]) -> Result<Table> {
    for (i, t) in tables.iter().enumerate() {
        if t.schema() != schema {
            return Err(Error::invalid(format!("table {i} has a different schema")));
        }
    }
    let num_rows = tables.iter().map(Table::num_rows).sum();
    let columns = schema
        .fields()
        .iter()
        .enumerate()
        .map(|(c, f)| {
            let parts: Vec<&Column> = tables.iter().map(|t| t.column(c)).collect();
            Column::concat(f.dtype, &parts)
        })
        .collect::<Result<Vec<_>>>()?;
    Table::with_num_rows(schema.clone(), columns, num_rows)
}

/// Total order on cells of one dtype: nulls last, floats by `total_cmp`,
/// strings bytewise.
#[inline]
pub fn cmp_cells(a: Cell<'_>, b: Cell<'_>) -> Ordering {
    match (a, b) {
        (Cell::Null, Cell::Null) => Ordering::Equal,
        (Cell::Null, _) => Ordering::Greater,
        (_, Cell::Null) => Ordering::Less,
        (Cell::Int64(x), Cell::Int64(y)) => x.cmp(&y),
        (Cell::Float64(x), Cell::Float64(y)) => x.total_cmp(&y),
        (Cell::Bool(x), Cell::Bool(y)) => x.cmp(&y),
        (Cell::Utf8(x), Cell::Utf8(y)) => x.cmp(y),
        (x, y) => panic!("comparing cells of different types: {x:?} vs {y:?}"),
    }
}

/// Equality consistent with [`cmp_cells`] (and with the row hash): nulls
/// equal each other, floats compare by bit pattern.
#[inline]
pub fn cells_equal(a: Cell<'_>, b: Cell<'_>) -> bool {
    match (a, b) {
        (Cell::Float64(x), Cell::Float64(y)) => x.to_bits() == y.to_bits(),
        (x, y) => x == y,
    }
}

/// Lexicographic comparison of row `i` of `a` and row `j` of `b` on the
/// given column lists.
pub fn cmp_rows(a: &Table, i: usize, a_cols: &[usize], b: &Table, j: usize, b_cols: &[usize]) -> Ordering {
    for (&ca, &cb) in a_cols.iter().zip(b_cols) {
        let o = cmp_cells(a.column(ca).cell(i), b.column(cb).cell(j));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

pub fn rows_equal(a: &Table, i: usize, a_cols: &[usize], b: &Table, j: usize, b_cols: &[usize]) -> bool {
    a_cols
        .iter()
        .zip(b_cols)
        .all(|(&ca, &cb)| cells_equal(a.column(ca).cell(i), b.column(cb).cell(j)))
}

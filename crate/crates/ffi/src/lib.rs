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

//! C interface to distdf.
//!
//! Objects cross the boundary as opaque pointers that the caller releases
//! with the matching `*_free` function. Fallible calls return a
//! [`DistdfStatus`] and write results through out-pointers; on failure the
//! message is available from [`distdf_last_error`] on the same thread.
//! Panics are caught at the boundary and reported as
//! [`DistdfStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::sync::Arc;
use std::time::Duration;

use distdf::bench::gen::gen_table;
use distdf::bootstrap::{make_oob_context, OobParams, RendezvousConfig, RespServer};
use distdf::comm::{init_communicator, TcpTransport};
use distdf::dist::{dist_column_agg, dist_groupby, dist_join, dist_sort, dist_unique, DistContext};
use distdf::serializer::{pack_table, unpack_table};
use distdf::table::{
    hash_partition, local_groupby, local_join, local_sort, AggOp, Aggregation, Bitmap, Column, ColumnAggOp, ColumnData,
    DataType, Table, DEFAULT_DDOF,
};
use distdf::{Error, Result};

/// Result of a fallible call. Values 1 to 13 mirror the engine's error
/// codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistdfStatus {
    Ok = 0,
    InvalidArgument = 1,
    CorruptPayload = 2,
    TooManyWorkers = 3,
    Connection = 4,
    BootstrapTimeout = 5,
    ProtocolViolation = 6,
    ChannelBroken = 7,
    ConnectFailure = 8,
    VerificationFailed = 9,
    Store = 10,
    Io = 11,
    Timeout = 12,
    WorkerFailed = 13,
    Panic = 100,
}

impl DistdfStatus {
    pub fn from_error(e: &Error) -> Self {
        use DistdfStatus::*;
        match e.code() {
            1 => InvalidArgument,
            2 => CorruptPayload,
            3 => TooManyWorkers,
            4 => Connection,
            5 => BootstrapTimeout,
            6 => ProtocolViolation,
            7 => ChannelBroken,
            8 => ConnectFailure,
            9 => VerificationFailed,
            10 => Store,
            11 => Io,
            12 => Timeout,
            _ => WorkerFailed,
        }
    }
}

/// Column type codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistdfDtype {
    Int64 = 1,
    Float64 = 2,
    Bool = 3,
    Utf8 = 4,
}

impl From<DataType> for DistdfDtype {
    fn from(d: DataType) -> Self {
        match d {
            DataType::Int64 => DistdfDtype::Int64,
            DataType::Float64 => DistdfDtype::Float64,
            DataType::Bool => DistdfDtype::Bool,
            DataType::Utf8 => DistdfDtype::Utf8,
        }
    }
}

/// Group-by aggregate codes, passed as `uint32_t`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistdfAggOp {
    Sum = 0,
    Count = 1,
    Mean = 2,
    Std = 3,
    Min = 4,
    Max = 5,
}

/// Whole-column aggregate codes, passed as `uint32_t`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistdfColumnAggOp {
    Sum = 0,
    Min = 1,
    Max = 2,
    Count = 3,
}

fn agg_op(code: u32) -> Result<AggOp> {
    Ok(match code {
        0 => AggOp::Sum,
        1 => AggOp::Count,
        2 => AggOp::Mean,
        3 => AggOp::Std,
        4 => AggOp::Min,
        5 => AggOp::Max,
        _ => return Err(Error::invalid(format!("unknown aggregate code {code}"))),
    })
}

fn column_agg_op(code: u32) -> Result<ColumnAggOp> {
    Ok(match code {
        0 => ColumnAggOp::Sum,
        1 => ColumnAggOp::Min,
        2 => ColumnAggOp::Max,
        3 => ColumnAggOp::Count,
        _ => return Err(Error::invalid(format!("unknown column aggregate code {code}"))),
    })
}

/// An immutable table.
pub struct DistdfTable {
    table: Table,
    names: Vec<CString>,
}

impl DistdfTable {
    fn boxed(table: Table) -> *mut DistdfTable {
        let names = table
            .schema()
            .fields()
            .iter()
            .map(|f| CString::new(f.name.replace('\0', "")).unwrap_or_default())
            .collect();
        Box::into_raw(Box::new(DistdfTable { table, names }))
    }
}

/// Accumulates named columns for [`distdf_builder_finish`].
pub struct DistdfTableBuilder {
    columns: Vec<(String, Column)>,
}

/// A rendezvous store served from this process.
pub struct DistdfStore {
    server: RespServer,
    address: CString,
}

/// One worker's handle on a distributed job.
pub struct DistdfContext {
    ctx: DistContext,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', "")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<()>>(f: F) -> DistdfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DistdfStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(&e.to_string());
            DistdfStatus::from_error(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(&format!("panic: {msg}"));
            DistdfStatus::Panic
        }
    }
}

unsafe fn table_ref<'a>(t: *const DistdfTable) -> Result<&'a Table> {
    t.as_ref().map(|t| &t.table).ok_or_else(|| Error::invalid("null table"))
}

unsafe fn context_mut<'a>(c: *mut DistdfContext) -> Result<&'a mut DistContext> {
    c.as_mut()
        .map(|c| &mut c.ctx)
        .ok_or_else(|| Error::invalid("null context"))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize) -> Result<&'a [T]> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(Error::invalid("null array with non-zero length"))
    } else {
        Ok(slice::from_raw_parts(p, len))
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str> {
    if p.is_null() {
        return Err(Error::invalid(format!("null {what}")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<()> {
    if out.is_null() {
        return Err(Error::invalid("null output pointer"));
    }
    out.write(v);
    Ok(())
}

unsafe fn put_table(out: *mut *mut DistdfTable, t: Table) -> Result<()> {
    if out.is_null() {
        return Err(Error::invalid("null output pointer"));
    }
    out.write(DistdfTable::boxed(t));
    Ok(())
}

unsafe fn validity_arg(validity: *const u8, len: usize) -> Bitmap {
    if validity.is_null() {
        Bitmap::all_set(len)
    } else {
        let mut b = Bitmap::with_capacity(len);
        for &v in slice::from_raw_parts(validity, len) {
            b.push(v != 0);
        }
        b
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn distdf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn distdf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn distdf_builder_new() -> *mut DistdfTableBuilder {
    Box::into_raw(Box::new(DistdfTableBuilder { columns: Vec::new() }))
}

#[no_mangle]
pub unsafe extern "C" fn distdf_builder_free(b: *mut DistdfTableBuilder) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

unsafe fn builder_push(
    b: *mut DistdfTableBuilder,
    name: *const c_char,
    col: impl FnOnce() -> Result<Column>,
) -> DistdfStatus {
    guard(|| {
        let b = b.as_mut().ok_or_else(|| Error::invalid("null builder"))?;
        let name = str_arg(name, "column name")?.to_string();
        b.columns.push((name, col()?));
        Ok(())
    })
}

/// Appends an Int64 column. `validity` holds one byte per row (non-zero
/// means valid) and may be null when every row is valid.
#[no_mangle]
pub unsafe extern "C" fn distdf_builder_add_int64(
    b: *mut DistdfTableBuilder,
    name: *const c_char,
    values: *const i64,
    validity: *const u8,
    len: usize,
) -> DistdfStatus {
    builder_push(b, name, || {
        let v = slice_arg(values, len)?.to_vec();
        Column::new(validity_arg(validity, len), ColumnData::Int64(v))
    })
}

#[no_mangle]
pub unsafe extern "C" fn distdf_builder_add_float64(
    b: *mut DistdfTableBuilder,
    name: *const c_char,
    values: *const f64,
    validity: *const u8,
    len: usize,
) -> DistdfStatus {
    builder_push(b, name, || {
        let v = slice_arg(values, len)?.to_vec();
        Column::new(validity_arg(validity, len), ColumnData::Float64(v))
    })
}

/// Appends a Bool column with one byte per value.
#[no_mangle]
pub unsafe extern "C" fn distdf_builder_add_bool(
    b: *mut DistdfTableBuilder,
    name: *const c_char,
    values: *const u8,
    validity: *const u8,
    len: usize,
) -> DistdfStatus {
    builder_push(b, name, || {
        let mut bits = Bitmap::with_capacity(len);
        for &v in slice_arg(values, len)? {
            bits.push(v != 0);
        }
        Column::new(validity_arg(validity, len), ColumnData::Bool(bits))
    })
}

/// Appends a Utf8 column given `len + 1` offsets into `data`.
#[no_mangle]
pub unsafe extern "C" fn distdf_builder_add_utf8(
    b: *mut DistdfTableBuilder,
    name: *const c_char,
    offsets: *const i64,
    data: *const u8,
    data_len: usize,
    validity: *const u8,
    len: usize,
) -> DistdfStatus {
    builder_push(b, name, || {
        let offsets = slice_arg(offsets, len + 1)?.to_vec();
        let data = slice_arg(data, data_len)?.to_vec();
        Column::new(validity_arg(validity, len), ColumnData::Utf8 { offsets, data })
    })
}

/// Consumes the builder, which must not be used afterwards even on failure.
#[no_mangle]
pub unsafe extern "C" fn distdf_builder_finish(b: *mut DistdfTableBuilder, out: *mut *mut DistdfTable) -> DistdfStatus {
    guard(|| {
        if b.is_null() {
            return Err(Error::invalid("null builder"));
        }
        let b = Box::from_raw(b);
        put_table(out, Table::from_columns(b.columns)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn distdf_table_free(t: *mut DistdfTable) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Row count, or 0 for a null table.
#[no_mangle]
pub unsafe extern "C" fn distdf_table_num_rows(t: *const DistdfTable) -> usize {
    t.as_ref().map_or(0, |t| t.table.num_rows())
}

#[no_mangle]
pub unsafe extern "C" fn distdf_table_num_columns(t: *const DistdfTable) -> usize {
    t.as_ref().map_or(0, |t| t.table.num_columns())
}

/// Name of column `col`, owned by the table, or null when out of range.
#[no_mangle]
pub unsafe extern "C" fn distdf_table_column_name(t: *const DistdfTable, col: usize) -> *const c_char {
    t.as_ref()
        .and_then(|t| t.names.get(col))
        .map_or(ptr::null(), |c| c.as_ptr())
}

unsafe fn column_ref<'a>(t: *const DistdfTable, col: usize) -> Result<&'a Column> {
    let t = table_ref(t)?;
    t.check_columns(&[col])?;
    Ok(t.column(col))
}

#[no_mangle]
pub unsafe extern "C" fn distdf_table_column_dtype(
    t: *const DistdfTable,
    col: usize,
    out: *mut DistdfDtype,
) -> DistdfStatus {
    guard(|| put(out, column_ref(t, col)?.dtype().into()))
}

/// Borrowed pointer to the values of an Int64 column, valid while the
/// table lives. Null slots hold unspecified values.
#[no_mangle]
pub unsafe extern "C" fn distdf_table_int64_values(
    t: *const DistdfTable,
    col: usize,
    out: *mut *const i64,
) -> DistdfStatus {
    guard(|| {
        let v = column_ref(t, col)?
            .i64_values()
            .ok_or_else(|| Error::invalid(format!("column {col} is not int64")))?;
        put(out, v.as_ptr())
    })
}

#[no_mangle]
pub unsafe extern "C" fn distdf_table_float64_values(
    t: *const DistdfTable,
    col: usize,
    out: *mut *const f64,
) -> DistdfStatus {
    guard(|| {
        let v = column_ref(t, col)?
            .f64_values()
            .ok_or_else(|| Error::invalid(format!("column {col} is not float64")))?;
        put(out, v.as_ptr())
    })
}

unsafe fn cell_check<'a>(t: *const DistdfTable, col: usize, row: usize) -> Result<&'a Column> {
    let c = column_ref(t, col)?;
    if row >= c.len() {
        return Err(Error::invalid(format!("row {row} out of range for {} rows", c.len())));
    }
    Ok(c)
}

/// Writes 1 to `out` when the cell is non-null, else 0.
#[no_mangle]
pub unsafe extern "C" fn distdf_table_is_valid(
    t: *const DistdfTable,
    col: usize,
    row: usize,
    out: *mut u8,
) -> DistdfStatus {
    guard(|| put(out, cell_check(t, col, row)?.is_valid(row) as u8))
}

#[no_mangle]
pub unsafe extern "C" fn distdf_table_bool_value(
    t: *const DistdfTable,
    col: usize,
    row: usize,
    out: *mut u8,
) -> DistdfStatus {
    guard(|| match cell_check(t, col, row)?.data() {
        ColumnData::Bool(bits) => put(out, bits.get(row) as u8),
        _ => Err(Error::invalid(format!("column {col} is not bool"))),
    })
}

/// Borrowed bytes of a Utf8 cell, not NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn distdf_table_utf8_value(
    t: *const DistdfTable,
    col: usize,
    row: usize,
    out_data: *mut *const u8,
    out_len: *mut usize,
) -> DistdfStatus {
    guard(|| match cell_check(t, col, row)?.data() {
        ColumnData::Utf8 { offsets, data } => {
            let (a, b) = (offsets[row] as usize, offsets[row + 1] as usize);
            put(out_data, data[a..b].as_ptr())?;
            put(out_len, b - a)
        }
        _ => Err(Error::invalid(format!("column {col} is not utf8"))),
    })
}

/// Non-zero when both tables have the same schema and cells.
#[no_mangle]
pub unsafe extern "C" fn distdf_table_equal(a: *const DistdfTable, b: *const DistdfTable) -> u8 {
    match (a.as_ref(), b.as_ref()) {
        (Some(a), Some(b)) => (a.table == b.table) as u8,
        _ => 0,
    }
}

/// Serializes a table into a buffer released with [`distdf_bytes_free`].
#[no_mangle]
pub unsafe extern "C" fn distdf_table_pack(
    t: *const DistdfTable,
    out_data: *mut *mut u8,
    out_len: *mut usize,
) -> DistdfStatus {
    guard(|| {
        let bytes = pack_table(table_ref(t)?).into_boxed_slice();
        if out_data.is_null() || out_len.is_null() {
            return Err(Error::invalid("null output pointer"));
        }
        out_len.write(bytes.len());
        out_data.write(Box::into_raw(bytes).cast());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn distdf_bytes_free(data: *mut u8, len: usize) {
    if !data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(data, len)));
    }
}

#[no_mangle]
pub unsafe extern "C" fn distdf_table_unpack(data: *const u8, len: usize, out: *mut *mut DistdfTable) -> DistdfStatus {
    guard(|| put_table(out, unpack_table(slice_arg(data, len)?)?))
}

/// Synthetic `key`/`value` table for worker `rank` of a job with
/// `total_rows` rows, identical to the benchmark's generator.
#[no_mangle]
pub unsafe extern "C" fn distdf_gen_table(
    rows: u64,
    total_rows: u64,
    unique_fraction: f64,
    seed: u64,
    rank: usize,
    out: *mut *mut DistdfTable,
) -> DistdfStatus {
    guard(|| {
        if !(unique_fraction > 0.0 && unique_fraction <= 1.0) {
            return Err(Error::invalid("unique fraction must be in (0, 1]"));
        }
        put_table(out, gen_table(rows, total_rows, unique_fraction, seed, rank))
    })
}

#[no_mangle]
pub unsafe extern "C" fn distdf_local_join(
    l: *const DistdfTable,
    r: *const DistdfTable,
    l_keys: *const usize,
    r_keys: *const usize,
    num_keys: usize,
    out: *mut *mut DistdfTable,
) -> DistdfStatus {
    guard(|| {
        let (lk, rk) = (slice_arg(l_keys, num_keys)?, slice_arg(r_keys, num_keys)?);
        put_table(out, local_join(table_ref(l)?, table_ref(r)?, lk, rk)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn distdf_local_sort(
    t: *const DistdfTable,
    keys: *const usize,
    num_keys: usize,
    out: *mut *mut DistdfTable,
) -> DistdfStatus {
    guard(|| put_table(out, local_sort(table_ref(t)?, slice_arg(keys, num_keys)?)?))
}

unsafe fn aggregations(cols: *const usize, ops: *const u32, n: usize) -> Result<Vec<Aggregation>> {
    slice_arg(cols, n)?
        .iter()
        .zip(slice_arg(ops, n)?)
        .map(|(&c, &op)| Ok(Aggregation::new(c, agg_op(op)?)))
        .collect()
}

/// Groups on `keys` and applies `agg_ops[i]` (a [`DistdfAggOp`] code) to
/// column `agg_cols[i]`.
#[no_mangle]
pub unsafe extern "C" fn distdf_local_groupby(
    t: *const DistdfTable,
    keys: *const usize,
    num_keys: usize,
    agg_cols: *const usize,
    agg_ops: *const u32,
    num_aggs: usize,
    out: *mut *mut DistdfTable,
) -> DistdfStatus {
    guard(|| {
        let aggs = aggregations(agg_cols, agg_ops, num_aggs)?;
        put_table(
            out,
            local_groupby(table_ref(t)?, slice_arg(keys, num_keys)?, &aggs, DEFAULT_DDOF)?,
        )
    })
}

/// Splits a table into `parts` tables by key hash. `out` must have room
/// for `parts` pointers.
#[no_mangle]
pub unsafe extern "C" fn distdf_hash_partition(
    t: *const DistdfTable,
    keys: *const usize,
    num_keys: usize,
    parts: usize,
    out: *mut *mut DistdfTable,
) -> DistdfStatus {
    guard(|| {
        if out.is_null() {
            return Err(Error::invalid("null output pointer"));
        }
        let pieces = hash_partition(table_ref(t)?, slice_arg(keys, num_keys)?, parts)?;
        for (i, p) in pieces.into_iter().enumerate() {
            out.add(i).write(DistdfTable::boxed(p));
        }
        Ok(())
    })
}

/// Serves a rendezvous store on `address` (`host:port`; null binds an
/// ephemeral localhost port) until freed.
#[no_mangle]
pub unsafe extern "C" fn distdf_store_serve(address: *const c_char, out: *mut *mut DistdfStore) -> DistdfStatus {
    guard(|| {
        let addr = if address.is_null() {
            "127.0.0.1:0"
        } else {
            str_arg(address, "store address")?
        };
        let server = RespServer::bind(addr)?;
        let address = CString::new(server.address()).unwrap_or_default();
        put(out, Box::into_raw(Box::new(DistdfStore { server, address })))
    })
}

/// Bound `host:port` of the store, owned by the store.
#[no_mangle]
pub unsafe extern "C" fn distdf_store_address(s: *const DistdfStore) -> *const c_char {
    s.as_ref().map_or(ptr::null(), |s| s.address.as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn distdf_store_free(s: *mut DistdfStore) {
    if !s.is_null() {
        let s = Box::from_raw(s);
        drop(s.server);
    }
}

/// Joins job `job` of `world_size` workers through the store at
/// `store_address` and connects to every peer over TCP. Blocks until all
/// workers arrive or `timeout_ms` elapses (0 selects the default).
#[no_mangle]
pub unsafe extern "C" fn distdf_context_init_kvstore(
    store_address: *const c_char,
    job: *const c_char,
    world_size: usize,
    timeout_ms: u64,
    out: *mut *mut DistdfContext,
) -> DistdfStatus {
    guard(|| {
        if out.is_null() {
            return Err(Error::invalid("null output pointer"));
        }
        let mut cfg = RendezvousConfig::new(
            str_arg(store_address, "store address")?,
            str_arg(job, "job id")?,
            world_size,
        );
        if timeout_ms > 0 {
            cfg = cfg.with_timeout(Duration::from_millis(timeout_ms));
        }
        let oob = make_oob_context("kvstore", OobParams::KvStore(cfg))?;
        let comm = init_communicator(oob, Arc::new(TcpTransport::localhost()))?;
        put(
            out,
            Box::into_raw(Box::new(DistdfContext {
                ctx: DistContext::new(comm),
            })),
        )
    })
}

/// Rank of this worker, or `SIZE_MAX` for a null context.
#[no_mangle]
pub unsafe extern "C" fn distdf_context_rank(c: *const DistdfContext) -> usize {
    c.as_ref().map_or(usize::MAX, |c| c.ctx.rank())
}

#[no_mangle]
pub unsafe extern "C" fn distdf_context_world_size(c: *const DistdfContext) -> usize {
    c.as_ref().map_or(0, |c| c.ctx.world_size())
}

/// Synchronizes with every worker, closes the channels and releases the
/// context. The context is consumed even on failure.
#[no_mangle]
pub unsafe extern "C" fn distdf_context_finalize(c: *mut DistdfContext) -> DistdfStatus {
    guard(|| {
        if c.is_null() {
            return Err(Error::invalid("null context"));
        }
        Box::from_raw(c).ctx.finalize()
    })
}

/// Releases a context without the closing barrier.
#[no_mangle]
pub unsafe extern "C" fn distdf_context_free(c: *mut DistdfContext) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

#[no_mangle]
pub unsafe extern "C" fn distdf_dist_join(
    c: *mut DistdfContext,
    l: *const DistdfTable,
    r: *const DistdfTable,
    l_keys: *const usize,
    r_keys: *const usize,
    num_keys: usize,
    out: *mut *mut DistdfTable,
) -> DistdfStatus {
    guard(|| {
        let (lk, rk) = (slice_arg(l_keys, num_keys)?, slice_arg(r_keys, num_keys)?);
        let (t, _) = dist_join(context_mut(c)?, table_ref(l)?, table_ref(r)?, lk, rk)?;
        put_table(out, t)
    })
}

#[no_mangle]
pub unsafe extern "C" fn distdf_dist_groupby(
    c: *mut DistdfContext,
    t: *const DistdfTable,
    keys: *const usize,
    num_keys: usize,
    agg_cols: *const usize,
    agg_ops: *const u32,
    num_aggs: usize,
    out: *mut *mut DistdfTable,
) -> DistdfStatus {
    guard(|| {
        let aggs = aggregations(agg_cols, agg_ops, num_aggs)?;
        let (g, _) = dist_groupby(context_mut(c)?, table_ref(t)?, slice_arg(keys, num_keys)?, &aggs)?;
        put_table(out, g)
    })
}

#[no_mangle]
pub unsafe extern "C" fn distdf_dist_sort(
    c: *mut DistdfContext,
    t: *const DistdfTable,
    keys: *const usize,
    num_keys: usize,
    out: *mut *mut DistdfTable,
) -> DistdfStatus {
    guard(|| {
        put_table(
            out,
            dist_sort(context_mut(c)?, table_ref(t)?, slice_arg(keys, num_keys)?)?,
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn distdf_dist_unique(
    c: *mut DistdfContext,
    t: *const DistdfTable,
    keys: *const usize,
    num_keys: usize,
    out: *mut *mut DistdfTable,
) -> DistdfStatus {
    guard(|| {
        put_table(
            out,
            dist_unique(context_mut(c)?, table_ref(t)?, slice_arg(keys, num_keys)?)?,
        )
    })
}

/// Reduces column `col` across all workers into a one-row, one-column
/// table named after the aggregate. `op` is a [`DistdfColumnAggOp`] code.
#[no_mangle]
pub unsafe extern "C" fn distdf_dist_column_agg(
    c: *mut DistdfContext,
    t: *const DistdfTable,
    col: usize,
    op: u32,
    out: *mut *mut DistdfTable,
) -> DistdfStatus {
    guard(|| {
        let op = column_agg_op(op)?;
        let column = column_ref(t, col)?;
        let s = dist_column_agg(context_mut(c)?, column, op)?;
        let name = format!("{op:?}").to_lowercase();
        put_table(out, Table::from_columns(vec![(name, s.to_column())])?)
    })
}

/// Broadcasts the root's table to every worker. Non-root workers pass null
/// for `t`.
#[no_mangle]
pub unsafe extern "C" fn distdf_bcast_table(
    c: *mut DistdfContext,
    t: *const DistdfTable,
    root: usize,
    out: *mut *mut DistdfTable,
) -> DistdfStatus {
    guard(|| {
        let ctx = context_mut(c)?;
        let local = if ctx.rank() == root { Some(table_ref(t)?) } else { None };
        put_table(out, ctx.comm_mut().bcast_table(local, root)?)
    })
}

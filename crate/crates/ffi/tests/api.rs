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

use std::ffi::{CStr, CString};
use std::io;
use std::ptr;
use std::thread;

use distdf::table::{
    hash_partition, local_groupby, local_join, local_sort, AggOp, Aggregation, Column, Table, DEFAULT_DDOF,
};
use distdf::Error;
use distdf_ffi::*;

fn name(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn last_error() -> String {
    CStr::from_ptr(distdf_last_error()).to_string_lossy().into_owned()
}

unsafe fn unpack(t: *mut DistdfTable) -> Table {
    let (mut data, mut len) = (ptr::null_mut(), 0usize);
    assert_eq!(distdf_table_pack(t, &mut data, &mut len), DistdfStatus::Ok);
    let table = distdf::serializer::unpack_table(std::slice::from_raw_parts(data, len)).unwrap();
    distdf_bytes_free(data, len);
    distdf_table_free(t);
    table
}

unsafe fn wrap(t: &Table) -> *mut DistdfTable {
    let bytes = distdf::serializer::pack_table(t);
    let mut out = ptr::null_mut();
    assert_eq!(
        distdf_table_unpack(bytes.as_ptr(), bytes.len(), &mut out),
        DistdfStatus::Ok
    );
    out
}

#[test]
fn status_codes_match_engine_errors() {
    let cases = [
        (Error::invalid("x"), DistdfStatus::InvalidArgument),
        (Error::corrupt("x"), DistdfStatus::CorruptPayload),
        (
            Error::TooManyWorkers { rank: 4, world_size: 4 },
            DistdfStatus::TooManyWorkers,
        ),
        (Error::Connection("x".into()), DistdfStatus::Connection),
        (Error::BootstrapTimeout("x".into()), DistdfStatus::BootstrapTimeout),
        (
            Error::ProtocolViolation {
                rank: None,
                message: "x".into(),
            },
            DistdfStatus::ProtocolViolation,
        ),
        (
            Error::ChannelBroken {
                peer: 1,
                message: "x".into(),
            },
            DistdfStatus::ChannelBroken,
        ),
        (
            Error::ConnectFailure {
                peer: 1,
                message: "x".into(),
            },
            DistdfStatus::ConnectFailure,
        ),
        (Error::VerificationFailed("x".into()), DistdfStatus::VerificationFailed),
        (Error::Store("x".into()), DistdfStatus::Store),
        (Error::Io(io::Error::other("x")), DistdfStatus::Io),
        (Error::Timeout("x".into()), DistdfStatus::Timeout),
        (Error::WorkerFailed("x".into()), DistdfStatus::WorkerFailed),
    ];
    for (e, st) in cases {
        assert_eq!(e.code(), st as i32, "{e}");
        assert_eq!(DistdfStatus::from_error(&e), st);
    }
}

#[test]
fn builder_and_accessors() {
    unsafe {
        let b = distdf_builder_new();
        let ints = [1i64, 2, 3];
        let floats = [0.5f64, 0.0, 2.25];
        let bools = [1u8, 0, 1];
        let valid = [1u8, 0, 1];
        let offsets = [0i64, 2, 2, 5];
        let text = b"hiabc";
        assert_eq!(
            distdf_builder_add_int64(b, name("i").as_ptr(), ints.as_ptr(), ptr::null(), 3),
            DistdfStatus::Ok
        );
        assert_eq!(
            distdf_builder_add_float64(b, name("f").as_ptr(), floats.as_ptr(), valid.as_ptr(), 3),
            DistdfStatus::Ok
        );
        assert_eq!(
            distdf_builder_add_bool(b, name("b").as_ptr(), bools.as_ptr(), ptr::null(), 3),
            DistdfStatus::Ok
        );
        assert_eq!(
            distdf_builder_add_utf8(
                b,
                name("s").as_ptr(),
                offsets.as_ptr(),
                text.as_ptr(),
                text.len(),
                valid.as_ptr(),
                3
            ),
            DistdfStatus::Ok
        );
        let mut t = ptr::null_mut();
        assert_eq!(distdf_builder_finish(b, &mut t), DistdfStatus::Ok);

        assert_eq!(distdf_table_num_rows(t), 3);
        assert_eq!(distdf_table_num_columns(t), 4);
        assert_eq!(CStr::from_ptr(distdf_table_column_name(t, 3)).to_str().unwrap(), "s");
        assert!(distdf_table_column_name(t, 4).is_null());

        let mut dt = DistdfDtype::Bool;
        assert_eq!(distdf_table_column_dtype(t, 1, &mut dt), DistdfStatus::Ok);
        assert_eq!(dt, DistdfDtype::Float64);

        let mut p: *const i64 = ptr::null();
        assert_eq!(distdf_table_int64_values(t, 0, &mut p), DistdfStatus::Ok);
        assert_eq!(std::slice::from_raw_parts(p, 3), &ints);
        assert_eq!(distdf_table_int64_values(t, 1, &mut p), DistdfStatus::InvalidArgument);
        assert!(last_error().contains("not int64"));

        let mut fp: *const f64 = ptr::null();
        assert_eq!(distdf_table_float64_values(t, 1, &mut fp), DistdfStatus::Ok);
        assert_eq!(*fp.add(2), 2.25);

        let mut v = 9u8;
        assert_eq!(distdf_table_is_valid(t, 1, 1, &mut v), DistdfStatus::Ok);
        assert_eq!(v, 0);
        assert_eq!(distdf_table_bool_value(t, 2, 2, &mut v), DistdfStatus::Ok);
        assert_eq!(v, 1);
        assert_eq!(distdf_table_is_valid(t, 0, 3, &mut v), DistdfStatus::InvalidArgument);

        let (mut sp, mut sl) = (ptr::null(), 0usize);
        assert_eq!(distdf_table_utf8_value(t, 3, 2, &mut sp, &mut sl), DistdfStatus::Ok);
        assert_eq!(std::slice::from_raw_parts(sp, sl), b"abc");

        let got = unpack(t);
        let want = Table::from_columns(vec![
            ("i", Column::int64([Some(1), Some(2), Some(3)])),
            ("f", Column::float64([Some(0.5), None, Some(2.25)])),
            ("b", Column::bool([Some(true), Some(false), Some(true)])),
            ("s", Column::utf8([Some("hi"), None, Some("abc")])),
        ])
        .unwrap();
        assert_eq!(got, want);
    }
}

#[test]
fn invalid_input_reports_status_and_message() {
    unsafe {
        let b = distdf_builder_new();
        let offsets = [0i64, 4, 2];
        let st = distdf_builder_add_utf8(
            b,
            name("s").as_ptr(),
            offsets.as_ptr(),
            b"abcd".as_ptr(),
            4,
            ptr::null(),
            2,
        );
        assert_eq!(st, DistdfStatus::CorruptPayload);
        assert!(!last_error().is_empty());
        assert_eq!(
            distdf_builder_add_int64(b, ptr::null(), [1i64].as_ptr(), ptr::null(), 1),
            DistdfStatus::InvalidArgument
        );
        assert_eq!(
            distdf_builder_add_int64(b, name("a").as_ptr(), ptr::null(), ptr::null(), 2),
            DistdfStatus::InvalidArgument
        );
        assert_eq!(
            distdf_builder_add_int64(b, name("a").as_ptr(), [1i64].as_ptr(), ptr::null(), 1),
            DistdfStatus::Ok
        );
        assert_eq!(
            distdf_builder_add_int64(b, name("c").as_ptr(), [1i64, 2].as_ptr(), ptr::null(), 2),
            DistdfStatus::Ok
        );
        let mut out = ptr::null_mut();
        assert_eq!(distdf_builder_finish(b, &mut out), DistdfStatus::InvalidArgument);
        assert!(out.is_null());

        assert_eq!(
            distdf_table_unpack(b"junk".as_ptr(), 4, &mut out),
            DistdfStatus::CorruptPayload
        );
        assert_eq!(
            distdf_local_sort(ptr::null(), ptr::null(), 0, &mut out),
            DistdfStatus::InvalidArgument
        );
        assert_eq!(
            distdf_gen_table(10, 10, 0.0, 1, 0, &mut out),
            DistdfStatus::InvalidArgument
        );
        assert_eq!(distdf_table_num_rows(ptr::null()), 0);
        distdf_table_free(ptr::null_mut());
    }
}

#[test]
fn local_kernels_match_core() {
    unsafe {
        let l_core = distdf::bench::gen::gen_table(300, 300, 0.5, 7, 0);
        let r_core = distdf::bench::gen::gen_table(200, 300, 0.5, 8, 0);
        let (l, r) = (wrap(&l_core), wrap(&r_core));

        let mut out = ptr::null_mut();
        assert_eq!(
            distdf_local_join(l, r, [0usize].as_ptr(), [0usize].as_ptr(), 1, &mut out),
            DistdfStatus::Ok
        );
        assert_eq!(unpack(out), local_join(&l_core, &r_core, &[0], &[0]).unwrap());

        assert_eq!(
            distdf_local_sort(l, [0usize, 1].as_ptr(), 2, &mut out),
            DistdfStatus::Ok
        );
        assert_eq!(unpack(out), local_sort(&l_core, &[0, 1]).unwrap());

        let ops = [
            DistdfAggOp::Sum as u32,
            DistdfAggOp::Std as u32,
            DistdfAggOp::Max as u32,
        ];
        assert_eq!(
            distdf_local_groupby(l, [0usize].as_ptr(), 1, [1usize; 3].as_ptr(), ops.as_ptr(), 3, &mut out),
            DistdfStatus::Ok
        );
        let aggs = [AggOp::Sum, AggOp::Std, AggOp::Max].map(|op| Aggregation::new(1, op));
        assert_eq!(unpack(out), local_groupby(&l_core, &[0], &aggs, DEFAULT_DDOF).unwrap());
        assert_eq!(
            distdf_local_groupby(
                l,
                [0usize].as_ptr(),
                1,
                [1usize].as_ptr(),
                [17u32].as_ptr(),
                1,
                &mut out
            ),
            DistdfStatus::InvalidArgument
        );

        let mut parts = [ptr::null_mut(); 3];
        assert_eq!(
            distdf_hash_partition(l, [0usize].as_ptr(), 1, 3, parts.as_mut_ptr()),
            DistdfStatus::Ok
        );
        let want = hash_partition(&l_core, &[0], 3).unwrap();
        for (p, w) in parts.into_iter().zip(want) {
            assert_eq!(unpack(p), w);
        }

        assert_eq!(distdf_gen_table(300, 300, 0.5, 7, 0, &mut out), DistdfStatus::Ok);
        assert_eq!(distdf_table_equal(out, l), 1);
        assert_eq!(distdf_table_equal(out, r), 0);
        distdf_table_free(out);
        distdf_table_free(l);
        distdf_table_free(r);
    }
}

#[test]
fn distributed_calls_over_kvstore() {
    const W: usize = 3;
    let mut store = ptr::null_mut();
    assert_eq!(unsafe { distdf_store_serve(ptr::null(), &mut store) }, DistdfStatus::Ok);
    let addr = unsafe { CStr::from_ptr(distdf_store_address(store)) }
        .to_str()
        .unwrap()
        .to_string();
    let (total, seed) = (3 * 400u64, 5u64);

    let results: Vec<(usize, Table, Table, Table, i64)> = thread::scope(|s| {
        let handles: Vec<_> = (0..W)
            .map(|_| {
                let addr = addr.clone();
                s.spawn(move || unsafe {
                    let mut c = ptr::null_mut();
                    let st =
                        distdf_context_init_kvstore(name(&addr).as_ptr(), name("ffi-job").as_ptr(), W, 20_000, &mut c);
                    assert_eq!(st, DistdfStatus::Ok, "{}", last_error());
                    let rank = distdf_context_rank(c);
                    assert_eq!(distdf_context_world_size(c), W);

                    let mut t = ptr::null_mut();
                    assert_eq!(distdf_gen_table(400, total, 0.5, seed, rank, &mut t), DistdfStatus::Ok);
                    let mut out = ptr::null_mut();
                    assert_eq!(distdf_dist_sort(c, t, [0usize].as_ptr(), 1, &mut out), DistdfStatus::Ok);
                    let sorted = unpack(out);
                    let ops = [DistdfAggOp::Count as u32];
                    assert_eq!(
                        distdf_dist_groupby(c, t, [0usize].as_ptr(), 1, [1usize].as_ptr(), ops.as_ptr(), 1, &mut out),
                        DistdfStatus::Ok
                    );
                    let grouped = unpack(out);
                    assert_eq!(
                        distdf_dist_unique(c, t, [0usize].as_ptr(), 1, &mut out),
                        DistdfStatus::Ok
                    );
                    distdf_table_free(out);
                    assert_eq!(
                        distdf_dist_join(c, t, t, [0usize].as_ptr(), [0usize].as_ptr(), 1, &mut out),
                        DistdfStatus::Ok
                    );
                    distdf_table_free(out);
                    assert_eq!(
                        distdf_dist_column_agg(c, t, 0, DistdfColumnAggOp::Count as u32, &mut out),
                        DistdfStatus::Ok
                    );
                    let count = unpack(out).column(0).i64_values().unwrap()[0];
                    let root_table = if rank == 1 {
                        t as *const DistdfTable
                    } else {
                        ptr::null()
                    };
                    assert_eq!(distdf_bcast_table(c, root_table, 1, &mut out), DistdfStatus::Ok);
                    let bcast = unpack(out);
                    distdf_table_free(t);
                    assert_eq!(distdf_context_finalize(c), DistdfStatus::Ok, "{}", last_error());
                    (rank, sorted, grouped, bcast, count)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    unsafe { distdf_store_free(store) };

    let inputs: Vec<Table> = (0..W)
        .map(|r| distdf::bench::gen::gen_table(400, total, 0.5, seed, r))
        .collect();
    let all = distdf::table::concat(inputs[0].schema(), &inputs).unwrap();
    let mut ranks: Vec<usize> = results.iter().map(|r| r.0).collect();
    ranks.sort();
    assert_eq!(ranks, vec![0, 1, 2]);
    let mut by_rank = results;
    by_rank.sort_by_key(|r| r.0);
    let pieces: Vec<Table> = by_rank.iter().map(|r| r.1.clone()).collect();
    let sorted = distdf::table::concat(all.schema(), &pieces).unwrap();
    assert_eq!(sorted.column(0), local_sort(&all, &[0]).unwrap().column(0));
    let groups: usize = by_rank.iter().map(|r| r.2.num_rows()).sum();
    assert_eq!(
        groups,
        local_groupby(&all, &[0], &[Aggregation::new(1, AggOp::Count)], 1)
            .unwrap()
            .num_rows()
    );
    for r in &by_rank {
        assert_eq!(r.3, inputs[1]);
        assert_eq!(r.4, total as i64);
    }
}

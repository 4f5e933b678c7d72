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

use distdf::bench::verify::same_multiset;
use distdf::serializer::{deserialize_table, pack_table, serialize_table, unpack_table};
use distdf::table::{
    cells_equal, combine_partials, concat, hash_partition, local_join, local_sort, merge_partials, Column, Table,
};
use proptest::prelude::*;

fn int_column(rows: usize, domain: i64) -> impl Strategy<Value = Column> {
    prop::collection::vec(prop::option::weighted(0.9, 0..domain), rows).prop_map(Column::int64)
}

fn any_column(rows: usize) -> impl Strategy<Value = Column> {
    prop_oneof![
        prop::collection::vec(prop::option::of(any::<i64>()), rows).prop_map(Column::int64),
        prop::collection::vec(prop::option::of(any::<f64>()), rows).prop_map(Column::float64),
        prop::collection::vec(prop::option::of(any::<bool>()), rows).prop_map(Column::bool),
        prop::collection::vec(prop::option::of("[a-z]{0,6}"), rows).prop_map(Column::utf8),
    ]
}

fn any_table() -> impl Strategy<Value = Table> {
    (0usize..5, 0usize..60).prop_flat_map(|(cols, rows)| {
        prop::collection::vec(any_column(rows), cols).prop_map(move |cs| {
            let named = cs.into_iter().enumerate().map(|(i, c)| (format!("c{i}"), c)).collect();
            Table::from_columns(named).unwrap()
        })
    })
}

/// `key` in a small domain so that groups and join matches are common,
/// and an Int64 `value`.
fn keyed_table(max_rows: usize) -> impl Strategy<Value = Table> {
    (0..max_rows).prop_flat_map(|rows| {
        (int_column(rows, 8), int_column(rows, 100))
            .prop_map(|(k, v)| Table::from_columns(vec![("key", k), ("value", v)]).unwrap())
    })
}

proptest! {
    #[test]
    fn serialization_round_trips(t in any_table()) {
        prop_assert_eq!(&deserialize_table(serialize_table(&t)).unwrap(), &t);
        prop_assert_eq!(&unpack_table(&pack_table(&t)).unwrap(), &t);
    }

    #[test]
    fn partition_keeps_every_row_once(t in keyed_table(80), parts in 1usize..6) {
        let pieces = hash_partition(&t, &[0], parts).unwrap();
        prop_assert_eq!(pieces.len(), parts);
        let whole = concat(t.schema(), &pieces).unwrap();
        prop_assert!(same_multiset(&whole, &t).unwrap());
        // equal keys never straddle two pieces
        for (i, a) in pieces.iter().enumerate() {
            for b in &pieces[i + 1..] {
                for x in 0..a.num_rows() {
                    for y in 0..b.num_rows() {
                        prop_assert!(!cells_equal(a.column(0).cell(x), b.column(0).cell(y)));
                    }
                }
            }
        }
    }

    #[test]
    fn join_matches_nested_loop(l in keyed_table(40), r in keyed_table(40)) {
        let got = local_join(&l, &r, &[0], &[0]).unwrap();
        let (lk, rk) = (l.column(0), r.column(0));
        let mut li = Vec::new();
        let mut rv = Vec::new();
        for i in 0..l.num_rows() {
            for j in 0..r.num_rows() {
                if lk.is_valid(i) && rk.is_valid(j) && cells_equal(lk.cell(i), rk.cell(j)) {
                    li.push(i);
                    rv.push(j);
                }
            }
        }
        let want = Table::from_columns(vec![
            ("key", lk.take(&li)),
            ("value", l.column(1).take(&li)),
            ("value_r", r.column(1).take(&rv)),
        ])
        .unwrap();
        prop_assert_eq!(got.num_rows(), want.num_rows());
        prop_assert!(same_multiset(&got, &want).unwrap());
    }

    #[test]
    fn partial_merge_is_associative(a in keyed_table(30), b in keyed_table(30), c in keyed_table(30)) {
        let p = |t: &Table| combine_partials(t, &[0], &[1]).unwrap();
        let merge = |x: &Table, y: &Table| merge_partials(&concat(x.schema(), &[x.clone(), y.clone()]).unwrap(), 1).unwrap();
        let (pa, pb, pc) = (p(&a), p(&b), p(&c));
        let left = merge(&merge(&pa, &pb), &pc);
        let right = merge(&pa, &merge(&pb, &pc));
        prop_assert!(same_multiset(&left, &right).unwrap());
        let all = concat(a.schema(), &[a.clone(), b.clone(), c.clone()]).unwrap();
        prop_assert!(same_multiset(&left, &p(&all)).unwrap());
    }

    #[test]
    fn sort_is_idempotent_and_ordered(t in keyed_table(80)) {
        let once = local_sort(&t, &[0, 1]).unwrap();
        prop_assert_eq!(&local_sort(&once, &[0, 1]).unwrap(), &once);
        prop_assert!(same_multiset(&once, &t).unwrap());
        prop_assert!(distdf::bench::verify::globally_sorted(&[once], &[0, 1]));
    }
}

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

use std::io::Write;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use distdf::bootstrap::{OobContext, StaticExchange, StaticOobContext};
use distdf::comm::frame::{write_frame, FrameHeader};
use distdf::comm::{
    check_available, init_communicator_with, is_available, run_inproc, run_world, CommOp, DataKind, GatherMode,
    InProcTransport, OpState, ReduceOp, TcpTransport, Transport,
};
use distdf::table::{concat, hash_partition, Column, DataType, Scalar, Table};
use distdf::Error;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const T: Duration = Duration::from_secs(30);

fn tcp() -> Arc<dyn Transport> {
    Arc::new(TcpTransport::localhost())
}

fn inproc() -> Arc<dyn Transport> {
    Arc::new(InProcTransport::new())
}

#[test]
fn send_and_receive() {
    let got = run_inproc(2, |c| {
        if c.rank() == 0 {
            let h = c.isend(1, 9, b"abc".to_vec())?;
            c.wait(h)?;
            Ok(Vec::new())
        } else {
            let h = c.irecv(0, 9)?;
            Ok(c.wait(h)?.unwrap())
        }
    })
    .unwrap();
    assert_eq!(got[1], b"abc");
}

#[test]
fn same_tag_arrives_in_send_order() {
    let got = run_inproc(2, |c| {
        if c.rank() == 0 {
            let hs: Vec<_> = (0..50u32)
                .map(|i| c.isend(1, 3, i.to_le_bytes().to_vec()).unwrap())
                .collect();
            c.waitall(&hs)?;
            Ok(Vec::new())
        } else {
            // receives are posted late so most messages land in the unexpected queue
            thread::sleep(Duration::from_millis(20));
            let hs: Vec<_> = (0..50).map(|_| c.irecv(0, 3).unwrap()).collect();
            Ok(c.waitall(&hs)?
                .into_iter()
                .map(|p| u32::from_le_bytes(p.unwrap().try_into().unwrap()))
                .collect())
        }
    })
    .unwrap();
    assert_eq!(got[1], (0..50).collect::<Vec<u32>>());
}

#[test]
fn reserved_tags_and_ranks_are_rejected() {
    run_inproc(2, |c| {
        assert!(matches!(c.isend(1, 1 << 24, vec![]), Err(Error::InvalidArgument(_))));
        assert!(matches!(c.irecv(5, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(c.bcast_bytes(Some(vec![]), 2), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            c.gather_v(&[], 7, GatherMode::Direct),
            Err(Error::InvalidArgument(_))
        ));
        Ok(())
    })
    .unwrap();
}

#[test]
fn single_worker_collectives_are_identity() {
    let t = Table::from_columns(vec![("a", Column::from_i64(vec![1, 2, 3]))]).unwrap();
    run_inproc(1, |c| {
        assert_eq!(c.dialed_connections(), 0);
        assert_eq!(c.live_streams(), 0);
        let h = c.isend(0, 1, b"self".to_vec())?;
        let r = c.irecv(0, 1)?;
        c.wait(h)?;
        assert_eq!(c.wait(r)?.unwrap(), b"self");
        assert_eq!(
            c.all_to_all_buffers(vec![vec![b"x".to_vec(), vec![]]])?,
            vec![vec![b"x".to_vec(), vec![]]]
        );
        assert_eq!(c.allgather_v(b"q")?, vec![b"q".to_vec()]);
        assert_eq!(c.bcast_bytes(Some(b"z".to_vec()), 0)?, b"z");
        assert_eq!(c.allreduce_values(&[4i64, 5], ReduceOp::Sum)?, vec![4, 5]);
        assert_eq!(c.alltoall_table(std::slice::from_ref(&t))?, t);
        assert_eq!(c.bcast_table(Some(&t), 0)?, t);
        c.barrier()
    })
    .unwrap();
}

#[test]
fn four_workers_make_six_connections() {
    for transport in [inproc(), tcp()] {
        let counts = run_world(4, transport, T, |c| {
            assert_eq!(c.live_streams(), 3);
            Ok(c.dialed_connections())
        })
        .unwrap();
        assert_eq!(counts, vec![3, 2, 1, 0]);
        assert_eq!(counts.iter().sum::<usize>(), 6);
    }
}

/// Deterministic per-(source, target) message list for the fuzz test.
fn planned(seed: u64, src: usize, dst: usize) -> Vec<(u32, Vec<u8>)> {
    let mut rng = StdRng::seed_from_u64(seed ^ ((src as u64) << 32) ^ dst as u64);
    let n = rng.gen_range(0..12);
    (0..n)
        .map(|_| {
            let tag = rng.gen_range(0..4u32);
            let len = rng.gen_range(0..300);
            (tag, (0..len).map(|_| rng.gen()).collect())
        })
        .collect()
}

#[test]
fn random_message_matrix_matches_plan() {
    for (seed, transport) in [(1u64, inproc()), (2, inproc()), (3, tcp())] {
        let w = 4;
        let got = run_world(w, transport, T, |c| {
            let me = c.rank();
            let mut sends = Vec::new();
            for dst in 0..w {
                for (tag, p) in planned(seed, me, dst) {
                    sends.push(c.isend(dst, tag, p)?);
                }
            }
            let mut recvs = Vec::new();
            for src in 0..w {
                for (tag, _) in planned(seed, src, me) {
                    recvs.push((src, tag, c.irecv(src, tag)?));
                }
            }
            let mut out = Vec::new();
            for (src, tag, h) in recvs {
                out.push((src, tag, c.wait(h)?.unwrap()));
            }
            c.waitall(&sends)?;
            Ok(out)
        })
        .unwrap();
        for (me, msgs) in got.into_iter().enumerate() {
            let want: Vec<_> = (0..w)
                .flat_map(|src| planned(seed, src, me).into_iter().map(move |(t, p)| (src, t, p)))
                .collect();
            assert_eq!(msgs, want, "rank {me}, seed {seed}");
        }
    }
}

#[test]
fn all_to_all_is_a_transpose() {
    let mut rng = StdRng::seed_from_u64(11);
    for w in [2usize, 3, 4, 8] {
        let matrix: Vec<Vec<Vec<Vec<u8>>>> = (0..w)
            .map(|_| {
                (0..w)
                    .map(|_| {
                        let n = rng.gen_range(0..4);
                        (0..n)
                            .map(|_| {
                                let len = if rng.gen_bool(0.3) { 0 } else { rng.gen_range(1..200) };
                                (0..len).map(|_| rng.gen()).collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let transport = if w == 4 { tcp() } else { inproc() };
        let got = run_world(w, transport, T, |c| c.all_to_all_buffers(matrix[c.rank()].clone())).unwrap();
        for i in 0..w {
            for j in 0..w {
                assert_eq!(got[j][i], matrix[i][j], "w={w} from {i} to {j}");
            }
        }
    }
}

#[test]
fn allgather_agrees_everywhere() {
    let got = run_inproc(4, |c| c.allgather_v(&vec![c.rank() as u8; c.rank() * 3])).unwrap();
    let want: Vec<Vec<u8>> = (0..4).map(|r| vec![r as u8; r * 3]).collect();
    for g in got {
        assert_eq!(g, want);
    }
}

#[test]
fn gather_modes_agree() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..5 {
        let w = rng.gen_range(2..6);
        let root = rng.gen_range(0..w);
        let inputs: Vec<Vec<u8>> = (0..w)
            .map(|_| (0..rng.gen_range(0..64)).map(|_| rng.gen()).collect())
            .collect();
        let run = |mode| run_inproc(w, |c| c.gather_v(&inputs[c.rank()], root, mode)).unwrap();
        let direct = run(GatherMode::Direct);
        let emulated = run(GatherMode::Emulated);
        assert_eq!(direct, emulated);
        assert_eq!(direct[root].as_ref().unwrap(), &inputs);
        assert!(direct.iter().enumerate().all(|(r, g)| (r == root) == g.is_some()));
    }
}

#[test]
fn bcast_buffers_from_nonzero_root() {
    let bufs = vec![b"one".to_vec(), vec![], b"three".to_vec()];
    let got = run_inproc(3, |c| c.bcast_buffers((c.rank() == 2).then(|| bufs.clone()), 2)).unwrap();
    assert!(got.iter().all(|g| g == &bufs));
}

#[test]
fn allreduce_sums_ranks() {
    let got = run_inproc(4, |c| c.allreduce_values(&[c.rank() as i64], ReduceOp::Sum)).unwrap();
    assert!(got.iter().all(|g| g == &[6]));
    let got = run_inproc(4, |c| {
        let r = c.rank() as f64;
        Ok((
            c.allreduce_values(&[r, -r], ReduceOp::Max)?,
            c.allreduce_values(&[c.rank() > 0, c.rank() > 2], ReduceOp::Land)?,
            c.allreduce_values(&[c.rank() > 2], ReduceOp::Lor)?,
        ))
    })
    .unwrap();
    for (m, land, lor) in got {
        assert_eq!(m, vec![3.0, 0.0]);
        assert_eq!(land, vec![false, false]);
        assert_eq!(lor, vec![true]);
    }
}

#[test]
fn allreduce_length_mismatch_is_a_protocol_violation() {
    let got = run_inproc(3, |c| {
        let v = vec![1i64; if c.rank() == 1 { 2 } else { 1 }];
        Ok(c.allreduce_values(&v, ReduceOp::Sum).unwrap_err())
    })
    .unwrap();
    for e in got {
        assert!(matches!(e, Error::ProtocolViolation { .. }), "{e}");
    }
}

#[test]
fn barrier_orders_entries_before_exits() {
    let start = Instant::now();
    let stamps = run_inproc(4, |c| {
        if c.rank() == 0 {
            thread::sleep(Duration::from_millis(100));
        }
        let entered = start.elapsed();
        c.barrier()?;
        Ok((entered, start.elapsed()))
    })
    .unwrap();
    let last_entry = stamps.iter().map(|s| s.0).max().unwrap();
    let first_exit = stamps.iter().map(|s| s.1).min().unwrap();
    assert!(first_exit >= last_entry);
    assert!(first_exit >= Duration::from_millis(100));
}

fn sample(r: usize) -> Table {
    Table::from_columns(vec![
        (
            "k",
            Column::int64((0..5).map(|i| if i == 3 { None } else { Some((r * 10 + i) as i64) })),
        ),
        ("s", Column::utf8((0..5).map(|i| Some(format!("r{r}-{i}"))))),
        ("b", Column::bool((0..5).map(|i| Some(i % 2 == 0)))),
        ("x", Column::float64((0..5).map(|i| Some(i as f64 / 3.0)))),
    ])
    .unwrap()
}

#[test]
fn bcast_table_reaches_receivers_with_schema() {
    let t = Table::from_columns(vec![
        ("id", Column::from_i64(vec![1, 2, 3])),
        ("name", Column::utf8([Some("a"), None, Some("c")])),
    ])
    .unwrap();
    let got = run_inproc(2, |c| c.bcast_table((c.rank() == 0).then_some(&t), 0)).unwrap();
    assert_eq!(got[1], t);
    assert_eq!(got[1].schema(), t.schema());
}

#[test]
fn allreduce_column_sums_elementwise() {
    let got = run_inproc(4, |c| {
        let r = c.rank() as i64;
        c.allreduce_column(&Column::from_i64(vec![r, 10 * r]), ReduceOp::Sum)
    })
    .unwrap();
    for g in got {
        assert_eq!(g, Column::from_i64(vec![6, 60]));
    }
}

#[test]
fn allreduce_skips_nulls() {
    let got = run_inproc(3, |c| {
        let r = c.rank();
        let col = Column::float64([(r != 1).then_some(r as f64), None]);
        Ok((
            c.allreduce_column(&col, ReduceOp::Min)?,
            c.allreduce_scalar(&Scalar::int64(r as i64 + 1), ReduceOp::Max)?,
            c.allreduce_scalar(&Scalar::null(DataType::Int64), ReduceOp::Sum)?,
        ))
    })
    .unwrap();
    for (col, mx, null) in got {
        assert_eq!(col, Column::float64([Some(0.0), None]));
        assert_eq!(mx, Scalar::int64(3));
        assert!(!null.is_valid());
    }
}

#[test]
fn alltoall_table_matches_shuffle_oracle() {
    let w = 4;
    let inputs: Vec<Table> = (0..w).map(sample).collect();
    let got = run_inproc(w, |c| {
        let parts = hash_partition(&inputs[c.rank()], &[0], w)?;
        c.alltoall_table(&parts)
    })
    .unwrap();
    for (q, g) in got.iter().enumerate() {
        let mine: Vec<Table> = inputs
            .iter()
            .map(|t| hash_partition(t, &[0], w).unwrap().swap_remove(q))
            .collect();
        assert_eq!(g, &concat(inputs[0].schema(), &mine).unwrap());
    }
    assert_eq!(got.iter().map(Table::num_rows).sum::<usize>(), 20);
}

#[test]
fn tables_survive_every_collective() {
    let w = 3;
    let got = run_world(w, tcp(), T, |c| {
        let me = sample(c.rank());
        let all = c.allgather_table(&me)?;
        let gathered = c.gather_table(&me, 1, GatherMode::Direct)?;
        let emulated = c.gather_table(&me, 1, GatherMode::Emulated)?;
        let b = c.bcast_table((c.rank() == 2).then_some(&me), 2)?;
        let cols = c.allgather_column(me.column(1))?;
        let sc = c.gather_scalar(&Scalar::from_column(me.column(1), 4), 0, GatherMode::Direct)?;
        Ok((all, gathered, emulated, b, cols, sc))
    })
    .unwrap();
    let want: Vec<Table> = (0..w).map(sample).collect();
    for (r, (all, gathered, emulated, b, cols, sc)) in got.into_iter().enumerate() {
        assert_eq!(all, want);
        assert_eq!(gathered.is_some(), r == 1);
        assert_eq!(gathered, emulated);
        if let Some(g) = gathered {
            assert_eq!(g, want);
        }
        assert_eq!(b, want[2]);
        assert_eq!(cols, want.iter().map(|t| t.column(1).clone()).collect::<Vec<_>>());
        if r == 0 {
            let sc = sc.unwrap();
            assert_eq!(sc[2], Scalar::from_column(want[2].column(1), 4));
        }
    }
}

#[test]
fn schema_mismatch_names_the_rank() {
    let got = run_inproc(3, |c| {
        let t = if c.rank() == 2 {
            Table::from_columns(vec![("k", Column::from_f64(vec![1.0]))]).unwrap()
        } else {
            Table::from_columns(vec![("k", Column::from_i64(vec![1]))]).unwrap()
        };
        Ok(c.allgather_table(&t).unwrap_err())
    })
    .unwrap();
    for (r, e) in got.into_iter().enumerate() {
        let expected = if r == 2 { 0 } else { 2 };
        assert!(
            matches!(e, Error::ProtocolViolation { rank: Some(q), .. } if q == expected),
            "rank {r}: {e}"
        );
    }
}

#[test]
fn availability_matrix() {
    use CommOp::*;
    use DataKind::*;
    let offered = [
        (AllGather, Table),
        (AllGather, Column),
        (AllGather, Scalar),
        (Gather, Table),
        (Gather, Column),
        (Gather, Scalar),
        (Bcast, Table),
        (AllReduce, Column),
        (AllReduce, Scalar),
        (AllToAll, Table),
    ];
    for op in [AllGather, Gather, Bcast, AllReduce, AllToAll] {
        for kind in [Table, Column, Scalar] {
            assert_eq!(is_available(op, kind), offered.contains(&(op, kind)), "{op} {kind}");
        }
    }
    assert!(matches!(check_available(Bcast, Column), Err(Error::InvalidArgument(_))));
    assert!(check_available(AllToAll, Table).is_ok());
}

/// Rank 0 is a real communicator; rank 1 is driven by hand over the raw
/// transport so the test controls the bytes on the wire.
fn with_fake_peer<F>(fake: F) -> Error
where
    F: FnOnce(&mut distdf::comm::transport::Duplex) + Send + 'static,
{
    let transport = Arc::new(InProcTransport::new());
    let ex = StaticExchange::new(2);
    let t2 = Arc::clone(&transport);
    let ex2 = ex.clone();
    let peer = thread::spawn(move || {
        let mut oob = StaticOobContext::new(ex2, 1).unwrap();
        let mut l = t2.listen().unwrap();
        oob.exchange_endpoints(&l.address()).unwrap();
        let mut d = l.accept(T).unwrap();
        let mut hs = [0u8; 8];
        std::io::Read::read_exact(&mut d.reader, &mut hs).unwrap();
        assert_eq!(u32::from_le_bytes(hs[4..].try_into().unwrap()), 0);
        fake(&mut d);
        d.writer.close();
        // keep the read side open until the communicator is done
        d
    });
    let mut c = init_communicator_with(Box::new(StaticOobContext::new(ex, 0).unwrap()), transport, T).unwrap();
    let h = c.irecv(1, 9).unwrap();
    let err = c.wait(h).unwrap_err();
    let _d = peer.join().unwrap();
    // every later operation on the broken peer fails too
    let h2 = c.irecv(1, 9).unwrap();
    assert_eq!(c.test(h2).unwrap(), OpState::Failed);
    err
}

#[test]
fn stream_closed_mid_frame_breaks_the_channel() {
    let e = with_fake_peer(|d| {
        let h = FrameHeader {
            source: 1,
            tag: 9,
            sequence: 0,
            payload_len: 100,
        };
        d.writer.write_all(&h.encode()).unwrap();
        d.writer.write_all(&[1, 2, 3]).unwrap();
        d.writer.flush().unwrap();
    });
    assert!(matches!(e, Error::ChannelBroken { peer: 1, .. }), "{e}");
}

#[test]
fn out_of_order_sequence_breaks_the_channel() {
    let e = with_fake_peer(|d| {
        let h = FrameHeader {
            source: 1,
            tag: 9,
            sequence: 4,
            payload_len: 1,
        };
        write_frame(&mut d.writer, &h, &[0]).unwrap();
    });
    match e {
        Error::ChannelBroken { peer: 1, message } => assert!(message.contains("sequence"), "{message}"),
        other => panic!("{other}"),
    }
}

#[test]
fn test_does_not_block() {
    run_inproc(2, |c| {
        if c.rank() == 1 {
            let h = c.irecv(0, 2)?;
            assert_eq!(c.test(h)?, OpState::InFlight);
            c.barrier()?;
            c.wait(h)?;
        } else {
            c.barrier()?;
            let h = c.isend(1, 2, vec![1])?;
            c.wait(h)?;
        }
        Ok(())
    })
    .unwrap();
}

#[test]
fn wait_times_out() {
    run_world(2, inproc(), T, |c| {
        c.set_timeout(Duration::from_millis(50));
        if c.rank() == 0 {
            let h = c.irecv(1, 1)?;
            assert!(matches!(c.wait(h), Err(Error::Timeout(_))));
        }
        c.set_timeout(T);
        Ok(())
    })
    .unwrap();
}

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

//! What each benchmark worker runs.

use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use super::config::{BenchConfig, BenchOp};
use super::gen::{gen_table, relation_seed, rows_for_rank};
use super::verify::{globally_sorted, grouped_close, same_multiset, scalars_close, FLOAT_TOLERANCE};
use crate::comm::{GatherMode, ReduceOp};
use crate::dist::{dist_column_agg_timed, dist_groupby, dist_join, dist_sort_timed, DistContext, TimingBreakdown};
use crate::error::Result;
use crate::table::{
    column_reduce, concat, local_groupby, local_join, AggOp, Aggregation, Column, ColumnAggOp, Scalar, ScalarValue,
    Table,
};

const KEY: usize = 0;
const VALUE: usize = 1;
const VERIFY_ROOT: usize = 0;

fn groupby_aggs() -> [Aggregation; 3] {
    [
        Aggregation::new(VALUE, AggOp::Sum),
        Aggregation::new(VALUE, AggOp::Mean),
        Aggregation::new(VALUE, AggOp::Std),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepSample {
    pub wall_ns: u64,
    pub breakdown: TimingBreakdown,
    pub rows_out: u64,
}

/// One worker's measurements for one world size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerOutcome {
    pub rank: usize,
    pub world_size: usize,
    pub rows_in: u64,
    pub reps: Vec<RepSample>,
    /// `None` unless verification was requested.
    pub verified: Option<bool>,
}

enum Output {
    Table(Table),
    Scalar(Scalar),
}

impl Output {
    fn rows(&self) -> u64 {
        match self {
            Output::Table(t) => t.num_rows() as u64,
            Output::Scalar(_) => 1,
        }
    }
}

struct Inputs {
    total: u64,
    left: Table,
    right: Option<Table>,
}

fn inputs_for(cfg: &BenchConfig, world_size: usize, rank: usize) -> Inputs {
    let total = cfg.total_rows(world_size);
    let rows = rows_for_rank(total, world_size, rank);
    let gen = |relation| {
        gen_table(
            rows,
            total,
            cfg.unique_fraction,
            relation_seed(cfg.seed, relation),
            rank,
        )
    };
    Inputs {
        total,
        left: gen(0),
        right: (cfg.op == BenchOp::Join).then(|| gen(1)),
    }
}

fn run_op(ctx: &mut DistContext, op: BenchOp, inp: &Inputs) -> Result<(Output, TimingBreakdown)> {
    Ok(match op {
        BenchOp::Join => {
            let (t, b) = dist_join(ctx, &inp.left, inp.right.as_ref().unwrap(), &[KEY], &[KEY])?;
            (Output::Table(t), b)
        }
        BenchOp::Groupby => {
            let (t, b) = dist_groupby(ctx, &inp.left, &[KEY], &groupby_aggs())?;
            (Output::Table(t), b)
        }
        BenchOp::Agg => {
            let (s, b) = dist_column_agg_timed(ctx, inp.left.column(VALUE), ColumnAggOp::Sum)?;
            (Output::Scalar(s), b)
        }
        BenchOp::Sort => {
            let (t, b) = dist_sort_timed(ctx, &inp.left, &[KEY])?;
            (Output::Table(t), b)
        }
    })
}

/// Generates this worker's inputs, runs the configured operator
/// `repetitions` times and optionally verifies the last result.
pub fn run_worker(ctx: &mut DistContext, cfg: &BenchConfig) -> Result<WorkerOutcome> {
    let (rank, w) = (ctx.rank(), ctx.world_size());
    let inp = inputs_for(cfg, w, rank);
    let mut reps = Vec::with_capacity(cfg.repetitions);
    let mut last = None;
    for rep in 0..cfg.repetitions {
        ctx.comm_mut().barrier()?;
        let t0 = Instant::now();
        let (out, breakdown) = run_op(ctx, cfg.op, &inp)?;
        let wall_ns = t0.elapsed().as_nanos() as u64;
        if rank == 0 {
            info!("{} w={w} rep {rep}: {:.3} ms", cfg.op, wall_ns as f64 / 1e6);
        }
        reps.push(RepSample {
            wall_ns,
            breakdown,
            rows_out: out.rows(),
        });
        last = Some(out);
    }
    let verified = match (cfg.verify, last) {
        (true, Some(out)) => Some(verify(ctx, cfg, &inp, out)?),
        _ => None,
    };
    Ok(WorkerOutcome {
        rank,
        world_size: w,
        rows_in: inp.left.num_rows() as u64,
        reps,
        verified,
    })
}

/// Alters one value of the last column, or adds an all-null row when
/// there is nothing to alter.
fn corrupt_table(t: &Table) -> Table {
    let (schema, mut cols, n) = t.clone().into_parts();
    let last = cols.len() - 1;
    let altered = match (cols[last].i64_values(), cols[last].f64_values()) {
        (Some(v), _) if n > 0 => Some(Column::from_i64([&[v[0].wrapping_add(1)], &v[1..]].concat())),
        (_, Some(v)) if n > 0 => Some(Column::from_f64([&[v[0] + 0.5], &v[1..]].concat())),
        _ => None,
    };
    match altered {
        Some(c) => {
            cols[last] = c;
            Table::with_num_rows(schema, cols, n).expect("same shape")
        }
        None => {
            let nulls = schema
                .fields()
                .iter()
                .map(|f| Scalar::null(f.dtype).to_column())
                .collect();
            let null_row = Table::new(schema.clone(), nulls).expect("one null row");
            concat(&schema, &[t.clone(), null_row]).expect("same schema")
        }
    }
}

fn corrupt_scalar(s: &Scalar) -> Scalar {
    match s.value() {
        Some(ScalarValue::Int64(v)) => Scalar::int64(v.wrapping_add(1)),
        Some(ScalarValue::Float64(v)) => Scalar::float64(v + 1.0),
        _ => Scalar::int64(-1),
    }
}

fn verify(ctx: &mut DistContext, cfg: &BenchConfig, inp: &Inputs, out: Output) -> Result<bool> {
    let w = ctx.world_size();
    let me = ctx.rank();
    let faulty = cfg.fault_rank == Some(me);
    let all = |relation| -> Result<Table> {
        let parts: Vec<Table> = (0..w)
            .map(|r| {
                let rows = rows_for_rank(inp.total, w, r);
                gen_table(
                    rows,
                    inp.total,
                    cfg.unique_fraction,
                    relation_seed(cfg.seed, relation),
                    r,
                )
            })
            .collect();
        concat(parts[0].schema(), &parts)
    };
    let ok = match out {
        Output::Table(t) => {
            let t = if faulty { corrupt_table(&t) } else { t };
            let comm = ctx.comm_mut();
            match comm.gather_table(&t, VERIFY_ROOT, GatherMode::Direct)? {
                None => true,
                Some(pieces) => {
                    let got = concat(t.schema(), &pieces)?;
                    match cfg.op {
                        BenchOp::Join => same_multiset(&got, &local_join(&all(0)?, &all(1)?, &[KEY], &[KEY])?)?,
                        BenchOp::Groupby => {
                            let want = local_groupby(&all(0)?, &[KEY], &groupby_aggs(), ctx.ddof())?;
                            grouped_close(&got, &want, 1, FLOAT_TOLERANCE)?
                        }
                        BenchOp::Sort => globally_sorted(&pieces, &[KEY]) && same_multiset(&got, &all(0)?)?,
                        BenchOp::Agg => unreachable!("agg yields a scalar"),
                    }
                }
            }
        }
        Output::Scalar(s) => {
            let s = if faulty { corrupt_scalar(&s) } else { s };
            match ctx.comm_mut().gather_scalar(&s, VERIFY_ROOT, GatherMode::Direct)? {
                None => true,
                Some(all_s) => {
                    let want = column_reduce(all(0)?.column(VALUE), ColumnAggOp::Sum)?;
                    all_s.iter().all(|s| scalars_close(s, &want, FLOAT_TOLERANCE))
                }
            }
        }
    };
    let agreed = ctx.comm_mut().allreduce_values(&[ok], ReduceOp::Land)?;
    Ok(agreed[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::run_dist_inproc;

    fn cfg(op: BenchOp) -> BenchConfig {
        BenchConfig {
            op,
            rows_per_worker: 500,
            repetitions: 2,
            verify: true,
            ..Default::default()
        }
    }

    #[test]
    fn every_op_verifies() {
        for op in [BenchOp::Join, BenchOp::Groupby, BenchOp::Agg, BenchOp::Sort] {
            for w in [1, 3] {
                let c = cfg(op);
                let outs = run_dist_inproc(w, |ctx| run_worker(ctx, &c)).unwrap();
                assert!(
                    outs.iter().all(|o| o.verified == Some(true) && o.reps.len() == 2),
                    "{op} w={w}"
                );
                assert_eq!(outs.iter().map(|o| o.rows_in).sum::<u64>(), 500 * w as u64);
            }
        }
    }

    #[test]
    fn injected_fault_is_caught() {
        for op in [BenchOp::Join, BenchOp::Groupby, BenchOp::Agg, BenchOp::Sort] {
            let c = BenchConfig {
                fault_rank: Some(1),
                ..cfg(op)
            };
            let outs = run_dist_inproc(2, |ctx| run_worker(ctx, &c)).unwrap();
            assert!(outs.iter().all(|o| o.verified == Some(false)), "{op}");
        }
    }
}

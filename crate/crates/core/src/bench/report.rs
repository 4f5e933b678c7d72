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

//! Benchmark reports: per-repetition records, per-world-size medians,
//! and their json-lines, csv and plain-text renderings.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{BenchConfig, ReportFormat};
use super::worker::WorkerOutcome;
use crate::error::{Error, Result};

/// One repetition at one world size. Times come from the slowest
/// (critical) worker of that repetition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub world_size: usize,
    pub repetition: usize,
    pub rows_in: u64,
    /// Result rows summed over workers.
    pub rows_out: u64,
    pub critical_rank: usize,
    pub wall_ns: u64,
    pub partition_ns: u64,
    pub shuffle_ns: u64,
    pub local_compute_ns: u64,
    pub other_ns: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub world_size: usize,
    pub repetitions: usize,
    pub rows_in: u64,
    pub rows_out: u64,
    pub wall_ns: u64,
    pub partition_ns: u64,
    pub shuffle_ns: u64,
    pub local_compute_ns: u64,
    pub other_ns: u64,
    pub verified: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub runs: Vec<RunRecord>,
    /// Verification outcome per world size, in sweep order.
    pub verified: Vec<(usize, Option<bool>)>,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Line<'a> {
    Config(&'a BenchConfig),
    Run(&'a RunRecord),
    Summary(&'a SummaryRecord),
}

/// Median of integer samples; the mean of the two middle values
/// (rounded down) for an even count.
pub fn median(xs: &[u64]) -> Option<u64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_unstable();
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        ((v[n / 2 - 1] as u128 + v[n / 2] as u128) / 2) as u64
    })
}

impl BenchReport {
    pub fn new(config: BenchConfig) -> Self {
        Self {
            config,
            runs: Vec::new(),
            verified: Vec::new(),
        }
    }

    /// Folds every worker's outcome for one world size into run records.
    pub fn add_world(&mut self, outcomes: &[WorkerOutcome]) -> Result<()> {
        let w = outcomes.len();
        if w == 0 {
            return Err(Error::invalid("no worker outcomes"));
        }
        let reps = outcomes[0].reps.len();
        if outcomes.iter().any(|o| o.reps.len() != reps) {
            return Err(Error::invalid("workers report different repetition counts"));
        }
        let rows_in = outcomes.iter().map(|o| o.rows_in).sum();
        for rep in 0..reps {
            let critical = outcomes.iter().max_by_key(|o| (o.reps[rep].wall_ns, o.rank)).unwrap();
            let s = &critical.reps[rep];
            self.runs.push(RunRecord {
                world_size: w,
                repetition: rep,
                rows_in,
                rows_out: outcomes.iter().map(|o| o.reps[rep].rows_out).sum(),
                critical_rank: critical.rank,
                wall_ns: s.wall_ns,
                partition_ns: s.breakdown.partition,
                shuffle_ns: s.breakdown.shuffle,
                local_compute_ns: s.breakdown.local_compute,
                other_ns: s.breakdown.other,
            });
        }
        let verified = if outcomes.iter().any(|o| o.verified == Some(false)) {
            Some(false)
        } else {
            outcomes[0].verified
        };
        self.verified.push((w, verified));
        Ok(())
    }

    /// Verification failed at any world size.
    pub fn failed_verification(&self) -> bool {
        self.verified.iter().any(|(_, v)| *v == Some(false))
    }

    /// Medians per world size, in sweep order.
    pub fn summaries(&self) -> Result<Vec<SummaryRecord>> {
        if self.runs.is_empty() {
            return Err(Error::invalid("report has no repetitions"));
        }
        let mut order: Vec<usize> = Vec::new();
        for r in &self.runs {
            if !order.contains(&r.world_size) {
                order.push(r.world_size);
            }
        }
        Ok(order
            .into_iter()
            .map(|w| {
                let runs: Vec<&RunRecord> = self.runs.iter().filter(|r| r.world_size == w).collect();
                let med = |f: fn(&RunRecord) -> u64| median(&runs.iter().map(|r| f(r)).collect::<Vec<_>>()).unwrap();
                SummaryRecord {
                    world_size: w,
                    repetitions: runs.len(),
                    rows_in: runs[0].rows_in,
                    rows_out: runs[runs.len() - 1].rows_out,
                    wall_ns: med(|r| r.wall_ns),
                    partition_ns: med(|r| r.partition_ns),
                    shuffle_ns: med(|r| r.shuffle_ns),
                    local_compute_ns: med(|r| r.local_compute_ns),
                    other_ns: med(|r| r.other_ns),
                    verified: self.verified.iter().find(|(x, _)| *x == w).and_then(|(_, v)| *v),
                }
            })
            .collect())
    }
}

fn opt_bool(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "true",
        Some(false) => "false",
        None => "",
    }
}

fn ms(ns: u64) -> String {
    format!("{:.3}", ns as f64 / 1e6)
}

fn pct(part: u64, whole: u64) -> String {
    if whole == 0 {
        "-".into()
    } else {
        format!("{:.1}", 100.0 * part as f64 / whole as f64)
    }
}

const CSV_HEADER: &str =
    "record,world_size,repetition,rows_in,rows_out,wall_ns,partition_ns,shuffle_ns,local_compute_ns,other_ns,verified";

/// Writes the report. Output depends only on the report's contents.
pub fn emit_report(report: &BenchReport, format: ReportFormat, out: &mut dyn Write) -> Result<()> {
    let summaries = report.summaries()?;
    match format {
        ReportFormat::JsonLines => {
            let mut line = |l: Line<'_>| -> Result<()> {
                serde_json::to_writer(&mut *out, &l).map_err(io::Error::from)?;
                out.write_all(b"\n")?;
                Ok(())
            };
            line(Line::Config(&report.config))?;
            for r in &report.runs {
                line(Line::Run(r))?;
            }
            for s in &summaries {
                line(Line::Summary(s))?;
            }
        }
        ReportFormat::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for r in &report.runs {
                writeln!(
                    out,
                    "run,{},{},{},{},{},{},{},{},{},",
                    r.world_size,
                    r.repetition,
                    r.rows_in,
                    r.rows_out,
                    r.wall_ns,
                    r.partition_ns,
                    r.shuffle_ns,
                    r.local_compute_ns,
                    r.other_ns
                )?;
            }
            for s in &summaries {
                writeln!(
                    out,
                    "summary,{},,{},{},{},{},{},{},{},{}",
                    s.world_size,
                    s.rows_in,
                    s.rows_out,
                    s.wall_ns,
                    s.partition_ns,
                    s.shuffle_ns,
                    s.local_compute_ns,
                    s.other_ns,
                    opt_bool(s.verified)
                )?;
            }
        }
        ReportFormat::Pretty => {
            let c = &report.config;
            writeln!(
                out,
                "{} ({} scaling, {} transport, unique fraction {}, seed {}, median of {} repetitions)",
                c.op, c.mode, c.transport, c.unique_fraction, c.seed, c.repetitions
            )?;
            let header = [
                "workers",
                "rows in",
                "rows out",
                "wall ms",
                "partition ms",
                "shuffle ms",
                "compute ms",
                "other ms",
                "shuffle %",
                "compute %",
                "verified",
            ];
            let rows: Vec<[String; 11]> = summaries
                .iter()
                .map(|s| {
                    [
                        s.world_size.to_string(),
                        s.rows_in.to_string(),
                        s.rows_out.to_string(),
                        ms(s.wall_ns),
                        ms(s.partition_ns),
                        ms(s.shuffle_ns),
                        ms(s.local_compute_ns),
                        ms(s.other_ns),
                        pct(s.shuffle_ns, s.wall_ns),
                        pct(s.local_compute_ns, s.wall_ns),
                        match s.verified {
                            Some(true) => "ok".into(),
                            Some(false) => "FAILED".into(),
                            None => "-".into(),
                        },
                    ]
                })
                .collect();
            let widths: Vec<usize> = (0..header.len())
                .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap())
                .collect();
            let cells: Vec<String> = header.iter().zip(&widths).map(|(h, w)| format!("{h:>w$}")).collect();
            writeln!(out, "{}", cells.join("  "))?;
            writeln!(
                out,
                "{}",
                widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  ")
            )?;
            for r in rows {
                let cells: Vec<String> = r.iter().zip(&widths).map(|(v, w)| format!("{v:>w$}")).collect();
                writeln!(out, "{}", cells.join("  "))?;
            }
        }
    }
    Ok(())
}

/// Writes to `path`, or to stdout when no path is given.
pub fn write_report(report: &BenchReport, format: ReportFormat, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            emit_report(report, format, &mut f)?;
            f.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            emit_report(report, format, &mut lock)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[5]), Some(5));
        assert_eq!(median(&[9, 1, 5]), Some(5));
        assert_eq!(median(&[4, 1, 3, 2]), Some(2));
        assert_eq!(median(&[u64::MAX, u64::MAX]), Some(u64::MAX));
    }

    #[test]
    fn empty_report_is_rejected() {
        let r = BenchReport::new(BenchConfig::default());
        assert!(matches!(
            emit_report(&r, ReportFormat::Csv, &mut Vec::new()),
            Err(Error::InvalidArgument(_))
        ));
    }
}

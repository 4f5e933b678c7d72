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

//! Benchmark configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! str_enum {
    ($name:ident, $label:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "kebab-case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $(Self::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok(Self::$variant),)+
                    other => Err(Error::invalid(format!(concat!("unknown ", $label, " {:?}"), other))),
                }
            }
        }
    };
}

str_enum!(BenchOp, "operator" { Join => "join", Groupby => "groupby", Agg => "agg", Sort => "sort" });
str_enum!(ScalingMode, "scaling mode" { Strong => "strong", Weak => "weak" });
str_enum!(TransportKind, "transport" { Inproc => "inproc", Tcp => "tcp" });
str_enum!(ReportFormat, "report format" { JsonLines => "json-lines", Csv => "csv", Pretty => "pretty" });

pub const DEFAULT_ROWS_PER_WORKER: u64 = 100_000;
pub const DEFAULT_REPETITIONS: usize = 3;
pub const DEFAULT_UNIQUE_FRACTION: f64 = 0.9;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub op: BenchOp,
    pub mode: ScalingMode,
    /// Rows per worker in weak mode. In strong mode the total is
    /// `total_rows` if set, else this times the largest world size.
    pub rows_per_worker: u64,
    pub total_rows: Option<u64>,
    pub unique_fraction: f64,
    /// World sizes to run, in order. More than one makes a sweep.
    pub world_sizes: Vec<usize>,
    pub seed: u64,
    pub transport: TransportKind,
    pub store: Option<String>,
    pub repetitions: usize,
    pub verify: bool,
    /// Rank whose result is deliberately corrupted before verification.
    pub fault_rank: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub format: Option<ReportFormat>,
    /// Executable started for each tcp worker; defaults to the current one.
    #[serde(skip)]
    pub worker_exe: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            op: BenchOp::Join,
            mode: ScalingMode::Weak,
            rows_per_worker: DEFAULT_ROWS_PER_WORKER,
            total_rows: None,
            unique_fraction: DEFAULT_UNIQUE_FRACTION,
            world_sizes: vec![1],
            seed: DEFAULT_SEED,
            transport: TransportKind::Inproc,
            store: None,
            repetitions: DEFAULT_REPETITIONS,
            verify: false,
            fault_rank: None,
            out: None,
            format: None,
            worker_exe: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.unique_fraction > 0.0 && self.unique_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "unique fraction {} is outside (0, 1]",
                self.unique_fraction
            )));
        }
        if self.world_sizes.is_empty() || self.world_sizes.contains(&0) {
            return Err(Error::invalid("world sizes must be non-empty and positive"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        Ok(())
    }

    /// Total rows per relation for a run at `world_size`.
    pub fn total_rows(&self, world_size: usize) -> u64 {
        match self.mode {
            ScalingMode::Weak => self.rows_per_worker * world_size as u64,
            ScalingMode::Strong => self
                .total_rows
                .unwrap_or_else(|| self.rows_per_worker * self.world_sizes.iter().copied().max().unwrap_or(1) as u64),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for op in [BenchOp::Join, BenchOp::Groupby, BenchOp::Agg, BenchOp::Sort] {
            assert_eq!(op.as_str().parse::<BenchOp>().unwrap(), op);
        }
        assert_eq!("json-lines".parse::<ReportFormat>().unwrap(), ReportFormat::JsonLines);
        assert!("mpi".parse::<TransportKind>().is_err());
    }

    #[test]
    fn weak_and_strong_totals() {
        let mut c = BenchConfig {
            rows_per_worker: 10,
            world_sizes: vec![1, 2, 4, 8],
            ..Default::default()
        };
        let weak: Vec<u64> = c.world_sizes.iter().map(|&w| c.total_rows(w)).collect();
        assert_eq!(weak, vec![10, 20, 40, 80]);
        c.mode = ScalingMode::Strong;
        assert!(c.world_sizes.iter().all(|&w| c.total_rows(w) == 80));
        c.total_rows = Some(1000);
        assert_eq!(c.total_rows(2), 1000);
    }
}

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

//! Benchmark harness: synthetic data, worker launching, scaling sweeps
//! and timing reports.

mod config;
pub mod gen;
mod launch;
mod report;
pub mod verify;
mod worker;

pub use config::{
    BenchConfig, BenchOp, ReportFormat, ScalingMode, TransportKind, DEFAULT_REPETITIONS, DEFAULT_ROWS_PER_WORKER,
    DEFAULT_SEED, DEFAULT_UNIQUE_FRACTION,
};
pub use gen::gen_table;
pub use launch::{
    exit_code, launch_local, worker_main, LaunchOutcome, EXIT_BOOTSTRAP_TIMEOUT, EXIT_VERIFICATION_FAILED,
};
pub use report::{emit_report, median, write_report, BenchReport, RunRecord, SummaryRecord};
pub use worker::{run_worker, RepSample, WorkerOutcome};

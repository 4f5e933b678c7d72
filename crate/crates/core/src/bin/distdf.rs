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

//! `distdf` command line: benchmarks, tcp workers and the rendezvous store.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use log::error;

use distdf::bench::{
    exit_code, launch_local, worker_main, write_report, BenchConfig, BenchOp, ReportFormat, ScalingMode, TransportKind,
    DEFAULT_REPETITIONS, DEFAULT_ROWS_PER_WORKER, DEFAULT_SEED, DEFAULT_UNIQUE_FRACTION, EXIT_VERIFICATION_FAILED,
};
use distdf::bootstrap::{RespServer, STORE_ENV};

#[derive(Parser)]
#[command(name = "distdf", version, about = "Distributed dataframe operators and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scaling benchmark on this machine.
    Bench(BenchArgs),
    /// Serve the rendezvous key-value store.
    Store {
        #[arg(long, default_value = "127.0.0.1:6379")]
        listen: String,
    },
    #[command(hide = true)]
    Worker(WorkerArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// join, groupby, agg or sort.
    #[arg(long, value_parser = parse::<BenchOp>)]
    op: BenchOp,
    /// weak keeps rows per worker fixed; strong splits a fixed total.
    #[arg(long, default_value = "weak", value_parser = parse::<ScalingMode>)]
    mode: ScalingMode,
    /// Rows per relation on each worker in weak mode.
    #[arg(long, default_value_t = DEFAULT_ROWS_PER_WORKER)]
    rows_per_worker: u64,
    /// Total rows per relation in strong mode.
    #[arg(long)]
    total_rows: Option<u64>,
    /// One world size, or a comma-separated sweep such as 1,2,4,8.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    world_size: Vec<usize>,
    /// Fraction of rows with distinct keys, in (0, 1].
    #[arg(long, default_value_t = DEFAULT_UNIQUE_FRACTION)]
    unique_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// inproc (threads) or tcp (one process per worker).
    #[arg(long, default_value = "inproc", value_parser = parse::<TransportKind>)]
    transport: TransportKind,
    /// Rendezvous store for tcp runs; one is embedded when absent.
    #[arg(long, env = STORE_ENV)]
    store: Option<String>,
    /// Timed runs per world size.
    #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
    repetitions: usize,
    /// Check every result against a single-process computation.
    #[arg(long)]
    verify: bool,
    /// Report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to json-lines with --out and pretty without.
    #[arg(long, value_parser = parse::<ReportFormat>)]
    format: Option<ReportFormat>,
    /// Corrupt this rank's result before verification.
    #[arg(long, hide = true)]
    inject_fault: Option<usize>,
}

#[derive(Args)]
struct WorkerArgs {
    #[arg(long)]
    config: String,
    #[arg(long)]
    store: String,
    #[arg(long)]
    job: String,
    #[arg(long)]
    world_size: usize,
    /// Seconds to wait for peers during rendezvous.
    #[arg(long)]
    bootstrap_timeout: Option<f64>,
}

fn parse<T: std::str::FromStr<Err = distdf::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: distdf::Error| e.to_string())
}

fn bench(a: BenchArgs) -> ExitCode {
    let cfg = BenchConfig {
        op: a.op,
        mode: a.mode,
        rows_per_worker: a.rows_per_worker,
        total_rows: a.total_rows,
        unique_fraction: a.unique_fraction,
        world_sizes: a.world_size,
        seed: a.seed,
        transport: a.transport,
        store: a.store,
        repetitions: a.repetitions,
        verify: a.verify,
        fault_rank: a.inject_fault,
        out: a.out.clone(),
        format: a.format,
        worker_exe: None,
    };
    let outcome = launch_local(&cfg);
    if !outcome.report.runs.is_empty() {
        let format = a.format.unwrap_or(if a.out.is_some() {
            ReportFormat::JsonLines
        } else {
            ReportFormat::Pretty
        });
        if let Err(e) = write_report(&outcome.report, format, a.out.as_deref()) {
            error!("cannot write report: {e}");
            return ExitCode::from(1);
        }
        if a.out.is_some() && format != ReportFormat::Pretty {
            let _ = distdf::bench::emit_report(&outcome.report, ReportFormat::Pretty, &mut std::io::stderr());
        }
    }
    match outcome.into_result() {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("distdf: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn worker(a: WorkerArgs) -> ExitCode {
    let run = || -> distdf::Result<_> {
        let cfg: BenchConfig =
            serde_json::from_str(&a.config).map_err(|e| distdf::Error::invalid(format!("worker config: {e}")))?;
        let timeout = a.bootstrap_timeout.map(Duration::from_secs_f64);
        worker_main(&cfg, &a.store, &a.job, a.world_size, timeout)
    };
    match run() {
        Ok(out) => {
            println!("{}", serde_json::to_string(&out).expect("outcome serializes"));
            if out.verified == Some(false) {
                ExitCode::from(EXIT_VERIFICATION_FAILED as u8)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("distdf worker: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn store(listen: &str) -> ExitCode {
    match RespServer::bind(listen) {
        Ok(server) => {
            println!("{}", server.address());
            loop {
                std::thread::park();
            }
        }
        Err(e) => {
            eprintln!("distdf store: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Bench(a) => bench(a),
        Command::Store { listen } => store(&listen),
        Command::Worker(a) => worker(a),
    }
}
